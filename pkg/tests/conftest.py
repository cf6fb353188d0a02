import time

import pytest

from tebe.params import ModelParams
from tebe.solver import continue_in_zeta, shoot

SWEEP_ZETAS = (0.0, 0.1, 0.25, 0.4, 0.45)


@pytest.fixture(scope="session")
def untwisted():
    """Converged zeta = 0 profiles for k = 1..3."""
    return {k: shoot(ModelParams(k, 0.0)) for k in (1, 2, 3)}


@pytest.fixture(scope="session")
def sweeps():
    """Continuation runs to zeta = 0.45 for k = 1..3, with wall time per run."""
    out = {}
    for k in (1, 2, 3):
        t0 = time.perf_counter()
        run = continue_in_zeta(k, 0.45, targets=SWEEP_ZETAS[1:])
        out[k] = (run, time.perf_counter() - t0)
    return out


def at_zeta(run, zeta):
    for pr in run.profiles:
        if pr.p.zeta == zeta:
            return pr
    raise KeyError(zeta)


@pytest.fixture(scope="session")
def k1_family(sweeps):
    run = sweeps[1][0]
    return {z: at_zeta(run, z) for z in SWEEP_ZETAS}


@pytest.fixture(scope="session")
def k1_zeta03():
    return continue_in_zeta(1, 0.3).profiles[-1]
