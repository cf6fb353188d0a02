import dataclasses
import json

import numpy as np
import pytest

from conftest import SWEEP_ZETAS, at_zeta
from tebe.params import ModelParams
from tebe.solver import continue_in_zeta, shoot
from tebe.verify import (FitError, check_all, constants_to_json, derived_far_constants,
                         fit_constants, load_constants)

NAMES = ["first_integral", "u_prime_monotone", "first_bound", "preliminary_bounds",
         "upper_bound_near_zero", "v_prime_near_zero", "quadratic_near_zero",
         "w_bounds_far", "V_vprime_far"]


def test_nine_named_records(untwisted):
    rep = check_all(untwisted[1])
    assert [r.name for r in rep.records] == NAMES
    assert rep.passed, rep.failures()
    d = rep.to_dict()
    assert d["passed"] and len(d["records"]) == 9
    json.dumps(d)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("zeta", SWEEP_ZETAS)
def test_sweep_profiles_pass(sweeps, k, zeta):
    rep = check_all(at_zeta(sweeps[k][0], zeta))
    assert rep.passed, [(r.name, r.margin, r.detail) for r in rep.records if not r.passed]


def test_independent_twisted_profile_passes():
    # a profile reached along a different step sequence than the fitted family
    pr = continue_in_zeta(2, 0.2).profiles[-1]
    assert pr.p.zeta == 0.2
    assert check_all(pr).passed


def _bumped(profile, i0, amount):
    st = profile.states.copy()
    st[i0, 1] += amount
    return dataclasses.replace(profile, states=st)


def test_corrupted_monotonicity_reports_location(untwisted):
    pr = untwisted[1]
    i0 = 500
    rep = check_all(_bumped(pr, i0, 1e-3))
    bad = {r.name: r for r in rep.records if not r.passed}
    assert "u_prime_monotone" in bad
    assert f"tau={pr.grid[i0]:.6g}" in bad["u_prime_monotone"].detail


def test_tolerance_monotone(untwisted):
    # loosening the tolerance never turns a pass into a fail
    pr = _bumped(untwisted[2], 400, 3e-9)
    prev = None
    for s in (0.1, 1.0, 10.0, 100.0, 1e4):
        ok = {r.name: r.passed for r in check_all(pr, tol_scale=s).records}
        if prev is not None:
            assert all(ok[n] for n in prev if prev[n])
        prev = ok


def test_missing_constants_fail_closed(untwisted):
    rep = check_all(untwisted[1], constants={})
    assert not rep.passed
    assert rep.failures() == NAMES[4:]


def test_fit_deterministic(untwisted):
    profs = list(untwisted.values())
    assert constants_to_json(fit_constants(profs)) == constants_to_json(fit_constants(profs))


def test_shipped_constants_match_refit(untwisted):
    shipped = load_constants()
    refit = fit_constants(list(untwisted.values()))
    for k in (1, 2, 3):
        assert shipped[k] == refit[k]


def test_fit_rejects_twisted(k1_zeta03):
    with pytest.raises(FitError):
        fit_constants([k1_zeta03])


def test_fit_fails_beyond_cap():
    with pytest.raises(FitError, match="no admissible tau0"):
        fit_constants([shoot(ModelParams(5, 0.0))])


def test_constants_tau0_admissible():
    for c in load_constants().values():
        assert 0 < c.tau0 <= 0.5
        assert c.C_quad <= 2 * 10


def test_constants_schema_checked(tmp_path):
    doc = json.loads(constants_to_json(load_constants()))
    doc["schema_version"] = "9.0"
    f = tmp_path / "c.json"
    f.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_constants(f)


def test_derived_far_constants_ordering():
    c = load_constants()[1]
    for z in (0.0, 0.25, 0.45):
        d = derived_far_constants(ModelParams(1, z), c)
        assert d["K_up"] >= d["K_low"] > 0 and d["C_w_low"] > 0


def test_first_integral_check_sensitive(untwisted):
    pr = untwisted[3]
    st = pr.states.copy()
    st[:, 1] *= 1 + 1e-6
    rep = check_all(dataclasses.replace(pr, states=st))
    assert "first_integral" in rep.failures()
