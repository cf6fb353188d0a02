import numpy as np
import pytest

from tebe.ode import witten_u0_derivs
from tebe.params import ModelParams
from tebe.series import (NearZeroExpansion, ResonanceError, a_from_first_integral,
                         derive_recurrence, farfield_residuals, farfield_state, series_residual,
                         series_state)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_v_quadratic_coefficient(k):
    _, gamma = derive_recurrence(ModelParams(k, 0.0), 6, 0.4, -1.0)
    assert gamma[2] == pytest.approx(2 * k)
    assert gamma[0] == 0.0 and gamma[1] == 0.0 and gamma[3] == -1.0


@pytest.mark.parametrize("k,zeta", [(1, 0.0), (2, 0.2), (3, 0.45)])
@pytest.mark.parametrize("order", [5, 6, 8])
def test_residual_order(k, zeta, order):
    exp = NearZeroExpansion(ModelParams(k, zeta), 0.7, -2.0, order=order)
    tau = np.geomspace(1e-4, 1e-2, 9)
    r = np.array([series_residual(exp, t) for t in tau])
    keep = r > 1e-15 * 1e6          # ignore points already at roundoff
    if keep.sum() < 3:
        return
    slope = np.polyfit(np.log(tau[keep]), np.log(r[keep]), 1)[0]
    assert slope >= order - 1 - 0.2


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_untwisted_a_is_taylor_coefficient(k):
    p = ModelParams(k, 0.0)
    tau = np.linspace(1e-3, 5e-2, 40)
    u, _, _ = witten_u0_derivs(p, tau)
    # even Taylor polynomial in tau: c2 tau^2 + c4 tau^4 + c6 tau^6
    X = np.vstack([tau ** 2, tau ** 4, tau ** 6]).T
    coeff = np.linalg.lstsq(X, u - np.log(2 * tau), rcond=None)[0][0]
    assert a_from_first_integral(p) == pytest.approx(coeff, abs=1e-6)


def test_series_matches_closed_form_untwisted():
    p = ModelParams(2, 0.0)
    exp = NearZeroExpansion(p, a_from_first_integral(p), 0.0, order=8)
    s = series_state(exp, 1e-2)
    u, du, _ = witten_u0_derivs(p, 1e-2)
    assert s.u == pytest.approx(u, abs=1e-13) and s.du == pytest.approx(du, abs=1e-10)


def test_series_refuses_beyond_seed():
    exp = NearZeroExpansion(ModelParams(1, 0.1), 0.5, 0.0)
    with pytest.raises(ValueError):
        series_state(exp, 0.5)


def test_order_bounds():
    with pytest.raises(ValueError):
        derive_recurrence(ModelParams(1, 0.0), 2, 0.0, 0.0)


def test_resonance_error_names_power():
    err = ResonanceError(2, "u", 0.3)
    assert err.power == 2 and "2" in str(err)


def test_farfield_trivial_state():
    p = ModelParams(1, 0.2)
    assert farfield_residuals(p, [0.0, p.b, 0.0, 0.0], 15.0) == (0.0, 0.0)


def test_farfield_untwisted_rate():
    p = ModelParams(2, 0.0)
    u, du, _ = witten_u0_derivs(p, 15.0)
    r1, _ = farfield_residuals(p, [u, du, 0, 0], 15.0)
    assert r1 == pytest.approx(2 * p.b * np.exp(-2 * p.b * 15.0), rel=1e-6)


def test_farfield_requires_range():
    with pytest.raises(ValueError):
        farfield_residuals(ModelParams(1, 0.0), [0, 2, 0, 0], 4.0)


def test_farfield_state_satisfies_first_integral():
    from tebe.ode import first_integral
    p = ModelParams(3, 0.3)
    s = farfield_state(p, 15.0, 0.01, 0.5)
    assert first_integral(p, s) == pytest.approx(p.b ** 2, rel=1e-14)
    assert s.dv == 0.0
