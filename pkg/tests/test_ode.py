import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tebe.ode import (NonFiniteError, V_of, first_integral, rhs_sigma, rhs_tau, rhs_tau_scalar,
                      sigma_accel_to_tau, tau_state_to_sigma, witten_u0, witten_u0_derivs)
from tebe.params import ModelParams


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_closed_form_zeroes_u_equation(k):
    p = ModelParams(k, 0.0)
    tau = np.geomspace(1e-3, 20, 400)
    u, du, ddu = witten_u0_derivs(p, tau)
    rhs = rhs_tau(p, tau, [u, du, np.zeros_like(u), np.zeros_like(u)])
    assert np.max(np.abs(rhs[1] - ddu) / np.maximum(1, np.abs(ddu))) < 1e-10


def test_closed_form_normalisation():
    p = ModelParams(2, 0.0)
    tau = np.array([1e-4, 1e-3])
    assert np.allclose(witten_u0(p, tau) - np.log(2 * tau), p.b ** 2 * tau ** 2 / 6, rtol=1e-3)
    # no overflow far out
    assert np.isfinite(witten_u0(p, 400.0))


@pytest.mark.parametrize("k", [1, 3, 5])
def test_first_integral_identity_closed_form(k):
    p = ModelParams(k, 0.0)
    tau = np.linspace(0.01, 12, 50)
    u, du, _ = witten_u0_derivs(p, tau)
    fi = first_integral(p, [u, du, 0 * u, 0 * u])
    assert np.allclose(fi, p.b ** 2, rtol=1e-12)


def test_v_independence_untwisted():
    p = ModelParams(2, 0.0)
    s1 = rhs_tau(p, 0.7, [0.3, 1.1, 0.0, 0.4])
    s2 = rhs_tau(p, 0.7, [0.3, 1.1, 5.0, 0.4])
    assert np.array_equal(s1, s2)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 4.0), st.floats(0.0, 0.49), st.floats(-2, 3), st.floats(-3, 3),
       st.floats(-1, 1), st.floats(-2, 2))
def test_sigma_and_tau_forms_agree(tau, zeta, u, du, v, dv):
    p = ModelParams(2, zeta)
    d_tau = rhs_tau(p, tau, [u, du, v, dv])
    sigma = math.sinh(tau)
    ss = tau_state_to_sigma(tau, [u, du, v, dv])
    acc = rhs_sigma(p, sigma, ss)
    utt, vtt = sigma_accel_to_tau(sigma, [ss[1], ss[3]], [acc[1], acc[3]])
    scale = 1 + abs(d_tau[1]) + abs(d_tau[3])
    assert abs(utt - d_tau[1]) < 1e-9 * scale
    assert abs(vtt - d_tau[3]) < 1e-9 * scale


def test_scalar_closure_matches_vector_form():
    p = ModelParams(3, 0.31)
    f = rhs_tau_scalar(p)
    y = [0.4, 2.0, 0.2, -0.3]
    assert np.allclose(f(1.3, y), rhs_tau(p, 1.3, y), rtol=1e-14)


def test_non_finite_detected():
    p = ModelParams(1, 0.2)
    with pytest.raises(NonFiniteError):
        rhs_tau(p, 1.0, [-1e6, 0.0, 0.0, 0.0])


def test_V_definition():
    p = ModelParams(2, 0.3)
    assert V_of(p, 1.0) == pytest.approx(1 - 0.09 * 3)
