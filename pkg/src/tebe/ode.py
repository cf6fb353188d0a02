"""Right-hand sides of the radial system, the closed-form untwisted solution and
the conserved first integral.

The state is ``(u, u', v, v')`` with primes denoting d/dtau, where
``sigma = y / |z| = sinh(tau)``.  With ``b = k + 1``, ``V = 1 - zeta^2 b v`` and
``T = tanh(tau)`` the system reads

    u'' = -exp(-2u) (4 V^2 + zeta^2 v'^2 + 4 zeta^2 V v' T)
    v'' = u' (2 v' + 4 V T) - 4 b V
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .params import ModelParams


class NonFiniteError(ArithmeticError):
    """A right-hand side evaluation produced inf or nan."""


class State(NamedTuple):
    u: float
    du: float
    v: float
    dv: float


def _check(out, where):
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"non-finite right-hand side at {where}")
    return out


def rhs_tau(p: ModelParams, tau, s) -> np.ndarray:
    """d/dtau of the state; ``tau`` and the state entries may be arrays."""
    u, du, v, dv = (np.asarray(x, dtype=float) for x in s)
    z2 = p.zeta ** 2
    V = 1.0 - z2 * p.b * v
    T = np.tanh(tau)
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.exp(-2.0 * u)
        d2u = -e * (4.0 * V * V + z2 * dv * dv + 4.0 * z2 * V * dv * T)
    d2v = du * (2.0 * dv + 4.0 * V * T) - 4.0 * p.b * V
    return _check(np.array([du, d2u, dv, d2v]), f"tau={tau}")


def rhs_tau_scalar(p: ModelParams):
    """Return a fast scalar closure ``f(tau, y)`` for the integrator."""
    z2 = p.zeta ** 2
    b = float(p.b)
    zb = z2 * b

    def f(tau, y):
        u, du, v, dv = y
        V = 1.0 - zb * v
        T = math.tanh(tau)
        e = math.exp(-2.0 * u) if u > -300.0 else math.inf
        return [du, -e * (4.0 * V * V + z2 * dv * dv + 4.0 * z2 * V * dv * T),
                dv, du * (2.0 * dv + 4.0 * V * T) - 4.0 * b * V]

    return f


def rhs_sigma(p: ModelParams, sigma, s) -> np.ndarray:
    """d/dsigma of ``(u, u_sigma, v, v_sigma)`` in the original sigma variable."""
    u, du, v, dv = (np.asarray(x, dtype=float) for x in s)
    sigma = np.asarray(sigma, dtype=float)
    z2 = p.zeta ** 2
    c2 = 1.0 - z2
    b = p.b
    q = sigma * sigma + 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        bracket = (z2 * (2 * b * v - sigma * dv) - 2.0) ** 2 + z2 * (c2 * sigma ** 2 + 1.0) * dv ** 2
        d2u = -(sigma * du + np.exp(-2.0 * u) * bracket) / q
    W = 1.0 - z2 * b * v
    d2v = -(sigma * dv + 4 * b * W - (4 * sigma * W + 2 * q * dv) * du) / q
    return _check(np.array([du, d2u, dv, d2v]), f"sigma={sigma}")


def tau_state_to_sigma(tau, s) -> np.ndarray:
    """Convert ``(u, u_tau, v, v_tau)`` to ``(u, u_sigma, v, v_sigma)``."""
    u, du, v, dv = s
    ch = np.cosh(tau)
    return np.array([u, du / ch, v, dv / ch])


def sigma_accel_to_tau(sigma, s_sigma, acc_sigma) -> tuple:
    """Second tau-derivatives from sigma-data: f_tt = (sigma^2+1) f_ss + sigma f_s."""
    q = sigma * sigma + 1.0
    return (q * acc_sigma[0] + sigma * s_sigma[0], q * acc_sigma[1] + sigma * s_sigma[1])


def log_sinh(x):
    """Overflow-free ``log(sinh(x))`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    return x + np.log1p(-np.exp(-2.0 * x)) - math.log(2.0)


def witten_u0(p: ModelParams, tau):
    """Untwisted solution ``u0 = log(2 sinh(b tau) / b)``."""
    b = p.b
    return log_sinh(b * np.asarray(tau, dtype=float)) + math.log(2.0 / b)


def witten_u0_derivs(p: ModelParams, tau):
    """Return ``(u0, u0', u0'')``."""
    b = p.b
    tau = np.asarray(tau, dtype=float)
    e = np.exp(-2.0 * b * tau)
    coth = (1.0 + e) / (1.0 - e)
    d2 = -4.0 * b * b * e / (1.0 - e) ** 2
    return witten_u0(p, tau), b * coth, d2


def first_integral(p: ModelParams, s):
    """``u'^2 - (4 V^2 - zeta^2 v'^2) exp(-2u)``; equals ``(k+1)^2`` on solutions."""
    u, du, v, dv = (np.asarray(x, dtype=float) for x in s)
    z2 = p.zeta ** 2
    V = 1.0 - z2 * p.b * v
    return du * du - (4.0 * V * V - z2 * dv * dv) * np.exp(-2.0 * u)


def V_of(p: ModelParams, v):
    return 1.0 - p.zeta ** 2 * p.b * np.asarray(v, dtype=float)
