"""Local expansions at tau = 0 and the far-field matching data.

Near the regular singular point the solution is written as

    u = log(2 tau) + sum_{n>=2} alpha_n tau^n,   v = sum_{n>=2} gamma_n tau^n,

with ``alpha_2 = a`` and ``gamma_3 = c`` free and ``gamma_2 = 2k`` forced.
Coefficients follow from matching powers of tau in

    tau^2 w'' = 1 - exp(-2w) Q / 4,           w = u - log(2 tau)
    tau v''   = (1 + tau w') (2 v' + 4 V T) - 4 b V tau

where ``Q = 4V^2 + zeta^2 v'^2 + 4 zeta^2 V v' T``.  The linear part of the
tau^n coefficient of the first equation is ``(n-2)(n+1) alpha_n`` and that of the
tau^(n-1) coefficient of the second is ``n(n-3) gamma_n``; the vanishing slopes
are exactly the free parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ode import State, rhs_tau
from .params import ModelParams

RESONANCE_TOL = 1e-10
MAX_ORDER = 10


class ResonanceError(ArithmeticError):
    """A resonant power carries a nonzero forcing, so no power series exists."""

    def __init__(self, power: int, equation: str, forcing: float):
        super().__init__(f"resonance at tau^{power} in the {equation}-equation "
                         f"(forcing {forcing:.3e})")
        self.power = power


# --- truncated power series helpers (coefficient arrays, index = power) -------

def _mul(a, b):
    return np.convolve(a, b)[: len(a)]


def _exp(a):
    """exp of a series with a[0] == 0 via n e_n = sum_j j a_j e_{n-j}."""
    out = np.zeros_like(a)
    out[0] = math.exp(a[0])
    for n in range(1, len(a)):
        out[n] = sum(j * a[j] * out[n - j] for j in range(1, n + 1)) / n
    return out


def _deriv(a):
    out = np.zeros_like(a)
    out[:-1] = a[1:] * np.arange(1, len(a))
    return out


def _shift(a, m):
    """Multiply by tau^m (m >= 0), truncating."""
    out = np.zeros_like(a)
    out[m:] = a[: len(a) - m]
    return out


def _tanh(length):
    sinh = np.array([1.0 / math.factorial(n) if n % 2 else 0.0 for n in range(length)])
    cosh = np.array([0.0 if n % 2 else 1.0 / math.factorial(n) for n in range(length)])
    out = np.zeros(length)
    for n in range(length):
        out[n] = sinh[n] - sum(cosh[j] * out[n - j] for j in range(1, n + 1))
    return out


def _residual_series(p: ModelParams, alpha, gamma):
    """Coefficients of both equation residuals (lhs - rhs)."""
    z2 = p.zeta ** 2
    b = p.b
    L = len(alpha)
    T = _tanh(L)
    V = -z2 * b * gamma
    V[0] += 1.0
    dv = _deriv(gamma)
    dw = _deriv(alpha)
    Q = 4 * _mul(V, V) + z2 * _mul(dv, dv) + 4 * z2 * _mul(_mul(V, dv), T)
    one = np.zeros(L)
    one[0] = 1.0
    res_w = _shift(_deriv(dw), 2) - (one - _mul(_exp(-2.0 * alpha), Q) / 4.0)
    rhs_v = _mul(one + _shift(dw, 1), 2 * dv + 4 * _mul(V, T)) - 4 * b * _shift(V, 1)
    res_v = _shift(_deriv(dv), 1) - rhs_v
    return res_w, res_v


def derive_recurrence(p: ModelParams, order: int, a: float, c: float):
    """Return ``(alpha, gamma)`` coefficient arrays up to ``tau^order``."""
    if not 3 <= order <= MAX_ORDER:
        raise ValueError(f"order must lie in [3, {MAX_ORDER}], got {order}")
    L = order + 2
    alpha = np.zeros(L)
    gamma = np.zeros(L)
    for n in range(1, order + 1):
        _, rv = _residual_series(p, alpha, gamma)
        slope_v = n * (n - 3)
        if slope_v == 0:
            if abs(rv[n - 1]) > RESONANCE_TOL:
                raise ResonanceError(n, "v", rv[n - 1])
            gamma[n] = c if n == 3 else 0.0
        else:
            gamma[n] = -rv[n - 1] / slope_v
        rw, _ = _residual_series(p, alpha, gamma)
        slope_w = (n - 2) * (n + 1)
        if slope_w == 0:
            if abs(rw[n]) > RESONANCE_TOL:
                raise ResonanceError(n, "u", rw[n])
            alpha[n] = a
        else:
            alpha[n] = -rw[n] / slope_w
    return alpha[: order + 1], gamma[: order + 1]


def a_from_first_integral(p: ModelParams) -> float:
    """The value of ``a`` forced by a first integral equal to ``(k+1)^2``.

    Expanding the first integral at tau = 0 gives ``6a + 4 zeta^2 k (2k+1)``.
    """
    k = p.k
    return (p.b ** 2 - 4.0 * p.zeta ** 2 * k * (2 * k + 1)) / 6.0


@dataclass
class NearZeroExpansion:
    p: ModelParams
    a: float
    c: float
    order: int = 6
    tau_seed: float = 1e-2
    coeffs_u: np.ndarray = field(init=False, repr=False)
    coeffs_v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.coeffs_u, self.coeffs_v = derive_recurrence(self.p, self.order, self.a, self.c)


def series_state(exp: NearZeroExpansion, tau: float, *, check_seed: bool = True) -> State:
    """Evaluate the truncated series and its tau-derivative."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if check_seed and tau > exp.tau_seed * (1 + 1e-12):
        raise ValueError(f"tau={tau} exceeds tau_seed={exp.tau_seed}; series not trusted")
    pw = np.polynomial.polynomial
    w = pw.polyval(tau, exp.coeffs_u)
    dw = pw.polyval(tau, _deriv(exp.coeffs_u))
    v = pw.polyval(tau, exp.coeffs_v)
    dv = pw.polyval(tau, _deriv(exp.coeffs_v))
    return State(math.log(2 * tau) + w, 1.0 / tau + dw, v, dv)


def series_second_derivs(exp: NearZeroExpansion, tau: float) -> tuple[float, float]:
    pw = np.polynomial.polynomial
    return (-1.0 / tau ** 2 + pw.polyval(tau, _deriv(_deriv(exp.coeffs_u))),
            pw.polyval(tau, _deriv(_deriv(exp.coeffs_v))))


def series_residual(exp: NearZeroExpansion, tau: float) -> float:
    """Max abs residual of the ODE on the truncated series (u-part scaled by tau^2)."""
    s = series_state(exp, tau, check_seed=False)
    d = rhs_tau(exp.p, tau, s)
    uu, vv = series_second_derivs(exp, tau)
    return max(abs(uu - d[1]) * tau ** 2, abs(vv - d[3]) * tau)


@dataclass(frozen=True)
class FarField:
    p: ModelParams
    tau_max: float
    w_value: float
    r1: float
    r2: float


def farfield_residuals(p: ModelParams, s, tau_max: float) -> tuple[float, float]:
    """Matching residuals ``(u' - (k+1), v')`` at ``tau_max``."""
    if tau_max < 5:
        raise ValueError("tau_max must be at least 5")
    return float(s[1] - p.b), float(s[3])


def farfield_state(p: ModelParams, tau_max: float, w_R: float, v_R: float) -> State:
    """Far-field data with ``v' = 0`` and ``u'`` fixed by the first integral."""
    from .ode import witten_u0
    u = float(witten_u0(p, tau_max)) + w_R
    V = 1.0 - p.zeta ** 2 * p.b * v_R
    du = math.sqrt(p.b ** 2 + 4.0 * V * V * math.exp(-2.0 * u))
    return State(u, du, v_R, 0.0)
