"""Reconstruction of the metric, unitary-gauge fields and moment-map residuals
from a radial profile.

All derivatives are exact chain-rule derivatives carried by :mod:`tebe.jets`;
the only approximation is the quintic Hermite interpolation of ``(u, v)``
between profile grid points (below ``tau_seed`` the local series is used).

Conventions.  ``Y = r^(k+1) e^u``, ``Sigma = sin(beta) z^(k+1) v`` with
``sigma = y / r``.  The holomorphic twist term is ``B_z = -csc(beta) z^k E12``;
with this sign the moment map vanishes on solutions of the radial system and
the unitary fields take the displayed ``-csc(beta) Y^-1 z^k`` entries.  Factors
of ``csc(beta)`` are always paired with a ``sin(beta)`` so that every formula
is regular at ``beta = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BPoly

from .jets import YVAR, Z, ZBAR, Jet, comm, const_matrix, inv2, matrix
from .ode import rhs_tau
from .params import ModelParams
from .series import NearZeroExpansion, series_second_derivs, series_state

E12 = np.array([[0, 1], [0, 0]], complex)


class ExtrapolationError(ValueError):
    pass


@dataclass(frozen=True)
class CylPoint:
    r: float
    y: float
    theta_ang: float = 0.0

    @property
    def sigma(self):
        return self.y / self.r

    @property
    def rho(self):
        return math.hypot(self.r, self.y)

    @property
    def psi(self):
        return math.atan2(self.r, self.y)

    @property
    def z(self):
        return self.r * complex(math.cos(self.theta_ang), math.sin(self.theta_ang))

    @classmethod
    def spherical(cls, rho, psi, theta_ang=0.0):
        return cls(rho * math.sin(psi), rho * math.cos(psi), theta_ang)


class ProfileInterpolant:
    """Quintic Hermite interpolation of ``u`` and ``v`` in tau, exposed in sigma.

    Values and first derivatives come from the interpolant; second derivatives
    are taken from the equation at the interpolated state.
    """

    def __init__(self, profile):
        self.p: ModelParams = profile.p
        g = np.asarray(profile.grid)
        st = np.asarray(profile.states)
        acc = rhs_tau(self.p, g, st.T)
        self.tau_lo, self.tau_hi = float(g[0]), float(g[-1])
        self._u = BPoly.from_derivatives(g, np.stack([st[:, 0], st[:, 1], acc[1]], axis=1))
        self._v = BPoly.from_derivatives(g, np.stack([st[:, 2], st[:, 3], acc[3]], axis=1))
        cfg = profile.config
        self._series = NearZeroExpansion(self.p, profile.params[0], profile.params[1],
                                         order=cfg.order, tau_seed=cfg.tau_seed)

    def tau_derivs(self, tau):
        """Return arrays ``(u, u', u'', v, v', v'')`` in tau."""
        tau = np.atleast_1d(np.asarray(tau, float))
        if np.any(tau > self.tau_hi * (1 + 1e-12)) or np.any(tau <= 0):
            raise ExtrapolationError(f"tau outside (0, {self.tau_hi}]")
        u, du, v, dv = self._u(tau), self._u(tau, 1), self._v(tau), self._v(tau, 1)
        # second derivatives from the equation itself at the interpolated state
        acc = rhs_tau(self.p, tau, np.stack([u, du, v, dv]))
        out = np.stack([u, du, acc[1], v, dv, acc[3]])
        low = tau < self.tau_lo
        for i in np.flatnonzero(low):
            s = series_state(self._series, tau[i], check_seed=False)
            uu, vv = series_second_derivs(self._series, tau[i])
            out[:, i] = [s.u, s.du, uu, s.v, s.dv, vv]
        return out

    def sigma_derivs(self, sigma):
        """Return ``(u, u_s, u_ss, v, v_s, v_ss)`` with s = sigma."""
        sigma = np.asarray(sigma, float)
        tau = np.arcsinh(sigma)
        u, du, ddu, v, dv, ddv = self.tau_derivs(tau.ravel())
        ch = np.cosh(tau.ravel())
        q = ch * ch
        s = sigma.ravel()
        res = [u, du / ch, (ddu - s * du / ch) / q, v, dv / ch, (ddv - s * dv / ch) / q]
        return [x.reshape(sigma.shape) for x in res]


@dataclass
class AnsatzFields:
    Y: np.ndarray
    Sigma: np.ndarray
    H: np.ndarray
    g: np.ndarray


class FieldBuilder:
    """Jet-level construction of every geometric object at a batch of points."""

    def __init__(self, profile, zeta_fields: float | None = None):
        self.profile = profile
        self.p = profile.p
        self.interp = ProfileInterpolant(profile)
        # twist used to build unitary fields from the profile's metric H;
        # the profile's own by default
        self.zeta = self.p.zeta if zeta_fields is None else zeta_fields

    def base(self, z, y):
        """Return order-two jets ``(Y, Sigma)`` at complex ``z`` and real ``y``."""
        z = np.asarray(z, complex)
        y = np.asarray(y, float) + 0 * z.real
        Zj = Jet.variable(z, Z)
        Zb = Jet.variable(np.conj(z), ZBAR)
        Yv = Jet.variable(y.astype(complex), YVAR)
        R2 = Zj * Zb
        sig = Yv * R2 ** -0.5
        sv = sig.val.real
        u, du, ddu, v, dv, ddv = self.interp.sigma_derivs(sv)
        uj = sig.apply(u, du, ddu)
        vj = sig.apply(v, dv, ddv)
        b = self.p.b
        Yj = R2 ** (b / 2) * uj.exp()
        Sj = self.p.zeta * (Zj ** b) * vj
        self._Z = Zj
        return Yj, Sj

    def gauge(self, Yj, Sj):
        Yh = Yj ** 0.5
        g = matrix([[1 / Yh, -Sj / Yh], [0.0, Yh]])
        gi = matrix([[Yh, Sj / Yh], [0.0, 1 / Yh]])
        return g, gi

    def btilde(self):
        """``sin(beta) B_z = -z^k E12``."""
        Zk = self._Z ** self.p.k
        return matrix([[0.0, -Zk], [0.0, 0.0]])

    # -- holomorphic gauge ------------------------------------------------------
    def moment_matrix(self, z, y) -> np.ndarray:
        """Holomorphic-gauge moment map matrix; vanishes on solutions."""
        s = self.p.zeta
        c2 = 1 - s * s
        Yj, Sj = self.base(z, y)
        H = matrix([[1 / Yj, -Sj / Yj], [-Sj.conj() / Yj, Yj + Sj * Sj.conj() / Yj]])
        Hi = inv2(H)
        Bt = self.btilde()
        M = 4 * c2 * (Hi @ H.d(Z)).d(ZBAR) + (Hi @ H.d(YVAR)).d(YVAR)
        X = Hi @ H.d(ZBAR)
        M = M + 4 * s * s * X.d(Z) + 4 * s * comm(Bt, X)
        X = Hi @ Bt.dag() @ H
        M = M - 4 * s * X.d(Z) - 4 * comm(Bt, X)
        return M.val

    def second_equation(self, z, y) -> np.ndarray:
        """omega^i d_i(Y^-2 dbar_i Sigmabar) - 4 sin(beta) zbar^k d_z Y^-2."""
        s = self.p.zeta
        Yj, Sj = self.base(z, y)
        Sb = Sj.conj()
        Yi2 = Yj ** -2
        w = (4 * (1 - s * s), 4 * s * s, 1.0)
        pairs = ((ZBAR, Z), (Z, ZBAR), (YVAR, YVAR))
        out = sum(w[i] * (Yi2 * Sb.d(pairs[i][1])).d(pairs[i][0]).val for i in range(3))
        return out - 4 * s * np.conj(np.asarray(z, complex)) ** self.p.k * Yi2.d(Z).val

    # -- unitary gauge -----------------------------------------------------------
    def unitary(self, z, y) -> dict:
        """Order-one jets of every unitary-gauge field at the points."""
        s = self.zeta
        c = math.sqrt(1 - s * s)
        Yj, Sj = self.base(z, y)
        g, gi = self.gauge(Yj, Sj)
        gd, gid = g.dag(), gi.dag()
        Bt = self.btilde()
        P = {i: -(g.d(i) @ gi) for i in (Z, ZBAR, YVAR)}
        Q = {i: gid @ gd.d(i) for i in (Z, ZBAR, YVAR)}
        gBg = g @ Bt @ gi
        gBdg = gid @ Bt.dag() @ gd
        out = {
            "A_z": s * s * P[Z] + s * gBg + c * c * Q[Z],
            "phi_z": s * c * (P[Z] - Q[Z]) + c * gBg,
            "A_zbar": s * s * Q[ZBAR] - s * gBdg + c * c * P[ZBAR],
            "phi_zbar": s * c * (Q[ZBAR] - P[ZBAR]) - c * gBdg,
            "A_y": 0.5 * (P[YVAR] + Q[YVAR]),
            "phi_1": (0.5j * c) * (P[YVAR] - Q[YVAR]),
        }
        out["Y"], out["Sigma"], out["g"] = Yj, Sj, g
        return out

    def moment_unitary(self, z, y, zeta1: float) -> np.ndarray:
        """Unitary-gauge moment map at twist ``zeta1`` built from these fields."""
        f = self.unitary(z, y)
        s1 = zeta1
        c1 = math.sqrt(1 - s1 * s1)
        t1 = s1 / c1
        X1 = f["A_zbar"] - t1 * f["phi_zbar"]
        X1d = f["A_z"] - t1 * f["phi_z"]
        K1 = X1d.d(ZBAR) - X1.d(Z) + comm(X1, X1d)
        S2 = s1 * f["A_z"] + c1 * f["phi_z"]           # sin * (A_z + cot phi_z)
        S2d = s1 * f["A_zbar"] + c1 * f["phi_zbar"]
        K2 = s1 * (S2d.d(Z) - S2.d(ZBAR)) + comm(S2, S2d)  # sin^2 [D2, D2^dag]
        X3 = f["A_y"] - (1j / c1) * f["phi_1"]
        X3d = f["A_y"] + (1j / c1) * f["phi_1"]
        K3 = X3d.d(YVAR) - X3.d(YVAR) + comm(X3, X3d)
        return (4 * c1 * c1 * K1 + 4 * K2 + K3).val


def _grid_points(r, y, theta=0.0):
    r = np.asarray(r, float)
    return r * np.exp(1j * theta), np.asarray(y, float)


def ansatz_fields(profile, pt: CylPoint) -> AnsatzFields:
    fb = FieldBuilder(profile)
    Yj, Sj = fb.base(np.array([pt.z]), np.array([pt.y]))
    g, _ = fb.gauge(Yj, Sj)
    Y = Yj.val.real[0]
    S = Sj.val[0]
    H = np.array([[1 / Y, -S / Y], [-np.conj(S) / Y, Y + abs(S) ** 2 / Y]])
    return AnsatzFields(Y, S, H, g.val[0])


@dataclass
class MatrixField:
    A_z: np.ndarray
    A_zbar: np.ndarray
    phi_z: np.ndarray
    phi_zbar: np.ndarray
    A_y: np.ndarray
    phi_1: np.ndarray
    A_rho: np.ndarray
    A_psi: np.ndarray
    A_theta: np.ndarray
    A: complex
    B: complex
    C: complex
    D: complex
    N: np.ndarray        # 4x4 real-linear map on traceless matrices (basis below)


# basis used for N: E = (sz, sx, sy, i*Id) restricted to traceless -> (sz, sx, sy)
_SZ = np.array([[1, 0], [0, -1]], complex)
_SX = np.array([[0, 1], [1, 0]], complex)
_SY = np.array([[0, -1j], [1j, 0]], complex)


def ad(X, s):
    return X @ s - s @ X


def spherical_components(f: dict, pt_psi, pt_theta, rho):
    """Project Cartesian connection matrices onto (rho, psi, theta)."""
    A2 = f["A_z"] + f["A_zbar"]
    A3 = 1j * (f["A_z"] - f["A_zbar"])
    Ay = f["A_y"]
    sp, cp = np.sin(pt_psi), np.cos(pt_psi)
    st, ct = np.sin(pt_theta), np.cos(pt_theta)
    ex = lambda a: np.asarray(a)[..., None, None]
    A_rho = ex(sp * ct) * A2 + ex(sp * st) * A3 + ex(cp) * Ay
    A_psi = ex(rho) * (ex(cp * ct) * A2 + ex(cp * st) * A3 - ex(sp) * Ay)
    A_theta = ex(rho * sp) * (-ex(st) * A2 + ex(ct) * A3)
    return A_rho, A_psi, A_theta


def higgs_cartesian(f: dict, cos_beta: float):
    """Return ``(Phi_1, phi_2, phi_3)`` with Phi_1 = phi_1 / cos(beta)."""
    return (f["phi_1"] / cos_beta, f["phi_z"] + f["phi_zbar"],
            1j * (f["phi_z"] - f["phi_zbar"]))


def n_operator(Phis, rho):
    """Matrix of s -> sum_i [rho Phi_i, [rho Phi_i, s]] in the basis (sz, sx, sy)."""
    basis = (_SZ, _SX, _SY)
    out = np.zeros(Phis[0].shape[:-2] + (3, 3))
    for j, e in enumerate(basis):
        acc = 0
        for Ph in Phis:
            P = np.asarray(rho)[..., None, None] * Ph
            acc = acc + ad(P, ad(P, e))
        # coordinates: s = a sz + b sx + c sy with a = tr(s sz)/2 etc.
        for i, e2 in enumerate(basis):
            out[..., i, j] = np.real(np.trace(acc @ e2, axis1=-2, axis2=-1)) / 2
    return out


def unitary_fields(profile, pt: CylPoint) -> MatrixField:
    fb = FieldBuilder(profile)
    jets = fb.unitary(np.array([pt.z]), np.array([pt.y]))
    f = {k: v.val[0] for k, v in jets.items() if k not in ("Y", "Sigma", "g")}
    for k in ("A_z", "A_zbar", "phi_z", "phi_zbar", "A_y", "phi_1"):
        if not np.all(np.isfinite(f[k])):
            raise ArithmeticError(f"non-finite {k} at {pt}")
    A_rho, A_psi, A_theta = spherical_components(f, pt.psi, pt.theta_ang, pt.rho)
    Phis = higgs_cartesian(f, profile.p.cos_beta)
    N = n_operator([P[None] for P in Phis], np.array([pt.rho]))[0]
    return MatrixField(f["A_z"], f["A_zbar"], f["phi_z"], f["phi_zbar"], f["A_y"], f["phi_1"],
                       A_rho, A_psi, A_theta, A_rho[0, 1], A_psi[0, 1] / pt.rho,
                       A_theta[0, 0] / pt.r, A_theta[0, 1] / pt.r, N)


def pde_residual(profile, r, y, theta: float = 0.0):
    """Pointwise residuals ``(res1, res2)`` of the moment-map system on a grid.

    ``res1`` is minus the (1,1) entry of the holomorphic moment map matrix and
    ``res2`` is the second scalar equation; both vanish on exact solutions.
    """
    fb = FieldBuilder(profile)
    z, yy = _grid_points(r, y, theta)
    M = fb.moment_matrix(z, yy)
    res1 = -M[..., 0, 0]
    res2 = fb.second_equation(z, yy)
    return res1, res2


def pde_residual_fd(profile, r, y, h=1e-4):
    """``res1`` recomputed with centred finite differences in (x2, x3, y).

    Only the untwisted part needs second derivatives of ``log Y``; the full
    matrix residual is assembled from finite-difference Hessians of H.
    """
    fb = FieldBuilder(profile)
    r = np.asarray(r, float)
    y = np.asarray(y, float)

    def Hmat(x2, x3, yy):
        Yj, Sj = fb.base(x2 + 1j * x3, yy)
        Yv, Sv = Yj.val, Sj.val
        return np.stack([np.stack([1 / Yv, -Sv / Yv], -1),
                         np.stack([-np.conj(Sv) / Yv, Yv + Sv * np.conj(Sv) / Yv], -1)], -2)

    x2, x3 = r, np.zeros_like(r)
    e = [(h, 0, 0), (0, h, 0), (0, 0, h)]
    H0 = Hmat(x2, x3, y)

    def D(i, F=Hmat):
        a = e[i]
        return (F(x2 + a[0], x3 + a[1], y + a[2]) - F(x2 - a[0], x3 - a[1], y - a[2])) / (2 * h)

    def HiD(i):
        def F(a, b, c):
            Hv = Hmat(a, b, c)
            a2 = e[i]
            Dh = (Hmat(a + a2[0], b + a2[1], c + a2[2]) - Hmat(a - a2[0], b - a2[1], c - a2[2])) / (2 * h)
            return np.linalg.solve(Hv, Dh)
        return F

    s = fb.p.zeta
    c2 = 1 - s * s
    zz = x2 + 1j * x3
    Bt = np.zeros(H0.shape, complex)
    Bt[..., 0, 1] = -zz ** fb.p.k
    Btd = np.conj(np.swapaxes(Bt, -1, -2))
    Hi0 = np.linalg.inv(H0)
    Dz = lambda F: 0.5 * (D(0, F) - 1j * D(1, F))
    Dzb = lambda F: 0.5 * (D(0, F) + 1j * D(1, F))

    def HiDz(a, b, c):
        return 0.5 * (HiD(0)(a, b, c) - 1j * HiD(1)(a, b, c))

    def HiDzb(a, b, c):
        return 0.5 * (HiD(0)(a, b, c) + 1j * HiD(1)(a, b, c))

    def HiBH(a, b, c):
        Hv = Hmat(a, b, c)
        zl = a + 1j * b
        Bd = np.zeros(Hv.shape, complex)
        Bd[..., 1, 0] = -np.conj(zl) ** fb.p.k
        return np.linalg.solve(Hv, Bd @ Hv)

    M = 4 * c2 * Dzb(HiDz) + D(2, HiD(2))
    Xb = HiDzb(x2, x3, y)
    M = M + 4 * s * s * Dz(HiDzb) + 4 * s * (Bt @ Xb - Xb @ Bt)
    XB = Hi0 @ Btd @ H0
    M = M - 4 * s * Dz(HiBH) - 4 * (Bt @ XB - XB @ Bt)
    return -M[..., 0, 0]


def error_form_check(profile, zeta1: float, psi=None, thetas=(0.0, math.pi / 3, 1.1),
                     rhos=(1.0, 1.7)):
    """Structural check of the cross-twist moment-map residual.

    Keeps the metric H of ``profile`` fixed, builds the unitary fields and the
    moment map at ``zeta1``, and verifies that ``rho^2`` times it has the form
    ``[[gamma, e^{i(k+1)theta} delta], [e^{-i(k+1)theta} delta, -gamma]]`` with
    real ``gamma(psi)``, ``delta(psi)``.  Returns ``(ok, deviation, magnitude)``.
    """
    if psi is None:
        psi = np.linspace(0.25, 1.3, 12)
    psi = np.asarray(psi, float)
    kappa = profile.p.b
    fb = FieldBuilder(profile, zeta_fields=zeta1)
    ref = None
    dev = 0.0
    mag = 0.0
    for rho in rhos:
        for th in thetas:
            r = rho * np.sin(psi)
            y = rho * np.cos(psi)
            Om = rho ** 2 * fb.moment_unitary(r * np.exp(1j * th), y, zeta1)
            gam = Om[:, 0, 0]
            d12 = Om[:, 0, 1] * np.exp(-1j * kappa * th)
            d21 = Om[:, 1, 0] * np.exp(1j * kappa * th)
            dev = max(dev,
                      np.max(np.abs(Om[:, 0, 0] + Om[:, 1, 1])),
                      np.max(np.abs(gam.imag)),
                      np.max(np.abs(d12.imag)), np.max(np.abs(d21.imag)),
                      np.max(np.abs(d12 - d21)))
            cur = np.stack([gam.real, d12.real])
            if ref is None:
                ref = cur
            else:
                dev = max(dev, float(np.max(np.abs(cur - ref))))
            mag = max(mag, float(np.max(np.abs(Om))))
    dev = float(dev)
    return dev <= 1e-8 + 1e-8 * mag, dev, mag
