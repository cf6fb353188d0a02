"""Reduced linearized operator on sections of the symmetric form.

A section is ``s(psi) = [[gamma, e^{i b theta} delta], [e^{-i b theta} delta, -gamma]]``
with real ``gamma``, ``delta``.  Matrices are handled in the real basis
``(sz, sx, sy)`` of traceless hermitian matrices; at ``theta = 0`` the section
occupies the ``(sz, sx)`` plane and the assembled operator is checked to keep
it there before being restricted to the stacked ``(gamma, delta)`` unknowns.

The operator is

    Phi = D_psi^2 + cot(psi) D_psi + N + R^2 + 2 R + T^2 / sin(psi)^2

with ``D_psi = d_psi + ad(A_psi)``, ``R = ad(rho A_rho)``, ``T = ad(K + A_theta)``
and ``K = diag(i b / 2, -i b / 2)`` generating the theta-dependence of the form.
The derivative part is discretised as ``-W^-1 G^T E G`` with a gauge-covariant
edge gradient ``G`` and sin-weighted node/edge measures ``W``, ``E``, so that
the discrete quadratic form is exactly a sum of nonpositive terms (the skew
``2 R`` term drops out).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import FieldBuilder, higgs_cartesian, spherical_components

_SZ = np.array([[1, 0], [0, -1]], complex)
_SX = np.array([[0, 1], [1, 0]], complex)
_SY = np.array([[0, -1j], [1j, 0]], complex)
BASIS = (_SZ, _SX, _SY)
FORM_TOL = 1e-10


class StructureError(RuntimeError):
    pass


def ad_matrix(X: np.ndarray) -> np.ndarray:
    """Real 3x3 matrix of ``s -> [X, s]`` on the (sz, sx, sy) basis.

    ``X`` has shape (..., 2, 2); for antihermitian ``X`` the result is skew.
    """
    X = np.asarray(X, complex)
    out = np.zeros(X.shape[:-2] + (3, 3))
    for j, e in enumerate(BASIS):
        img = X @ e - e @ X
        for i, e2 in enumerate(BASIS):
            out[..., i, j] = np.real(np.trace(img @ e2, axis1=-2, axis2=-1)) / 2
    return out


def psi_grid(n: int, margin: float = 1e-3, cluster: float = 2.0) -> np.ndarray:
    """``n + 2`` nodes on ``[margin, pi/2 - margin]`` with tanh clustering at both ends.

    The first and last nodes carry the Dirichlet data; ``cluster = 0`` gives a
    uniform grid.
    """
    if n < 4:
        raise ValueError("need at least 4 interior nodes")
    if not 0 < margin < math.pi / 8:
        raise ValueError("margin must lie in (0, pi/8)")
    x = np.linspace(-1.0, 1.0, n + 2)
    if cluster > 0:
        x = np.tanh(cluster * x) / math.tanh(cluster)
    lo, hi = margin, math.pi / 2 - margin
    return lo + (hi - lo) * (x + 1) / 2


@dataclass
class Coefficients:
    """Coefficient matrices of the operator sampled at given angles (rho = 1)."""
    psi: np.ndarray
    A_psi: np.ndarray      # (m, 3, 3) ad-matrices
    R: np.ndarray
    T: np.ndarray
    Phis: tuple            # three (m, 3, 3) ad-matrices of rho Phi_i
    N: np.ndarray

    @property
    def potential(self) -> np.ndarray:
        """Zeroth-order symmetric part ``N + R^2 + T^2 / sin^2``."""
        s2 = np.sin(self.psi)[:, None, None] ** 2
        return self.N + self.R @ self.R + self.T @ self.T / s2


def coefficients(profile, psi, zeta_fields: float | None = None) -> Coefficients:
    psi = np.asarray(psi, float)
    fb = FieldBuilder(profile, zeta_fields)
    z = np.sin(psi) + 0j
    y = np.cos(psi)
    f = {k: v.val for k, v in fb.unitary(z, y).items() if k not in ("Y", "Sigma", "g")}
    A_rho, A_psi, A_theta = spherical_components(f, psi, 0.0, 1.0)
    b = profile.p.b
    K = np.diag([0.5j * b, -0.5j * b])
    cb = math.sqrt(1 - fb.zeta ** 2)
    Phis = tuple(ad_matrix(P) for P in higgs_cartesian(f, cb))
    N = sum(P @ P for P in Phis)
    return Coefficients(psi, ad_matrix(A_psi), ad_matrix(A_rho), ad_matrix(K + A_theta), Phis, N)


@dataclass
class DiscreteOperator:
    matrix: np.ndarray            # (2n, 2n) acting on stacked (gamma, delta)
    psi: np.ndarray               # interior nodes
    weights: np.ndarray           # node measure sin(psi) * cell width
    k: int
    zeta: float
    boundary: str = "dirichlet"
    form_defect: float = 0.0
    parts: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.psi)

    def symmetrized(self) -> np.ndarray:
        """``W^{1/2} Phi W^{-1/2}`` on the stacked unknowns."""
        w = np.sqrt(np.tile(self.weights, 2))
        return self.matrix * w[:, None] / w[None, :]

    def apply(self, gamma, delta) -> tuple[np.ndarray, np.ndarray]:
        out = self.matrix @ np.concatenate([gamma, delta])
        return out[: self.n], out[self.n:]

    def inner(self, s1, s2) -> float:
        """Weighted inner product of stacked sections (tr(s1 s2) = 2 (g1 g2 + d1 d2))."""
        return float(2 * np.sum(np.tile(self.weights, 2) * s1 * s2))


def _stack_index(n):
    # interleaved (node, component) ordering -> component-major (gamma..., delta...)
    return np.concatenate([np.arange(n) * 3, np.arange(n) * 3 + 1])


def assemble_phi(profile, n: int = 400, margin: float = 1e-3, cluster: float = 2.0,
                 grid=None) -> DiscreteOperator:
    """Assemble the discrete operator on ``n`` interior nodes."""
    if not profile.converged:
        raise ValueError("profile is not converged")
    nodes = psi_grid(n, margin, cluster) if grid is None else np.asarray(grid, float)
    if np.any(np.diff(nodes) <= 0) or nodes[0] <= 0 or nodes[-1] >= math.pi / 2:
        raise ValueError("grid must be strictly increasing inside (0, pi/2)")
    n = len(nodes) - 2
    h = np.diff(nodes)
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    inner = nodes[1:-1]
    cell = 0.5 * (h[:-1] + h[1:])
    w = np.sin(inner) * cell
    e_w = np.sin(mid) / h          # edge measure sin(psi) h, divided by h^2 of the gradient

    ce = coefficients(profile, mid)
    cn = coefficients(profile, inner)
    m3 = 3 * n
    # edge gradient G: (n + 1) edges x n interior nodes, 3x3 blocks;
    # (G s)_e = (s_{e+1} - s_e) + h_e A_e (s_e + s_{e+1}) / 2, boundary values zero
    G = np.zeros((3 * (n + 1), m3))
    I3 = np.eye(3)
    for e in range(n + 1):
        Ae = 0.5 * h[e] * ce.A_psi[e]
        r = slice(3 * e, 3 * e + 3)
        if e >= 1:                       # left node e-1 (interior index)
            G[r, 3 * (e - 1):3 * e] = -I3 + Ae
        if e <= n - 1:                   # right node e (interior index)
            G[r, 3 * e:3 * e + 3] = I3 + Ae
    Ew = np.repeat(e_w, 3)
    kin = -(G.T * Ew) @ G / np.repeat(w, 3)[:, None]
    pot = np.zeros((m3, m3))
    skew = np.zeros((m3, m3))
    P = cn.potential
    for j in range(n):
        sl = slice(3 * j, 3 * j + 3)
        pot[sl, sl] = P[j]
        skew[sl, sl] = 2 * cn.R[j]
    full = kin + pot + skew
    # the (sz, sx) plane must be invariant
    idx_in = np.concatenate([np.arange(n) * 3, np.arange(n) * 3 + 1])
    idx_out = np.arange(n) * 3 + 2
    leak = np.abs(full[np.ix_(idx_out, idx_in)]).max()
    scale = max(1.0, np.abs(full).max())
    if leak > FORM_TOL * scale:
        raise StructureError(f"operator leaves the symmetric form: leak {leak:.3e}")
    sel = _stack_index(n)
    op = DiscreteOperator(full[np.ix_(sel, sel)], inner, w, profile.p.k, profile.p.zeta,
                          form_defect=float(leak / scale))
    op.parts = {"G": G[np.ix_(_edge_rows(n), sel)], "edge_weights": np.tile(e_w, 2),
                "coeffs": cn, "potential": pot[np.ix_(sel, sel)], "skew": skew[np.ix_(sel, sel)]}
    return op


def _edge_rows(n):
    return np.concatenate([np.arange(n + 1) * 3, np.arange(n + 1) * 3 + 1])


def quadratic_form_terms(op: DiscreteOperator, s: np.ndarray) -> dict:
    """The six nonpositive contributions to ``<s, Phi s>`` (weighted, tr-normalised).

    ``kinetic`` from ``D_psi``, one term per Higgs component, ``rho`` from
    ``R^2`` and ``theta`` from ``T^2 / sin^2``.  The skew ``2 R`` part adds nothing.
    """
    n = op.n
    s = np.asarray(s, float)
    G = op.parts["G"]
    Gs = G @ s
    terms = {"kinetic": -2 * float(np.sum(op.parts["edge_weights"] * Gs * Gs))}
    cn = op.parts["coeffs"]
    s3 = np.zeros((n, 3))
    s3[:, 0], s3[:, 1] = s[:n], s[n:]
    for i, Ph in enumerate(cn.Phis, start=1):
        v = np.einsum("nij,nj->ni", Ph, s3)
        terms[f"higgs_{i}"] = -2 * float(np.sum(op.weights * np.sum(v * v, axis=1)))
    v = np.einsum("nij,nj->ni", cn.R, s3)
    terms["rho"] = -2 * float(np.sum(op.weights * np.sum(v * v, axis=1)))
    v = np.einsum("nij,nj->ni", cn.T, s3) / np.sin(op.psi)[:, None]
    terms["theta"] = -2 * float(np.sum(op.weights * np.sum(v * v, axis=1)))
    return terms


def quadratic_form(op: DiscreteOperator, s: np.ndarray) -> float:
    return op.inner(s, op.matrix @ s)


def smallest_singular_value(op: DiscreteOperator) -> float:
    return float(np.linalg.svd(op.symmetrized(), compute_uv=False)[-1])


def random_sections(op: DiscreteOperator, count: int, seed: int = 0) -> np.ndarray:
    """Smooth random sections vanishing at both ends, shape (count, 2n)."""
    rng = np.random.default_rng(seed)
    x = (op.psi - op.psi[0]) / (op.psi[-1] - op.psi[0])
    modes = np.arange(1, 9)
    basis = np.sin(np.pi * np.outer(x, modes))           # (n, 8)
    out = np.empty((count, 2 * op.n))
    for i in range(count):
        cg, cd = rng.normal(size=(2, len(modes))) / modes
        out[i] = np.concatenate([basis @ cg, basis @ cd])
    return out


# --- indicial analysis -----------------------------------------------------

def indicial_roots(k: int) -> tuple[list[float], list[float]]:
    """Indicial roots at the equatorial end (omega = 0) and the axis end (psi = 0).

    At ``omega = 0`` the model operator is ``d^2 - 2 / omega^2`` on both
    components: ``rho (rho - 1) - 2``.  At ``psi = 0`` it is
    ``d^2 + d / psi - b^2 Pr / psi^2`` with ``Pr`` projecting onto ``delta``:
    ``rho^2`` for ``gamma`` and ``rho^2 - b^2`` for ``delta``.
    """
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    b = k + 1
    omega = np.roots([1.0, -1.0, -2.0])
    psi_gamma = np.roots([1.0, 0.0, 0.0])
    psi_delta = np.roots([1.0, 0.0, -float(b * b)])
    clean = lambda r: sorted(float(np.real_if_close(x).real) + 0.0 for x in r)
    return clean(omega), clean(np.concatenate([psi_gamma, psi_delta]))


@dataclass
class LimitFit:
    end: str
    entry: str
    power: float
    coefficient: float
    expected_power: float
    expected_coefficient: float
    r2: float
    ok: bool


def _fit(x, y):
    X = np.vstack([np.log(x), np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(X, np.log(np.abs(y)), rcond=None)
    pred = X @ coef
    ly = np.log(np.abs(y))
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum((ly - pred) ** 2) / ss if ss > 0 else 1.0
    return coef[0], math.exp(coef[1]), r2


def coefficient_limits(profile, x=None, rel_tol: float = 0.05) -> list[LimitFit]:
    """Fit the leading singular behaviour of the potential at both ends.

    Expected: ``-2 / omega^2`` on both components near the equator and
    ``-b^2 / psi^2`` on ``delta`` (bounded on ``gamma``) near the axis.
    """
    x = np.geomspace(1e-3, 1e-2, 12) if x is None else np.asarray(x, float)
    b = profile.p.b
    out = []
    for end, psi in (("omega", math.pi / 2 - x), ("psi", x)):
        P = coefficients(profile, psi).potential
        for ent, (i, j) in (("gamma", (0, 0)), ("delta", (1, 1))):
            y = P[:, i, j]
            if end == "psi" and ent == "gamma":
                # bounded relative to 1 / psi^2: leading power must exceed -2
                c = float(np.max(np.abs(y) * x ** 2))
                out.append(LimitFit(end, ent, float("nan"), c, -2.0, 0.0, 1.0, c < rel_tol))
                continue
            p_, c_, r2 = _fit(x, y)
            exp_c = 2.0 if end == "omega" else float(b * b)
            ok = (abs(p_ + 2) < 0.1 and abs(c_ - exp_c) <= rel_tol * exp_c and r2 >= 0.99
                  and np.all(y < 0))
            out.append(LimitFit(end, ent, float(p_), float(c_), -2.0, exp_c, float(r2), bool(ok)))
    return out
