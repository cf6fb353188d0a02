"""Two-sided shooting for the singular boundary value problem and continuation
in the twist parameter.

Forward integration from the series at ``tau_seed`` is combined with backward
integration from far-field data at ``tau_max``; the two trajectories are matched
at an interior point ``tau_mid``.  The unknowns are the series parameters
``(a, c)`` and the far-field data ``(w_R, v_R)`` where ``w_R = u - u0`` and
``v_R = v`` at ``tau_max``.  Backward integration is used on the outer interval
because the growing mode of ``v'`` (rate ``exp(2 b tau)``) decays in that
direction.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import ode

from .ode import first_integral, rhs_tau, rhs_tau_scalar, witten_u0
from .params import ModelParams
from .series import (NearZeroExpansion, a_from_first_integral, farfield_residuals,
                     farfield_state, series_state)

log = logging.getLogger(__name__)

BLOWUP = 1e12


class SingularJacobianError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tau_seed: float = 1e-2
    tau_max: float = 15.0
    tau_mid: float = 1.0
    tol: float = 1e-13
    order: int = 6
    max_iters: int = 30
    newton_tol: float = 1e-10
    fd_step: float = 1e-6
    n_inner: int = 300
    h_outer: float = 0.02

    def validate(self) -> list[str]:
        errs = []
        if not 0 < self.tau_seed <= 0.05:
            errs.append(f"tau_seed must lie in (0, 0.05], got {self.tau_seed}")
        if not self.tau_max >= 5:
            errs.append(f"tau_max must be >= 5, got {self.tau_max}")
        if not self.tau_seed < self.tau_mid < self.tau_max:
            errs.append("tau_mid must lie strictly between tau_seed and tau_max")
        if not 1e-13 <= self.tol <= 1e-6:
            errs.append(f"tol must lie in [1e-13, 1e-6], got {self.tol}")
        if not 3 <= self.order <= 10:
            errs.append(f"order must lie in [3, 10], got {self.order}")
        if self.max_iters < 1:
            errs.append("max_iters must be positive")
        return errs

    def grid(self) -> np.ndarray:
        inner = np.geomspace(self.tau_seed, self.tau_mid, self.n_inner)
        n_out = int(round((self.tau_max - self.tau_mid) / self.h_outer))
        outer = np.linspace(self.tau_mid, self.tau_max, n_out + 1)
        return np.concatenate([inner, outer[1:]])


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    escaped: bool
    escape_time: float | None


def _solout(t, y):
    return -1 if max(abs(y[0]), abs(y[1]), abs(y[2]), abs(y[3])) > BLOWUP else 0


def _propagate(p, y0, t0, t1, tol, t_eval=None) -> Trajectory:
    """Fortran DOP853 (8th order Dormand-Prince) from ``t0`` to ``t1``.

    With ``t_eval`` the state is recorded at each requested time (which must be
    ordered from ``t0`` to ``t1``); otherwise only the end points are kept.
    """
    f = rhs_tau_scalar(p)
    r = ode(f).set_integrator("dop853", rtol=tol, atol=tol, nsteps=200000)
    r.set_solout(_solout)
    r.set_initial_value(np.asarray(y0, float), t0)
    targets = [t1] if t_eval is None else list(t_eval)
    ts, ys = [t0], [np.asarray(y0, float)]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for tt in targets:
                if tt == t0:
                    continue
                y = r.integrate(tt)
                if not r.successful() or r.get_return_code() == 2 or not np.all(np.isfinite(y)):
                    return Trajectory(np.array(ts), np.array(ys).T, True, float(r.t))
                ts.append(tt)
                ys.append(np.array(y))
    except (OverflowError, ValueError, ArithmeticError):
        return Trajectory(np.array(ts), np.array(ys).T, True, float(r.t))
    return Trajectory(np.array(ts), np.array(ys).T, False, None)


def integrate(p: ModelParams, a: float, c: float, tau_seed: float = 1e-2,
              tau_max: float = 15.0, tol: float = 1e-12, grid=None,
              order: int = 6) -> Trajectory:
    """Propagate the series data at ``tau_seed`` forward to ``tau_max``."""
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    exp = NearZeroExpansion(p, a, c, order=order, tau_seed=tau_seed)
    y0 = series_state(exp, tau_seed)
    return _propagate(p, y0, tau_seed, tau_max, tol, t_eval=grid)


@dataclass
class Profile:
    p: ModelParams
    grid: np.ndarray
    states: np.ndarray              # shape (n, 4): u, u', v, v'
    params: tuple[float, float]     # (a, c)
    far: tuple[float, float]        # (w_R, v_R)
    residual_norm: float
    first_integral_drift: float
    converged: bool
    iterations: int
    config: SolverConfig = field(default_factory=SolverConfig)
    farfield: tuple[float, float] = (0.0, 0.0)

    @property
    def x(self) -> np.ndarray:
        return np.array([*self.params, *self.far])

    @property
    def u(self):
        return self.states[:, 0]

    @property
    def v(self):
        return self.states[:, 2]


def _pieces(p, x, cfg: SolverConfig, grid=None):
    a, c, wR, vR = x
    exp = NearZeroExpansion(p, a, c, order=cfg.order, tau_seed=cfg.tau_seed)
    y0 = series_state(exp, cfg.tau_seed)
    yR = farfield_state(p, cfg.tau_max, wR, vR)
    if grid is None:
        fw = _propagate(p, y0, cfg.tau_seed, cfg.tau_mid, cfg.tol)
        bw = _propagate(p, yR, cfg.tau_max, cfg.tau_mid, cfg.tol)
    else:
        gi = grid[grid <= cfg.tau_mid]
        go = grid[grid >= cfg.tau_mid][::-1]
        fw = _propagate(p, y0, cfg.tau_seed, cfg.tau_mid, cfg.tol, t_eval=gi)
        bw = _propagate(p, yR, cfg.tau_max, cfg.tau_mid, cfg.tol, t_eval=go)
    return fw, bw


def mismatch(p: ModelParams, x, cfg: SolverConfig) -> np.ndarray | None:
    """State difference at ``tau_mid``; ``None`` if either side escapes."""
    fw, bw = _pieces(p, x, cfg)
    if fw.escaped or bw.escaped:
        return None
    return fw.y[:, -1] - bw.y[:, -1]


def jacobian(p, x, cfg: SolverConfig) -> np.ndarray:
    n = len(x)
    J = np.empty((4, n))
    for i in range(n):
        h = cfg.fd_step * max(1.0, abs(x[i]))
        xp = np.array(x, float)
        xm = np.array(x, float)
        xp[i] += h
        xm[i] -= h
        fp, fm = mismatch(p, xp, cfg), mismatch(p, xm, cfg)
        if fp is None or fm is None:
            raise SingularJacobianError(f"escape while differencing unknown {i}")
        J[:, i] = (fp - fm) / (2 * h)
    return J


def initial_guess(p: ModelParams) -> np.ndarray:
    return np.array([a_from_first_integral(p), 0.0, 0.0, 0.0])


def _newton(p, x0, cfg, J=None):
    """Chord Newton: reuse ``J`` while it contracts well, refresh it otherwise."""
    x = np.array(x0, float)
    F = mismatch(p, x, cfg)
    if F is None:
        raise SingularJacobianError("initial guess escapes")
    norm = float(np.max(np.abs(F)))
    it = 0
    fresh = J is None
    while norm > cfg.newton_tol and it < cfg.max_iters:
        it += 1
        if J is None:
            J = jacobian(p, x, cfg)
            fresh = True
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularJacobianError(f"Jacobian condition number {cond:.3e}")
        dx = np.linalg.solve(J, -F)
        lam = 1.0
        accepted = False
        while lam > 1e-4:
            xn = x + lam * dx
            Fn = mismatch(p, xn, cfg)
            if Fn is not None and np.max(np.abs(Fn)) < (1 - 1e-4 * lam) * norm:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if not fresh:
                J = None
                continue
            break
        new_norm = float(np.max(np.abs(Fn)))
        if not fresh and new_norm > 0.2 * norm:
            J = None
        x, F, norm = xn, Fn, new_norm
        fresh = False
        log.debug("newton k=%d zeta=%g it=%d |F|=%.3e", p.k, p.zeta, it, norm)
    return x, norm, it, J


def assemble_profile(p, x, cfg: SolverConfig, norm: float, it: int) -> Profile:
    grid = cfg.grid()
    fw, bw = _pieces(p, x, cfg, grid=grid)
    fwd = fw.y.T.copy()
    # the pieces meet only to the Newton floor; ramp the junction mismatch out
    # of the forward piece with a C2 smoothstep so interpolants see no jump
    gap = fwd[-1] - bw.y[:, -1]
    s = np.clip((fw.t - 0.5 * cfg.tau_mid) / (0.5 * cfg.tau_mid), 0.0, 1.0)
    fwd -= np.outer(s ** 3 * (10 - 15 * s + 6 * s * s), gap)
    states = np.concatenate([fwd, bw.y[:, ::-1].T[1:]], axis=0)
    fi = first_integral(p, states.T)
    drift = float(np.max(np.abs(fi - p.b ** 2)) / p.b ** 2)
    r = farfield_residuals(p, states[-1], cfg.tau_max)
    ok = norm <= max(cfg.newton_tol, 1e-8) and not (fw.escaped or bw.escaped)
    return Profile(p, grid, states, (float(x[0]), float(x[1])), (float(x[2]), float(x[3])),
                   norm, drift, bool(ok), it, cfg, r)


def shoot(p: ModelParams, cfg: SolverConfig | None = None, x0=None, J=None,
          return_jacobian: bool = False):
    """Newton iteration on the matching conditions; returns a :class:`Profile`.

    A non-converged best iterate is returned with ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    errs = cfg.validate()
    if errs:
        raise ValueError("; ".join(errs))
    x0 = initial_guess(p) if x0 is None else np.asarray(x0, float)
    if len(x0) == 2:
        x0 = np.array([x0[0], x0[1], 0.0, 0.0])
    x, norm, it, J = _newton(p, x0, cfg, J)
    prof = assemble_profile(p, x, cfg, norm, it)
    return (prof, J) if return_jacobian else prof


# --- continuation -------------------------------------------------------------

def _residual_sup(p1: ModelParams, grid, states, accel) -> float:
    d1 = rhs_tau(p1, grid, states.T)
    ru = np.abs(d1[1] - accel[:, 0]) * np.exp(2 * states[:, 0])
    rv = np.abs(d1[3] - accel[:, 1])
    return float(max(ru.max(), rv.max()))


def accelerations(profile: Profile) -> np.ndarray:
    """``(u'', v'')`` of the profile from its own equation, shape (n, 2)."""
    d = rhs_tau(profile.p, profile.grid, profile.states.T)
    return np.stack([d[1], d[3]], axis=1)


def cross_residual(profile: Profile, zeta1: float) -> float:
    """Sup-norm of the equation residual at ``zeta1`` along ``profile``.

    The u-equation residual is multiplied by ``exp(2u)`` so both components are
    of order one across the grid.
    """
    if abs(zeta1 - profile.p.zeta) >= 0.1:
        raise ValueError("|zeta1 - zeta0| must be below 0.1")
    p1 = profile.p.with_zeta(zeta1)
    return _residual_sup(p1, profile.grid, profile.states, accelerations(profile)) \
        + profile.residual_norm


@dataclass(frozen=True)
class StepPolicy:
    initial_step: float = 0.05
    min_step: float = 1e-5
    max_step: float = 0.1
    grow: float = 1.5
    shrink: float = 0.5
    predictor_threshold: float = 1e-2


@dataclass
class ContinuationRun:
    k: int
    zeta_targets: list[float]
    profiles: list[Profile]
    step_history: list[tuple[float, float, bool]]
    stalled: bool = False
    last_good_zeta: float = 0.0


def _predict(profiles, zeta1):
    last = profiles[-1]
    if len(profiles) < 2:
        return last.x
    prev = profiles[-2]
    dz = last.p.zeta - prev.p.zeta
    return last.x + (zeta1 - last.p.zeta) * (last.x - prev.x) / dz


def _predicted_residual(profiles, zeta1) -> float:
    """Equation residual at ``zeta1`` of the secant-extrapolated profile."""
    last = profiles[-1]
    if len(profiles) < 2:
        return _residual_sup(last.p.with_zeta(zeta1), last.grid, last.states,
                             accelerations(last)) + last.residual_norm
    prev = profiles[-2]
    w = (zeta1 - last.p.zeta) / (last.p.zeta - prev.p.zeta)
    states = last.states + w * (last.states - prev.states)
    acc_l, acc_p = accelerations(last), accelerations(prev)
    accel = acc_l + w * (acc_l - acc_p)
    return _residual_sup(last.p.with_zeta(zeta1), last.grid, states, accel)


def continue_in_zeta(k: int, zeta_max: float = 0.45, policy: StepPolicy | None = None,
                     cfg: SolverConfig | None = None, targets=None) -> ContinuationRun:
    """Sweep zeta from 0 to ``zeta_max`` warm-starting each solve.

    ``targets`` lists zeta values that must appear in the output family; the
    adaptive stepper lands on each of them exactly.
    """
    policy = policy or StepPolicy()
    cfg = cfg or SolverConfig()
    if not 0 <= zeta_max < 0.5:
        raise ValueError("zeta_max must lie in [0, 1/2)")
    marks = sorted({float(z) for z in (targets or []) if 0 < z <= zeta_max} | {zeta_max})
    p0 = ModelParams(k, 0.0)
    prof, J = shoot(p0, cfg, return_jacobian=True)
    if not prof.converged:
        raise RuntimeError(f"zeta=0 solve failed for k={k}")
    profiles = [prof]
    history: list[tuple[float, float, bool]] = []
    run = ContinuationRun(k, [0.0], profiles, history)
    zeta, step, wins = 0.0, policy.initial_step, 0
    while zeta < zeta_max - 1e-15:
        nxt = next(m for m in marks if m > zeta + 1e-15)
        z1 = min(zeta + step, nxt)
        if z1 - zeta < policy.min_step and z1 != nxt:
            run.stalled = True
            break
        if _predicted_residual(profiles, z1) > policy.predictor_threshold:
            history.append((zeta, z1 - zeta, False))
            step = (z1 - zeta) * policy.shrink
            wins = 0
            if step < policy.min_step:
                run.stalled = True
                break
            continue
        try:
            cand, J1 = shoot(ModelParams(k, z1), cfg, x0=_predict(profiles, z1), J=J,
                             return_jacobian=True)
            good = cand.converged
        except SingularJacobianError:
            good = False
        history.append((zeta, z1 - zeta, good))
        if not good:
            step = (z1 - zeta) * policy.shrink
            wins = 0
            J = None
            if step < policy.min_step:
                run.stalled = True
                break
            continue
        J = J1
        profiles.append(cand)
        zeta = z1
        run.zeta_targets.append(z1)
        wins += 1
        if wins >= 2:
            step = min(step * policy.grow, policy.max_step)
            wins = 0
    run.last_good_zeta = zeta
    return run
