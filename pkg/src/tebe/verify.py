"""Certification of a profile against the a-priori identities and bounds.

Checks 1-4 are absolute.  Checks 5-7 and 9 use constants fitted once on the
untwisted profiles (times a safety factor of 2) and frozen in
``data/constants.json``.  Check 8 uses constants derived from the frozen ones
through the comparison argument: ``u' >= b`` gives the lower bounds and the
first integral with ``V <= exp(2 zeta b tau)`` gives the upper ones.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .ode import V_of, first_integral, witten_u0

CONSTANTS_VERSION = 1
SAFETY = 2.0
TAU0_MAX = 0.5
QUAD_CMAX = 10.0
SLACK = 1e-10
FLOOR = 1e-8     # accuracy floor of u' - u0' on a converged profile


class FitError(RuntimeError):
    pass


@dataclass
class CheckRecord:
    name: str
    anchor: str
    margin: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class DiagnosticsReport:
    k: int
    zeta: float
    records: list[CheckRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> list[str]:
        return [r.name for r in self.records if not r.passed]

    def to_dict(self) -> dict:
        return {"k": self.k, "zeta": self.zeta, "passed": self.passed,
                "records": [asdict(r) for r in self.records]}


@dataclass(frozen=True)
class BoundConstants:
    k: int
    tau0: float
    C_upper: float       # u <= log(2 tau) + C tau
    C_vprime: float      # |v'| <= C tau near 0
    C_quad: float        # |u - log 2tau| <= C tau^2, |u' - 1/tau| <= C tau
    C_V: float           # |V| <= C on [tau0, inf)
    C_vdecay: float      # |v'| <= C exp(-min(2, d b) tau) on [tau0, inf)


# --- constants ----------------------------------------------------------------

def _near(profile, tau_hi):
    m = profile.grid <= tau_hi * (1 + 1e-12)
    return profile.grid[m], profile.states[m]


def _quad_ratio(tau, st):
    d = np.abs(st[:, 0] - np.log(2 * tau)) / tau ** 2
    e = np.abs(st[:, 1] - 1 / tau) / tau
    return np.maximum(d, e)


def fit_constants(profiles) -> dict[int, BoundConstants]:
    """Fit bound constants on untwisted profiles, one per charge."""
    out = {}
    for pr in profiles:
        if pr.p.zeta != 0.0:
            raise FitError("constants are fitted on zeta = 0 profiles only")
        k = pr.p.k
        grid, st = pr.grid, pr.states
        cands = grid[(grid > 0.05) & (grid <= TAU0_MAX)]
        tau0 = None
        for t0 in cands[::-1]:
            tau, s = _near(pr, t0)
            if np.max(_quad_ratio(tau, s)) <= QUAD_CMAX:
                tau0 = float(t0)
                break
        if tau0 is None:
            ratio = float(np.max(_quad_ratio(*_near(pr, cands[0]))))
            raise FitError(f"k={k}: quadratic fit near tau=0 needs C={ratio:.3f} > "
                           f"{QUAD_CMAX}; no admissible tau0")
        tau, s = _near(pr, tau0)
        C_upper = SAFETY * float(np.max((s[:, 0] - np.log(2 * tau)) / tau))
        th, sh = _near(pr, tau0 / 2)
        C_vp = SAFETY * float(np.max(np.abs(sh[:, 3]) / th))
        C_quad = SAFETY * float(np.max(_quad_ratio(tau, s)))
        far = grid >= tau0
        V = V_of(pr.p, st[far, 2])
        rate = min(2.0, pr.p.d_zeta * pr.p.b)
        C_V = SAFETY * float(np.max(np.abs(V)))
        C_vd = SAFETY * float(np.max(np.abs(st[far, 3]) * np.exp(rate * grid[far])))
        out[k] = BoundConstants(k, tau0, _r(C_upper), _r(C_vp), _r(C_quad), _r(C_V), _r(C_vd))
    return out


def _r(x: float) -> float:
    """Round constants up to 6 significant digits so the file is stable."""
    if x == 0:
        return 0.0
    e = math.floor(math.log10(abs(x))) - 5
    return float(f"{math.ceil(x / 10 ** e) * 10 ** e:.6g}")


def constants_to_json(consts: dict[int, BoundConstants]) -> str:
    doc = {"schema_version": f"{CONSTANTS_VERSION}.0", "safety_factor": SAFETY,
           "tau0_max": TAU0_MAX, "quadratic_fit_cap": QUAD_CMAX,
           "fitted_on": "untwisted profiles (zeta = 0), default solver configuration",
           "constants": {str(k): asdict(c) for k, c in sorted(consts.items())}}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_constants(path: str | Path | None = None) -> dict[int, BoundConstants]:
    if path is None:
        text = resources.files("tebe").joinpath("data/constants.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    major = int(str(doc["schema_version"]).split(".")[0])
    if major != CONSTANTS_VERSION:
        raise ValueError(f"unsupported constants schema {doc['schema_version']}")
    return {int(k): BoundConstants(**v) for k, v in doc["constants"].items()}


# --- checks ------------------------------------------------------------------

def _rec(name, anchor, margin, tol, detail=""):
    return CheckRecord(name, anchor, float(margin), float(tol), bool(margin >= -tol), detail)


def derived_far_constants(p, c: BoundConstants) -> dict:
    """Constants of the far-field comparison bounds implied by the frozen ones."""
    b, t0 = p.b, c.tau0
    q = 1.0 - math.exp(-2 * b * t0)
    gap0 = float(witten_u0(p, t0)) - math.log(2 * t0)   # u0 - log(2 tau) at tau0
    K_low = 2 * b / q
    C_w_low = c.C_quad * t0 ** 2 + gap0 + K_low * math.exp(-2 * b * t0) / (2 * b)
    K_up = 2 * b * math.exp(2 * C_w_low) / q ** 2
    d = p.d_zeta
    C_w_up = c.C_quad * t0 ** 2 - gap0 + K_up * math.exp(-d * b * t0) / (d * b)
    return {"K_low": K_low, "C_w_low": C_w_low, "K_up": K_up, "C_w_up": C_w_up}


def check_all(profile, constants: dict[int, BoundConstants] | None = None,
              tol_scale: float = 1.0) -> DiagnosticsReport:
    """Evaluate the nine checks in order; failures become report entries."""
    p = profile.p
    k, b, z = p.k, p.b, p.zeta
    g = np.asarray(profile.grid)
    st = np.asarray(profile.states)
    u, du, v, dv = st.T
    V = V_of(p, v)
    rep = DiagnosticsReport(k, z)

    # 1. first integral
    fi = first_integral(p, st.T)
    drift = np.abs(fi - b * b) / b ** 2
    i = int(np.argmax(drift))
    rep.records.append(_rec("first_integral", "first integral equals (k+1)^2",
                            1e-8 * tol_scale - drift[i], 0.0, f"worst tau={g[i]:.6g}"))
    # 2. u' nonincreasing
    inc = np.diff(du)
    i = int(np.argmax(inc))
    rep.records.append(_rec("u_prime_monotone", "u' is nonincreasing",
                            -inc[i], SLACK * tol_scale,
                            f"largest increase {inc[i]:.3e} at tau={g[i + 1]:.6g}"))
    # 3. 4V^2 - zeta^2 v'^2 >= 0
    q = 4 * V * V - z * z * dv * dv
    i = int(np.argmin(q))
    rep.records.append(_rec("first_bound", "4V^2 - zeta^2 v'^2 >= 0", q[i], SLACK * tol_scale,
                            f"tau={g[i]:.6g}"))
    # 4. preliminary bounds
    grow = np.exp(2 * z * b * g)
    m = np.minimum(V - 1 / grow, grow - V)
    detail = ""
    if z > 0:
        mv = 2 / z * grow - np.abs(dv)
        m = np.minimum(m, mv / (2 / z * grow))
    else:
        detail = "v' bound vacuous at zeta=0 (skipped)"
    i = int(np.argmin(m))
    rep.records.append(_rec("preliminary_bounds", "exp(-2 zeta b tau) <= V <= exp(2 zeta b tau)",
                            m[i], SLACK * tol_scale, detail or f"tau={g[i]:.6g}"))

    consts = constants if constants is not None else load_constants()
    c = consts.get(k)
    if c is None:
        for name in ("upper_bound_near_zero", "v_prime_near_zero", "quadratic_near_zero",
                     "w_bounds_far", "V_vprime_far"):
            rep.records.append(CheckRecord(name, "frozen constants", -math.inf, 0.0, False,
                                           f"no frozen constants for k={k}"))
        return rep
    tol = SLACK * tol_scale
    near = g <= c.tau0 * (1 + 1e-12)
    tn, un, dun = g[near], u[near], du[near]
    # 5. u <= log(2 tau) + C tau
    m = c.C_upper * tn - (un - np.log(2 * tn))
    i = int(np.argmin(m))
    rep.records.append(_rec("upper_bound_near_zero", "u <= log(2 tau) + C tau",
                            m[i] / tn[i], tol, f"C={c.C_upper} tau0={c.tau0}"))
    # 6. |v'| <= C tau on (0, tau0/2]
    half = g <= c.tau0 / 2 * (1 + 1e-12)
    m = c.C_vprime - np.abs(dv[half]) / g[half]
    i = int(np.argmin(m))
    rep.records.append(_rec("v_prime_near_zero", "|v'| <= C tau", m[i], tol, f"C={c.C_vprime}"))
    # 7. |u - log 2tau| <= C tau^2, |u' - 1/tau| <= C tau
    ratio = np.maximum(np.abs(un - np.log(2 * tn)) / tn ** 2, np.abs(dun - 1 / tn) / tn)
    i = int(np.argmax(ratio))
    rep.records.append(_rec("quadratic_near_zero", "|u - log(2 tau)| <= C tau^2",
                            c.C_quad - ratio[i], tol, f"C={c.C_quad} worst tau={tn[i]:.6g}"))
    # 8. far-field bounds on w = u - u0
    far = g >= c.tau0 * (1 - 1e-12)
    tf = g[far]
    d = derived_far_constants(p, c)
    u0, du0 = witten_u0(p, tf), _du0(p, tf)
    w, dw = u[far] - u0, du[far] - du0
    scale = np.maximum(1.0, np.abs(w))
    mw = np.min(np.minimum(w + d["C_w_low"], d["C_w_up"] - w) / scale)
    low = np.exp(-2 * b * tf) * d["K_low"]
    up = np.exp(-p.d_zeta * b * tf) * d["K_up"]
    # w' is compared absolutely: its envelopes decay below the solver accuracy
    mdw = np.min(np.minimum(dw + low, up - dw))
    rep.records.append(_rec("w_bounds_far", "-C <= w <= C_zeta and exponential w' bounds",
                            min(mw, mdw), FLOOR * tol_scale,
                            ", ".join(f"{kk}={vv:.6g}" for kk, vv in d.items())))
    # 9. |V| <= C and two-sided exponential decay of v'
    rate = min(2.0, p.d_zeta * b)
    mV = c.C_V - np.max(np.abs(V[far]))
    env = c.C_vdecay * np.exp(-rate * tf)
    mv = np.min((env - np.abs(dv[far])) / env)
    rep.records.append(_rec("V_vprime_far", "|V| <= C and |v'| <= C exp(-min(2, d b) tau)",
                            min(mV, mv), tol, f"C_V={c.C_V} C={c.C_vdecay} rate={rate:.6g}"))
    return rep


def _du0(p, tau):
    b = p.b
    e = np.exp(-2.0 * b * np.asarray(tau, float))
    return b * (1 + e) / (1 - e)
