"""Command-line front end.

Exit codes: 0 success, 1 invalid input or I/O failure, 2 converged but a bound
check failed, 3 no convergence.

Examples::

    tebe solve --k 1 --zeta 0.25 --out k1.json
    tebe sweep --k 2 --zeta-max 0.45 --out family_k2
    tebe verify k1.json
    tebe fields k1.json --grid 50 --out k1_fields.csv
    tebe indicial --k 3
    tebe spectrum k1.json --grid 400
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as tio
from . import linop, verify
from .fields import FieldBuilder, higgs_cartesian, pde_residual, spherical_components
from .params import ZETA_BARRIER, ModelParams
from .solver import SolverConfig, continue_in_zeta, shoot

log = logging.getLogger("tebe")

EXIT_OK, EXIT_INPUT, EXIT_BOUNDS, EXIT_NOCONV = 0, 1, 2, 3
DEFAULT_BOX = (0.5, 2.0, 0.5, 2.0)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    k: int | None = None
    zeta: float | None = None
    zeta_max: float | None = None
    tau_seed: float = 1e-2
    tau_max: float = 15.0
    tol: float = 1e-13
    grid: int | None = None
    out: str | None = None
    seed: int = 0
    path: str | None = None
    targets: list[float] | None = None

    def validate(self) -> None:
        errs = []
        if self.command in ("solve", "sweep", "indicial"):
            if self.k is None or isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
                errs.append(f"--k must be a positive integer (got {self.k})")
        if self.command == "solve":
            if self.zeta is None or not (0 <= self.zeta < ZETA_BARRIER):
                errs.append(f"--zeta must lie in [0, 1/2) (got {self.zeta})")
        if self.command == "sweep":
            if self.zeta_max is None or not (0 <= self.zeta_max < ZETA_BARRIER):
                errs.append(f"--zeta-max must lie in [0, 1/2) (got {self.zeta_max})")
        if self.command in ("solve", "sweep"):
            errs += self.solver_config().validate()
        if self.grid is not None and self.grid < 4:
            errs.append(f"--grid must be at least 4 (got {self.grid})")
        if self.command in ("verify", "fields", "spectrum") and not self.path:
            errs.append("a solution file is required")
        if errs:
            raise ConfigError("invalid configuration: " + "; ".join(errs))

    def solver_config(self) -> SolverConfig:
        return SolverConfig(tau_seed=self.tau_seed, tau_max=self.tau_max, tol=self.tol)


def _env_defaults() -> dict:
    path = os.environ.get("TEBE_CONFIG")
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read TEBE_CONFIG file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("TEBE_CONFIG must hold a JSON object")
    allowed = {"tau_seed", "tau_max", "tol", "grid", "seed", "zeta_max"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in TEBE_CONFIG: {sorted(unknown)}")
    return doc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tebe", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, solver=False):
        p.add_argument("--out", default=None, help="output path (stdout for JSON if omitted)")
        p.add_argument("--seed", type=int, default=None)
        if solver:
            p.add_argument("--tau-seed", type=float, default=None)
            p.add_argument("--tau-max", type=float, default=None)
            p.add_argument("--tol", type=float, default=None)
            p.add_argument("--grid", type=int, default=None, help="inner tau nodes")

    p = sub.add_parser("solve", help="solve at one twist")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--zeta", type=float, required=True)
    common(p, solver=True)

    p = sub.add_parser("sweep", help="continue the family from zeta = 0")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--zeta-max", type=float, default=None)
    p.add_argument("--targets", type=float, nargs="*", default=None,
                   help="twists that must appear in the family")
    common(p, solver=True)

    p = sub.add_parser("verify", help="certify a solution file")
    p.add_argument("path")
    p.add_argument("--golden", action="store_true",
                   help="refit frozen constants and rewrite the golden solution")
    p.add_argument("--yes", action="store_true", help="confirm --golden without prompting")
    common(p)

    p = sub.add_parser("fields", help="field and PDE-residual table on a grid")
    p.add_argument("path")
    p.add_argument("--grid", type=int, default=None, help="points per axis")
    p.add_argument("--box", type=float, nargs=4, default=DEFAULT_BOX,
                   metavar=("R0", "R1", "Y0", "Y1"))
    p.add_argument("--theta", type=float, default=0.0)
    common(p)

    p = sub.add_parser("indicial", help="indicial roots")
    p.add_argument("--k", type=int, required=True)
    common(p)

    p = sub.add_parser("spectrum", help="kernel triviality study of the linearized operator")
    p.add_argument("path")
    p.add_argument("--grid", type=int, default=None, help="interior angular nodes")
    p.add_argument("--golden", action="store_true", help="rewrite the spectrum baseline")
    p.add_argument("--yes", action="store_true")
    common(p)
    return ap


def _run_config(args) -> RunConfig:
    env = _env_defaults()
    pick = lambda name, default: (getattr(args, name, None) if getattr(args, name, None)
                                  is not None else env.get(name, default))
    return RunConfig(
        command=args.command, k=getattr(args, "k", None), zeta=getattr(args, "zeta", None),
        zeta_max=pick("zeta_max", None) if args.command == "sweep" else None,
        tau_seed=float(pick("tau_seed", 1e-2)), tau_max=float(pick("tau_max", 15.0)),
        tol=float(pick("tol", 1e-13)), grid=pick("grid", None), out=args.out,
        seed=int(pick("seed", 0)), path=getattr(args, "path", None),
        targets=getattr(args, "targets", None))


def _emit_json(doc, out: str | None) -> None:
    text = tio.dumps(doc)
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _confirm(args, what: str) -> bool:
    if args.yes:
        return True
    if not sys.stdin.isatty():
        log.error("--golden needs --yes when not run interactively")
        return False
    reply = input(f"Regenerate {what}? Type 'regenerate' to confirm: ")
    return reply.strip() == "regenerate"


def _profile_cfg(rc: RunConfig) -> SolverConfig:
    cfg = rc.solver_config()
    if rc.grid is not None:
        cfg = replace(cfg, n_inner=int(rc.grid))
    return cfg


def _status(profile, report) -> int:
    if not profile.converged:
        return EXIT_NOCONV
    return EXIT_OK if report.passed else EXIT_BOUNDS


# --- commands ---------------------------------------------------------------

def cmd_solve(rc: RunConfig) -> int:
    cfg = _profile_cfg(rc)
    if rc.zeta == 0:
        prof = shoot(ModelParams(rc.k, 0.0), cfg)
    else:
        run = continue_in_zeta(rc.k, rc.zeta, cfg=cfg)
        prof = run.profiles[-1]
        if run.stalled or prof.p.zeta != rc.zeta:
            log.error("continuation stalled at zeta=%.6g", run.last_good_zeta)
            return EXIT_NOCONV
    rep = verify.check_all(prof)
    out = rc.out or f"tebe_k{rc.k}_zeta{rc.zeta:g}.json"
    tio.write_profile(out, prof, _digest(rep))
    log.info("wrote %s (converged=%s, verified=%s)", out, prof.converged, rep.passed)
    return _status(prof, rep)


def _digest(rep) -> dict:
    return {"passed": rep.passed, "failures": rep.failures(),
            "margins": {r.name: r.margin for r in rep.records}}


SUMMARY_HEADER = ["zeta", "a", "c", "residual", "drift", "converged", "verified"] + [
    f"margin_{n}" for n in ("first_integral", "u_prime_monotone", "first_bound",
                            "preliminary_bounds", "upper_bound_near_zero", "v_prime_near_zero",
                            "quadratic_near_zero", "w_bounds_far", "V_vprime_far")]


def cmd_sweep(rc: RunConfig) -> int:
    cfg = _profile_cfg(rc)
    run = continue_in_zeta(rc.k, rc.zeta_max, cfg=cfg, targets=rc.targets)
    outdir = Path(rc.out or f"tebe_sweep_k{rc.k}")
    outdir.mkdir(parents=True, exist_ok=True)
    rows, ok_bounds = [], True
    for i, prof in enumerate(run.profiles):
        rep = verify.check_all(prof)
        ok_bounds &= rep.passed
        tio.write_profile(outdir / f"profile_{i:03d}.json", prof, _digest(rep))
        margins = {r.name: r.margin for r in rep.records}
        rows.append([prof.p.zeta, prof.params[0], prof.params[1], prof.residual_norm,
                     prof.first_integral_drift, int(prof.converged), int(rep.passed)]
                    + [float(margins.get(h[7:], math.nan)) for h in SUMMARY_HEADER[7:]])
    tio.write_csv(outdir / "summary.csv", SUMMARY_HEADER, rows)
    log.info("wrote %d profiles to %s", len(rows), outdir)
    if run.stalled or not all(p.converged for p in run.profiles):
        return EXIT_NOCONV
    return EXIT_OK if ok_bounds else EXIT_BOUNDS


def cmd_verify(rc: RunConfig, args) -> int:
    if args.golden:
        if not _confirm(args, "frozen constants and golden solution"):
            return EXIT_INPUT
        regenerate_golden(Path(rc.out) if rc.out else _data_dir())
        return EXIT_OK
    prof, _ = tio.read_profile(rc.path)
    rep = verify.check_all(prof)
    doc = {"schema_version": tio.SCHEMA_VERSION, "kind": "diagnostics", **rep.to_dict()}
    _emit_json(doc, rc.out)
    return _status(prof, rep)


def field_table(profile, r, y, theta: float = 0.0) -> tuple[list[str], np.ndarray]:
    """Columns of the fields CSV evaluated at the flattened points."""
    r = np.asarray(r, float).ravel()
    y = np.asarray(y, float).ravel()
    res1, res2 = pde_residual(profile, r, y, theta)
    fb = FieldBuilder(profile)
    z = r * np.exp(1j * theta)
    f = {k: v.val for k, v in fb.unitary(z, y).items() if k not in ("g",)}
    rho = np.hypot(r, y)
    psi = np.arctan2(r, y)
    A_rho, A_psi, A_theta = spherical_components(f, psi, theta, rho)
    scal = {"A": A_rho[:, 0, 1], "B": A_psi[:, 0, 1] / rho,
            "C": A_theta[:, 0, 0] / r, "D": A_theta[:, 0, 1] / r}
    Phis = higgs_cartesian(f, profile.p.cos_beta)
    cols = {"r": r, "y": y, "theta": np.full_like(r, theta), "rho": rho, "psi": psi,
            "Y": f["Y"].real, "Sigma_re": f["Sigma"].real, "Sigma_im": f["Sigma"].imag,
            "res1_re": res1.real, "res1_im": res1.imag, "res2_re": res2.real,
            "res2_im": res2.imag}
    for k, v in scal.items():
        cols[f"{k}_re"], cols[f"{k}_im"] = v.real, v.imag
    for i, P in enumerate(Phis, start=1):
        cols[f"Phi{i}_00_im"] = P[:, 0, 0].imag
        cols[f"Phi{i}_01_re"] = P[:, 0, 1].real
        cols[f"Phi{i}_01_im"] = P[:, 0, 1].imag
    names = list(cols)
    return names, np.stack([cols[n] for n in names], axis=1)


def cmd_fields(rc: RunConfig, args) -> int:
    prof, _ = tio.read_profile(rc.path)
    n = rc.grid or 50
    r0, r1, y0, y1 = args.box
    if min(r0, y0) <= 0 or r1 <= r0 or y1 <= y0:
        raise ConfigError("invalid configuration: --box must satisfy 0 < R0 < R1, 0 < Y0 < Y1")
    R, Y = np.meshgrid(np.linspace(r0, r1, n), np.linspace(y0, y1, n))
    names, data = field_table(prof, R, Y, args.theta)
    text = tio.csv_text(names, data.tolist())
    if rc.out:
        Path(rc.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _intify(xs):
    return [int(round(x)) if abs(x - round(x)) < 1e-9 else x for x in xs]


def cmd_indicial(rc: RunConfig) -> int:
    om, ps = linop.indicial_roots(rc.k)
    _emit_json({"schema_version": tio.SCHEMA_VERSION, "kind": "indicial", "k": rc.k,
                "omega_end": _intify(om), "psi_end": _intify(ps)}, rc.out)
    return EXIT_OK


def spectrum_report(prof, n: int = 400, seed: int = 0) -> dict:
    op = linop.assemble_phi(prof, n)
    s_n = linop.smallest_singular_value(op)
    s_2n = linop.smallest_singular_value(linop.assemble_phi(prof, 2 * n))
    s_eps = linop.smallest_singular_value(linop.assemble_phi(prof, n, margin=5e-4))
    secs = linop.random_sections(op, 100, seed)
    q = [linop.quadratic_form(op, s) for s in secs]
    lim = linop.coefficient_limits(prof)
    return {"schema_version": tio.SCHEMA_VERSION, "kind": "spectrum",
            "k": prof.p.k, "zeta": prof.p.zeta, "n": n,
            "sigma_min": s_n, "sigma_min_refined": s_2n,
            "refinement_change": abs(s_2n - s_n) / s_n,
            "sigma_min_half_margin": s_eps, "margin_change": abs(s_eps - s_n) / s_n,
            "form_defect": op.form_defect, "seed": seed,
            "quadratic_form_max": max(q), "quadratic_form_all_negative": bool(max(q) < 0),
            "coefficient_limits": [{"end": f.end, "entry": f.entry, "power": f.power,
                                    "coefficient": f.coefficient, "r2": f.r2, "ok": f.ok}
                                   for f in lim]}


def cmd_spectrum(rc: RunConfig, args) -> int:
    if args.golden:
        if not _confirm(args, "the spectrum baseline"):
            return EXIT_INPUT
        regenerate_spectrum_baseline(Path(rc.out) if rc.out else _data_dir())
        return EXIT_OK
    prof, _ = tio.read_profile(rc.path)
    if not prof.converged:
        return EXIT_NOCONV
    rep = spectrum_report(prof, rc.grid or 400, rc.seed)
    _emit_json(rep, rc.out)
    ok = rep["quadratic_form_all_negative"] and rep["refinement_change"] < 0.1
    return EXIT_OK if ok else EXIT_BOUNDS


# --- baselines --------------------------------------------------------------

def _data_dir() -> Path:
    return Path(str(resources.files("tebe").joinpath("data")))


def regenerate_golden(outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    profiles = [shoot(ModelParams(k, 0.0)) for k in (1, 2, 3, 4)]
    consts = verify.fit_constants(profiles)
    (outdir / "constants.json").write_text(verify.constants_to_json(consts), encoding="utf-8")
    rep = verify.check_all(profiles[0], consts)
    tio.write_profile(outdir / "golden_k1_zeta0.json", profiles[0], _digest(rep))


SPECTRUM_CASES = ((1, 0.0), (1, 0.3))


def regenerate_spectrum_baseline(outdir: Path, n: int = 400) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    cases = []
    for k, z in SPECTRUM_CASES:
        prof = continue_in_zeta(k, z).profiles[-1] if z else shoot(ModelParams(k, 0.0))
        s = linop.smallest_singular_value(linop.assemble_phi(prof, n))
        # the recorded floor is half the measured value
        cases.append({"k": k, "zeta": z, "n": n, "sigma_min": s, "baseline": 0.5 * s})
    tio.write_json(outdir / "spectrum_baseline.json",
                   {"schema_version": tio.SCHEMA_VERSION, "kind": "spectrum_baseline",
                    "cases": cases})


def load_spectrum_baseline() -> list[dict]:
    doc = json.loads(resources.files("tebe").joinpath("data/spectrum_baseline.json").read_text())
    tio.check_schema(doc)
    return doc["cases"]


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = _run_config(args)
        rc.validate()
        if rc.command == "solve":
            return cmd_solve(rc)
        if rc.command == "sweep":
            return cmd_sweep(rc)
        if rc.command == "verify":
            return cmd_verify(rc, args)
        if rc.command == "fields":
            return cmd_fields(rc, args)
        if rc.command == "indicial":
            return cmd_indicial(rc)
        return cmd_spectrum(rc, args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT
    except (OSError, tio.SchemaError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
