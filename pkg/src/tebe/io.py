"""Versioned JSON and CSV persistence.

Floats are written with 17 significant digits so that write -> read -> write is
byte-identical.  Output is UTF-8 with LF line endings and sorted keys.
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .params import ModelParams
from .solver import Profile, SolverConfig

SCHEMA_VERSION = "1.0"
TOOL_NAME = "tebe"
TOOL_VERSION = "0.1.0"


class SchemaError(ValueError):
    pass


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _emit(obj, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items())
        for i, (k, v) in enumerate(items):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
        elif all(isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool)
                 for v in seq):
            # numeric arrays on one line keep files compact
            out.append("[" + ", ".join(_scalar(v) for v in seq) + "]")
        else:
            out.append("[\n")
            for i, v in enumerate(seq):
                out.append(pad)
                _emit(v, indent, level + 1, out)
                out.append(",\n" if i < len(seq) - 1 else "\n")
            out.append(end + "]")
    else:
        out.append(_scalar(obj))


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    raise TypeError(f"cannot serialise {type(v).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def read_json(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    check_schema(doc)
    return doc


def check_schema(doc: dict) -> None:
    ver = doc.get("schema_version") if isinstance(doc, dict) else None
    if ver is None:
        raise SchemaError("document has no schema_version")
    major = str(ver).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise SchemaError(f"unsupported schema major version {ver}")


# --- solution files ---------------------------------------------------------

def profile_to_doc(profile: Profile, diagnostics: dict | None = None) -> dict:
    st = np.asarray(profile.states)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "solution",
        "tool": {"name": TOOL_NAME, "version": TOOL_VERSION},
        "params": {"k": profile.p.k, "zeta": profile.p.zeta},
        "shooting": {"a": profile.params[0], "c": profile.params[1],
                     "w_R": profile.far[0], "v_R": profile.far[1]},
        "converged": profile.converged,
        "iterations": profile.iterations,
        "residual_norm": profile.residual_norm,
        "first_integral_drift": profile.first_integral_drift,
        "farfield_residuals": list(profile.farfield),
        "config": asdict(profile.config),
        "diagnostics": diagnostics,
        "grid": profile.grid,
        "states": {"u": st[:, 0], "du": st[:, 1], "v": st[:, 2], "dv": st[:, 3]},
    }


def doc_to_profile(doc: dict) -> Profile:
    check_schema(doc)
    if doc.get("kind") != "solution":
        raise SchemaError("not a solution document")
    p = ModelParams(doc["params"]["k"], doc["params"]["zeta"])
    names = {f.name for f in fields(SolverConfig)}
    cfg = SolverConfig(**{k: v for k, v in doc["config"].items() if k in names})
    s = doc["states"]
    states = np.stack([np.asarray(s[c], float) for c in ("u", "du", "v", "dv")], axis=1)
    sh = doc["shooting"]
    return Profile(p, np.asarray(doc["grid"], float), states, (sh["a"], sh["c"]),
                   (sh["w_R"], sh["v_R"]), doc["residual_norm"], doc["first_integral_drift"],
                   bool(doc["converged"]), int(doc["iterations"]), cfg,
                   tuple(doc.get("farfield_residuals", (0.0, 0.0))))


def write_profile(path: str | Path, profile: Profile, diagnostics: dict | None = None) -> None:
    write_json(path, profile_to_doc(profile, diagnostics))


def read_profile(path: str | Path) -> tuple[Profile, dict]:
    doc = read_json(path)
    return doc_to_profile(doc), doc


# --- CSV --------------------------------------------------------------------

def csv_text(header: list[str], rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, header: list[str], rows) -> None:
    Path(path).write_text(csv_text(header, rows), encoding="utf-8", newline="\n")
