"""File formats: system definitions, realizations, schedules, CSV tables.

Rationals are serialized as "p/q" strings so realization files round-trip
without float loss.  Trajectory and sample CSVs print floats with 17
significant digits.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .closure import OFFSET
from .errors import InputFileError
from .expr import CanonicalExpr, VectorField
from .parser import parse_expr
from .realization import BilinearRealization
from .simulate import ControlSchedule, Trajectory
from .systems import NonlinearSystem


def _frac_str(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def _frac_parse(text) -> Fraction:
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise InputFileError(f"bad rational literal {text!r}") from exc


# ---------------------------------------------------------------------------
# system files
# ---------------------------------------------------------------------------


def _substitute_params(text: str, params: dict[str, Fraction]) -> str:
    """Replace named constants by parenthesized rational literals, token-wise."""
    out = []
    i, size = 0, len(text)
    while i < size:
        ch = text[i]
        if ch.isalpha() or ch == "_":
            start = i
            while i < size and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            if word in params:
                out.append(f"({_frac_str(params[word])})")
            else:
                out.append(word)
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def system_from_dict(data: dict) -> tuple[NonlinearSystem, Optional[list[CanonicalExpr]]]:
    """Build a system (and optional seed list) from the JSON schema."""
    try:
        n = int(data["state_dim"])
        drift = data["drift"]
        controls = data.get("controls", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFileError(f"system file missing required field: {exc}") from exc
    if len(drift) != n:
        raise InputFileError(f"drift has {len(drift)} components, expected {n}")
    params = {k: _frac_parse(v) for k, v in (data.get("params") or {}).items()}

    def parse(text: str) -> CanonicalExpr:
        return parse_expr(_substitute_params(str(text), params), n)

    f = VectorField(tuple(parse(s) for s in drift))
    gs = []
    for i, gi in enumerate(controls, start=1):
        if len(gi) != n:
            raise InputFileError(
                f"control field {i} has {len(gi)} components, expected {n}"
            )
        gs.append(VectorField(tuple(parse(s) for s in gi)))
    system = NonlinearSystem(n, f, tuple(gs), name=str(data.get("name", "")))
    gamma0 = None
    if data.get("gamma0"):
        gamma0 = [parse(s) for s in data["gamma0"]]
    return system, gamma0


def load_system(path) -> tuple[NonlinearSystem, Optional[list[CanonicalExpr]]]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputFileError(f"cannot read system file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    return system_from_dict(data)


# ---------------------------------------------------------------------------
# realization files
# ---------------------------------------------------------------------------


def realization_to_dict(real: BilinearRealization) -> dict:
    return {
        "name": real.name,
        "n": real.n,
        "m": real.m,
        "r": real.r,
        "constant_mode": real.constant_mode,
        "k_star": real.k_star,
        "chain_dims": list(real.chain_dims),
        "basis": [str(gamma) for gamma in real.psi],
        "A": [[_frac_str(v) for v in row] for row in real.a_exact],
        "B": [[[_frac_str(v) for v in row] for row in bi] for bi in real.b_exact],
        "D0": [_frac_str(v) for v in real.d0_exact],
        "D": [[_frac_str(v) for v in di] for di in real.d_exact],
        "proj_rows": [
            [_frac_str(v) for v in row] if row is not None else None
            for row in real.proj_rows_exact
        ],
    }


def realization_from_dict(data: dict) -> BilinearRealization:
    try:
        n = int(data["n"])
        psi = [parse_expr(s, n) for s in data["basis"]]
        return BilinearRealization(
            psi=psi,
            a_exact=[[_frac_parse(v) for v in row] for row in data["A"]],
            b_exact=[[[_frac_parse(v) for v in row] for row in bi] for bi in data["B"]],
            d0_exact=[_frac_parse(v) for v in data["D0"]],
            d_exact=[[_frac_parse(v) for v in di] for di in data["D"]],
            proj_rows_exact=[
                [_frac_parse(v) for v in row] if row is not None else None
                for row in data["proj_rows"]
            ],
            constant_mode=data.get("constant_mode", OFFSET),
            chain_dims=tuple(data.get("chain_dims", ())),
            k_star=data.get("k_star"),
            name=data.get("name", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFileError(f"bad realization file: {exc}") from exc


def save_realization(real: BilinearRealization, path):
    Path(path).write_text(json.dumps(realization_to_dict(real), indent=2) + "\n")


def load_realization(path) -> BilinearRealization:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputFileError(f"cannot read realization file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    return realization_from_dict(data)


# ---------------------------------------------------------------------------
# schedules and CSV tables
# ---------------------------------------------------------------------------


def schedule_to_dict(sched: ControlSchedule) -> dict:
    return {
        "breakpoints": list(sched.breakpoints),
        "values": [list(v) for v in sched.values],
    }


def load_schedule(path) -> ControlSchedule:
    try:
        data = json.loads(Path(path).read_text())
        return ControlSchedule(
            tuple(float(t) for t in data["breakpoints"]),
            tuple(tuple(float(v) for v in row) for row in data["values"]),
        )
    except OSError as exc:
        raise InputFileError(f"cannot read schedule file {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise InputFileError(f"bad schedule file {path}: {exc}") from exc


def save_schedule(sched: ControlSchedule, path):
    Path(path).write_text(json.dumps(schedule_to_dict(sched), indent=2) + "\n")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_trajectory_csv(traj: Trajectory, path, prefix: Optional[str] = None):
    prefix = prefix if prefix is not None else ("z" if traj.kind == "lifted" else "x")
    header = "t," + ",".join(f"{prefix}{i + 1}" for i in range(traj.dim))
    lines = [header]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_reach_csv(coeffs: np.ndarray, points: np.ndarray, path):
    d = coeffs.shape[1] if coeffs.size else 0
    n = points.shape[1] if points.size else 0
    header = ",".join([f"h{i + 1}" for i in range(d)] + [f"x{i + 1}" for i in range(n)])
    lines = [header]
    for h, x in zip(coeffs, points):
        lines.append(",".join([_fmt(v) for v in h] + [_fmt(v) for v in x]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_vseries_csv(times, states, v_series, path):
    n = states.shape[1]
    header = "t," + ",".join(f"x{i + 1}" for i in range(n)) + ",V"
    lines = [header]
    for t, row, v in zip(times, states, v_series):
        lines.append(",".join([_fmt(t)] + [_fmt(x) for x in row] + [_fmt(v)]))
    Path(path).write_text("\n".join(lines) + "\n")
