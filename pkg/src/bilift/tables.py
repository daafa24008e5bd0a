"""Flat numeric tables compiled from symbolic expressions.

The hot integrators evaluate expressions millions of times, so each
expression list is flattened once into plain numpy arrays (one row per
term) that both the numba kernels and the vectorized numpy fallback can
consume without touching Python objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import SIN, CanonicalExpr
from .systems import NonlinearSystem


@dataclass(frozen=True)
class ExprTable:
    """Term-level arrays for a list of expressions over R^n.

    Term k contributes  coeff[k] * prod_l x_l^expon[k,l] * trig * exp  to
    output component comp[k]; field[k] = 0 for drift terms or the 1-based
    control index whose input multiplies the term.
    """

    n: int
    n_out: int
    n_controls: int
    coeff: np.ndarray      # float64 (K,)
    comp: np.ndarray       # int64 (K,)
    field: np.ndarray      # int64 (K,)
    expon: np.ndarray      # int64 (K, n)
    trig_kind: np.ndarray  # int64 (K,)  0 none, 1 sin, 2 cos
    trig_lin: np.ndarray   # float64 (K, n)
    trig_off: np.ndarray   # float64 (K,)
    has_exp: np.ndarray    # int64 (K,)
    exp_lin: np.ndarray    # float64 (K, n)
    exp_off: np.ndarray    # float64 (K,)

    def arrays(self) -> tuple:
        """Positional argument pack for the kernels."""
        return (
            self.coeff,
            self.comp,
            self.field,
            self.expon,
            self.trig_kind,
            self.trig_lin,
            self.trig_off,
            self.has_exp,
            self.exp_lin,
            self.exp_off,
        )


def _flatten(entries: Sequence[tuple[int, int, CanonicalExpr]], n: int,
             n_out: int, n_controls: int) -> ExprTable:
    rows = []
    for comp, field, expr in entries:
        for atom, coeff in expr.sorted_terms():
            tk, tlin, toff = 0, np.zeros(n), 0.0
            if atom.trig is not None:
                kind, arg = atom.trig
                tk = 1 if kind == SIN else 2
                tlin = np.array([float(c) for c in arg.linear])
                toff = float(arg.offset)
            he, elin, eoff = 0, np.zeros(n), 0.0
            if atom.expo is not None:
                he = 1
                elin = np.array([float(c) for c in atom.expo.linear])
                eoff = float(atom.expo.offset)
            rows.append(
                (float(coeff), comp, field, [int(e) for e in atom.monomial],
                 tk, tlin, toff, he, elin, eoff)
            )
    k = len(rows)
    table = ExprTable(
        n=n,
        n_out=n_out,
        n_controls=n_controls,
        coeff=np.array([r[0] for r in rows], dtype=np.float64),
        comp=np.array([r[1] for r in rows], dtype=np.int64),
        field=np.array([r[2] for r in rows], dtype=np.int64),
        expon=np.array([r[3] for r in rows], dtype=np.int64).reshape(k, n),
        trig_kind=np.array([r[4] for r in rows], dtype=np.int64),
        trig_lin=np.array([r[5] for r in rows], dtype=np.float64).reshape(k, n),
        trig_off=np.array([r[6] for r in rows], dtype=np.float64),
        has_exp=np.array([r[7] for r in rows], dtype=np.int64),
        exp_lin=np.array([r[8] for r in rows], dtype=np.float64).reshape(k, n),
        exp_off=np.array([r[9] for r in rows], dtype=np.float64),
    )
    return table


def compile_exprs(exprs: Sequence[CanonicalExpr]) -> ExprTable:
    """Table evaluating a list of expressions as one output vector."""
    exprs = list(exprs)
    if not exprs:
        raise ValueError("need at least one expression")
    n = exprs[0].n
    entries = [(j, 0, e) for j, e in enumerate(exprs)]
    return _flatten(entries, n, len(exprs), 0)


def compile_system(system: NonlinearSystem) -> ExprTable:
    """Table for the full right-hand side  f(x) + sum_i u_i g_i(x)."""
    entries = []
    for l, comp_expr in enumerate(system.f.components):
        entries.append((l, 0, comp_expr))
    for i, gi in enumerate(system.g, start=1):
        for l, comp_expr in enumerate(gi.components):
            entries.append((l, i, comp_expr))
    return _flatten(entries, system.n, system.n, system.m)
