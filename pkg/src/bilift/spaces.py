"""Finite-dimensional function spaces with exact rational span arithmetic.

A space is stored as a reduced row echelon form over a growing index of
atoms, so dimension counts, membership tests and coordinate solves are all
exact.  No floating-point rank decisions are made anywhere in this module.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Optional

from .errors import DimensionMismatchError
from .expr import Atom, CanonicalExpr

_ZERO = Fraction(0)


class ExactSpan:
    """Mutable RREF accumulator tracking how rows combine the admitted gens.

    Used as the engine behind FunctionSpace and the closure iteration.  Rows
    are kept fully reduced (unit pivots, zeros above and below), ordered by
    pivot column.  ``transform[i]`` expresses row i over the admitted
    generators, so membership solves can be reported in generator
    coordinates.
    """

    def __init__(self, n: int):
        self.n = n
        self.atoms: list[Atom] = []
        self.atom_pos: dict[Atom, int] = {}
        self.rows: list[dict[int, Fraction]] = []
        self.pivots: list[int] = []
        self.transform: list[dict[int, Fraction]] = []
        self.gen_count = 0

    @property
    def dim(self) -> int:
        return len(self.rows)

    def _vector(self, e: CanonicalExpr, grow: bool) -> Optional[dict[int, Fraction]]:
        if e.n != self.n:
            raise DimensionMismatchError(f"ambient dimensions differ: {e.n} vs {self.n}")
        vec: dict[int, Fraction] = {}
        for atom, coeff in e.terms.items():
            pos = self.atom_pos.get(atom)
            if pos is None:
                if not grow:
                    return None
                pos = len(self.atoms)
                self.atoms.append(atom)
                self.atom_pos[atom] = pos
            vec[pos] = coeff
        return vec

    @staticmethod
    def _axpy(target: dict[int, Fraction], factor: Fraction, source: dict[int, Fraction]):
        if factor == 0:
            return
        for col, value in source.items():
            c = target.get(col, _ZERO) - factor * value
            if c == 0:
                target.pop(col, None)
            else:
                target[col] = c

    def _eliminate(self, vec: dict[int, Fraction]) -> dict[int, Fraction]:
        """Reduce vec in place against the rows; returns row combination used."""
        combo: dict[int, Fraction] = {}
        for i, pivot in enumerate(self.pivots):
            factor = vec.get(pivot)
            if factor:
                combo[i] = factor
                self._axpy(vec, factor, self.rows[i])
        return combo

    def add_gen(self, e: CanonicalExpr) -> bool:
        """Admit a generator; returns True when the dimension grew."""
        vec = self._vector(e, grow=True)
        combo = self._eliminate(vec)
        if not vec:
            return False
        pivot = min(vec)
        lead = vec[pivot]
        row = {col: value / lead for col, value in vec.items()}
        trow: dict[int, Fraction] = {self.gen_count: Fraction(1, 1) / lead}
        for i, factor in combo.items():
            self._axpy(trow, factor / lead, self.transform[i])
        # clear the new pivot column from existing rows
        for i in range(len(self.rows)):
            factor = self.rows[i].get(pivot)
            if factor:
                self._axpy(self.rows[i], factor, row)
                self._axpy(self.transform[i], factor, trow)
        at = next((k for k, p in enumerate(self.pivots) if p > pivot), len(self.pivots))
        self.rows.insert(at, row)
        self.pivots.insert(at, pivot)
        self.transform.insert(at, trow)
        self.gen_count += 1
        return True

    def reduce(self, e: CanonicalExpr) -> tuple[CanonicalExpr, dict[int, Fraction]]:
        """Remainder of e against the span plus the row combination used.

        Does not mutate the span; atoms unknown to the index pass straight
        into the remainder.
        """
        if e.n != self.n:
            raise DimensionMismatchError(f"ambient dimensions differ: {e.n} vs {self.n}")
        vec: dict[int, Fraction] = {}
        extra: dict[Atom, Fraction] = {}
        for atom, coeff in e.terms.items():
            pos = self.atom_pos.get(atom)
            if pos is None:
                extra[atom] = coeff
            else:
                vec[pos] = coeff
        combo = self._eliminate(vec)
        terms = dict(extra)
        for col, coeff in vec.items():
            terms[self.atoms[col]] = coeff
        return CanonicalExpr(self.n, terms), combo

    def contains(self, e: CanonicalExpr) -> Optional[list[Fraction]]:
        """Coefficients of e over the ROWS, or None when e is outside."""
        remainder, combo = self.reduce(e)
        if not remainder.is_zero():
            return None
        return [combo.get(i, _ZERO) for i in range(len(self.rows))]

    def solve_in_gens(self, e: CanonicalExpr) -> Optional[list[Fraction]]:
        """Coefficients of e over the ADMITTED generators, or None."""
        remainder, combo = self.reduce(e)
        if not remainder.is_zero():
            return None
        coeffs = [_ZERO] * self.gen_count
        for i, factor in combo.items():
            for j, value in self.transform[i].items():
                coeffs[j] += factor * value
        return coeffs

    def row_expr(self, i: int) -> CanonicalExpr:
        return CanonicalExpr(self.n, {self.atoms[c]: v for c, v in self.rows[i].items()})


class FunctionSpace:
    """Immutable span of expressions with a reduced (RREF) basis."""

    __slots__ = ("n", "basis", "atom_index", "coeff_matrix", "_span")

    def __init__(self, span: ExactSpan):
        object.__setattr__(self, "_span", span)
        object.__setattr__(self, "n", span.n)
        object.__setattr__(self, "basis", tuple(span.row_expr(i) for i in range(span.dim)))
        object.__setattr__(self, "atom_index", tuple(span.atoms))
        matrix = tuple(
            tuple(row.get(c, _ZERO) for c in range(len(span.atoms)))
            for row in span.rows
        )
        object.__setattr__(self, "coeff_matrix", matrix)

    def __setattr__(self, *_):
        raise AttributeError("FunctionSpace is immutable")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, e: CanonicalExpr) -> Optional[list[Fraction]]:
        return self._span.contains(e)

    def __contains__(self, e: CanonicalExpr) -> bool:
        return self._span.contains(e) is not None

    def __eq__(self, other) -> bool:
        if not isinstance(other, FunctionSpace):
            return NotImplemented
        if self.n != other.n or self.dim != other.dim:
            return False
        return all(b in other for b in self.basis)

    def __hash__(self):
        return hash((self.n, self.dim))

    def __repr__(self):
        return f"FunctionSpace(dim={self.dim}, basis=[{', '.join(map(str, self.basis))}])"


def space_reduce(gens: Iterable[CanonicalExpr], n: Optional[int] = None) -> FunctionSpace:
    """Span of the generators with an exact reduced basis.

    The empty input yields the zero space; pass ``n`` to fix its ambient
    dimension in that case.
    """
    gens = list(gens)
    if not gens:
        if n is None:
            raise ValueError("empty generator list needs an explicit dimension")
        return FunctionSpace(ExactSpan(n))
    span = ExactSpan(gens[0].n)
    for g in gens:
        if not g.is_zero():
            span.add_gen(g)
    return FunctionSpace(span)


def space_sum(s1: FunctionSpace, s2: FunctionSpace) -> FunctionSpace:
    """Span of the union of two spaces."""
    if s1.n != s2.n:
        raise DimensionMismatchError(f"ambient dimensions differ: {s1.n} vs {s2.n}")
    return space_reduce(list(s1.basis) + list(s2.basis), n=s1.n)


def space_contains(space: FunctionSpace, e: CanonicalExpr) -> Optional[list[Fraction]]:
    """Exact coefficients of e in the space's basis, or None when outside."""
    return space.contains(e)
