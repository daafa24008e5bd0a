"""Exact symbolic expressions: rational combinations of monomial*trig*exp atoms.

The representable class is spanned by atoms of the form

    x1^a1 * ... * xn^an * [sin|cos](affine(x)) * exp(affine(x))

with rational coefficients and rational affine forms.  The class is closed
under addition, multiplication, partial differentiation and Lie derivation
along vector fields whose components also live in the class.  Every value is
kept in a canonical form, so two expressions are equal as functions exactly
when their term maps are equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .errors import DimensionMismatchError, IndexOutOfRangeError

_ZERO = Fraction(0)
_ONE = Fraction(1)
_HALF = Fraction(1, 2)


@dataclass(frozen=True)
class AffineForm:
    """Rational affine form  linear . x + offset."""

    linear: tuple[Fraction, ...]
    offset: Fraction

    @property
    def n(self) -> int:
        return len(self.linear)

    def is_zero(self) -> bool:
        return self.offset == 0 and all(c == 0 for c in self.linear)

    def is_constant(self) -> bool:
        return all(c == 0 for c in self.linear)

    def __add__(self, other: "AffineForm") -> "AffineForm":
        return AffineForm(
            tuple(a + b for a, b in zip(self.linear, other.linear)),
            self.offset + other.offset,
        )

    def __sub__(self, other: "AffineForm") -> "AffineForm":
        return AffineForm(
            tuple(a - b for a, b in zip(self.linear, other.linear)),
            self.offset - other.offset,
        )

    def __neg__(self) -> "AffineForm":
        return AffineForm(tuple(-a for a in self.linear), -self.offset)

    def value_at(self, x) -> float:
        acc = float(self.offset)
        for c, xi in zip(self.linear, x):
            if c:
                acc += float(c) * xi
        return acc

    def sort_key(self):
        return (self.linear, self.offset)

    def __str__(self) -> str:
        parts = []
        for j, c in enumerate(self.linear):
            if c == 0:
                continue
            parts.append((c, f"x{j + 1}"))
        text = ""
        for c, var in parts:
            mag = abs(c)
            piece = var if mag == 1 else f"{mag}*{var}"
            if not text:
                text = piece if c > 0 else f"-{piece}"
            else:
                text += f" + {piece}" if c > 0 else f" - {piece}"
        if self.offset != 0 or not text:
            mag = abs(self.offset)
            if not text:
                text = str(self.offset)
            else:
                text += f" + {mag}" if self.offset > 0 else f" - {mag}"
        return text


SIN = "sin"
COS = "cos"

_TRIG_CODE = {None: 0, SIN: 1, COS: 2}


@dataclass(frozen=True)
class Atom:
    """Canonical basis function: monomial times optional trig times optional exp.

    Invariants: at most one trig and one exp factor; trig argument is
    sign-normalized (first nonzero coefficient positive, checking the offset
    when the linear part vanishes); neither argument is the zero form.
    """

    monomial: tuple[int, ...]
    trig: Optional[tuple[str, AffineForm]] = None
    expo: Optional[AffineForm] = None

    @property
    def n(self) -> int:
        return len(self.monomial)

    def is_one(self) -> bool:
        return self.trig is None and self.expo is None and not any(self.monomial)

    def degree(self) -> int:
        return sum(self.monomial)

    def sort_key(self):
        tk, targ = (0, ((), _ZERO))
        if self.trig is not None:
            tk = _TRIG_CODE[self.trig[0]]
            targ = self.trig[1].sort_key()
        ek, earg = (0, ((), _ZERO))
        if self.expo is not None:
            ek, earg = 1, self.expo.sort_key()
        return (self.degree(), self.monomial, tk, targ, ek, earg)

    def value_at(self, x) -> float:
        acc = 1.0
        for e, xi in zip(self.monomial, x):
            if e:
                acc *= xi ** e
        if self.trig is not None:
            kind, arg = self.trig
            a = arg.value_at(x)
            acc *= math.sin(a) if kind == SIN else math.cos(a)
        if self.expo is not None:
            acc *= math.exp(self.expo.value_at(x))
        return acc

    def __str__(self) -> str:
        factors = []
        for j, e in enumerate(self.monomial):
            if e == 1:
                factors.append(f"x{j + 1}")
            elif e > 1:
                factors.append(f"x{j + 1}^{e}")
        if self.trig is not None:
            factors.append(f"{self.trig[0]}({self.trig[1]})")
        if self.expo is not None:
            factors.append(f"exp({self.expo})")
        return "*".join(factors) if factors else "1"


def _normalize_trig(kind: str, arg: AffineForm) -> tuple[Fraction, Optional[tuple[str, AffineForm]]]:
    """Return (coefficient multiplier, normalized trig factor or None).

    sin(0) and cos(0) fold into the coefficient; a leading negative sign in
    the argument is pulled out using the parity of sin/cos.
    """
    if arg.is_zero():
        return (_ZERO, None) if kind == SIN else (_ONE, None)
    lead = next((c for c in arg.linear if c != 0), arg.offset)
    if lead < 0:
        flipped = -arg
        if kind == SIN:
            return -_ONE, (SIN, flipped)
        return _ONE, (COS, flipped)
    return _ONE, (kind, arg)


def _merge_expo(a: Optional[AffineForm], b: Optional[AffineForm]) -> Optional[AffineForm]:
    if a is None:
        return b
    if b is None:
        return a
    s = a + b
    return None if s.is_zero() else s


def _mul_atoms(a: Atom, b: Atom) -> list[tuple[Fraction, Atom]]:
    mono = tuple(p + q for p, q in zip(a.monomial, b.monomial))
    expo = _merge_expo(a.expo, b.expo)
    if a.trig is None or b.trig is None:
        trig = a.trig if b.trig is None else b.trig
        return [(_ONE, Atom(mono, trig, expo))]
    (k1, a1), (k2, a2) = a.trig, b.trig
    if k1 == SIN and k2 == SIN:
        pieces = [(_HALF, COS, a1 - a2), (-_HALF, COS, a1 + a2)]
    elif k1 == COS and k2 == COS:
        pieces = [(_HALF, COS, a1 - a2), (_HALF, COS, a1 + a2)]
    elif k1 == SIN:  # sin * cos
        pieces = [(_HALF, SIN, a1 + a2), (_HALF, SIN, a1 - a2)]
    else:  # cos * sin
        pieces = [(_HALF, SIN, a1 + a2), (-_HALF, SIN, a1 - a2)]
    out = []
    for coeff, kind, arg in pieces:
        sign, trig = _normalize_trig(kind, arg)
        c = coeff * sign
        if c != 0:
            out.append((c, Atom(mono, trig, expo)))
    return out


class CanonicalExpr:
    """A function in the closed class, stored as a map atom -> coefficient.

    Instances are immutable after construction; all arithmetic returns new
    values.  Zero coefficients are never stored.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Optional[dict[Atom, Fraction]] = None):
        object.__setattr__(self, "n", n)
        clean = {}
        if terms:
            for atom, coeff in terms.items():
                if coeff != 0:
                    clean[atom] = coeff
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, *_):
        raise AttributeError("CanonicalExpr is immutable")

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(n: int) -> "CanonicalExpr":
        return CanonicalExpr(n, {})

    @staticmethod
    def const(n: int, value) -> "CanonicalExpr":
        c = Fraction(value)
        if c == 0:
            return CanonicalExpr.zero(n)
        return CanonicalExpr(n, {Atom((0,) * n): c})

    @staticmethod
    def coordinate(n: int, i: int) -> "CanonicalExpr":
        """The coordinate function x_i, with i in 1..n."""
        if not 1 <= i <= n:
            raise IndexOutOfRangeError(f"coordinate index {i} outside 1..{n}")
        mono = tuple(1 if j == i - 1 else 0 for j in range(n))
        return CanonicalExpr(n, {Atom(mono): _ONE})

    @staticmethod
    def trig_atom(n: int, kind: str, arg: AffineForm) -> "CanonicalExpr":
        sign, trig = _normalize_trig(kind, arg)
        if sign == 0:
            return CanonicalExpr.zero(n)
        return CanonicalExpr(n, {Atom((0,) * n, trig, None): sign})

    @staticmethod
    def exp_atom(n: int, arg: AffineForm) -> "CanonicalExpr":
        if arg.is_zero():
            return CanonicalExpr.const(n, 1)
        return CanonicalExpr(n, {Atom((0,) * n, None, arg): _ONE})

    # -- predicates ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(a.is_one() for a in self.terms)

    def constant_part(self) -> Fraction:
        """Coefficient of the constant atom (0 if absent)."""
        return self.terms.get(Atom((0,) * self.n), _ZERO)

    def drop_constant(self) -> "CanonicalExpr":
        one = Atom((0,) * self.n)
        if one not in self.terms:
            return self
        rest = dict(self.terms)
        del rest[one]
        return CanonicalExpr(self.n, rest)

    def as_affine(self) -> Optional[AffineForm]:
        """Affine form equal to this expression, or None if not affine."""
        linear = [_ZERO] * self.n
        offset = _ZERO
        for atom, coeff in self.terms.items():
            if atom.trig is not None or atom.expo is not None:
                return None
            deg = atom.degree()
            if deg == 0:
                offset = coeff
            elif deg == 1:
                linear[atom.monomial.index(1)] = coeff
            else:
                return None
        return AffineForm(tuple(linear), offset)

    # -- arithmetic -----------------------------------------------------

    def _check_dim(self, other: "CanonicalExpr"):
        if self.n != other.n:
            raise DimensionMismatchError(
                f"ambient dimensions differ: {self.n} vs {other.n}"
            )

    def __add__(self, other: "CanonicalExpr") -> "CanonicalExpr":
        self._check_dim(other)
        terms = dict(self.terms)
        for atom, coeff in other.terms.items():
            c = terms.get(atom, _ZERO) + coeff
            if c == 0:
                terms.pop(atom, None)
            else:
                terms[atom] = c
        return CanonicalExpr(self.n, terms)

    def __neg__(self) -> "CanonicalExpr":
        return CanonicalExpr(self.n, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other: "CanonicalExpr") -> "CanonicalExpr":
        return self + (-other)

    def scale(self, factor) -> "CanonicalExpr":
        c = Fraction(factor)
        if c == 0:
            return CanonicalExpr.zero(self.n)
        return CanonicalExpr(self.n, {a: c * v for a, v in self.terms.items()})

    def __mul__(self, other: "CanonicalExpr") -> "CanonicalExpr":
        self._check_dim(other)
        terms: dict[Atom, Fraction] = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                base = c1 * c2
                for piece, atom in _mul_atoms(a1, a2):
                    c = base * piece
                    prev = terms.get(atom, _ZERO) + c
                    if prev == 0:
                        terms.pop(atom, None)
                    else:
                        terms[atom] = prev
        return CanonicalExpr(self.n, terms)

    def power(self, k: int) -> "CanonicalExpr":
        if k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = CanonicalExpr.const(self.n, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    # -- calculus --------------------------------------------------------

    def partial(self, i: int) -> "CanonicalExpr":
        """Exact partial derivative with respect to x_i (1-based)."""
        if not 1 <= i <= self.n:
            raise IndexOutOfRangeError(f"index {i} outside 1..{self.n}")
        j = i - 1
        terms: dict[Atom, Fraction] = {}

        def accumulate(atom: Atom, coeff: Fraction):
            if coeff == 0:
                return
            prev = terms.get(atom, _ZERO) + coeff
            if prev == 0:
                terms.pop(atom, None)
            else:
                terms[atom] = prev

        for atom, coeff in self.terms.items():
            e = atom.monomial[j]
            if e:
                mono = list(atom.monomial)
                mono[j] = e - 1
                accumulate(Atom(tuple(mono), atom.trig, atom.expo), coeff * e)
            if atom.trig is not None:
                kind, arg = atom.trig
                a_j = arg.linear[j]
                if a_j:
                    if kind == SIN:
                        accumulate(Atom(atom.monomial, (COS, arg), atom.expo), coeff * a_j)
                    else:
                        accumulate(Atom(atom.monomial, (SIN, arg), atom.expo), -coeff * a_j)
            if atom.expo is not None:
                b_j = atom.expo.linear[j]
                if b_j:
                    accumulate(atom, coeff * b_j)
        return CanonicalExpr(self.n, terms)

    def eval(self, x) -> float:
        """Floating-point value at the point x (length n)."""
        acc = 0.0
        for atom, coeff in self.terms.items():
            acc += float(coeff) * atom.value_at(x)
        return acc

    # -- comparison / printing -------------------------------------------

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CanonicalExpr)
            and self.n == other.n
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def sorted_terms(self) -> list[tuple[Atom, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: kv[0].sort_key())

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        out = ""
        for atom, coeff in self.sorted_terms():
            mag = abs(coeff)
            if atom.is_one():
                piece = str(mag)
            elif mag == 1:
                piece = str(atom)
            else:
                piece = f"{mag}*{atom}"
            if not out:
                out = piece if coeff > 0 else f"-{piece}"
            else:
                out += f" + {piece}" if coeff > 0 else f" - {piece}"
        return out

    def __repr__(self) -> str:
        return f"CanonicalExpr({self.n}, {self})"


@dataclass(frozen=True)
class VectorField:
    """Vector field on R^n with components in the closed expression class."""

    components: tuple[CanonicalExpr, ...]

    def __post_init__(self):
        dims = {c.n for c in self.components}
        if len(dims) > 1:
            raise DimensionMismatchError(f"mixed component dimensions: {sorted(dims)}")

    @property
    def n(self) -> int:
        return len(self.components)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def eval(self, x) -> list[float]:
        return [c.eval(x) for c in self.components]

    @staticmethod
    def from_exprs(components: Iterable[CanonicalExpr]) -> "VectorField":
        return VectorField(tuple(components))


# -- module-level operation aliases (functional style) ---------------------


def add(a: CanonicalExpr, b: CanonicalExpr) -> CanonicalExpr:
    return a + b


def mul(a: CanonicalExpr, b: CanonicalExpr) -> CanonicalExpr:
    return a * b


def scale(factor, e: CanonicalExpr) -> CanonicalExpr:
    return e.scale(factor)


def partial(e: CanonicalExpr, i: int) -> CanonicalExpr:
    return e.partial(i)


def evaluate(e: CanonicalExpr, x) -> float:
    return e.eval(x)


def lie_derivative(gamma: CanonicalExpr, tau: VectorField) -> CanonicalExpr:
    """Derivative of gamma along tau:  sum_l tau_l * d(gamma)/dx_l."""
    if gamma.n != tau.n:
        raise DimensionMismatchError(
            f"ambient dimensions differ: {gamma.n} vs {tau.n}"
        )
    acc = CanonicalExpr.zero(gamma.n)
    for l in range(1, gamma.n + 1):
        comp = tau.components[l - 1]
        if comp.is_zero():
            continue
        d = gamma.partial(l)
        if not d.is_zero():
            acc = acc + comp * d
    return acc
