"""Lie-derivative closure of a seed function space.

The iteration grows a space of smooth functions by repeatedly adding the
Lie derivatives of its members along the system's drift and control fields,

    G_k = G_{k-1} + sum_tau  L_tau G_{k-1},

until the dimension stops growing (the chain stabilizes) or a cap fires.
A stabilized chain certifies that the system admits an exact bilinear
representation over the closed space; a fired cap is reported as such and
never interpreted as a proof of non-existence.

Constants produced by Lie derivatives get one of two treatments:

* ``offset`` (default): the chain is computed modulo constants and the
  constant parts later become offset vectors of an inhomogeneous bilinear
  form.
* ``augment``: the constant function 1 is admitted into the space as an
  ordinary member, yielding a homogeneous bilinear form with one auxiliary
  state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import DimensionMismatchError, EmptySeedError
from .expr import CanonicalExpr, VectorField, lie_derivative
from .spaces import ExactSpan, FunctionSpace, space_reduce
from .systems import NonlinearSystem

OFFSET = "offset"
AUGMENT = "augment"


class ClosureStatus(enum.Enum):
    STABILIZED = "stabilized"
    DIM_CAP_EXCEEDED = "dim-cap-exceeded"
    ITER_CAP_EXCEEDED = "iter-cap-exceeded"


@dataclass(frozen=True)
class ClosureConfig:
    """Seed and caps for the closure iteration.

    ``gamma0 = None`` seeds with the coordinate functions x1..xn.  The caps
    bound work on diverging chains; hitting one is reported, not proof that
    no finite closure exists.
    """

    gamma0: Optional[Sequence[CanonicalExpr]] = None
    max_dim: int = 200
    max_iter: int = 50
    constant_mode: str = OFFSET

    def __post_init__(self):
        if self.constant_mode not in (OFFSET, AUGMENT):
            raise ValueError(f"unknown constant mode {self.constant_mode!r}")
        if self.max_dim < 1 or self.max_iter < 1:
            raise ValueError("caps must be positive")

    def seeds(self, n: int) -> list[CanonicalExpr]:
        if self.gamma0 is None:
            return [CanonicalExpr.coordinate(n, i) for i in range(1, n + 1)]
        return list(self.gamma0)


@dataclass(frozen=True)
class ClosureOutcome:
    status: ClosureStatus
    chain_dims: tuple[int, ...]
    k_star: Optional[int]
    gamma_star: FunctionSpace
    basis: tuple[CanonicalExpr, ...]  # seed-first ordered basis for the lifting map
    constant_mode: str
    constant_seen: bool

    @property
    def stabilized(self) -> bool:
        return self.status is ClosureStatus.STABILIZED


def lie_derivation_space(space: FunctionSpace, tau: VectorField) -> FunctionSpace:
    """Span of the Lie derivatives of all basis members along tau."""
    if space.n != tau.n:
        raise DimensionMismatchError(f"ambient dimensions differ: {space.n} vs {tau.n}")
    return space_reduce([lie_derivative(b, tau) for b in space.basis], n=space.n)


def closure_step(prev: FunctionSpace, fields: Sequence[VectorField]) -> FunctionSpace:
    """One iteration:  prev + sum_tau L_tau prev  as a plain span."""
    if not fields:
        raise ValueError("need at least one vector field")
    gens = list(prev.basis)
    for tau in fields:
        if prev.n != tau.n:
            raise DimensionMismatchError(
                f"ambient dimensions differ: {prev.n} vs {tau.n}"
            )
        gens.extend(lie_derivative(b, tau) for b in prev.basis)
    return space_reduce(gens, n=prev.n)


def _leading_normalize(e: CanonicalExpr) -> CanonicalExpr:
    lead_atom = min(e.terms, key=lambda a: a.sort_key())
    return e.scale(1 / e.terms[lead_atom])


def closure_run(system: NonlinearSystem, config: Optional[ClosureConfig] = None) -> ClosureOutcome:
    """Run the closure iteration on a system until it stabilizes or caps out.

    The ordered basis collects seed generators first (dependent seeds are
    dropped), then normalized remainders of new Lie derivatives in order of
    first appearance, so reruns produce identical bases and matrices.
    """
    config = config or ClosureConfig()
    n = system.n
    seeds = config.seeds(n)
    if not seeds:
        raise EmptySeedError("closure iteration needs at least one seed function")
    if config.max_dim < n:
        raise ValueError(f"max_dim {config.max_dim} below state dimension {n}")
    offset_mode = config.constant_mode == OFFSET
    one = CanonicalExpr.const(n, 1)

    span = ExactSpan(n)
    basis: list[CanonicalExpr] = []
    constant_seen = False

    for seed in seeds:
        if seed.n != n:
            raise DimensionMismatchError(
                f"seed dimension {seed.n} differs from system dimension {n}"
            )
        if not seed.is_zero() and span.add_gen(seed):
            basis.append(seed)
    if not basis:
        raise EmptySeedError("all seed functions reduce to zero")

    chain = [span.dim]
    fields = [tau for tau in system.fields() if not tau.is_zero()]
    frontier = list(basis)
    status = ClosureStatus.ITER_CAP_EXCEEDED
    k_star = None

    for k in range(1, config.max_iter + 1):
        prev_dim = span.dim
        admitted: list[CanonicalExpr] = []
        for tau in fields:
            for gamma in frontier:
                deriv = lie_derivative(gamma, tau)
                if deriv.is_zero():
                    continue
                if deriv.constant_part() != 0:
                    constant_seen = True
                    if not offset_mode and span.add_gen(one):
                        basis.append(one)
                        admitted.append(one)
                    deriv = deriv.drop_constant() if offset_mode else deriv
                    if deriv.is_zero():
                        continue
                remainder, _ = span.reduce(deriv)
                if offset_mode:
                    remainder = remainder.drop_constant()
                if remainder.is_zero():
                    continue
                new_func = _leading_normalize(remainder)
                if span.add_gen(new_func):
                    basis.append(new_func)
                    admitted.append(new_func)
        chain.append(span.dim)
        if span.dim == prev_dim:
            status = ClosureStatus.STABILIZED
            k_star = k - 1
            break
        if span.dim > config.max_dim:
            status = ClosureStatus.DIM_CAP_EXCEEDED
            break
        frontier = admitted

    return ClosureOutcome(
        status=status,
        chain_dims=tuple(chain),
        k_star=k_star,
        gamma_star=space_reduce(basis, n=n),
        basis=tuple(basis),
        constant_mode=config.constant_mode,
        constant_seen=constant_seen,
    )
