"""Bilinear realization extracted from a stabilized closure outcome.

The lifted state is z = Psi(x) with Psi the ordered basis of the closed
space.  Row j of A solves  L_f psi_j = sum_k A[j,k] psi_k  (+ constant for
the offset form), and likewise rows of each B_i along the control fields.
All entries are exact rationals; float copies are kept for numerics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .closure import AUGMENT, OFFSET, ClosureOutcome
from .errors import (
    MissingProjectionError,
    NotInvariantError,
    NotStabilizedError,
)
from .expr import CanonicalExpr, lie_derivative
from .spaces import ExactSpan
from .systems import NonlinearSystem

_ZERO = Fraction(0)


class EmbeddingVerdict(enum.Enum):
    EMBEDDING = "embedding"
    NOT_VERIFIED = "not-verified"


@dataclass(frozen=True)
class EmbeddingReport:
    is_graph_over_coordinates: bool
    jacobian_rank_samples: tuple[tuple[tuple[float, ...], int], ...]
    verdict: EmbeddingVerdict


class BilinearRealization:
    """Exact matrices (A, B_i, D_0, D_i) over an ordered lifting basis."""

    def __init__(
        self,
        psi: Sequence[CanonicalExpr],
        a_exact: Sequence[Sequence[Fraction]],
        b_exact: Sequence[Sequence[Sequence[Fraction]]],
        d0_exact: Sequence[Fraction],
        d_exact: Sequence[Sequence[Fraction]],
        proj_rows_exact: Sequence[Optional[Sequence[Fraction]]],
        constant_mode: str = OFFSET,
        chain_dims: tuple[int, ...] = (),
        k_star: Optional[int] = None,
        name: str = "",
    ):
        self.psi = tuple(psi)
        self.r = len(self.psi)
        self.n = len(proj_rows_exact)
        self.m = len(b_exact)
        self.constant_mode = constant_mode
        self.chain_dims = tuple(chain_dims)
        self.k_star = k_star
        self.name = name
        self.a_exact = tuple(tuple(row) for row in a_exact)
        self.b_exact = tuple(tuple(tuple(row) for row in bi) for bi in b_exact)
        self.d0_exact = tuple(d0_exact)
        self.d_exact = tuple(tuple(di) for di in d_exact)
        self.proj_rows_exact = tuple(
            tuple(row) if row is not None else None for row in proj_rows_exact
        )
        self.A = np.array(self.a_exact, dtype=float).reshape(self.r, self.r)
        self.B = [np.array(bi, dtype=float).reshape(self.r, self.r) for bi in self.b_exact]
        self.D0 = np.array([float(v) for v in self.d0_exact])
        self.D = [np.array([float(v) for v in di]) for di in self.d_exact]
        self._psi_partials: Optional[list[list[CanonicalExpr]]] = None

    # -- lifted state ----------------------------------------------------

    def lift(self, x) -> np.ndarray:
        """z_j = psi_j(x)."""
        return np.array([gamma.eval(x) for gamma in self.psi])

    def project(self, z) -> np.ndarray:
        """Recover x from z using the exact projection rows."""
        missing = [i + 1 for i, row in enumerate(self.proj_rows_exact) if row is None]
        if missing:
            raise MissingProjectionError(
                f"coordinates x{missing} are not in the lifted span"
            )
        return self.proj_matrix() @ np.asarray(z, dtype=float)

    def proj_matrix(self) -> np.ndarray:
        rows = []
        for row in self.proj_rows_exact:
            if row is None:
                raise MissingProjectionError("projection row missing")
            rows.append([float(v) for v in row])
        return np.array(rows).reshape(self.n, self.r)

    def psi_jacobian(self, x) -> np.ndarray:
        """Jacobian of the lifting map at x, from symbolic partials."""
        if self._psi_partials is None:
            self._psi_partials = [
                [gamma.partial(l) for l in range(1, self.n + 1)] for gamma in self.psi
            ]
        return np.array(
            [[d.eval(x) for d in row] for row in self._psi_partials]
        ).reshape(self.r, self.n)

    # -- homogeneous flow form --------------------------------------------

    @property
    def offsets_active(self) -> bool:
        return self.constant_mode == OFFSET

    def flow_matrices(self) -> tuple[np.ndarray, list[np.ndarray], bool]:
        """Matrices generating the lifted flow.

        In offset mode the inhomogeneous form is folded into one extra
        homogeneous coordinate pinned to 1, so a single matrix-exponential
        path serves both constant modes.  Returns (A_flow, B_flow, augmented).
        """
        if not self.offsets_active:
            return self.A, list(self.B), False
        d = self.r + 1
        a_flow = np.zeros((d, d))
        a_flow[: self.r, : self.r] = self.A
        a_flow[: self.r, self.r] = self.D0
        b_flow = []
        for bi, di in zip(self.B, self.D):
            m = np.zeros((d, d))
            m[: self.r, : self.r] = bi
            m[: self.r, self.r] = di
            b_flow.append(m)
        return a_flow, b_flow, True

    def lift_flow(self, x) -> np.ndarray:
        z = self.lift(x)
        if self.offsets_active:
            return np.concatenate([z, [1.0]])
        return z

    def strip_flow(self, z_flow) -> np.ndarray:
        return np.asarray(z_flow)[..., : self.r]


def extract_realization(
    system: NonlinearSystem, outcome: ClosureOutcome, name: str = ""
) -> BilinearRealization:
    """Solve the exact matrix rows of the lifted dynamics over the basis."""
    if not outcome.stabilized:
        raise NotStabilizedError(f"closure ended with {outcome.status.value}")
    basis = list(outcome.basis)
    n = system.n
    r = len(basis)
    offset_mode = outcome.constant_mode == OFFSET
    one = CanonicalExpr.const(n, 1)

    span = ExactSpan(n)
    for gamma in basis:
        if not span.add_gen(gamma):
            raise NotInvariantError("ordered basis is not linearly independent")
    span_ext = None
    if offset_mode:
        span_ext = ExactSpan(n)
        for gamma in basis:
            span_ext.add_gen(gamma)
        has_one = span_ext.add_gen(one)

    def solve_row(expr: CanonicalExpr, what: str) -> tuple[list[Fraction], Fraction]:
        coeffs = span.solve_in_gens(expr)
        if coeffs is not None:
            return coeffs, _ZERO
        if offset_mode and span_ext is not None and has_one:
            coeffs = span_ext.solve_in_gens(expr)
            if coeffs is not None:
                return coeffs[:r], coeffs[r]
        raise NotInvariantError(f"{what} left the stabilized space: {expr}")

    a_exact = []
    d0_exact = []
    for gamma in basis:
        row, const = solve_row(lie_derivative(gamma, system.f), "drift derivative")
        a_exact.append(row)
        d0_exact.append(const)
    b_exact = []
    d_exact = []
    for i, gi in enumerate(system.g, start=1):
        bi = []
        di = []
        for gamma in basis:
            row, const = solve_row(lie_derivative(gamma, gi), f"control-{i} derivative")
            bi.append(row)
            di.append(const)
        b_exact.append(bi)
        d_exact.append(di)

    proj_rows = [
        span.solve_in_gens(CanonicalExpr.coordinate(n, i)) for i in range(1, n + 1)
    ]
    return BilinearRealization(
        psi=basis,
        a_exact=a_exact,
        b_exact=b_exact,
        d0_exact=d0_exact,
        d_exact=d_exact,
        proj_rows_exact=proj_rows,
        constant_mode=outcome.constant_mode,
        chain_dims=outcome.chain_dims,
        k_star=outcome.k_star,
        name=name or system.name,
    )


def verify_embedding(
    real: BilinearRealization,
    n: Optional[int] = None,
    sample_points: Optional[Sequence[Sequence[float]]] = None,
    seed: int = 42,
    num_points: int = 25,
) -> EmbeddingReport:
    """Check that the lifting map is verifiably an embedding.

    The graph criterion is exact: when every coordinate function lies in the
    lifted span, the map is a graph over the original coordinates and hence
    an embedding.  Otherwise the Jacobian rank is sampled numerically; full
    rank everywhere sampled is reported as an embedding, anything less as
    not verified (never as a rejection).
    """
    n = n if n is not None else real.n
    is_graph = all(row is not None for row in real.proj_rows_exact)
    if sample_points is None:
        rng = np.random.default_rng(seed)
        sample_points = rng.uniform(-2.0, 2.0, size=(num_points, n))
    samples = []
    all_full = True
    for point in sample_points:
        jac = real.psi_jacobian(point)
        rank = int(np.linalg.matrix_rank(jac))
        samples.append((tuple(float(v) for v in point), rank))
        if rank != n:
            all_full = False
    verdict = (
        EmbeddingVerdict.EMBEDDING
        if is_graph or (samples and all_full)
        else EmbeddingVerdict.NOT_VERIFIED
    )
    return EmbeddingReport(
        is_graph_over_coordinates=is_graph,
        jacobian_rank_samples=tuple(samples),
        verdict=verdict,
    )


def lift(real: BilinearRealization, x) -> np.ndarray:
    return real.lift(x)


def project(real: BilinearRealization, z) -> np.ndarray:
    return real.project(z)


def pushforward_residual(
    system: NonlinearSystem, real: BilinearRealization, x, u
) -> float:
    """Defect of the pushforward relation at one state/control pair.

    Computes || dPsi(x) (f + sum u_i g_i)(x) - (A z + D0 + sum u_i (B_i z + D_i)) ||_inf
    with z = Psi(x); exact realizations give values at rounding level.
    """
    rhs = np.array(system.rhs(x, u))
    lhs = real.psi_jacobian(x) @ rhs
    z = real.lift(x)
    bilinear = real.A @ z + real.D0
    for ui, bi, di in zip(u, real.B, real.D):
        bilinear = bilinear + ui * (bi @ z + di)
    return float(np.max(np.abs(lhs - bilinear))) if real.r else 0.0
