"""Reachable-set machinery on the lifted bilinear form.

Under the commutation hypothesis  [ad_A^k B_i, B_j] = 0  the matrix
semigroup generated by piecewise-constant controls factors as
e^{AT} e^H with H in the span of the adjoint chain, so reachable states of
the original system are projections  P(e^{AT} e^H Psi(x0)).  When the
hypothesis fails the same sampling still runs but is labeled heuristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._kernels import expm_core, expm_many
from .errors import EmptySpanError, NonSquareError
from .expr import CanonicalExpr, VectorField
from .realization import BilinearRealization
from .systems import NonlinearSystem

RANK_TOL_FACTOR = 1e-9


@dataclass(frozen=True)
class AdjointSpan:
    """Chain generators ad_A^k B_i, an independent subset, and the verdict."""

    generators: tuple[np.ndarray, ...]
    basis: tuple[np.ndarray, ...]
    hypothesis_holds: bool
    tol: float

    @property
    def dim(self) -> int:
        return len(self.basis)


def _rank_tol(mats, scale: float = 1.0) -> float:
    peak = max((float(np.max(np.abs(m))) for m in mats if m.size), default=0.0)
    return RANK_TOL_FACTOR * scale * max(peak, 1e-300)


def adjoint_chain(a_mat, b_list, r: Optional[int] = None, tol_scale: float = 1.0) -> AdjointSpan:
    """Build span{ad_A^k B_i : k = 0 .. r^2-1} with a greedy pivot basis."""
    a_mat = np.asarray(a_mat, dtype=float)
    if a_mat.ndim != 2 or a_mat.shape[0] != a_mat.shape[1]:
        raise NonSquareError(f"A must be square, got {a_mat.shape}")
    r = r if r is not None else a_mat.shape[0]
    generators = []
    for b in b_list:
        b = np.asarray(b, dtype=float)
        if b.shape != a_mat.shape:
            raise NonSquareError(f"B shape {b.shape} does not match A {a_mat.shape}")
        g = b
        for _ in range(r * r):
            generators.append(g)
            g = a_mat @ g - g @ a_mat
    tol = _rank_tol(generators, tol_scale)
    basis = []
    ortho = []
    for g in generators:
        vec = g.ravel().astype(float)
        resid = vec.copy()
        for q in ortho:
            resid = resid - (q @ resid) * q
        if np.max(np.abs(resid)) > tol and len(basis) < r * r:
            basis.append(g)
            ortho.append(resid / np.linalg.norm(resid))
    span = AdjointSpan(
        generators=tuple(generators),
        basis=tuple(basis),
        hypothesis_holds=_commutation_holds(generators, b_list, tol),
        tol=tol,
    )
    return span


def _commutation_holds(generators, b_list, tol: float) -> bool:
    for g in generators:
        for b in b_list:
            b = np.asarray(b, dtype=float)
            if np.max(np.abs(g @ b - b @ g), initial=0.0) > tol:
                return False
    return True


def commutation_check(span: AdjointSpan, b_list) -> bool:
    """True when every chain generator commutes with every B_j."""
    return _commutation_holds(span.generators, b_list, span.tol)


@dataclass(frozen=True)
class ReachSampleSet:
    horizon: float
    coeffs: np.ndarray   # (N, dim h)
    points: np.ndarray   # (N, n) reached original states
    heuristic: bool

    @property
    def count(self) -> int:
        return len(self.points)


def flow_adjoint_span(real: BilinearRealization, tol_scale: float = 1.0) -> AdjointSpan:
    """Adjoint span of the realization's homogeneous flow matrices."""
    a_flow, b_flow, _ = real.flow_matrices()
    return adjoint_chain(a_flow, b_flow, r=a_flow.shape[0], tol_scale=tol_scale)


def reach_sample(
    real: BilinearRealization,
    span: AdjointSpan,
    x0: Sequence[float],
    horizon: float,
    coeff_box: float,
    count: int,
    seed: int = 42,
) -> ReachSampleSet:
    """Sample the semigroup image  P(e^{AT} e^H Psi(x0)),  H in the span.

    Coefficients are drawn uniformly from [-coeff_box, coeff_box]^dim by a
    deterministic generator.  When the commutation hypothesis fails the
    output is an inner heuristic approximation, flagged as such.
    """
    a_flow, b_flow, _ = real.flow_matrices()
    if span.dim == 0:
        if any(np.any(np.asarray(b) != 0) for b in b_flow):
            raise EmptySpanError("adjoint span is empty but control matrices are not")
        coeffs = np.zeros((count, 0))
        hs = np.zeros((count,) + a_flow.shape)
    else:
        rng = np.random.default_rng(seed)
        coeffs = rng.uniform(-coeff_box, coeff_box, size=(count, span.dim))
        hs = np.tensordot(coeffs, np.array(span.basis), axes=(1, 0))
    e_at = expm_core(horizon * a_flow)
    z0 = real.lift_flow(x0)
    proj = real.proj_matrix()
    if real.offsets_active:
        proj = np.hstack([proj, np.zeros((real.n, 1))])
    carrier = proj @ e_at
    if count:
        flows = expm_many(hs)
        points = (carrier @ (flows @ z0).T).T
    else:
        points = np.zeros((0, real.n))
    return ReachSampleSet(
        horizon=horizon,
        coeffs=coeffs,
        points=points,
        heuristic=not span.hypothesis_holds,
    )


def semigroup_log(w: np.ndarray, terms: int = 60) -> np.ndarray:
    """Principal log of a flow factor by the Mercator series.

    Converges for spectral radius of (W - I) below one and terminates for
    unipotent W; callers should re-exponentiate to validate when W is far
    from the identity.
    """
    d = w.shape[0]
    delta = np.asarray(w, dtype=float) - np.eye(d)
    acc = np.zeros_like(delta)
    power = np.eye(d)
    for k in range(1, terms + 1):
        power = power @ delta
        if not np.any(power):
            break
        acc = acc + ((-1.0) ** (k + 1) / k) * power
    return acc


def constant_flow_log(real: BilinearRealization, u: Sequence[float],
                      horizon: float) -> tuple[np.ndarray, float]:
    """H with  e^{AT} e^H  equal to the constant-control flow, plus defect.

    Peels e^{AT} off  exp(T (A + sum u_i B_i))  and takes the matrix log of
    the remaining factor.  The defect is the reconstruction error
    || e^{AT} e^H - flow ||_inf; small defects certify the factorization.
    """
    a_flow, b_flow, _ = real.flow_matrices()
    gen = a_flow.copy()
    for ui, bi in zip(u, b_flow):
        if ui:
            gen = gen + ui * bi
    flow = expm_core(horizon * gen)
    w = expm_core(-horizon * a_flow) @ flow
    h_mat = semigroup_log(w)
    defect = float(
        np.max(np.abs(expm_core(horizon * a_flow) @ expm_core(h_mat) - flow))
    )
    return h_mat, defect


def coeffs_in_span(span: AdjointSpan, h_mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares coordinates of a matrix in the span basis, with residual."""
    if span.dim == 0:
        return np.zeros(0), float(np.max(np.abs(h_mat), initial=0.0))
    basis = np.array([b.ravel() for b in span.basis]).T
    sol, *_ = np.linalg.lstsq(basis, h_mat.ravel(), rcond=None)
    resid = float(np.max(np.abs(basis @ sol - h_mat.ravel())))
    return sol, resid


def constant_endpoint_map(
    real: BilinearRealization, controls: np.ndarray, x0, horizon: float
) -> np.ndarray:
    """Original-space endpoints under constant controls, via one flow each.

    ``controls`` is (N, m); the whole batch goes through one stacked matrix
    exponential.
    """
    a_flow, b_flow, _ = real.flow_matrices()
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    gens = np.broadcast_to(a_flow, (controls.shape[0],) + a_flow.shape).copy()
    for i, bi in enumerate(b_flow):
        gens += controls[:, i, None, None] * bi
    flows = expm_many(horizon * gens)
    z0 = real.lift_flow(x0)
    proj = real.proj_matrix()
    if real.offsets_active:
        proj = np.hstack([proj, np.zeros((real.n, 1))])
    return (proj @ (flows @ z0).T).T


def reconstruct_constant_controls(
    real: BilinearRealization,
    targets: np.ndarray,
    x0,
    horizon: float,
    iters: int = 12,
    fd_step: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """Constant controls whose endpoints hit the targets (batched Newton).

    Requires m = n so the endpoint map is square.  Returns the controls and
    the endpoint residual per target (inf-norm, through the lifted flow).
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    count, n = targets.shape
    if real.m != n:
        raise ValueError("reconstruction needs as many controls as states")
    cs = np.zeros((count, real.m))
    for _ in range(iters):
        base = constant_endpoint_map(real, cs, x0, horizon)
        resid = targets - base
        if np.max(np.abs(resid)) < 1e-12:
            break
        jac = np.empty((count, n, real.m))
        for i in range(real.m):
            probe = cs.copy()
            probe[:, i] += fd_step
            jac[:, :, i] = (constant_endpoint_map(real, probe, x0, horizon) - base) / fd_step
        try:
            step = np.linalg.solve(jac, resid[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(
                jac.reshape(-1, real.m), resid.reshape(-1), rcond=None
            )
            step = np.broadcast_to(step, cs.shape)
        cs = cs + step
    final = constant_endpoint_map(real, cs, x0, horizon)
    return cs, np.max(np.abs(final - targets), axis=1)


def span_is_bracket_closed(span: AdjointSpan) -> bool:
    """True when brackets of basis members stay inside the span.

    A bracket-closed span keeps the factorization  flow = e^{AT} e^H  exact
    for nilpotent chains even when the strict commutation hypothesis fails.
    """
    for i, g1 in enumerate(span.basis):
        for g2 in span.basis[i + 1:]:
            _, resid = coeffs_in_span(span, g1 @ g2 - g2 @ g1)
            if resid > span.tol * 10:
                return False
    return True


# ---------------------------------------------------------------------------
# Lie-algebra rank computations
# ---------------------------------------------------------------------------


def vf_bracket(tau1: VectorField, tau2: VectorField) -> VectorField:
    """Jacobi-Lie bracket  (d tau2) tau1 - (d tau1) tau2,  exact."""
    if tau1.n != tau2.n:
        raise NonSquareError(f"field dimensions differ: {tau1.n} vs {tau2.n}")
    n = tau1.n
    comps = []
    for j in range(n):
        acc = CanonicalExpr.zero(n)
        for l in range(1, n + 1):
            c1 = tau1.components[l - 1]
            c2 = tau2.components[l - 1]
            if not c1.is_zero():
                d2 = tau2.components[j].partial(l)
                if not d2.is_zero():
                    acc = acc + c1 * d2
            if not c2.is_zero():
                d1 = tau1.components[j].partial(l)
                if not d1.is_zero():
                    acc = acc - c2 * d1
        comps.append(acc)
    return VectorField(tuple(comps))


def _numeric_rank(vectors: list[np.ndarray], tol_scale: float = 1.0) -> int:
    if not vectors:
        return 0
    mat = np.array(vectors)
    peak = float(np.max(np.abs(mat), initial=0.0))
    if peak == 0.0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv > RANK_TOL_FACTOR * tol_scale * peak))


def lie_rank_nonlinear(system: NonlinearSystem, x, depth: int,
                       tol_scale: float = 1.0) -> int:
    """Rank at x of the algebra generated by the drift and control fields.

    Left-normed brackets up to the given nesting depth; stops early once the
    rank reaches n.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    n = system.n
    fields = [tau for tau in system.fields() if not tau.is_zero()]
    collected = list(fields)
    layer = list(fields)
    vectors = [np.array(tau.eval(x)) for tau in collected]
    rank = _numeric_rank(vectors, tol_scale)
    for _ in range(2, depth + 1):
        if rank >= n:
            break
        new_layer = []
        for tau in fields:
            for w in layer:
                br = vf_bracket(tau, w)
                if not br.is_zero():
                    new_layer.append(br)
        if not new_layer:
            break
        layer = new_layer
        collected.extend(new_layer)
        vectors.extend(np.array(b.eval(x)) for b in new_layer)
        rank = _numeric_rank(vectors, tol_scale)
    return rank


def lie_rank_bilinear(real: BilinearRealization, z, depth: int,
                      tol_scale: float = 1.0) -> int:
    """Rank at z of the algebra of the linear fields Az, B_i z.

    Brackets of linear fields are matrix commutators, so the whole
    computation stays in matrix arithmetic.  ``z`` may be given on the
    lifted r-state; offset realizations extend it with the pinned 1.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    a_flow, b_flow, augmented = real.flow_matrices()
    d = a_flow.shape[0]
    z = np.asarray(z, dtype=float)
    if augmented and z.shape[0] == real.r:
        z = np.concatenate([z, [1.0]])
    if z.shape[0] != d:
        raise NonSquareError(f"state length {z.shape[0]} does not match flow size {d}")
    gens = [m for m in [a_flow, *b_flow] if np.any(m != 0)]
    collected = list(gens)
    layer = list(gens)
    for _ in range(2, depth + 1):
        if _numeric_rank([m @ z for m in collected], tol_scale) >= d:
            break
        new_layer = []
        for g in gens:
            for w in layer:
                c = w @ g - g @ w
                if np.any(c != 0):
                    new_layer.append(c)
        if not new_layer:
            break
        layer = new_layer
        collected.extend(new_layer)
    return _numeric_rank([m @ z for m in collected], tol_scale)


def dim_equivalence(
    system: NonlinearSystem,
    real: BilinearRealization,
    sample_points: Sequence[Sequence[float]],
    depth: Optional[int] = None,
    tol_scale: float = 1.0,
) -> bool:
    """True when nonlinear and lifted Lie ranks agree at every sample point."""
    depth = depth if depth is not None else real.r
    for x in sample_points:
        rank_x = lie_rank_nonlinear(system, x, depth, tol_scale)
        rank_z = lie_rank_bilinear(real, real.lift(x), depth, tol_scale)
        if rank_x != rank_z:
            return False
    return True
