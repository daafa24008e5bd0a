"""Feedback stabilization and optimal steering on the lifted form.

Stabilization uses the quadratic-Lyapunov feedback  u = -K S(z)' P z  with
S(z) = [B_1 z + D_1, ..., B_m z + D_m], together with the eigenvalue bound
that sizes K.  Steering minimizes a terminal cost through the composed
segment flows by multi-start finite-difference gradient descent, and a
forward-backward sweep handles the quadratic-cost formulation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._kernels import closed_loop_rk4, expm_many
from .errors import (
    NonFiniteStateError,
    NotStabilizableError,
    SingularRError,
    SingularSylvesterError,
    SweepDivergedError,
)
from .realization import BilinearRealization
from .simulate import ControlSchedule, Trajectory, ORIGINAL
from .systems import NonlinearSystem
from .tables import compile_exprs, compile_system

_EIG_FLOOR = 1e-12


def _check_spd(mat: np.ndarray, label: str):
    sym = 0.5 * (mat + mat.T)
    if np.min(np.linalg.eigvalsh(sym)) <= _EIG_FLOOR:
        raise ValueError(f"{label} must be symmetric positive definite")


@dataclass(frozen=True)
class StabilizerConfig:
    p_mat: np.ndarray
    k_gain: np.ndarray
    epsilon: float = 1.0

    def __post_init__(self):
        _check_spd(self.p_mat, "P")
        _check_spd(self.k_gain, "K")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def solve_lyapunov(a_mat, qd) -> np.ndarray:
    """Solve  A' P + P A = -Qd  by the Kronecker-vectorized linear system."""
    a_mat = np.asarray(a_mat, dtype=float)
    qd = np.asarray(qd, dtype=float)
    r = a_mat.shape[0]
    eigs = np.linalg.eigvals(a_mat)
    if np.max(eigs.real) >= 0:
        raise NotStabilizableError(
            "drift matrix is not Hurwitz; supply P directly"
        )
    lhs = np.kron(np.eye(r), a_mat.T) + np.kron(a_mat.T, np.eye(r))
    try:
        vec = np.linalg.solve(lhs, -qd.ravel(order="F"))
    except np.linalg.LinAlgError as exc:
        raise SingularSylvesterError(f"resonant spectrum: {exc}") from exc
    p_mat = vec.reshape(r, r, order="F")
    p_mat = 0.5 * (p_mat + p_mat.T)
    residual = np.max(np.abs(a_mat.T @ p_mat + p_mat @ a_mat + qd))
    if residual > 1e-10 * max(1.0, np.max(np.abs(qd))):
        raise SingularSylvesterError(f"solve residual {residual:.2e} too large")
    return p_mat


def gain_bound(q_mat, p_mat, b_list, d_list, m: int, epsilon: float) -> float:
    """Eigenvalue threshold on ||sqrt(K)|| that guarantees descent of z'Pz.

    Builds the bordered blocks  [[P B_i, P D_i / 2], [D_i' P' / 2, 1]],
    symmetrized for the eigencomputation.  Returns 0 when lambda_min(Q) is
    not positive, in which case the condition is vacuous.
    """
    q_sym = 0.5 * (np.asarray(q_mat, float) + np.asarray(q_mat, float).T)
    lam_min = float(np.min(np.linalg.eigvalsh(q_sym)))
    if lam_min <= 0 or m < 1:
        return 0.0
    p_mat = np.asarray(p_mat, dtype=float)
    r = p_mat.shape[0]
    lam_max = 0.0
    for bi, di in zip(b_list, d_list):
        block = np.zeros((r + 1, r + 1))
        block[:r, :r] = p_mat @ np.asarray(bi, float)
        block[:r, r] = 0.5 * (p_mat @ np.asarray(di, float))
        block[r, :r] = 0.5 * (np.asarray(di, float) @ p_mat.T)
        block[r, r] = 1.0
        block = 0.5 * (block + block.T)
        lam_max = max(lam_max, float(np.max(np.linalg.eigvalsh(block))))
    if lam_max <= 0:
        return 0.0
    return float(np.sqrt(lam_min / (2.0 * m * lam_max ** 2 * epsilon ** 2)))


def default_stabilizer(
    real: BilinearRealization, epsilon: float = 1.0, safety: float = 2.0
) -> StabilizerConfig:
    """Default (P, K): Lyapunov P when the drift is Hurwitz, else identity;
    K diagonal sized by the gain bound times a safety factor (identity when
    the bound is vacuous)."""
    r = real.r
    try:
        p_mat = solve_lyapunov(real.A, np.eye(r))
    except NotStabilizableError:
        warnings.warn("drift not Hurwitz; falling back to P = I", stacklevel=2)
        p_mat = np.eye(r)
    q_mat = real.A.T @ p_mat + p_mat @ real.A
    bound = gain_bound(q_mat, p_mat, real.B, real.D, real.m, epsilon)
    c = safety * bound if bound > 0 else 1.0
    return StabilizerConfig(p_mat=p_mat, k_gain=c * np.eye(real.m), epsilon=epsilon)


def stabilizing_control(
    real: BilinearRealization, cfg: StabilizerConfig, z
) -> np.ndarray:
    """u = -K S(z)' P z  with S(z) = [B_1 z + D_1, ..., B_m z + D_m]."""
    z = np.asarray(z, dtype=float)
    s_mat = np.column_stack([bi @ z + di for bi, di in zip(real.B, real.D)])
    return -cfg.k_gain @ (s_mat.T @ (cfg.p_mat @ z))


@dataclass(frozen=True)
class ClosedLoopResult:
    trajectory: Trajectory
    v_series: np.ndarray
    v_nonincreasing: bool
    final_error: Optional[float]

    @property
    def v_final(self) -> float:
        return float(self.v_series[-1])


def closed_loop_simulate(
    system: NonlinearSystem,
    real: BilinearRealization,
    cfg: StabilizerConfig,
    x0: Sequence[float],
    t_final: float,
    dt: float,
    x_eq: Optional[Sequence[float]] = None,
    v_step_tol: float = 1e-9,
) -> ClosedLoopResult:
    """RK4 of the original dynamics under the lifted Lyapunov feedback.

    Records V = z'Pz at every step and reports whether the series is
    non-increasing within the per-step tolerance.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = max(1, int(round(t_final / dt)))
    states, v_series = closed_loop_rk4(
        np.asarray(x0, dtype=float),
        dt,
        steps,
        np.array(real.B),
        np.array(real.D),
        cfg.p_mat,
        cfg.k_gain,
        compile_system(system),
        compile_exprs(list(real.psi)),
    )
    if not np.all(np.isfinite(states)):
        raise NonFiniteStateError("closed-loop trajectory blew up")
    times = np.arange(steps + 1) * dt
    monotone = bool(np.all(np.diff(v_series) <= v_step_tol))
    final_error = None
    if x_eq is not None:
        final_error = float(np.linalg.norm(states[-1] - np.asarray(x_eq, float)))
    return ClosedLoopResult(
        trajectory=Trajectory(times, states, kind=ORIGINAL),
        v_series=v_series,
        v_nonincreasing=monotone,
        final_error=final_error,
    )


# ---------------------------------------------------------------------------
# steering by direct shooting over piecewise-constant controls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteeringProblem:
    x0: tuple[float, ...]
    x_target: Optional[tuple[float, ...]]
    t_final: float
    segments: int
    u_bound: Optional[float] = None
    q_terminal: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.segments < 1:
            raise ValueError("need at least one control segment")
        if self.t_final <= 0:
            raise ValueError("horizon must be positive")
        if self.x_target is None and self.q_terminal is None:
            raise ValueError("give either a target state or a terminal weight")

    def terminal_cost(self, x_final: np.ndarray) -> float:
        if self.x_target is not None:
            diff = x_final - np.asarray(self.x_target, float)
            return float(diff @ diff)
        return float(x_final @ self.q_terminal @ x_final)


def _endpoints_batch(
    real: BilinearRealization, prob: SteeringProblem, values_batch: np.ndarray
) -> np.ndarray:
    """Terminal states for a batch of (s, m) schedules through segment flows."""
    a_flow, b_flow, _ = real.flow_matrices()
    count = values_batch.shape[0]
    delta = prob.t_final / prob.segments
    z = np.broadcast_to(real.lift_flow(prob.x0), (count, a_flow.shape[0])).copy()
    for seg in range(prob.segments):
        gens = np.broadcast_to(a_flow, (count,) + a_flow.shape).copy()
        for i, bi in enumerate(b_flow):
            gens += values_batch[:, seg, i, None, None] * bi
        flows = expm_many(delta * gens)
        z = (flows @ z[:, :, None])[:, :, 0]
    proj = real.proj_matrix()
    if real.offsets_active:
        proj = np.hstack([proj, np.zeros((real.n, 1))])
    return z @ proj.T


def steer_objective(
    real: BilinearRealization, values, prob: SteeringProblem
) -> float:
    """Terminal cost of one schedule, evaluated through composed flows."""
    values = np.asarray(values, dtype=float).reshape(1, prob.segments, real.m)
    x_final = _endpoints_batch(real, prob, values)[0]
    return prob.terminal_cost(x_final)


@dataclass(frozen=True)
class SteerOptions:
    starts: int = 8
    max_iters: int = 500
    grad_tol: float = 1e-8
    seed: int = 42
    stop_cost: float = 1e-10
    armijo: float = 1e-4
    start_scale: Optional[float] = None


@dataclass(frozen=True)
class SteeringResult:
    schedule: ControlSchedule
    cost: float
    iterations: int
    improved: bool
    start_costs: tuple[float, ...]


def steer_optimize(
    real: BilinearRealization,
    prob: SteeringProblem,
    opts: Optional[SteerOptions] = None,
) -> SteeringResult:
    """Multi-start gradient descent on the shooting objective.

    Gradients are central finite differences with per-coordinate step
    1e-6 (1 + |u|); each descent uses backtracking line search and stops on
    a small gradient, the iteration cap, or a negligible cost.  Box bounds
    are enforced by clipping.  The lowest-cost start wins, earlier seeds
    breaking ties.
    """
    opts = opts or SteerOptions()
    s, m = prob.segments, real.m
    dim = s * m

    def cost_batch(flat_batch: np.ndarray) -> np.ndarray:
        values = flat_batch.reshape(-1, s, m)
        finals = _endpoints_batch(real, prob, values)
        return np.array([prob.terminal_cost(x) for x in finals])

    def clip(u: np.ndarray) -> np.ndarray:
        if prob.u_bound is not None:
            return np.clip(u, -prob.u_bound, prob.u_bound)
        return u

    rng = np.random.default_rng(opts.seed)
    scale = opts.start_scale
    if scale is None:
        scale = prob.u_bound if prob.u_bound is not None else 2.0
    starts = [np.zeros(dim)]
    for _ in range(opts.starts - 1):
        starts.append(clip(rng.uniform(-scale, scale, size=dim)))

    best_u = starts[0]
    best_cost = float("inf")
    start_costs = []
    total_iters = 0
    for u0 in starts:
        u = u0.copy()
        cost = float(cost_batch(u[None])[0])
        alpha = 1.0
        for _ in range(opts.max_iters):
            total_iters += 1
            h = 1e-6 * (1.0 + np.abs(u))
            probes = np.repeat(u[None], 2 * dim, axis=0)
            for j in range(dim):
                probes[2 * j, j] += h[j]
                probes[2 * j + 1, j] -= h[j]
            vals = cost_batch(probes)
            grad = (vals[0::2] - vals[1::2]) / (2.0 * h)
            gnorm = float(np.max(np.abs(grad)))
            if gnorm < opts.grad_tol or cost <= opts.stop_cost:
                break
            step = alpha
            improved_line = False
            for _ in range(40):
                cand = clip(u - step * grad)
                cand_cost = float(cost_batch(cand[None])[0])
                if cand_cost <= cost - opts.armijo * step * float(grad @ grad):
                    u, cost = cand, cand_cost
                    alpha = min(step * 1.5, 1e3)
                    improved_line = True
                    break
                step *= 0.5
            if not improved_line:
                break
        start_costs.append(cost)
        if cost < best_cost:
            best_cost, best_u = cost, u
        if best_cost <= opts.stop_cost:
            break

    improved = best_cost < float(cost_batch(starts[0][None])[0]) or best_cost <= opts.stop_cost
    schedule = ControlSchedule.uniform(best_u.reshape(s, m), prob.t_final)
    return SteeringResult(
        schedule=schedule,
        cost=best_cost,
        iterations=total_iters,
        improved=improved,
        start_costs=tuple(start_costs),
    )


# ---------------------------------------------------------------------------
# quadratic-cost costate formula and forward-backward sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticCost:
    k_state: np.ndarray
    r_ctrl: np.ndarray
    q_terminal: np.ndarray

    def lifted(self, proj: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(K, R, Q) pulled onto the lifted state through the projection."""
        return (
            proj.T @ self.k_state @ proj,
            np.asarray(self.r_ctrl, dtype=float),
            proj.T @ self.q_terminal @ proj,
        )


def costate_control(real: BilinearRealization, lam, x, r_ctrl) -> np.ndarray:
    """Quadratic-cost control formula  u = (1/2) R^-1 (lam' B_i Psi(x))_i.

    Evaluated exactly as printed; the sweep solver uses the full
    stationarity condition instead (opposite sign, offsets included), which
    is what makes its fixed point a minimizer.
    """
    r_ctrl = np.atleast_2d(np.asarray(r_ctrl, dtype=float))
    if np.min(np.abs(np.linalg.eigvalsh(0.5 * (r_ctrl + r_ctrl.T)))) < _EIG_FLOOR:
        raise SingularRError("control weight R is singular")
    lam = np.asarray(lam, dtype=float)
    z = real.lift(x)
    stacked = np.array([lam @ (bi @ z) for bi in real.B])
    return 0.5 * np.linalg.solve(r_ctrl, stacked)


def fbsm_solve(
    real: BilinearRealization,
    cost: QuadraticCost,
    x0: Sequence[float],
    t_final: float,
    dt: float,
    max_sweeps: int = 200,
    relax: float = 0.5,
    u_tol: float = 1e-6,
) -> tuple[ControlSchedule, float]:
    """Forward-backward sweep for the quadratic-cost problem on the lifted state.

    Alternates forward integration of z under the current control with
    backward integration of the costate, then relaxes the control toward
    the stationarity solution  u = -(1/2) R^-1 (lam'(B_i z + D_i))_i.
    Returns the per-step control schedule and the achieved cost.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = max(1, int(round(t_final / dt)))
    dt = t_final / steps if t_final > 0 else dt
    r, m = real.r, real.m
    proj = real.proj_matrix()
    k_bar, r_bar, q_bar = cost.lifted(proj)
    r_inv = np.linalg.inv(r_bar)
    a_mat, b_mats, d0, d_mats = real.A, real.B, real.D0, real.D
    z0 = real.lift(x0)

    def zdot(z, u):
        dz = a_mat @ z + d0
        for i in range(m):
            dz = dz + u[i] * (b_mats[i] @ z + d_mats[i])
        return dz

    def forward(u_grid):
        zs = np.empty((steps + 1, r))
        zs[0] = z0
        for k in range(steps):
            u = u_grid[k]
            z = zs[k]
            k1 = zdot(z, u)
            k2 = zdot(z + 0.5 * dt * k1, u)
            k3 = zdot(z + 0.5 * dt * k2, u)
            k4 = zdot(z + dt * k3, u)
            zs[k + 1] = z + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        return zs

    def lamdot(lam, z, u):
        gen = a_mat.T @ lam
        for i in range(m):
            gen = gen + u[i] * (b_mats[i].T @ lam)
        return -(2.0 * k_bar @ z + gen)

    def backward(zs, u_grid):
        lams = np.empty((steps + 1, r))
        lams[steps] = 2.0 * q_bar @ zs[steps]
        for k in range(steps, 0, -1):
            u = u_grid[k - 1]
            zmid = 0.5 * (zs[k] + zs[k - 1])
            k1 = lamdot(lams[k], zs[k], u)
            k2 = lamdot(lams[k] - 0.5 * dt * k1, zmid, u)
            k3 = lamdot(lams[k] - 0.5 * dt * k2, zmid, u)
            k4 = lamdot(lams[k] - dt * k3, zs[k - 1], u)
            lams[k - 1] = lams[k] - dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        return lams

    def achieved_cost(zs, u_grid):
        run_z = np.einsum("ki,ij,kj->k", zs, k_bar, zs)
        run_u = np.einsum("ki,ij,kj->k", u_grid, r_bar, u_grid)
        j = 0.0
        for k in range(steps):
            j += dt * (0.5 * (run_z[k] + run_z[k + 1]) + run_u[k])
        return j + float(zs[-1] @ q_bar @ zs[-1])

    u_grid = np.zeros((steps, m))
    for _ in range(max_sweeps):
        zs = forward(u_grid)
        lams = backward(zs, u_grid)
        u_star = np.empty_like(u_grid)
        for k in range(steps):
            stacked = np.array(
                [lams[k] @ (b_mats[i] @ zs[k] + d_mats[i]) for i in range(m)]
            )
            u_star[k] = -0.5 * (r_inv @ stacked)
        u_new = (1.0 - relax) * u_grid + relax * u_star
        if np.max(np.abs(u_new)) > 1e6:
            raise SweepDivergedError("control norm exceeded 1e6 during sweeps")
        delta = float(np.max(np.abs(u_new - u_grid)))
        u_grid = u_new
        if delta < u_tol:
            break
    zs = forward(u_grid)
    times = tuple(np.arange(steps + 1) * dt)
    schedule = ControlSchedule(times, tuple(tuple(row) for row in u_grid))
    return schedule, achieved_cost(zs, u_grid)
