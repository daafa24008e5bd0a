"""Trajectory simulation for both representations.

The lifted dynamics under a piecewise-constant schedule factor into matrix
exponentials, one per segment:

    z(T) = Phi(u_{s-1}) ... Phi(u_1) Phi(u_0) z(0),
    Phi(u_k) = exp(delta_k (A + sum_i u_ik B_i)),

computed on the homogeneous (r+1)-state when the realization carries
offsets.  The original nonlinear side integrates with classical RK4 as an
independent cross-check; the matrix-exponential side is dt-free.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._kernels import expm_core, expm_many, rk4_record
from .errors import (
    NonFiniteError,
    NonSquareError,
    ScheduleInvalidError,
)
from .realization import BilinearRealization
from .systems import NonlinearSystem
from .tables import compile_system

ORIGINAL = "original"
LIFTED = "lifted"


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant control: s intervals between s+1 breakpoints."""

    breakpoints: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not self.breakpoints:
            raise ScheduleInvalidError("schedule needs at least one breakpoint")
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            if not b > a:
                raise ScheduleInvalidError("breakpoints must be strictly increasing")
        if len(self.values) != len(self.breakpoints) - 1:
            raise ScheduleInvalidError(
                f"{len(self.breakpoints) - 1} intervals but {len(self.values)} values"
            )
        widths = {len(v) for v in self.values}
        if len(widths) > 1:
            raise ScheduleInvalidError("control vectors must share one width")

    @property
    def segments(self) -> int:
        return len(self.values)

    @property
    def m(self) -> int:
        return len(self.values[0]) if self.values else 0

    @property
    def t0(self) -> float:
        return self.breakpoints[0]

    @property
    def t_final(self) -> float:
        return self.breakpoints[-1]

    def durations(self) -> list[float]:
        return [b - a for a, b in zip(self.breakpoints, self.breakpoints[1:])]

    @staticmethod
    def constant(u: Sequence[float], t_final: float, t0: float = 0.0) -> "ControlSchedule":
        return ControlSchedule((t0, t_final), (tuple(float(v) for v in u),))

    @staticmethod
    def zero(m: int, t_final: float, t0: float = 0.0) -> "ControlSchedule":
        return ControlSchedule.constant((0.0,) * m, t_final, t0)

    @staticmethod
    def uniform(values, t_final: float, t0: float = 0.0) -> "ControlSchedule":
        """Equal-duration segments from an (s, m) value array."""
        values = [tuple(float(v) for v in row) for row in values]
        s = len(values)
        pts = tuple(t0 + (t_final - t0) * k / s for k in range(s + 1))
        return ControlSchedule(pts, tuple(values))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    kind: str = ORIGINAL

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ScheduleInvalidError("times and states lengths differ")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def final_state(self) -> np.ndarray:
        return self.states[-1]


def expm(m) -> np.ndarray:
    """Matrix exponential (Pade degree 13 with scaling and squaring)."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NonSquareError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("matrix contains non-finite entries")
    return expm_core(arr)


def segment_flow(real: BilinearRealization, u: Sequence[float], delta: float) -> np.ndarray:
    """Flow matrix of one constant-control segment on the flow state."""
    if delta < 0:
        raise ScheduleInvalidError("segment duration must be non-negative")
    a_flow, b_flow, _ = real.flow_matrices()
    gen = a_flow.copy()
    for ui, bi in zip(u, b_flow):
        if ui:
            gen = gen + ui * bi
    return expm_core(delta * gen)


def _segment_generators(real: BilinearRealization, sched: ControlSchedule) -> np.ndarray:
    a_flow, b_flow, _ = real.flow_matrices()
    gens = []
    for u in sched.values:
        gen = a_flow.copy()
        for ui, bi in zip(u, b_flow):
            if ui:
                gen = gen + ui * bi
        gens.append(gen)
    return np.array(gens) if gens else np.zeros((0,) + a_flow.shape)


def simulate_piecewise(
    real: BilinearRealization,
    sched: ControlSchedule,
    x0: Sequence[float],
    samples_per_segment: int = 1,
) -> Trajectory:
    """Lifted trajectory from composed segment flows.

    Intermediate samples inside a segment come from partial-duration flows
    of the same generator, so refining ``samples_per_segment`` never changes
    the endpoint.
    """
    if samples_per_segment < 1:
        raise ScheduleInvalidError("samples_per_segment must be at least 1")
    if sched.values and real.m != sched.m:
        raise ScheduleInvalidError(
            f"schedule has {sched.m} controls, realization expects {real.m}"
        )
    z = real.lift_flow(x0)
    times = [sched.t0]
    states = [z.copy()]
    gens = _segment_generators(real, sched)
    for seg, delta in enumerate(sched.durations()):
        fracs = [(j + 1) / samples_per_segment for j in range(samples_per_segment)]
        flows = expm_many(np.array([f * delta * gens[seg] for f in fracs]))
        for f, flow in zip(fracs, flows):
            times.append(sched.breakpoints[seg] + f * delta)
            states.append(flow @ z)
        z = states[-1]
    arr = np.array(states)
    return Trajectory(np.array(times), real.strip_flow(arr), kind=LIFTED)


def _segment_steps(sched: ControlSchedule, dt: float) -> list[int]:
    if dt <= 0:
        raise ScheduleInvalidError("dt must be positive")
    steps = []
    for delta in sched.durations():
        k = int(round(delta / dt))
        if k < 1 or abs(k * dt - delta) > 1e-9 * max(1.0, abs(delta)):
            raise ScheduleInvalidError(
                f"dt={dt} does not divide segment of length {delta}"
            )
        steps.append(k)
    return steps


def simulate_nonlinear_rk4(
    system: NonlinearSystem,
    sched: ControlSchedule,
    x0: Sequence[float],
    dt: float,
    table=None,
) -> Trajectory:
    """Classical RK4 on the original dynamics, segment boundaries aligned."""
    if sched.values and sched.m != system.m:
        raise ScheduleInvalidError(
            f"schedule has {sched.m} controls, system expects {system.m}"
        )
    steps = _segment_steps(sched, dt)
    table = table if table is not None else compile_system(system)
    states = rk4_record(
        np.asarray(x0, dtype=float),
        np.array(sched.values, dtype=float).reshape(len(steps), system.m),
        steps,
        [dt] * len(steps),
        table,
    )
    times = [sched.t0]
    for seg, k in enumerate(steps):
        base = sched.breakpoints[seg]
        times.extend(base + (j + 1) * dt for j in range(k))
    return Trajectory(np.array(times), states, kind=ORIGINAL)


def consistency_error(
    system: NonlinearSystem,
    real: BilinearRealization,
    sched: ControlSchedule,
    x0: Sequence[float],
    dt: float,
) -> float:
    """Worst-case gap between the two representations on a shared grid.

    max over sample times of || project(z(t)) - x_rk4(t) ||_inf.  The lifted
    side is evaluated by exact partial-duration flows at every RK4 step.
    """
    rk4 = simulate_nonlinear_rk4(system, sched, x0, dt)
    gens = _segment_generators(real, sched)
    steps = _segment_steps(sched, dt)
    z = real.lift_flow(x0)
    proj = real.proj_matrix()
    if real.offsets_active:
        proj = np.hstack([proj, np.zeros((real.n, 1))])
    worst = float(np.max(np.abs(proj @ z - rk4.states[0])))
    row = 1
    for seg, k in enumerate(steps):
        flows = expm_many(np.array([(j + 1) * dt * gens[seg] for j in range(k)]))
        for j in range(k):
            x_bl = proj @ (flows[j] @ z)
            gap = float(np.max(np.abs(x_bl - rk4.states[row])))
            if gap > worst:
                worst = gap
            row += 1
        z = flows[-1] @ z
    return worst
