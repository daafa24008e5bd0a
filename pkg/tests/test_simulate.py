import math

import numpy as np
import pytest

from bilift.errors import NonFiniteError, NonSquareError, ScheduleInvalidError
from bilift.simulate import (
    ControlSchedule,
    consistency_error,
    expm,
    segment_flow,
    simulate_nonlinear_rk4,
    simulate_piecewise,
)

from conftest import make_system


def expm_series(m, terms=80):
    acc = np.eye(m.shape[0])
    t = np.eye(m.shape[0])
    for k in range(1, terms):
        t = t @ m / k
        acc = acc + t
    return acc


class TestExpm:
    def test_zero_is_identity(self):
        assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        lam = np.array([0.3, 0.2, 0.6])
        e = expm(np.diag(lam) * 1.7)
        assert np.allclose(e, np.diag(np.exp(lam * 1.7)), rtol=1e-13, atol=0)

    def test_rotation(self):
        th = 0.7
        e = expm(np.array([[0.0, -th], [th, 0.0]]))
        expect = np.array(
            [[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]]
        )
        assert np.abs(e - expect).max() < 1e-14

    def test_against_series(self, rng):
        for d in (2, 5, 9):
            m = rng.standard_normal((d, d))
            ref = expm_series(m, 120)
            rel = np.abs(expm(m) - ref).max() / max(1.0, np.abs(ref).max())
            assert rel < 1e-12

    def test_nonsquare_rejected(self):
        with pytest.raises(NonSquareError):
            expm(np.zeros((2, 3)))

    def test_nonfinite_rejected(self):
        m = np.zeros((2, 2))
        m[0, 1] = np.nan
        with pytest.raises(NonFiniteError):
            expm(m)


class TestSchedule:
    def test_strictly_increasing_required(self):
        with pytest.raises(ScheduleInvalidError):
            ControlSchedule((0.0, 0.0), ((1.0,),))

    def test_value_count(self):
        with pytest.raises(ScheduleInvalidError):
            ControlSchedule((0.0, 1.0), ())

    def test_empty_schedule_allowed(self):
        s = ControlSchedule((2.0,), ())
        assert s.segments == 0
        assert s.t_final == 2.0


class TestSegmentFlow:
    def test_zero_duration_identity(self, unicycle_real):
        f = segment_flow(unicycle_real, [1.0, 1.0], 0.0)
        assert np.array_equal(f, np.eye(6))

    def test_unicycle_heading_rotation(self, unicycle_real):
        omega, t = 0.9, 1.3
        f = segment_flow(unicycle_real, [0.0, omega], t)
        # the (cos, sin) block rotates by omega*t
        block = f[np.ix_([3, 4], [3, 4])]
        th = omega * t
        expect = np.array([[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
        assert np.abs(block - expect).max() < 1e-13

    def test_example5_drift_only_augmented(self, example5_real):
        f = segment_flow(example5_real, [0.0, 0.0], 1.0)
        a_flow, _, aug = example5_real.flow_matrices()
        assert aug and f.shape == (4, 4)
        assert np.allclose(f, expm(a_flow), atol=0)

    def test_semigroup_property(self, unicycle_real, rng):
        u = rng.uniform(-2, 2, 2)
        f1 = segment_flow(unicycle_real, u, 0.4)
        f2 = segment_flow(unicycle_real, u, 0.9)
        f12 = segment_flow(unicycle_real, u, 1.3)
        assert np.abs(f2 @ f1 - f12).max() < 1e-12


class TestSimulatePiecewise:
    def test_empty_schedule_single_state(self, unicycle_real):
        sched = ControlSchedule((3.0,), ())
        traj = simulate_piecewise(unicycle_real, sched, [0.1, 0.2, 0.3])
        assert len(traj.times) == 1
        assert np.allclose(traj.states[0], unicycle_real.lift([0.1, 0.2, 0.3]), atol=0)

    def test_sim1_closed_form(self):
        from bilift.closure import ClosureConfig, closure_run
        from bilift.realization import extract_realization
        from conftest import exprs, sim1_system

        for lam in ((1, 1, 1), ("3/10", "1/5", "-1/2")):
            system = sim1_system(*lam)
            out = closure_run(system, ClosureConfig(gamma0=exprs(2, "x1", "x2", "x1^2")))
            real = extract_realization(system, out)
            sched = ControlSchedule.zero(0, 2.0)
            traj = simulate_piecewise(real, sched, [0.1, 0.1], samples_per_segment=100)
            l1, l2, l3 = (float(eval(str(v), {}, {})) if isinstance(v, str) else float(v) for v in
                          (str(lam[0]).replace("/", "/"), str(lam[1]), str(lam[2])))
            l1, l2, l3 = (eval(f"({v})*1.0") for v in lam)
            t = traj.times
            x = traj.states @ real.proj_matrix().T
            x1_cf = np.exp(l1 * t) * 0.1
            x2_cf = np.exp(l2 * t) * 0.1 + l3 * (np.exp(2 * l1 * t) - np.exp(l2 * t)) * 0.01
            assert np.abs(x[:, 0] - x1_cf).max() < 1e-10
            assert np.abs(x[:, 1] - x2_cf).max() < 1e-10

    def test_split_segment_endpoint_stable(self, unicycle_real):
        u = (0.8, -0.5)
        one = ControlSchedule((0.0, 1.0), (u,))
        two = ControlSchedule((0.0, 0.5, 1.0), (u, u))
        t1 = simulate_piecewise(unicycle_real, one, [0.1, 0.0, 0.4])
        t2 = simulate_piecewise(unicycle_real, two, [0.1, 0.0, 0.4])
        assert np.abs(t1.states[-1] - t2.states[-1]).max() < 1e-12


class TestSimulateRK4:
    def test_constant_when_rhs_zero(self):
        system = make_system(2, ["0", "0"], [["0", "0"]])
        sched = ControlSchedule((0.0, 1.0), ((0.7,),))
        traj = simulate_nonlinear_rk4(system, sched, [1.0, -2.0], 0.1)
        assert np.array_equal(traj.states[0], traj.states[-1])

    def test_exponential_decay(self):
        system = make_system(1, ["-x1"], [])
        sched = ControlSchedule.zero(0, 1.0)
        traj = simulate_nonlinear_rk4(system, sched, [1.0], 1e-3)
        assert abs(traj.states[-1, 0] - math.exp(-1.0)) < 1e-8

    def test_unicycle_straight_line(self, unicycle):
        sched = ControlSchedule((0.0, 2.0), ((1.0, 0.0),))
        theta = 0.6
        traj = simulate_nonlinear_rk4(unicycle, sched, [0.0, 0.0, theta], 1e-3)
        expect = np.array([2.0 * math.cos(theta), 2.0 * math.sin(theta), theta])
        assert np.abs(traj.states[-1] - expect).max() < 1e-9

    def test_dt_must_divide(self, unicycle):
        sched = ControlSchedule((0.0, 0.35), ((0.0, 0.0),))
        with pytest.raises(ScheduleInvalidError):
            simulate_nonlinear_rk4(unicycle, sched, [0, 0, 0], 0.1)


class TestConsistency:
    def random_schedule(self, rng, m):
        vals = rng.uniform(-6.0, 6.0, (4, m))
        return ControlSchedule((0.0, 0.5, 0.9, 1.4, 2.0), tuple(tuple(v) for v in vals))

    def test_unicycle_small_error_and_order(self, rng, unicycle, unicycle_real):
        sched = self.random_schedule(rng, 2)
        e1 = consistency_error(unicycle, unicycle_real, sched, [0.3, -0.2, 1.1], 1e-3)
        assert e1 <= 1e-6
        e2 = consistency_error(unicycle, unicycle_real, sched, [0.3, -0.2, 1.1], 5e-4)
        assert e1 / e2 >= 4.0

    def test_example5_small_error_and_order(self, rng, example5, example5_real):
        sched = self.random_schedule(rng, 2)
        e1 = consistency_error(example5, example5_real, sched, [0.1, 0.1], 1e-3)
        assert e1 <= 1e-6
        e2 = consistency_error(example5, example5_real, sched, [0.1, 0.1], 5e-4)
        assert e1 / e2 >= 4.0

    def test_zero_horizon(self, unicycle, unicycle_real):
        sched = ControlSchedule((0.0,), ())
        err = consistency_error(unicycle, unicycle_real, sched, [0.2, 0.1, -0.4], 1e-3)
        assert err < 1e-14

    def test_rk4_refinement_only_helps_rk4(self, unicycle, unicycle_real, rng):
        # the lifted endpoint is dt-free; only the RK4 side moves with dt
        sched = self.random_schedule(rng, 2)
        x0 = [0.3, -0.2, 1.1]
        coarse = consistency_error(unicycle, unicycle_real, sched, x0, 0.05)
        firm = consistency_error(unicycle, unicycle_real, sched, x0, 0.0125)
        assert coarse / firm > 16.0  # fourth-order convergence

    def test_lift_project_roundtrip_along_trajectory(self, unicycle, unicycle_real, rng):
        sched = self.random_schedule(rng, 2)
        traj = simulate_nonlinear_rk4(unicycle, sched, [0.05, -0.1, 0.2], 1e-2)
        proj = unicycle_real.proj_matrix()
        for x in traj.states[:: 20]:
            z = unicycle_real.lift(x)
            assert np.array_equal(proj @ z, x)
