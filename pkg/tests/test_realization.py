import math
from fractions import Fraction

import numpy as np
import pytest

from bilift.closure import AUGMENT, ClosureConfig, closure_run
from bilift.errors import MissingProjectionError, NotStabilizedError
from bilift.parser import parse_expr
from bilift.realization import (
    BilinearRealization,
    EmbeddingVerdict,
    extract_realization,
    pushforward_residual,
    verify_embedding,
)

from conftest import exprs, make_system, sim1_system


def unit_outer(i, j, r):
    m = [[Fraction(0)] * r for _ in range(r)]
    m[i - 1][j - 1] = Fraction(1)
    return tuple(tuple(row) for row in m)


class TestUnicycleExtraction:
    def test_b_matrices_exact(self, unicycle_real):
        real = unicycle_real
        assert real.r == 6
        assert [str(g) for g in real.psi] == ["x1", "x2", "x3", "cos(x3)", "sin(x3)", "1"]
        b1 = np.zeros((6, 6))
        b1[0, 3] = 1
        b1[1, 4] = 1
        b2 = np.zeros((6, 6))
        b2[2, 5] = 1
        b2[3, 4] = -1
        b2[4, 3] = 1
        assert all(
            real.b_exact[0][i][j] == Fraction(int(b1[i, j])) for i in range(6) for j in range(6)
        )
        assert all(
            real.b_exact[1][i][j] == Fraction(int(b2[i, j])) for i in range(6) for j in range(6)
        )
        assert all(v == 0 for row in real.a_exact for v in row)
        assert all(v == 0 for v in real.d0_exact)
        assert all(v == 0 for di in real.d_exact for v in di)

    def test_reextraction_deterministic(self, unicycle):
        out1 = closure_run(unicycle, ClosureConfig(constant_mode=AUGMENT))
        out2 = closure_run(unicycle, ClosureConfig(constant_mode=AUGMENT))
        r1 = extract_realization(unicycle, out1)
        r2 = extract_realization(unicycle, out2)
        assert r1.a_exact == r2.a_exact
        assert r1.b_exact == r2.b_exact
        assert [str(g) for g in r1.psi] == [str(g) for g in r2.psi]


class TestExample5Extraction:
    def test_matrices_exact(self, example5_real):
        real = example5_real
        assert real.constant_mode == "offset"
        assert real.a_exact == (
            (1, 0, 0),
            (0, 1, -1),
            (0, 0, 2),
        )
        assert real.b_exact[0] == ((0, 0, 0), (0, 0, 0), (2, 0, 0))
        assert real.b_exact[1] == ((0, 0, 0), (0, 0, 0), (0, 0, 0))
        assert real.d_exact[0] == (1, 0, 0)
        assert real.d_exact[1] == (0, 1, 0)
        assert real.d0_exact == (0, 0, 0)

    def test_requires_stabilized(self, scalar_xsq):
        out = closure_run(scalar_xsq, ClosureConfig(gamma0=exprs(1, "x1"), max_dim=10))
        with pytest.raises(NotStabilizedError):
            extract_realization(scalar_xsq, out)


class TestAlternativeSeed:
    @pytest.mark.parametrize("lam", [(1, 1, 1), ("3/10", "1/5", "-1/2")])
    def test_diagonal_drift(self, lam):
        system = sim1_system(*lam)
        seed = exprs(2, "x1", f"x2 - ({lam[2]})*x1^2", "x1^2")
        out = closure_run(system, ClosureConfig(gamma0=seed))
        real = extract_realization(system, out)
        l1, l2 = Fraction(str(lam[0])), Fraction(str(lam[1]))
        assert real.a_exact == (
            (l1, 0, 0),
            (0, l2, 0),
            (0, 0, 2 * l1),
        )
        # x2 recovered as z2 + lam3 * z3
        l3 = Fraction(str(lam[2]))
        assert real.proj_rows_exact[1] == (0, 1, l3)


class TestEmbedding:
    def test_unicycle_graph(self, unicycle_real):
        report = verify_embedding(unicycle_real)
        assert report.is_graph_over_coordinates
        assert report.verdict is EmbeddingVerdict.EMBEDDING

    def test_four_dim_seed_full_rank(self, unicycle):
        seed = exprs(3, "x1", "x2", "cos(x3)", "sin(x3)")
        out = closure_run(unicycle, ClosureConfig(gamma0=seed, constant_mode=AUGMENT))
        real = extract_realization(unicycle, out)
        report = verify_embedding(real)
        assert not report.is_graph_over_coordinates
        assert all(rank == 3 for _, rank in report.jacobian_rank_samples)
        assert report.verdict is EmbeddingVerdict.EMBEDDING

    def test_rank_deficient_not_verified(self):
        psi = exprs(3, "x1", "cos(x3)", "sin(x3)")
        zero3 = tuple(tuple(Fraction(0) for _ in range(3)) for _ in range(3))
        real = BilinearRealization(
            psi=psi,
            a_exact=zero3,
            b_exact=(),
            d0_exact=(Fraction(0),) * 3,
            d_exact=(),
            proj_rows_exact=((Fraction(1), Fraction(0), Fraction(0)), None, None),
        )
        report = verify_embedding(real, n=3)
        assert not report.is_graph_over_coordinates
        assert all(rank == 2 for _, rank in report.jacobian_rank_samples)
        assert report.verdict is EmbeddingVerdict.NOT_VERIFIED


class TestLiftProject:
    def test_unicycle_lift_at_origin(self, unicycle_real):
        z = unicycle_real.lift([0.0, 0.0, 0.0])
        assert np.allclose(z, [0, 0, 0, 1, 0, 1], atol=0)

    def test_left_inverse_exact_on_coordinates(self, unicycle_real):
        x = np.array([1.0, 2.0, math.pi])
        z = unicycle_real.lift(x)
        assert np.array_equal(unicycle_real.project(z), x)

    def test_zero_maps_to_origin(self, unicycle_real):
        assert np.array_equal(unicycle_real.project(np.zeros(6)), np.zeros(3))

    def test_example5_lift(self, example5_real):
        assert np.allclose(example5_real.lift([0.1, 0.1]), [0.1, 0.1, 0.01], atol=1e-18)
        assert np.array_equal(example5_real.lift([1.0, 1.0]), [1.0, 1.0, 1.0])

    def test_missing_projection(self):
        psi = exprs(3, "x1", "cos(x3)", "sin(x3)")
        real = BilinearRealization(
            psi=psi,
            a_exact=tuple(tuple(Fraction(0) for _ in range(3)) for _ in range(3)),
            b_exact=(),
            d0_exact=(Fraction(0),) * 3,
            d_exact=(),
            proj_rows_exact=((Fraction(1), Fraction(0), Fraction(0)), None, None),
        )
        with pytest.raises(MissingProjectionError):
            real.project(np.zeros(3))


class TestPushforwardResidual:
    def test_unicycle_point(self, unicycle, unicycle_real):
        res = pushforward_residual(unicycle, unicycle_real, [0.3, -0.2, 1.1], [1.0, 0.5])
        assert res <= 1e-10

    def test_zero_everything(self, unicycle, unicycle_real):
        zero_sys = make_system(3, ["0", "0", "0"], [["0", "0", "0"], ["0", "0", "0"]])
        zero_real = BilinearRealization(
            psi=unicycle_real.psi,
            a_exact=tuple(tuple(Fraction(0) for _ in range(6)) for _ in range(6)),
            b_exact=tuple(
                tuple(tuple(Fraction(0) for _ in range(6)) for _ in range(6))
                for _ in range(2)
            ),
            d0_exact=(Fraction(0),) * 6,
            d_exact=((Fraction(0),) * 6, (Fraction(0),) * 6),
            proj_rows_exact=unicycle_real.proj_rows_exact,
        )
        assert pushforward_residual(zero_sys, zero_real, [0.4, 0.1, -0.7], [0.0, 0.0]) == 0.0

    def test_example5_point(self, example5, example5_real):
        res = pushforward_residual(example5, example5_real, [1.0, 2.0], [0.7, -0.3])
        assert res <= 1e-10

    def test_random_points_all_bundled(self, rng, unicycle, unicycle_real, example5,
                                       example5_real, table_a, table_a_real,
                                       table_b, table_b_real, table_c, table_c_real):
        cases = [
            (unicycle, unicycle_real),
            (example5, example5_real),
            (table_a, table_a_real),
            (table_b, table_b_real),
            (table_c, table_c_real),
        ]
        for system, real in cases:
            for _ in range(20):
                x = rng.uniform(-1, 1, system.n)
                u = rng.uniform(-1, 1, system.m)
                assert pushforward_residual(system, real, x, u) <= 1e-10
