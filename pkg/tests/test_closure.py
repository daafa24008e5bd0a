import pytest

from bilift.closure import (
    AUGMENT,
    ClosureConfig,
    ClosureStatus,
    closure_run,
    closure_step,
    lie_derivation_space,
)
from bilift.errors import EmptySeedError
from bilift.expr import VectorField, lie_derivative
from bilift.parser import parse_expr
from bilift.spaces import space_reduce

from conftest import exprs, make_system


class TestLieDerivationSpace:
    def test_unicycle_coordinates(self, unicycle):
        s = space_reduce(exprs(3, "x1", "x2", "x3"))
        d = lie_derivation_space(s, unicycle.g[0])
        assert d.dim == 2
        assert parse_expr("cos(x3)", 3) in d
        assert parse_expr("sin(x3)", 3) in d

    def test_zero_space(self, unicycle):
        z = space_reduce([], n=3)
        assert lie_derivation_space(z, unicycle.g[0]).dim == 0

    def test_scalar_quadratic_field(self):
        tau = VectorField((parse_expr("-x1^2", 1),))
        s = space_reduce(exprs(1, "x1"))
        d = lie_derivation_space(s, tau)
        assert d.dim == 1
        assert lie_derivative(parse_expr("x1", 1), tau) in d

    def test_epimorphism_dim_bound(self, table_c):
        s = space_reduce(exprs(4, "x1 + x2", "cos(x4)", "exp(x4)"))
        for tau in table_c.fields():
            assert lie_derivation_space(s, tau).dim <= s.dim


class TestClosureStep:
    def test_unicycle_first_step(self, unicycle):
        g0 = space_reduce(exprs(3, "x1", "x2", "x3"))
        g1 = closure_step(g0, [unicycle.g[0], unicycle.g[1]])
        assert g1.dim == 6
        for t in ("cos(x3)", "sin(x3)", "1"):
            assert parse_expr(t, 3) in g1

    def test_invariant_space_is_fixed_point(self, unicycle):
        closed = space_reduce(exprs(3, "x1", "x2", "x3", "cos(x3)", "sin(x3)", "1"))
        after = closure_step(closed, unicycle.fields())
        assert after.dim == closed.dim
        for b in closed.basis:
            assert b in after

    def test_scalar_growth(self):
        tau = VectorField((parse_expr("-x1^2", 1),))
        g0 = space_reduce(exprs(1, "x1"))
        g1 = closure_step(g0, [tau])
        assert g1.dim == 2
        assert parse_expr("x1^2", 1) in g1

    def test_contains_previous(self, example5):
        g0 = space_reduce(exprs(2, "x1", "x2"))
        g1 = closure_step(g0, example5.fields())
        for b in g0.basis:
            assert b in g1


class TestClosureRun:
    def test_unicycle_augment(self, unicycle):
        out = closure_run(unicycle, ClosureConfig(constant_mode=AUGMENT))
        assert out.status is ClosureStatus.STABILIZED
        assert out.k_star == 1
        assert out.chain_dims == (3, 6, 6)
        assert out.gamma_star.dim == 6

    def test_table_b_augment_depth_and_dim(self, table_b):
        out = closure_run(table_b, ClosureConfig(constant_mode=AUGMENT))
        assert out.status is ClosureStatus.STABILIZED
        assert out.k_star == 4
        assert out.gamma_star.dim == 11

    def test_table_b_offset(self, table_b):
        out = closure_run(table_b)
        assert out.k_star == 4
        assert out.gamma_star.dim == 10

    def test_table_c_offset(self, table_c):
        out = closure_run(table_c)
        assert out.status is ClosureStatus.STABILIZED
        assert out.k_star == 2
        assert out.gamma_star.dim == 7

    def test_scalar_divergence_chain(self, scalar_xsq):
        out = closure_run(scalar_xsq, ClosureConfig(gamma0=exprs(1, "x1"), max_dim=20))
        assert out.status is ClosureStatus.DIM_CAP_EXCEEDED
        assert out.chain_dims == tuple(range(1, 22))
        # hand-derived chain: each step admits exactly the next power
        assert parse_expr("x1^5", 1) in out.gamma_star

    def test_iter_cap(self, scalar_xsq):
        out = closure_run(
            scalar_xsq, ClosureConfig(gamma0=exprs(1, "x1"), max_iter=3, max_dim=200)
        )
        assert out.status is ClosureStatus.ITER_CAP_EXCEEDED
        assert len(out.chain_dims) == 4

    def test_empty_seed_rejected(self, unicycle):
        with pytest.raises(EmptySeedError):
            closure_run(unicycle, ClosureConfig(gamma0=[]))
        with pytest.raises(EmptySeedError):
            closure_run(unicycle, ClosureConfig(gamma0=exprs(3, "0")))

    def test_default_seed_is_coordinates(self, example5):
        out = closure_run(example5)
        for t in ("x1", "x2"):
            assert parse_expr(t, 2) in out.gamma_star

    def test_chain_monotone_with_exact_membership(self, table_b):
        out = closure_run(table_b, ClosureConfig(constant_mode=AUGMENT))
        dims = out.chain_dims
        assert all(a <= b for a, b in zip(dims, dims[1:]))
        # every basis member of the stabilized space is in gamma_star
        for b in out.basis:
            assert b in out.gamma_star

    def test_seed_sensitivity_dim4(self, unicycle):
        seed = exprs(3, "x1", "x2", "cos(x3)", "sin(x3)")
        out = closure_run(unicycle, ClosureConfig(gamma0=seed, constant_mode=AUGMENT))
        assert out.status is ClosureStatus.STABILIZED
        assert out.k_star == 0
        assert out.gamma_star.dim == 4
        # its basis is a subset of the coordinate-seeded 6-dim basis
        big = closure_run(unicycle, ClosureConfig(constant_mode=AUGMENT))
        for b in out.basis:
            assert b in big.gamma_star

    def test_offset_vs_augment_agree_modulo_constant(self, table_c):
        off = closure_run(table_c)
        aug = closure_run(table_c, ClosureConfig(constant_mode=AUGMENT))
        assert aug.gamma_star.dim == off.gamma_star.dim + 1
        assert parse_expr("1", 4) in aug.gamma_star
