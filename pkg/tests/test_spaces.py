from fractions import Fraction

import pytest

from bilift.errors import DimensionMismatchError
from bilift.parser import parse_expr
from bilift.spaces import space_contains, space_reduce, space_sum

from conftest import exprs


class TestSpaceReduce:
    def test_scalar_multiple_collapse(self):
        s = space_reduce(exprs(2, "x1", "2*x1", "x2"))
        assert s.dim == 2

    def test_unicycle_closed_space(self):
        s = space_reduce(exprs(3, "x1", "x2", "x3", "cos(x3)", "sin(x3)", "1"))
        assert s.dim == 6

    def test_pythagorean_collapse(self):
        s = space_reduce(exprs(1, "sin(x1)^2", "cos(x1)^2", "1"))
        assert s.dim == 2

    def test_empty_is_zero_space(self):
        s = space_reduce([], n=3)
        assert s.dim == 0
        assert space_contains(s, parse_expr("0", 3)) == []

    def test_idempotent_on_reduced_basis(self):
        gens = exprs(2, "x1 + x2", "x1 - x2", "3*x1", "x1^2")
        s1 = space_reduce(gens)
        s2 = space_reduce(list(s1.basis))
        assert s2.dim == s1.dim
        for g in gens:
            assert g in s2

    def test_matrix_is_rref(self):
        s = space_reduce(exprs(2, "x1 + x2", "x1 - x2"))
        pivots = []
        for row in s.coeff_matrix:
            nz = [j for j, v in enumerate(row) if v != 0]
            pivots.append(nz[0])
            assert row[nz[0]] == 1
        assert pivots == sorted(pivots)
        # pivot columns are elsewhere zero
        for i, p in enumerate(pivots):
            for k, row in enumerate(s.coeff_matrix):
                if k != i:
                    assert row[p] == 0


class TestSpaceSum:
    def test_identity_with_zero_space(self):
        s = space_reduce(exprs(2, "x1", "x2"))
        z = space_reduce([], n=2)
        total = space_sum(s, z)
        assert total.dim == 2
        assert total == s

    def test_same_line_no_growth(self):
        s1 = space_reduce(exprs(1, "x1"))
        s2 = space_reduce(exprs(1, "x1"))
        assert space_sum(s1, s2).dim == 1

    def test_unicycle_first_step_sum(self):
        s1 = space_reduce(exprs(3, "x1", "x2", "x3"))
        s2 = space_reduce(exprs(3, "cos(x3)", "sin(x3)", "1"))
        total = space_sum(s1, s2)
        assert total.dim == 6
        for b in list(s1.basis) + list(s2.basis):
            assert b in total

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            space_sum(space_reduce(exprs(1, "x1")), space_reduce(exprs(2, "x1")))


class TestSpaceContains:
    def test_exact_coefficients(self):
        s = space_reduce(exprs(2, "x1", "x2", "x1^2"))
        coeffs = space_contains(s, parse_expr("x2 - x1^2", 2))
        assert coeffs == [Fraction(0), Fraction(1), Fraction(-1)]

    def test_zero_in_any_space(self):
        s = space_reduce(exprs(2, "x1", "x2"))
        assert space_contains(s, parse_expr("0", 2)) == [0, 0]

    def test_absent_for_degree_mismatch(self):
        s = space_reduce(exprs(1, "x1"))
        assert space_contains(s, parse_expr("x1^2", 1)) is None

    def test_coefficients_reconstruct_member(self, rng):
        gens = exprs(2, "x1 + x2", "x1^2 - 1", "sin(x2)")
        s = space_reduce(gens)
        target = gens[0].scale(Fraction(2, 3)) + gens[2].scale(Fraction(-5, 7))
        coeffs = space_contains(s, target)
        assert coeffs is not None
        rebuilt = parse_expr("0", 2)
        for c, b in zip(coeffs, s.basis):
            rebuilt = rebuilt + b.scale(c)
        assert rebuilt == target
