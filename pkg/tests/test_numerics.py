"""
Tests for the numerical primitives: OLS, quantiles, integration, chi-square tails, RNG
"""

import numpy as np
import pytest
from scipy import stats

from utils.errors import NonFiniteInputError, SingularSystemError
from utils.numerics import (
    Normal, RngStream, StudentT, Uniform, chi_square_sf, column_rank_deficit, draw,
    ensure_finite, ols_solve, sample_quantile, trapezoid_integrate,
)


class TestOlsSolve:

    def test_intercept_only_is_the_mean(self):
        coef = ols_solve(np.ones((3, 1)), np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(coef, [2.0])

    def test_exact_line(self):
        coef = ols_solve(np.array([[1.0, 0.0], [1.0, 1.0]]), np.array([1.0, 3.0]))
        np.testing.assert_allclose(coef, [1.0, 2.0])

    def test_matches_normal_equations(self):
        gen = np.random.default_rng(7)
        X = gen.normal(size=(20, 3))
        y = gen.normal(size=20)
        expected = np.linalg.solve(X.T @ X, X.T @ y)
        np.testing.assert_allclose(ols_solve(X, y), expected, rtol=1e-8, atol=1e-10)

    def test_residuals_orthogonal(self, rng):
        X = rng.normal(size=(50, 4))
        y = rng.normal(size=50)
        resid = y - X @ ols_solve(X, y)
        assert np.max(np.abs(X.T @ resid)) <= 1e-8 * np.linalg.norm(X) * np.linalg.norm(y)

    def test_several_responses(self, rng):
        X = rng.normal(size=(30, 2))
        Y = rng.normal(size=(30, 3))
        coef = ols_solve(X, Y)
        assert coef.shape == (2, 3)
        np.testing.assert_allclose(coef[:, 1], ols_solve(X, Y[:, 1]))

    def test_rank_deficient_reports_columns(self, rng):
        x = rng.normal(size=10)
        X = np.column_stack([np.ones(10), x, 2.0 * x])
        with pytest.raises(SingularSystemError) as excinfo:
            ols_solve(X, rng.normal(size=10))
        assert excinfo.value.n_offending == 1
        assert excinfo.value.columns == [2]

    def test_underdetermined(self):
        with pytest.raises(SingularSystemError):
            ols_solve(np.ones((2, 3)), np.ones(2))

    def test_non_finite_input(self):
        with pytest.raises(NonFiniteInputError):
            ols_solve(np.array([[1.0], [np.nan]]), np.ones(2))

    def test_column_rank_deficit_keeps_first_of_group(self, rng):
        x = rng.normal(size=8)
        X = np.column_stack([x, rng.normal(size=8), -x])
        assert column_rank_deficit(X).tolist() == [2]


class TestSampleQuantile:

    def test_median_of_odd_set(self):
        assert sample_quantile([1, 2, 3, 4, 5], 0.5) == 3.0

    def test_linear_interpolation(self):
        assert sample_quantile([0, 10], 0.5) == 5.0

    def test_normal_tail(self):
        draws = np.random.default_rng(1).standard_normal(1000)
        assert abs(sample_quantile(draws, 0.01) - stats.norm.ppf(0.01)) <= 0.15

    def test_permutation_invariant(self, rng):
        x = rng.normal(size=101)
        assert sample_quantile(x, 0.1) == sample_quantile(rng.permutation(x), 0.1)

    def test_monotone_in_alpha(self, rng):
        x = rng.normal(size=200)
        values = [sample_quantile(x, a) for a in (0.01, 0.05, 0.5, 0.95)]
        assert values == sorted(values)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
    def test_alpha_out_of_range(self, alpha):
        with pytest.raises(ValueError):
            sample_quantile([1.0, 2.0], alpha)

    def test_empty(self):
        with pytest.raises(ValueError):
            sample_quantile([], 0.5)


class TestTrapezoid:

    def test_identity_function(self):
        assert trapezoid_integrate([0.0, 0.5, 1.0], [0.0, 0.5, 1.0]) == pytest.approx(0.5)

    def test_constant(self):
        assert trapezoid_integrate([0.0, 1.0], [2.0, 2.0]) == pytest.approx(2.0)

    def test_square(self):
        xs = np.linspace(0.0, 1.0, 101)
        assert abs(trapezoid_integrate(xs, xs ** 2) - 1.0 / 3.0) < 1e-3

    def test_linear_in_values(self, rng):
        xs = np.sort(rng.uniform(0, 5, 30))
        a, b = rng.normal(size=30), rng.normal(size=30)
        lhs = trapezoid_integrate(xs, 2.0 * a + 3.0 * b)
        rhs = 2.0 * trapezoid_integrate(xs, a) + 3.0 * trapezoid_integrate(xs, b)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            trapezoid_integrate([0.0, 0.0, 1.0], [1.0, 1.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            trapezoid_integrate([0.0, 1.0], [1.0])


class TestChiSquare:

    def test_zero(self):
        assert chi_square_sf(0.0, 1) == 1.0

    def test_failures_statistic(self):
        assert chi_square_sf(1.4369, 1) == pytest.approx(0.2306, abs=1e-4)

    def test_critical_value(self):
        assert chi_square_sf(3.841, 1) == pytest.approx(0.05, abs=1e-3)

    def test_negative(self):
        with pytest.raises(ValueError):
            chi_square_sf(-1.0, 1)

    def test_non_finite(self):
        with pytest.raises(NonFiniteInputError):
            chi_square_sf(np.inf, 1)


class TestDraw:

    def test_normal_mean(self):
        x = draw(RngStream(3), Normal(0.0, 1.0), 100_000)
        assert abs(x.mean()) <= 0.02

    def test_uniform_support(self):
        x = draw(RngStream(0), Uniform(-2.0, 2.0), 100_000)
        assert x.min() >= -2.0 and x.max() <= 2.0

    def test_student_t_variance(self):
        x = draw(RngStream(0), StudentT(4.0), 100_000)
        assert abs(np.var(x) - 2.0) <= 0.15

    @pytest.mark.parametrize("dist", [Normal(0.0, 0.0), Uniform(1.0, 1.0), StudentT(0.0)])
    def test_invalid_parameters(self, dist):
        with pytest.raises(ValueError):
            draw(RngStream(0), dist, 10)


class TestRngStream:

    def test_reproducible(self):
        a = draw(RngStream(9), Normal(), 10_000)
        b = draw(RngStream(9), Normal(), 10_000)
        assert np.array_equal(a, b)

    def test_spawned_children_are_reproducible_and_distinct(self):
        first = [s.generator.random(5) for s in RngStream(4).spawn(3)]
        second = [s.generator.random(5) for s in RngStream(4).spawn(3)]
        for x, y in zip(first, second):
            assert np.array_equal(x, y)
        assert not np.array_equal(first[0], first[1])

    def test_children_record_their_spawn_path(self):
        root = RngStream(4)
        children = root.spawn(3)
        assert [c.spawn_key for c in children] == [(0,), (1,), (2,)]
        assert [c.label for c in children] == ["4/0", "4/1", "4/2"]
        assert root.label == "4"
        assert children[1].spawn(2)[1].label == "4/1/1"

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            RngStream(-1)

    def test_child_seed_range(self):
        seed = RngStream(0).child_seed()
        assert 0 <= seed < 2 ** 63


def test_ensure_finite_counts_bad_values():
    with pytest.raises(NonFiniteInputError, match="2 non-finite"):
        ensure_finite([1.0, np.nan, np.inf], "x")
