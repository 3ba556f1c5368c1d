import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import esquad as eq
from conftest import random_problem


class TestMakeProblem:
    def test_sphere_d2_identity(self):
        p = eq.make_problem([1, 1], (0, 0))
        assert p.d == 2
        assert np.array_equal(p.spectrum.eigenvalues, [1.0, 1.0])

    def test_cigar_smallest_over_trace(self):
        p = eq.make_problem([10, 10, 10, 1], 0)
        stats = eq.spectrum_stats(p)
        d, xi = 4, 10
        assert stats.L / stats.trace == pytest.approx(1.0 / ((d - 1) * xi + 1))

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(eq.InvalidSpectrum):
            eq.make_problem([-1, 1], 0)

    def test_dimension_mismatch(self):
        with pytest.raises(eq.DimensionMismatch):
            eq.make_problem([1, 1], (0, 0, 0))

    def test_eigenvalues_sorted_descending(self):
        p = eq.make_problem([1, 5, 2], 0)
        assert list(p.spectrum.eigenvalues) == [5.0, 2.0, 1.0]


class TestEvaluate:
    def test_sphere_half_norm_sq(self):
        p = eq.make_problem([1, 1], (0, 0))
        assert p.evaluate([1, 0]) == 0.5

    def test_cigar_small_axis(self):
        p = eq.make_problem([10, 10, 10, 1], 0)
        assert p.evaluate([0, 0, 0, 2]) == 2.0

    def test_sqrt_transform_applied(self):
        p = eq.make_problem([1, 1], (0, 0), transform=eq.SQRT)
        assert p.evaluate([1, 0]) == pytest.approx(math.sqrt(0.5))

    def test_nonnegative_zero_only_at_optimum(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = random_problem(rng, 6)
            x = rng.normal(size=6)
            assert p.evaluate(x) >= 0.0
            assert p.evaluate(p.optimum) == 0.0
            if not np.array_equal(x, p.optimum):
                assert p.evaluate(x) > 0.0

    def test_dimension_check(self):
        p = eq.make_problem([1, 1], 0)
        with pytest.raises(eq.DimensionMismatch):
            p.evaluate([1, 0, 0])


class TestGradient:
    def test_sphere_gradient_is_offset(self):
        p = eq.make_problem([1, 1], (0, 0))
        g = p.gradient_core([3, 4])
        assert np.array_equal(g, [3.0, 4.0])
        assert np.linalg.norm(g) == 5.0

    def test_diagonal_gradient(self):
        p = eq.make_problem([2, 1], 0)
        assert np.array_equal(p.gradient_core([1, 1]), [2.0, 1.0])

    def test_central_differences_match(self):
        rng = np.random.default_rng(11)
        h = 1e-6
        for _ in range(100):
            d = int(rng.integers(2, 9))
            p = random_problem(rng, d)
            x = rng.normal(size=d) * 2.0
            g = p.gradient_core(x)
            fd = np.empty(d)
            for i in range(d):
                e = np.zeros(d)
                e[i] = h
                fd[i] = (p.evaluate(x + e) - p.evaluate(x - e)) / (2 * h)
            scale = max(np.linalg.norm(g), 1.0)
            assert np.linalg.norm(fd - g) / scale < 1e-6

    def test_grad_norm_brackets_sqrt_f(self):
        # ||grad||^2 / (2U) <= h <= ||grad||^2 / (2L)
        rng = np.random.default_rng(3)
        for _ in range(100):
            d = int(rng.integers(2, 12))
            p = random_problem(rng, d)
            stats = eq.spectrum_stats(p)
            x = rng.normal(size=d)
            h = p.core(x)
            g2 = float(np.dot(p.gradient_core(x), p.gradient_core(x)))
            assert g2 / (2 * stats.U) <= h * (1 + 1e-12)
            assert h <= g2 / (2 * stats.L) * (1 + 1e-12)


class TestSpectrumStats:
    def test_sphere_d10(self):
        stats = eq.spectrum_stats(eq.make_problem(eq.sphere(10), 0))
        assert (stats.L, stats.U) == (1.0, 1.0)
        assert stats.trace == 10.0
        assert stats.trace_sq == 10.0
        assert stats.ratio == pytest.approx(0.1)
        assert stats.cond == 1.0

    def test_discus_d64(self):
        stats = eq.spectrum_stats(eq.make_problem(eq.discus(64, 100), 0))
        assert stats.trace == 163.0
        assert stats.L == 1.0
        assert stats.cond == 100.0
        assert stats.L / stats.trace == pytest.approx(1.0 / (100 + 64 - 1))

    def test_ratio_at_most_cond_over_d(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            d = int(rng.integers(2, 40))
            p = random_problem(rng, d)
            stats = eq.spectrum_stats(p)
            assert stats.ratio <= stats.cond / d * (1 + 1e-12)

    def test_rotation_does_not_change_stats(self):
        lam = [4.0, 2.0, 1.0, 0.5]
        plain = eq.spectrum_stats(eq.make_problem(lam, 0))
        for seed in (1, 2, 3):
            rotated = eq.spectrum_stats(eq.make_problem(lam, 0, rotation_seed=seed))
            assert rotated == plain

    def test_ratio_bounds(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            d = int(rng.integers(1, 20))
            lam = np.exp(rng.uniform(-1, 1, size=d))
            stats = eq.spectrum_stats(eq.make_problem(lam, 0))
            assert 1.0 / d <= stats.ratio * (1 + 1e-12)
            assert stats.ratio <= 1.0


class TestDirectionalMinScale:
    def test_orthogonal_direction(self):
        p = eq.make_problem([1, 1], 0)
        assert eq.directional_min_scale(p, [1, 0], [0, 1]) == 0.0

    def test_straight_to_optimum(self):
        p = eq.make_problem([1, 1], 0)
        assert eq.directional_min_scale(p, [1, 0], [-1, 0]) == 1.0

    def test_zero_direction_rejected(self):
        p = eq.make_problem([1, 1], 0)
        with pytest.raises(eq.DegenerateDirection):
            eq.directional_min_scale(p, [1, 0], [0, 0])

    def test_local_minimality(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            d = int(rng.integers(2, 8))
            p = random_problem(rng, d)
            m = rng.normal(size=d)
            z = rng.normal(size=d)
            t = eq.directional_min_scale(p, m, z)
            at = p.evaluate(m + t * z)
            assert p.evaluate(m + (t + 1e-4) * z) >= at - 1e-12
            if t > 1e-4:
                assert p.evaluate(m + (t - 1e-4) * z) >= at - 1e-12

    def test_global_on_ray_grid(self):
        rng = np.random.default_rng(37)
        for _ in range(20):
            d = int(rng.integers(2, 6))
            p = random_problem(rng, d)
            m = rng.normal(size=d)
            z = rng.normal(size=d)
            t = eq.directional_min_scale(p, m, z)
            at = p.evaluate(m + t * z)
            grid = np.linspace(0.0, max(4.0 * t, 2.0), 400)
            best = min(p.evaluate(m + s * z) for s in grid)
            assert at <= best + 1e-12


class TestTransforms:
    @given(
        st.floats(min_value=0, max_value=100, allow_nan=False),
        st.floats(min_value=0, max_value=100, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_float_arithmetic(self, a, b):
        # Strict monotonicity holds on the reals; float evaluation can only
        # collapse ties, never invert an ordering.
        for tag in (eq.IDENTITY, eq.SQRT, eq.LOG1P, eq.CUBE,
                    eq.MonotoneTransform("affine", 2.5, -1.0)):
            if a <= b:
                assert tag.apply(a) <= tag.apply(b)

    def test_strict_on_separated_inputs(self):
        for tag in (eq.IDENTITY, eq.SQRT, eq.LOG1P, eq.CUBE,
                    eq.MonotoneTransform("affine", 2.5, -1.0)):
            values = [tag.apply(x) for x in (0.0, 0.5, 1.0, 2.0, 10.0)]
            assert values == sorted(values)
            assert len(set(values)) == len(values)

    def test_affine_requires_positive_slope(self):
        with pytest.raises(eq.DomainError):
            eq.MonotoneTransform("affine", a=0.0)

    def test_unknown_tag_rejected(self):
        with pytest.raises(eq.DomainError):
            eq.MonotoneTransform("exp")


class TestSerialization:
    def test_round_trip(self):
        p = eq.make_problem(
            [3, 1], (1.5, -2.0), transform=eq.LOG1P, rotation_seed=9
        )
        text = json.dumps(p.to_json())
        q = eq.problem_from_json(text)
        assert np.array_equal(q.spectrum.eigenvalues, p.spectrum.eigenvalues)
        assert np.array_equal(q.optimum, p.optimum)
        assert q.transform == p.transform
        assert q.rotation_seed == 9
        assert np.array_equal(q.rotation, p.rotation)

    def test_schema_shape(self):
        p = eq.make_problem([1, 1], 0)
        doc = p.to_json()
        assert set(doc) == {"eigenvalues", "optimum", "transform", "rotation_seed"}
        assert doc["transform"] == "identity"
        assert doc["rotation_seed"] is None

    def test_affine_round_trip(self):
        p = eq.make_problem([1], [0], transform=eq.MonotoneTransform("affine", 2, 3))
        q = eq.problem_from_json(p.to_json())
        assert q.transform.a == 2 and q.transform.b == 3


class TestStableLogs:
    def test_log_core_matches_direct(self):
        rng = np.random.default_rng(41)
        for _ in range(30):
            d = int(rng.integers(2, 10))
            p = random_problem(rng, d)
            y = rng.normal(size=d)
            assert p.log_core_centered(y) == pytest.approx(
                math.log(p.core_centered(y)), rel=1e-12
            )

    def test_log_core_below_underflow(self):
        p = eq.make_problem(eq.sphere(4), 0)
        y = np.full(4, 1e-200)
        # core would be 2e-400, unrepresentable; the log is fine
        assert p.core_centered(y) == 0.0
        assert p.log_core_centered(y) == pytest.approx(
            math.log(0.5) + 2 * math.log(1e-200) + math.log(4.0)
        )

    def test_log_grad_norm_matches_direct(self):
        rng = np.random.default_rng(43)
        p = random_problem(rng, 7)
        y = rng.normal(size=7)
        assert p.log_grad_norm_centered(y) == pytest.approx(
            math.log(p.grad_norm_centered(y)), rel=1e-12
        )
