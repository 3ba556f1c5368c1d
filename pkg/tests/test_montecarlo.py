import math

import numpy as np
import pytest

import esquad as eq
from esquad import montecarlo
from conftest import random_problem


class TestSuccessProb:
    def test_vanishing_sigma_approaches_half(self):
        p = eq.make_problem(eq.ellipsoid(12, 5), 0)
        m = p.optimum + np.ones(12)
        sigma = 1e-12 * float(np.linalg.norm(m - p.optimum))
        est = eq.estimate_success_prob(p, m, sigma, 10000, eq.RandomStream(1))
        assert abs(est.mean - 0.5) <= 3 * est.std_error + 1e-12

    def test_overshoot_limit_near_zero(self):
        p = eq.make_problem(eq.sphere(16), 0)
        m = p.optimum + np.ones(16) / 4.0
        sigma = 1e6 * float(np.linalg.norm(m - p.optimum))
        est = eq.estimate_success_prob(p, m, sigma, 10000, eq.RandomStream(2))
        assert est.mean < 0.01
        assert est.mean <= 3 * est.std_error + 1e-12

    def test_inside_sandwich_sphere_d100(self):
        p = eq.make_problem(eq.sphere(100), 0)
        stats = eq.spectrum_stats(p)
        m = p.optimum + np.ones(100) / 10.0
        grad_norm = float(np.linalg.norm(p.gradient_core(m)))
        sigma = 1.0 * grad_norm / stats.trace
        est = eq.estimate_success_prob(p, m, sigma, 100000, eq.RandomStream(3))
        lower, upper = eq.success_prob_sandwich(stats, 1.0, 0.5)
        assert lower - 3 * est.std_error <= est.mean <= upper + 3 * est.std_error

    def test_minimum_n(self):
        p = eq.make_problem(eq.sphere(4), 0)
        with pytest.raises(eq.DomainError):
            eq.estimate_success_prob(p, np.ones(4), 0.1, 50, eq.RandomStream(0))

    def test_degenerate_state(self):
        p = eq.make_problem(eq.sphere(4), 0)
        with pytest.raises(eq.DegenerateState):
            eq.estimate_success_prob(p, np.zeros(4), 0.1, 1000, eq.RandomStream(0))


class TestLogProgress:
    def test_vanishing_sigma_vanishes(self):
        p = eq.make_problem(eq.sphere(8), 0)
        m = p.optimum + np.ones(8)
        scale = float(np.linalg.norm(m - p.optimum))
        est = eq.estimate_log_progress(p, m, 1e-8 * scale, 5000, eq.RandomStream(4))
        assert abs(est.mean) < 1e-6

    def test_always_nonpositive(self):
        rng = np.random.default_rng(5)
        for trial in range(10):
            d = int(rng.integers(4, 20))
            p = random_problem(rng, d)
            m = p.optimum + rng.normal(size=d)
            sigma = float(math.exp(rng.uniform(-3, 3)))
            est = eq.estimate_log_progress(p, m, sigma, 500, eq.RandomStream(trial))
            assert est.mean <= 0.0


class TestExpAbs:
    def test_vanishing_sigma_approaches_one(self):
        p = eq.make_problem(eq.sphere(8), 0)
        m = p.optimum + np.ones(8)
        est = eq.estimate_exp_abs(p, m, 1e-10, 2000, eq.RandomStream(6))
        assert est.mean == pytest.approx(1.0, abs=1e-6)

    def test_at_least_one(self):
        rng = np.random.default_rng(7)
        for trial in range(10):
            d = int(rng.integers(5, 16))
            p = random_problem(rng, d)
            m = p.optimum + rng.normal(size=d)
            sigma = float(math.exp(rng.uniform(-2, 2)))
            est = eq.estimate_exp_abs(p, m, sigma, 1000, eq.RandomStream(trial))
            assert est.mean >= 1.0

    def test_bound_d8_d32(self):
        rng = np.random.default_rng(8)
        for d in (8, 32):
            for cond in (1.0, 10.0):
                lam = eq.sphere(d) if cond == 1 else eq.ellipsoid(d, cond)
                p = eq.make_problem(lam, 0)
                stats = eq.spectrum_stats(p)
                m = p.optimum + rng.normal(size=d)
                sigma = float(np.linalg.norm(p.gradient_core(m))) / stats.trace
                est = eq.estimate_exp_abs(
                    p, m, sigma, 20000, eq.RandomStream(60 + d + int(cond))
                )
                assert est.mean <= eq.exp_moment_bound(stats, d) + 3 * est.std_error


class TestDriftV:
    def test_pathwise_cap_every_sample(self, sphere256, params256, constants256):
        state = eq.default_initial_state(sphere256)
        est, samples = eq.estimate_drift_V(
            sphere256, state, constants256, params256, 2000,
            eq.RandomStream(9), with_samples=True,
        )
        cap = eq.potential_step_cap(constants256, params256)
        assert np.all(samples <= cap)
        assert est.n == 2000

    def test_minimum_n(self, sphere256, params256, constants256):
        with pytest.raises(eq.DomainError):
            eq.estimate_drift_V(
                sphere256, eq.default_initial_state(sphere256), constants256,
                params256, 500, eq.RandomStream(0),
            )


class TestEstimatorContracts:
    def test_bit_reproducibility(self):
        p = eq.make_problem(eq.ellipsoid(10, 3), 0)
        m = p.optimum + np.ones(10)
        a = eq.estimate_success_prob(p, m, 0.3, 5000, eq.RandomStream(55, (7,)))
        b = eq.estimate_success_prob(p, m, 0.3, 5000, eq.RandomStream(55, (7,)))
        assert a == b
        c = eq.estimate_log_progress(p, m, 0.3, 5000, eq.RandomStream(56))
        d = eq.estimate_log_progress(p, m, 0.3, 5000, eq.RandomStream(56))
        assert c == d

    def test_chunking_does_not_change_results(self, monkeypatch):
        p = eq.make_problem(eq.sphere(6), 0)
        m = p.optimum + np.ones(6)
        ref = eq.estimate_log_progress(p, m, 0.4, 3000, eq.RandomStream(77))
        monkeypatch.setattr(montecarlo, "_chunk_rows", lambda d: 17)
        alt = eq.estimate_log_progress(p, m, 0.4, 3000, eq.RandomStream(77))
        assert ref == alt

    def test_se_shrinks_like_sqrt_n(self):
        p = eq.make_problem(eq.sphere(8), 0)
        m = p.optimum + np.ones(8)
        ratios = []
        for k in range(10):
            a = eq.estimate_log_progress(
                p, m, 0.5, 4000, eq.RandomStream(100 + k)
            )
            b = eq.estimate_log_progress(
                p, m, 0.5, 8000, eq.RandomStream(200 + k)
            )
            ratios.append(a.std_error / b.std_error)
        mean_ratio = float(np.mean(ratios))
        assert abs(mean_ratio - math.sqrt(2.0)) < 0.2 * math.sqrt(2.0)

    def test_estimator_ids(self):
        p = eq.make_problem(eq.sphere(4), 0)
        m = p.optimum + np.ones(4)
        assert "antithetic" in eq.estimate_success_prob(
            p, m, 0.1, 100, eq.RandomStream(0)
        ).estimator_id
        assert eq.estimate_log_progress(
            p, m, 0.1, 100, eq.RandomStream(0)
        ).estimator_id.startswith("log_progress")
