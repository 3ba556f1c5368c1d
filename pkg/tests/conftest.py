import math

import numpy as np
import pytest

import esquad as eq


@pytest.fixture(scope="session")
def sphere256():
    return eq.make_problem(eq.sphere(256), 0)


@pytest.fixture(scope="session")
def params256():
    # p_target = 0.4: the smallest round target for which the theory
    # constants are feasible at d = 256 (feasibility needs q_low > ~0.37).
    return eq.alpha_schedule(256, 0.4)


@pytest.fixture(scope="session")
def constants256(sphere256, params256):
    return eq.constants(eq.spectrum_stats(sphere256), params256)


def random_problem(rng: np.random.Generator, d: int, cond: float = None):
    """Random diagonal problem with log-uniform spectrum and random optimum."""
    if cond is None:
        cond = math.exp(rng.uniform(0.0, 3.0))
    lam = np.exp(rng.uniform(0.0, math.log(cond), size=d))
    lam[0] = cond
    lam[-1] = 1.0
    opt = rng.normal(size=d)
    return eq.make_problem(lam, opt)
