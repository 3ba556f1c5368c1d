"""One-step Monte Carlo estimators with standard errors.

Each estimator is a deterministic function of its inputs and the stream, so
reruns reproduce results bit-exactly.  Sampling is chunked to bound memory;
chunking does not change the sample set.  Success-probability estimation uses
antithetic pairs (z, -z), where the symmetry of the acceptance indicator
guarantees a variance reduction; the other estimators use plain sampling to
stay unbiased and simple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .bounds import TheoryConstants
from .errors import DegenerateState, DomainError
from .es_core import EsParams
from .potential import potential_from_logs
from .quadratic import QuadraticProblem
from .stochastic import RandomStream, normal_matrix


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n: int
    estimator_id: str


def _chunk_rows(d: int) -> int:
    return max(1, 4_000_000 // d)


def _centered(problem: QuadraticProblem, m) -> np.ndarray:
    y = np.asarray(m, dtype=float) - problem.optimum
    if not np.any(y):
        raise DegenerateState("m coincides with the optimum")
    return y


def _mean_se(values: np.ndarray) -> Tuple[float, float]:
    n = values.size
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(n))


def estimate_success_prob(
    problem: QuadraticProblem, m, sigma: float, n: int, stream: RandomStream
) -> McEstimate:
    """Pr[f(m + sigma z) <= f(m)] by antithetic sampling.

    n is rounded up to an even count; the standard error is computed over the
    n/2 antithetic pair means.
    """
    if n < 100:
        raise DomainError("estimate_success_prob requires n >= 100")
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    y = _centered(problem, m)
    core_m = problem.core_centered(y)
    pairs = (n + 1) // 2
    chunk = _chunk_rows(problem.d)
    pair_means = np.empty(pairs)
    done = 0
    while done < pairs:
        k = min(chunk, pairs - done)
        Z = normal_matrix(stream, k, problem.d)
        plus = problem.core_centered_batch(y + sigma * Z) <= core_m
        minus = problem.core_centered_batch(y - sigma * Z) <= core_m
        pair_means[done : done + k] = 0.5 * (plus + minus)
        done += k
    mean, se = _mean_se(pair_means)
    return McEstimate(mean, se, 2 * pairs, "success_prob/antithetic-v1")


def _log_ratio_and_accept(problem, y, core_m, sigma, k, stream):
    Z = normal_matrix(stream, k, problem.d)
    core_x = problem.core_centered_batch(y + sigma * Z)
    accept = core_x <= core_m
    ratio = core_x / core_m
    return ratio, accept


def estimate_log_progress(
    problem: QuadraticProblem, m, sigma: float, n: int, stream: RandomStream
) -> McEstimate:
    """E[log(f(m + sigma z) / f(m)) * 1{accept}]; nonpositive by construction."""
    if n < 100:
        raise DomainError("estimate_log_progress requires n >= 100")
    y = _centered(problem, m)
    core_m = problem.core_centered(y)
    chunk = _chunk_rows(problem.d)
    vals = np.empty(n)
    done = 0
    while done < n:
        k = min(chunk, n - done)
        ratio, accept = _log_ratio_and_accept(problem, y, core_m, sigma, k, stream)
        with np.errstate(divide="ignore"):
            vals[done : done + k] = np.where(
                accept, np.log(np.maximum(ratio, 0.0)), 0.0
            )
        done += k
    mean, se = _mean_se(vals)
    return McEstimate(mean, se, n, "log_progress/plain-v1")


def estimate_exp_abs(
    problem: QuadraticProblem, m, sigma: float, n: int, stream: RandomStream
) -> McEstimate:
    """E[exp(|log f-ratio| * 1{accept})]; rejected samples contribute exactly 1."""
    if n < 1000:
        raise DomainError("estimate_exp_abs requires n >= 1000")
    y = _centered(problem, m)
    core_m = problem.core_centered(y)
    chunk = _chunk_rows(problem.d)
    vals = np.empty(n)
    done = 0
    while done < n:
        k = min(chunk, n - done)
        ratio, accept = _log_ratio_and_accept(problem, y, core_m, sigma, k, stream)
        with np.errstate(divide="ignore"):
            vals[done : done + k] = np.where(accept, 1.0 / ratio, 1.0)
        done += k
    mean, se = _mean_se(vals)
    return McEstimate(mean, se, n, "exp_abs/plain-v1")


def estimate_drift_V(
    problem: QuadraticProblem,
    state,
    constants: TheoryConstants,
    params: EsParams,
    n: int,
    stream: RandomStream,
    with_samples: bool = False,
):
    """E[V(next) - V(current)] for one step from the given state.

    With ``with_samples=True`` also returns the raw sample array, which the
    pathwise-bound checks need.
    """
    if n < 1000:
        raise DomainError("estimate_drift_V requires n >= 1000")
    y = _centered(problem, state.m)
    stats = problem.stats()
    core_m = problem.core_centered(y)
    log_f = problem.log_core_centered(y)
    sigma = math.exp(state.log_sigma)
    v_now = float(potential_from_logs(log_f, state.log_sigma, stats, constants))
    chunk = _chunk_rows(problem.d)
    samples = np.empty(n)
    done = 0
    while done < n:
        k = min(chunk, n - done)
        ratio, accept = _log_ratio_and_accept(problem, y, core_m, sigma, k, stream)
        with np.errstate(divide="ignore"):
            log_f_next = np.where(
                accept, log_f + np.log(np.maximum(ratio, 0.0)), log_f
            )
        log_sigma_next = state.log_sigma + np.where(
            accept, params.log_up, params.log_down
        )
        v_next = potential_from_logs(log_f_next, log_sigma_next, stats, constants)
        samples[done : done + k] = v_next - v_now
        done += k
    mean, se = _mean_se(samples)
    est = McEstimate(mean, se, n, "drift_V/plain-v1")
    if with_samples:
        return est, samples
    return est
