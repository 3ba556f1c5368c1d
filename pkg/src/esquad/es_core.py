"""The (1+1)-ES with success-based step-size adaptation.

One parent, one offspring from an isotropic Gaussian, greedy selection with
ties accepted, and multiplicative step-size control: sigma is scaled by
``alpha_up`` on success and by ``alpha_down`` on failure.  The stationary
success probability of that control is
``p_target = log(1/alpha_down) / log(alpha_up/alpha_down)``.

Selection compares the untransformed quadratic core.  Every supported
transform is strictly increasing, so the decision is identical to comparing
transformed objective values, and the comparison stays well defined in the
log domain long after raw objective values leave double range.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DegenerateStart, NumericalFailure
from .ioutil import atomic_write_text, dump_json
from .quadratic import QuadraticProblem
from .stochastic import GENERATOR_ID, RandomStream, normal_matrix
from .version import VERSION

_LN2 = math.log(2.0)
# Rescale the internal frame when the working scale drifts this far from 1;
# pure powers of two keep the renormalization exact in floating point.
_RESCALE_LIMIT = 100
_BLOCK = 256


@dataclass(frozen=True)
class EsParams:
    """Step-size multipliers. Requires alpha_up > 1 > alpha_down > 0."""

    alpha_up: float
    alpha_down: float

    def __post_init__(self):
        if not (self.alpha_up > 1.0):
            raise ValueError("alpha_up must be > 1")
        if not (0.0 < self.alpha_down < 1.0):
            raise ValueError("alpha_down must be in (0, 1)")

    @property
    def log_up(self) -> float:
        return math.log(self.alpha_up)

    @property
    def log_down(self) -> float:
        return math.log(self.alpha_down)

    @property
    def log_ratio(self) -> float:
        """log(alpha_up / alpha_down) > 0."""
        return math.log(self.alpha_up / self.alpha_down)

    @property
    def p_target(self) -> float:
        return p_target(self)

    def to_json(self) -> dict:
        return {"alpha_up": self.alpha_up, "alpha_down": self.alpha_down}


def p_target(params: EsParams) -> float:
    """Success probability at which the expected log step size is stationary."""
    return math.log(1.0 / params.alpha_down) / params.log_ratio


def alpha_schedule(d: int, target: float = 0.2, c: float = 1.0) -> EsParams:
    """Dimension-scaled multipliers with an exact success target.

    alpha_up = exp(c/d) and alpha_down chosen so that p_target == target.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target must be in (0, 1)")
    return EsParams(
        alpha_up=math.exp(c / d),
        alpha_down=math.exp(-c * target / ((1.0 - target) * d)),
    )


@dataclass(frozen=True)
class EsState:
    """Algorithm state: search point m and log step size."""

    m: np.ndarray
    log_sigma: float

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).copy()
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        if not (np.all(np.isfinite(m)) and math.isfinite(self.log_sigma)):
            raise NumericalFailure("state must be finite")

    @property
    def sigma(self) -> float:
        return math.exp(self.log_sigma)


@dataclass(frozen=True)
class StepOutcome:
    next: EsState
    accepted: bool
    log_f_ratio: float  # log core(m') - log core(m); 0.0 when rejected


def step(state: EsState, z: np.ndarray, problem: QuadraticProblem, params: EsParams) -> StepOutcome:
    """One transition: sample x = m + sigma z, accept iff core(x) <= core(m)."""
    y = state.m - problem.optimum
    sigma = math.exp(state.log_sigma)
    cand = y + sigma * np.asarray(z, dtype=float)
    core_m = problem.core_centered(y)
    core_x = problem.core_centered(cand)
    if not (math.isfinite(core_m) and math.isfinite(core_x)):
        raise NumericalFailure("non-finite core evaluation in step")
    if core_x <= core_m:
        nxt = EsState(cand + problem.optimum, state.log_sigma + params.log_up)
        ratio = problem.log_core_centered(cand) - problem.log_core_centered(y)
        return StepOutcome(nxt, True, min(ratio, 0.0))
    nxt = EsState(state.m, state.log_sigma + params.log_down)
    return StepOutcome(nxt, False, 0.0)


@dataclass
class RunTrace:
    """Per-iteration record of a run.

    Row t holds the state after t steps; ``accepted[t]`` says whether the step
    from t-1 to t was accepted (row 0 carries 0).  ``log_f`` is the log of the
    untransformed core, tracked exactly even when the core itself would
    underflow a double.  ``log_norm`` is log ||m_t - x*||.  ``m_centered`` is
    recorded only on request.
    """

    t: np.ndarray
    log_f: np.ndarray
    log_sigma: np.ndarray
    accepted: np.ndarray
    log_norm: np.ndarray
    regime: Optional[List[str]] = None
    m_centered: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)
    hit_zero: bool = False

    def __len__(self) -> int:
        return int(self.t.size)

    def accept_count(self) -> int:
        return int(np.sum(self.accepted))

    def write_csv(self, path) -> None:
        """CSV with header t,log_f,log_sigma,accepted,regime plus a JSON sidecar."""
        rows = []
        for i in range(len(self)):
            rows.append(
                (
                    int(self.t[i]),
                    repr(float(self.log_f[i])),
                    repr(float(self.log_sigma[i])),
                    int(self.accepted[i]),
                    "" if self.regime is None else self.regime[i],
                )
            )
        text = "t,log_f,log_sigma,accepted,regime\n" + "".join(
            f"{r[0]},{r[1]},{r[2]},{r[3]},{r[4]}\n" for r in rows
        )
        atomic_write_text(path, text)
        atomic_write_text(str(path) + ".meta.json", dump_json(self.metadata))


def read_trace_csv(path) -> dict:
    """Parse a trace CSV back into column arrays (round-trip helper)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {"t": [], "log_f": [], "log_sigma": [], "accepted": [], "regime": []}
        for row in reader:
            cols["t"].append(int(row["t"]))
            cols["log_f"].append(float(row["log_f"]))
            cols["log_sigma"].append(float(row["log_sigma"]))
            cols["accepted"].append(int(row["accepted"]))
            cols["regime"].append(row["regime"])
    return {
        "t": np.array(cols["t"]),
        "log_f": np.array(cols["log_f"]),
        "log_sigma": np.array(cols["log_sigma"]),
        "accepted": np.array(cols["accepted"]),
        "regime": cols["regime"],
    }


def run(
    problem: QuadraticProblem,
    state0: EsState,
    params: EsParams,
    budget: int,
    stream: RandomStream,
    constants=None,
    record_m: bool = False,
) -> RunTrace:
    """Run the ES for ``budget`` steps and return the full trace.

    The internal state is kept centered at the optimum and renormalized by
    exact powers of two whenever its scale leaves [2**-100, 2**100]; the
    quadratic core is exactly scale-equivariant under that renormalization,
    so decisions are unaffected while log f is tracked far below the double
    underflow threshold.  The run halts early only if the core reaches an
    exact zero, which is flagged on the trace.

    When ``constants`` (a TheoryConstants bundle) is given, each row is also
    labeled with its step-size regime.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    y = np.asarray(state0.m, dtype=float) - problem.optimum
    if not np.any(y):
        raise DegenerateStart("run started exactly at the optimum")

    classify_logs = None
    run_stats = None
    if constants is not None:
        from .potential import classify_from_logs

        classify_logs = classify_from_logs
        run_stats = problem.stats()

    log_sigma = float(state0.log_sigma)
    scale_exp = 0  # actual vector = y * 2**scale_exp

    def rescaled(y, scale_exp):
        s = float(np.max(np.abs(y)))
        s = max(s, math.exp(log_sigma - scale_exp * _LN2))
        e = math.frexp(s)[1]  # s in [2**(e-1), 2**e)
        if abs(e) > _RESCALE_LIMIT:
            y = y * 2.0 ** float(-e)
            scale_exp += e
        return y, scale_exp

    y, scale_exp = rescaled(y, scale_exp)

    n_rows = budget + 1
    t_col = np.arange(n_rows)
    log_f = np.empty(n_rows)
    log_sig = np.empty(n_rows)
    accepted = np.zeros(n_rows, dtype=np.int8)
    log_norm = np.empty(n_rows)
    regimes: Optional[List[str]] = [] if classify_logs is not None else None
    m_hist = np.empty((n_rows, problem.d)) if record_m else None

    lam = problem.spectrum.eigenvalues
    diag = problem.rotation is None

    def core_of(vec):
        if diag:
            return 0.5 * float(np.dot(lam * vec, vec))
        return problem.core_centered(vec)

    core_y = core_of(y)
    cur_log_f = problem.log_core_centered(y) + 2.0 * scale_exp * _LN2
    cur_log_norm = _log_norm(y) + scale_exp * _LN2

    def record(i):
        log_f[i] = cur_log_f
        log_sig[i] = log_sigma
        log_norm[i] = cur_log_norm
        if regimes is not None:
            lg = problem.log_grad_norm_centered(y) + scale_exp * _LN2
            regimes.append(
                classify_logs(cur_log_f, lg, log_sigma, run_stats, constants).value
            )
        if m_hist is not None:
            m_hist[i] = y * 2.0**scale_exp

    record(0)
    hit_zero = False
    zbuf = None
    zi = _BLOCK
    steps_done = 0
    for t in range(1, n_rows):
        if zi >= _BLOCK:
            zbuf = normal_matrix(stream, _BLOCK, problem.d)
            zi = 0
        z = zbuf[zi]
        zi += 1
        sigma_hat = math.exp(log_sigma - scale_exp * _LN2)
        cand = y + sigma_hat * z
        core_c = core_of(cand)
        if not math.isfinite(core_c) or not math.isfinite(core_y):
            raise NumericalFailure(f"non-finite core at step {t}")
        if core_c <= core_y:
            y = cand
            core_y = core_c
            log_sigma += params.log_up
            accepted[t] = 1
            cur_log_f = problem.log_core_centered(y) + 2.0 * scale_exp * _LN2
            cur_log_norm = _log_norm(y) + scale_exp * _LN2
        else:
            log_sigma += params.log_down
        record(t)
        steps_done = t
        if core_y == 0.0:
            hit_zero = True
            break
        y, new_exp = rescaled(y, scale_exp)
        if new_exp != scale_exp:
            scale_exp = new_exp
            core_y = core_of(y)

    n_kept = steps_done + 1
    trace = RunTrace(
        t=t_col[:n_kept],
        log_f=log_f[:n_kept],
        log_sigma=log_sig[:n_kept],
        accepted=accepted[:n_kept],
        log_norm=log_norm[:n_kept],
        regime=regimes,
        m_centered=None if m_hist is None else m_hist[:n_kept],
        metadata={
            "version": VERSION,
            "generator_id": GENERATOR_ID,
            "seed": stream.seed,
            "path": list(stream.path),
            "params": params.to_json(),
            "problem": problem.to_json(),
            "budget": budget,
            "log_sigma0": state0.log_sigma,
            "hit_zero": hit_zero,
        },
        hit_zero=hit_zero,
    )
    return trace


def _log_norm(y: np.ndarray) -> float:
    mx = float(np.max(np.abs(y)))
    if mx == 0.0:
        return -math.inf
    s = y / mx
    return math.log(mx) + 0.5 * math.log(float(np.dot(s, s)))
