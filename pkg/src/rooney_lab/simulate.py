"""Seeded Monte Carlo of biased selection with and without the Rooney Rule.

Randomness is a pure function of ``(seed, index)``: a single trial draws from
``SeedSequence(seed, spawn_key=(trial_index,))`` and the vectorized engine draws
block ``b`` (``BLOCK_TRIALS`` consecutive trials) from
``SeedSequence(seed, spawn_key=(BATCH_DOMAIN, b))``. Blocks are reduced in index
order, so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, EmptyConditioningEvent, InsufficientConditioningEvents
from .rooney import ModelParams

BLOCK_TRIALS = 1 << 14
BATCH_DOMAIN = 0x5EED
MIN_TRIALS = 1000
MOM_BLOCKS = math.ceil(math.log(1 / 0.01)) * 8
# asymptotic sd of a sample median relative to the mean, sqrt(pi/2)
_MEDIAN_SE_FACTOR = math.sqrt(math.pi / 2)


@dataclass(frozen=True)
class Candidate:
    group: str  # "X" or "Y"
    potential: float


@dataclass(frozen=True)
class TrialOutcome:
    finalists_unconstrained: tuple[Candidate, ...]
    finalists_ruled: tuple[Candidate, ...]
    utility_unconstrained: float
    utility_ruled: float
    rule_bound: bool


@dataclass(frozen=True)
class EstimatorReport:
    point_estimate: float
    std_error: float
    trials: int
    estimator_kind: str  # "mean" or "median-of-means"
    events: int = 0  # trials inside the conditioning event

    def ci(self, z: float = 1.96) -> tuple[float, float]:
        return self.point_estimate - z * self.std_error, self.point_estimate + z * self.std_error

    def as_dict(self) -> dict:
        lo, hi = self.ci()
        return {
            "point_estimate": self.point_estimate,
            "std_error": self.std_error,
            "trials": self.trials,
            "estimator_kind": self.estimator_kind,
            "events": self.events,
            "ci95": [lo, hi],
        }


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial_index,)))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(BATCH_DOMAIN, block)))


def _pareto(rng, size, delta):
    # 1 - random() lies in (0, 1], so the draw is always finite and >= 1
    return np.exp(-np.log1p(-rng.random(size)) / (1.0 + delta))


def _check_pools(params: ModelParams, ell: int):
    if ell < 1:
        raise DomainError(f"ell must be >= 1, got {ell}")
    if params.n_x < ell:
        raise DomainError(f"X pool round(alpha*n)={params.n_x} smaller than ell={ell}")
    if not params.n >= params.k >= ell:
        raise DomainError(f"need n >= k >= ell, got n={params.n}, k={params.k}, ell={ell}")


def _top_indices(perceived: np.ndarray, is_x: np.ndarray, k: int) -> np.ndarray:
    """Indices of the biased top k, best first; ties go to Y-candidates."""
    total = perceived.size
    if k < total:
        part = np.argpartition(-perceived, k - 1)
        cut = perceived[part[k - 1]]
        # everything tied with the cut value competes for the last seats
        pool = np.nonzero(perceived >= cut)[0]
    else:
        pool = np.arange(total)
    order = np.lexsort((is_x[pool], -perceived[pool]))
    return pool[order][:k]


def run_trial(params: ModelParams, ell: int = 1, seed: int = 0, trial_index: int = 0) -> TrialOutcome:
    """Draw one committee, rank by perceived value, apply the rule with ``ell`` reserved seats.

    ``ell > 1`` is plumbing for the generalized rule and has no closed-form counterpart.
    """
    _check_pools(params, ell)
    rng = trial_rng(seed, trial_index)
    y = _pareto(rng, params.n, params.delta)
    x = _pareto(rng, params.n_x, params.delta)
    values = np.concatenate((y, x))
    is_x = np.concatenate((np.zeros(params.n, bool), np.ones(params.n_x, bool)))
    perceived = np.concatenate((y, x / params.beta))

    top = _top_indices(perceived, is_x, params.k)
    ruled = list(top)
    missing = ell - int(is_x[top].sum())
    if missing > 0:
        in_top = np.zeros(values.size, bool)
        in_top[top] = True
        x_idx = np.nonzero(is_x & ~in_top)[0]
        best_x = x_idx[np.lexsort((x_idx, -perceived[x_idx]))][:missing]
        # lowest-ranked Y finalists give up their seats
        y_seats = [pos for pos in range(len(ruled)) if not is_x[ruled[pos]]][::-1][:missing]
        for pos, i in zip(sorted(y_seats), best_x):
            ruled[pos] = int(i)
        # keep ruled finalists listed in perceived order
        ruled = sorted(ruled, key=lambda i: (-perceived[i], bool(is_x[i])))

    def pack(idx):
        return tuple(Candidate("X" if is_x[i] else "Y", float(values[i])) for i in idx)

    return TrialOutcome(
        finalists_unconstrained=pack(top),
        finalists_ruled=pack(ruled),
        utility_unconstrained=math.fsum(values[top]),
        utility_ruled=math.fsum(values[ruled]),
        rule_bound=missing > 0,
    )


def _block_draws(params: ModelParams, seed: int, block: int, size: int, method: str):
    """Per-trial (top X potential, k-th best Y potential) for one block."""
    rng = block_rng(seed, block)
    a = 1.0 / (1.0 + params.delta)
    n, k, n_x = params.n, params.k, params.n_x
    if method == "topk":
        # smallest k of n uniforms, built up through log(1 - U_(j))
        steps = np.log(rng.random((size, k)) + np.finfo(float).tiny)
        steps /= n - np.arange(k)
        u_k = -np.expm1(steps.sum(axis=1))
        y_k = u_k ** (-a)
        u_x = -np.expm1(np.log(rng.random(size) + np.finfo(float).tiny) / n_x)
        x_max = u_x ** (-a)
    elif method == "full":
        y = _pareto(rng, (size, n), params.delta)
        y_k = -np.partition(-y, k - 1, axis=1)[:, k - 1]
        x_max = _pareto(rng, (size, n_x), params.delta).max(axis=1)
    else:
        raise DomainError(f"unknown sampling method {method!r}")
    return x_max, y_k


def simulate_draws(
    params: ModelParams, trials: int, seed: int = 0, threads: int = 1, method: str = "topk"
):
    """Vectorized draws for ``trials`` committees.

    Returns ``(x_max, y_k, bound)``: the best X potential, the k-th best Y potential
    and whether the biased top k holds no X-candidate. ``method="topk"`` samples
    the needed order statistics exactly through uniform spacings; ``"full"`` draws
    every candidate and partially sorts.
    """
    if trials < 1:
        raise DomainError("trials must be positive")
    _check_pools(params, 1)
    blocks = [(b, min(BLOCK_TRIALS, trials - b * BLOCK_TRIALS)) for b in range(-(-trials // BLOCK_TRIALS))]

    def work(item):
        return _block_draws(params, seed, item[0], item[1], method)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(item) for item in blocks]
    x_max = np.concatenate([p[0] for p in parts])
    y_k = np.concatenate([p[1] for p in parts])
    if math.isinf(params.beta):
        bound = np.ones(trials, bool)
    else:
        bound = x_max <= params.beta * y_k
    return x_max, y_k, bound


def _require_trials(trials):
    if trials < MIN_TRIALS:
        raise DomainError(f"need at least {MIN_TRIALS} trials, got {trials}")


def default_estimator(delta: float) -> str:
    return "median-of-means" if delta <= 1 else "mean"


def ratio_estimate(num: np.ndarray, den: np.ndarray, kind: str) -> tuple[float, float]:
    """Ratio of means with its standard error.

    ``mean`` uses the delta method; ``median-of-means`` takes the median of
    ``MOM_BLOCKS`` contiguous block ratios and scales their spread.
    """
    t = num.size
    if kind == "mean":
        r = num.sum() / den.sum()
        resid = num - r * den
        se = math.sqrt(resid.var(ddof=1) / t) / den.mean()
        return float(r), float(se)
    if kind == "median-of-means":
        edges = np.linspace(0, t, MOM_BLOCKS + 1).astype(int)
        nums = np.add.reduceat(num, edges[:-1])
        dens = np.add.reduceat(den, edges[:-1])
        if np.any(dens == 0):
            raise InsufficientConditioningEvents("a median-of-means block saw no binding trial")
        ratios = nums / dens
        se = _MEDIAN_SE_FACTOR * ratios.std(ddof=1) / math.sqrt(MOM_BLOCKS)
        return float(np.median(ratios)), float(se)
    raise DomainError(f"unknown estimator kind {kind!r}")


def _rk_report(draws, trials, kind):
    x_max, y_k, bound = draws
    events = int(bound.sum())
    if events == 0:
        raise InsufficientConditioningEvents("the rule never bound; raise trials or beta")
    r, se = ratio_estimate(np.where(bound, x_max, 0.0), np.where(bound, y_k, 0.0), kind)
    return EstimatorReport(r, se, trials, kind, events)


def _prob_positive_report(draws, trials):
    x_max, y_k, bound = draws
    events = int(bound.sum())
    if events == 0:
        raise InsufficientConditioningEvents("the rule never bound; raise trials or beta")
    p = float((x_max[bound] > y_k[bound]).mean())
    return EstimatorReport(p, math.sqrt(p * (1 - p) / events), trials, "mean", events)


def _bind_rate_report(draws, trials):
    bound = draws[2]
    p = float(bound.mean())
    return EstimatorReport(p, math.sqrt(p * (1 - p) / trials), trials, "mean", int(bound.sum()))


def _utility_change_report(draws, trials):
    x_max, y_k, bound = draws
    events = int(bound.sum())
    if events < 2:
        raise InsufficientConditioningEvents("fewer than two binding trials")
    d = x_max[bound] - y_k[bound]
    return EstimatorReport(float(d.mean()), float(d.std(ddof=1) / math.sqrt(events)), trials, "mean", events)


def estimate_rk(
    params: ModelParams,
    trials: int,
    estimator_kind: str | None = None,
    seed: int = 0,
    threads: int = 1,
    method: str = "topk",
) -> EstimatorReport:
    """Monte Carlo r_k: indicator-weighted mean of the top X over that of the k-th Y."""
    _require_trials(trials)
    kind = estimator_kind or default_estimator(params.delta)
    return _rk_report(simulate_draws(params, trials, seed, threads, method), trials, kind)


def estimate_prob_positive(
    params: ModelParams, trials: int, seed: int = 0, threads: int = 1, method: str = "topk"
) -> EstimatorReport:
    """Frequency of a utility gain among trials where the rule binds."""
    _require_trials(trials)
    return _prob_positive_report(simulate_draws(params, trials, seed, threads, method), trials)


def estimate_bind_rate(
    params: ModelParams, trials: int, seed: int = 0, threads: int = 1, method: str = "topk"
) -> EstimatorReport:
    """Fraction of trials in which the biased top k holds no X-candidate."""
    _require_trials(trials)
    return _bind_rate_report(simulate_draws(params, trials, seed, threads, method), trials)


def estimate_utility_change(
    params: ModelParams, trials: int, seed: int = 0, threads: int = 1, method: str = "topk"
) -> EstimatorReport:
    """Mean of utility_ruled - utility_unconstrained over binding trials."""
    _require_trials(trials)
    return _utility_change_report(simulate_draws(params, trials, seed, threads, method), trials)


def summarize(
    params: ModelParams,
    trials: int,
    estimator_kind: str | None = None,
    seed: int = 0,
    threads: int = 1,
    method: str = "topk",
) -> dict[str, EstimatorReport]:
    """All four estimators computed from a single set of draws."""
    _require_trials(trials)
    kind = estimator_kind or default_estimator(params.delta)
    draws = simulate_draws(params, trials, seed, threads, method)
    return {
        "rk": _rk_report(draws, trials, kind),
        "prob_positive": _prob_positive_report(draws, trials),
        "bind_rate": _bind_rate_report(draws, trials),
        "utility_change": _utility_change_report(draws, trials),
    }


def cond_exp_filtered_discrete(support: Sequence[float], weights: Sequence[float], beta: float) -> float:
    """Exact E[X | X > beta Y] for X, Y i.i.d. on a finite support."""
    if len(support) == 0 or len(support) != len(weights):
        raise DomainError("support must be nonempty and match weights in length")
    if any(w < 0 for w in weights) or abs(math.fsum(weights) - 1.0) > 1e-12:
        raise DomainError("weights must be a probability vector")
    mass = []
    moment = []
    for x, wx in zip(support, weights):
        for y, wy in zip(support, weights):
            if x > beta * y:
                mass.append(wx * wy)
                moment.append(x * wx * wy)
    total = math.fsum(mass)
    if total == 0.0:
        raise EmptyConditioningEvent(f"Pr[X > {beta} Y] = 0")
    return math.fsum(moment) / total


@dataclass(frozen=True)
class BoundedModel:
    """Candidate law on [0, 1] with a bias map capped at ``bias_cap < 1``.

    ``sampler`` is the inverse cdf and must accept numpy arrays.
    """

    cdf: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.ndarray], np.ndarray]
    bias_map: Callable[[np.ndarray], np.ndarray]
    bias_cap: float
    name: str = "custom"

    def __post_init__(self):
        if not self.bias_cap < 1:
            raise DomainError(f"bias cap must be < 1, got {self.bias_cap}")


def _linear_bias(scale):
    return lambda x: scale * np.asarray(x)


def uniform_model(bias_scale: float) -> BoundedModel:
    """Uniform[0, 1] potentials perceived as ``bias_scale * x``."""
    if not 0 <= bias_scale < 1:
        raise DomainError(f"bias scale must lie in [0, 1), got {bias_scale}")
    return BoundedModel(
        cdf=lambda x: np.clip(x, 0.0, 1.0),
        sampler=lambda u: np.asarray(u),
        bias_map=_linear_bias(bias_scale),
        bias_cap=bias_scale,
        name="uniform",
    )


def triangular_model(bias_scale: float) -> BoundedModel:
    """Density 2x on [0, 1] (cdf x^2), perceived as ``bias_scale * x``."""
    if not 0 <= bias_scale < 1:
        raise DomainError(f"bias scale must lie in [0, 1), got {bias_scale}")
    return BoundedModel(
        cdf=lambda x: np.clip(x, 0.0, 1.0) ** 2,
        sampler=lambda u: np.sqrt(u),
        bias_map=_linear_bias(bias_scale),
        bias_cap=bias_scale,
        name="triangular",
    )


BOUNDED_FAMILIES = {"uniform": uniform_model, "triangular": triangular_model}


def _bounded_block(model, n, seed, block, size):
    rng = block_rng(seed, block)
    # top uniform order statistics: U_(n) = V1^(1/n), U_(n-1) = U_(n) V2^(1/(n-1))
    log_v = np.log(rng.random((size, 3)) + np.finfo(float).tiny)
    u_x = np.exp(log_v[:, 0] / n)
    u_y1 = np.exp(log_v[:, 1] / n)
    u_y2 = u_y1 * np.exp(log_v[:, 2] / (n - 1))
    return model.sampler(u_x), model.sampler(u_y2)


def bounded_experiment(
    model: BoundedModel, n: int, trials: int, seed: int = 0, threads: int = 1
) -> EstimatorReport:
    """Estimate E[X_(n:n) - Y_(n-1:n) | b(X_(n:n)) < Y_(n-1:n)] with equal pools (k = 2)."""
    _require_trials(trials)
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    blocks = [(b, min(BLOCK_TRIALS, trials - b * BLOCK_TRIALS)) for b in range(-(-trials // BLOCK_TRIALS))]

    def work(item):
        return _bounded_block(model, n, seed, item[0], item[1])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(item) for item in blocks]
    x_top = np.concatenate([p[0] for p in parts])
    y_second = np.concatenate([p[1] for p in parts])
    g = model.bias_map(x_top) < y_second
    events = int(g.sum())
    if events < 2:
        raise InsufficientConditioningEvents("the conditioning event G was (almost) never observed")
    d = x_top[g] - y_second[g]
    return EstimatorReport(float(d.mean()), float(d.std(ddof=1) / math.sqrt(events)), trials, "mean", events)
