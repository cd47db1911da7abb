"""Closed-form decision functions for the Rooney Rule under multiplicative bias.

Throughout, ``a = 1/(1+delta)``, ``b = delta/(1+delta)`` and
``c = alpha * beta^-(1+delta)`` is the effective weight of the X pool after the
committee divides every X potential by ``beta``. ``beta = inf`` is allowed
everywhere and gives ``c = 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, MultiCrossing, NumericError
from .powerlaw import check_delta, gen_binomial

SERIES_REL_TOL = 1e-14
SERIES_MAX_TERMS = 10**6
SERIES_CHUNK = 4096
# Below this c the tail series needs >4e4 terms; switch to the incomplete-beta identity.
SERIES_MIN_C = 1e-3

BISECT_TOL = 1e-9
BISECT_MAX_ITER = 200
BETA_CEILING = 1e300


class Marker(enum.Enum):
    """Non-numeric outcomes of a threshold search."""

    NO_THRESHOLD = "no-threshold"
    MULTI_CROSSING = "multi-crossing"


NoThreshold = Marker.NO_THRESHOLD


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


def check_beta(beta: float, allow_one: bool = False) -> float:
    beta = float(beta)
    ok = beta >= 1 if allow_one else beta > 1
    if not ok or math.isnan(beta):
        bound = ">= 1" if allow_one else "> 1"
        raise DomainError(f"beta must be {bound} (or inf), got {beta}")
    return beta


def check_k(k: int, minimum: int = 2) -> int:
    if int(k) != k or k < minimum:
        raise DomainError(f"k must be an integer >= {minimum}, got {k}")
    return int(k)


def effective_weight(alpha: float, beta: float, delta: float) -> float:
    """c = alpha * beta^-(1+delta); exactly 0 for infinite bias."""
    if math.isinf(beta):
        return 0.0
    return math.exp(math.log(alpha) - (1.0 + delta) * math.log(beta))


@dataclass(frozen=True)
class ModelParams:
    """One selection instance: n Y-candidates, round(alpha*n) X-candidates, k finalists."""

    alpha: float
    beta: float
    delta: float
    k: int
    n: int

    def __post_init__(self):
        check_alpha(self.alpha)
        check_beta(self.beta, allow_one=True)
        check_delta(self.delta)
        check_k(self.k, minimum=1)
        if self.n < 1 or int(self.n) != self.n:
            raise DomainError(f"n must be a positive integer, got {self.n}")

    @property
    def c(self) -> float:
        return effective_weight(self.alpha, self.beta, self.delta)

    @property
    def n_x(self) -> int:
        return x_pool_size(self.alpha, self.n)


def x_pool_size(alpha: float, n: int) -> int:
    """round(alpha*n), half up, at least 1."""
    return max(1, int(math.floor(alpha * n + 0.5)))


def phi2(alpha: float, beta: float, delta: float) -> float:
    """Asymptotic ratio deciding the k = 2 case: the rule helps iff this exceeds 1."""
    alpha = check_alpha(alpha)
    beta = check_beta(beta)
    delta = check_delta(delta)
    a = 1.0 / (1.0 + delta)
    b = delta / (1.0 + delta)
    c = effective_weight(alpha, beta, delta)
    if c == 0.0:
        return alpha**a / b
    num = 1.0 - (1.0 + 1.0 / c) ** (-b) * (1.0 + b / (1.0 + c))
    den = b * (1.0 + c) ** (-1.0 - b)
    return alpha**a * num / den


def phi_limit(alpha: float, delta: float, k: int) -> float:
    """phi_k as beta -> inf: alpha^a / C(k-1-a, k-1)."""
    a = 1.0 / (1.0 + delta)
    return alpha**a / gen_binomial(k - 1 - a, k - 1)


def _log_prefactor(alpha, delta, k, c):
    a = 1.0 / (1.0 + delta)
    b = 1.0 - a
    return (
        a * math.log(alpha)
        + b * math.log(c)
        + special.gammaln(k)
        + special.gammaln(b)
        - special.gammaln(k - a)
        - math.log1p(c)
    )


def tail_series(k: int, delta: float, c: float, max_terms: int = SERIES_MAX_TERMS) -> float:
    """sum_{j>=0} C(j+k-a, j+k) (1+c)^-j, summed until the remainder is negligible.

    Terms are positive and decay at least geometrically with ratio 1/(1+c), so the
    remainder after a term t is below t*(1+c)/c; summation stops once that bound
    drops under ``SERIES_REL_TOL`` times the partial sum.
    """
    if not c > 0:
        raise DomainError("tail series diverges at c = 0")
    a = 1.0 / (1.0 + delta)
    log_x = -math.log1p(c)
    geometric_tail = (1.0 + c) / c
    log_t0 = special.gammaln(k + 1 - a) - special.gammaln(k + 1) - special.gammaln(1 - a)
    # geometric decay alone bounds the number of terms needed
    expected = math.log(geometric_tail / SERIES_REL_TOL) / -log_x
    chunk = int(min(SERIES_CHUNK, max(64, expected + 16)))
    total = 0.0
    start = 0
    log_t = log_t0
    while start < max_terms:
        j = np.arange(start, start + chunk, dtype=float)
        # log of t_{j+1}/t_j for j in this chunk
        log_ratio = np.log((j + k + 1 - a) / (j + k + 1)) + log_x
        log_terms = log_t + np.concatenate(([0.0], np.cumsum(log_ratio[:-1])))
        terms = np.exp(log_terms)
        partial = np.cumsum(terms) + total
        done = np.nonzero(terms * geometric_tail < SERIES_REL_TOL * partial)[0]
        if done.size:
            return float(partial[done[0]])
        total = float(partial[-1])
        log_t = float(log_terms[-1] + log_ratio[-1])
        start += chunk
    raise NumericError(f"tail series did not settle within {max_terms} terms", partial=total)


def phi_k_series(alpha: float, beta: float, delta: float, k: int) -> float:
    """phi_k through the all-positive tail series."""
    c = effective_weight(alpha, beta, delta)
    return math.exp(_log_prefactor(alpha, delta, k, c)) * tail_series(k, delta, c)


def phi_k_bracket(alpha: float, beta: float, delta: float, k: int) -> float:
    """phi_k through the finite-sum bracket; loses digits to cancellation for large k."""
    a = 1.0 / (1.0 + delta)
    b = 1.0 - a
    c = effective_weight(alpha, beta, delta)
    if c == 0.0:
        return phi_limit(alpha, delta, k)
    head = math.fsum(gen_binomial(j - a, j) * (1.0 + c) ** (-j) for j in range(k))
    bracket = (1.0 + 1.0 / c) ** b - head
    return alpha**a * c**b * (1.0 + c) ** (k - 1) / gen_binomial(k - 1 - a, k - 1) * bracket


def phi_k_betainc(alpha: float, beta: float, delta: float, k: int) -> float:
    """phi_k through the negative-binomial tail: the series equals (1-x)^-b I_x(k, b), x = 1/(1+c)."""
    a = 1.0 / (1.0 + delta)
    b = 1.0 - a
    c = effective_weight(alpha, beta, delta)
    if c == 0.0:
        return phi_limit(alpha, delta, k)
    # I_x(k, b) = 1 - I_(1-x)(b, k); 1 - x = c/(1+c) keeps c visible when 1/(1+c) rounds to 1
    tail = special.betaincc(b, k, c / (1.0 + c))
    return alpha**a * (1.0 + c) ** (k - 1 + b) * tail / gen_binomial(k - 1 - a, k - 1)


def phi_k(alpha: float, beta: float, delta: float, k: int) -> float:
    """Asymptotic ratio deciding whether the rule raises expected utility for k finalists."""
    alpha = check_alpha(alpha)
    beta = check_beta(beta)
    delta = check_delta(delta)
    k = check_k(k)
    c = effective_weight(alpha, beta, delta)
    if c == 0.0:
        return phi_limit(alpha, delta, k)
    if c < SERIES_MIN_C:
        return phi_k_betainc(alpha, beta, delta, k)
    return phi_k_series(alpha, beta, delta, k)


def improves(value: float, tol: float = 0.0) -> bool:
    """Classify a phi value; the conditions are strict, so ``tol`` defaults to 0."""
    return value > 1.0 + tol


def infinite_bias_positive(alpha: float, delta: float) -> bool:
    """Under infinite bias the rule helps iff alpha > (delta/(1+delta))^(1+delta)."""
    alpha = check_alpha(alpha)
    delta = check_delta(delta)
    return alpha > (delta / (1.0 + delta)) ** (1.0 + delta)


def infinite_bias_boundary(delta: float) -> float:
    delta = check_delta(delta)
    return (delta / (1.0 + delta)) ** (1.0 + delta)


def _phi(alpha, beta, delta, k):
    return phi2(alpha, beta, delta) if k == 2 else phi_k(alpha, beta, delta, k)


def beta_star(alpha: float, delta: float, k: int = 2, grid_points: int = 64):
    """Smallest bias above which phi_k exceeds 1, or ``NoThreshold``.

    Brackets by doubling log(beta) and then bisects on log(beta) until
    |phi_k - 1| <= 1e-9. For k > 2 the bracket is first scanned on a geometric grid
    and ``MultiCrossing`` is raised if phi_k is not monotone there.
    """
    alpha = check_alpha(alpha)
    delta = check_delta(delta)
    k = check_k(k)
    if phi_limit(alpha, delta, k) <= 1.0:
        return NoThreshold

    lo = 1.0
    if _phi(alpha, math.nextafter(1.0, 2.0), delta, k) > 1.0:
        return 1.0
    hi = 2.0
    while _phi(alpha, hi, delta, k) <= 1.0:
        lo, hi = hi, hi * hi
        if hi > BETA_CEILING:
            # phi creeps toward a limit barely above 1; threshold beyond float range
            return NoThreshold

    if k > 2:
        grid = np.geomspace(1.0 + 1e-9, hi, grid_points)
        values = np.array([_phi(alpha, g, delta, k) for g in grid])
        if np.any(np.diff(values) < -1e-12 * np.abs(values[1:])):
            raise MultiCrossing(f"phi_{k} not monotone in beta for alpha={alpha}, delta={delta}")

    log_lo, log_hi = math.log(lo), math.log(hi)
    mid = hi
    for _ in range(BISECT_MAX_ITER):
        mid = math.exp(0.5 * (log_lo + log_hi))
        value = _phi(alpha, mid, delta, k)
        if abs(value - 1.0) <= BISECT_TOL:
            return mid
        if value > 1.0:
            log_hi = math.log(mid)
        else:
            log_lo = math.log(mid)
        if log_hi - log_lo <= 4 * np.finfo(float).eps * max(1.0, abs(log_hi)):
            break
    return mid


def prob_rule_binds(alpha: float, beta: float, delta: float, k: int) -> float:
    """Asymptotic probability that the biased top k holds no X-candidate: (1+c)^-k."""
    alpha = check_alpha(alpha)
    beta = check_beta(beta, allow_one=True)
    delta = check_delta(delta)
    k = check_k(k, minimum=1)
    c = effective_weight(alpha, beta, delta)
    return (1.0 + c) ** (-k)


def prob_positive_given_change(alpha: float, beta: float, delta: float, k: int) -> float:
    """Probability that a forced swap raises utility, given that the rule binds."""
    alpha = check_alpha(alpha)
    beta = check_beta(beta, allow_one=True)
    delta = check_delta(delta)
    k = check_k(k, minimum=1)
    c = effective_weight(alpha, beta, delta)
    return 1.0 - ((1.0 + c) / (1.0 + alpha)) ** k
