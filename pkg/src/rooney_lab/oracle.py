"""Exact finite-n expectations by adaptive quadrature.

All integrals are taken in uniform space. With ``u = z^-(1+delta)`` each Pareto
draw maps to a Uniform(0, 1) variate and the order is reversed, so the
(n-k+1)-th smallest Y is the k-th smallest uniform, ``U_(k:n) ~ Beta(k, n-k+1)``,
and the largest of the ``A = round(alpha*n)`` X-draws has cdf
``Pr{X_(A:A) <= t} = (1 - t^-(1+delta))^A``.

The moments carry an integrable ``u^-a`` singularity at 0 (``a = 1/(1+delta)``).
QUADPACK extrapolation misjudges it when a breakpoint sits just to its right, so
those integrals are taken in ``t = u^(1-a)``, where ``u^-a du = dt/(1-a)`` and the
integrand is bounded. Beta(k, n-k+1) puts its mass near k/n, so the interval is
split at Beta quantiles before handing pieces to QUADPACK.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .errors import DomainError, NumericError
from .powerlaw import check_delta, expected_max
from .rooney import check_alpha, check_beta, x_pool_size

REL_TOL = 1e-9
ABS_TOL = 0.0
QUAD_LIMIT = 200
_SPLIT_PROBS = (1e-3, 0.05, 0.5, 0.95, 1 - 1e-3)


@dataclass(frozen=True)
class ConditionalMoment:
    value: float
    estimated_abs_error: float

    def __float__(self):
        return self.value


def _validate(n, k, alpha, beta, delta):
    alpha = check_alpha(alpha)
    beta = check_beta(beta, allow_one=True)
    delta = check_delta(delta)
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k}")
    if int(n) != n or n < k:
        raise DomainError(f"need integer n >= k, got n={n}, k={k}")
    return int(n), int(k), alpha, beta, delta


def _breakpoints(k, n, lo=0.0, hi=1.0):
    qs = stats.beta.ppf(_SPLIT_PROBS, k, n - k + 1)
    pts = np.unique(np.concatenate(([lo], qs[(qs > lo) & (qs < hi)], [hi])))
    return pts


def _integrate(f, points, what):
    total = 0.0
    err = 0.0
    warnings = []
    for left, right in zip(points[:-1], points[1:]):
        out = integrate.quad(
            f, left, right, epsabs=ABS_TOL, epsrel=REL_TOL, limit=QUAD_LIMIT, full_output=1
        )
        total += out[0]
        err += out[1]
        if len(out) > 3:
            warnings.append(out[3])
    # QUADPACK flags roundoff on pieces that are already negligible or converged to
    # ~1e-15; only a loose overall error bound counts as failure
    if warnings and err > 1e-7 * abs(total):
        raise NumericError(f"quadrature of {what} did not converge: {warnings[0]}", partial=total)
    return total, err


def _integrate_singular(log_g, b, k, n, what):
    """int_0^1 u^-(1-b) exp(log_g(u)) du, computed in t = u^b."""
    inv_b = 1.0 / b

    def f(t):
        if t <= 0.0:
            return 0.0
        value = log_g(t**inv_b)
        return 0.0 if value == -math.inf else math.exp(value)

    val, err = _integrate(f, _breakpoints(k, n) ** b, what)
    return val * inv_b, err * inv_b


def _log_beta_pdf(u, k, n):
    return (k - 1) * np.log(u) + (n - k) * np.log1p(-u) - special.betaln(k, n - k + 1)


def exact_expect_y_indicator(n, k, alpha, beta, delta) -> ConditionalMoment:
    """E[Y_(n-k+1:n) 1{X_(A:A) < beta Y_(n-k+1:n)}]."""
    n, k, alpha, beta, delta = _validate(n, k, alpha, beta, delta)
    b = delta / (1.0 + delta)
    n_x = x_pool_size(alpha, n)
    s = 0.0 if math.isinf(beta) else beta ** (-(1.0 + delta))

    def log_g(u):
        if u <= 0.0 or u >= 1.0 or s * u >= 1.0:
            return -math.inf
        return _log_beta_pdf(u, k, n) + n_x * math.log1p(-s * u)

    val, err = _integrate_singular(log_g, b, k, n, "Y indicator moment")
    return ConditionalMoment(val, err)


def complement_x_integral(n, k, alpha, beta, delta) -> ConditionalMoment:
    """E[X_(A:A) 1{X_(A:A) >= beta Y_(n-k+1:n)}].

    In uniform space X_(A:A) -> V ~ Beta(1, A), the event is ``V <= s U_(k:n)``
    with ``s = beta^-(1+delta)``; substituting ``V = s w`` leaves
    ``s^(1-a) int_0^1 w^-a A (1-s w)^(A-1) Pr{U_(k:n) >= w} dw``.
    """
    n, k, alpha, beta, delta = _validate(n, k, alpha, beta, delta)
    if math.isinf(beta):
        return ConditionalMoment(0.0, 0.0)
    a = 1.0 / (1.0 + delta)
    n_x = x_pool_size(alpha, n)
    log_s = -(1.0 + delta) * math.log(beta)
    s = math.exp(log_s)

    def log_g(w):
        survival = special.betaincc(k, n - k + 1, w)
        if survival <= 0.0:
            return -math.inf
        return math.log(n_x) + (n_x - 1) * math.log1p(-s * w) + math.log(survival)

    val, err = _integrate_singular(log_g, 1.0 - a, k, n, "X complement moment")
    scale = math.exp((1.0 - a) * log_s)
    return ConditionalMoment(scale * val, scale * err)


def exact_expect_x_indicator(n, k, alpha, beta, delta) -> ConditionalMoment:
    """E[X_(A:A) 1{X_(A:A) < beta Y_(n-k+1:n)}] = E[X_(A:A)] - complement."""
    comp = complement_x_integral(n, k, alpha, beta, delta)
    total = expected_max(x_pool_size(alpha, n), delta)
    return ConditionalMoment(total - comp.value, comp.estimated_abs_error)


def exact_rk(n, k, alpha, beta, delta) -> float:
    """Finite-n ratio of the indicator-weighted X and Y expectations."""
    num = exact_expect_x_indicator(n, k, alpha, beta, delta).value
    den = exact_expect_y_indicator(n, k, alpha, beta, delta).value
    if den < 1e-300:
        raise NumericError("Y indicator moment vanished; ratio undefined", partial=num)
    return num / den


def exact_prob_binds(n, k, alpha, beta, delta) -> float:
    """Pr[X_(A:A) < beta Y_(n-k+1:n)]: the rule changes the outcome."""
    n, k, alpha, beta, delta = _validate(n, k, alpha, beta, delta)
    if math.isinf(beta):
        return 1.0
    n_x = x_pool_size(alpha, n)
    s = beta ** (-(1.0 + delta))

    def f(u):
        if u <= 0.0 or s * u >= 1.0:
            return 0.0
        return math.exp(_log_beta_pdf(u, k, n) + n_x * math.log1p(-s * u))

    val, _ = _integrate(f, _breakpoints(k, n), "bind probability")
    return min(1.0, max(0.0, val))


def exact_prob_positive_given_change(n, k, alpha, beta, delta) -> float:
    """Pr[X_(A:A) > Y_(n-k+1:n) | rule binds], as 1 - Pr[X < Y] / Pr[X < beta Y]."""
    unbiased = exact_prob_binds(n, k, alpha, 1.0, delta)
    return 1.0 - unbiased / exact_prob_binds(n, k, alpha, beta, delta)
