"""Order statistics of the Pareto law Pr{Z >= t} = t^-(1+delta) on [1, inf).

Order statistics are 1-based and ascending: ``Z_(p:m)`` is the p-th smallest
of m draws, so ``p == m`` is the maximum.

Everything that touches large binomial coefficients or Gamma ratios is done in
log space, so m up to ~1e6 is fine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError


@dataclass(frozen=True)
class OrderStatSpec:
    """Rank ``p`` (1-based, ascending) among ``m`` draws."""

    p: int
    m: int

    def __post_init__(self):
        if self.m < 1 or not 1 <= self.p <= self.m:
            raise DomainError(f"need 1 <= p <= m and m >= 1, got p={self.p}, m={self.m}")


def check_delta(delta: float) -> float:
    delta = float(delta)
    if not delta > 0 or math.isinf(delta):
        raise DomainError(f"delta must be a positive finite real, got {delta}")
    return delta


def sample(delta: float, u):
    """Inverse-cdf draw ``(1-u)^(-1/(1+delta))`` for uniform ``u`` in (0, 1)."""
    delta = check_delta(delta)
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr <= 0) | (u_arr >= 1)):
        raise DomainError("uniform variate must lie strictly inside (0, 1)")
    out = np.exp(-np.log1p(-u_arr) / (1.0 + delta))
    return float(out) if out.ndim == 0 else out


def _check_support(x):
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 1) or np.any(np.isnan(x_arr)):
        raise DomainError("order-statistic density/cdf defined for x >= 1 only")
    return x_arr


def log_binom(m: int, j: int) -> float:
    return special.gammaln(m + 1) - special.gammaln(j + 1) - special.gammaln(m - j + 1)


def os_pdf(spec: OrderStatSpec, delta: float, x):
    """Density of ``Z_(p:m)`` at ``x >= 1``."""
    delta = check_delta(delta)
    x_arr = _check_support(x)
    p, m = spec.p, spec.m
    e = 1.0 + delta
    log_x = np.log(x_arr)
    log_tail = -e * log_x  # log Pr{Z > x}
    logpdf = math.log(e) + math.log(m - p + 1) + log_binom(m, p - 1)
    logpdf = logpdf + (m - p + 1) * log_tail - log_x
    if p > 1:
        with np.errstate(divide="ignore"):
            logpdf = logpdf + (p - 1) * np.log1p(-np.exp(log_tail))
    out = np.exp(logpdf)
    return float(out) if out.ndim == 0 else out


def os_cdf(spec: OrderStatSpec, delta: float, x):
    """Pr{Z_(p:m) <= x}, as the regularized incomplete beta I_F(p, m-p+1)."""
    delta = check_delta(delta)
    x_arr = _check_support(x)
    f = -np.expm1(-(1.0 + delta) * np.log(x_arr))
    out = special.betainc(spec.p, spec.m - spec.p + 1, f)
    return float(out) if out.ndim == 0 else out


def log_expected_max(m: int, delta: float) -> float:
    delta = check_delta(delta)
    if m < 1:
        raise DomainError(f"sample count must be >= 1, got {m}")
    a = 1.0 / (1.0 + delta)
    return float(special.gammaln(m + 1) + special.gammaln(1 - a) - special.gammaln(m + 1 - a))


def expected_max(m: int, delta: float) -> float:
    """Exact E[Z_(m:m)] = Gamma(m+1) Gamma(1-1/(1+delta)) / Gamma(m + delta/(1+delta))."""
    return math.exp(log_expected_max(m, delta))


def expected_max_asymptotic(m: int, delta: float) -> float:
    """Leading-order Gamma(delta/(1+delta)) m^(1/(1+delta)); a lower bound for every m."""
    delta = check_delta(delta)
    a = 1.0 / (1.0 + delta)
    return math.gamma(1 - a) * m**a


def expected_os(spec: OrderStatSpec, delta: float) -> float:
    """E[Z_(p:m)] by stepping down from the maximum.

    Uses the exact ratio E[Z_(m-j:m)] = (1 - 1/(j(1+delta))) E[Z_(m-j+1:m)].
    """
    delta = check_delta(delta)
    log_e = log_expected_max(spec.m, delta)
    e = 1.0 + delta
    for j in range(1, spec.m - spec.p + 1):
        log_e += math.log1p(-1.0 / (j * e))
    return math.exp(log_e)


_PRODUCT_MAX_J = 64


def _is_pole(z: float) -> bool:
    return z <= 0 and float(z).is_integer()


def gen_binomial(a: float, j: int) -> float:
    """Generalized binomial coefficient C(a, j) = Gamma(a+1) / (Gamma(j+1) Gamma(a-j+1)).

    Small j uses the falling-factorial product a(a-1)...(a-j+1)/j!, which is exact
    for simple arguments; larger j goes through log-Gamma with sign tracking.
    """
    if j < 0 or int(j) != j:
        raise DomainError(f"j must be a nonnegative integer, got {j}")
    j = int(j)
    if _is_pole(a + 1) or _is_pole(a - j + 1):
        raise DomainError(f"Gamma pole in C({a}, {j})")
    if j <= _PRODUCT_MAX_J:
        out = 1.0
        for i in range(j):
            out *= (a - i) / (i + 1)
        return out
    sign = special.gammasgn(a + 1) * special.gammasgn(a - j + 1)
    log_abs = special.gammaln(a + 1) - special.gammaln(j + 1) - special.gammaln(a - j + 1)
    return float(sign * math.exp(log_abs))
