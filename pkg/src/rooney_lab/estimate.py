"""Maximum-likelihood estimate of the bias from yearly single-hire records.

Each year i hires one candidate from ``alpha_i n_i`` X- and ``n_i`` Y-applicants.
The asymptotic probability of an X hire is ``c_i / (1 + c_i)`` with
``c_i = alpha_i beta^-(1+delta)``; pool sizes n_i do not enter it and are kept
for bookkeeping only. The likelihood is accurate up to the finite-n factor
``1 +- O((ln n)^2 / n)``; no correction is attempted.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError
from .powerlaw import check_delta

HEADER = ["year", "alpha", "n", "selected"]
FINITE_N_CAVEAT = "valid up to a 1 +- O((ln n)^2/n) factor in the selection probability"


@dataclass(frozen=True)
class HiringRecord:
    year: str
    alpha: float
    n: int | None
    selected_x: bool


@dataclass
class HiringHistory:
    records: list[HiringRecord]
    delta: float
    alphas: np.ndarray = field(init=False, repr=False)
    selections: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        check_delta(self.delta)
        if not self.records:
            raise DomainError("hiring history is empty")
        self.alphas = np.array([r.alpha for r in self.records], dtype=float)
        self.selections = np.array([r.selected_x for r in self.records], dtype=bool)
        if np.any(~(self.alphas > 0)):
            raise DomainError("every alpha_i must be positive")

    @classmethod
    def from_arrays(cls, alphas, selected_x, delta, pool_sizes=None):
        alphas = list(alphas)
        selected_x = list(selected_x)
        if len(alphas) != len(selected_x):
            raise DomainError("alphas and selections differ in length")
        sizes = list(pool_sizes) if pool_sizes is not None else [None] * len(alphas)
        records = [
            HiringRecord(str(i + 1), float(a), s, bool(m))
            for i, (a, m, s) in enumerate(zip(alphas, selected_x, sizes))
        ]
        return cls(records, delta)

    @property
    def m(self) -> int:
        return len(self.records)

    @property
    def n_selected(self) -> int:
        return int(self.selections.sum())


class HistoryParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_history(text: str, delta: float) -> HiringHistory:
    """Parse ``year,alpha,n,selected`` CSV text (header required, selected in {X, Y})."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or [h.strip() for h in rows[0]] != HEADER:
        raise HistoryParseError(1, f"header must be {','.join(HEADER)}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 4:
            raise HistoryParseError(lineno, f"expected 4 fields, got {len(row)}")
        year, alpha, n, selected = (cell.strip() for cell in row)
        try:
            alpha_v = float(alpha)
        except ValueError:
            raise HistoryParseError(lineno, f"alpha {alpha!r} is not a number") from None
        if not alpha_v > 0 or math.isinf(alpha_v):
            raise HistoryParseError(lineno, f"alpha must be positive and finite, got {alpha}")
        try:
            n_v = int(n)
        except ValueError:
            raise HistoryParseError(lineno, f"n {n!r} is not an integer") from None
        if selected not in ("X", "Y"):
            raise HistoryParseError(lineno, f"selected must be X or Y, got {selected!r}")
        records.append(HiringRecord(year, alpha_v, n_v, selected == "X"))
    if not records:
        raise HistoryParseError(len(rows) + 1, "no records after header")
    return HiringHistory(records, delta)


def read_history(path, delta: float) -> HiringHistory:
    return parse_history(Path(path).read_text(encoding="utf-8"), delta)


def log_likelihood(history: HiringHistory, beta: float) -> float:
    """sum_{M_i=1} log(c_i) - sum_i log(1 + c_i), c_i = alpha_i beta^-(1+delta)."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if math.isinf(beta):
        return -math.inf if history.n_selected else 0.0
    log_c = np.log(history.alphas) - (1.0 + history.delta) * math.log(beta)
    return float(log_c[history.selections].sum() - np.logaddexp(0.0, log_c).sum())


def stationarity_residual(history: HiringHistory, beta: float) -> float:
    """sum_i 1/(1 + alpha_i^-1 beta^(1+delta)) - N; zero at the MLE, decreasing in beta."""
    log_t = (1.0 + history.delta) * math.log(beta) - np.log(history.alphas)
    # 1/(1+e^t) computed without overflow
    probs = np.exp(-np.logaddexp(0.0, log_t))
    return math.fsum(probs.tolist()) - history.n_selected


@dataclass(frozen=True)
class Degenerate:
    """No interior maximum: the likelihood keeps rising toward ``direction``."""

    direction: str  # "inf" (no X hires) or "zero" (only X hires)


def closed_form_beta(m: int, n_selected: int, alpha: float, delta: float) -> float:
    """((m/N - 1) alpha)^(1/(1+delta)) for a constant-alpha history."""
    return ((m / n_selected - 1.0) * alpha) ** (1.0 / (1.0 + delta))


def mle_beta(history: HiringHistory):
    """Unique root of the stationarity equation by bisection in log(beta).

    Returns a ``Degenerate`` marker when N = 0 or N = m.
    """
    n_sel, m = history.n_selected, history.m
    if n_sel == 0:
        return Degenerate("inf")
    if n_sel == m:
        return Degenerate("zero")

    alpha_bar = math.exp(float(np.log(history.alphas).mean()))
    guess = closed_form_beta(m, n_sel, alpha_bar, history.delta)
    lo = hi = math.log(guess)
    step = 1.0
    while stationarity_residual(history, math.exp(lo)) < 0:
        lo -= step
        step *= 2
    step = 1.0
    while stationarity_residual(history, math.exp(hi)) > 0:
        hi += step
        step *= 2

    # run to float resolution; the residual's slope grows with m, so a loose
    # relative tolerance on beta would leave a visible plug-back residual
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if stationarity_residual(history, math.exp(mid)) > 0:
            lo = mid
        else:
            hi = mid
    r_lo = abs(stationarity_residual(history, math.exp(lo)))
    r_hi = abs(stationarity_residual(history, math.exp(hi)))
    return math.exp(lo if r_lo <= r_hi else hi)


@dataclass(frozen=True)
class MLEReport:
    beta_hat: float | None
    degenerate: str | None
    residual: float | None
    log_likelihood: float | None
    bias_toward_x: bool
    m: int
    n_selected: int
    caveat: str = FINITE_N_CAVEAT

    def as_dict(self) -> dict:
        return {
            "beta_hat": self.beta_hat,
            "degenerate": self.degenerate,
            "residual": self.residual,
            "log_likelihood": self.log_likelihood,
            "bias_toward_x": self.bias_toward_x,
            "m": self.m,
            "n_selected": self.n_selected,
            "caveat": self.caveat,
        }


def fit(history: HiringHistory) -> MLEReport:
    """mle_beta plus plug-back diagnostics; beta_hat < 1 is flagged as bias toward X."""
    result = mle_beta(history)
    if isinstance(result, Degenerate):
        return MLEReport(None, result.direction, None, None, result.direction == "zero",
                         history.m, history.n_selected)
    return MLEReport(
        beta_hat=result,
        degenerate=None,
        residual=stationarity_residual(history, result),
        log_likelihood=log_likelihood(history, result),
        bias_toward_x=result < 1.0,
        m=history.m,
        n_selected=history.n_selected,
    )


def synthetic_history(alphas, beta: float, delta: float, rng: np.random.Generator) -> HiringHistory:
    """Draw M_i ~ Bernoulli(c_i/(1+c_i)) from the asymptotic selection law."""
    alphas = np.asarray(alphas, dtype=float)
    c = alphas * beta ** (-(1.0 + delta))
    picks = rng.random(alphas.size) < c / (1.0 + c)
    return HiringHistory.from_arrays(alphas, picks, delta)
