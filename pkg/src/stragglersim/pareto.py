"""Pareto tail model for task response times.

Response times of a job's tasks are modeled as Pareto(alpha, beta) where
beta is the smallest observed time and alpha the tail index. The model
yields a straggler threshold K = k * mean and the expected number of tasks
whose completion time exceeds it, which drives how many tasks the mitigation
policy acts on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

ALPHA_FLOOR = 1.0 + 1e-6
BETA_FLOOR = 1e-6


@dataclass(frozen=True)
class ParetoParams:
    alpha: float  # tail index, dimensionless
    beta: float  # scale = minimum of the support, seconds

    @property
    def is_valid(self) -> bool:
        return self.alpha > 1.0 and self.beta > 0.0

    @property
    def mean(self) -> float:
        if self.alpha <= 1.0:
            raise ValueError(f"mean undefined for alpha={self.alpha} <= 1")
        return self.alpha * self.beta / (self.alpha - 1.0)

    def clamped(self) -> "ParetoParams":
        """Force validity; used on raw network outputs before any math."""
        return ParetoParams(max(self.alpha, ALPHA_FLOOR), max(self.beta, BETA_FLOOR))


@dataclass(frozen=True)
class StragglerEstimate:
    expected: float  # E_S, real-valued
    mitigate_count: int  # floor(E_S), clamped to [0, q]
    threshold_k_time: float  # K, seconds


def pareto_cdf(params: ParetoParams, x: float) -> float:
    """CDF: 1 - (x/beta)^(-alpha) for x >= beta, else 0."""
    if not params.is_valid:
        raise ValueError(f"invalid Pareto params {params}")
    if x < params.beta:
        return 0.0
    return 1.0 - (x / params.beta) ** (-params.alpha)


def fit_mle(samples: Sequence[float]) -> ParetoParams:
    """Maximum-likelihood fit: beta = min(samples), alpha from the closed form.

    alpha = q / (sum(log x_i) - q log beta). Returns the raw estimate; the
    caller decides whether to clamp alpha above 1. Degenerate inputs (fewer
    than 2 samples, nonpositive values, all values equal) raise ValueError so
    callers can fall back to "no stragglers predicted".
    """
    q = len(samples)
    if q < 2:
        raise ValueError(f"need >= 2 samples to fit, got {q}")
    if any(x <= 0 for x in samples):
        raise ValueError("all samples must be > 0")
    beta = min(samples)
    denom = sum(math.log(x) for x in samples) - q * math.log(beta)
    if denom <= 0.0:
        raise ValueError("degenerate sample set (all values equal)")
    return ParetoParams(alpha=q / denom, beta=beta)


def log_likelihood(params: ParetoParams, samples: Sequence[float]) -> float:
    """q log(a) + q a log(b) - (a+1) sum(log x_i); -inf when any x < beta."""
    q = len(samples)
    a, b = params.alpha, params.beta
    if a <= 0 or b <= 0:
        return -math.inf
    if any(x < b for x in samples):
        return -math.inf
    return q * math.log(a) + q * a * math.log(b) - (a + 1.0) * sum(math.log(x) for x in samples)


def straggler_threshold(params: ParetoParams, k: float) -> float:
    """K = k * alpha * beta / (alpha - 1), i.e. k times the distribution mean."""
    if params.alpha <= 1.0:
        raise ValueError(f"threshold needs alpha > 1, got {params.alpha}")
    if k <= 0:
        raise ValueError(f"k must be > 0, got {k}")
    return k * params.alpha * params.beta / (params.alpha - 1.0)


def expected_stragglers(params: ParetoParams, q: int, k: float) -> StragglerEstimate:
    """Expected straggler count E_S = q * (K/beta)^(-alpha), clamped to [0, q].

    For k >= 1 and alpha > 1, K/beta > 1 so the clamp never binds; it guards
    against out-of-contract k. mitigate_count = floor(E_S) is the number of
    tasks the policy will act on; E_S < 1 means no mitigation at all.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    threshold = straggler_threshold(params, k)
    expected = q * (threshold / params.beta) ** (-params.alpha)
    expected = min(max(expected, 0.0), float(q))
    return StragglerEstimate(
        expected=expected,
        mitigate_count=min(q, int(math.floor(expected))),
        threshold_k_time=threshold,
    )


def classify_stragglers(completion_times: Sequence[float], threshold: float) -> list[bool]:
    """Ground-truth labels: True where a completion time exceeds the threshold."""
    if threshold <= 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    return [t > threshold for t in completion_times]


def sample(params: ParetoParams, rng, size: int) -> list[float]:
    """Inverse-transform Pareto samples: beta * (1 - u)^(-1/alpha)."""
    if not params.is_valid:
        raise ValueError(f"invalid Pareto params {params}")
    u = rng.random(size)
    return [params.beta * (1.0 - ui) ** (-1.0 / params.alpha) for ui in u]
