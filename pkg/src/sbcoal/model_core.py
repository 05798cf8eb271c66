"""Parameter types, replicate RNG streams and summary statistics.

Every simulation in the package draws randomness from a stream derived from
a ``(master_seed, replicate_index)`` pair, so replicate ``i`` is reproducible
on its own regardless of how replicates are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np


class ParameterError(ValueError):
    """Raised when a parameter set violates a domain bound."""


@dataclass(frozen=True)
class ScaledParams:
    """Continuum parameters: seed-bank intensity ``c`` and size ratio ``K = N/M``."""

    c: float
    K: float

    def __post_init__(self):
        for name in ("c", "K"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class DiscreteParams:
    """Finite model: ``N`` plants, ``M`` seeds, ``c`` individuals exchanged per generation."""

    N: int
    M: int
    c: int

    @property
    def eps(self) -> Fraction:
        return Fraction(self.c, self.N)

    @property
    def delta(self) -> Fraction:
        return Fraction(self.c, self.M)

    @property
    def K(self) -> Fraction:
        return Fraction(self.N, self.M)


def validate_discrete(params: DiscreteParams) -> DiscreteParams:
    """Return ``params`` unchanged if ``N, M >= 1`` and ``0 <= c <= min(N, M)``."""
    for name in ("N", "M", "c"):
        value = getattr(params, name)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ParameterError(f"{name} must be an integer, got {value!r}")
    if params.N < 1:
        raise ParameterError(f"N must be >= 1, got {params.N}")
    if params.M < 1:
        raise ParameterError(f"M must be >= 1, got {params.M}")
    if params.c < 0:
        raise ParameterError(f"c must be >= 0, got {params.c}")
    if params.c > min(params.N, params.M):
        raise ParameterError(
            f"c exceeds min(N,M): c={params.c}, N={params.N}, M={params.M}"
        )
    return params


def scaled_from_discrete(params: DiscreteParams) -> ScaledParams:
    validate_discrete(params)
    if params.c == 0:
        raise ParameterError("the scaled model requires c >= 1")
    return ScaledParams(c=float(params.c), K=params.N / params.M)


@dataclass(frozen=True)
class ReplicateSeed:
    """Identifies the random stream of one replicate.

    The stream is a Philox counter-based generator keyed by numpy's
    ``SeedSequence`` hash of ``(master_seed, replicate_index)``; distinct
    indices give distinct keys with overwhelming probability.
    """

    master_seed: int
    replicate_index: int

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ParameterError("master_seed must be a 64-bit unsigned integer")
        if self.replicate_index < 0:
            raise ParameterError("replicate_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        return replicate_rng(self.master_seed, self.replicate_index)


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(master_seed: int, *keys: int) -> int:
    """Child master seed for an independent family of replicate streams."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, np.uint64)[0])


def replicate_rngs(master_seed: int, count: int, start: int = 0) -> list[np.random.Generator]:
    return [replicate_rng(master_seed, i) for i in range(start, start + count)]


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    variance: float
    standard_error: float
    ci95_low: float
    ci95_high: float

    def within(self, target: float, n_se: float = 3.0, slack: float = 0.0) -> bool:
        """True if ``|mean - target| <= n_se * standard_error + slack``."""
        return abs(self.mean - target) <= n_se * self.standard_error + slack


def summarize(samples: Iterable[float]) -> SummaryStats:
    """Mean, unbiased variance, standard error and normal 95% interval.

    Sums are computed with ``math.fsum`` (exactly rounded), so the result
    does not depend on the order of ``samples``.
    """
    values = [float(v) for v in np.asarray(list(samples), dtype=float).ravel()]
    n = len(values)
    if n < 2:
        raise ParameterError(f"summarize needs at least 2 samples, got {n}")
    mean = math.fsum(values) / n
    variance = max(math.fsum((v - mean) ** 2 for v in values) / (n - 1), 0.0)
    se = math.sqrt(variance / n)
    return SummaryStats(
        count=n,
        mean=mean,
        variance=variance,
        standard_error=se,
        ci95_low=mean - 1.96 * se,
        ci95_high=mean + 1.96 * se,
    )


def exact_stats(value: float, count: int) -> SummaryStats:
    """Degenerate summary for a deterministic quantity (zero spread)."""
    return SummaryStats(count, float(value), 0.0, 0.0, float(value), float(value))


def separated(lower: SummaryStats, upper: SummaryStats, n_se: float = 3.0) -> bool:
    """True if ``upper.mean - lower.mean`` exceeds ``n_se`` combined standard errors."""
    combined = math.hypot(lower.standard_error, upper.standard_error)
    return upper.mean - lower.mean > n_se * combined


def binom2(n: int) -> int:
    return n * (n - 1) // 2
