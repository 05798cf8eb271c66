"""Two-dimensional Wright-Fisher diffusion with seed-bank.

    dX = c (Y - X) dt + sqrt(X (1 - X)) dB
    dY = c K (X - Y) dt

Paths are integrated with Euler-Maruyama clamped to the unit square
(``scheme="em"``), or with a binomial resampling step for the active
frequency (``scheme="binomial"``). The binomial step matches the Euler mean
and variance but keeps the boundaries absorbing; clamped Gaussian steps leak
mass away from ``x = 0`` and ``x = 1`` and are unusable over long horizons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model_core import (
    ParameterError,
    ScaledParams,
    SummaryStats,
    exact_stats,
    replicate_rng,
    summarize,
)

# replicates sharing one random stream in vectorised integration
BATCH_SIZE = 10_000
FIXATION_TOL = 0.01


@dataclass(frozen=True)
class DiffusionState:
    x: float
    y: float


SCHEMES = ("em", "binomial")


@dataclass(frozen=True)
class IntegrationSpec:
    dt: float = 1e-3
    t_end: float = 1.0
    scheme: str = "em"

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if not self.t_end > 0 or self.dt > self.t_end:
            raise ParameterError("need 0 < dt <= t_end")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == "binomial" and abs(1.0 / self.dt - round(1.0 / self.dt)) > 1e-9:
            raise ParameterError("the binomial scheme needs 1/dt to be an integer")

    def with_end(self, t_end: float) -> "IntegrationSpec":
        return IntegrationSpec(self.dt, t_end, self.scheme)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class Monomial:
    """``x**n * y**m`` with closed-form partial derivatives."""

    def __init__(self, n: int, m: int):
        if n < 0 or m < 0:
            raise ValueError("exponents must be nonnegative")
        self.n, self.m = n, m

    def __call__(self, x, y):
        return x**self.n * y**self.m

    def dx(self, x, y):
        return self.n * x ** max(self.n - 1, 0) * y**self.m if self.n else 0.0 * x

    def dy(self, x, y):
        return self.m * x**self.n * y ** max(self.m - 1, 0) if self.m else 0.0 * y

    def dxx(self, x, y):
        if self.n < 2:
            return 0.0 * x
        return self.n * (self.n - 1) * x ** (self.n - 2) * y**self.m

    def __repr__(self):
        return f"Monomial({self.n}, {self.m})"


def _fd_partials(f: Callable, x: float, y: float, h: float = 1e-4):
    fx = (f(x + h, y) - f(x - h, y)) / (2 * h)
    fy = (f(x, y + h) - f(x, y - h)) / (2 * h)
    fxx = (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / (h * h)
    return fx, fy, fxx


def limit_generator_apply(params: ScaledParams, f, x: float, y: float) -> float:
    """``c(y-x) f_x + cK(x-y) f_y + x(1-x) f_xx / 2``.

    ``f`` may provide ``dx``, ``dy`` and ``dxx`` methods; otherwise central
    finite differences are used.
    """
    c, K = params.c, params.K
    if all(hasattr(f, name) for name in ("dx", "dy", "dxx")):
        fx, fy, fxx = f.dx(x, y), f.dy(x, y), f.dxx(x, y)
    else:
        fx, fy, fxx = _fd_partials(f, x, y)
    return c * (y - x) * fx + c * K * (x - y) * fy + 0.5 * x * (1 - x) * fxx


def _em_update(c, K, x, y, dt, w):
    # vectorised kernel shared by em_step and the path integrators
    noise = np.sqrt(np.maximum(x * (1.0 - x), 0.0)) * w
    x_new = np.clip(x + c * (y - x) * dt + noise, 0.0, 1.0)
    y_new = np.clip(y + c * K * (x - y) * dt, 0.0, 1.0)
    return x_new, y_new


def _binomial_update(c, K, x, y, dt, rng):
    n = int(round(1.0 / dt))
    p = np.clip(x + c * (y - x) * dt, 0.0, 1.0)
    y_new = np.clip(y + c * K * (x - y) * dt, 0.0, 1.0)
    return rng.binomial(n, p) / n, y_new


def binomial_step(
    params: ScaledParams, state: DiffusionState, dt: float, rng: np.random.Generator
) -> DiffusionState:
    """Resample ``x`` as ``Bin(1/dt, x + c(y-x)dt) * dt``; ``y`` follows its drift."""
    x, y = _binomial_update(params.c, params.K, state.x, state.y, dt, rng)
    return DiffusionState(float(x), float(y))


def em_step(params: ScaledParams, state: DiffusionState, dt: float, w: float) -> DiffusionState:
    """One Euler-Maruyama step; ``w`` is a Normal(0, dt) increment."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    x, y = _em_update(params.c, params.K, state.x, state.y, dt, w)
    return DiffusionState(float(x), float(y))


def _check_start(x0: float, y0: float) -> None:
    if not (0.0 <= x0 <= 1.0 and 0.0 <= y0 <= 1.0):
        raise ParameterError(f"start ({x0}, {y0}) outside the unit square")


def simulate_path(
    params: ScaledParams,
    x0: float,
    y0: float,
    spec: IntegrationSpec,
    rng: np.random.Generator,
    full_path: bool = False,
):
    """Integrate one path to ``spec.t_end``.

    Returns the endpoint, or with ``full_path=True`` an array of shape
    ``(n_steps + 1, 2)`` holding ``(x, y)`` on the time grid.
    """
    _check_start(x0, y0)
    n = spec.n_steps
    if spec.scheme == "em":
        increments = rng.normal(0.0, math.sqrt(spec.dt), size=n)
    x, y = float(x0), float(y0)
    path = np.empty((n + 1, 2)) if full_path else None
    if full_path:
        path[0] = x, y
    for i in range(n):
        if spec.scheme == "em":
            x, y = _em_update(params.c, params.K, x, y, spec.dt, increments[i])
        else:
            x, y = _binomial_update(params.c, params.K, x, y, spec.dt, rng)
        if full_path:
            path[i + 1] = x, y
    if full_path:
        return path
    return DiffusionState(float(x), float(y))


def simulate_ensemble(
    params: ScaledParams,
    x0: float,
    y0: float,
    spec: IntegrationSpec,
    replicates: int,
    seed: int,
    record_times=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``replicates`` independent paths in batches.

    Batch ``b`` covers replicates ``b*BATCH_SIZE`` onwards and draws from the
    stream of ``(seed, b)``, so results do not depend on scheduling.
    Returns arrays ``X, Y`` of shape ``(len(record_times), replicates)``;
    ``record_times`` defaults to ``[t_end]`` and is rounded to the step grid.
    """
    _check_start(x0, y0)
    if record_times is None:
        record_times = [spec.t_end]
    steps = [int(round(t / spec.dt)) for t in record_times]
    if any(s < 0 or s > spec.n_steps for s in steps):
        raise ParameterError("record times must lie in [0, t_end]")
    X = np.empty((len(steps), replicates))
    Y = np.empty((len(steps), replicates))
    sqdt = math.sqrt(spec.dt)
    c, K, dt = params.c, params.K, spec.dt
    n_batches = -(-replicates // BATCH_SIZE)
    for b in range(n_batches):
        lo = b * BATCH_SIZE
        size = min(BATCH_SIZE, replicates - lo)
        rng = replicate_rng(seed, b)
        x = np.full(size, float(x0))
        y = np.full(size, float(y0))
        for j, s in enumerate(steps):
            if s == 0:
                X[j, lo:lo + size], Y[j, lo:lo + size] = x, y
        for i in range(1, max(steps) + 1):
            if spec.scheme == "em":
                x, y = _em_update(c, K, x, y, dt, sqdt * rng.standard_normal(size))
            else:
                x, y = _binomial_update(c, K, x, y, dt, rng)
            for j, s in enumerate(steps):
                if s == i:
                    X[j, lo:lo + size], Y[j, lo:lo + size] = x, y
    return X, Y


def mixed_moment_dt_allowance(dt: float) -> float:
    """Discretisation allowance added to Monte Carlo tolerances."""
    return 5.0 * dt


def estimate_mixed_moment(
    params: ScaledParams,
    x0: float,
    y0: float,
    n: int,
    m: int,
    t: float,
    spec: IntegrationSpec,
    replicates: int,
    seed: int,
) -> SummaryStats:
    """Monte Carlo estimate of ``E[X_t**n * Y_t**m]`` from ``(x0, y0)``."""
    if n < 0 or m < 0 or n + m < 1:
        raise ParameterError("need n, m >= 0 and n + m >= 1")
    if replicates < 100:
        raise ParameterError("at least 100 replicates are required")
    _check_start(x0, y0)
    if t == 0:
        return exact_stats(x0**n * y0**m, replicates)
    X, Y = simulate_ensemble(params, x0, y0, spec.with_end(t), replicates, seed)
    return summarize(X[0] ** n * Y[0] ** m)


def fixation_probability_exact(params: ScaledParams, x: float, y: float) -> float:
    """Limit probability that allele ``a`` fixes: ``(y + xK) / (1 + K)``."""
    _check_start(x, y)
    return (y + x * params.K) / (1.0 + params.K)


@dataclass(frozen=True)
class FixationEstimate:
    fixed: SummaryStats
    unresolved: SummaryStats


def estimate_fixation_empirical(
    params: ScaledParams,
    x0: float,
    y0: float,
    horizon: float,
    spec: IntegrationSpec,
    replicates: int,
    seed: int,
    tol: float = FIXATION_TOL,
) -> FixationEstimate:
    """Fraction of paths with ``x_T > 1 - tol``, and of paths still in ``[tol, 1 - tol]``."""
    X, _ = simulate_ensemble(params, x0, y0, spec.with_end(horizon), replicates, seed)
    xt = X[0]
    fixed = (xt > 1.0 - tol).astype(float)
    unresolved = ((xt >= tol) & (xt <= 1.0 - tol)).astype(float)
    return FixationEstimate(summarize(fixed), summarize(unresolved))
