"""Exact computations on the block-counting chain of the seed-bank coalescent.

From ``(n, m)`` (``n`` active blocks, ``m`` dormant blocks) the chain jumps

    (n-1, m+1)  at rate c n        (deactivation)
    (n+1, m-1)  at rate c K m      (activation)
    (n-1, m)    at rate n(n-1)/2   (coalescence of two active blocks)

Mixed moments of the diffusion satisfy
``E_{x,y}[X_t^n Y_t^m] = E^{n,m}[x^{N_t} y^{M_t}]``, which turns them into a
finite linear ODE on this state space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import spsolve

from .model_core import ParameterError, ScaledParams

MAX_SAMPLE = 200
ODE_ATOL = 1e-9
ODE_RTOL = 1e-9


@dataclass(frozen=True)
class DualStateSpace:
    states: tuple[tuple[int, int], ...]
    index: dict = field(compare=False, repr=False)

    @classmethod
    def up_to(cls, total: int) -> "DualStateSpace":
        """All ``(n, m)`` with ``1 <= n + m <= total``, ordered by size then ``-n``."""
        states = tuple(
            (n, s - n) for s in range(1, total + 1) for n in range(s, -1, -1)
        )
        return cls(states, {st: i for i, st in enumerate(states)})

    def __len__(self):
        return len(self.states)

    def __contains__(self, st):
        return st in self.index


def build_space_and_rates(
    params: ScaledParams, n0: int, m0: int
) -> tuple[DualStateSpace, sparse.csr_matrix]:
    """State space reachable from ``(n0, m0)`` and the generator matrix ``Q``."""
    total = n0 + m0
    if n0 < 0 or m0 < 0 or total < 1:
        raise ParameterError("need n0, m0 >= 0 and n0 + m0 >= 1")
    if total > MAX_SAMPLE:
        raise ParameterError(f"n0 + m0 = {total} exceeds the size guard {MAX_SAMPLE}")
    space = DualStateSpace.up_to(total)
    c, K = params.c, params.K
    rows, cols, vals = [], [], []
    for i, (n, m) in enumerate(space.states):
        out = 0.0
        for target, rate in (
            ((n - 1, m + 1), c * n),
            ((n + 1, m - 1), c * K * m),
            ((n - 1, m), n * (n - 1) / 2.0),
        ):
            if rate > 0:
                rows.append(i)
                cols.append(space.index[target])
                vals.append(rate)
                out += rate
        rows.append(i)
        cols.append(i)
        vals.append(-out)
    size = len(space)
    Q = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))
    return space, Q


def exit_rate(params: ScaledParams, n: int, m: int) -> float:
    return n * (n - 1) / 2.0 + params.c * n + params.c * params.K * m


def dual_moment_vector(
    params: ScaledParams, total: int, x: float, y: float, t: float
) -> tuple[DualStateSpace, np.ndarray]:
    """``E^{n,m}[x^{N_t} y^{M_t}]`` for every state with ``n + m <= total``."""
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ParameterError("(x, y) must lie in the unit square")
    if t < 0:
        raise ParameterError("t must be nonnegative")
    space, Q = build_space_and_rates(params, total, 0)
    g0 = np.array([x**n * y**m for n, m in space.states])
    if t == 0:
        return space, g0
    sol = solve_ivp(
        lambda _, g: Q @ g,
        (0.0, t),
        g0,
        method="RK45",
        atol=ODE_ATOL,
        rtol=ODE_RTOL,
    )
    if not sol.success:
        raise RuntimeError(f"moment ODE failed: {sol.message}")
    return space, np.clip(sol.y[:, -1], 0.0, 1.0)


def dual_moment(
    params: ScaledParams, n0: int, m0: int, x: float, y: float, t: float
) -> float:
    """``E_{x,y}[X_t^{n0} Y_t^{m0}]`` computed through the block-counting chain."""
    if n0 < 0 or m0 < 0 or n0 + m0 < 1:
        raise ParameterError("need n0, m0 >= 0 and n0 + m0 >= 1")
    space, g = dual_moment_vector(params, n0 + m0, x, y, t)
    return float(g[space.index[(n0, m0)]])


def limit_moment(params: ScaledParams, x: float, y: float) -> float:
    """Common long-time limit of every mixed moment."""
    return (y + x * params.K) / (1.0 + params.K)


def single_lineage_plant_prob(params: ScaledParams, t: float, starts_as_plant: bool) -> float:
    """Probability that one lineage is active at time ``t``."""
    if t < 0:
        raise ParameterError("t must be nonnegative")
    K = params.K
    stationary = K / (1.0 + K)
    p0 = 1.0 if starts_as_plant else 0.0
    return stationary + (p0 - stationary) * math.exp(-params.c * (1.0 + K) * t)


def expected_tmrca_vector(params: ScaledParams, total: int) -> tuple[DualStateSpace, np.ndarray]:
    """Expected time until ``n + m = 1`` from every state with ``n + m <= total``."""
    space, Q = build_space_and_rates(params, total, 0)
    transient = np.array([i for i, (n, m) in enumerate(space.states) if n + m >= 2], dtype=int)
    u = np.zeros(len(space))
    if transient.size:
        A = -Q[transient][:, transient].tocsc()
        sol = spsolve(A, np.ones(transient.size))
        sol = np.atleast_1d(sol)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError("singular first-step system")
        u[transient] = sol
    return space, u


def expected_tmrca_exact(params: ScaledParams, n0: int, m0: int) -> float:
    """Expected time for ``n0`` active and ``m0`` dormant lineages to reach one block."""
    if n0 < 0 or m0 < 0 or n0 + m0 < 1:
        raise ParameterError("need n0, m0 >= 0 and n0 + m0 >= 1")
    space, u = expected_tmrca_vector(params, n0 + m0)
    return float(u[space.index[(n0, m0)]])
