"""Seed-bank coalescent: partition-level Gillespie simulation and counting chains.

On marked partitions, every pair of p-blocks merges at rate 1, every p-block
becomes dormant at rate ``c`` and every s-block becomes active at rate
``cK``. The counting-level chains below track only how many blocks carry
each flag and run in a compiled kernel, which is what makes samples of
``10**5`` lineages affordable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .model_core import ParameterError, ScaledParams, binom2
from .partition import BLUE, PLANT, SEED, Block, MarkedPartition, init_partition

MAX_EVENTS = 10**9


# -- partition level -----------------------------------------------------------


@dataclass(frozen=True)
class Merge:
    i: int
    j: int
    holding_time: float


@dataclass(frozen=True)
class Deactivate:
    block: int
    holding_time: float


@dataclass(frozen=True)
class Activate:
    block: int
    holding_time: float


def gillespie_step(params: ScaledParams, partition: MarkedPartition, rng: np.random.Generator):
    """Advance the partition by one event.

    Event indices refer to positions in ``partition.blocks``. Returns the new
    partition (blocks ordered by smallest member) and the event.
    """
    blocks = partition.blocks
    plants = [i for i, b in enumerate(blocks) if b.flag == PLANT]
    seeds = [i for i, b in enumerate(blocks) if b.flag == SEED]
    n, m = len(plants), len(seeds)
    merge_rate = float(binom2(n))
    deact_rate = params.c * n
    total = merge_rate + deact_rate + params.c * params.K * m
    if total <= 0:
        raise ParameterError("no transition is possible from this partition")
    holding = rng.standard_exponential() / total
    u = rng.random() * total
    colours = partition.colours
    if u < merge_rate:
        pair = int(u)  # each p-pair carries rate 1
        i_pos = 0
        while pair >= n - 1 - i_pos:
            pair -= n - 1 - i_pos
            i_pos += 1
        i, j = plants[i_pos], plants[i_pos + 1 + pair]
        merged = Block(tuple(sorted(blocks[i].members + blocks[j].members)), PLANT)
        rest = [b for k, b in enumerate(blocks) if k not in (i, j)]
        event = Merge(i, j, holding)
        new_blocks = rest + [merged]
    elif u < merge_rate + deact_rate:
        i = plants[min(int((u - merge_rate) / params.c), n - 1)]
        new_blocks = list(blocks)
        new_blocks[i] = Block(blocks[i].members, SEED)
        event = Deactivate(i, holding)
    else:
        rate_each = params.c * params.K
        i = seeds[min(int((u - merge_rate - deact_rate) / rate_each), m - 1)]
        new_blocks = list(blocks)
        new_blocks[i] = Block(blocks[i].members, PLANT)
        if colours is not None:
            recoloured = list(colours)
            for member in blocks[i].members:
                recoloured[member - 1] = BLUE
            colours = tuple(recoloured)
        event = Activate(i, holding)
    new_blocks.sort(key=lambda b: b.members[0])
    return MarkedPartition(tuple(new_blocks), colours), event


@dataclass
class MrcaRun:
    t_mrca: float
    events: list = field(default_factory=list)
    count_path: list = field(default_factory=list)


def simulate_until_mrca(
    params: ScaledParams,
    partition0: MarkedPartition,
    rng: np.random.Generator,
    record: bool = True,
) -> MrcaRun:
    """Run the partition chain until one block remains.

    ``count_path`` holds ``(time, n, m)`` after every event, starting at time 0.
    """
    partition = partition0
    t = 0.0
    run = MrcaRun(0.0)
    if record:
        run.count_path.append((0.0, *partition.counts))
    events = 0
    while len(partition.blocks) > 1:
        partition, event = gillespie_step(params, partition, rng)
        t += event.holding_time
        events += 1
        if record:
            run.events.append(event)
            run.count_path.append((t, *partition.counts))
        if events >= MAX_EVENTS:
            raise RuntimeError("event guard exceeded before reaching the MRCA")
    run.t_mrca = t
    return run


def sample_tmrca(params: ScaledParams, n0: int, m0: int, rng: np.random.Generator) -> float:
    return simulate_until_mrca(params, init_partition(n0, m0), rng, record=False).t_mrca


# -- counting level --------------------------------------------------------------

PLAIN, WHITE, BOUNDED, KINGMAN = 0, 1, 2, 3


@dataclass(frozen=True)
class BlockCounts:
    n: int
    m: int

    def __post_init__(self):
        if self.n < 0 or self.m < 0 or self.n + self.m < 1:
            raise ParameterError("block counts must be nonnegative with n + m >= 1")


@dataclass
class CountPath:
    """Outcome of one counting-chain run.

    ``absorbed`` says whether a single block was reached, first at
    ``mrca_time`` (nan otherwise). ``times/n/m`` list the jump chain when a
    trajectory was requested; ``at_n/at_m`` are the states held at
    ``record_times``.
    """

    end_time: float
    absorbed: bool
    mrca_time: float
    deactivations: int
    total_deactivations: int
    events: int
    times: np.ndarray | None = None
    n: np.ndarray | None = None
    m: np.ndarray | None = None
    at_n: np.ndarray | None = None
    at_m: np.ndarray | None = None


@numba.njit(nogil=True, cache=True)
def _count_kernel(rng, kind, c, K, n, m, t_end, rec_times, rec_n, rec_m, traj_t, traj_n, traj_m):
    t = 0.0
    deact = 0
    deact_all = 0
    events = 0
    cap = traj_t.shape[0]
    r = 0
    n_rec = rec_times.shape[0]
    if cap > 0:
        traj_t[0] = 0.0
        traj_n[0] = n
        traj_m[0] = m
    absorbed = False
    mrca_time = np.nan
    # without a horizon the run stops at one block; with one, a lone lineage keeps flipping
    stop_at_one = kind == WHITE or kind == KINGMAN or t_end == np.inf
    while True:
        if kind == KINGMAN:
            single = n <= 1
        else:
            single = n + m <= 1
        if single and not absorbed:
            absorbed = True
            mrca_time = t
        if n + m == 0 or (single and stop_at_one):
            break
        merge = 0.5 * n * (n - 1)
        if kind == BOUNDED and n * n < n + m:
            merge = 0.0
        if kind == KINGMAN:
            deact_rate = 0.0
            act_rate = 0.0
        else:
            deact_rate = c * n
            act_rate = c * K * m
        total = merge + deact_rate + act_rate
        t_next = t + rng.standard_exponential() / total
        while r < n_rec and rec_times[r] < t_next:
            rec_n[r] = n
            rec_m[r] = m
            r += 1
        if t_next > t_end:
            t = t_end
            break
        t = t_next
        u = rng.random() * total
        if u < merge:
            n -= 1
        elif u < merge + deact_rate:
            if n >= 2:
                deact += 1
            deact_all += 1
            n -= 1
            m += 1
        else:
            m -= 1
            if kind != WHITE:
                n += 1
        events += 1
        if events < cap:
            traj_t[events] = t
            traj_n[events] = n
            traj_m[events] = m
        elif cap > 0:
            return t, absorbed, mrca_time, deact, deact_all, events, True
    while r < n_rec:
        rec_n[r] = n
        rec_m[r] = m
        r += 1
    return t, absorbed, mrca_time, deact, deact_all, events, False


def _run_counts(
    kind: int,
    c: float,
    K: float,
    n0: int,
    m0: int,
    rng: np.random.Generator,
    t_end: float | None,
    record_times: Sequence[float] | None,
    trajectory: bool,
) -> CountPath:
    rec = np.asarray(sorted(record_times) if record_times is not None else [], dtype=np.float64)
    rec_n = np.zeros(rec.shape[0], dtype=np.int64)
    rec_m = np.zeros(rec.shape[0], dtype=np.int64)
    horizon = math.inf if t_end is None else float(t_end)
    cap = 4 * (n0 + m0) + 64 if trajectory else 0
    while True:
        state = rng.bit_generator.state if trajectory else None
        traj_t = np.empty(cap, dtype=np.float64)
        traj_n = np.empty(cap, dtype=np.int64)
        traj_m = np.empty(cap, dtype=np.int64)
        t, absorbed, mrca_time, deact, deact_all, events, overflow = _count_kernel(
            rng, kind, float(c), float(K), int(n0), int(m0), horizon,
            rec, rec_n, rec_m, traj_t, traj_n, traj_m,
        )
        if not overflow:
            break
        # replay the same draws into a larger buffer
        rng.bit_generator.state = state
        cap *= 4
    path = CountPath(
        float(t), bool(absorbed), float(mrca_time), int(deact), int(deact_all), int(events)
    )
    if trajectory:
        k = events + 1
        path.times, path.n, path.m = traj_t[:k].copy(), traj_n[:k].copy(), traj_m[:k].copy()
    if rec.shape[0]:
        path.at_n, path.at_m = rec_n, rec_m
    return path


def simulate_block_counting(
    params: ScaledParams,
    counts0: BlockCounts,
    rng: np.random.Generator,
    t_end: float | None = None,
    record_times: Sequence[float] | None = None,
    trajectory: bool = False,
) -> CountPath:
    """Block-counting chain from ``counts0``.

    Without ``t_end`` the run stops when one block is left, so ``end_time`` is
    the time to the most recent common ancestor. With ``t_end`` it runs to the
    horizon and a lone lineage keeps switching between plant and seed.
    """
    return _run_counts(
        PLAIN, params.c, params.K, counts0.n, counts0.m, rng, t_end, record_times, trajectory
    )


def simulate_white_counts(
    params: ScaledParams,
    n0: int,
    rng: np.random.Generator,
    t_end: float | None = None,
    record_times: Sequence[float] | None = None,
    trajectory: bool = False,
) -> CountPath:
    """White plants and white seeds, started from ``(n0, 0)``.

    Active lineages merge at rate ``C(n,2)`` and turn into white seeds at rate
    ``cn``; a white seed leaves the white system at rate ``cK`` each. Runs
    until ``n + m <= 1``. ``deactivations`` counts plant-to-seed moves made
    while at least two white plants remain; ``total_deactivations`` counts all.
    """
    if n0 < 1:
        raise ParameterError("n0 must be at least 1")
    return _run_counts(WHITE, params.c, params.K, n0, 0, rng, t_end, record_times, trajectory)


def simulate_bounded_counts(
    params: ScaledParams,
    counts0: BlockCounts,
    rng: np.random.Generator,
    t_end: float | None = None,
    record_times: Sequence[float] | None = None,
    trajectory: bool = False,
) -> CountPath:
    """Block counting with coalescence switched off while ``n < sqrt(n + m)``.

    Stopping follows :func:`simulate_block_counting`.
    """
    return _run_counts(
        BOUNDED, params.c, params.K, counts0.n, counts0.m, rng, t_end, record_times, trajectory
    )


def simulate_kingman_counts(
    n0: int,
    rng: np.random.Generator,
    t_end: float | None = None,
    record_times: Sequence[float] | None = None,
    trajectory: bool = False,
) -> CountPath:
    """Pure-death chain at rate ``C(n,2)`` (Kingman coalescent block counts)."""
    if n0 < 1:
        raise ParameterError("n0 must be at least 1")
    return _run_counts(KINGMAN, 1.0, 1.0, n0, 0, rng, t_end, record_times, trajectory)


def deactivation_probability(c: float, j: int) -> float:
    """Chance that the next event among ``j`` active lineages is a deactivation."""
    return 2.0 * c / (j + 2.0 * c - 1.0)


def expected_deactivations(c: float, n: int) -> float:
    """``sum_{j=2}^{n} 2c / (j + 2c - 1)``."""
    if n < 2 or not c > 0:
        raise ParameterError("need n >= 2 and c > 0")
    return math.fsum(deactivation_probability(c, j) for j in range(2, n + 1))


def deactivation_variance(c: float, n: int) -> float:
    """Variance of the deactivation count, a sum of independent indicators."""
    if n < 2 or not c > 0:
        raise ParameterError("need n >= 2 and c > 0")
    return math.fsum(
        p * (1.0 - p) for p in (deactivation_probability(c, j) for j in range(2, n + 1))
    )
