"""Discrete-time Wright-Fisher model with a geometric seed-bank.

Each generation, ``N - c`` plants pick a plant parent uniformly with
replacement, ``c`` plants are germinated seeds chosen without replacement,
``c`` new seeds are produced by uniformly chosen plants and the remaining
``M - c`` seeds persist. For two alleles the allele counts ``(a, b)`` form a
Markov chain whose one-step law is

    a' = U + Z,    b' = b + V - Z,

with ``Z ~ Hyp(M, c, b)``, ``U ~ Bin(N - c, a/N)`` and ``V ~ Bin(c, a/N)``
independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .model_core import (
    DiscreteParams,
    ParameterError,
    SummaryStats,
    summarize,
    validate_discrete,
)
from .partition import PLANT, SEED, Block, MarkedPartition

MAX_ENUMERATION_TERMS = 10**7
INVERSE_CDF_MAX_DRAWS = 64


@dataclass(frozen=True)
class PopulationConfig:
    """Allele of every plant and seed; ``True`` marks allele ``a``."""

    plant_types: np.ndarray
    seed_types: np.ndarray

    @classmethod
    def from_counts(cls, params: DiscreteParams, a_count: int, b_count: int) -> "PopulationConfig":
        plants = np.zeros(params.N, dtype=bool)
        plants[:a_count] = True
        seeds = np.zeros(params.M, dtype=bool)
        seeds[:b_count] = True
        return cls(plants, seeds)

    def check(self, params: DiscreteParams) -> None:
        if self.plant_types.shape != (params.N,) or self.seed_types.shape != (params.M,):
            raise ParameterError(
                f"config shape {self.plant_types.shape}/{self.seed_types.shape} "
                f"does not match N={params.N}, M={params.M}"
            )

    def frequency_state(self) -> "FrequencyState":
        return FrequencyState(int(self.plant_types.sum()), int(self.seed_types.sum()))


@dataclass(frozen=True, order=True)
class FrequencyState:
    a_count: int
    b_count: int

    def check(self, params: DiscreteParams) -> None:
        if not (0 <= self.a_count <= params.N and 0 <= self.b_count <= params.M):
            raise ParameterError(f"{self} outside [0,{params.N}]x[0,{params.M}]")

    def xy(self, params: DiscreteParams) -> tuple[float, float]:
        return self.a_count / params.N, self.b_count / params.M


@dataclass(frozen=True)
class GenerationAncestry:
    """Parent of every slot of one generation in the previous generation.

    ``plant_from_seed[i]`` says whether plant ``i`` is a germinated seed, in
    which case ``plant_parent[i]`` is a seed index, otherwise a plant index.
    ``seed_from_plant[j]`` says whether seed ``j`` was freshly produced, in
    which case ``seed_parent[j]`` is a plant index; persisting seeds have
    ``seed_parent[j] == j``.
    """

    plant_parent: np.ndarray
    plant_from_seed: np.ndarray
    seed_parent: np.ndarray
    seed_from_plant: np.ndarray

    def check(self, params: DiscreteParams) -> None:
        N, M, c = params.N, params.M, params.c
        if self.plant_parent.shape != (N,) or self.plant_from_seed.shape != (N,):
            raise ParameterError("plant ancestry arrays must have length N")
        if self.seed_parent.shape != (M,) or self.seed_from_plant.shape != (M,):
            raise ParameterError("seed ancestry arrays must have length M")
        if int(self.plant_from_seed.sum()) != c or int(self.seed_from_plant.sum()) != c:
            raise ParameterError("exactly c germinations and c new seeds are required")
        germinated = self.plant_parent[self.plant_from_seed]
        if len(np.unique(germinated)) != c or np.any((germinated < 0) | (germinated >= M)):
            raise ParameterError("germinated seed indices must be distinct and in [0, M)")
        plant_parents = self.plant_parent[~self.plant_from_seed]
        if np.any((plant_parents < 0) | (plant_parents >= N)):
            raise ParameterError("plant parent index out of range")
        persisting = ~self.seed_from_plant
        if not np.array_equal(self.seed_parent[persisting], np.flatnonzero(persisting)):
            raise ParameterError("persisting seeds must map to their own slot")
        # seeds that germinated leave their slot, which a new seed then fills
        if not np.array_equal(np.sort(germinated), np.flatnonzero(self.seed_from_plant)):
            raise ParameterError("new seeds must fill exactly the germinated slots")
        producers = self.seed_parent[self.seed_from_plant]
        if np.any((producers < 0) | (producers >= N)):
            raise ParameterError("seed producer index out of range")


def sample_ancestry(params: DiscreteParams, rng: np.random.Generator) -> GenerationAncestry:
    """Draw the parent assignment of one generation (independent of types)."""
    N, M, c = params.N, params.M, params.c
    plant_parent = rng.integers(0, N, size=N)
    plant_from_seed = np.zeros(N, dtype=bool)
    seed_parent = np.arange(M)
    seed_from_plant = np.zeros(M, dtype=bool)
    if c:
        germinating = rng.choice(M, size=c, replace=False)
        # germinated seeds take the last c plant slots, then slots are shuffled
        slots = rng.permutation(N)[N - c:]
        plant_parent[slots] = germinating
        plant_from_seed[slots] = True
        seed_parent[germinating] = rng.integers(0, N, size=c)
        seed_from_plant[germinating] = True
    return GenerationAncestry(plant_parent, plant_from_seed, seed_parent, seed_from_plant)


def apply_ancestry(config: PopulationConfig, ancestry: GenerationAncestry) -> PopulationConfig:
    germ = ancestry.plant_from_seed
    plants = np.empty_like(config.plant_types)
    plants[germ] = config.seed_types[ancestry.plant_parent[germ]]
    plants[~germ] = config.plant_types[ancestry.plant_parent[~germ]]
    fresh = ancestry.seed_from_plant
    seeds = config.seed_types.copy()
    seeds[fresh] = config.plant_types[ancestry.seed_parent[fresh]]
    return PopulationConfig(plants, seeds)


def step_population(
    params: DiscreteParams, config: PopulationConfig, rng: np.random.Generator
) -> tuple[PopulationConfig, GenerationAncestry]:
    validate_discrete(params)
    config.check(params)
    ancestry = sample_ancestry(params, rng)
    return apply_ancestry(config, ancestry), ancestry


# -- exact one-step law of the allele counts ---------------------------------


def sample_hypergeometric(rng: np.random.Generator, total: int, draws: int, successes: int) -> int:
    """Number of successes when drawing ``draws`` of ``total`` items without replacement.

    Small draw counts use inversion of the exact PMF; larger ones defer to
    numpy's sampler.
    """
    if draws == 0 or successes == 0:
        return 0
    if successes == total:
        return draws
    if draws > INVERSE_CDF_MAX_DRAWS:
        return int(rng.hypergeometric(successes, total - successes, draws))
    lo = max(0, draws - (total - successes))
    hi = min(draws, successes)
    u = rng.random()
    denom = math.comb(total, draws)
    acc = 0.0
    for i in range(lo, hi + 1):
        acc += math.comb(successes, i) * math.comb(total - successes, draws - i) / denom
        if u < acc:
            return i
    return hi


def step_frequency(
    params: DiscreteParams, state: FrequencyState, rng: np.random.Generator
) -> FrequencyState:
    N, M, c = params.N, params.M, params.c
    x = state.a_count / N
    z = sample_hypergeometric(rng, M, c, state.b_count)
    u = int(rng.binomial(N - c, x))
    v = int(rng.binomial(c, x))
    return FrequencyState(u + z, state.b_count + v - z)


def _binom_pmf_exact(n: int, k: int, p: Fraction) -> Fraction:
    if k < 0 or k > n:
        return Fraction(0)
    return math.comb(n, k) * p**k * (1 - p) ** (n - k)


def _hyp_pmf_exact(total: int, draws: int, successes: int, k: int) -> Fraction:
    if k < 0 or k > draws or k > successes or draws - k > total - successes:
        return Fraction(0)
    return Fraction(
        math.comb(successes, k) * math.comb(total - successes, draws - k),
        math.comb(total, draws),
    )


def _binom_pmf(n: int, k: int, p: float) -> float:
    if k < 0 or k > n:
        return 0.0
    return float(stats.binom.pmf(k, n, p))


def _hyp_pmf(total: int, draws: int, successes: int, k: int) -> float:
    if k < 0 or k > draws or k > successes or draws - k > total - successes:
        return 0.0
    return float(stats.hypergeom.pmf(k, total, successes, draws))


def transition_pmf(
    params: DiscreteParams, src: FrequencyState, dst: FrequencyState, exact: bool = False
):
    """Probability of moving from ``src`` to ``dst`` in one generation.

    Sums over the number ``i`` of germinating allele-``a`` seeds. The seed
    count changes by ``V - Z``, so ``V`` is evaluated at ``b' - b + i``.
    With ``exact=True`` the result is a ``Fraction``.
    """
    validate_discrete(params)
    src.check(params)
    dst.check(params)
    N, M, c = params.N, params.M, params.c
    if exact:
        x = Fraction(src.a_count, N)
        binom, hyp, total = _binom_pmf_exact, _hyp_pmf_exact, Fraction(0)
    else:
        x = src.a_count / N
        binom, hyp, total = _binom_pmf, _hyp_pmf, 0.0
    for i in range(c + 1):
        pz = hyp(M, c, src.b_count, i)
        if not pz:
            continue
        pu = binom(N - c, dst.a_count - i, x)
        if not pu:
            continue
        total += pz * pu * binom(c, dst.b_count - src.b_count + i, x)
    return total


def _check_enumeration_size(params: DiscreteParams) -> None:
    terms = (params.c + 1) ** 2 * (params.N - params.c + 1)
    if terms > MAX_ENUMERATION_TERMS:
        raise ParameterError(
            f"enumeration needs {terms} terms, above the guard of {MAX_ENUMERATION_TERMS}"
        )


def enumerate_transitions(
    params: DiscreteParams, src: FrequencyState, exact: bool = False
) -> dict[FrequencyState, float]:
    """Full one-step law from ``src`` by summing over every ``(Z, U, V)`` triple."""
    validate_discrete(params)
    src.check(params)
    _check_enumeration_size(params)
    N, M, c = params.N, params.M, params.c
    a, b = src.a_count, src.b_count
    if exact:
        x = Fraction(a, N)
        pz = [_hyp_pmf_exact(M, c, b, i) for i in range(c + 1)]
        pu = [_binom_pmf_exact(N - c, i, x) for i in range(N - c + 1)]
        pv = [_binom_pmf_exact(c, i, x) for i in range(c + 1)]
    else:
        x = a / N
        pz = list(stats.hypergeom.pmf(np.arange(c + 1), M, b, c)) if c else [1.0]
        pu = list(stats.binom.pmf(np.arange(N - c + 1), N - c, x))
        pv = list(stats.binom.pmf(np.arange(c + 1), c, x))
    law: dict[FrequencyState, float] = {}
    for z, wz in enumerate(pz):
        if not wz:
            continue
        for v, wv in enumerate(pv):
            if not wv:
                continue
            wzv = wz * wv
            b_next = b + v - z
            for u, wu in enumerate(pu):
                if not wu:
                    continue
                key = FrequencyState(u + z, b_next)
                law[key] = law.get(key, 0) + wzv * wu
    return law


def lattice_states(params: DiscreteParams) -> Iterable[FrequencyState]:
    for a in range(params.N + 1):
        for b in range(params.M + 1):
            yield FrequencyState(a, b)


# -- discrete generator --------------------------------------------------------


def _expected_increment_row(params: DiscreteParams, f: Callable, a: int) -> np.ndarray:
    """``E[f(X', Y')] - f(x, y)`` for plant count ``a`` and every seed count ``b``."""
    N, M, c = params.N, params.M, params.c
    x = a / N
    b = np.arange(M + 1)
    z = np.arange(c + 1)
    u = np.arange(N - c + 1)
    v = np.arange(c + 1)
    pz = stats.hypergeom.pmf(z[None, :], M, b[:, None], c)  # (M+1, c+1)
    pu = stats.binom.pmf(u, N - c, x)
    pv = stats.binom.pmf(v, c, x)
    xs = (u[None, :, None] + z[:, None, None]) / N  # (Z, U, 1)
    ys = (b[:, None, None] + v[None, None, :] - z[None, :, None]) / M  # (B, Z, V)
    ys = np.clip(ys, 0.0, 1.0)  # unreachable combinations carry zero weight
    base = f(np.full(M + 1, x), b / M)
    # differences before weighting: a constant f gives exactly zero
    vals = f(xs[None, :, :, :], ys[:, :, None, :]) - base[:, None, None, None]  # (B, Z, U, V)
    weights = pz[:, :, None, None] * pu[None, None, :, None] * pv[None, None, None, :]
    return np.sum(weights * vals, axis=(1, 2, 3))


def discrete_generator_lattice(
    params: DiscreteParams, f: Callable, timescale: float | None = None
) -> np.ndarray:
    """``D * E[f(X_1, Y_1) - f(x, y)]`` at every lattice point, as an ``(N+1, M+1)`` array.

    ``f`` must accept numpy arrays and broadcast. ``timescale`` defaults to ``N``.
    """
    validate_discrete(params)
    _check_enumeration_size(params)
    D = params.N if timescale is None else timescale
    if D <= 0:
        raise ParameterError("timescale must be positive")
    out = np.empty((params.N + 1, params.M + 1))
    for a in range(params.N + 1):
        out[a] = _expected_increment_row(params, f, a)
    return D * out


@dataclass(frozen=True)
class GeneratorEstimate:
    value: float
    stats: SummaryStats | None = field(default=None)


def discrete_generator_apply(
    params: DiscreteParams,
    f: Callable,
    state: FrequencyState,
    timescale: float | None = None,
    mode: str = "exact",
    replicates: int = 0,
    rng: np.random.Generator | None = None,
) -> GeneratorEstimate:
    """Apply the discrete generator to ``f`` at one lattice state.

    ``mode="exact"`` sums over the enumerated one-step law;
    ``mode="mc"`` averages ``replicates`` simulated steps and reports the
    standard error in ``stats``.
    """
    validate_discrete(params)
    state.check(params)
    D = params.N if timescale is None else timescale
    if D <= 0:
        raise ParameterError("timescale must be positive")
    x, y = state.xy(params)
    if mode == "exact":
        _check_enumeration_size(params)
        row = _expected_increment_row(params, f, state.a_count)
        return GeneratorEstimate(float(D * row[state.b_count]))
    if mode != "mc":
        raise ParameterError(f"unknown mode {mode!r}")
    if replicates < 100:
        raise ParameterError("Monte Carlo mode needs at least 100 replicates")
    if rng is None:
        raise ParameterError("Monte Carlo mode needs an rng")
    base = f(x, y)
    draws = []
    for _ in range(replicates):
        nxt = step_frequency(params, state, rng)
        draws.append(D * (f(*nxt.xy(params)) - base))
    s = summarize(draws)
    return GeneratorEstimate(s.mean, s)


# -- ancestral lineages ------------------------------------------------------


@dataclass(frozen=True)
class SampleGenealogyState:
    """Partition of the sample after ``generation`` steps back in time.

    ``locations[i]`` is the slot index (plant or seed, per the block flag)
    occupied by the ancestor of block ``i``.
    """

    partition: MarkedPartition
    locations: tuple[int, ...]
    generation: int


@dataclass
class StepEvents:
    """Exposures and events of one generation step of the sample genealogy."""

    plant_blocks: int = 0
    seed_blocks: int = 0
    plant_pairs: int = 0
    merges: int = 0
    deactivations: int = 0
    activations: int = 0

    def add(self, other: "StepEvents") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))


def initial_sample(params: DiscreteParams, sample: Sequence[int]) -> SampleGenealogyState:
    if len(set(sample)) != len(sample) or not sample:
        raise ParameterError("sample indices must be distinct and nonempty")
    if any(not 0 <= i < params.N for i in sample):
        raise ParameterError("sample indices must lie in [0, N)")
    blocks = tuple(Block((j + 1,), PLANT) for j in range(len(sample)))
    return SampleGenealogyState(MarkedPartition(blocks), tuple(int(i) for i in sample), 0)


def trace_step(
    state: SampleGenealogyState, ancestry: GenerationAncestry
) -> tuple[SampleGenealogyState, StepEvents]:
    """Move every block to its parent slot one generation back and merge collisions."""
    ev = StepEvents()
    targets: dict[tuple[str, int], list[int]] = {}
    plant_targets: list[tuple[str, int]] = []
    for idx, (block, loc) in enumerate(zip(state.partition.blocks, state.locations)):
        if block.flag == PLANT:
            ev.plant_blocks += 1
            if ancestry.plant_from_seed[loc]:
                target = (SEED, int(ancestry.plant_parent[loc]))
                ev.deactivations += 1
            else:
                target = (PLANT, int(ancestry.plant_parent[loc]))
            plant_targets.append(target)
        else:
            ev.seed_blocks += 1
            if ancestry.seed_from_plant[loc]:
                target = (PLANT, int(ancestry.seed_parent[loc]))
                ev.activations += 1
            else:
                target = (SEED, loc)
        targets.setdefault(target, []).append(idx)
    n_p = ev.plant_blocks
    ev.plant_pairs = n_p * (n_p - 1) // 2
    seen: dict[tuple[str, int], int] = {}
    for t in plant_targets:
        ev.merges += seen.get(t, 0)
        seen[t] = seen.get(t, 0) + 1
    blocks, locations = [], []
    for (flag, slot), members in targets.items():
        merged = tuple(sorted(m for i in members for m in state.partition.blocks[i].members))
        blocks.append(Block(merged, flag))
        locations.append(slot)
    order = sorted(range(len(blocks)), key=lambda i: blocks[i].members[0])
    new_state = SampleGenealogyState(
        MarkedPartition(tuple(blocks[i] for i in order), state.partition.colours),
        tuple(locations[i] for i in order),
        state.generation + 1,
    )
    return new_state, ev


def extract_ancestral_process(
    params: DiscreteParams,
    ancestries: Sequence[GenerationAncestry],
    sample: Sequence[int],
) -> list[SampleGenealogyState]:
    """Trace a sample of plants back through ``ancestries``.

    ``ancestries[0]`` is the step that produced the present generation,
    ``ancestries[1]`` the one before it, and so on. Returns the genealogy
    state after each step, starting with the present.
    """
    state = initial_sample(params, sample)
    path = [state]
    for anc in ancestries:
        anc.check(params)
        state, _ = trace_step(state, anc)
        path.append(state)
    return path
