import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from sbcoal.diffusion import Monomial
from sbcoal.forward_wf import (
    FrequencyState,
    GenerationAncestry,
    PopulationConfig,
    apply_ancestry,
    discrete_generator_apply,
    discrete_generator_lattice,
    enumerate_transitions,
    extract_ancestral_process,
    initial_sample,
    lattice_states,
    sample_ancestry,
    sample_hypergeometric,
    step_frequency,
    step_population,
    trace_step,
    transition_pmf,
)
from sbcoal.model_core import DiscreteParams, ParameterError, replicate_rng
from sbcoal.partition import PLANT, SEED


def brute_force_law(params, a, b):
    """One-step law of the allele counts from every equally likely parent assignment."""
    N, M, c = params.N, params.M, params.c
    plants = [True] * a + [False] * (N - a)
    seeds = [True] * b + [False] * (M - b)
    law = Counter()
    total = 0
    for germ in itertools.permutations(range(M), c):
        # ordered germinating seeds fill the last c plant slots; slot order is then exchangeable
        for parents in itertools.product(range(N), repeat=N - c):
            for producers in itertools.product(range(N), repeat=c):
                new_plants = [plants[p] for p in parents] + [seeds[s] for s in germ]
                new_seeds = list(seeds)
                for s, p in zip(germ, producers):
                    new_seeds[s] = plants[p]
                law[FrequencyState(sum(new_plants), sum(new_seeds))] += 1
                total += 1
    return {k: Fraction(v, total) for k, v in law.items()}


SEVEN_POINT = {
    (0, 1): Fraction(1, 8), (0, 2): Fraction(1, 8), (1, 0): Fraction(1, 8),
    (1, 1): Fraction(1, 4), (1, 2): Fraction(1, 8), (2, 0): Fraction(1, 8),
    (2, 1): Fraction(1, 8),
}


def test_seven_point_law():
    p = DiscreteParams(2, 2, 1)
    law = enumerate_transitions(p, FrequencyState(1, 1), exact=True)
    assert {(s.a_count, s.b_count): q for s, q in law.items() if q} == SEVEN_POINT
    assert brute_force_law(p, 1, 1) == {FrequencyState(*k): v for k, v in SEVEN_POINT.items()}


def test_half_to_half_is_a_quarter():
    p = DiscreteParams(2, 2, 1)
    assert transition_pmf(p, FrequencyState(1, 1), FrequencyState(1, 1), exact=True) == Fraction(1, 4)
    assert transition_pmf(p, FrequencyState(1, 1), FrequencyState(1, 1)) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("N, M, c", [(2, 2, 1), (4, 2, 1), (3, 3, 2), (3, 2, 0), (2, 3, 2)])
def test_exact_law_matches_individual_level_enumeration(N, M, c):
    p = DiscreteParams(N, M, c)
    for src in lattice_states(p):
        oracle = brute_force_law(p, src.a_count, src.b_count)
        for dst in lattice_states(p):
            assert transition_pmf(p, src, dst, exact=True) == oracle.get(dst, 0)


@pytest.mark.parametrize("N, M, c", [(2, 2, 1), (4, 2, 1), (6, 4, 3), (5, 7, 2)])
def test_pmf_matches_enumeration_and_sums_to_one(N, M, c):
    p = DiscreteParams(N, M, c)
    for src in lattice_states(p):
        law = enumerate_transitions(p, src)
        direct = {dst: transition_pmf(p, src, dst) for dst in lattice_states(p)}
        assert max(abs(law.get(d, 0.0) - q) for d, q in direct.items()) <= 1e-12
        assert abs(sum(direct.values()) - 1.0) <= 1e-12
        assert abs(sum(law.values()) - 1.0) <= 1e-12


def test_pmf_origin():
    p = DiscreteParams(5, 3, 2)
    assert transition_pmf(p, FrequencyState(0, 0), FrequencyState(0, 0)) == 1.0


def test_no_exchange_is_plain_wright_fisher():
    p = DiscreteParams(6, 3, 0)
    law = enumerate_transitions(p, FrequencyState(2, 1), exact=True)
    for dst, q in law.items():
        assert dst.b_count == 1
        assert q == Fraction(stats.binom.pmf(dst.a_count, 6, 1 / 3)).limit_denominator(10**6)


small = st.tuples(st.integers(1, 16), st.integers(1, 16)).flatmap(
    lambda nm: st.tuples(st.just(nm[0]), st.just(nm[1]), st.integers(0, min(nm)),
                         st.integers(0, nm[0]), st.integers(0, nm[1])))


@given(small)
def test_first_moments_exact(case):
    N, M, c, a, b = case
    p = DiscreteParams(N, M, c)
    law = enumerate_transitions(p, FrequencyState(a, b), exact=True)
    x, y = Fraction(a, N), Fraction(b, M)
    assert sum(q * (Fraction(s.a_count, N) - x) for s, q in law.items()) == Fraction(c, N) * (y - x)
    assert sum(q * (Fraction(s.b_count, M) - y) for s, q in law.items()) == Fraction(c, M) * (x - y)
    assert sum(law.values()) == 1


def test_enumeration_guard():
    with pytest.raises(ParameterError):
        enumerate_transitions(DiscreteParams(4000, 4000, 100), FrequencyState(1, 1))


def test_state_bounds():
    with pytest.raises(ParameterError):
        transition_pmf(DiscreteParams(2, 2, 1), FrequencyState(3, 0), FrequencyState(0, 0))


def _chi_square_pvalue(counts: Counter, law: dict, draws: int) -> float:
    keys = sorted(law, key=lambda s: -law[s])
    obs, exp, o_rest, e_rest = [], [], 0, 0.0
    for k in keys:
        e = float(law[k]) * draws
        if e >= 5:
            obs.append(counts.get(k, 0))
            exp.append(e)
        else:
            o_rest += counts.get(k, 0)
            e_rest += e
    if e_rest > 0:
        obs.append(o_rest)
        exp.append(e_rest)
    assert sum(obs) == draws
    exp = np.asarray(exp) * draws / sum(exp)
    return stats.chisquare(obs, exp).pvalue


DRAWS = 100_000


def test_step_frequency_law_chi_square():
    p = DiscreteParams(4, 3, 2)
    src = FrequencyState(2, 1)
    rng = replicate_rng(7, 0)
    counts = Counter(step_frequency(p, src, rng) for _ in range(DRAWS))
    assert _chi_square_pvalue(counts, enumerate_transitions(p, src), DRAWS) > 0.001


@pytest.mark.slow
def test_step_population_law_chi_square():
    p = DiscreteParams(4, 3, 2)
    cfg = PopulationConfig.from_counts(p, 2, 1)
    rng = replicate_rng(7, 1)
    counts = Counter(step_population(p, cfg, rng)[0].frequency_state() for _ in range(DRAWS))
    assert _chi_square_pvalue(counts, enumerate_transitions(p, FrequencyState(2, 1)), DRAWS) > 0.001


@pytest.mark.parametrize("total, draws, successes", [(10, 3, 4), (200, 100, 80)])
def test_hypergeometric_sampler(total, draws, successes):
    rng = replicate_rng(3, total)
    n = 40_000
    counts = Counter(sample_hypergeometric(rng, total, draws, successes) for _ in range(n))
    support = range(max(0, draws - total + successes), min(draws, successes) + 1)
    law = {k: stats.hypergeom.pmf(k, total, successes, draws) for k in support}
    assert _chi_square_pvalue(counts, law, n) > 0.001


@pytest.mark.parametrize("state", [(0, 0), (5, 4)])
def test_monomorphic_states_absorb(state, rng):
    p = DiscreteParams(5, 4, 2)
    s = FrequencyState(*state)
    assert all(step_frequency(p, s, rng) == s for _ in range(200))
    law = enumerate_transitions(p, s)
    assert law[s] == pytest.approx(1.0, abs=1e-15)


@given(st.integers(1, 30), st.integers(1, 30), st.data())
def test_ancestry_invariants(N, M, data):
    c = data.draw(st.integers(0, min(N, M)))
    p = DiscreteParams(N, M, c)
    anc = sample_ancestry(p, replicate_rng(data.draw(st.integers(0, 2**32)), 0))
    anc.check(p)


def test_no_exchange_step(rng):
    p = DiscreteParams(6, 4, 0)
    cfg = PopulationConfig(rng.random(6) < 0.5, rng.random(4) < 0.5)
    nxt, anc = step_population(p, cfg, rng)
    assert not anc.plant_from_seed.any()
    assert np.array_equal(nxt.seed_types, cfg.seed_types)


def test_full_germination(rng):
    p = DiscreteParams(6, 4, 4)
    cfg = PopulationConfig(np.ones(6, bool), np.zeros(4, bool))
    nxt, anc = step_population(p, cfg, rng)
    assert anc.seed_from_plant.all()
    assert nxt.seed_types.all()  # every new seed comes from an all-a plant generation
    assert nxt.plant_types.sum() == 2  # the four germinated seeds carry allele A


def test_monomorphic_population_stays(rng):
    p = DiscreteParams(8, 5, 3)
    cfg = PopulationConfig(np.ones(8, bool), np.ones(5, bool))
    for _ in range(20):
        cfg, _ = step_population(p, cfg, rng)
    assert cfg.plant_types.all() and cfg.seed_types.all()


def test_invalid_ancestry_rejected():
    p = DiscreteParams(3, 3, 1)
    anc = GenerationAncestry(np.array([0, 1, 2]), np.array([False, False, True]),
                             np.array([0, 1, 2]), np.array([False, False, True]))
    anc.check(p)
    with pytest.raises(ParameterError):
        GenerationAncestry(anc.plant_parent, anc.plant_from_seed, anc.seed_parent,
                           np.array([True, False, False])).check(p)


def test_apply_ancestry_copies_types():
    anc = GenerationAncestry(np.array([1, 1, 0]), np.array([False, False, True]),
                             np.array([2, 1]), np.array([True, False]))
    cfg = PopulationConfig(np.array([False, True, False]), np.array([True, False]))
    nxt = apply_ancestry(cfg, anc)
    assert nxt.plant_types.tolist() == [True, True, True]
    assert nxt.seed_types.tolist() == [False, False]


def _manual(N, M, plant_parent, plant_from_seed, seed_parent, seed_from_plant):
    return GenerationAncestry(np.array(plant_parent), np.array(plant_from_seed, bool),
                              np.array(seed_parent), np.array(seed_from_plant, bool))


def test_single_lineage_flips_with_location():
    p = DiscreteParams(3, 2, 1)
    # plant 0 germinated from seed 1; one step earlier seed 1 was produced by plant 2
    g1 = _manual(3, 2, [1, 0, 2], [1, 0, 0], [0, 0], [0, 1])
    g2 = _manual(3, 2, [0, 1, 1], [0, 0, 1], [0, 2], [0, 1])
    path = extract_ancestral_process(p, [g1, g2], [0])
    assert [s.partition.blocks[0].flag for s in path] == [PLANT, SEED, PLANT]
    assert [s.locations for s in path] == [(0,), (1,), (2,)]
    assert all(len(s.partition.blocks) == 1 for s in path)


def test_single_lineage_never_merges(rng):
    p = DiscreteParams(10, 10, 2)
    path = extract_ancestral_process(p, [sample_ancestry(p, rng) for _ in range(200)], [4])
    assert all(s.partition.blocks[0].members == (1,) for s in path)


def test_forced_merge():
    p = DiscreteParams(4, 2, 1)
    g = _manual(4, 2, [3, 3, 1, 0], [0, 0, 0, 1], [2, 1], [1, 0])
    path = extract_ancestral_process(p, [g], [0, 1])
    assert len(path[1].partition.blocks) == 1
    assert path[1].partition.blocks[0].members == (1, 2)
    assert path[1].partition.blocks[0].flag == PLANT


@given(st.integers(0, 2**32))
def test_traced_partitions_valid(seed):
    p = DiscreteParams(10, 8, 3)
    rng = replicate_rng(seed, 0)
    state = initial_sample(p, [0, 3, 5, 9])
    for _ in range(30):
        state, ev = trace_step(state, sample_ancestry(p, rng))
        state.partition.check()
        assert ev.merges <= ev.plant_pairs
        assert len(state.locations) == len(state.partition.blocks)
        for block, loc in zip(state.partition.blocks, state.locations):
            assert 0 <= loc < (p.N if block.flag == PLANT else p.M)
        assert len({(b.flag, loc) for b, loc in zip(state.partition.blocks, state.locations)}) \
            == len(state.locations)


def test_initial_sample_validation():
    p = DiscreteParams(4, 4, 1)
    with pytest.raises(ParameterError):
        initial_sample(p, [0, 0])
    with pytest.raises(ParameterError):
        initial_sample(p, [4])


@pytest.mark.parametrize("N, M, c", [(16, 16, 1), (12, 6, 3), (10, 20, 2)])
def test_generator_on_linear_functions(N, M, c):
    p = DiscreteParams(N, M, c)
    x = (np.arange(N + 1) / N)[:, None]
    y = (np.arange(M + 1) / M)[None, :]
    K = N / M
    assert np.max(np.abs(discrete_generator_lattice(p, Monomial(1, 0)) - c * (y - x))) <= 1e-12
    assert np.max(np.abs(discrete_generator_lattice(p, Monomial(0, 1)) - c * K * (x - y))) <= 1e-12
    assert np.max(np.abs(discrete_generator_lattice(p, lambda u, v: 0 * u + 0 * v + 3.0))) == 0


def test_generator_pointwise_and_mc(rng):
    p = DiscreteParams(8, 8, 2)
    s = FrequencyState(3, 6)
    f = Monomial(2, 1)
    exact = discrete_generator_apply(p, f, s).value
    row = discrete_generator_lattice(p, f)[3, 6]
    assert exact == pytest.approx(row, abs=1e-12)
    brute = p.N * sum(q * (f(*d.xy(p)) - f(*s.xy(p)))
                      for d, q in enumerate_transitions(p, s).items())
    assert exact == pytest.approx(brute, abs=1e-12)
    mc = discrete_generator_apply(p, f, s, mode="mc", replicates=20_000, rng=rng)
    assert mc.stats.within(exact, n_se=4)


def test_generator_mc_needs_replicates(rng):
    with pytest.raises(ParameterError):
        discrete_generator_apply(DiscreteParams(4, 4, 1), Monomial(1, 0), FrequencyState(1, 1),
                                 mode="mc", replicates=10, rng=rng)
