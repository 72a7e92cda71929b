import math
from fractions import Fraction

import numpy as np
import pytest

from primewalk.die import custom_die, fair_die
from primewalk.errors import InvalidParameterError, OutOfRangeError, RunawayError
from primewalk.exactdist import lk_distribution, moments
from primewalk.hitprob import hit_probabilities
from primewalk.montecarlo import (
    AliasTable,
    MomentAccumulator,
    SampleStats,
    SimConfig,
    deviation_frequencies,
    deviation_frequency,
    deviation_samples,
    empirical_hit_frequency,
    simulate_lk,
    simulate_lk_samples,
    trial_keys,
    uniforms,
)
from primewalk.targets import explicit_set, prime_set

from reference_tables import TABLE


def cfg(k=3, trials=2000, seed=7, die=None, ts=None, **kw):
    return SimConfig(seed, trials, die or fair_die(6), ts or prime_set(2000), k, **kw)


def test_same_seed_same_samples():
    a = simulate_lk_samples(cfg())
    b = simulate_lk_samples(cfg())
    assert np.array_equal(a, b)
    assert not np.array_equal(a, simulate_lk_samples(cfg(seed=8)))


@pytest.mark.parametrize("workers, chunk", [(1, 100), (3, 257), (4, 8192)])
def test_independent_of_workers_and_chunking(workers, chunk):
    ref = simulate_lk_samples(cfg(k=5, trials=3000))
    got = simulate_lk_samples(cfg(k=5, trials=3000), workers=workers, chunk=chunk)
    assert np.array_equal(ref, got)


def test_prefix_property():
    # Trial t's value does not depend on how many trials are requested.
    small = simulate_lk_samples(cfg(trials=500))
    big = simulate_lk_samples(cfg(trials=1500))
    assert np.array_equal(small, big[:500])


def test_uniform_stream():
    keys = trial_keys(123, np.arange(4))
    u = uniforms(keys, 0, 1000)
    assert u.shape == (4, 1000)
    assert np.all((u >= 0) & (u < 1))
    assert np.array_equal(uniforms(keys, 10, 5), u[:, 10:15])
    assert abs(u.mean() - 0.5) < 0.02


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_seed_range(seed):
    with pytest.raises(InvalidParameterError):
        trial_keys(seed, np.arange(2))


def test_alias_table_frequencies():
    die = custom_die([(1, Fraction(1, 10)), (2, Fraction(3, 5)), (7, Fraction(3, 10))])
    table = AliasTable(die)
    u = uniforms(trial_keys(99, np.arange(200)), 0, 1000).ravel()
    faces = table.sample(u)
    n = len(faces)
    for v, p in die.faces:
        freq = np.mean(faces == v)
        assert abs(freq - float(p)) < 4 * math.sqrt(float(p) * (1 - float(p)) / n)


def test_alias_table_exact_on_grid():
    # With a uniform grid of u the alias method reproduces the weights exactly.
    die = custom_die([(1, Fraction(1, 4)), (2, Fraction(1, 2)), (3, Fraction(1, 4))])
    u = (np.arange(4000) + 0.5) / 4000
    faces = AliasTable(die).sample(u)
    assert [int(np.sum(faces == v)) for v in (1, 2, 3)] == [1000, 2000, 1000]


def test_deterministic_walk():
    stats = simulate_lk(cfg(k=5, trials=300, die=fair_die(1), ts=explicit_set(range(1, 1000))))
    assert stats.histogram == {5: 300}
    assert stats.mean == 5 and stats.std == 0.0
    assert math.isnan(stats.skewness)


def test_k_zero():
    assert simulate_lk(cfg(k=0, trials=10)).histogram == {0: 10}


def test_histogram_and_accumulator():
    stats = simulate_lk(cfg(k=8, trials=5000), chunk=600)
    assert sum(stats.histogram.values()) == 5000 == stats.count
    acc = stats.accumulator
    assert acc.n == 5000
    assert acc.mean == pytest.approx(stats.mean, rel=1e-9)
    assert math.sqrt(acc.m2 / (acc.n - 1)) == pytest.approx(stats.std, rel=1e-9)
    assert acc.m3 / acc.n / (acc.m2 / acc.n) ** 1.5 == pytest.approx(stats.skewness, rel=1e-9)
    assert acc.m4 * acc.n / acc.m2**2 == pytest.approx(stats.kurtosis, rel=1e-9)
    assert stats.standard_error_of_mean == pytest.approx(stats.std / math.sqrt(5000))


def test_accumulator_merge_matches_batch():
    rng = np.random.default_rng(1)
    x = rng.exponential(3.0, 10_001)
    whole = MomentAccumulator.from_batch(x)
    parts = MomentAccumulator()
    for piece in np.array_split(x, 7):
        parts.merge(MomentAccumulator.from_batch(piece))
    parts.merge(MomentAccumulator())
    for name in ("mean", "m2", "m3", "m4"):
        assert getattr(parts, name) == pytest.approx(getattr(whole, name), rel=1e-10)
    assert parts.n == whole.n


def test_sample_stats_from_histogram():
    s = SampleStats.from_histogram({1: 1, 2: 2, 3: 1})
    assert s.mean == 2.0
    assert s.std == pytest.approx(math.sqrt(2 / 3))
    assert s.skewness == 0.0
    assert s.kurtosis == pytest.approx(2.0)


def test_runaway():
    with pytest.raises(RunawayError):
        simulate_lk(cfg(k=50, trials=20, safety_horizon=30))


def test_bad_config():
    with pytest.raises(InvalidParameterError):
        cfg(trials=0)
    with pytest.raises(InvalidParameterError):
        cfg(k=-1)


@pytest.mark.parametrize("k", [1, 5, 10])
def test_agrees_with_exact_mean(k):
    exact = moments(lk_distribution(fair_die(6), prime_set(2000), k)).mean
    stats = simulate_lk(cfg(k=k, trials=100_000, seed=1000 + k))
    assert abs(stats.mean - exact) < 4 * stats.standard_error_of_mean


@pytest.mark.slow
def test_k1_mean_large_sample():
    stats = simulate_lk(cfg(k=1, trials=10**6, seed=31))
    assert abs(stats.mean - TABLE[1][0]) < 0.02


@pytest.mark.parametrize("x", [1, 2, 3, 10, 50])
def test_hit_frequency(x):
    trials = 100_000
    p = hit_probabilities(fair_die(6), x)[x]
    freq = empirical_hit_frequency(fair_die(6), x, trials, seed=x)
    assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / trials)


def test_hit_frequency_rejects():
    with pytest.raises(InvalidParameterError):
        empirical_hit_frequency(fair_die(6), 0, 10, 1)


def test_deviation_basics():
    ts = prime_set(1000)
    dev = deviation_samples(fair_die(6), ts, 50, 2000, seed=3)
    # Hit counts are integers between 0 and 50.
    counts = dev + 50 / 3.5
    assert np.allclose(counts, np.round(counts))
    assert counts.min() >= 0 and counts.max() <= 50
    assert deviation_frequency(fair_die(6), ts, 50, 0.0, 2000, 3) == 1.0
    assert deviation_frequency(fair_die(6), ts, 50, 1e6, 2000, 3) == 0.0
    freqs = deviation_frequencies(fair_die(6), ts, 50, [0, 1, 2, 4, 8, 16], 2000, 3)
    assert all(b <= a for a, b in zip(freqs, freqs[1:]))


def test_deviation_mean_matches_expected_hits():
    # The mean hit count equals the sum of p(x) over the first n members.
    ts = prime_set(2000)
    n = 100
    last = ts.nth_member(n)
    s = hit_probabilities(fair_die(6), last)
    expected = math.fsum(s[int(x)] for x in ts.members(last))
    counts = deviation_samples(fair_die(6), ts, n, 20_000, seed=11) + n / 3.5
    se = counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(counts.mean() - expected) < 4 * se


def test_deviation_needs_members():
    with pytest.raises(OutOfRangeError):
        deviation_samples(fair_die(6), prime_set(100), 500, 10, 1)
    with pytest.raises(InvalidParameterError):
        deviation_samples(fair_die(6), prime_set(100), 0, 10, 1)
