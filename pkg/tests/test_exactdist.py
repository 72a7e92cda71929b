import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from primewalk.die import custom_die, fair_die
from primewalk.errors import (
    BudgetExceededError,
    HorizonExceededError,
    InvalidParameterError,
    UndefinedMomentError,
)
from primewalk.exactdist import (
    ForwardDP,
    brute_force_pmf,
    lk_distribution,
    lk_distributions,
    moments,
    scaled_pdf,
    tail_moment_bound,
    truncated,
)
from primewalk.targets import count, explicit_set, prime_set

from reference_tables import TABLE

BIASED = custom_die([(1, Fraction(1, 5)), (2, Fraction(1, 10)), (3, Fraction(2, 5)), (5, Fraction(3, 10))])
FLOAT_BIASED = custom_die([(2, 0.35), (3, 0.65)])


def naive_enumeration(die, ts, k, rolls):
    """Full product enumeration of all face sequences, no early stopping."""
    pmf = [Fraction(0)] * (rolls + 1)
    for seq in itertools.product(die.faces, repeat=rolls):
        s = h = 0
        prob = Fraction(1)
        for v, p in seq:
            prob *= p
        for i, (v, _) in enumerate(seq, 1):
            s += v
            h += s in ts
            if h == k:
                pmf[i] += prob
                break
    return pmf


def test_one_roll_and_two_roll_values(d6, primes):
    bf = brute_force_pmf(d6, primes, 1, 2)
    assert bf[1] == Fraction(1, 2)
    assert bf[2] == Fraction(2, 9)
    assert brute_force_pmf(d6, primes, 2, 2)[2] == Fraction(7, 36)
    dist = lk_distribution(d6, primes, 1)
    assert dist.pmf[1] == pytest.approx(0.5, abs=1e-15)
    assert dist.pmf[2] == pytest.approx(2 / 9, abs=1e-15)


def test_brute_force_matches_naive_product(d6, primes):
    for k in (1, 2, 3):
        assert brute_force_pmf(d6, primes, k, 4) == naive_enumeration(d6, primes, k, 4)


def test_brute_force_short_horizon_is_zero(d6, primes):
    assert all(p == 0 for p in brute_force_pmf(d6, primes, 5, 4))


def test_brute_force_budget(d6, primes):
    with pytest.raises(BudgetExceededError):
        brute_force_pmf(d6, primes, 30, 12, budget=10_000)


@pytest.mark.parametrize("die", [fair_die(6), BIASED, FLOAT_BIASED], ids=str)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_dp_equals_enumeration(die, k, primes):
    dist = lk_distribution(die, primes, k)
    bf = brute_force_pmf(die, primes, k, 6)
    pmf = np.zeros(7)
    head = dist.pmf[:7]
    pmf[: len(head)] = head
    for n in range(7):
        assert abs(pmf[n] - float(bf[n])) <= 1e-12


def test_k1_mean(certified_30):
    assert moments(certified_30[1]).mean == pytest.approx(TABLE[1][0], abs=5e-9)


def test_k1_shape(certified_30):
    m = moments(certified_30[1])
    assert m.std == pytest.approx(2.4985553, abs=5e-7)
    assert m.skewness == pytest.approx(3.3904247, abs=5e-7)
    assert m.kurtosis == pytest.approx(20.6214485, abs=5e-7)


def test_k30_mean_at_table_horizon(table_30):
    assert moments(table_30[30]).mean == pytest.approx(163.3025173, abs=5e-8)


def test_k30_certified_mean_exceeds_table_value(certified_30):
    # The tail beyond 400 rolls adds about 5.5e-6 to the k = 30 mean.
    mean = moments(certified_30[30]).mean
    assert mean - 163.3025173 == pytest.approx(5.5e-6, abs=2e-7)


@pytest.mark.parametrize("k", [1, 5, 17, 30])
def test_normalization_and_tail(certified_30, k):
    d = certified_30[k]
    assert math.fsum(d.pmf) + d.tail_mass == pytest.approx(1.0, abs=1e-12)
    assert d.tail_mass <= d.tail_eps
    assert np.all(d.pmf[:k] == 0.0)
    assert np.all((d.pmf >= 0) & (d.pmf <= 1))


def test_normalization_biased_and_targets():
    fives = explicit_set(range(5, 3000, 5))
    for die, ts, k in [(BIASED, prime_set(100), 7), (FLOAT_BIASED, fives, 4), (fair_die(2), prime_set(50), 12)]:
        d = lk_distribution(die, ts, k)
        assert math.fsum(d.pmf) + d.tail_mass == pytest.approx(1.0, abs=1e-12)
        assert d.tail_mass <= d.tail_eps


def test_mass_conservation_and_band():
    die = fair_die(6)
    dp = ForwardDP(die, prime_set(100), 8)
    absorbed = 0.0
    for _ in range(150):
        dp.step()
        absorbed += dp.flux[-1][-1]
        n = dp.n
        lo, hi = dp.lo, dp.lo + dp.state.shape[1] - 1
        assert n * die.min_face <= lo and hi <= n * die.max_face
        assert dp.active + absorbed == pytest.approx(1.0, abs=1e-12)


def test_hits_never_exceed_target_count():
    dp = ForwardDP(fair_die(6), prime_set(100), 12)
    for _ in range(80):
        dp.step()
        rows, width = dp.state.shape
        for c in range(width):
            s = dp.lo + c
            allowed = count(dp.ts, s)
            assert np.all(dp.state[allowed + 1 :, c] == 0.0)


def test_mean_strictly_increasing(certified_30):
    means = [moments(certified_30[k]).mean for k in range(1, 31)]
    assert all(b > a for a, b in zip(means, means[1:]))


def test_single_runs_agree_with_sweep(d6, primes, certified_30):
    for k in (3, 12):
        alone = lk_distribution(d6, primes, k, tail_eps=1e-13)
        assert moments(alone).mean == pytest.approx(moments(certified_30[k]).mean, abs=1e-10)


def test_tail_certificate(d6, primes):
    coarse = lk_distribution(d6, primes, 10, tail_eps=1e-6, moment_tol=1e3)
    fine = lk_distribution(d6, primes, 10, tail_eps=1e-7, moment_tol=1e3)
    assert fine.n_max >= coarse.n_max
    change = abs(moments(fine).mean - moments(coarse).mean)
    assert change < coarse.moment_error_bound


def test_tail_moment_bound_is_series():
    active, rho, n = 1e-10, 0.9, 300
    brute = math.fsum(active * rho ** (t - 1) * (n + t) ** 4 for t in range(1, 5000))
    assert tail_moment_bound(active, rho, n) == pytest.approx(brute, rel=1e-12)
    assert tail_moment_bound(0.0, 0.9, n) == 0.0
    assert tail_moment_bound(1e-3, 1.0, n) == math.inf


def test_k_zero_point_mass(d6, primes):
    d = lk_distribution(d6, primes, 0)
    assert d.pmf.tolist() == [1.0]
    assert moments(d).mean == 0.0


def test_point_mass_moments():
    d = lk_distribution(fair_die(1), explicit_set([1]), 1)
    m = moments(d)
    assert m.mean == 1.0 and m.std == 0.0
    with pytest.raises(UndefinedMomentError):
        m.skewness
    with pytest.raises(UndefinedMomentError):
        m.kurtosis
    with pytest.raises(UndefinedMomentError):
        scaled_pdf(d)


def test_deterministic_walk_all_targets():
    d = lk_distribution(fair_die(1), explicit_set(range(1, 100)), 5)
    assert d.pmf[5] == 1.0 and d.tail_mass == 0.0


def test_scaled_pdf(certified_30):
    dist = certified_30[20]
    z, dens = scaled_pdf(dist)
    assert np.all(np.diff(z) > 0)
    w = dens / moments(dist).std  # back to probabilities
    assert abs(math.fsum(z * w)) < 10 * dist.tail_eps + 1e-12
    assert abs(math.fsum(z * z * w) - 1) < 10 * dist.tail_eps + 1e-12
    assert abs(np.trapezoid(dens, z) - 1) < 1e-6


def test_fixed_horizon(d6, primes):
    d = lk_distribution(d6, primes, 5, horizon=30)
    assert d.n_max == 30 and d.tail_eps is None
    assert math.fsum(d.pmf) + d.tail_mass == pytest.approx(1.0, abs=1e-12)
    full = lk_distribution(d6, primes, 5)
    np.testing.assert_array_equal(d.pmf, full.pmf[:31])
    cut = truncated(full, 30)
    np.testing.assert_array_equal(cut.pmf, d.pmf)
    assert cut.tail_mass == pytest.approx(d.tail_mass, rel=1e-12)


def test_horizon_exceeded_carries_partial(d6, primes):
    with pytest.raises(HorizonExceededError) as info:
        lk_distribution(d6, primes, 30, max_horizon=50)
    partial = info.value.partial[30]
    assert partial.n_max == 50
    assert partial.tail_mass > 0.5


def test_unreachable_targets():
    with pytest.raises(InvalidParameterError):
        lk_distribution(fair_die(6), explicit_set([2, 3]), 3)
    # Gaps of 7 can be jumped; the walk may end up past every target.
    with pytest.raises(HorizonExceededError):
        lk_distribution(fair_die(6), explicit_set([7, 14, 21]), 3)


@pytest.mark.parametrize("bad", [dict(tail_eps=0.0), dict(tail_eps=1.5), dict(horizon=-1)])
def test_bad_parameters(d6, primes, bad):
    with pytest.raises(InvalidParameterError):
        lk_distribution(d6, primes, 3, **bad)
    with pytest.raises(InvalidParameterError):
        lk_distributions(d6, primes, [-1])


def test_kurtosis_pearson_bound(certified_30):
    for k in range(1, 31):
        m = moments(certified_30[k])
        assert m.std > 0 and m.kurtosis >= 1 + m.skewness**2
