import pytest

from primewalk.die import fair_die
from primewalk.exactdist import lk_distributions, truncated
from primewalk.targets import prime_set

from reference_tables import SUMMARY_HORIZON, TABLE_HORIZON


@pytest.fixture(scope="session")
def d6():
    return fair_die(6)


@pytest.fixture(scope="session")
def primes():
    return prime_set(20_000)


@pytest.fixture(scope="session")
def certified_30(d6, primes):
    """Certified laws of L_1..L_30 from one run."""
    return lk_distributions(d6, primes, range(1, 31))


@pytest.fixture(scope="session")
def table_30(d6, primes):
    """Laws of L_1..L_30 cut at the reference table horizon."""
    return lk_distributions(d6, primes, range(1, 31), horizon=TABLE_HORIZON)


@pytest.fixture(scope="session")
def certified_summary(d6, primes):
    return lk_distributions(d6, primes, sorted(SUMMARY_HORIZON))


@pytest.fixture(scope="session")
def summary_fixed(d6, primes):
    full = lk_distributions(d6, primes, sorted(SUMMARY_HORIZON), horizon=max(SUMMARY_HORIZON.values()))
    return {k: truncated(full[k], h) for k, h in SUMMARY_HORIZON.items()}
