"""Seeded simulation of dice walks.

Randomness is counter based: roll ``i`` of trial ``t`` is a pure function
of ``(seed, t, i)``, so results do not depend on chunking, execution
order or the number of worker threads.

Generator ``splitmix64-counter/v1``: the stream key of trial ``t`` is
``mix(seed + mix((t + 1) * G))`` and its ``i``-th output (``i >= 0``) is
``mix(key + (i + 1) * G)``, where ``mix`` is the SplitMix64 finalizer and
``G = 0x9E3779B97F4A7C15``. The top 53 bits give a uniform double.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .die import DieSpec
from .errors import InvalidParameterError, OutOfRangeError, RunawayError
from .targets import TargetSet, ensure

GENERATOR_NAME = "splitmix64-counter/v1"
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
SAFETY_HORIZON = 10**9
CHUNK = 8192
BLOCK = 64

_U64 = np.uint64


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * MIX1
    z = (z ^ (z >> _U64(27))) * MIX2
    return z ^ (z >> _U64(31))


def trial_keys(seed: int, trials: np.ndarray) -> np.ndarray:
    if not 0 <= seed < 2**64:
        raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
    t = np.asarray(trials, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(np.full(t.shape, seed, dtype=np.uint64) + _mix((t + _U64(1)) * GOLDEN))


def uniforms(keys: np.ndarray, first_step: int, count: int) -> np.ndarray:
    """Uniform doubles in [0, 1): rows are trials, columns steps ``first_step..``."""
    steps = np.arange(first_step + 1, first_step + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = _mix(keys[:, None] + steps[None, :] * GOLDEN)
    return (bits >> _U64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class AliasTable:
    """Vose's alias method over the die's support."""

    def __init__(self, die: DieSpec):
        values = np.array(die.values, dtype=np.int64)
        probs = np.array([float(p) for _, p in die.faces])
        m = len(values)
        scaled = probs * m / math.fsum(probs)
        prob = np.ones(m)
        alias = np.arange(m)
        small = [i for i in range(m) if scaled[i] < 1.0]
        large = [i for i in range(m) if scaled[i] >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = (scaled[g] + scaled[s]) - 1.0
            (small if scaled[g] < 1.0 else large).append(g)
        self.values = values
        self.prob = prob
        self.alias = alias
        self.m = m

    def sample(self, u: np.ndarray) -> np.ndarray:
        scaled = u * self.m
        col = np.minimum(scaled.astype(np.int64), self.m - 1)
        frac = scaled - col
        pick = np.where(frac < self.prob[col], col, self.alias[col])
        return self.values[pick]


def roll_block(table: AliasTable, keys: np.ndarray, first_step: int, count: int) -> np.ndarray:
    return table.sample(uniforms(keys, first_step, count))


@dataclass(frozen=True, eq=False)
class SimConfig:
    seed: int
    trials: int
    die: DieSpec
    targets: TargetSet
    k: int
    safety_horizon: int = SAFETY_HORIZON

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameterError(f"trials must be positive, got {self.trials}")
        if self.k < 0:
            raise InvalidParameterError(f"k must be nonnegative, got {self.k}")
        trial_keys(self.seed, np.zeros(1))


class MomentAccumulator:
    """Streaming count, mean and central sums M2..M4 with pairwise merging."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.m3 = 0.0
        self.m4 = 0.0

    @classmethod
    def from_batch(cls, x: np.ndarray) -> MomentAccumulator:
        acc = cls()
        x = np.asarray(x, dtype=float)
        if len(x) == 0:
            return acc
        acc.n = len(x)
        acc.mean = math.fsum(x) / acc.n
        d = x - acc.mean
        acc.m2 = math.fsum(d * d)
        acc.m3 = math.fsum(d**3)
        acc.m4 = math.fsum(d**4)
        return acc

    def merge(self, other: MomentAccumulator) -> MomentAccumulator:
        if other.n == 0:
            return self
        if self.n == 0:
            self.__dict__.update(other.__dict__)
            return self
        na, nb = self.n, other.n
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (
            self.m3
            + other.m3
            + delta * d_n * d_n * na * nb * (na - nb)
            + 3.0 * d_n * (na * other.m2 - nb * self.m2)
        )
        m4 = (
            self.m4
            + other.m4
            + delta * d_n**3 * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * d_n * d_n * (na * na * other.m2 + nb * nb * self.m2)
            + 4.0 * d_n * (na * other.m3 - nb * self.m3)
        )
        self.n, self.mean, self.m2, self.m3, self.m4 = n, self.mean + d_n * nb, m2, m3, m4
        return self


@dataclass(frozen=True)
class SampleStats:
    count: int
    mean: float
    std: float
    skewness: float
    kurtosis: float
    standard_error_of_mean: float
    histogram: dict[int, int] = field(repr=False)
    accumulator: MomentAccumulator | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_histogram(cls, histogram: dict[int, int], accumulator=None) -> SampleStats:
        values = np.array(sorted(histogram), dtype=float)
        counts = np.array([histogram[int(v)] for v in values], dtype=float)
        n = int(counts.sum())
        mean = math.fsum(values * counts) / n
        d = values - mean
        m2 = math.fsum(d * d * counts) / n
        if m2 > 0:
            skew = math.fsum(d**3 * counts) / n / m2**1.5
            kurt = math.fsum(d**4 * counts) / n / m2**2
        else:
            skew = kurt = math.nan
        std = math.sqrt(m2 * n / (n - 1)) if n > 1 else 0.0
        sem = std / math.sqrt(n)
        return cls(n, mean, std, skew, kurt, sem, dict(histogram), accumulator)


def _histogram(samples: np.ndarray) -> dict[int, int]:
    vals, counts = np.unique(samples, return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


def _lk_chunk(cfg: SimConfig, table: AliasTable, ts: TargetSet, start: int, stop: int):
    idx = np.arange(start, stop)
    keys = trial_keys(cfg.seed, idx)
    result = np.zeros(len(idx), dtype=np.int64)
    if cfg.k == 0:
        return result, ts
    sums = np.zeros(len(idx), dtype=np.int64)
    hits = np.zeros(len(idx), dtype=np.int64)
    live = np.arange(len(idx))
    step = 0
    while len(live):
        if step >= cfg.safety_horizon:
            raise RunawayError(
                f"{len(live)} walks still short of {cfg.k} hits after {step} rolls"
            )
        block = min(BLOCK, cfg.safety_horizon - step)
        faces = roll_block(table, keys[live], step, block)
        path = sums[live, None] + np.cumsum(faces, axis=1)
        ts = ensure(ts, int(path[:, -1].max()))
        cum = hits[live, None] + np.cumsum(ts.membership[path], axis=1)
        reached = cum >= cfg.k
        done = reached[:, -1]
        first = np.argmax(reached, axis=1)
        result[live[done]] = step + first[done] + 1
        sums[live] = path[:, -1]
        hits[live] = cum[:, -1]
        live = live[~done]
        step += block
    return result, ts


def _chunked(trials: int, chunk: int):
    return [(s, min(s + chunk, trials)) for s in range(0, trials, chunk)]


def simulate_lk_samples(cfg: SimConfig, workers: int = 1, chunk: int = CHUNK) -> np.ndarray:
    """Roll counts ``L_k`` for trials ``0..trials-1``, in trial order."""
    table = AliasTable(cfg.die)
    # Pre-grow so worker threads share one snapshot and rarely need to extend it.
    ts = ensure(cfg.targets, max(64, cfg.die.max_face * 8 * max(cfg.k, 1)))
    out = np.empty(cfg.trials, dtype=np.int64)
    spans = _chunked(cfg.trials, chunk)

    def run(span):
        res, _ = _lk_chunk(cfg, table, ts, *span)
        out[span[0] : span[1]] = res

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))
    else:
        for span in spans:
            run(span)
    return out


def simulate_lk(cfg: SimConfig, workers: int = 1, chunk: int = CHUNK) -> SampleStats:
    samples = simulate_lk_samples(cfg, workers=workers, chunk=chunk)
    acc = MomentAccumulator()
    for s, e in _chunked(cfg.trials, chunk):
        acc.merge(MomentAccumulator.from_batch(samples[s:e]))
    return SampleStats.from_histogram(_histogram(samples), acc)


def deviation_samples(
    die: DieSpec, ts: TargetSet, n_targets: int, trials: int, seed: int, chunk: int = CHUNK
) -> np.ndarray:
    """Signed ``#hit - n_targets / E[d]`` over the first ``n_targets`` members, per trial."""
    if n_targets < 1 or trials < 1:
        raise InvalidParameterError("n_targets and trials must be positive")
    last = ts.nth_member(n_targets)
    if last is None:
        raise OutOfRangeError(
            f"target set holds fewer than {n_targets} members up to {ts.limit}; grow it first"
        )
    member = ts.membership[: last + 1]
    table = AliasTable(die)
    counts = np.empty(trials, dtype=np.int64)
    for start, stop in _chunked(trials, chunk):
        keys = trial_keys(seed, np.arange(start, stop))
        sums = np.zeros(stop - start, dtype=np.int64)
        hits = np.zeros(stop - start, dtype=np.int64)
        live = np.arange(stop - start)
        step = 0
        while len(live):
            faces = roll_block(table, keys[live], step, BLOCK)
            path = sums[live, None] + np.cumsum(faces, axis=1)
            inside = path <= last
            hits[live] += (member[np.minimum(path, last)] & inside).sum(axis=1)
            sums[live] = path[:, -1]
            live = live[path[:, -1] <= last]
            step += BLOCK
        counts[start:stop] = hits
    return counts - n_targets / float(die.mean)


def deviation_frequencies(die, ts, n_targets, a_values, trials, seed) -> list[float]:
    dev = np.abs(deviation_samples(die, ts, n_targets, trials, seed))
    return [float(np.mean(dev >= a)) for a in a_values]


def deviation_frequency(die, ts, n_targets, a, trials, seed) -> float:
    """Fraction of walks whose hit count on the first ``n_targets`` members
    deviates from ``n_targets / E[d]`` by at least ``a``."""
    return deviation_frequencies(die, ts, n_targets, [a], trials, seed)[0]


def empirical_hit_frequency(die: DieSpec, x: int, trials: int, seed: int, chunk: int = CHUNK) -> float:
    """Fraction of walks whose running sum lands exactly on ``x``."""
    if x < 1:
        raise InvalidParameterError(f"x must be positive, got {x}")
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    table = AliasTable(die)
    total = 0
    for start, stop in _chunked(trials, chunk):
        keys = trial_keys(seed, np.arange(start, stop))
        sums = np.zeros(stop - start, dtype=np.int64)
        hit = np.zeros(stop - start, dtype=bool)
        live = np.arange(stop - start)
        step = 0
        while len(live):
            block = min(BLOCK, max(1, x - step * die.min_face))
            faces = roll_block(table, keys[live], step, block)
            path = sums[live, None] + np.cumsum(faces, axis=1)
            hit[live] |= (path == x).any(axis=1)
            sums[live] = path[:, -1]
            live = live[path[:, -1] < x]
            step += block
        total += int(hit.sum())
    return total / trials
