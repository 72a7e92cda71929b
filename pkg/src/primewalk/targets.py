"""Target sets: which integers count as a hit.

Every kind (primes, an explicit list, a predicate) is materialized into
the same boolean bitmap over ``[0, limit]`` with a prefix-count table.
Snapshots are immutable; :func:`grow` builds a new one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import InvalidParameterError, OutOfRangeError, ResourceError

MAX_LIMIT = 200_000_000


def sieve(limit: int) -> np.ndarray:
    """Boolean primality table for ``0..limit`` (sieve of Eratosthenes)."""
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, int(limit**0.5) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    return is_prime


@dataclass(frozen=True, eq=False)
class TargetSet:
    kind: str
    limit: int
    membership: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    source: tuple[int, ...] | Callable[[int], bool] | None = field(default=None, repr=False)
    max_limit: int = MAX_LIMIT

    def __contains__(self, x: int) -> bool:
        if x < 1:
            return False
        if x > self.limit:
            raise OutOfRangeError(f"{x} is beyond the target set limit {self.limit}")
        return bool(self.membership[x])

    def count(self, n: int) -> int:
        return count(self, n)

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Membership flags for the integers ``lo..hi-1``; ``hi - 1 <= limit``."""
        if hi - 1 > self.limit:
            raise OutOfRangeError(f"window end {hi - 1} is beyond limit {self.limit}")
        out = np.zeros(max(hi - lo, 0), dtype=bool)
        start = max(lo, 1)
        if start < hi:
            out[start - lo :] = self.membership[start:hi]
        return out

    def members(self, upto: int | None = None) -> np.ndarray:
        upto = self.limit if upto is None else upto
        if upto > self.limit:
            raise OutOfRangeError(f"{upto} is beyond the target set limit {self.limit}")
        return np.flatnonzero(self.membership[: upto + 1])

    def nth_member(self, n: int) -> int | None:
        """The ``n``-th smallest member (1-based) or ``None`` if it lies past the limit."""
        if n < 1:
            raise InvalidParameterError("member rank must be at least 1")
        if self.counts[-1] < n:
            return None
        return int(np.searchsorted(self.counts, n))

    def describe(self) -> str:
        return self.kind


def _check_limit(limit: int, max_limit: int) -> None:
    if isinstance(limit, bool) or not isinstance(limit, (int, np.integer)) or limit < 1:
        raise InvalidParameterError(f"limit must be a positive integer, got {limit!r}")
    if limit > max_limit:
        raise ResourceError(f"limit {limit} exceeds the memory budget of {max_limit}")


def _freeze(kind, limit, membership, source, max_limit) -> TargetSet:
    membership[0] = False
    counts = np.cumsum(membership, dtype=np.int64)
    membership.flags.writeable = False
    counts.flags.writeable = False
    return TargetSet(kind, int(limit), membership, counts, source, max_limit)


def prime_set(limit: int, max_limit: int = MAX_LIMIT) -> TargetSet:
    _check_limit(limit, max_limit)
    return _freeze("primes", limit, sieve(int(limit)), None, max_limit)


def explicit_set(values, limit: int | None = None, max_limit: int = MAX_LIMIT) -> TargetSet:
    """Target set from a finite list of integers; non-positive entries are ignored."""
    members = tuple(sorted({int(v) for v in values if int(v) >= 1}))
    if limit is None:
        limit = members[-1] if members else 1
    _check_limit(limit, max_limit)
    membership = np.zeros(limit + 1, dtype=bool)
    inside = [v for v in members if v <= limit]
    membership[inside] = True
    return _freeze("explicit-list", limit, membership, members, max_limit)


def predicate_set(pred: Callable[[int], bool], limit: int, max_limit: int = MAX_LIMIT) -> TargetSet:
    _check_limit(limit, max_limit)
    membership = np.fromiter((bool(pred(x)) for x in range(limit + 1)), dtype=bool, count=limit + 1)
    return _freeze("predicate", limit, membership, pred, max_limit)


def count(ts: TargetSet, n: int) -> int:
    """Number of members ``<= n``."""
    if n > ts.limit:
        raise OutOfRangeError(f"count({n}) is beyond the target set limit {ts.limit}; grow first")
    if n < 1:
        return 0
    return int(ts.counts[n])


def grow(ts: TargetSet, new_limit: int) -> TargetSet:
    if new_limit <= ts.limit:
        raise InvalidParameterError(f"new limit {new_limit} must exceed current limit {ts.limit}")
    _check_limit(new_limit, ts.max_limit)
    if ts.kind == "primes":
        membership = np.empty(new_limit + 1, dtype=bool)
        membership[: ts.limit + 1] = ts.membership
        # Segmented extension: strike multiples of the base primes in the new range.
        membership[ts.limit + 1 :] = True
        base = sieve(int(new_limit**0.5))
        for p in np.flatnonzero(base):
            p = int(p)
            start = max(p * p, ((ts.limit + 1 + p - 1) // p) * p)
            membership[start::p] = False
        return _freeze("primes", new_limit, membership, None, ts.max_limit)
    if ts.kind == "explicit-list":
        return explicit_set(ts.source, new_limit, ts.max_limit)
    membership = np.empty(new_limit + 1, dtype=bool)
    membership[: ts.limit + 1] = ts.membership
    pred = ts.source
    membership[ts.limit + 1 :] = [bool(pred(x)) for x in range(ts.limit + 1, new_limit + 1)]
    return _freeze("predicate", new_limit, membership, pred, ts.max_limit)


def ensure(ts: TargetSet, needed: int) -> TargetSet:
    """Return ``ts`` or a grown copy covering ``needed``, doubling the limit."""
    if needed <= ts.limit:
        return ts
    new_limit = ts.limit
    while new_limit < needed:
        new_limit *= 2
    return grow(ts, min(max(new_limit, needed), max(ts.max_limit, needed)))


def load_targets(path: str | Path, limit: int | None = None) -> TargetSet:
    """Read newline-delimited integers; blank lines and ``#`` comments are skipped."""
    values = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InvalidParameterError(f"cannot read target file {path!r}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(int(line))
        except ValueError as exc:
            raise InvalidParameterError(f"{path}:{lineno}: not an integer: {line!r}") from exc
    return explicit_set(values, limit)


def parse_targets(text: str, limit: int = 1024) -> TargetSet:
    """Parse ``primes`` or ``file:PATH`` from the command line."""
    if text == "primes":
        return prime_set(limit)
    kind, _, arg = text.partition(":")
    if kind == "file" and arg:
        return load_targets(arg)
    raise InvalidParameterError(f"unknown target description {text!r}; use primes or file:PATH")
