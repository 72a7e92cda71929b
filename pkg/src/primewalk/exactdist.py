"""Distribution of L_k, the roll count at which the k-th target is hit.

The forward dynamic program tracks the mass of every state
``(current sum, hits so far)`` over a dense band of sums, one row per hit
level. A roll convolves each row with the face weights; on target columns
the mass moves up one row. The mass leaving row ``h`` at roll ``n`` is
exactly ``P(L_{h+1} = n)``, so one run over ``K`` levels yields the law
of every ``L_k`` with ``k <= K``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .die import DieSpec
from .errors import (
    BudgetExceededError,
    HorizonExceededError,
    InvalidParameterError,
    UndefinedMomentError,
)
from .targets import TargetSet, ensure

log = logging.getLogger(__name__)

MAX_HORIZON = 200_000
DECAY_WINDOW = 50
DEFAULT_MOMENT_TOL = 1e-6
ENUMERATION_BUDGET = 10_000_000
# Masses below this are flushed to zero; they sit ~290 orders below any
# reported quantity and would otherwise become slow subnormals.
UNDERFLOW = 1e-300


def default_tail_eps(k: int) -> float:
    return 1e-13 if k <= 30 else 1e-10


@dataclass(frozen=True, eq=False)
class LkDistribution:
    """Truncated law of ``L_k``; ``pmf[n] = P(L_k = n)`` for ``n = 0..n_max``.

    ``tail_eps`` is ``None`` for a fixed-horizon run, where ``tail_mass`` is
    whatever remains unabsorbed at the horizon.
    """

    k: int
    die: DieSpec
    target_kind: str
    pmf: np.ndarray = field(repr=False)
    tail_mass: float
    tail_eps: float | None
    decay_ratio: float
    moment_error_bound: float

    @property
    def n_max(self) -> int:
        return len(self.pmf) - 1

    @property
    def n_min(self) -> int:
        nz = np.flatnonzero(self.pmf)
        return int(nz[0]) if len(nz) else self.n_max

    @property
    def absorbed(self) -> float:
        return math.fsum(self.pmf)


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    std: float
    moment_error_bound: float
    _skewness: float | None = None
    _kurtosis: float | None = None

    @property
    def skewness(self) -> float:
        if self._skewness is None:
            raise UndefinedMomentError("skewness is undefined for a zero-variance law")
        return self._skewness

    @property
    def kurtosis(self) -> float:
        if self._kurtosis is None:
            raise UndefinedMomentError("kurtosis is undefined for a zero-variance law")
        return self._kurtosis


def tail_moment_bound(active: float, rho: float, n: int, power: int = 4) -> float:
    """Bound on ``sum_{t>=1} active * rho^(t-1) * (n+t)^power``.

    This caps the contribution of the unseen tail to the raw ``power``-th
    moment when unabsorbed mass decays geometrically at rate ``rho``.
    """
    if active == 0.0:
        return 0.0
    if not rho < 1.0:
        return math.inf
    # Terms peak near t = power / -log(rho) - n and then decay; sum far enough past both.
    span = int(math.ceil((power * math.log1p(1e6) + 80.0) / -math.log(rho))) + 1
    if span > 5_000_000:
        return math.inf
    t = np.arange(1, span + 1, dtype=float)
    terms = np.exp((t - 1) * math.log(rho) + power * np.log(n + t))
    return active * math.fsum(terms)


class ForwardDP:
    """Forward state propagation for levels ``0..levels-1``.

    After :meth:`step`, ``state[h, c]`` is the probability that after
    ``n`` rolls the sum is ``lo + c`` and exactly ``h`` targets were hit
    (``h < levels``). ``flux[n][h]`` is the mass promoted from level ``h``
    to ``h + 1`` at roll ``n``.
    """

    def __init__(self, die: DieSpec, ts: TargetSet, levels: int):
        if levels < 1:
            raise InvalidParameterError("need at least one hit level")
        self.die = die
        self.ts = ts
        self.levels = levels
        self.faces = [(v, float(p)) for v, p in die.faces]
        self.state = np.ones((1, 1))
        self.lo = 0
        self.n = 0
        self.flux: list[np.ndarray] = []
        self.active_history = [1.0]

    @property
    def active(self) -> float:
        return self.active_history[-1]

    def step(self) -> None:
        st = self.state
        rows, width = st.shape
        fmin, fmax = self.die.min_face, self.die.max_face
        new_width = width + fmax - fmin
        conv = np.zeros((rows, new_width))
        for v, p in self.faces:
            off = v - fmin
            conv[:, off : off + width] += p * st
        self.n += 1
        new_lo = self.lo + fmin

        self.ts = ensure(self.ts, new_lo + new_width - 1)
        tcols = np.flatnonzero(self.ts.window(new_lo, new_lo + new_width))

        moving = conv[:, tcols]
        promoted = np.zeros(self.levels)
        promoted[:rows] = moving.sum(axis=1)
        self.flux.append(promoted)

        out_rows = min(rows + 1, self.levels)
        if out_rows > rows:
            out = np.zeros((out_rows, new_width))
            out[:rows] = conv
        else:
            out = conv
        out[:, tcols] = 0.0
        out[1:out_rows, tcols] = moving[: out_rows - 1]
        out[out < UNDERFLOW] = 0.0

        # Trim columns that carry no mass at either edge of the band.
        live = np.flatnonzero(out.any(axis=0))
        if len(live) == 0:
            out = np.zeros((out_rows, 1))
            first = 0
        else:
            first, last = int(live[0]), int(live[-1])
            out = out[:, first : last + 1]
        self.state = out
        self.lo = new_lo + first
        self.active_history.append(math.fsum(out.sum(axis=1)))

    @property
    def exhausted(self) -> bool:
        """True when a finite target list has no member left ahead of the band."""
        src = self.ts.source
        return self.ts.kind == "explicit-list" and (not src or src[-1] < self.lo)

    def decay_ratio(self, window: int = DECAY_WINDOW) -> float:
        hist = self.active_history
        w = min(window, len(hist) - 1)
        if w < 1 or hist[-1] == 0.0:
            return 0.0
        if hist[-1 - w] == 0.0:
            return 1.0
        return (hist[-1] / hist[-1 - w]) ** (1.0 / w)

    def level_tail(self, k: int) -> float:
        """Mass still below ``k`` hits."""
        return math.fsum(self.state[:k].sum(axis=1))

    def pmf(self, k: int) -> np.ndarray:
        out = np.zeros(self.n + 1)
        if self.flux:
            out[1:] = np.array([f[k - 1] for f in self.flux])
        return out


def _point_mass(die: DieSpec, ts: TargetSet) -> LkDistribution:
    return LkDistribution(0, die, ts.kind, np.ones(1), 0.0, 0.0, 0.0, 0.0)


def _package(dp: ForwardDP, k: int, tail_eps: float | None) -> LkDistribution:
    tail = dp.level_tail(k)
    rho = dp.decay_ratio()
    return LkDistribution(
        k=k,
        die=dp.die,
        target_kind=dp.ts.kind,
        pmf=dp.pmf(k),
        tail_mass=tail,
        tail_eps=tail_eps,
        decay_ratio=rho,
        moment_error_bound=tail_moment_bound(tail, rho, dp.n),
    )


def lk_distributions(
    die: DieSpec,
    ts: TargetSet,
    ks,
    tail_eps: float | None = None,
    horizon: int | None = None,
    moment_tol: float = DEFAULT_MOMENT_TOL,
    max_horizon: int = MAX_HORIZON,
    progress=None,
) -> dict[int, LkDistribution]:
    """Laws of ``L_k`` for every ``k`` in ``ks`` from a single DP run.

    Certified mode (``horizon=None``): roll until the unabsorbed mass is
    below ``tail_eps`` and the geometric tail bound on the fourth raw
    moment is below ``moment_tol``. Fixed mode: stop after exactly
    ``horizon`` rolls whatever mass remains.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 0:
        raise InvalidParameterError(f"k values must be nonnegative, got {ks}")
    out = {}
    if ks[0] == 0:
        out[0] = _point_mass(die, ts)
        ks = ks[1:]
        if not ks:
            return out
    kmax = ks[-1]
    if horizon is None:
        tail_eps = default_tail_eps(kmax) if tail_eps is None else tail_eps
        if not 0.0 < tail_eps < 1.0:
            raise InvalidParameterError(f"tail_eps must lie in (0, 1), got {tail_eps}")
    elif horizon < 0:
        raise InvalidParameterError(f"horizon must be nonnegative, got {horizon}")
    else:
        tail_eps = None

    if ts.kind == "explicit-list" and len(ts.source) < kmax:
        raise InvalidParameterError(
            f"the target list has {len(ts.source)} members; L_{kmax} is infinite"
        )

    dp = ForwardDP(die, ts, kmax)
    while True:
        if horizon is not None:
            if dp.n >= horizon:
                break
        elif dp.active < tail_eps:
            bound = tail_moment_bound(dp.active, dp.decay_ratio(), dp.n)
            if bound < moment_tol:
                break
        if dp.n >= max_horizon or (dp.exhausted and dp.active > 0.0):
            partial = {k: _package(dp, k, tail_eps) for k in ks}
            raise HorizonExceededError(
                f"unabsorbed mass {dp.active:.3e} still above the tail target after "
                f"{dp.n} rolls" + (" with no targets left ahead" if dp.exhausted else ""),
                partial=partial,
            )
        dp.step()
        if progress is not None and dp.n % 100 == 0:
            progress(dp.n, dp.active)

    for k in ks:
        out[k] = _package(dp, k, tail_eps)
    return out


def lk_distribution(
    die: DieSpec,
    ts: TargetSet,
    k: int,
    tail_eps: float | None = None,
    horizon: int | None = None,
    **kwargs,
) -> LkDistribution:
    return lk_distributions(die, ts, [k], tail_eps=tail_eps, horizon=horizon, **kwargs)[k]


def truncated(dist: LkDistribution, horizon: int) -> LkDistribution:
    """The same law cut at ``horizon`` rolls, as a fixed-horizon run would give."""
    if horizon > dist.n_max:
        raise InvalidParameterError(f"horizon {horizon} exceeds n_max {dist.n_max}")
    cut = dist.pmf[horizon + 1 :]
    tail = dist.tail_mass + math.fsum(cut)
    return LkDistribution(
        k=dist.k,
        die=dist.die,
        target_kind=dist.target_kind,
        pmf=dist.pmf[: horizon + 1].copy(),
        tail_mass=tail,
        tail_eps=None,
        decay_ratio=dist.decay_ratio,
        moment_error_bound=tail_moment_bound(tail, dist.decay_ratio, horizon),
    )


def moments(dist: LkDistribution) -> MomentSummary:
    """Mean, standard deviation, skewness and (non-excess) kurtosis.

    Moments are taken over the absorbed mass, normalized to 1, i.e. of
    ``L_k`` conditioned on ``L_k <= n_max``. In certified mode the
    normalization shifts nothing beyond ``tail_mass``.
    """
    pmf = dist.pmf
    total = math.fsum(pmf)
    if total <= 0.0:
        raise UndefinedMomentError("no probability mass was absorbed")
    w = pmf / total
    n = np.arange(len(pmf), dtype=float)
    mean = math.fsum(n * w)
    d = n - mean
    m2 = math.fsum(d * d * w)
    std = math.sqrt(m2)
    bound = dist.moment_error_bound
    if m2 == 0.0 or std <= 1e-12 * max(1.0, abs(mean)):
        return MomentSummary(mean, 0.0, bound)
    m3 = math.fsum(d**3 * w)
    m4 = math.fsum(d**4 * w)
    return MomentSummary(mean, std, bound, m3 / std**3, m4 / (m2 * m2))


def scaled_pdf(dist: LkDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Standardized points ``z_n = (n - mean) / std`` and densities ``std * pmf(n)``."""
    m = moments(dist)
    if m.std == 0.0:
        raise UndefinedMomentError("scaled density is undefined for a zero-variance law")
    lo = dist.n_min
    n = np.arange(lo, dist.n_max + 1, dtype=float)
    z = (n - m.mean) / m.std
    density = m.std * dist.pmf[lo:] / dist.absorbed
    return z, density


def brute_force_pmf(
    die: DieSpec,
    ts: TargetSet,
    k: int,
    max_rolls: int,
    budget: int = ENUMERATION_BUDGET,
) -> list:
    """``P(L_k = n)`` for ``n = 0..max_rolls`` by enumerating roll sequences.

    Each sequence is followed roll by roll until its ``k``-th hit or
    ``max_rolls``; a sequence ends there, so absorbed prefixes are not
    extended. Probabilities are ``Fraction`` for exact dice, floats
    otherwise. ``budget`` caps the number of enumerated prefixes.
    """
    if k < 0 or max_rolls < 0:
        raise InvalidParameterError("k and max_rolls must be nonnegative")
    exact = die.exact
    zero = Fraction(0) if exact else 0.0
    pmf = [zero] * (max_rolls + 1)
    if k == 0:
        pmf[0] = Fraction(1) if exact else 1.0
        return pmf
    faces = [(v, p if exact else float(p)) for v, p in die.faces]
    need = max_rolls * die.max_face
    if need > ts.limit:
        ts = ensure(ts, need)
    member = ts.membership

    visited = 0
    stack = [(0, 0, 0, Fraction(1) if exact else 1.0)]
    while stack:
        rolls, total, hits, prob = stack.pop()
        if rolls == max_rolls:
            continue
        for v, p in faces:
            visited += 1
            if visited > budget:
                raise BudgetExceededError(
                    f"enumeration exceeded {budget} prefixes (k={k}, max_rolls={max_rolls})"
                )
            s = total + v
            h = hits + (1 if member[s] else 0)
            q = prob * p
            if h == k:
                pmf[rolls + 1] += q
            else:
                stack.append((rolls + 1, s, h, q))
    return pmf
