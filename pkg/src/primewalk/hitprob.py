"""Probability that the running sum of die rolls ever lands on ``x``.

With face weights ``q_j`` the hit probabilities obey the renewal recurrence

    p(0) = 1,  p(x) = 0 for x < 0,  p(i) = sum_j q_j p(i - j)  (i >= 1)

and converge to ``1 / E[d]``. The deviation ``e(i) = p(i) - 1/E[d]`` is
propagated separately so it keeps full relative precision long after
``p`` itself has converged to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .die import DieSpec
from .errors import InsufficientDataError, NumericalError, OutOfRangeError
from .targets import TargetSet

DOMINANT_RESIDUAL_TOL = 1e-9
DERIVATIVE_TOL = 1e-9
GROWTH_SLACK = 1.25


@dataclass(frozen=True, eq=False)
class HitProbSeries:
    die: DieSpec
    values: np.ndarray
    deviation: np.ndarray
    limit: float
    limit_exact: Fraction | None

    @property
    def n(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, x: int) -> float:
        return float(self.values[x])


@dataclass(frozen=True)
class SpectralAnalysis:
    roots: tuple[complex, ...]
    residuals: tuple[float, ...]
    dominant_index: int
    dominant_root_residual: float
    derivative_at_one: float
    subdominant_max_modulus: float
    convergence_constant_estimate: float | None = None

    @property
    def dominant_root(self) -> complex:
        return self.roots[self.dominant_index]

    @property
    def mu(self) -> float:
        return 1.0 - self.subdominant_max_modulus


def _run_recurrence(q: np.ndarray, init: np.ndarray, n: int) -> np.ndarray:
    r = len(q) - 1
    buf = np.zeros(n + r + 1)
    buf[: r + 1] = init
    w = q[1:][::-1]  # w[r - j] = q_j, so buf[i-r:i] @ w = sum_j q_j buf[i-j]
    for i in range(r + 1, n + r + 1):
        buf[i] = math.fsum(buf[i - r : i] * w)
    return buf[r:]


def _deviation_series(die: DieSpec, limit: float, n: int) -> np.ndarray:
    # Renewal identity: sum_{j=0}^{r-1} P(d > j) e(i - j) = 0 for every i >= 0,
    # a recurrence of order r - 1 whose characteristic polynomial is
    # P(z) / (z - 1). Running it instead of the full recurrence keeps
    # rounding errors out of the non-decaying mode at z = 1.
    q = die.weights
    r = die.max_face
    surv = np.array([math.fsum(q[j + 1 :]) for j in range(r)])  # surv[j] = P(d > j)
    out = np.empty(n + r)
    out[: r - 1] = -limit  # x = -(r-2) .. -1; for r = 1 this is empty
    out[r - 1] = 1.0 - limit
    w = -surv[1:][::-1]
    for b in range(r, n + r):
        out[b] = math.fsum(out[b - r + 1 : b] * w) if r > 1 else 0.0
    return out[r - 1 :]


def hit_probabilities(die: DieSpec, n: int) -> HitProbSeries:
    """Series ``p(0..n)`` together with its deviation from the limit."""
    if n < 0:
        raise OutOfRangeError(f"horizon must be nonnegative, got {n}")
    q = die.weights
    r = die.max_face
    limit_exact = Fraction(1) / die.mean if die.exact else None
    limit = float(limit_exact) if limit_exact is not None else 1.0 / die.mean

    # Base cases: r-1 virtual zeros before p(0) = 1.
    init = np.zeros(r + 1)
    init[r] = 1.0
    values = _run_recurrence(q, init, n)

    deviation = _deviation_series(die, limit, n)

    values.flags.writeable = False
    deviation.flags.writeable = False
    return HitProbSeries(die, values, deviation, limit, limit_exact)


def characteristic_coefficients(die: DieSpec) -> np.ndarray:
    """Coefficients of ``z^r - sum_j q_j z^(r-j)``, highest degree first."""
    q = die.weights
    coeffs = np.empty(die.max_face + 1)
    coeffs[0] = 1.0
    coeffs[1:] = -q[1:]
    return coeffs


def companion_matrix(coeffs: np.ndarray) -> np.ndarray:
    """Frobenius companion matrix of a monic polynomial (highest degree first)."""
    r = len(coeffs) - 1
    c = np.zeros((r, r))
    c[0, :] = -np.asarray(coeffs[1:]) / coeffs[0]
    c[1:, :-1] = np.eye(r - 1)
    return c


def spectral(die: DieSpec) -> SpectralAnalysis:
    coeffs = characteristic_coefficients(die)
    r = die.max_face
    try:
        roots = np.linalg.eigvals(companion_matrix(coeffs))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"companion eigenvalue solver failed for {die}: {exc}") from exc
    # Stable ordering: descending modulus, then by angle.
    order = sorted(range(r), key=lambda i: (-round(abs(roots[i]), 12), np.angle(roots[i])))
    roots = roots[order]
    residuals = np.abs(np.polyval(coeffs, roots))

    dom = int(np.argmin(np.abs(roots - 1.0)))
    dom_residual = float(abs(np.polyval(coeffs, 1.0 + 0j)))
    if abs(roots[dom] - 1.0) > DOMINANT_RESIDUAL_TOL or dom_residual > DOMINANT_RESIDUAL_TOL:
        raise NumericalError(
            f"no root within {DOMINANT_RESIDUAL_TOL} of 1 for {die}: nearest {roots[dom]}, "
            f"|P(1)| = {dom_residual}, roots = {roots}"
        )
    deriv = float(abs(np.polyval(np.polyder(coeffs), 1.0)))
    if deriv <= DERIVATIVE_TOL:
        raise NumericalError(f"P'(1) = {deriv} vanishes; the root at 1 is not simple")

    others = np.delete(roots, dom)
    sub = float(np.max(np.abs(others))) if len(others) else 0.0
    if sub >= 1.0:
        raise NumericalError(f"a non-dominant root has modulus {sub} >= 1 for {die}")
    return SpectralAnalysis(
        roots=tuple(complex(z) for z in roots),
        residuals=tuple(float(e) for e in residuals),
        dominant_index=dom,
        dominant_root_residual=dom_residual,
        derivative_at_one=deriv,
        subdominant_max_modulus=sub,
    )


def envelope_ratios(series: HitProbSeries, spec: SpectralAnalysis) -> np.ndarray:
    """``|p(x) - limit| / rho^x`` for ``x = 1..n`` with ``rho`` the subdominant modulus."""
    dev = np.abs(series.deviation[1:])
    rho = spec.subdominant_max_modulus
    if rho == 0.0:
        return dev.copy()
    x = np.arange(1, series.n + 1)
    with np.errstate(divide="ignore"):
        logs = np.log(dev) - x * math.log(rho)
    return np.exp(logs)


def convergence_envelope(series: HitProbSeries, spec: SpectralAnalysis) -> tuple[float, bool]:
    """Estimate ``C`` in ``|p(x) - limit| <= C rho^x`` and whether it looks bounded.

    ``C`` is the largest ratio ``|p(x) - limit| / rho^x`` over the stored
    ``x >= 1``. The ratios are accepted as bounded when they are finite and
    their maximum over the last quarter of the horizon stays within
    ``GROWTH_SLACK`` of the maximum before it. A repeated subdominant root
    makes the ratios grow linearly, which fails this test.
    """
    if series.n < 10:
        raise InsufficientDataError(f"horizon {series.n} too short; need at least 10")
    ratios = envelope_ratios(series, spec)
    c_est = float(np.max(ratios))
    cut = (3 * len(ratios)) // 4
    head = float(np.max(ratios[:cut]))
    tail = float(np.max(ratios[cut:]))
    verified = bool(np.all(np.isfinite(ratios)) and tail <= GROWTH_SLACK * head + 1e-300)
    return c_est, verified


def partial_sum_gaps(series: HitProbSeries) -> np.ndarray:
    """``sum_{i<=n} p(i) - n * limit`` for ``n = 1..N``, via the deviation series."""
    return np.cumsum(series.deviation[1:])


def settling_index(series: HitProbSeries, g: float) -> int | None:
    """Smallest ``x0`` such that for every stored ``x >= x0`` both log-ratios

        log(p(x) / limit)  and  log((1 - p(x)) / (1 - limit))

    are below ``1/g`` in absolute value. ``None`` if the horizon is too short.
    """
    limit = series.limit
    dev = series.deviation
    eps1 = np.abs(np.log1p(dev[1:] / limit))
    if limit < 1.0:
        eps2 = np.abs(np.log1p(-dev[1:] / (1.0 - limit)))
    else:
        eps2 = np.zeros_like(eps1)
    bad = np.flatnonzero((eps1 >= 1.0 / g) | (eps2 > 1.0 / g))
    if len(bad) == 0:
        return 1
    x0 = int(bad[-1]) + 2
    return x0 if x0 <= series.n else None


def expected_hits(series: HitProbSeries, ts: TargetSet, m: int) -> float:
    """Expected number of target members in ``[1, m]`` hit by the walk."""
    if m < 1:
        return 0.0
    if m > series.n:
        raise OutOfRangeError(f"m = {m} exceeds the series horizon {series.n}")
    if m > ts.limit:
        raise OutOfRangeError(f"m = {m} exceeds the target set limit {ts.limit}")
    idx = ts.members(m)
    return math.fsum(series.values[idx])
