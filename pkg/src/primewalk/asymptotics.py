"""Large-k approximations to E(L_k).

Natural logarithms throughout. The refined form is

    f(k) = k (ln k + ln ln k + c1) + c2

whose constants are fitted by ordinary least squares on absolute error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidParameterError, SingularDesignError


@dataclass(frozen=True)
class HeuristicParams:
    c1: float
    c2: float

    def __post_init__(self):
        if not (math.isfinite(self.c1) and math.isfinite(self.c2)):
            raise InvalidParameterError(f"constants must be finite, got {self.c1}, {self.c2}")


PUBLISHED = HeuristicParams(0.543, 8.953)


@dataclass(frozen=True)
class FitResult:
    params: HeuristicParams
    ks: tuple[int, ...]
    means: tuple[float, ...]
    residuals: tuple[float, ...]

    @property
    def sum_of_squares(self) -> float:
        return math.fsum(r * r for r in self.residuals)

    def ratios(self) -> list[float]:
        return [m / heuristic(k, self.params) for k, m in zip(self.ks, self.means)]

    def to_dict(self) -> dict:
        return {
            "c1": self.params.c1,
            "c2": self.params.c2,
            "residuals": [
                {"k": k, "mean": m, "fitted": m - r, "residual": r}
                for k, m, r in zip(self.ks, self.means, self.residuals)
            ],
            "sum_of_squares": self.sum_of_squares,
        }


def leading_order(k: int) -> float:
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    return k * math.log(k)


def _base(k: float) -> float:
    return k * (math.log(k) + math.log(math.log(k)))


def heuristic(k: int, params: HeuristicParams = PUBLISHED) -> float:
    if k < 2:
        raise DomainError(f"ln ln k needs k >= 2, got {k}")
    return _base(k) + params.c1 * k + params.c2


def residuals(pairs, params: HeuristicParams) -> list[float]:
    return [m - heuristic(k, params) for k, m in pairs]


def fit_constants(pairs) -> FitResult:
    """Least-squares ``(c1, c2)`` for ``mean - k(ln k + ln ln k) ~ c1 k + c2``."""
    pairs = [(int(k), float(m)) for k, m in pairs]
    if len(pairs) < 2:
        raise InvalidParameterError("need at least two (k, mean) pairs")
    if any(k < 2 for k, _ in pairs):
        raise DomainError("every k must be at least 2")
    ks = np.array([k for k, _ in pairs], dtype=float)
    if np.all(ks == ks[0]):
        raise SingularDesignError("all k values are equal; c1 and c2 are not identifiable")
    y = np.array([m - _base(k) for k, m in pairs])
    design = np.column_stack([ks, np.ones_like(ks)])
    (c1, c2), *_ = np.linalg.lstsq(design, y, rcond=None)
    params = HeuristicParams(float(c1), float(c2))
    return FitResult(
        params,
        tuple(k for k, _ in pairs),
        tuple(m for _, m in pairs),
        tuple(residuals(pairs, params)),
    )
