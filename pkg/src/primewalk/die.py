"""Discrete dice with positive integer faces.

A die is a finite law on positive integers. Probabilities stay exact
(``Fraction``) when every input probability is rational, and become
floats as soon as one float is supplied. Numerical code downstream only
uses :attr:`DieSpec.weights`, the float view.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce
from numbers import Rational
from pathlib import Path

import numpy as np

from .errors import (
    CommonDivisorError,
    InvalidParameterError,
    NormalizationError,
)

FLOAT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DieSpec:
    """Validated die. Build with :func:`fair_die` or :func:`custom_die`."""

    faces: tuple[tuple[int, Fraction | float], ...]

    @property
    def exact(self) -> bool:
        return all(isinstance(p, Fraction) for _, p in self.faces)

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.faces)

    @property
    def min_face(self) -> int:
        return self.faces[0][0]

    @property
    def max_face(self) -> int:
        return self.faces[-1][0]

    @cached_property
    def mean(self) -> Fraction | float:
        if self.exact:
            return sum((v * p for v, p in self.faces), Fraction(0))
        return math.fsum(v * float(p) for v, p in self.faces)

    @cached_property
    def weights(self) -> np.ndarray:
        """Array ``q`` of length ``max_face + 1`` with ``q[j] = P(d = j)``."""
        q = np.zeros(self.max_face + 1)
        for v, p in self.faces:
            q[v] = float(p)
        q.flags.writeable = False
        return q

    def to_dict(self) -> dict:
        # Fractions are written as "p/q" strings so the round trip is exact.
        return {
            "faces": [
                {"value": v, "prob": f"{p.numerator}/{p.denominator}" if isinstance(p, Fraction) else p}
                for v, p in self.faces
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> DieSpec:
        try:
            raw = [(f["value"], f["prob"]) for f in data["faces"]]
        except (KeyError, TypeError) as exc:
            raise InvalidParameterError(f"malformed die description: {exc}") from exc
        return custom_die(raw)

    @classmethod
    def from_json(cls, text: str) -> DieSpec:
        return cls.from_dict(json.loads(text))

    def __str__(self) -> str:
        return "die(" + ", ".join(f"{v}:{p}" for v, p in self.faces) + ")"


def fair_die(r: int) -> DieSpec:
    """Uniform die on ``1..r``."""
    if isinstance(r, bool) or not isinstance(r, int) or r < 1:
        raise InvalidParameterError(f"number of faces must be a positive integer, got {r!r}")
    p = Fraction(1, r)
    return DieSpec(tuple((v, p) for v in range(1, r + 1)))


def _coerce_prob(p) -> Fraction | float:
    if isinstance(p, bool):
        raise InvalidParameterError(f"probability must be numeric, got {p!r}")
    if isinstance(p, Fraction):
        return p
    if isinstance(p, Rational):
        return Fraction(p)
    if isinstance(p, str):
        try:
            return Fraction(p) if "/" in p else float(p)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParameterError(f"cannot parse probability {p!r}") from exc
    if isinstance(p, (float, np.floating)):
        return float(p)
    raise InvalidParameterError(f"probability must be numeric, got {p!r}")


def custom_die(faces) -> DieSpec:
    """Validate ``(value, probability)`` pairs and return a :class:`DieSpec`.

    Zero-probability faces are dropped before the gcd of the support is
    checked. A support with a common divisor above 1 is rejected since the
    walk would skip whole residue classes.
    """
    faces = list(faces)
    if not faces:
        raise InvalidParameterError("a die needs at least one face")

    pairs = []
    for value, prob in faces:
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise InvalidParameterError(f"face values must be integers, got {value!r}")
        value = int(value)
        if value < 1:
            raise InvalidParameterError(f"face values must be positive, got {value}")
        prob = _coerce_prob(prob)
        if not (0 <= prob <= 1) or (isinstance(prob, float) and not math.isfinite(prob)):
            raise InvalidParameterError(f"probability {prob} outside [0, 1]")
        pairs.append((value, prob))

    values = [v for v, _ in pairs]
    if len(set(values)) != len(values):
        raise InvalidParameterError(f"face values must be distinct, got {values}")

    if all(isinstance(p, Fraction) for _, p in pairs):
        total = sum((p for _, p in pairs), Fraction(0))
        if total != 1:
            raise NormalizationError(f"probabilities sum to {total}, not 1")
    else:
        pairs = [(v, float(p)) for v, p in pairs]
        total = math.fsum(p for _, p in pairs)
        if abs(total - 1.0) > FLOAT_SUM_TOL:
            raise NormalizationError(f"probabilities sum to {total!r}, not 1")

    support = sorted((v, p) for v, p in pairs if p > 0)
    g = reduce(math.gcd, (v for v, _ in support))
    if g != 1:
        raise CommonDivisorError(
            f"face values {[v for v, _ in support]} share the common divisor {g}"
        )
    return DieSpec(tuple(support))


def parse_die(text: str) -> DieSpec:
    """Parse a command-line die description: ``fair:R`` or ``file:PATH``."""
    kind, _, arg = text.partition(":")
    if kind == "fair":
        try:
            r = int(arg)
        except ValueError as exc:
            raise InvalidParameterError(f"bad face count in {text!r}") from exc
        return fair_die(r)
    if kind == "file":
        try:
            return DieSpec.from_json(Path(arg).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidParameterError(f"cannot read die file {arg!r}: {exc}") from exc
    raise InvalidParameterError(f"unknown die description {text!r}; use fair:R or file:PATH")
