"""Exact rational scalars and closed intervals.

Scalars are plain :class:`fractions.Fraction` values (always reduced, with a
positive denominator).  Intervals are immutable and hashable so they can be
used directly as Markov-diagram vertex keys.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from .errors import ParseError

Rational = Fraction
RationalLike = Union[Fraction, int, str]

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)(?:\s*/\s*(\d+))?\s*$")


def parse_rational(text: RationalLike, where: str = "") -> Fraction:
    """Parse ``"p/q"`` or an integer string into a Fraction.

    Floats are rejected on purpose: geometry must stay exact.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise ParseError(f"{where}: expected a rational string, got a boolean", field=where)
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ParseError(
            f"{where}: expected a rational string like \"3/4\", got {type(text).__name__}",
            field=where,
        )
    m = _RATIONAL_RE.match(text)
    if m is None:
        raise ParseError(f"{where}: malformed rational {text!r}", field=where)
    num, den = m.group(1), m.group(2)
    if den is not None and int(den) == 0:
        raise ParseError(f"{where}: zero denominator in {text!r}", field=where)
    return Fraction(int(num), int(den) if den is not None else 1)


def format_rational(x: Fraction) -> str:
    return str(Fraction(x))


def log_abs(x: Fraction) -> float:
    """``log|x|`` computed from the numerator and denominator separately.

    Avoids the float overflow/underflow of ``math.log(float(x))`` when the
    denominator has thousands of digits.
    """
    x = abs(Fraction(x))
    if x == 0:
        return -math.inf
    return math.log(x.numerator) - math.log(x.denominator)


@dataclass(frozen=True, order=True)
class Interval:
    """Closed interval ``[lo, hi]`` with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def hull(cls, points: Iterable[Fraction]) -> "Interval":
        pts = list(points)
        return cls(min(pts), max(pts))

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_open(self, x) -> bool:
        return self.lo < x < self.hi

    def issubset(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def intersect(self, other: "Interval") -> "Interval | None":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)

    def interiors_meet(self, other: "Interval") -> bool:
        return max(self.lo, other.lo) < min(self.hi, other.hi)

    def distance_to(self, x: Fraction) -> Fraction:
        if x < self.lo:
            return self.lo - x
        if x > self.hi:
            return x - self.hi
        return Fraction(0)

    def affine_image(self, slope: Fraction, offset: Fraction) -> "Interval":
        a, b = slope * self.lo + offset, slope * self.hi + offset
        return Interval(a, b) if a <= b else Interval(b, a)

    def to_json(self) -> list[str]:
        return [format_rational(self.lo), format_rational(self.hi)]

    @classmethod
    def from_json(cls, pair, where: str = "") -> "Interval":
        return cls(parse_rational(pair[0], where + "[0]"), parse_rational(pair[1], where + "[1]"))

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


def merge_intervals(intervals: Iterable[Interval]) -> list[Interval]:
    """Union of closed intervals as sorted disjoint components (touching ones merge)."""
    out: list[Interval] = []
    for iv in sorted(intervals):
        if out and iv.lo <= out[-1].hi:
            if iv.hi > out[-1].hi:
                out[-1] = Interval(out[-1].lo, iv.hi)
        else:
            out.append(iv)
    return out


def dyadic_below(bound: Fraction, max_exponent: int = 20) -> Fraction:
    """Largest ``k / 2**max_exponent`` strictly below a positive ``bound``.

    Falls back to finer dyadics when the bound is smaller than ``2**-max_exponent``.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    exp = max_exponent
    while True:
        q = 1 << exp
        k = math.ceil(bound * q) - 1
        if k >= 1:
            return Fraction(k, q)
        exp += 4
