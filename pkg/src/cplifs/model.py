"""Exact model of a continuous piecewise linear IFS.

A map is stored as its breaking points, its slopes and its value at zero; the
offsets of the linear pieces are always derived from those, which makes every
map continuous by construction.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from . import errors
from .rational import Interval, format_rational, parse_rational

DEFAULT_BUDGET = 1_000_000


@dataclass(frozen=True)
class PiecewiseLinearMap:
    breaks: tuple[Fraction, ...]
    slopes: tuple[Fraction, ...]
    f0: Fraction

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(Fraction(b) for b in self.breaks))
        object.__setattr__(self, "slopes", tuple(Fraction(r) for r in self.slopes))
        object.__setattr__(self, "f0", Fraction(self.f0))
        if len(self.slopes) != len(self.breaks) + 1:
            raise errors.SlopeCountMismatch(
                f"{len(self.breaks)} breaks need {len(self.breaks) + 1} slopes, got {len(self.slopes)}"
            )
        object.__setattr__(self, "offsets", self._derive_offsets())

    def _derive_offsets(self) -> tuple[Fraction, ...]:
        n = len(self.slopes)
        offsets: list[Fraction | None] = [None] * n
        i0 = bisect_left(self.breaks, 0)
        offsets[i0] = self.f0
        for i in range(i0, n - 1):
            b = self.breaks[i]
            offsets[i + 1] = offsets[i] + (self.slopes[i] - self.slopes[i + 1]) * b
        for i in range(i0, 0, -1):
            b = self.breaks[i - 1]
            offsets[i - 1] = offsets[i] + (self.slopes[i] - self.slopes[i - 1]) * b
        return tuple(offsets)

    @classmethod
    def affine(cls, slope, offset) -> "PiecewiseLinearMap":
        return cls((), (Fraction(slope),), Fraction(offset))

    @property
    def n_pieces(self) -> int:
        return len(self.slopes)

    def piece_index(self, x) -> int:
        """0-based index of a linear piece whose closed domain contains ``x``."""
        return bisect_left(self.breaks, x)

    def piece_domain(self, i: int) -> tuple[Fraction | None, Fraction | None]:
        lo = self.breaks[i - 1] if i > 0 else None
        hi = self.breaks[i] if i < len(self.breaks) else None
        return lo, hi

    def __call__(self, x):
        i = self.piece_index(x)
        return self.slopes[i] * x + self.offsets[i]

    def evaluate_piece(self, i: int, x):
        return self.slopes[i] * x + self.offsets[i]

    def image(self, iv: Interval) -> Interval:
        pts = [iv.lo, iv.hi] + [b for b in self.breaks if iv.lo < b < iv.hi]
        return Interval.hull(self(p) for p in pts)

    @property
    def max_abs_slope(self) -> Fraction:
        return max(abs(r) for r in self.slopes)

    @property
    def injective(self) -> bool:
        return all(r > 0 for r in self.slopes) or all(r < 0 for r in self.slopes)

    def fixed_point(self) -> Fraction:
        """The unique fixed point (the map is a contraction of the line)."""
        for i, (r, t) in enumerate(zip(self.slopes, self.offsets)):
            x = t / (1 - r)
            lo, hi = self.piece_domain(i)
            if (lo is None or lo <= x) and (hi is None or x <= hi):
                return x
        raise errors.ValidationError("map has no fixed point; is it contracting?")

    def to_json(self) -> dict:
        return {
            "f0": format_rational(self.f0),
            "breaks": [format_rational(b) for b in self.breaks],
            "slopes": [format_rational(r) for r in self.slopes],
        }


@dataclass(frozen=True)
class Cplifs:
    maps: tuple[PiecewiseLinearMap, ...]

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))

    @property
    def m(self) -> int:
        return len(self.maps)

    def to_json(self) -> dict:
        return {"maps": [f.to_json() for f in self.maps]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    @property
    def min_abs_slope(self) -> Fraction:
        return min(abs(r) for f in self.maps for r in f.slopes)

    @property
    def max_abs_slope(self) -> Fraction:
        return max(f.max_abs_slope for f in self.maps)


@dataclass(frozen=True)
class AffineBranch:
    """One linear piece ``x -> slope*x + offset`` of map ``k`` on ``domain``.

    ``k`` and ``j`` are 1-based (map index, piece index within the map).
    The inverse of this piece is a branch of the expanding multi-valued map.
    """

    k: int
    j: int
    slope: Fraction
    offset: Fraction
    domain: Interval

    @property
    def label(self) -> tuple[int, int]:
        return (self.k, self.j)

    @property
    def range(self) -> Interval:
        return self.domain.affine_image(self.slope, self.offset)

    def forward(self, x):
        return self.slope * x + self.offset

    def inverse(self, y):
        return (y - self.offset) / self.slope

    def inverse_image(self, iv: Interval) -> Interval:
        return iv.affine_image(1 / self.slope, -self.offset / self.slope)

    def to_json(self) -> dict:
        return {
            "label": list(self.label),
            "slope": format_rational(self.slope),
            "offset": format_rational(self.offset),
            "domain": self.domain.to_json(),
        }


@dataclass(frozen=True)
class SelfSimilarSystem:
    slopes: tuple[Fraction, ...]
    offsets: tuple[Fraction, ...]
    labels: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "slopes", tuple(Fraction(r) for r in self.slopes))
        object.__setattr__(self, "offsets", tuple(Fraction(t) for t in self.offsets))
        if not self.labels:
            object.__setattr__(self, "labels", tuple((i + 1, 1) for i in range(len(self.slopes))))
        if len(self.slopes) != len(self.offsets):
            raise ValueError("slopes and offsets differ in length")
        for r in self.slopes:
            if r == 0 or abs(r) >= 1:
                raise errors.NonContractingSlope(f"similarity slope {r} not in (-1, 1) \\ {{0}}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> "SelfSimilarSystem":
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def __len__(self) -> int:
        return len(self.slopes)

    @property
    def pairs(self) -> list[tuple[Fraction, Fraction]]:
        return list(zip(self.slopes, self.offsets))

    def to_json(self) -> list[dict]:
        return [
            {"label": list(lab), "slope": format_rational(r), "offset": format_rational(t)}
            for lab, r, t in zip(self.labels, self.slopes, self.offsets)
        ]


# -- parsing / validation ---------------------------------------------------


def system_from_json(doc, where: str = "") -> Cplifs:
    """Build an (unvalidated) system from the JSON document structure."""
    if not isinstance(doc, dict) or "maps" not in doc:
        raise errors.ParseError(f"{where or 'document'}: expected an object with a 'maps' list")
    unknown = set(doc) - {"maps"}
    if unknown:
        raise errors.ParseError(f"unknown top-level keys: {sorted(unknown)}")
    raw_maps = doc["maps"]
    if not isinstance(raw_maps, list):
        raise errors.ParseError("maps: expected a list")
    maps = []
    for i, entry in enumerate(raw_maps):
        loc = f"maps[{i}]"
        if not isinstance(entry, dict):
            raise errors.ParseError(f"{loc}: expected an object")
        unknown = set(entry) - {"f0", "breaks", "slopes"}
        if unknown:
            raise errors.ParseError(f"{loc}: unknown keys {sorted(unknown)}")
        for key in ("f0", "slopes"):
            if key not in entry:
                raise errors.ParseError(f"{loc}: missing field '{key}'", field=f"{loc}.{key}")
        breaks = entry.get("breaks", [])
        if not isinstance(breaks, list) or not isinstance(entry["slopes"], list):
            raise errors.ParseError(f"{loc}: 'breaks' and 'slopes' must be lists")
        bs = tuple(parse_rational(b, f"{loc}.breaks[{n}]") for n, b in enumerate(breaks))
        rs = tuple(parse_rational(r, f"{loc}.slopes[{n}]") for n, r in enumerate(entry["slopes"]))
        f0 = parse_rational(entry["f0"], f"{loc}.f0")
        try:
            maps.append(PiecewiseLinearMap(bs, rs, f0))
        except errors.SlopeCountMismatch as exc:
            raise errors.SlopeCountMismatch(f"{loc}: {exc}", field=loc) from None
    return Cplifs(tuple(maps))


def loads_system(text: str) -> Cplifs:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise errors.ParseError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
            line=exc.lineno, column=exc.colno,
        ) from None
    return validate_system(system_from_json(doc))


def load_system(path) -> Cplifs:
    with open(path, encoding="utf-8") as fh:
        return loads_system(fh.read())


def validate_system(raw) -> Cplifs:
    """Check every structural invariant and return the canonical system."""
    if isinstance(raw, dict):
        raw = system_from_json(raw)
    if not raw.maps:
        raise errors.EmptySystem("a system needs at least one map")
    for k, f in enumerate(raw.maps, start=1):
        for i, r in enumerate(f.slopes, start=1):
            if r == 0:
                raise errors.ZeroSlope(f"map {k}: slope {i} is zero", map=k, piece=i)
            if abs(r) >= 1:
                raise errors.NonContractingSlope(
                    f"map {k}: |slope {i}| = {abs(r)} is not < 1", map=k, piece=i
                )
        for a, b in zip(f.breaks, f.breaks[1:]):
            if not a < b:
                raise errors.NonIncreasingBreaks(f"map {k}: breaks {a}, {b} not strictly increasing", map=k)
    return Cplifs(tuple(PiecewiseLinearMap(f.breaks, f.slopes, f.f0) for f in raw.maps))


# -- invariant interval -------------------------------------------------------


def _hull_image(F: Cplifs, iv: Interval) -> Interval:
    images = [f.image(iv) for f in F.maps]
    return Interval(min(x.lo for x in images), max(x.hi for x in images))


def _float_step(F: Cplifs, a: float, b: float) -> tuple[float, float]:
    lo, hi = math.inf, -math.inf
    for f in F.maps:
        slopes = [float(r) for r in f.slopes]
        offs = [float(t) for t in f.offsets]
        pts = [a, b] + [float(x) for x in f.breaks if a < x < b]
        for p in pts:
            i = bisect_left(f.breaks, p)
            y = slopes[i] * p + offs[i]
            lo, hi = min(lo, y), max(hi, y)
    return lo, hi


def _endpoint_candidates(F: Cplifs, a: float, b: float, lower: bool, tol: float):
    """Linear equations that could pin down one endpoint of the fixed interval.

    Each candidate is ``(coef_a, coef_b, rhs)`` meaning
    ``endpoint = coef_a*a + coef_b*b + rhs``.
    """
    found = []
    for f in F.maps:
        for x_name, x in (("a", a), ("b", b)):
            for i in range(f.n_pieces):
                lo, hi = f.piece_domain(i)
                if (lo is not None and x < float(lo) - tol) or (hi is not None and x > float(hi) + tol):
                    continue
                val = float(f.slopes[i]) * x + float(f.offsets[i])
                coef = (f.slopes[i], Fraction(0)) if x_name == "a" else (Fraction(0), f.slopes[i])
                found.append((val, (coef[0], coef[1], f.offsets[i])))
        for bp in f.breaks:
            if a - tol <= float(bp) <= b + tol:
                found.append((float(f(bp)), (Fraction(0), Fraction(0), f(bp))))
    if not found:
        return []
    best = min(v for v, _ in found) if lower else max(v for v, _ in found)
    eqs = []
    for v, eq in found:
        if abs(v - best) <= tol and eq not in eqs:
            eqs.append(eq)
    return eqs


def _solve_endpoints(eq_a, eq_b):
    # a = ca1*a + cb1*b + r1 ; b = ca2*a + cb2*b + r2
    ca1, cb1, r1 = eq_a
    ca2, cb2, r2 = eq_b
    m11, m12, m21, m22 = 1 - ca1, -cb1, -ca2, 1 - cb2
    det = m11 * m22 - m12 * m21
    if det == 0:
        return None
    a = (r1 * m22 - m12 * r2) / det
    b = (m11 * r2 - m21 * r1) / det
    return a, b


def invariant_interval(F: Cplifs, max_iter: int = 200_000) -> Interval:
    """Smallest compact interval mapped into itself by every map.

    It is the unique fixed point of ``J -> hull(union f_k(J))``.  The iteration
    runs in floating point only to identify which linear pieces realise the
    two endpoints; the endpoints themselves come from an exact 2x2 solve and
    are accepted only after an exact fixed-point check.
    """
    fps = []
    for f in F.maps:
        for r, t in zip(f.slopes, f.offsets):
            fps.append(float(t / (1 - r)))
    a, b = min(fps), max(fps)
    scale = max(1.0, abs(a), abs(b))
    checkpoints = {8, 32, 128, 512, 2048, 8192, 32768, max_iter}
    for it in range(1, max_iter + 1):
        a2, b2 = _float_step(F, a, b)
        converged = abs(a2 - a) <= 1e-15 * scale and abs(b2 - b) <= 1e-15 * scale
        a, b = a2, b2
        if converged or it in checkpoints:
            for tol in (1e-9 * scale, 1e-6 * scale):
                result = _exact_fixed_interval(F, a, b, tol)
                if result is not None:
                    if result.degenerate:
                        raise errors.DegenerateInterval(
                            f"invariant interval is the single point {result.lo}", point=result.lo
                        )
                    return result
            if converged and it > 64:
                break
    raise errors.DegenerateInterval("could not identify the invariant interval exactly")


def _exact_fixed_interval(F: Cplifs, a: float, b: float, tol: float) -> Interval | None:
    for eq_a in _endpoint_candidates(F, a, b, True, tol):
        for eq_b in _endpoint_candidates(F, a, b, False, tol):
            sol = _solve_endpoints(eq_a, eq_b)
            if sol is None or sol[0] > sol[1]:
                continue
            iv = Interval(*sol)
            if _hull_image(F, iv) == iv:
                return iv
    return None


def is_invariant(F: Cplifs, iv: Interval) -> bool:
    return all(f.image(iv).issubset(iv) for f in F.maps)


# -- branches, cylinders, generated system -----------------------------------


def branches_of(F: Cplifs, interval: Interval) -> list[AffineBranch]:
    """Linear pieces of every map, clipped to ``interval``; degenerate clips dropped."""
    out = []
    for k, f in enumerate(F.maps, start=1):
        for i in range(f.n_pieces):
            lo, hi = f.piece_domain(i)
            dlo = interval.lo if lo is None else max(lo, interval.lo)
            dhi = interval.hi if hi is None else min(hi, interval.hi)
            if dlo < dhi:
                out.append(AffineBranch(k, i + 1, f.slopes[i], f.offsets[i], Interval(dlo, dhi)))
    return out


def generated_self_similar(branches: Sequence[AffineBranch]) -> SelfSimilarSystem:
    """Extend every branch to a similarity of the whole line."""
    return SelfSimilarSystem(
        tuple(b.slope for b in branches),
        tuple(b.offset for b in branches),
        tuple(b.label for b in branches),
    )


def check_budget(count: int, budget: int, what: str) -> None:
    if count > budget:
        raise errors.BudgetExceeded(f"{what}: {count} items exceed budget {budget}", needed=count, budget=budget)


def cylinder_intervals(
    F: Cplifs, n: int, interval: Interval | None = None, budget: int = DEFAULT_BUDGET
) -> list[tuple[tuple[int, ...], Interval]]:
    """All ``m**n`` cylinder intervals ``f_{i1} o ... o f_{in}(I)``, in lexicographic word order."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    check_budget(F.m ** n, budget, f"cylinders of depth {n}")
    I = interval if interval is not None else invariant_interval(F)
    level: list[tuple[tuple[int, ...], Interval]] = [((), I)]
    for _ in range(n):
        level = [
            ((a,) + w, f.image(iv))
            for a, f in enumerate(F.maps, start=1)
            for w, iv in level
        ]
    return level


def cylinder_cover(F: Cplifs, n: int, interval: Interval | None = None, budget: int = DEFAULT_BUDGET) -> list[Interval]:
    """Depth-``n`` cylinders as a sorted list of disjoint closed components.

    Distinct cylinders are deduplicated level by level, which keeps heavily
    overlapping systems cheap.
    """
    from .rational import merge_intervals

    I = interval if interval is not None else invariant_interval(F)
    level = {I}
    for _ in range(n):
        check_budget(len(level) * F.m, budget, f"cylinder cover of depth {n}")
        level = {f.image(iv) for f in F.maps for iv in level}
    return merge_intervals(level)


# -- smallness and regularity -------------------------------------------------


@dataclass(frozen=True)
class SmallnessReport:
    small: bool
    slope_sum: Fraction
    sum_condition: bool
    per_map: tuple[dict, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "small": self.small,
            "slope_sum": format_rational(self.slope_sum),
            "sum_condition": self.sum_condition,
            "per_map": list(self.per_map),
        }


def is_small(F: Cplifs) -> SmallnessReport:
    rho = [f.max_abs_slope for f in F.maps]
    total = sum(rho, Fraction(0))
    top = max(rho)
    per_map = []
    for k, (f, r) in enumerate(zip(F.maps, rho), start=1):
        bound = Fraction(1, 2) if f.injective else (1 - top) / 2
        per_map.append({
            "map": k,
            "max_abs_slope": format_rational(r),
            "injective": f.injective,
            "bound": format_rational(bound),
            "ok": r < bound,
        })
    ok_b = all(p["ok"] for p in per_map)
    return SmallnessReport(total < 1 and ok_b, total, total < 1, tuple(per_map))


@dataclass(frozen=True)
class RegularityCertificate:
    regular: bool
    certified_depth: int | None
    tested_depth: int
    breaks_in_interval: tuple[Fraction, ...]

    @property
    def verdict(self) -> str:
        return "Regular" if self.regular else "Unknown"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "certified_depth": self.certified_depth,
            "tested_depth": self.tested_depth,
            "breaks_in_interval": [format_rational(b) for b in self.breaks_in_interval],
        }


def regularity_certificate(
    F: Cplifs, depth: int, interval: Interval | None = None, budget: int = DEFAULT_BUDGET
) -> RegularityCertificate:
    """One-sided certificate that the attractor avoids every breaking point.

    The attractor lies in the union of depth-``n`` cylinders, so a breaking
    point outside that closed union is certainly not in the attractor.  The
    answer is never "not regular": failure to separate at the tested depths
    only yields ``Unknown``.
    """
    I = interval if interval is not None else invariant_interval(F)
    pts = tuple(sorted({b for f in F.maps for b in f.breaks if b in I}))
    level = {I}
    for n in range(depth + 1):
        if n > 0:
            check_budget(len(level) * F.m, budget, f"regularity cover of depth {n}")
            level = {f.image(iv) for f in F.maps for iv in level}
        if all(all(p not in iv for iv in level) for p in pts):
            return RegularityCertificate(True, n, depth, pts)
    return RegularityCertificate(False, None, depth, pts)
