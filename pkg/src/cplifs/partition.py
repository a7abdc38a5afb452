"""Critical points, the monotonicity partition, overlap classification and
the two partition refinements used to tame overlapping branches."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from . import errors
from .model import AffineBranch, Cplifs
from .rational import Interval, dyadic_below, format_rational, merge_intervals

ENDPOINT_IMAGE = "endpoint-image"
BREAK_IMAGE = "break-image"
INTERSECTING = "intersecting"


@dataclass(frozen=True)
class CriticalSet:
    points: tuple[Fraction, ...]
    tags: tuple[tuple[str, ...], ...]

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    @property
    def intersecting(self) -> tuple[Fraction, ...]:
        return tuple(p for p, t in zip(self.points, self.tags) if INTERSECTING in t)

    def to_json(self) -> list[dict]:
        return [{"point": format_rational(p), "tags": list(t)} for p, t in zip(self.points, self.tags)]


@dataclass(frozen=True)
class Partition:
    cells: tuple[Interval, ...]
    components: tuple[int, ...]

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    @cached_property
    def cell_los(self) -> list[Fraction]:
        return [c.lo for c in self.cells]

    @property
    def total_length(self) -> Fraction:
        return sum((c.length for c in self.cells), Fraction(0))

    def cells_containing(self, x: Fraction) -> list[int]:
        return [i for i, c in enumerate(self.cells) if x in c]

    def refine_at(self, points: Iterable[Fraction]) -> "Partition":
        """Cut every cell at the given points that lie in its interior."""
        pts = sorted(set(points))
        cells, comps = [], []
        for c, comp in zip(self.cells, self.components):
            inner = [p for p in pts if c.contains_open(p)]
            edges = [c.lo] + inner + [c.hi]
            for lo, hi in zip(edges, edges[1:]):
                cells.append(Interval(lo, hi))
                comps.append(comp)
        return Partition(tuple(cells), tuple(comps))

    def refines(self, coarser: "Partition") -> bool:
        return all(
            sum(1 for c in coarser.cells if cell.issubset(c)) == 1 for cell in self.cells
        ) and self.total_length == coarser.total_length

    def to_json(self) -> list[dict]:
        return [{"cell": c.to_json(), "component": comp} for c, comp in zip(self.cells, self.components)]


def branch_agreement(b1: AffineBranch, b2: AffineBranch) -> Interval | Fraction | None:
    """Where the inverse branches coincide as affine functions of ``y``.

    Returns a point, the whole line (as ``Interval`` of the common range, for
    identical pieces) or ``None`` for parallel distinct branches.
    """
    if b1.slope != b2.slope:
        return (b1.offset * b2.slope - b2.offset * b1.slope) / (b2.slope - b1.slope)
    if b1.offset == b2.offset:
        return b1.range.intersect(b2.range)
    return None


def intersecting_points(branches: Sequence[AffineBranch]) -> dict[Fraction, list[tuple]]:
    """Points of the common range of two branches where their inverses agree."""
    out: dict[Fraction, list[tuple]] = {}
    for b1, b2 in combinations(branches, 2):
        agree = branch_agreement(b1, b2)
        if agree is None:
            continue
        common = b1.range.intersect(b2.range)
        if common is None:
            continue
        if isinstance(agree, Interval):
            candidates = {agree.lo, agree.hi}
        else:
            candidates = {agree} if agree in common else set()
        for z in candidates:
            out.setdefault(z, []).append((b1.label, b2.label))
    return dict(sorted(out.items()))


def attractor_hull_images(F: Cplifs, interval: Interval) -> list[Interval]:
    return [f.image(interval) for f in F.maps]


def critical_points(F: Cplifs, interval: Interval, branches: Sequence[AffineBranch]) -> CriticalSet:
    tags: dict[Fraction, set[str]] = {}
    for f in F.maps:
        for x in (interval.lo, interval.hi):
            tags.setdefault(f(x), set()).add(ENDPOINT_IMAGE)
        for b in f.breaks:
            if interval.contains_open(b):
                tags.setdefault(f(b), set()).add(BREAK_IMAGE)
    for z in intersecting_points(branches):
        tags.setdefault(z, set()).add(INTERSECTING)
    pts = tuple(sorted(tags))
    return CriticalSet(pts, tuple(tuple(sorted(tags[p])) for p in pts))


def image_union(F: Cplifs, interval: Interval) -> list[Interval]:
    """Connected components of the union of the first-level images."""
    return merge_intervals(attractor_hull_images(F, interval))


def monotonicity_partition(F: Cplifs, interval: Interval, critical: CriticalSet) -> Partition:
    cells, comps = [], []
    for cid, comp in enumerate(image_union(F, interval)):
        inner = [p for p in critical.points if comp.contains_open(p)]
        edges = [comp.lo] + inner + [comp.hi]
        for lo, hi in zip(edges, edges[1:]):
            cells.append(Interval(lo, hi))
            comps.append(cid)
    return Partition(tuple(cells), tuple(comps))


# -- overlaps -----------------------------------------------------------------


@dataclass(frozen=True)
class OverlapPair:
    first: tuple[int, int]
    second: tuple[int, int]
    kind: str  # "light" or "cross"
    witness: Fraction | None = None

    def to_json(self) -> dict:
        return {
            "branches": [list(self.first), list(self.second)],
            "kind": self.kind,
            "witness": None if self.witness is None else format_rational(self.witness),
        }


@dataclass(frozen=True)
class CellOverlaps:
    index: int
    cell: Interval
    pairs: tuple[OverlapPair, ...]
    endpoint_agreements: tuple[tuple[tuple[int, int], tuple[int, int], Fraction], ...]
    order: int

    @property
    def has_cross(self) -> bool:
        return any(p.kind == "cross" for p in self.pairs)

    @property
    def has_light(self) -> bool:
        return any(p.kind == "light" for p in self.pairs)


@dataclass(frozen=True)
class OverlapReport:
    cells: tuple[CellOverlaps, ...]
    intersecting: tuple[Fraction, ...]
    order: int  # K
    n_intersecting: int  # M

    @property
    def has_cross(self) -> bool:
        return any(c.has_cross for c in self.cells)

    def cross_groups(self, cell_index: int) -> list[list[tuple[int, int]]]:
        """Connected groups of labels linked by cross pairs over one cell."""
        parent: dict = {}

        def find(x):
            while parent.setdefault(x, x) != x:
                x = parent[x]
            return x

        for p in self.cells[cell_index].pairs:
            if p.kind == "cross":
                ra, rb = find(p.first), find(p.second)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        groups: dict = {}
        for x in list(parent):
            groups.setdefault(find(x), []).append(x)
        return [sorted(g) for _, g in sorted(groups.items())]

    def to_json(self) -> dict:
        return {
            "order_K": self.order,
            "intersecting_count_M": self.n_intersecting,
            "intersecting_points": [format_rational(w) for w in self.intersecting],
            "cells": [
                {
                    "cell": c.cell.to_json(),
                    "order": c.order,
                    "pairs": [p.to_json() for p in c.pairs],
                    "endpoint_agreements": [
                        {"branches": [list(a), list(b)], "point": format_rational(z)}
                        for a, b, z in c.endpoint_agreements
                    ],
                }
                for c in self.cells
                if c.pairs or c.endpoint_agreements
            ],
        }


def _max_open_depth(intervals: list[Interval]) -> int:
    """Largest number of intervals whose interiors share a common point."""
    if not intervals:
        return 0
    events = []
    for iv in intervals:
        events.append((iv.lo, 1))
        events.append((iv.hi, -1))
    # closing before opening at equal coordinates: touching interiors do not meet
    events.sort(key=lambda e: (e[0], e[1]))
    best = cur = 0
    for _, d in events:
        cur += d
        best = max(best, cur)
    return best


def applicable_branches(cell: Interval, branches: Sequence[AffineBranch]) -> list[AffineBranch]:
    return [b for b in branches if cell.issubset(b.range)]


def classify_overlaps(partition: Partition, branches: Sequence[AffineBranch]) -> OverlapReport:
    branches = sorted(branches, key=lambda b: b.label)
    W = tuple(intersecting_points(branches))
    out = []
    K = 1 if branches else 0
    for idx, Z in enumerate(partition.cells):
        app = applicable_branches(Z, branches)
        pre = {b.label: b.inverse_image(Z) for b in app}
        pairs, touching = [], []
        for b1, b2 in combinations(app, 2):
            agree = branch_agreement(b1, b2)
            if isinstance(agree, Interval):
                witness = Z.lo
            elif agree is not None and agree in Z:
                witness = agree
            else:
                witness = None
            if pre[b1.label].interiors_meet(pre[b2.label]):
                kind = "cross" if witness is not None else "light"
                pairs.append(OverlapPair(b1.label, b2.label, kind, witness))
            elif witness is not None:
                touching.append((b1.label, b2.label, witness))
        depth = _max_open_depth(list(pre.values()))
        K = max(K, depth)
        out.append(CellOverlaps(idx, Z, tuple(pairs), tuple(touching), depth))
    return OverlapReport(tuple(out), W, K, len(W))


# -- light-overlap refinement ----------------------------------------------------


def light_epsilon(Z: Interval, b1: AffineBranch, b2: AffineBranch) -> Fraction:
    """Largest length such that any subinterval of ``Z`` of that length has
    inverse images under the two branches with disjoint interiors.

    The inverse branches are ordered pointwise on ``Z`` (no agreement there).
    With inverse slopes ``s_lo`` (lower branch) and ``s_hi`` (upper branch)
    and the gap ``G(x) = g_hi(x) - g_lo(x)``, a window ``[x, x+e]`` works iff
    ``G(x) >= e*c`` with ``c = max(s_lo,0) + max(-s_hi,0)``; ``G`` is affine,
    so it suffices to check both ends of the admissible range of ``x``.
    """
    mid = Z.midpoint
    g1, g2 = b1.inverse(mid), b2.inverse(mid)
    if g1 == g2:
        raise errors.CrossOverlapPresent(f"branches {b1.label} and {b2.label} agree inside {Z}")
    lo_b, hi_b = (b1, b2) if g1 < g2 else (b2, b1)
    s_lo, s_hi = 1 / lo_b.slope, 1 / hi_b.slope
    G_left = hi_b.inverse(Z.lo) - lo_b.inverse(Z.lo)
    G_right = hi_b.inverse(Z.hi) - lo_b.inverse(Z.hi)
    if G_left <= 0 or G_right <= 0:
        raise errors.CrossOverlapPresent(f"branches {b1.label} and {b2.label} agree on {Z}")
    c = max(s_lo, 0) + max(-s_hi, 0)
    c_right = max(-s_lo, 0) + max(s_hi, 0)
    eps = Z.length
    if c > 0:
        eps = min(eps, G_left / c)
    if c_right > 0:
        eps = min(eps, G_right / c_right)
    return eps


def split_uniform(Z: Interval, max_len: Fraction) -> list[Interval]:
    n = max(1, math.ceil(Z.length / max_len))
    step = Z.length / n
    return [Interval(Z.lo + i * step, Z.lo + (i + 1) * step) for i in range(n)]


def refine_for_light_overlaps(
    partition: Partition,
    report: OverlapReport,
    branches: Sequence[AffineBranch],
    *,
    skip_cross: bool = False,
    max_pieces: int = 100_000,
) -> tuple[Partition, dict[int, Fraction]]:
    """Split every light-overlap cell into equal pieces no longer than its epsilon.

    Returns the refined partition and the epsilon used for each split cell
    (keyed by the cell's index in the input partition).
    """
    by_label = {b.label: b for b in branches}
    cells, comps = [], []
    epsilons: dict[int, Fraction] = {}
    total = 0
    for info, comp in zip(report.cells, partition.components):
        Z = info.cell
        if info.has_cross:
            if not skip_cross:
                raise errors.CrossOverlapPresent(f"cell {Z} carries a cross overlap", cell=Z)
            cells.append(Z)
            comps.append(comp)
            continue
        if not info.has_light:
            cells.append(Z)
            comps.append(comp)
            continue
        eps = min(light_epsilon(Z, by_label[p.first], by_label[p.second]) for p in info.pairs)
        epsilons[info.index] = eps
        pieces = split_uniform(Z, eps)
        total += len(pieces)
        if total > max_pieces:
            raise errors.BudgetExceeded(f"light refinement needs more than {max_pieces} cells")
        cells.extend(pieces)
        comps.extend([comp] * len(pieces))
    return Partition(tuple(cells), tuple(comps)), epsilons


# -- cross-overlap refinement ------------------------------------------------------


def transfer(sets: Iterable[Interval], branches: Sequence[AffineBranch]) -> set[Interval]:
    """One step of the multi-valued expanding map applied to a family of sets."""
    out = set()
    for A in sets:
        for b in branches:
            part = A.intersect(b.range)
            if part is not None:
                out.add(b.inverse_image(part))
    return out


def orbit_sets(A: Interval, P: int, branches: Sequence[AffineBranch]) -> list[set[Interval]]:
    """``[T^1(A), ..., T^P(A)]`` as families of (possibly degenerate) intervals."""
    out, cur = [], {A}
    for _ in range(P):
        cur = transfer(cur, branches)
        out.append(cur)
    return out


def orbit_separation(x0: Fraction, P: int, branches: Sequence[AffineBranch]) -> Fraction | float:
    """Distance from ``x0`` to the union of ``T^n(x0)``, ``1 <= n <= P``.

    ``math.inf`` when the union is empty.
    """
    best: Fraction | float = math.inf
    cur = {Fraction(x0)}
    for _ in range(P):
        nxt = set()
        for x in cur:
            for b in branches:
                if x in b.range:
                    nxt.add(b.inverse(x))
        for y in nxt:
            d = abs(y - x0)
            if d < best:
                best = d
        cur = nxt
    return best


def returns_to_itself(Y: Interval, P: int, branches: Sequence[AffineBranch]) -> bool:
    return any(Y.intersect(A) is not None for level in orbit_sets(Y, P, branches) for A in level)


def cross_cut_bound(d: Fraction, rho_min: Fraction, P: int) -> Fraction:
    r = rho_min ** P
    return d * r / (1 + r)


@dataclass(frozen=True)
class CrossCut:
    point: Fraction
    separation: Fraction | float
    bound: Fraction | float
    cut: Fraction
    cell: Interval

    def to_json(self) -> dict:
        sep = self.separation
        return {
            "intersecting_point": format_rational(self.point),
            "separation": "inf" if sep == math.inf else format_rational(sep),
            "bound": "inf" if self.bound == math.inf else format_rational(self.bound),
            "cut": format_rational(self.cut),
            "cell": self.cell.to_json(),
        }


def refine_for_cross_overlaps(
    partition: Partition,
    W: Iterable[Fraction],
    P: int,
    rho_min: Fraction,
    branches: Sequence[AffineBranch],
    *,
    max_halvings: int = 64,
) -> tuple[Partition, list[CrossCut]]:
    """Cut each cell that has an intersecting point ``w`` as an endpoint close
    enough to ``w`` that the small cell never meets its first ``P`` images.

    The cut offset is the largest dyadic (denominator ``2**20``) strictly below
    ``d * rho_min**P / (1 + rho_min**P)``.  The separation property is then
    re-checked exactly; the offset is halved in the rare case it fails.
    """
    W = sorted(set(W))
    cuts: list[CrossCut] = []
    cut_points: list[Fraction] = []
    for w in W:
        d = orbit_separation(w, P, branches)
        if d == 0:
            raise errors.OrbitReturn(f"intersecting point {w} returns to itself within {P} steps", point=w)
        for idx in partition.cells_containing(w):
            cell = partition.cells[idx]
            if cell.contains_open(w):
                # Intersecting points are critical, so this only happens for
                # externally supplied partitions; cut there first.
                raise errors.CplifsError(f"intersecting point {w} is interior to cell {cell}")
            bound = cell.length if d == math.inf else cross_cut_bound(d, rho_min, P)
            delta = dyadic_below(min(bound, cell.length))
            sign = 1 if cell.lo == w else -1
            for _ in range(max_halvings):
                p = w + sign * delta
                Y = Interval(min(w, p), max(w, p))
                if not returns_to_itself(Y, P, branches):
                    break
                delta /= 2
            else:
                raise errors.OrbitReturn(f"could not separate the cell at {w}", point=w)
            cuts.append(CrossCut(w, d, bound, p, cell))
            cut_points.append(p)
    return partition.refine_at(cut_points), cuts
