"""Brute-force natural pressure, box counting and attractor sampling.

These routines work directly from cylinder intervals and never look at the
Markov diagram, which makes them an independent check on the spectral
estimates.
"""
from __future__ import annotations

import csv
import io
import math
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import errors
from .model import DEFAULT_BUDGET, Cplifs, check_budget, invariant_interval
from .rational import Interval, format_rational, log_abs


# -- natural pressure ----------------------------------------------------------


@dataclass(frozen=True)
class CylinderLevel:
    """Distinct depth-``n`` cylinder lengths with multiplicities, in log form."""

    n: int
    log_lengths: np.ndarray
    log_mult: np.ndarray
    words: int
    distinct: int

    def log_sum(self, s: float) -> float:
        """``log sum_{|k|=n} |I_k|**s``."""
        return float(logsumexp(self.log_mult + s * self.log_lengths))


def cylinder_levels(
    F: Cplifs, n_max: int, interval: Interval | None = None, budget: int = DEFAULT_BUDGET
) -> list[CylinderLevel]:
    """Levels ``1..n_max``; identical intervals are merged with a multiplicity."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    check_budget(F.m ** n_max, budget, f"cylinders of depth {n_max}")
    I = interval if interval is not None else invariant_interval(F)
    cur: Counter = Counter({I: 1})
    out = []
    for n in range(1, n_max + 1):
        nxt: Counter = Counter()
        for f in F.maps:
            for iv, mult in cur.items():
                nxt[f.image(iv)] += mult
        cur = nxt
        items = sorted(cur.items())
        out.append(CylinderLevel(
            n,
            np.array([log_abs(iv.length) for iv, _ in items]),
            np.log(np.array([float(c) for _, c in items])),
            F.m ** n,
            len(items),
        ))
    return out


@dataclass(frozen=True)
class PressureCurve:
    s_grid: tuple[float, ...]
    ns: tuple[int, ...]
    phi: tuple[tuple[float, ...], ...]  # phi[i][j] = Phi_{ns[i]}(s_grid[j])
    counts: tuple[int, ...]
    distinct: tuple[int, ...]

    def at(self, n: int, s: float) -> float:
        return self.phi[self.ns.index(n)][self.s_grid.index(s)]

    def to_json(self) -> dict:
        return {
            "s_grid": list(self.s_grid),
            "n": list(self.ns),
            "phi": [list(r) for r in self.phi],
            "cylinder_counts": list(self.counts),
            "distinct_cylinders": list(self.distinct),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "s", "phi"])
        for n, row in zip(self.ns, self.phi):
            for s, v in zip(self.s_grid, row):
                w.writerow([n, repr(s), repr(v)])
        return buf.getvalue()


def default_s_grid(step: float = 1 / 64, top: float = 2.0) -> list[float]:
    return [i * step for i in range(int(round(top / step)) + 1)]


def direct_pressure(
    F: Cplifs,
    s_values: Sequence[float],
    n_max: int,
    interval: Interval | None = None,
    budget: int = DEFAULT_BUDGET,
    levels: Sequence[CylinderLevel] | None = None,
) -> PressureCurve:
    """``Phi_n(s) = (1/n) log sum_{|k|=n} |I_k|**s`` for every ``n <= n_max``."""
    if levels is None:
        levels = cylinder_levels(F, n_max, interval, budget)
    s_values = tuple(float(s) for s in s_values)
    phi = tuple(tuple(lv.log_sum(s) / lv.n for s in s_values) for lv in levels)
    return PressureCurve(
        s_values,
        tuple(lv.n for lv in levels),
        phi,
        tuple(lv.words for lv in levels),
        tuple(lv.distinct for lv in levels),
    )


def _bisect_root(g, tol: float, s_max: float = 1024.0) -> float:
    """Root of a decreasing function with ``g(0) > 0``; 0 if ``g(0) <= 0``."""
    if g(0.0) <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while g(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > s_max:
            raise errors.CplifsError(f"pressure stays positive up to s = {s_max}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DirectDimension:
    """Natural-dimension estimate from cylinder sums.

    ``value`` is the root of the consecutive-ratio pressure
    ``log(Z_n(s) / Z_{n-1}(s))`` at ``n = n_max``.  It converges to the same
    limit as the root of ``Phi_n`` but without the ``O(1/n)`` bias coming
    from the constant prefactor in ``Z_n(s)``.  The plain ``Phi_n`` roots are
    kept for inspection.
    """

    value: float
    band: float
    n_max: int
    ratio_roots: tuple[float, ...]
    plain_roots: tuple[float, ...]

    @property
    def capped(self) -> float:
        return min(1.0, self.value)

    @property
    def exceeds_one(self) -> bool:
        return self.value > 1.0

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "band": self.band,
            "n_max": self.n_max,
            "method": "consecutive-ratio root",
            "ratio_roots": list(self.ratio_roots),
            "plain_roots": list(self.plain_roots),
            "min_one_s": self.capped,
            "note": "value above 1: dimension estimate is min{1, s}" if self.exceeds_one else "",
        }


def natural_dimension_direct(
    F: Cplifs,
    n_max: int,
    tol: float = 1e-10,
    interval: Interval | None = None,
    budget: int = DEFAULT_BUDGET,
    levels: Sequence[CylinderLevel] | None = None,
) -> DirectDimension:
    """Natural dimension from cylinder sums up to depth ``n_max``.

    The band is the gap between the ratio roots at ``n_max - 1`` and
    ``n_max``, floored at ``tol``.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    if levels is None:
        levels = cylinder_levels(F, n_max, interval, budget)
    plain = tuple(_bisect_root(lambda s, lv=lv: lv.log_sum(s), tol) for lv in levels)
    I = interval if interval is not None else invariant_interval(F)
    log_I = log_abs(I.length)

    def ratio_fn(k):
        cur = levels[k]
        if k == 0:
            return lambda s: cur.log_sum(s) - s * log_I
        prev = levels[k - 1]
        return lambda s: cur.log_sum(s) - prev.log_sum(s)

    ratio = tuple(_bisect_root(ratio_fn(k), tol) for k in range(len(levels)))
    band = max(abs(ratio[-1] - ratio[-2]), tol)
    return DirectDimension(ratio[-1], band, n_max, ratio, plain)


# -- box counting ------------------------------------------------------------------


@dataclass(frozen=True)
class BoxCountSeries:
    eps: tuple[Fraction, ...]
    counts: tuple[int, ...]
    slope: float | None
    residual: float | None

    def to_json(self) -> dict:
        return {
            "eps": [format_rational(e) for e in self.eps],
            "counts": list(self.counts),
            "slope": self.slope,
            "residual": self.residual,
            "method": "cylinder cover, least-squares fit of log N against log(1/eps)",
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "count"])
        for e, c in zip(self.eps, self.counts):
            w.writerow([format_rational(e), c])
        return buf.getvalue()


Piece = tuple[Fraction, Fraction, Fraction, Fraction]  # domain lo, domain hi, slope, offset


def _map_pieces(f, I: Interval) -> tuple[Piece, ...]:
    out = []
    for i in range(f.n_pieces):
        lo, hi = f.piece_domain(i)
        lo = I.lo if lo is None else max(lo, I.lo)
        hi = I.hi if hi is None else min(hi, I.hi)
        if lo < hi:
            out.append((lo, hi, f.slopes[i], f.offsets[i]))
    return tuple(out)


def _compose_pieces(g: tuple[Piece, ...], f: tuple[Piece, ...]) -> tuple[Piece, ...]:
    """Pieces of ``g o f`` on the domain of ``f``; adjacent equal pieces merged."""
    if len(g) == 1 and len(f) == 1:
        (a, b, r, t), (_, _, q, u) = f[0], g[0]
        return ((a, b, q * r, q * t + u),)
    out: list[list] = []
    for a, b, r, t in f:
        ya, yb = r * a + t, r * b + t
        ylo, yhi = min(ya, yb), max(ya, yb)
        segs = []
        for c, d, q, u in g:
            lo, hi = max(c, ylo), min(d, yhi)
            if lo < hi:
                x1, x2 = (lo - t) / r, (hi - t) / r
                segs.append((min(x1, x2), max(x1, x2), q * r, q * t + u))
        for seg in sorted(segs):
            if out and out[-1][2] == seg[2] and out[-1][3] == seg[3] and out[-1][1] == seg[0]:
                out[-1][1] = seg[1]
            else:
                out.append(list(seg))
    return tuple(tuple(p) for p in out)


def _pieces_image(g: tuple[Piece, ...]) -> Interval:
    vals = [r * x + t for a, b, r, t in g for x in (a, b)]
    return Interval(min(vals), max(vals))


class _Runs:
    """Set of integers stored as sorted disjoint closed runs."""

    def __init__(self):
        self.starts: list[int] = []
        self.ends: list[int] = []

    def add(self, a: int, b: int) -> None:
        i = bisect_left(self.ends, a - 1)
        j = bisect_right(self.starts, b + 1)
        if i < j:
            a = min(a, self.starts[i])
            b = max(b, self.ends[j - 1])
        self.starts[i:j] = [a]
        self.ends[i:j] = [b]

    def covers(self, a: int, b: int) -> bool:
        i = bisect_right(self.starts, a) - 1
        return i >= 0 and self.ends[i] >= b

    def __len__(self) -> int:
        return sum(e - s + 1 for s, e in zip(self.starts, self.ends))


def box_counts(
    F: Cplifs, eps_list: Sequence[Fraction], interval: Interval | None = None, budget: int = DEFAULT_BUDGET
) -> list[int]:
    """Number of grid boxes of side ``eps`` (anchored at ``min I``) whose
    interior meets the stopping-time cylinder cover at scale ``eps``.

    Words are refined on the right, ``I_{wa} = f_w(f_a(I))``, until the
    cylinder is no longer than ``eps``.  Composed maps are kept as exact
    piece lists so that words with the same composition are expanded once.
    """
    eps_list = [Fraction(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise ValueError("box sizes must be positive")
    try:
        I = interval if interval is not None else invariant_interval(F)
    except errors.DegenerateInterval:
        return [1] * len(eps_list)
    if I.degenerate:
        return [1] * len(eps_list)
    a0 = I.lo
    smallest = min(eps_list)
    base = [_map_pieces(f, I) for f in F.maps]
    identity = ((I.lo, I.hi, Fraction(1), Fraction(0)),)
    marks = [_Runs() for _ in eps_list]
    finest_first = sorted(range(len(eps_list)), key=lambda i: eps_list[i])
    seen: set = set()
    stack = [(identity, I, None)]
    visited = 0

    def box_range(J: Interval, e: Fraction) -> tuple[int, int]:
        first = math.floor((J.lo - a0) / e)
        last = math.ceil((J.hi - a0) / e) - 1
        return first, max(first, last)

    while stack:
        g, J, parent_len = stack.pop()
        L = J.length
        for idx, e in enumerate(eps_list):
            if L <= e and (parent_len is None or parent_len > e):
                marks[idx].add(*box_range(J, e))
        if L <= smallest or g in seen:
            continue
        # Leaves below J lie inside J, so once every box J can reach is marked
        # at each finer scale the subtree cannot change any count.
        if all(marks[i].covers(*box_range(J, eps_list[i])) for i in finest_first if eps_list[i] < L):
            continue
        seen.add(g)
        visited += 1
        check_budget(visited, budget, "box-counting cover nodes")
        for f in reversed(base):
            h = _compose_pieces(g, f)
            stack.append((h, _pieces_image(h), L))
    return [len(m) for m in marks]


def box_dimension_estimate(
    F: Cplifs, eps_list: Sequence[Fraction], interval: Interval | None = None, budget: int = DEFAULT_BUDGET
) -> BoxCountSeries:
    eps = tuple(sorted((Fraction(e) for e in eps_list), reverse=True))
    counts = tuple(box_counts(F, eps, interval, budget))
    if len(eps) < 2:
        return BoxCountSeries(eps, counts, None, None)
    x = np.array([-log_abs(e) for e in eps])
    y = np.log(np.array(counts, dtype=float))
    (slope, icpt) = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    slope = float(slope)
    if abs(slope) < 1e-12:
        slope = 0.0
    return BoxCountSeries(eps, counts, slope, resid)


def default_eps(I: Interval, k_min: int = 4, k_max: int = 12) -> list[Fraction]:
    length = I.length if not I.degenerate else Fraction(1)
    return [length / (1 << k) for k in range(k_min, k_max + 1)]


# -- chaos game --------------------------------------------------------------------


BURN_IN = 64


def chaos_game_sample(F: Cplifs, count: int, seed: int = 0, burn_in: int = BURN_IN) -> list[float]:
    """Random composition orbit in floating point.

    The orbit starts at the fixed point of the first map (a point of the
    attractor), so every emitted point is an attractor point up to rounding.
    Map indices come from ``numpy.random.default_rng(seed)`` (PCG64), which
    is reproducible across platforms.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return []
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, F.m, size=burn_in + count)
    tables = []
    for f in F.maps:
        tables.append((
            [float(b) for b in f.breaks],
            [float(r) for r in f.slopes],
            [float(t) for t in f.offsets],
        ))
    x = float(F.maps[0].fixed_point())
    out = []
    for step, k in enumerate(picks.tolist()):
        breaks, slopes, offsets = tables[k]
        i = bisect_left(breaks, x)
        x = slopes[i] * x + offsets[i]
        if step >= burn_in:
            out.append(x)
    return out
