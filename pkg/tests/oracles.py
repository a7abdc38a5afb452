"""Independent brute-force oracles.

Nothing here calls the geometry of the package under test: maps are
re-evaluated from their raw breaks/slopes/f(0), and every construction is
done by direct enumeration.
"""
from fractions import Fraction as Fr
from itertools import product

import numpy as np


def eval_raw(f, x: Fr) -> Fr:
    """``f(x) = f(0) + integral_0^x f'``, summing slope times length per piece."""
    pts = [Fr(b) for b in f.breaks]
    slopes = [Fr(r) for r in f.slopes]

    def slope_at(u):  # slope on the open piece containing u
        return slopes[sum(1 for b in pts if b < u)]

    lo, hi = min(Fr(0), x), max(Fr(0), x)
    knots = sorted({lo, hi} | {b for b in pts if lo < b < hi})
    total = sum((slope_at((a + b) / 2) * (b - a) for a, b in zip(knots, knots[1:])), Fr(0))
    return f.f0 + (total if x >= 0 else -total)


def compose_raw(F, word, x: Fr) -> Fr:
    for k in reversed(word):
        x = eval_raw(F.maps[k - 1], x)
    return x


def grid(lo: Fr, hi: Fr, n: int) -> list[Fr]:
    return [lo + (hi - lo) * Fr(i, n) for i in range(n + 1)]


def brute_cylinders(F, n: int, lo: Fr, hi: Fr, resolution: int = 64):
    """Hull of ``f_w`` over an exact grid of ``[lo, hi]``.

    Exact whenever every break of the composed map lies on the grid, which
    holds for the dyadic test systems used here.
    """
    pts = grid(lo, hi, resolution)
    out = []
    for w in product(range(1, F.m + 1), repeat=n):
        vals = [compose_raw(F, w, x) for x in pts]
        out.append((w, (min(vals), max(vals))))
    return out


def hull_iteration(F, lo: Fr, hi: Fr, steps: int, resolution: int = 64):
    for _ in range(steps):
        vals = [eval_raw(f, x) for f in F.maps for x in grid(lo, hi, resolution)]
        lo, hi = min(vals), max(vals)
    return lo, hi


def inverse_agreement(r1, t1, r2, t2):
    """Solution of (x - t1)/r1 = (x - t2)/r2, or None for parallel lines."""
    if r1 == r2:
        return None
    return (t1 * r2 - t2 * r1) / (r2 - r1)


def perron_dense(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(A, dtype=float)))))


def esc_distances(pairs, n):
    """Minimal same-slope offset gap at depth n, by listing every composition."""
    maps = {}
    for w in product(range(len(pairs)), repeat=n):
        r, t = Fr(1), Fr(0)
        for a in reversed(w):
            ra, ta = pairs[a]
            r, t = ra * r, ra * t + ta
        maps.setdefault(r, []).append((t, tuple(i + 1 for i in w)))
    best = None
    for group in maps.values():
        ts = sorted(t for t, _ in group)
        for a, b in zip(ts, ts[1:]):
            if best is None or b - a < best:
                best = b - a
    return best


def orbit_points(x0, P, branch_tuples):
    """T^1..T^P of a point; branches given as (slope, offset, range_lo, range_hi)."""
    levels, cur = [], {x0}
    for _ in range(P):
        nxt = set()
        for x in cur:
            for r, t, a, b in branch_tuples:
                if a <= x <= b:
                    nxt.add((x - t) / r)
        levels.append(nxt)
        cur = nxt
    return levels


def path_norm_bound(A, n: int) -> float:
    """``||A^n||_inf ** (1/n)``, an upper bound for the spectral radius."""
    M = np.linalg.matrix_power(np.asarray(A, dtype=float), n)
    return float(np.abs(M).sum(axis=1).max()) ** (1.0 / n)


def interval_orbit(lo, hi, P, branch_tuples):
    """T^1..T^P of ``[lo, hi]`` as lists of closed intervals (possibly points)."""
    levels, cur = [], [(lo, hi)]
    for _ in range(P):
        nxt = []
        for a, b in cur:
            for r, t, ra, rb in branch_tuples:
                u, v = max(a, ra), min(b, rb)
                if u <= v:
                    x, y = (u - t) / r, (v - t) / r
                    nxt.append((min(x, y), max(x, y)))
        levels.append(nxt)
        cur = nxt
    return levels


def raw_branches(F, lo, hi):
    """(slope, offset, range_lo, range_hi) per linear piece of each map on [lo, hi]."""
    out = []
    for f in F.maps:
        knots = [lo] + [Fr(b) for b in f.breaks if lo < b < hi] + [hi]
        for a, b in zip(knots, knots[1:]):
            fa, fb = eval_raw(f, a), eval_raw(f, b)
            r = (fb - fa) / (b - a)
            out.append((r, fa - r * a, min(fa, fb), max(fa, fb)))
    return out


def successor_pairs(Z, cells, branch_tuples):
    """Labeled successors of ``Z``: preimages under each branch whose range
    holds ``Z``, cut by the cells; single points are dropped.

    ``branch_tuples`` holds ``(label, slope, offset, range_lo, range_hi)``.
    """
    lo, hi = Z
    out = []
    for label, r, t, a, b in branch_tuples:
        if not (a <= lo and hi <= b):
            continue
        x, y = sorted(((lo - t) / r, (hi - t) / r))
        for c, d in cells:
            u, v = max(x, c), min(y, d)
            if u < v:
                out.append((label, (u, v)))
    return out


def bfs_diagram(cells, branch_tuples, max_vertices=10_000):
    """Successor closure of the cells: (vertex set, labeled edge set)."""
    seen = set(cells)
    queue = list(cells)
    edges = set()
    while queue:
        Z = queue.pop()
        for label, W in successor_pairs(Z, cells, branch_tuples):
            edges.add((Z, W, label))
            if W not in seen:
                seen.add(W)
                queue.append(W)
                if len(seen) > max_vertices:
                    raise RuntimeError("diagram does not close")
    return seen, edges


def raw_image(f, a, b):
    """Hull of a continuous piecewise linear map on ``[a, b]`` from raw evaluation."""
    xs = [a, b] + [Fr(t) for t in f.breaks if a < t < b]
    vals = [eval_raw(f, x) for x in xs]
    return min(vals), max(vals)


def brute_box_count(F, eps, lo, hi):
    """Stopping-time cover count, by plain recursion over words.

    ``I_w`` is the nested hull ``f_{w1}(f_{w2}(... f_{wn}(I)))``; a grid box
    ``[lo + k e, lo + (k+1) e]`` counts when its interior meets the interior
    of some stopped cylinder.
    """
    boxes = set()

    def visit(word):
        a, b = lo, hi
        for k in reversed(word):
            a, b = raw_image(F.maps[k - 1], a, b)
        if b - a <= eps:
            k = int((a - lo) // eps) - 1
            while lo + k * eps < b:
                if lo + (k + 1) * eps > a:
                    boxes.add(k)
                k += 1
            return
        for i in range(1, F.m + 1):
            visit(word + (i,))

    visit(())
    return len(boxes)
