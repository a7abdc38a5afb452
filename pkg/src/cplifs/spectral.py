"""Pressure matrices of Markov diagrams and their Perron roots.

Entries are kept as exact multisets of slope magnitudes and evaluated at a
given ``s`` only when needed.  Spectral radii are enclosed with
Collatz-Wielandt bounds: for an irreducible nonnegative ``A`` and any
positive vector ``v``, ``min_i (Av)_i/v_i <= rho(A) <= max_i (Av)_i/v_i``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import errors
from .diagram import MarkovDiagram, scc_from_edges
from .rational import log_abs

EPS = np.finfo(float).eps
DEFAULT_MAX_ITER = 1_000_000


@dataclass(frozen=True)
class SpectralEnclosure:
    lo: float
    hi: float
    iterations: int
    method: str
    converged: bool = True

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def to_json(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "iterations": self.iterations,
            "method": self.method,
            "converged": self.converged,
        }


class PressureMatrix:
    """Square nonnegative matrix-valued function ``s -> F_C(s)``.

    ``entries[(i, j)]`` is the multiset (sorted tuple) of slope magnitudes of
    the parallel edges ``i -> j``; the evaluated entry is the sum of their
    ``s``-th powers.
    """

    def __init__(self, size: int, entries: dict[tuple[int, int], tuple[Fraction, ...]], ids: Sequence[int] = ()):
        self.size = size
        self.entries = {k: tuple(sorted(v)) for k, v in sorted(entries.items())}
        self.ids = tuple(ids) if ids else tuple(range(size))
        rows, cols, logs = [], [], []
        for (i, j), mags in self.entries.items():
            for r in mags:
                if not 0 < r < 1:
                    raise ValueError(f"slope magnitude {r} outside (0, 1)")
                rows.append(i)
                cols.append(j)
                logs.append(log_abs(r))
        self._rows = np.array(rows, dtype=np.int64)
        self._cols = np.array(cols, dtype=np.int64)
        self._logs = np.array(logs, dtype=float)
        self._components = scc_from_edges(size, self.entries.keys())
        self._warm: dict[int, np.ndarray] = {}

    @classmethod
    def from_dense(cls, magnitudes) -> "PressureMatrix":
        """Build from a nested list whose items are lists of slope magnitudes."""
        n = len(magnitudes)
        entries = {
            (i, j): tuple(Fraction(x) for x in cell)
            for i, row in enumerate(magnitudes)
            for j, cell in enumerate(row)
            if cell
        }
        return cls(n, entries)

    @property
    def components(self) -> list[list[int]]:
        return self._components

    def evaluate(self, s: float) -> sp.csr_matrix:
        data = np.exp(s * self._logs)
        return sp.csr_matrix((data, (self._rows, self._cols)), shape=(self.size, self.size))

    def dense(self, s: float) -> np.ndarray:
        return self.evaluate(s).toarray()

    def parallel_counts(self) -> dict[tuple[int, int], int]:
        return {k: len(v) for k, v in self.entries.items()}

    def submatrix(self, local: Sequence[int]) -> "PressureMatrix":
        pos = {v: n for n, v in enumerate(local)}
        entries = {(pos[i], pos[j]): m for (i, j), m in self.entries.items() if i in pos and j in pos}
        return PressureMatrix(len(local), entries, [self.ids[i] for i in local])


def assemble_matrix(diagram: MarkovDiagram, vertex_ids: Sequence[int] | None = None) -> PressureMatrix:
    """Associated matrix of the subdiagram induced by ``vertex_ids`` (canonical order)."""
    ids = sorted(vertex_ids) if vertex_ids is not None else [v.id for v in diagram.vertices]
    if not ids:
        raise ValueError("vertex subset must be nonempty")
    pos = {v: n for n, v in enumerate(ids)}
    slope = {b.label: abs(b.slope) for b in diagram.branches}
    entries: dict[tuple[int, int], list[Fraction]] = defaultdict(list)
    for e in diagram.edges:
        if e.source in pos and e.target in pos:
            entries[(pos[e.source], pos[e.target])].append(slope[e.label])
    return PressureMatrix(len(ids), {k: tuple(v) for k, v in entries.items()}, ids)


def _collatz_wielandt(A: sp.csr_matrix, v: np.ndarray, tol: float, max_iter: int):
    """Shifted power iteration on an irreducible block; returns (lo, hi, v, iters, converged)."""
    row_nnz = int(np.diff(A.indptr).max()) if A.nnz else 0
    slack = 4.0 * (row_nnz + 2) * EPS
    shift = None
    lo = hi = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        w = A @ v
        ratios = w / v
        lo, hi = float(ratios.min()), float(ratios.max())
        floor = 1e3 * EPS * max(hi, 1e-300)
        if hi - lo <= max(tol, floor):
            break
        if shift is None or it % 64 == 0:
            # shifting by ~rho makes the iteration primitive and fast for periodic blocks
            shift = max(hi, 1e-300)
        v = w + shift * v
        v /= v.max()
    converged = hi - lo <= max(tol, 1e3 * EPS * max(hi, 1e-300))
    return lo * (1 - slack), hi * (1 + slack), v, it, converged


def spectral_radius(
    M: PressureMatrix, s: float, tol: float = 1e-12, max_iter: int = DEFAULT_MAX_ITER
) -> SpectralEnclosure:
    """Certified enclosure of the Perron root of ``M(s)``.

    Reducible matrices are split into strongly connected blocks; the spectral
    radius is the largest block radius, so the enclosure is the componentwise
    maximum of the block enclosures.  The bounds are widened by a few ulps per
    row to absorb rounding in the matrix-vector products.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    A = M.evaluate(s)
    best_lo = best_hi = 0.0
    iters = 0
    converged = True
    for c_idx, comp in enumerate(M.components):
        if len(comp) == 1:
            i = comp[0]
            a = float(A[i, i])
            best_lo, best_hi = max(best_lo, a), max(best_hi, a)
            continue
        block = A[comp][:, comp].tocsr()
        v = M._warm.get(c_idx)
        if v is None:
            v = np.ones(len(comp))
        lo, hi, v, it, ok = _collatz_wielandt(block, v, tol, max_iter)
        M._warm[c_idx] = v
        iters += it
        converged &= ok
        best_lo, best_hi = max(best_lo, lo), max(best_hi, hi)
    method = "collatz-wielandt" if len(M.components) == 1 else "collatz-wielandt/scc"
    return SpectralEnclosure(float(best_lo), float(best_hi), iters, method, bool(converged))


def spectral_radius_dense(A: np.ndarray, tol: float = 1e-12, max_iter: int = DEFAULT_MAX_ITER) -> SpectralEnclosure:
    """Enclosure for a plain nonnegative float matrix (used for generic checks)."""
    A = np.asarray(A, dtype=float)
    if (A < 0).any():
        raise ValueError("matrix must be nonnegative")
    n = A.shape[0]
    rows, cols = np.nonzero(A)
    comps = scc_from_edges(n, zip(rows.tolist(), cols.tolist()))
    S = sp.csr_matrix(A)
    lo_b = hi_b = 0.0
    iters, conv = 0, True
    for comp in comps:
        if len(comp) == 1:
            a = float(A[comp[0], comp[0]])
            lo_b, hi_b = max(lo_b, a), max(hi_b, a)
            continue
        lo, hi, _, it, ok = _collatz_wielandt(S[comp][:, comp].tocsr(), np.ones(len(comp)), tol, max_iter)
        iters += it
        conv &= ok
        lo_b, hi_b = max(lo_b, lo), max(hi_b, hi)
    return SpectralEnclosure(float(lo_b), float(hi_b), iters, "collatz-wielandt/scc", bool(conv))


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    enclosure: SpectralEnclosure | None
    bracket: tuple[float, float]
    vertices: int
    level: int | None = None
    flag: str | None = None
    evaluations: int = 0

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "bracket": list(self.bracket),
            "enclosure": None if self.enclosure is None else self.enclosure.to_json(),
            "vertices": self.vertices,
            "level": self.level,
            "flag": self.flag,
        }


def solve_diagram_dimension(
    M: PressureMatrix, tol: float = 1e-10, s_max: float = 1024.0, level: int | None = None
) -> DimensionEstimate:
    """Root of ``rho(M(s)) = 1`` by bisection.

    ``rho(M(s))`` is strictly decreasing in ``s`` because every stored
    magnitude is below one.  If ``rho(M(0)) <= 1`` there is no positive root
    and 0 is returned with flag ``NoRoot``.
    """
    e0 = spectral_radius(M, 0.0)
    evals = 1
    if e0.hi <= 1 + 1e-9:
        return DimensionEstimate(0.0, e0, (0.0, 0.0), M.size, level, "NoRoot", evals)
    lo, hi = 0.0, 1.0
    while True:
        e = spectral_radius(M, hi)
        evals += 1
        if e.mid < 1:
            break
        lo, hi = hi, 2 * hi
        if hi > s_max:
            raise errors.CplifsError(f"no bracket for the pressure root below s = {s_max}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        e = spectral_radius(M, mid)
        evals += 1
        if e.mid > 1:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    return DimensionEstimate(s, spectral_radius(M, s), (lo, hi), M.size, level, None, evals + 1)


def dimension_lower_sequence(
    diagram: MarkovDiagram, levels: Sequence[int], tol: float = 1e-10
) -> list[DimensionEstimate]:
    """Diagram dimension restricted to levels ``<= N`` for every ``N`` in ``levels``."""
    out = []
    for N in levels:
        ids = diagram.ids_up_to_level(N)
        if not ids:
            out.append(DimensionEstimate(0.0, None, (0.0, 0.0), 0, N, "EmptySubdiagram"))
            continue
        out.append(solve_diagram_dimension(assemble_matrix(diagram, ids), tol, level=N))
    return out


@dataclass(frozen=True)
class TailDiagnostic:
    level: int
    horizon: int
    s: float
    tail: SpectralEnclosure
    full: SpectralEnclosure
    tail_vertices: int
    full_vertices: int

    @property
    def spectral_gap(self) -> bool:
        """Truncated form of the hypothesis rho(F) > rho(tail block)."""
        return self.tail.hi < self.full.lo

    def path_count_bound(self, K: int, n: int = 1) -> float:
        """``2**(1/N) * K**(1/n)``, the tail bound for systems without multiple edges."""
        return 2.0 ** (1.0 / max(self.level, 1)) * K ** (1.0 / n)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "horizon": self.horizon,
            "s": self.s,
            "tail": self.tail.to_json(),
            "full": self.full.to_json(),
            "tail_vertices": self.tail_vertices,
            "full_vertices": self.full_vertices,
            "spectral_gap": self.spectral_gap,
        }


def tail_spectral_radius(diagram: MarkovDiagram, N: int, horizon: int, s: float) -> TailDiagnostic:
    """Spectral radius of the block of vertices with level in ``(N, N + horizon]``."""
    tail_ids = diagram.ids_between_levels(N, N + horizon)
    if not tail_ids:
        raise errors.EmptyTail(f"no vertices above level {N}", level=N)
    full_ids = diagram.ids_up_to_level(N + horizon)
    tail = spectral_radius(assemble_matrix(diagram, tail_ids), s)
    full = spectral_radius(assemble_matrix(diagram, full_ids), s)
    return TailDiagnostic(N, horizon, s, tail, full, len(tail_ids), len(full_ids))


def tail_trend(diagram: MarkovDiagram, levels: Sequence[int], horizon: int, s: float) -> list[TailDiagnostic]:
    out = []
    for N in levels:
        try:
            out.append(tail_spectral_radius(diagram, N, horizon, s))
        except errors.EmptyTail:
            break
    return out
