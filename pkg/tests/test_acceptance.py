"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import math
import time
from fractions import Fraction as Fr

import numpy as np
import pytest

from cplifs.cli import main
from cplifs.diagram import build_diagram, irreducible_core, is_irreducible
from cplifs.esc import compose, esc_scan
from cplifs.model import SelfSimilarSystem, branches_of, cylinder_intervals, invariant_interval
from cplifs.oracle import box_dimension_estimate, chaos_game_sample, default_eps, natural_dimension_direct
from cplifs.partition import (
    classify_overlaps,
    critical_points,
    monotonicity_partition,
    refine_for_cross_overlaps,
    refine_for_light_overlaps,
    returns_to_itself,
)
from cplifs.rational import Interval
from cplifs.spectral import assemble_matrix, dimension_lower_sequence, solve_diagram_dimension, spectral_radius_dense

from oracles import interval_orbit, perron_dense, raw_branches
from systems import SYS_A, SYS_D, SYS_H, SYS_L, SYS_R, SYS_X

LOG23 = math.log(2) / math.log(3)
TEST_SYSTEMS = {"A": SYS_A, "D": SYS_D, "X": SYS_X, "R": SYS_R, "H": SYS_H, "L": SYS_L}


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


def base(F):
    I = invariant_interval(F)
    br = branches_of(F, I)
    crit = critical_points(F, I, br)
    return I, br, crit, monotonicity_partition(F, I, crit)


def test_criterion_01_self_similar_specialisation(verdict):
    t0 = time.perf_counter()
    I, br, crit, P = base(SYS_A)
    s_c = solve_diagram_dimension(assemble_matrix(build_diagram(P, br))).value
    s_f = natural_dimension_direct(SYS_A, 12).value
    elapsed = time.perf_counter() - t0
    ok = abs(s_c - LOG23) < 1e-9 and abs(s_f - LOG23) < 1e-6 and elapsed < 1.0
    verdict(1, ok, f"s_C={s_c:.12f} s_F={s_f:.12f} target={LOG23:.12f} time={elapsed:.2f}s")


def test_criterion_02_finite_diagram(verdict):
    t0 = time.perf_counter()
    I, br, crit, P = base(SYS_D)
    d = build_diagram(P, br, intersecting=crit.intersecting)
    verts = [v.interval for v in d.vertices]
    edges = sorted((e.source, e.target, e.label) for e in d.edges)
    M = assemble_matrix(d)
    entries_ok = all(np.all(M.dense(s) == 0.5**s) for s in (0.0, 0.5, 1.0, 1.5, 2.0)) and M.size == 2
    s_c = solve_diagram_dimension(M).value
    sums = [sum(iv.length for _, iv in cylinder_intervals(SYS_D, n, I)) for n in range(1, 11)]
    elapsed = time.perf_counter() - t0
    ok = (
        d.closed
        and verts == [Interval(0, Fr(1, 4)), Interval(Fr(1, 2), 1)]
        and edges == [(0, 0, (1, 1)), (0, 1, (1, 2)), (1, 0, (2, 1)), (1, 1, (2, 1))]
        and entries_ok
        and abs(s_c - 1) < 1e-9
        and all(x == Fr(3, 4) for x in sums)
        and elapsed < 5.0
    )
    verdict(2, ok, f"vertices={[str(v) for v in verts]} edges={len(edges)} s_C={s_c:.12f} "
                   f"sums={set(map(str, sums))} time={elapsed:.2f}s")


def test_criterion_03_monotone_lower_sequence(verdict):
    details, ok = [], True
    for name, F in TEST_SYSTEMS.items():
        I, br, crit, P = base(F)
        d = build_diagram(P, br, max_vertices=2000, intersecting=crit.intersecting)
        seq = [e.value for e in dimension_lower_sequence(d, list(range(d.top_level + 1)))]
        direct = natural_dimension_direct(F, 10 if F.m > 2 else 12).value
        mono = all(b >= a for a, b in zip(seq, seq[1:]))
        below = max(seq) <= direct + 1e-2
        ok &= mono and below
        details.append(f"{name}: last s_C={seq[-1]:.6f} direct={direct:.6f} nondecreasing={mono}")
    verdict(3, ok, "; ".join(details))


def test_criterion_04_box_slope_bound(verdict):
    details, ok = [], True
    series = box_dimension_estimate(SYS_A, [Fr(1, 3**j) for j in range(4, 9)])
    cantor_ok = abs(series.slope - 0.631) <= 0.01
    ok &= cantor_ok
    details.append(f"A(3^-4..3^-8) slope={series.slope:.6f}")
    for name, F in TEST_SYSTEMS.items():
        I = invariant_interval(F)
        k_max = 10 if name == "L" else 12
        slope = box_dimension_estimate(F, default_eps(I, 4, k_max), I).slope
        s_f = natural_dimension_direct(F, 10 if F.m > 2 else 12).value
        bound = min(1.0, s_f) + 0.05
        ok &= slope <= bound
        details.append(f"{name}: slope={slope:.4f} <= {bound:.4f}")
    verdict(4, ok, "; ".join(details))


def test_criterion_05_no_multiple_edges_after_light_refinement(verdict):
    I, br, crit, P = base(SYS_L)
    rep = classify_overlaps(P, br)
    light = [c for c in rep.cells if c.has_light]
    R, eps = refine_for_light_overlaps(P, rep, br)
    d = build_diagram(R, br, max_vertices=2000)
    counts = {}
    for e in d.edges:
        counts[(e.source, e.target)] = counts.get((e.source, e.target), 0) + 1
    multiple = sum(1 for c in counts.values() if c > 1)
    ok = bool(light) and multiple == 0 and d.parallel_edges() == {}
    verdict(5, ok, f"light cells={len(light)} eps={[str(e) for e in eps.values()]} "
                   f"vertices={len(d)} edges={len(d.edges)} vertex pairs with multiple edges={multiple}")


def test_criterion_06_cross_refinement_orbit_avoidance(verdict):
    I, br, crit, P = base(SYS_X)
    R, cuts = refine_for_cross_overlaps(P, crit.intersecting, 3, SYS_X.min_abs_slope, br)
    raw = raw_branches(SYS_X, I.lo, I.hi)
    checked, ok = 0, bool(crit.intersecting)
    for w in crit.intersecting:
        for idx in R.cells_containing(w):
            Y = R.cells[idx]
            orbit = interval_orbit(Y.lo, Y.hi, 3, raw)
            disjoint = all(b < Y.lo or a > Y.hi for level in orbit for a, b in level)
            ok &= disjoint and not returns_to_itself(Y, 3, br)
            checked += 1
    ok &= checked > 0
    verdict(6, ok, f"intersecting={[str(w) for w in crit.intersecting]} cells checked={checked} "
                   f"cuts={[str(c.cut) for c in cuts]}")


def test_criterion_07_esc_soundness(verdict):
    E = SelfSimilarSystem.from_pairs([(Fr(1, 2), 0), (Fr(1, 4), 0)])
    v = esc_scan(E, 10)
    w1, w2 = v.witness
    witness_ok = v.kind == "ExactOverlap" and v.depths[-1] == 2 and w1 != w2 and compose(E, w1) == compose(E, w2)
    H = SelfSimilarSystem.from_pairs([(Fr(1, 2), 0), (Fr(1, 2), Fr(1, 2))])
    h = esc_scan(H, 10)
    dist_ok = h.distances == tuple(Fr(1, 2**n) for n in range(1, 11))
    exp_ok = all(abs(e + math.log(2)) < 1e-12 for e in h.exponents)
    verdict(7, witness_ok and dist_ok and exp_ok,
            f"witness={v.witness} at n={v.depths[-1]}; d_n=2^-n for n<=10: {dist_ok}; e_n=-log2: {exp_ok}")


def _irreducible(rng, n):
    A = rng.random((n, n)) * (rng.random((n, n)) < 0.4)
    perm = rng.permutation(n)
    for i in range(n):
        A[perm[i], perm[(i + 1) % n]] += rng.random() + 0.1
    return A


def test_criterion_08_enclosure_soundness(verdict):
    rng = np.random.default_rng(2024)
    worst, contained = 0.0, 0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        A = _irreducible(rng, n)
        enc = spectral_radius_dense(A)
        rho = perron_dense(A)
        if enc.lo - 1e-8 <= rho <= enc.hi + 1e-8:
            contained += 1
    for n in range(9, 51, 3):
        enc = spectral_radius_dense(_irreducible(rng, n))
        worst = max(worst, enc.width)
    ok = contained == 100 and worst < 1e-10
    verdict(8, ok, f"contained {contained}/100; worst width for size<=50: {worst:.2e}")


def test_criterion_09_irreducible_core_covers_samples(verdict):
    details, ok = [], True
    for name, F in (("A", SYS_A), ("D", SYS_D)):
        I, br, crit, P = base(F)
        core = irreducible_core(F, P, br, I)
        ivs = [(float(v.interval.lo), float(v.interval.hi)) for v in core.diagram.vertices]
        tol = 1e-12 * float(I.length)
        pts = chaos_game_sample(F, 10_000, seed=0)
        outside = sum(1 for x in pts if not any(a - tol <= x <= b + tol for a, b in ivs))
        scc = is_irreducible(core.diagram)
        ok &= scc and outside == 0 and len(pts) == 10_000
        details.append(f"{name}: strongly connected={scc} vertices={len(ivs)} outside={outside}")
    verdict(9, ok, "; ".join(details))


def test_criterion_10_determinism(verdict, tmp_path):
    path = tmp_path / "D.json"
    path.write_text(SYS_D.dumps())
    outs = []
    for i, threads in enumerate(("1", "1", "4", "4")):
        out = tmp_path / f"r{i}.json"
        code = main(["analyze", str(path), "--threads", threads, "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    ok = len(set(outs)) == 1
    verdict(10, ok, f"{len(outs)} analyze runs (threads 1,1,4,4), distinct outputs={len(set(outs))}, bytes={len(outs[0])}")
