import math
import random
from fractions import Fraction as Fr

import pytest
from hypothesis import given, strategies as st

from cplifs.model import Cplifs, PiecewiseLinearMap, branches_of, invariant_interval
from cplifs.partition import (
    classify_overlaps,
    critical_points,
    cross_cut_bound,
    light_epsilon,
    monotonicity_partition,
    orbit_separation,
    refine_for_cross_overlaps,
    refine_for_light_overlaps,
    returns_to_itself,
)
from cplifs.rational import Interval, merge_intervals

from oracles import interval_orbit, inverse_agreement, orbit_points, raw_branches
from systems import SYS_A, SYS_D, SYS_L, SYS_R, SYS_X, affine

I01 = Interval(0, 1)


def setup(F):
    I = invariant_interval(F)
    br = branches_of(F, I)
    crit = critical_points(F, I, br)
    return I, br, crit, monotonicity_partition(F, I, crit)


def test_critical_points_tent():
    _, br, crit, _ = setup(SYS_D)
    assert crit.points == (0, Fr(1, 4), Fr(1, 2), 1)
    assert crit.intersecting == (Fr(1, 4),)
    tags = dict(zip(crit.points, crit.tags))
    assert {"break-image", "intersecting"} <= set(tags[Fr(1, 4)])
    # pairwise linear solve of the two inverse branches of f1
    (r1, t1), (r2, t2) = [(b.slope, b.offset) for b in br[:2]]
    assert inverse_agreement(r1, t1, r2, t2) == Fr(1, 4)
    assert inverse_agreement(Fr(1, 3), 0, Fr(1, 3), Fr(2, 3)) is None


def test_critical_points_cantor_and_parallel_branches():
    _, _, crit, _ = setup(SYS_A)
    assert crit.points == (0, Fr(1, 3), Fr(2, 3), 1)
    assert crit.intersecting == ()
    _, _, crit_l, _ = setup(SYS_L)
    assert crit_l.intersecting == ()


@pytest.mark.parametrize("F,cells", [
    (SYS_D, [Interval(0, Fr(1, 4)), Interval(Fr(1, 2), 1)]),
    (SYS_A, [Interval(0, Fr(1, 3)), Interval(Fr(2, 3), 1)]),
    (SYS_L, [Interval(0, Fr(1, 4)), Interval(Fr(1, 4), Fr(3, 4)), Interval(Fr(3, 4), 1)]),
])
def test_monotonicity_partition_examples(F, cells):
    assert list(setup(F)[3].cells) == cells


def test_single_full_branch_map():
    F = affine(("1/2", 0))
    br = branches_of(F, I01)
    P = monotonicity_partition(F, I01, critical_points(F, I01, br))
    assert list(P.cells) == [Interval(0, Fr(1, 2))]


def test_classify_tent_records_endpoint_agreement_only():
    _, br, _, P = setup(SYS_D)
    rep = classify_overlaps(P, br)
    first = rep.cells[0]
    assert first.pairs == ()
    assert first.endpoint_agreements == (((1, 1), (1, 2), Fr(1, 4)),)
    # inverse images of [0,1/4] under the two pieces of f1 touch at 1/2 only
    pre = [b.inverse_image(first.cell) for b in br[:2]]
    assert pre == [Interval(0, Fr(1, 2)), Interval(Fr(1, 2), 1)]
    assert (rep.order, rep.n_intersecting) == (1, 1)


def test_classify_cantor_and_light_and_cross():
    _, br, _, P = setup(SYS_A)
    rep = classify_overlaps(P, br)
    assert (rep.order, rep.n_intersecting) == (1, 0)
    assert all(not c.pairs for c in rep.cells)

    _, br, _, P = setup(SYS_L)
    rep = classify_overlaps(P, br)
    kinds = [[p.kind for p in c.pairs] for c in rep.cells]
    assert kinds == [[], ["light"], []]
    assert rep.order == 2 and not rep.has_cross

    _, br, _, P = setup(SYS_X)
    rep = classify_overlaps(P, br)
    assert rep.has_cross and rep.intersecting == (Fr(1, 4),)
    assert all(p.witness == Fr(1, 4) for c in rep.cells for p in c.pairs)


def test_cross_domination_example_groups():
    _, br, _, P = setup(SYS_X)
    rep = classify_overlaps(P, br)
    idx = next(c.index for c in rep.cells if c.has_cross)
    assert rep.cross_groups(idx) == [[(1, 1), (2, 1)]]


@pytest.mark.parametrize("F", [SYS_A, SYS_D, SYS_L, SYS_X, SYS_R])
def test_classify_is_independent_of_branch_order(F):
    _, br, _, P = setup(F)
    ref = classify_overlaps(P, br).to_json()
    rng = random.Random(7)
    for _ in range(5):
        shuffled = list(br)
        rng.shuffle(shuffled)
        assert classify_overlaps(P, shuffled).to_json() == ref


def test_light_epsilon_parallel_branches():
    _, br, _, P = setup(SYS_L)
    Z = P.cells[1]
    eps = light_epsilon(Z, br[0], br[1])
    # inverse graphs are parallel with gap g = 1/3 and slope 4/3, so eps = g * 3/4
    g = br[0].inverse(Z.lo) - br[1].inverse(Z.lo)
    assert abs(g) == Fr(1, 3)
    assert eps == abs(g) * Fr(3, 4) == Fr(1, 4)

    def disjoint(a, b):
        w = Interval(a, b)
        return not br[0].inverse_image(w).interiors_meet(br[1].inverse_image(w))

    for i in range(11):
        a = Z.lo + (Z.length - eps) * Fr(i, 10)
        assert disjoint(a, a + eps)
    delta = Fr(1, 1000)
    assert any(not disjoint(a, a + eps + delta) for a in (Z.lo, Z.lo + Fr(1, 8), Z.hi - eps - delta))


def test_light_refinement():
    _, br, _, P = setup(SYS_L)
    rep = classify_overlaps(P, br)
    R, eps = refine_for_light_overlaps(P, rep, br)
    assert eps == {1: Fr(1, 4)}
    assert R.refines(P) and R.total_length == P.total_length
    assert R.cells[0] == P.cells[0] and R.cells[-1] == P.cells[-1]
    for Z in R.cells:
        pre = [b.inverse_image(Z) for b in br if Z.issubset(b.range)]
        for i in range(len(pre)):
            for j in range(i + 1, len(pre)):
                assert not pre[i].interiors_meet(pre[j])


def test_light_refinement_without_overlap_is_noop():
    _, br, _, P = setup(SYS_A)
    R, eps = refine_for_light_overlaps(P, classify_overlaps(P, br), br)
    assert R == P and eps == {}


def test_cross_cut_bound_arithmetic():
    assert cross_cut_bound(Fr(1, 4), Fr(1, 2), 2) == Fr(1, 20)
    assert cross_cut_bound(Fr(3, 5), Fr(1, 2), 1) == Fr(1, 5)


def test_orbit_separation_tent():
    _, br, _, _ = setup(SYS_D)
    assert orbit_separation(Fr(1, 4), 1, br) == Fr(1, 4)
    assert orbit_points(Fr(1, 4), 1, raw_branches(SYS_D, Fr(0), Fr(1))) == [{Fr(1, 2)}]
    assert orbit_separation(Fr(0), 1, br) == 0
    assert orbit_separation(Fr(1, 4), 0, br) == math.inf


def test_orbit_separation_matches_enumeration():
    for F in (SYS_D, SYS_X, SYS_R):
        _, br, _, _ = setup(F)
        raw = raw_branches(F, Fr(0), Fr(1))
        for x0 in (Fr(1, 4), Fr(1, 7), Fr(5, 9)):
            for P in (1, 2, 3):
                pts = set().union(*orbit_points(x0, P, raw))
                expected = min((abs(y - x0) for y in pts), default=math.inf)
                assert orbit_separation(x0, P, br) == expected


def test_cross_refinement_tent():
    I, br, crit, P = setup(SYS_D)
    R, cuts = refine_for_cross_overlaps(P, crit.intersecting, 1, Fr(1, 2), br)
    assert len(cuts) == 1
    cut = cuts[0]
    assert cut.separation == Fr(1, 4)
    assert 0 < abs(cut.cut - Fr(1, 4)) < cut.separation / 3
    assert cut.cut.denominator <= 2**20
    assert R.refines(P) and R.total_length == P.total_length


def test_cross_refinement_without_intersecting_points():
    _, br, _, P = setup(SYS_A)
    R, cuts = refine_for_cross_overlaps(P, (), 3, Fr(1, 3), br)
    assert R == P and cuts == []


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_cross_refinement_separates_cells_from_their_orbit(depth):
    I, br, crit, P = setup(SYS_X)
    R, _ = refine_for_cross_overlaps(P, crit.intersecting, depth, SYS_X.min_abs_slope, br)
    raw = raw_branches(SYS_X, I.lo, I.hi)
    for w in crit.intersecting:
        for idx in R.cells_containing(w):
            Y = R.cells[idx]
            assert not returns_to_itself(Y, depth, br)
            for level in interval_orbit(Y.lo, Y.hi, depth, raw):
                assert all(b < Y.lo or a > Y.hi for a, b in level)


slopes = st.fractions(min_value=Fr(-4, 5), max_value=Fr(4, 5), max_denominator=12).filter(lambda r: r != 0)
offsets = st.fractions(min_value=-2, max_value=2, max_denominator=12)
tent_sys = st.tuples(
    st.fractions(min_value=Fr(1, 5), max_value=Fr(4, 5), max_denominator=10),
    st.lists(st.tuples(slopes, offsets), min_size=1, max_size=2),
)


def _build(data):
    b, rest = data
    f = PiecewiseLinearMap((b,), (Fr(1, 2), Fr(-1, 3)), Fr(0))
    F = Cplifs((f,) + tuple(PiecewiseLinearMap.affine(r, t) for r, t in rest))
    return F


@given(tent_sys)
def test_partition_tiles_image_union(data):
    F = _build(data)
    try:
        I = invariant_interval(F)
    except Exception:
        return
    br = branches_of(F, I)
    P = monotonicity_partition(F, I, critical_points(F, I, br))
    union = merge_intervals([f.image(I) for f in F.maps])
    assert P.total_length == sum(iv.length for iv in union)
    for a, b in zip(P.cells, P.cells[1:]):
        assert a.hi <= b.lo
    for Z in P.cells:
        assert any(Z.issubset(u) for u in union)


@given(tent_sys)
def test_light_refinement_refines(data):
    F = _build(data)
    try:
        I = invariant_interval(F)
    except Exception:
        return
    br = branches_of(F, I)
    P = monotonicity_partition(F, I, critical_points(F, I, br))
    rep = classify_overlaps(P, br)
    R, _ = refine_for_light_overlaps(P, rep, br, skip_cross=True)
    assert R.refines(P)
    assert R.total_length == P.total_length
    light_cells = {c.index for c in rep.cells if c.has_light and not c.has_cross}
    for Y in R.cells:
        parent = [i for i, Z in enumerate(P.cells) if Y.issubset(Z)]
        assert len(parent) >= 1
        if parent[0] in light_cells:
            app = [b for b in br if Y.issubset(b.range)]
            lights = {(p.first, p.second) for p in rep.cells[parent[0]].pairs}
            lab = {b.label: b for b in app}
            for a, b in lights:
                assert not lab[a].inverse_image(Y).interiors_meet(lab[b].inverse_image(Y))
