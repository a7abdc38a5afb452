"""Test systems shared across modules."""
from fractions import Fraction as Fr

from cplifs.model import Cplifs, PiecewiseLinearMap, validate_system


def affine(*pairs) -> Cplifs:
    return Cplifs(tuple(PiecewiseLinearMap.affine(Fr(r), Fr(t)) for r, t in pairs))


def pl(breaks, slopes, f0) -> PiecewiseLinearMap:
    return PiecewiseLinearMap(tuple(Fr(b) for b in breaks), tuple(Fr(s) for s in slopes), Fr(f0))


# middle-third Cantor set
SYS_A = affine(("1/3", 0), ("1/3", "2/3"))
# tent-like left map plus a right similarity; finite Markov diagram
SYS_D = Cplifs((pl(["1/2"], ["1/2", "-1/2"], 0), PiecewiseLinearMap.affine(Fr(1, 2), Fr(1, 2))))
# three similarities whose first two inverse branches cross at 1/4
SYS_X = affine(("1/2", 0), ("1/3", "1/12"), ("1/2", "1/2"))
# two overlapping similarities with parallel inverse branches (light overlap)
SYS_L = affine(("3/4", 0), ("3/4", "1/4"))
# binary halves: attractor is the whole unit interval
SYS_H = affine(("1/2", 0), ("1/2", "1/2"))
# orientation reversing second map
SYS_R = affine(("1/3", 0), ("-1/3", 1))
# SYS_A with a redundant break at 1/2 on the first map
SYS_A_BREAK = Cplifs((pl(["1/2"], ["1/3", "1/3"], 0), PiecewiseLinearMap.affine(Fr(1, 3), Fr(2, 3))))
# a break outside the invariant interval
SYS_OUTSIDE = Cplifs((pl(["2"], ["1/3", "1/2"], 0), PiecewiseLinearMap.affine(Fr(1, 3), Fr(2, 3))))

CLOSED_SYSTEMS = {"A": SYS_A, "D": SYS_D, "X": SYS_X, "R": SYS_R, "H": SYS_H}
ALL_SYSTEMS = dict(CLOSED_SYSTEMS, L=SYS_L)

for _F in ALL_SYSTEMS.values():
    validate_system(_F)
