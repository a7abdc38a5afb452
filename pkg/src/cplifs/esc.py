"""Finite-depth separation scan for self-similar systems.

Compositions ``f_w`` with equal slope product are compared by the distance
of their translations; compositions with different slopes are never
compared (their distance is infinite).  A zero distance is an exact overlap
and rules out exponential separation outright.  Positive distances are only
evidence, since separation is a statement about infinitely many depths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import errors
from .model import SelfSimilarSystem, check_budget
from .rational import format_rational, log_abs

DEFAULT_ESC_BUDGET = 2_000_000

Word = tuple[int, ...]


@dataclass(frozen=True)
class WordAtlas:
    """Depth-``n`` compositions grouped by exact slope product.

    ``groups[slope]`` is a list of ``(offset, word)`` sorted by offset then word.
    """

    n: int
    groups: dict[Fraction, list[tuple[Fraction, Word]]]

    def __len__(self) -> int:
        return sum(len(g) for g in self.groups.values())

    def offsets(self, slope: Fraction) -> list[Fraction]:
        return [t for t, _ in self.groups.get(Fraction(slope), [])]


def _compose_layer(S: SelfSimilarSystem, prev: list[tuple[Word, Fraction, Fraction]]):
    # f_{a w} = f_a o f_w: slope r_a * r_w, offset r_a * t_w + t_a
    out = []
    for a, (r, t) in enumerate(S.pairs, start=1):
        for w, rw, tw in prev:
            out.append(((a,) + w, r * rw, r * tw + t))
    return out


def _words(S: SelfSimilarSystem, n: int, budget: int):
    check_budget(len(S) ** n, budget, f"{len(S)}^{n} compositions")
    layer = [((), Fraction(1), Fraction(0))]
    for _ in range(n):
        layer = _compose_layer(S, layer)
    return layer


def word_atlas(S: SelfSimilarSystem, n: int, budget: int = DEFAULT_ESC_BUDGET) -> WordAtlas:
    if n < 1:
        raise ValueError("word length must be at least 1")
    groups: dict[Fraction, list[tuple[Fraction, Word]]] = {}
    for w, r, t in _words(S, n, budget):
        groups.setdefault(r, []).append((t, w))
    for g in groups.values():
        g.sort()
    return WordAtlas(n, dict(sorted(groups.items())))


def compose(S: SelfSimilarSystem, word: Word) -> tuple[Fraction, Fraction]:
    """Exact ``(slope, offset)`` of ``f_{w_1} o ... o f_{w_n}``."""
    r, t = Fraction(1), Fraction(0)
    pairs = S.pairs
    for a in reversed(word):
        ra, ta = pairs[a - 1]
        r, t = ra * r, ra * t + ta
    return r, t


def min_distance(atlas: WordAtlas) -> tuple[Fraction | float, tuple[Word, Word] | None]:
    """Smallest offset gap inside any slope group, with the pair realising it."""
    best: Fraction | float = math.inf
    pair = None
    for g in atlas.groups.values():
        for (t1, w1), (t2, w2) in zip(g, g[1:]):
            d = t2 - t1
            if d < best:
                best, pair = d, (w1, w2)
    return best, pair


@dataclass(frozen=True)
class EscVerdict:
    depths: tuple[int, ...]
    distances: tuple[Fraction | float, ...]
    exponents: tuple[float | None, ...]
    kind: str  # ExactOverlap | SeparationEvidence | Inconclusive
    witness: tuple[Word, Word] | None = None
    witness_map: tuple[Fraction, Fraction] | None = None
    c_estimate: float | None = None
    note: str = ""
    error: dict | None = None

    def to_json(self) -> dict:
        def dist(d):
            if d == math.inf:
                return "inf"
            return format_rational(d)

        doc = {
            "verdict": self.kind,
            "depths": list(self.depths),
            "d_n": [dist(d) for d in self.distances],
            "e_n": list(self.exponents),
            "c_estimate": self.c_estimate,
            "note": self.note,
        }
        if self.witness is not None:
            doc["witness"] = {
                "words": [list(w) for w in self.witness],
                "slope": format_rational(self.witness_map[0]),
                "offset": format_rational(self.witness_map[1]),
            }
        if self.error is not None:
            doc["error"] = self.error
        return doc


def esc_scan(S: SelfSimilarSystem, n_max: int, budget: int = DEFAULT_ESC_BUDGET) -> EscVerdict:
    """Scan depths ``1..n_max`` and stop at the first exact overlap.

    If the budget runs out part way, the depths already scanned are kept and
    the error is attached to the verdict.
    """
    depths, dists, exps = [], [], []
    layer = [((), Fraction(1), Fraction(0))]
    err = None
    for n in range(1, n_max + 1):
        try:
            check_budget(len(S) ** n, budget, f"{len(S)}^{n} compositions")
        except errors.BudgetExceeded as exc:
            err = exc.as_dict()
            break
        layer = _compose_layer(S, layer)
        groups: dict[Fraction, list[tuple[Fraction, Word]]] = {}
        for w, r, t in layer:
            groups.setdefault(r, []).append((t, w))
        for g in groups.values():
            g.sort()
        d, pair = min_distance(WordAtlas(n, groups))
        depths.append(n)
        dists.append(d)
        if d == 0:
            exps.append(None)
            w1, w2 = pair
            f1, f2 = compose(S, w1), compose(S, w2)
            if w1 == w2 or f1 != f2:
                raise AssertionError("overlap witness failed to re-verify")
            return EscVerdict(
                tuple(depths), tuple(dists), tuple(exps), "ExactOverlap", (w1, w2), f1,
                note="two distinct words compose to the same similarity", error=err,
            )
        exps.append(None if d == math.inf else log_abs(d) / n)
    finite = [e for e in exps if e is not None]
    if finite:
        return EscVerdict(
            tuple(depths), tuple(dists), tuple(exps), "SeparationEvidence",
            c_estimate=math.exp(min(finite)),
            note="no exact overlap up to the scanned depth; finite evidence only",
            error=err,
        )
    return EscVerdict(
        tuple(depths), tuple(dists), tuple(exps), "Inconclusive",
        note="no same-slope pairs at the scanned depths", error=err,
    )
