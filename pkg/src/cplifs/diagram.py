"""Markov diagram: successor expansion, levels, strong connectivity, the
irreducible core and cross-overlap domination."""
from __future__ import annotations

from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

import networkx as nx

from . import errors
from .model import AffineBranch, Cplifs, cylinder_cover
from .partition import OverlapReport, Partition
from .rational import Interval, format_rational


@dataclass(frozen=True)
class DiagramVertex:
    id: int
    interval: Interval
    level: int
    contains_intersecting_point: bool = False


@dataclass(frozen=True, order=True)
class LabeledEdge:
    source: int
    target: int
    label: tuple[int, int]


@dataclass(frozen=True)
class MarkovDiagram:
    vertices: tuple[DiagramVertex, ...]
    edges: tuple[LabeledEdge, ...]
    partition: Partition
    branches: tuple[AffineBranch, ...]
    max_level: int
    max_vertices: int
    closed: bool

    def __len__(self):
        return len(self.vertices)

    @property
    def top_level(self) -> int:
        return max((v.level for v in self.vertices), default=-1)

    def ids_up_to_level(self, n: int) -> list[int]:
        return [v.id for v in self.vertices if v.level <= n]

    def ids_between_levels(self, lo_exclusive: int, hi_inclusive: int) -> list[int]:
        return [v.id for v in self.vertices if lo_exclusive < v.level <= hi_inclusive]

    def slope_of(self, label: tuple[int, int]) -> Fraction:
        for b in self.branches:
            if b.label == label:
                return b.slope
        raise KeyError(label)

    def out_edges(self) -> dict[int, list[LabeledEdge]]:
        out = defaultdict(list)
        for e in self.edges:
            out[e.source].append(e)
        return out

    def parallel_edges(self) -> dict[tuple[int, int], list[tuple[int, int]]]:
        """Vertex pairs joined by more than one labelled edge."""
        groups = defaultdict(list)
        for e in self.edges:
            groups[(e.source, e.target)].append(e.label)
        return {k: v for k, v in groups.items() if len(v) > 1}

    def restrict(self, ids: Iterable[int]) -> "MarkovDiagram":
        """Induced subdiagram; vertices renumbered in canonical order."""
        keep = sorted(set(ids), key=lambda i: (self.vertices[i].level, self.vertices[i].interval))
        remap = {old: new for new, old in enumerate(keep)}
        verts = tuple(replace(self.vertices[old], id=remap[old]) for old in keep)
        edges = tuple(sorted(
            LabeledEdge(remap[e.source], remap[e.target], e.label)
            for e in self.edges
            if e.source in remap and e.target in remap
        ))
        return replace(self, vertices=verts, edges=edges)

    def to_json(self) -> dict:
        return {
            "closed": self.closed,
            "max_level": self.max_level,
            "max_vertices": self.max_vertices,
            "top_level": self.top_level,
            "vertices": [
                {
                    "id": v.id,
                    "interval": v.interval.to_json(),
                    "level": v.level,
                    "contains_intersecting_point": v.contains_intersecting_point,
                }
                for v in self.vertices
            ],
            "edges": [{"from": e.source, "to": e.target, "label": list(e.label)} for e in self.edges],
        }

    def to_dot(self) -> str:
        lines = ["digraph markov {", "  rankdir=LR;"]
        for v in self.vertices:
            lines.append(f'  v{v.id} [label="[{v.interval.lo}, {v.interval.hi}]\\nlevel {v.level}"];')
        for e in self.edges:
            lines.append(f'  v{e.source} -> v{e.target} [label="({e.label[0]},{e.label[1]})"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def successors(
    Z: Interval, partition: Partition, branches: Sequence[AffineBranch]
) -> list[tuple[tuple[int, int], Interval]]:
    """Nondegenerate intersections of partition cells with branch preimages of ``Z``."""
    out = []
    for b in branches:
        part = Z.intersect(b.range)
        if part is None or part.degenerate:
            continue
        pre = b.inverse_image(part)
        for cell in _cells_meeting(partition, pre):
            D = cell.intersect(pre)
            if D is not None and not D.degenerate:
                out.append((b.label, D))
    return out


def _cells_meeting(partition: Partition, iv: Interval) -> list[Interval]:
    cells = partition.cells
    los = partition.cell_los
    start = max(0, bisect_right(los, iv.lo) - 1)
    out = []
    for c in cells[start:]:
        if c.lo >= iv.hi:
            break
        if c.hi > iv.lo:
            out.append(c)
    return out


def _expand(
    seeds: Sequence[Interval],
    partition: Partition,
    branches: Sequence[AffineBranch],
    max_level: int,
    max_vertices: int,
    keep=None,
) -> tuple[list[tuple[Interval, int]], list[tuple[int, int, tuple[int, int]]], bool]:
    """Breadth-first successor closure; returns (vertices, edges, closed)."""
    index: dict[Interval, int] = {}
    verts: list[tuple[Interval, int]] = []
    closed = True
    for iv in sorted(set(seeds)):
        if len(verts) >= max_vertices:
            closed = False
            break
        index[iv] = len(verts)
        verts.append((iv, 0))
    frontier = list(range(len(verts)))
    edges = []
    level = 0
    while frontier:
        pending: dict[Interval, list] = defaultdict(list)
        for vid in frontier:
            for label, D in successors(verts[vid][0], partition, branches):
                if keep is not None and not keep(D):
                    continue
                if D in index:
                    edges.append((vid, index[D], label))
                else:
                    pending[D].append((vid, label))
        if not pending:
            break
        if level >= max_level or len(verts) >= max_vertices:
            closed = False
            break
        new = sorted(pending)
        room = max_vertices - len(verts)
        if len(new) > room:
            closed = False
            new = new[:room]
        frontier = []
        for D in new:
            index[D] = len(verts)
            verts.append((D, level + 1))
            frontier.append(index[D])
            for vid, label in pending[D]:
                edges.append((vid, index[D], label))
        level += 1
    return verts, edges, closed


def build_diagram(
    partition: Partition,
    branches: Sequence[AffineBranch],
    max_level: int = 50,
    max_vertices: int = 5000,
    intersecting: Iterable[Fraction] = (),
) -> MarkovDiagram:
    """Markov diagram with respect to ``partition``, truncated by level and size caps."""
    if max_level < 0 or max_vertices < 1:
        raise errors.ConfigError("diagram caps must be positive")
    branches = tuple(sorted(branches, key=lambda b: b.label))
    verts, edges, closed = _expand(partition.cells, partition, branches, max_level, max_vertices)
    return _assemble(verts, edges, closed, partition, branches, max_level, max_vertices, intersecting)


def _assemble(verts, edges, closed, partition, branches, max_level, max_vertices, intersecting):
    W = sorted(set(intersecting))
    # canonical order: level first, then endpoints
    order = sorted(range(len(verts)), key=lambda i: (verts[i][1], verts[i][0]))
    remap = {old: new for new, old in enumerate(order)}
    vertices = tuple(
        DiagramVertex(remap[old], verts[old][0], verts[old][1], any(w in verts[old][0] for w in W))
        for old in order
    )
    E = tuple(sorted({LabeledEdge(remap[s], remap[t], lab) for s, t, lab in edges}))
    return MarkovDiagram(vertices, E, partition, tuple(branches), max_level, max_vertices, closed)


def verify_closure(diagram: MarkovDiagram) -> bool:
    """Recompute every successor and check it is a vertex with a matching edge."""
    index = {v.interval: v.id for v in diagram.vertices}
    edge_set = set(diagram.edges)
    for v in diagram.vertices:
        for label, D in successors(v.interval, diagram.partition, diagram.branches):
            if D not in index or LabeledEdge(v.id, index[D], label) not in edge_set:
                return False
    return True


# -- strong connectivity -------------------------------------------------------


def scc_from_edges(n: int, pairs: Iterable[tuple[int, int]]) -> list[list[int]]:
    """SCCs of a graph on ``range(n)``, listed in topological order of the condensation."""
    if n == 0:
        return []
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    G.add_edges_from(pairs)
    C = nx.condensation(G)
    order = nx.lexicographical_topological_sort(C, key=lambda c: min(C.nodes[c]["members"]))
    return [sorted(C.nodes[c]["members"]) for c in order]


def strongly_connected_components(diagram: MarkovDiagram) -> list[list[int]]:
    return scc_from_edges(len(diagram.vertices), ((e.source, e.target) for e in diagram.edges))


def is_irreducible(diagram: MarkovDiagram) -> bool:
    comps = strongly_connected_components(diagram)
    return len(comps) == 1 and len(diagram.vertices) > 0


# -- irreducible core ----------------------------------------------------------


@dataclass(frozen=True)
class IrreducibleCore:
    partition: Partition
    diagram: MarkovDiagram
    fixed_point: Fraction
    map_index: int
    anchor_cells: tuple[Interval, ...]
    collected: int

    def to_json(self) -> dict:
        return {
            "fixed_point": format_rational(self.fixed_point),
            "map_index": self.map_index,
            "anchor_cells": [c.to_json() for c in self.anchor_cells],
            "collected_vertices": self.collected,
            "core_vertices": len(self.diagram.vertices),
            "core_edges": len(self.diagram.edges),
            "strongly_connected": is_irreducible(self.diagram),
            "intervals": [v.interval.to_json() for v in self.diagram.vertices],
        }


def irreducible_core(
    F: Cplifs,
    partition: Partition,
    branches: Sequence[AffineBranch],
    interval: Interval,
    depth: int = 8,
    max_vertices: int = 5000,
    budget: int = 1_000_000,
) -> IrreducibleCore:
    """Strongly connected subdiagram anchored at the smallest fixed point.

    The partition is refined at the smallest fixed point of the maps; the one
    or two cells ending there are expanded by successors, keeping only
    intervals that meet the depth-``depth`` cylinder cover (a superset of the
    attractor).  The result is the strongly connected component of the
    anchor cells inside that collection.
    """
    fixed = [(f.fixed_point(), k) for k, f in enumerate(F.maps, start=1)]
    phi, k = min(fixed)
    refined = partition.refine_at([phi])
    anchors = tuple(c for c in refined.cells if phi in (c.lo, c.hi))
    if not anchors:
        raise errors.NotVerifiable(f"fixed point {phi} is not in the image union")
    cover = cylinder_cover(F, depth, interval, budget)
    cover_los = [c.lo for c in cover]

    def meets_cover(iv: Interval) -> bool:
        i = bisect_right(cover_los, iv.hi) - 1
        return i >= 0 and cover[i].hi >= iv.lo

    branches = tuple(sorted(branches, key=lambda b: b.label))
    verts, edges, closed = _expand(
        anchors, refined, branches, max_level=10**9, max_vertices=max_vertices, keep=meets_cover
    )
    if not closed:
        raise errors.NotVerifiable(
            f"successor collection did not close within {max_vertices} vertices", cap=max_vertices
        )
    collected = _assemble(verts, edges, True, refined, branches, 10**9, max_vertices, ())
    comps = strongly_connected_components(collected)
    index = {v.interval: v.id for v in collected.vertices}
    anchor_ids = [index[a] for a in anchors]
    comp = next(c for c in comps if anchor_ids[0] in c)
    if not all(a in comp for a in anchor_ids):
        raise errors.NotVerifiable("anchor cells fall into different strongly connected components")
    return IrreducibleCore(refined, collected.restrict(comp), phi, k, anchors, len(collected.vertices))


# -- cross-overlap domination ---------------------------------------------------


@dataclass(frozen=True)
class Domination:
    diagram: MarkovDiagram
    removed: int
    kept: tuple[tuple[tuple[int, int], tuple[tuple[int, int], ...]], ...]
    ties: tuple[tuple[tuple[int, int], ...], ...]

    def to_json(self) -> dict:
        return {
            "removed_edges": self.removed,
            "kept": [{"branch": list(k), "group": [list(g) for g in grp]} for k, grp in self.kept],
            "ties": [[list(x) for x in t] for t in self.ties],
        }


def dominate_cross_overlaps(diagram: MarkovDiagram, report: OverlapReport) -> Domination:
    """Keep, above every cross-overlap cell, only the edges of the most expanding branch.

    ``report`` must describe the partition the diagram was built on.  Ties in
    slope magnitude are resolved by the lowest label and listed in ``ties``.
    """
    slope = {b.label: abs(b.slope) for b in diagram.branches}
    cells = [c.cell for c in report.cells]
    los = [c.lo for c in cells]
    drop_by_cell: dict[int, set] = {}
    kept, ties = [], []
    for info in report.cells:
        if not info.has_cross:
            continue
        drop = set()
        for group in report.cross_groups(info.index):
            best = min(slope[g] for g in group)
            winners = [g for g in group if slope[g] == best]
            keep = min(winners)
            if len(winners) > 1:
                ties.append(tuple(winners))
            kept.append((keep, tuple(group)))
            drop.update(g for g in group if g != keep)
        drop_by_cell[info.index] = drop
    if not drop_by_cell:
        return Domination(diagram, 0, (), ())
    cell_of = {}
    for v in diagram.vertices:
        i = bisect_right(los, v.interval.lo) - 1
        while i >= 0 and not v.interval.issubset(cells[i]):
            i -= 1
        cell_of[v.id] = i
    new_edges = tuple(
        e for e in diagram.edges if e.label not in drop_by_cell.get(cell_of[e.source], ())
    )
    return Domination(
        replace(diagram, edges=new_edges),
        len(diagram.edges) - len(new_edges),
        tuple(kept),
        tuple(sorted(set(ties))),
    )
