"""End-to-end dimension report.

Stages that do not depend on each other run as separate tasks; a failing
stage records its error and the others carry on.  Output depends only on
the system and the configuration, never on the thread count.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import jsonschema

from . import errors
from .config import RunConfig
from .diagram import (
    MarkovDiagram,
    build_diagram,
    dominate_cross_overlaps,
    irreducible_core,
    is_irreducible,
    strongly_connected_components,
)
from .esc import esc_scan
from .model import (
    Cplifs,
    branches_of,
    generated_self_similar,
    invariant_interval,
    is_small,
    regularity_certificate,
    validate_system,
)
from .oracle import (
    box_dimension_estimate,
    chaos_game_sample,
    cylinder_levels,
    default_eps,
    default_s_grid,
    direct_pressure,
    natural_dimension_direct,
)
from .partition import (
    classify_overlaps,
    critical_points,
    monotonicity_partition,
    refine_for_cross_overlaps,
    refine_for_light_overlaps,
)
from .rational import format_rational
from .spectral import dimension_lower_sequence, tail_trend

log = logging.getLogger(__name__)

REPORT_SCHEMA_ID = "cplifs-report/1"
LOWER_SEQUENCE_POINTS = 16
DIRECT_SLACK = 1e-2
BOX_SLACK = 0.05
CHAOS_TOLERANCE = 1e-12

_section = {"type": ["object", "null"]}
_number_or_null = {"type": ["number", "null"]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "errors"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": REPORT_SCHEMA_ID},
        "system": _section,
        "config": _section,
        "interval": {"type": ["array", "null"], "items": {"type": "string"}},
        "smallness": _section,
        "partition": _section,
        "diagram": _section,
        "spectral": _section,
        "direct": _section,
        "box": _section,
        "esc": _section,
        "regularity": _section,
        "core": _section,
        "limit_irreducibility": _section,
        "checks": {
            "type": "object",
            "additionalProperties": {"type": ["boolean", "null"]},
        },
        "headline": {
            "type": "object",
            "properties": {
                "s_C": _number_or_null,
                "s_F": _number_or_null,
                "s_F_band": _number_or_null,
                "min_one_s_F": _number_or_null,
                "box_slope": _number_or_null,
            },
        },
        "errors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["code", "message"],
                "properties": {
                    "stage": {"type": "string"},
                    "code": {"type": "string"},
                    "message": {"type": "string"},
                    "detail": {"type": "object"},
                },
            },
        },
    },
}


def validate_report(doc: dict) -> None:
    jsonschema.validate(doc, REPORT_SCHEMA)


def dumps_document(doc: dict) -> str:
    """Canonical serialization (stable key order, no NaN/inf)."""
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def error_document(exc: errors.CplifsError, stage: str = "input") -> dict:
    return {"schema": REPORT_SCHEMA_ID, "errors": [dict(exc.as_dict(), stage=stage)]}


def diagram_summary(d: MarkovDiagram, with_intervals: bool = False) -> dict:
    levels: dict[int, int] = {}
    for v in d.vertices:
        levels[v.level] = levels.get(v.level, 0) + 1
    comps = strongly_connected_components(d)
    doc = {
        "vertices": len(d.vertices),
        "edges": len(d.edges),
        "closed": d.closed,
        "top_level": d.top_level,
        "max_level": d.max_level,
        "max_vertices": d.max_vertices,
        "vertices_per_level": [levels[k] for k in sorted(levels)],
        "parallel_edge_pairs": len(d.parallel_edges()),
        "strongly_connected_components": len(comps),
        "irreducible": is_irreducible(d),
    }
    if with_intervals:
        doc["intervals"] = [v.interval.to_json() for v in d.vertices]
    return doc


def _sample_levels(top: int, points: int = LOWER_SEQUENCE_POINTS) -> list[int]:
    if top < 0:
        return []
    if top < points:
        return list(range(top + 1))
    return sorted({round(i * top / (points - 1)) for i in range(points)})


class _Run:
    def __init__(self, F: Cplifs, cfg: RunConfig):
        self.F, self.cfg = F, cfg
        self.I = invariant_interval(F)
        self.branches = branches_of(F, self.I)

    # each stage returns {section: value}; errors propagate to the caller

    def geometry(self) -> dict:
        """Partition, diagram, spectral sequence and the limit diagnostics, in order."""
        cfg, out = self.cfg, {}
        crit = critical_points(self.F, self.I, self.branches)
        Z0 = monotonicity_partition(self.F, self.I, crit)
        rep = classify_overlaps(Z0, self.branches)
        self.Z0, self.rep = Z0, rep
        if "partition" in cfg.stages:
            out["partition"] = {
                "critical_points": crit.to_json(),
                "cells": Z0.to_json(),
                "overlaps": rep.to_json(),
            }
        if not {"diagram", "spectral", "limit"} & set(cfg.stages):
            return out
        log.info("building Markov diagram")
        diag = build_diagram(Z0, self.branches, cfg.max_level, cfg.max_vertices, crit.intersecting)
        if "diagram" in cfg.stages:
            out["diagram"] = diagram_summary(diag, with_intervals=len(diag.vertices) <= 64)
        s_C = None
        if "spectral" in cfg.stages or "limit" in cfg.stages:
            log.info("solving the lower sequence")
            seq = dimension_lower_sequence(diag, _sample_levels(diag.top_level), cfg.tol)
            values = [e.value for e in seq]
            s_C = values[-1] if values else None
            out["spectral"] = {
                "method": "bisection on the Perron root of the level-truncated matrix",
                "sequence": [e.to_json() for e in seq],
                "final": s_C,
                "nondecreasing": all(b >= a - 1e-9 for a, b in zip(values, values[1:])),
                "diagram_closed": diag.closed,
            }
        if "limit" in cfg.stages:
            out["limit_irreducibility"] = self._limit(diag, s_C if s_C else 1.0)
        return out

    def _limit(self, diag: MarkovDiagram, s: float) -> dict:
        cfg = self.cfg
        doc: dict = {"note": "truncated diagnostics only; limit-irreducibility is not certified"}
        Z1 = self.Z0
        if self.rep.has_cross:
            rho_min = self.F.min_abs_slope
            Z1, cuts = refine_for_cross_overlaps(
                self.Z0, self.rep.intersecting, cfg.cross_depth, rho_min, self.branches
            )
            doc["cross_cuts"] = [c.to_json() for c in cuts]
        rep1 = classify_overlaps(Z1, self.branches)
        Z2, eps = refine_for_light_overlaps(Z1, rep1, self.branches, skip_cross=True)
        doc["light_epsilons"] = [
            {"cell": Z1.cells[i].to_json(), "epsilon": format_rational(e)} for i, e in sorted(eps.items())
        ]
        doc["refined_cells"] = len(Z2.cells)
        rep2 = classify_overlaps(Z2, self.branches)
        refined = build_diagram(Z2, self.branches, cfg.max_level, cfg.max_vertices, rep2.intersecting)
        doc["refined_diagram"] = diagram_summary(refined)
        dom = dominate_cross_overlaps(refined, rep2)
        doc["domination"] = dom.to_json()
        doc["dominated_diagram"] = diagram_summary(dom.diagram)
        doc["order_K"] = rep2.order
        doc["tail_s"] = s
        top = dom.diagram.top_level
        levels = _sample_levels(max(top - 1, -1), 8)
        trend = tail_trend(dom.diagram, levels, cfg.tail_horizon, s)
        doc["tail"] = [
            dict(t.to_json(), path_count_bound=t.path_count_bound(max(rep2.order, 1))) for t in trend
        ]
        if not trend:
            doc["tail_note"] = "no vertices above the lowest level; the diagram is finite"
        return doc

    def direct(self) -> dict:
        cfg = self.cfg
        levels = cylinder_levels(self.F, cfg.n_max, self.I, cfg.budget)
        est = natural_dimension_direct(self.F, cfg.n_max, cfg.tol, self.I, cfg.budget, levels=levels)
        grid = cfg.s_grid if cfg.s_grid is not None else default_s_grid()
        curve = direct_pressure(self.F, grid, cfg.n_max, self.I, cfg.budget, levels=levels)
        return {"direct": dict(est.to_json(), pressure_curve=curve.to_json())}

    def box(self) -> dict:
        cfg = self.cfg
        eps = cfg.eps if cfg.eps is not None else default_eps(self.I)
        return {"box": box_dimension_estimate(self.F, eps, self.I, cfg.budget).to_json()}

    def esc(self) -> dict:
        S = generated_self_similar(self.branches)
        verdict = esc_scan(S, self.cfg.esc_depth, self.cfg.budget)
        return {"esc": dict(verdict.to_json(), system=S.to_json())}

    def regularity(self) -> dict:
        cert = regularity_certificate(self.F, self.cfg.regularity_depth, self.I, self.cfg.budget)
        return {"regularity": cert.to_json()}

    def core(self) -> dict:
        cfg = self.cfg
        crit = critical_points(self.F, self.I, self.branches)
        Z0 = monotonicity_partition(self.F, self.I, crit)
        core = irreducible_core(
            self.F, Z0, self.branches, self.I, cfg.core_depth, cfg.max_vertices, cfg.budget
        )
        pts = chaos_game_sample(self.F, cfg.chaos_count, cfg.seed)
        ivs = [v.interval for v in core.diagram.vertices]
        tol = CHAOS_TOLERANCE * float(self.I.length)
        outside = sum(
            1 for x in pts if not any(float(iv.lo) - tol <= x <= float(iv.hi) + tol for iv in ivs)
        )
        doc = core.to_json()
        doc["sample_check"] = {"count": len(pts), "seed": cfg.seed, "outside": outside, "tolerance": tol}
        return {"core": doc}


def _guard(stage: str, fn: Callable[[], dict]) -> tuple[dict, list[dict]]:
    try:
        return fn(), []
    except errors.CplifsError as exc:
        log.warning("stage %s failed: %s", stage, exc)
        return {}, [dict(exc.as_dict(), stage=stage)]


def dimension_report(F, config: RunConfig | dict | None = None) -> dict:
    """Run every configured stage and collect the results in one document."""
    try:
        cfg = config if isinstance(config, RunConfig) else RunConfig.from_dict(config or {})
    except errors.CplifsError as exc:
        return error_document(exc, "config")
    try:
        F = validate_system(F)
    except errors.CplifsError as exc:
        return error_document(exc, "input")
    doc: dict = {
        "schema": REPORT_SCHEMA_ID,
        "system": F.to_json(),
        "config": cfg.to_json(),
        "smallness": is_small(F).to_json(),
    }
    try:
        run = _Run(F, cfg)
    except errors.CplifsError as exc:
        doc.update(interval=None, headline=_headline(doc), checks={}, errors=[dict(exc.as_dict(), stage="interval")])
        return doc
    doc["interval"] = run.I.to_json()

    tasks: list[tuple[str, Callable[[], dict]]] = []
    if {"partition", "diagram", "spectral", "limit"} & set(cfg.stages):
        tasks.append(("geometry", run.geometry))
    for name in ("direct", "box", "esc", "regularity", "core"):
        if name in cfg.stages:
            tasks.append((name, getattr(run, name)))
    if cfg.threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [pool.submit(_guard, name, fn) for name, fn in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_guard(name, fn) for name, fn in tasks]

    errs: list[dict] = []
    for sections, stage_errors in results:
        doc.update(sections)
        errs.extend(stage_errors)
    order = ["schema", "system", "config", "interval", "smallness", "partition", "diagram", "spectral",
             "direct", "box", "esc", "regularity", "core", "limit_irreducibility"]
    doc = {k: doc[k] for k in order if k in doc}
    doc["checks"] = _checks(doc)
    doc["headline"] = _headline(doc)
    doc["errors"] = errs
    return doc


def _get(doc: dict, *path):
    for key in path:
        if not isinstance(doc, dict) or key not in doc:
            return None
        doc = doc[key]
    return doc


def _checks(doc: dict) -> dict:
    s_C = _get(doc, "spectral", "final")
    s_F = _get(doc, "direct", "value")
    band = _get(doc, "direct", "band") or 0.0
    box = _get(doc, "box", "slope")
    out = {
        "lower_sequence_nondecreasing": _get(doc, "spectral", "nondecreasing"),
        "diagram_below_direct": None if s_C is None or s_F is None else s_C <= s_F + band + DIRECT_SLACK,
        "box_below_min_one_s_F": None if box is None or s_F is None else box <= min(1.0, s_F) + BOX_SLACK,
        "core_covers_sample": None,
    }
    outside = _get(doc, "core", "sample_check", "outside")
    if outside is not None:
        out["core_covers_sample"] = outside == 0
    return out


def _headline(doc: dict) -> dict:
    s_F = _get(doc, "direct", "value")
    return {
        "s_C": _get(doc, "spectral", "final"),
        "s_F": s_F,
        "s_F_band": _get(doc, "direct", "band"),
        "min_one_s_F": None if s_F is None else min(1.0, s_F),
        "box_slope": _get(doc, "box", "slope"),
    }


def has_headline(doc: dict) -> bool:
    h = doc.get("headline") or {}
    return any(h.get(k) is not None for k in ("s_C", "s_F", "box_slope"))

