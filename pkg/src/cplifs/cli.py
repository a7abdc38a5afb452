"""Command-line front end.

Exit codes: 0 success, 1 a computation failed (for example a budget was
exceeded), 2 the input or configuration is invalid, 3 ``analyze`` produced
no headline estimate at all.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from fractions import Fraction

import jsonschema

from . import errors
from .config import STAGES, RunConfig
from .diagram import build_diagram
from .esc import esc_scan
from .model import (
    Cplifs,
    SelfSimilarSystem,
    branches_of,
    generated_self_similar,
    invariant_interval,
    load_system,
)
from .oracle import (
    box_dimension_estimate,
    cylinder_levels,
    default_eps,
    default_s_grid,
    direct_pressure,
    natural_dimension_direct,
)
from .partition import critical_points, monotonicity_partition
from .rational import Interval, parse_rational
from .report import REPORT_SCHEMA, dimension_report, dumps_document, has_headline

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_NO_ESTIMATE = 0, 1, 2, 3

_obj = {"type": "object"}
DOCUMENT_SCHEMAS = {
    "cplifs-report/1": REPORT_SCHEMA,
    "cplifs-errors/1": {
        "type": "object",
        "required": ["schema", "errors"],
        "properties": {"errors": {"type": "array", "minItems": 1, "items": {"type": "object", "required": ["code", "message"]}}},
    },
    "cplifs-diagram/1": {"type": "object", "required": ["schema", "system", "interval", "diagram"], "properties": {"diagram": _obj}},
    "cplifs-esc/1": {"type": "object", "required": ["schema", "system", "verdict"], "properties": {"verdict": _obj}},
    "cplifs-pressure/1": {"type": "object", "required": ["schema", "curve"], "properties": {"curve": _obj}},
    "cplifs-boxdim/1": {"type": "object", "required": ["schema", "series"], "properties": {"series": _obj}},
}


def validate_document(doc: dict) -> None:
    """Check an emitted document against the schema named in its ``schema`` field."""
    name = doc.get("schema")
    if name not in DOCUMENT_SCHEMAS:
        raise jsonschema.ValidationError(f"unknown schema {name!r}")
    jsonschema.validate(doc, DOCUMENT_SCHEMAS[name])


def _errors_doc(exc: errors.CplifsError, stage: str) -> dict:
    return {"schema": "cplifs-errors/1", "errors": [dict(exc.as_dict(), stage=stage)]}


# -- argument parsing ------------------------------------------------------------


def parse_s_grid(text: str) -> tuple[float, ...]:
    """``"a:b:step"`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(round((b - a) / step))
            return tuple(a + i * step for i in range(n + 1))
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise errors.ConfigError(f"bad s-grid {text!r}; use a:b:step or a comma list") from None


def parse_eps(text: str, I: Interval | None = None) -> tuple[Fraction, ...]:
    """Comma list of rationals, or ``"geom:B:K1:K2"`` for ``|I| * B**-k``, ``K1 <= k <= K2``."""
    if text.startswith("geom:"):
        try:
            _, base, k1, k2 = text.split(":")
            base, k1, k2 = parse_rational(base, "eps"), int(k1), int(k2)
        except ValueError:
            raise errors.ConfigError(f"malformed eps list {text!r}") from None
        if base <= 1 or k2 < k1:
            raise errors.ConfigError(f"malformed eps list {text!r}")
        length = I.length if I is not None and not I.degenerate else Fraction(1)
        return tuple(length / base ** k for k in range(k1, k2 + 1))
    return tuple(parse_rational(x, "eps") for x in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cplifs", description="Dimension of continuous piecewise-linear IFS attractors.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats=("json",)):
        sp.add_argument("path", help="system description (JSON)")
        sp.add_argument("--out", help="write output here instead of stdout")
        sp.add_argument("--format", choices=formats, default=formats[0])
        sp.add_argument("--config", help="JSON run configuration; flags override it")
        sp.add_argument("--max-level", type=int)
        sp.add_argument("--max-vertices", type=int)
        sp.add_argument("--nmax", type=int, dest="n_max")
        sp.add_argument("--esc-depth", type=int)
        sp.add_argument("--eps", help="box sizes: comma list of rationals or geom:B:K1:K2")
        sp.add_argument("--s-grid", help="s values: a:b:step or comma list")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--budget", type=int)

    v = sub.add_parser("validate", help="check a system file and echo its canonical form")
    v.add_argument("path")
    v.add_argument("--out")

    a = sub.add_parser("analyze", help="full dimension report")
    common(a)
    a.add_argument("--stages", help=f"comma list from {','.join(STAGES)}")

    common(sub.add_parser("diagram", help="Markov diagram on the monotonicity partition"), ("json", "dot", "csv"))
    common(sub.add_parser("esc", help="separation scan of the generated self-similar system"), ("json", "csv"))
    pr = sub.add_parser("pressure", help="direct natural pressure")
    common(pr, ("json", "csv"))
    pr.add_argument("--s", dest="s_values", help="alias for --s-grid with a comma list")
    common(sub.add_parser("boxdim", help="box-counting dimension from the cylinder cover"), ("json", "csv"))
    return p


def config_from_args(args, I: Interval | None = None) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    grid_text = getattr(args, "s_values", None) or args.s_grid
    changes = dict(
        max_level=args.max_level,
        max_vertices=args.max_vertices,
        n_max=args.n_max,
        esc_depth=args.esc_depth,
        tol=args.tol,
        seed=args.seed,
        threads=args.threads,
        budget=args.budget,
        eps=parse_eps(args.eps, I) if args.eps else None,
        s_grid=parse_s_grid(grid_text) if grid_text else None,
    )
    if getattr(args, "stages", None):
        changes["stages"] = tuple(s.strip() for s in args.stages.split(","))
    try:
        return cfg.updated(**changes)
    except TypeError as exc:
        raise errors.ConfigError(str(exc)) from None


# -- output helpers --------------------------------------------------------------------


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_doc(doc: dict, out: str | None) -> None:
    validate_document(doc)
    _emit(dumps_document(doc), out)


def _load(path: str) -> Cplifs:
    try:
        return load_system(path)
    except OSError as exc:
        raise errors.ParseError(f"cannot read {path}: {exc.strerror}", path=path) from None


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _safe_interval(F: Cplifs) -> Interval | None:
    try:
        return invariant_interval(F)
    except errors.CplifsError:
        return None


def _generated_system(F: Cplifs) -> SelfSimilarSystem:
    """Generated self-similar system; with a one-point invariant interval every piece is used."""
    try:
        return generated_self_similar(branches_of(F, invariant_interval(F)))
    except errors.DegenerateInterval:
        pieces = [
            ((k, i + 1), r, t)
            for k, f in enumerate(F.maps, start=1)
            for i, (r, t) in enumerate(zip(f.slopes, f.offsets))
        ]
        return SelfSimilarSystem(
            tuple(r for _, r, _ in pieces), tuple(t for _, _, t in pieces), tuple(lab for lab, _, _ in pieces)
        )


# -- commands ------------------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        F = _load(args.path)
    except errors.ValidationError as exc:
        _emit_doc(_errors_doc(exc, "validate"), args.out)
        return EXIT_INVALID
    _emit(F.dumps() + "\n", args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        F = _load(args.path)
        cfg = config_from_args(args, _safe_interval(F))
    except errors.ValidationError as exc:
        _emit_doc(dict(_errors_doc(exc, "input"), schema="cplifs-report/1"), args.out)
        return EXIT_INVALID
    doc = dimension_report(F, cfg)
    _emit_doc(doc, args.out)
    return EXIT_OK if has_headline(doc) else EXIT_NO_ESTIMATE


def cmd_diagram(args) -> int:
    F = _load(args.path)
    cfg = config_from_args(args)
    I = invariant_interval(F)
    br = branches_of(F, I)
    crit = critical_points(F, I, br)
    diag = build_diagram(monotonicity_partition(F, I, crit), br, cfg.max_level, cfg.max_vertices, crit.intersecting)
    if args.format == "dot":
        _emit(diag.to_dot(), args.out)
    elif args.format == "csv":
        rows = [["source", "target", "map", "piece"]]
        rows += [[e.source, e.target, e.label[0], e.label[1]] for e in diag.edges]
        _emit(_csv(rows), args.out)
    else:
        _emit_doc(
            {"schema": "cplifs-diagram/1", "system": F.to_json(), "interval": I.to_json(), "diagram": diag.to_json()},
            args.out,
        )
    return EXIT_OK


def cmd_esc(args) -> int:
    F = _load(args.path)
    cfg = config_from_args(args)
    S = _generated_system(F)
    verdict = esc_scan(S, cfg.esc_depth, cfg.budget)
    doc = verdict.to_json()
    if args.format == "csv":
        rows = [["n", "d_n", "e_n"]] + [[n, d, "" if e is None else repr(e)] for n, d, e in zip(doc["depths"], doc["d_n"], doc["e_n"])]
        _emit(_csv(rows), args.out)
    else:
        _emit_doc({"schema": "cplifs-esc/1", "system": S.to_json(), "verdict": doc}, args.out)
    return EXIT_OK


def cmd_pressure(args) -> int:
    F = _load(args.path)
    cfg = config_from_args(args)
    I = invariant_interval(F)
    levels = cylinder_levels(F, cfg.n_max, I, cfg.budget)
    grid = cfg.s_grid if cfg.s_grid is not None else default_s_grid()
    curve = direct_pressure(F, grid, cfg.n_max, I, cfg.budget, levels=levels)
    if args.format == "csv":
        _emit(curve.to_csv(), args.out)
    else:
        est = natural_dimension_direct(F, cfg.n_max, cfg.tol, I, cfg.budget, levels=levels)
        _emit_doc({"schema": "cplifs-pressure/1", "curve": curve.to_json(), "natural_dimension": est.to_json()}, args.out)
    return EXIT_OK


def cmd_boxdim(args) -> int:
    F = _load(args.path)
    I = _safe_interval(F)
    cfg = config_from_args(args, I)
    eps = cfg.eps if cfg.eps is not None else default_eps(I if I is not None else Interval(0, 1))
    series = box_dimension_estimate(F, eps, I, cfg.budget)
    if args.format == "csv":
        _emit(series.to_csv(), args.out)
    else:
        _emit_doc({"schema": "cplifs-boxdim/1", "series": series.to_json()}, args.out)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "diagram": cmd_diagram,
    "esc": cmd_esc,
    "pressure": cmd_pressure,
    "boxdim": cmd_boxdim,
}


def _configure_logging() -> None:
    level = os.environ.get("CPLIFS_LOG", "WARNING").upper()
    logging.basicConfig(
        level=int(level) if level.isdigit() else getattr(logging, level, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except errors.ValidationError as exc:
        _emit_doc(_errors_doc(exc, args.command), getattr(args, "out", None))
        return EXIT_INVALID
    except errors.CplifsError as exc:
        _emit_doc(_errors_doc(exc, args.command), getattr(args, "out", None))
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
