import json
import math

import pytest

from cplifs import errors
from cplifs.config import STAGES, RunConfig
from cplifs.report import dimension_report, dumps_document, has_headline, validate_report

from systems import SYS_A, SYS_D, SYS_X

LOG23 = math.log(2) / math.log(3)
FAST = {"threads": 1, "n_max": 8, "chaos_count": 2000, "eps": ["1/16", "1/32", "1/64", "1/128"]}


def test_cantor_report():
    doc = dimension_report(SYS_A, dict(FAST, eps=["1/81", "1/243", "1/729"]))
    validate_report(doc)
    h = doc["headline"]
    assert abs(h["s_C"] - LOG23) < 1e-9 and abs(h["s_F"] - LOG23) < 1e-9
    assert abs(h["box_slope"] - 0.631) < 0.01
    assert h["min_one_s_F"] == h["s_F"]
    assert doc["esc"]["verdict"] == "SeparationEvidence"
    assert doc["regularity"]["verdict"] == "Regular"
    assert all(doc["checks"].values())
    assert doc["errors"] == []


def test_tent_report():
    doc = dimension_report(SYS_D, dict(FAST, max_level=4))
    validate_report(doc)
    assert doc["diagram"]["closed"] and doc["diagram"]["top_level"] == 0
    assert abs(doc["headline"]["s_C"] - 1) < 1e-9
    assert abs(doc["headline"]["s_F"] - 1) < 1e-6
    assert doc["regularity"]["verdict"] == "Unknown"
    assert doc["esc"]["verdict"] == "ExactOverlap"
    assert doc["core"]["strongly_connected"] and doc["core"]["sample_check"]["outside"] == 0


def test_stage_errors_do_not_abort_others():
    doc = dimension_report(SYS_D, dict(FAST, budget=10))
    validate_report(doc)
    failed = {e["stage"] for e in doc["errors"]}
    assert "direct" in failed and all(e["code"] == "BudgetExceeded" for e in doc["errors"])
    assert has_headline(doc) and doc["headline"]["s_C"] is not None


def test_stage_selection():
    doc = dimension_report(SYS_A, dict(FAST, stages=["esc"]))
    validate_report(doc)
    assert "esc" in doc and "diagram" not in doc and "direct" not in doc
    assert not has_headline(doc)


def test_cross_system_report_has_domination_and_limit_diagnostics():
    doc = dimension_report(SYS_X, dict(FAST, stages=["partition", "diagram", "spectral", "limit"], max_vertices=300))
    validate_report(doc)
    assert doc["partition"]["overlaps"]["order_K"] == 2
    limit = doc["limit_irreducibility"]
    assert [c["intersecting_point"] for c in limit["cross_cuts"]] == ["1/4", "1/4"]
    assert limit["domination"]["removed_edges"] > 0
    assert limit["refined_diagram"]["parallel_edge_pairs"] == 0


def test_serialisation_is_stable():
    a = dumps_document(dimension_report(SYS_D, FAST))
    b = dumps_document(dimension_report(SYS_D, dict(FAST, threads=4)))
    assert a == b
    assert a.endswith("\n") and json.loads(a)["schema"] == "cplifs-report/1"


@pytest.mark.parametrize("bad", [
    {"max_level": 0}, {"tol": 1.5}, {"tol": 0}, {"n_max": 1}, {"bogus": 1},
    {"eps": ["0"]}, {"eps": ["1/0"]}, {"stages": ["nope"]}, {"seed": -1}, {"s_grid": [-1]},
    {"max_vertices": True},
])
def test_config_rejects(bad):
    with pytest.raises(errors.ConfigError):
        RunConfig.from_dict(bad)


def test_config_round_trip_and_thread_echo():
    cfg = RunConfig.from_dict({"stages": ["esc", "partition"], "eps": ["1/4"], "threads": 3})
    assert cfg.stages == ("partition", "esc")
    echo = cfg.to_json()
    assert "threads" not in echo and echo["eps"] == ["1/4"]
    again = RunConfig.from_dict(dict(echo, threads=1))
    assert again.to_json() == echo
    assert set(RunConfig().stages) == set(STAGES)
