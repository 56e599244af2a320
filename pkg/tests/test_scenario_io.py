import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scenarios import random_scenario, s2
from qaecon.economics import evaluate_scenario
from qaecon.errors import DomainError, ScenarioParseError
from qaecon.scenario_io import dump_scenario, load_scenario, parse_scenario_text, scenario_from_dict

GOLDEN = Path(__file__).parent / "golden"


def test_golden_s2_file_loads():
    sc = load_scenario(GOLDEN / "s2.json")
    assert sc == s2()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dump_load_round_trip(tmp_path_factory, seed):
    sc = random_scenario(np.random.default_rng(seed))
    path = tmp_path_factory.mktemp("io") / "sc.json"
    dump_scenario(sc, path)
    back = load_scenario(path)
    assert back == sc


def test_json_syntax_error_position():
    with pytest.raises(ScenarioParseError, match=r"line 2, column"):
        parse_scenario_text('{\n  "faults": [,]\n}')


def test_schema_error_reports_path():
    doc = json.loads((GOLDEN / "s2.json").read_text())
    doc["faults"][1]["pi"] = "high"
    with pytest.raises(ScenarioParseError, match=r"\$\.faults\[1\]\.pi"):
        scenario_from_dict(doc)


def test_both_or_neither_fault_lists_rejected():
    with pytest.raises(ScenarioParseError, match="exactly one"):
        scenario_from_dict({"applications": []})
    with pytest.raises(ScenarioParseError, match="exactly one"):
        scenario_from_dict({"applications": [], "faults": [], "defect_types": []})


def test_bad_curve_reported_with_location():
    doc = json.loads((GOLDEN / "s2.json").read_text())
    doc["applications"][0]["difficulty"]["j"] = {"form": "linear", "theta0": 0.2, "floor": 0.5}
    with pytest.raises(ScenarioParseError, match=r"applications\[0\]\.difficulty\.j"):
        scenario_from_dict(doc)


def test_unknown_keys_rejected():
    doc = json.loads((GOLDEN / "s2.json").read_text())
    doc["applications"][0]["colour"] = "red"
    with pytest.raises(ScenarioParseError):
        scenario_from_dict(doc)


def test_missing_file():
    with pytest.raises(ScenarioParseError, match="cannot read"):
        load_scenario("/nonexistent/scenario.json")


def _practical_doc():
    return {
        "defect_types": [
            {"name": "logic", "doc_class": "code", "expected_count": 10, "pi": 0.5,
             "v_field": 6, "f_effect": 4, "removal_cost": {"a": 2},
             "difficulty": {"a": {"form": "linear", "theta0": 0.8, "rate": 0.1}}},
        ],
        "applications": [{"id": "a", "setup_cost": 1, "exec_rate": 2, "effort": 3}],
    }


def test_practical_document():
    b = evaluate_scenario(scenario_from_dict(_practical_doc()))
    assert (b.direct, b.future, b.revenue) == pytest.approx((17, 25, 25))


def test_practical_rejects_per_application_maps():
    doc = _practical_doc()
    doc["applications"][0]["removal_cost"] = {"logic": 1}
    with pytest.raises(ScenarioParseError, match="not allowed"):
        scenario_from_dict(doc)


def test_practical_rejects_exponential_curves():
    doc = _practical_doc()
    doc["defect_types"][0]["difficulty"]["a"]["form"] = "exponential"
    with pytest.raises(DomainError):
        scenario_from_dict(doc)
