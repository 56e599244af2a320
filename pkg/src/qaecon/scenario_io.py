"""JSON scenario files.

A file holds either individual ``faults`` or ``defect_types`` (practical
model), never both, plus the ordered ``applications`` and optional
``units``::

    {
      "units": {"currency": "staff-hours", "effort": "staff-hours"},
      "faults": [
        {"id": "i", "doc_class": "code", "pi": 0.2, "v_field": 30,
         "f_effect": 20, "predecessors": ["j"]},
        {"id": "j", "doc_class": "requirements", "pi": 0.0}
      ],
      "applications": [
        {"id": "insp", "setup_cost": 1, "exec_rate": 1, "effort": 1,
         "difficulty": {"i": 1.0, "j": 0.4}, "removal_cost": {"j": 2}},
        {"id": "test", "setup_cost": 2, "exec_rate": 1, "effort": 1,
         "difficulty": {"i": {"form": "linear", "theta0": 0.5, "rate": 0.2}},
         "removal_cost": {"i": 4}, "applicable_classes": ["code"]}
      ]
    }

A bare number as difficulty is shorthand for a constant curve.  With
``defect_types`` the per-type ``difficulty`` and ``removal_cost`` maps are
keyed by application id and applications carry neither.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .errors import DomainError, ScenarioParseError
from .model import DifficultyCurve, FaultSpec, Scenario, TechniqueApplication
from .practical import DefectType, PracticalScenario, TechniqueDescriptor, expand_to_scenario

_NUM = {"type": "number"}
_ID = {"type": "string"}
_CURVE = {
    "oneOf": [
        {"type": "number"},
        {
            "type": "object",
            "properties": {
                "form": {"enum": ["constant", "linear", "exponential"]},
                "theta0": _NUM,
                "floor": _NUM,
                "rate": _NUM,
            },
            "required": ["form", "theta0"],
            "additionalProperties": False,
        },
    ]
}
_COST_MAP = {"type": "object", "additionalProperties": _NUM}
_CURVE_MAP = {"type": "object", "additionalProperties": _CURVE}
_CLASSES = {"type": "array", "items": _ID}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "units": {
            "type": "object",
            "properties": {"currency": _ID, "effort": _ID},
            "additionalProperties": False,
        },
        "faults": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": _ID,
                    "doc_class": _ID,
                    "pi": _NUM,
                    "v_field": _NUM,
                    "f_effect": _NUM,
                    "predecessors": {"type": "array", "items": _ID},
                },
                "required": ["id", "doc_class", "pi"],
                "additionalProperties": False,
            },
        },
        "defect_types": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": _ID,
                    "doc_class": _ID,
                    "expected_count": _NUM,
                    "pi": _NUM,
                    "v_field": _NUM,
                    "f_effect": _NUM,
                    "removal_cost": _COST_MAP,
                    "difficulty": _CURVE_MAP,
                },
                "required": ["name", "doc_class", "expected_count", "pi"],
                "additionalProperties": False,
            },
        },
        "applications": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "id": _ID,
                    "setup_cost": _NUM,
                    "exec_rate": _NUM,
                    "effort": _NUM,
                    "difficulty": _CURVE_MAP,
                    "removal_cost": _COST_MAP,
                    "applicable_classes": _CLASSES,
                },
                "required": ["id"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["applications"],
    "oneOf": [{"required": ["faults"]}, {"required": ["defect_types"]}],
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _location(path) -> str:
    out = "$"
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def _curve(value, where: str) -> DifficultyCurve:
    try:
        if isinstance(value, (int, float)):
            return DifficultyCurve.constant(float(value))
        return DifficultyCurve(value["form"], float(value["theta0"]),
                               float(value.get("floor", 0.0)), float(value.get("rate", 0.0)))
    except DomainError as exc:
        raise ScenarioParseError(f"{where}: {exc}") from None


def _classes(app):
    classes = app.get("applicable_classes")
    return None if classes is None else frozenset(classes)


def scenario_from_dict(doc) -> Scenario:
    """Build a scenario from decoded JSON.

    Raises :class:`ScenarioParseError` on schema violations.  Range problems
    (probabilities, negative costs, cycles) are left to
    :func:`~qaecon.model.validate_scenario`, except for practical-model
    types, whose constructor checks raise :class:`DomainError`.
    """
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            if e.validator == "oneOf" and not e.absolute_path:
                lines.append("$: exactly one of 'faults' or 'defect_types' is required")
            else:
                lines.append(f"{_location(e.absolute_path)}: {e.message}")
        raise ScenarioParseError("; ".join(lines))

    units = doc.get("units", {})
    currency = units.get("currency", "staff-hours")
    effort = units.get("effort", "staff-hours")
    apps_doc = doc["applications"]

    if "faults" in doc:
        faults = [
            FaultSpec(
                id=f["id"], doc_class=f["doc_class"], pi=float(f["pi"]),
                v_field=float(f.get("v_field", 0.0)), f_effect=float(f.get("f_effect", 0.0)),
                predecessors=frozenset(f.get("predecessors", ())),
            )
            for f in doc["faults"]
        ]
        apps = [
            TechniqueApplication(
                id=a["id"],
                setup_cost=float(a.get("setup_cost", 0.0)),
                exec_rate=float(a.get("exec_rate", 0.0)),
                effort=float(a.get("effort", 0.0)),
                difficulty={fid: _curve(c, f"$.applications[{k}].difficulty.{fid}")
                            for fid, c in a.get("difficulty", {}).items()},
                removal_cost={fid: float(v) for fid, v in a.get("removal_cost", {}).items()},
                applicable_classes=_classes(a),
            )
            for k, a in enumerate(apps_doc)
        ]
        return Scenario(faults, apps, currency, effort)

    for k, a in enumerate(apps_doc):
        for key in ("difficulty", "removal_cost"):
            if key in a:
                raise ScenarioParseError(
                    f"$.applications[{k}].{key}: not allowed with defect_types; "
                    "put it on the defect type instead")
    types = [
        DefectType(
            name=t["name"], doc_class=t["doc_class"], expected_count=float(t["expected_count"]),
            pi=float(t["pi"]), v_field=float(t.get("v_field", 0.0)), f_effect=float(t.get("f_effect", 0.0)),
            removal_cost={a: float(v) for a, v in t.get("removal_cost", {}).items()},
            difficulty={a: _curve(c, f"$.defect_types[{k}].difficulty.{a}")
                        for a, c in t.get("difficulty", {}).items()},
        )
        for k, t in enumerate(doc["defect_types"])
    ]
    descriptors = [
        TechniqueDescriptor(
            id=a["id"], setup_cost=float(a.get("setup_cost", 0.0)), exec_rate=float(a.get("exec_rate", 0.0)),
            effort=float(a.get("effort", 0.0)), applicable_classes=_classes(a),
        )
        for a in apps_doc
    ]
    return expand_to_scenario(PracticalScenario(types, descriptors, currency, effort))


def parse_scenario_text(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario_text(text)


def _curve_to_json(curve: DifficultyCurve):
    if curve.form == "constant":
        return curve.theta0
    return {"form": curve.form, "theta0": curve.theta0, "floor": curve.floor, "rate": curve.rate}


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of :func:`scenario_from_dict` for fault-level scenarios."""
    apps = []
    for a in scenario.applications:
        entry = {
            "id": a.id,
            "setup_cost": a.setup_cost,
            "exec_rate": a.exec_rate,
            "effort": a.effort,
            "difficulty": {fid: _curve_to_json(c) for fid, c in a.difficulty.items()},
            "removal_cost": dict(a.removal_cost),
        }
        if a.applicable_classes is not None:
            entry["applicable_classes"] = sorted(a.applicable_classes)
        apps.append(entry)
    return {
        "units": {"currency": scenario.currency_unit, "effort": scenario.effort_unit},
        "faults": [
            {"id": f.id, "doc_class": f.doc_class, "pi": f.pi, "v_field": f.v_field,
             "f_effect": f.f_effect, "predecessors": sorted(f.predecessors)}
            for f in scenario.faults
        ],
        "applications": apps,
    }


def dump_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n", encoding="utf-8")
