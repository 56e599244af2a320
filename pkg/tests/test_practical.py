import math

import pytest
from hypothesis import given, strategies as st

from qaecon.economics import evaluate_scenario
from qaecon.errors import DomainError, UnknownIdError
from qaecon.model import DifficultyCurve
from qaecon.practical import (
    DefectType,
    PracticalScenario,
    TechniqueDescriptor,
    difficulty_from_effectiveness,
    effectiveness_from_difficulty,
    expand_to_scenario,
)

L = DifficultyCurve.linear


def _two_types():
    types = [
        DefectType("logic", "code", 12, 0.3, v_field=20, f_effect=40,
                   removal_cost={"insp": 1.0, "test": 5.0},
                   difficulty={"insp": L(0.7, 0.02, 0.4), "test": L(0.5, 0.05, 0.1)}),
        DefectType("ui", "code", 30, 0.1, v_field=4, f_effect=2,
                   removal_cost={"test": 0.5}, difficulty={"test": DifficultyCurve.constant(0.6)}),
    ]
    apps = [TechniqueDescriptor("insp", 3, 1, 10), TechniqueDescriptor("test", 5, 1, 4)]
    return PracticalScenario(types, apps)


def _hand_terms(p: PracticalScenario):
    """Type-level formulas written out directly: no propagation, so a type is
    found by technique x with probability prod_{y<x} theta_y * (1 - theta_x)."""
    d = sum(a.setup_cost + a.exec_rate * a.effort for a in p.applications)
    o = r = 0.0
    for t in p.types:
        miss = 1.0
        for a in p.applications:
            theta = t.difficulty[a.id](a.effort) if a.id in t.difficulty else 1.0
            found = miss * (1 - theta)
            d += t.expected_count * found * t.removal_cost.get(a.id, 0.0)
            r += t.expected_count * found * t.pi * (t.v_field + t.f_effect)
            miss *= theta
        o += t.expected_count * miss * t.pi * (t.v_field + t.f_effect)
    return d, o, r


def test_expansion_matches_type_level_formulas():
    p = _two_types()
    b = evaluate_scenario(expand_to_scenario(p))
    d, o, r = _hand_terms(p)
    assert (b.direct, b.future, b.revenue) == pytest.approx((d, o, r), rel=1e-12)


def test_single_type_single_technique_by_hand():
    p = PracticalScenario(
        [DefectType("t", "code", 10, 0.5, v_field=6, f_effect=4, removal_cost={"a": 2},
                    difficulty={"a": L(0.8, 0.1)})],
        [TechniqueDescriptor("a", 1, 2, 3)],
    )
    b = evaluate_scenario(expand_to_scenario(p))
    # theta = 0.8 - 0.3 = 0.5
    assert b.direct == pytest.approx(1 + 6 + 10 * 0.5 * 2)
    assert b.future == pytest.approx(10 * 0.5 * 0.5 * 10)
    assert b.revenue == pytest.approx(10 * 0.5 * 0.5 * 10)


@given(st.floats(0.5, 50))
def test_costs_scale_linearly_with_counts(k):
    p = _two_types()
    scaled = PracticalScenario(
        [DefectType(t.name, t.doc_class, t.expected_count * k, t.pi, t.v_field, t.f_effect,
                    t.removal_cost, t.difficulty) for t in p.types],
        p.applications,
    )
    fixed = sum(a.setup_cost + a.exec_rate * a.effort for a in p.applications)
    a, b = evaluate_scenario(expand_to_scenario(p)), evaluate_scenario(expand_to_scenario(scaled))
    assert b.direct - fixed == pytest.approx(k * (a.direct - fixed), rel=1e-9)
    assert b.future == pytest.approx(k * a.future, rel=1e-9)
    assert b.revenue == pytest.approx(k * a.revenue, rel=1e-9)


def test_exponential_curves_rejected():
    with pytest.raises(DomainError):
        DefectType("x", "code", 1, 0.1, difficulty={"a": DifficultyCurve.exponential(0.5, 0.1)})


@pytest.mark.parametrize("kwargs", [{"expected_count": -1, "pi": 0.1}, {"expected_count": 1, "pi": 1.5}])
def test_bad_type_values_rejected(kwargs):
    with pytest.raises(DomainError):
        DefectType("x", "code", **kwargs)


def test_unknown_technique_reference():
    p = PracticalScenario([DefectType("x", "code", 1, 0.1, removal_cost={"ghost": 1})],
                          [TechniqueDescriptor("a")])
    with pytest.raises(UnknownIdError):
        expand_to_scenario(p)


def test_effectiveness_conversions():
    assert difficulty_from_effectiveness(0.55) == pytest.approx(0.45)
    with pytest.raises(DomainError):
        difficulty_from_effectiveness(1.2)
    assert effectiveness_from_difficulty([0.2, 0.6], [0.5, 0.5]) == pytest.approx(0.6)
    with pytest.raises(DomainError):
        effectiveness_from_difficulty([0.2, 0.6], [0.5, 0.6])


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0.01, 1)), min_size=1, max_size=8))
def test_effectiveness_is_one_minus_weighted_difficulty(pairs):
    thetas = [p[0] for p in pairs]
    total = math.fsum(p[1] for p in pairs)
    weights = [p[1] / total for p in pairs]
    if not math.isclose(math.fsum(weights), 1.0, abs_tol=1e-9):
        return
    e = effectiveness_from_difficulty(thetas, weights)
    assert min(1 - t for t in thetas) - 1e-12 <= e <= max(1 - t for t in thetas) + 1e-12
