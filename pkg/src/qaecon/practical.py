"""Defect-type level planning model.

Instead of individual faults the practical model works with defect types
whose expected counts come from earlier projects.  It has no propagation and
uses linear difficulty curves.  A practical scenario is evaluated by
expanding it into an ordinary :class:`~qaecon.model.Scenario` in which each
type becomes one representative fault with count-weighted costs, so the
combined cost formulas are shared rather than duplicated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import DomainError, UnknownIdError
from .model import DifficultyCurve, FaultSpec, Scenario, TechniqueApplication


@dataclass(frozen=True)
class DefectType:
    name: str
    doc_class: str
    expected_count: float
    pi: float
    v_field: float = 0.0
    f_effect: float = 0.0
    removal_cost: Mapping[str, float] = field(default_factory=dict)
    difficulty: Mapping[str, DifficultyCurve] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.expected_count >= 0 and math.isfinite(self.expected_count)):
            raise DomainError(f"{self.name}: expected_count must be >= 0")
        if not 0.0 <= self.pi <= 1.0:
            raise DomainError(f"{self.name}: pi={self.pi} outside [0, 1]")
        for tech, curve in self.difficulty.items():
            if curve.form == "exponential":
                raise DomainError(f"{self.name}: difficulty for {tech!r} must be linear or constant")
        object.__setattr__(self, "removal_cost", dict(self.removal_cost))
        object.__setattr__(self, "difficulty", dict(self.difficulty))


@dataclass(frozen=True)
class TechniqueDescriptor:
    """Type-independent part of an application; per-type numbers live on
    :class:`DefectType`."""

    id: str
    setup_cost: float = 0.0
    exec_rate: float = 0.0
    effort: float = 0.0
    applicable_classes: frozenset | None = None


@dataclass(frozen=True)
class PracticalScenario:
    types: Sequence[DefectType]
    applications: Sequence[TechniqueDescriptor]
    currency_unit: str = "staff-hours"
    effort_unit: str = "staff-hours"

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "applications", tuple(self.applications))


def expand_to_scenario(p: PracticalScenario) -> Scenario:
    """One representative fault per defect type, costs scaled by the
    expected count; detection probabilities are per fault and stay as is."""
    tech_ids = {a.id for a in p.applications}
    for t in p.types:
        for tech in list(t.difficulty) + list(t.removal_cost):
            if tech not in tech_ids:
                raise UnknownIdError(f"defect type {t.name!r} references unknown technique {tech!r}")

    faults = [
        FaultSpec(
            id=t.name,
            doc_class=t.doc_class,
            pi=t.pi,
            v_field=t.expected_count * t.v_field,
            f_effect=t.expected_count * t.f_effect,
        )
        for t in p.types
    ]
    apps = []
    for a in p.applications:
        apps.append(TechniqueApplication(
            id=a.id,
            setup_cost=a.setup_cost,
            exec_rate=a.exec_rate,
            effort=a.effort,
            difficulty={t.name: t.difficulty[a.id] for t in p.types if a.id in t.difficulty},
            removal_cost={t.name: t.expected_count * t.removal_cost[a.id]
                          for t in p.types if a.id in t.removal_cost},
            applicable_classes=a.applicable_classes,
        ))
    return Scenario(faults, apps, p.currency_unit, p.effort_unit)


def difficulty_from_effectiveness(e: float) -> float:
    """Coarse difficulty estimate: the share of defects a technique misses."""
    if not 0.0 <= e <= 1.0:
        raise DomainError(f"effectiveness {e} outside [0, 1]")
    return 1.0 - e


def effectiveness_from_difficulty(thetas: Sequence[float], weights: Sequence[float]) -> float:
    """1 minus the presence-weighted mean difficulty."""
    if len(thetas) != len(weights):
        raise DomainError("thetas and weights differ in length")
    if any(w < 0 for w in weights):
        raise DomainError("weights must be non-negative")
    if not math.isclose(math.fsum(weights), 1.0, rel_tol=0, abs_tol=1e-9):
        raise DomainError("weights must sum to 1")
    if any(not 0.0 <= th <= 1.0 for th in thetas):
        raise DomainError("difficulties must lie in [0, 1]")
    return 1.0 - math.fsum(w * th for w, th in zip(weights, thetas))
