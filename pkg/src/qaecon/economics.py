"""Expected direct costs, future costs, revenues and ROI of a QA plan.

Direct costs are what an application costs while it runs: setup, execution
and the removal of whatever it finds.  Future costs are the field removal and
failure effect costs of faults that escape.  Revenues are the field costs
avoided by finding faults in-house.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError, UndefinedROIError
from .model import (
    FaultEventProbabilities,
    FaultSpec,
    Scenario,
    TechniqueApplication,
    all_fault_event_probabilities,
    difficulty_matrix,
    event_arrays,
    predecessor_indices,
    require_valid,
)


@dataclass(frozen=True)
class CostBreakdown:
    direct: float
    future: float
    revenue: float
    roi: float | None  # None when direct + future == 0
    per_fault: tuple[FaultEventProbabilities, ...] = ()

    @property
    def net_benefit(self) -> float:
        return self.revenue - self.direct - self.future


# -- single application ----------------------------------------------------

def direct_cost_single(app: TechniqueApplication, faults: Iterable[FaultSpec]) -> float:
    total = app.setup_cost + app.exec_rate * app.effort
    for f in faults:
        total += (1.0 - app.difficulty_of(f)) * app.removal_cost.get(f.id, 0.0)
    return total


def future_cost_single(app: TechniqueApplication, faults: Iterable[FaultSpec]) -> float:
    return sum(f.pi * app.difficulty_of(f) * f.field_cost for f in faults)


def revenue_single(app: TechniqueApplication, faults: Iterable[FaultSpec]) -> float:
    return sum(f.pi * (1.0 - app.difficulty_of(f)) * f.field_cost for f in faults)


# -- ordered combination ---------------------------------------------------

def _cost_arrays(scenario: Scenario):
    apps, faults = scenario.applications, scenario.faults
    removal = np.array([[a.removal_cost.get(f.id, 0.0) for f in faults] for a in apps], dtype=float)
    removal = removal.reshape(len(apps), len(faults))
    setup = np.array([a.setup_cost for a in apps], dtype=float)
    rate = np.array([a.exec_rate for a in apps], dtype=float)
    pi = np.array([f.pi for f in faults], dtype=float)
    field = np.array([f.field_cost for f in faults], dtype=float)
    return setup, rate, removal, pi, field


def combined_terms(scenario: Scenario, efforts=None):
    """Direct, future and revenue arrays for one or many effort allocations.

    ``efforts`` has shape ``(..., n_apps)``; the result arrays have the
    leading shape.  This is the single formula path behind every combined
    quantity in the package.
    """
    t = scenario.efforts if efforts is None else np.asarray(efforts, dtype=float)
    theta = difficulty_matrix(scenario, t)
    _, p_det, _, p_esc = event_arrays(theta, predecessor_indices(scenario))
    setup, rate, removal, pi, field = _cost_arrays(scenario)
    weight = pi * field
    direct = np.sum(setup + rate * t, axis=-1) + np.sum(p_det * removal, axis=(-2, -1))
    revenue = np.sum(p_det.sum(axis=-2) * weight, axis=-1)
    future = np.sum(p_esc * weight, axis=-1)
    return direct, future, revenue


def direct_cost_combined(scenario: Scenario) -> float:
    return float(combined_terms(scenario)[0])


def future_cost_combined(scenario: Scenario) -> float:
    return float(combined_terms(scenario)[1])


def revenue_combined(scenario: Scenario) -> float:
    return float(combined_terms(scenario)[2])


def roi(direct: float, future: float, revenue: float) -> float:
    """(revenue - direct - future) / (direct + future)."""
    spent = direct + future
    if spent == 0:
        raise UndefinedROIError("ROI undefined: direct + future costs are zero")
    return (revenue - direct - future) / spent


def roi_array(direct, future, revenue):
    """Vectorised ROI; NaN where the denominator vanishes."""
    spent = np.asarray(direct + future, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (revenue - spent) / spent
    return np.where(spent == 0, np.nan, out)


def evaluate_scenario(scenario: Scenario, *, strict_roi: bool = True) -> CostBreakdown:
    """Bundle the combined quantities, ROI and per-fault event probabilities.

    With ``strict_roi`` an undefined ROI raises; otherwise it is reported as
    None.
    """
    require_valid(scenario)
    direct, future, revenue = (float(v) for v in combined_terms(scenario))
    try:
        value = roi(direct, future, revenue)
    except UndefinedROIError:
        if strict_roi:
            raise
        value = None
    return CostBreakdown(direct, future, revenue, value, tuple(all_fault_event_probabilities(scenario)))


def objective_values(direct, future, revenue, objective: str = "roi"):
    """Planner objective over arrays; undefined ROI becomes -inf."""
    if objective == "roi":
        return np.nan_to_num(roi_array(direct, future, revenue), nan=-np.inf)
    if objective == "net_benefit":
        return np.asarray(revenue - direct - future, dtype=float)
    raise DomainError(f"unknown objective {objective!r}; use 'roi' or 'net_benefit'")
