"""Domain types and the detection-event probabilities of an ordered QA plan.

A plan is an ordered sequence of technique applications (tests, inspections,
static analysis runs) applied to a set of potential faults.  Whether an
application misses a fault is governed by a *difficulty* curve theta(t): the
probability of not detecting the fault after spending effort t.  Faults may
have predecessors (defects in earlier documents they were derived from);
once a predecessor is found the whole chain counts as resolved.

Everything here is immutable; the probability helpers are pure functions and
broadcast over leading batch dimensions so the planner can evaluate many
effort allocations at once.
"""
from __future__ import annotations

import graphlib
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ScenarioValidationError, UnknownIdError

CURVE_FORMS = ("constant", "linear", "exponential")


@dataclass(frozen=True)
class DifficultyCurve:
    """Non-increasing probability of missing a fault as a function of effort.

    ``constant`` returns ``theta0`` for every effort; ``linear`` falls with
    slope ``rate`` until it hits ``floor``; ``exponential`` decays from
    ``theta0`` towards ``floor``.
    """

    form: str
    theta0: float
    floor: float = 0.0
    rate: float = 0.0

    def __post_init__(self):
        if self.form not in CURVE_FORMS:
            raise DomainError(f"unknown curve form {self.form!r}; expected one of {CURVE_FORMS}")
        for name in ("theta0", "floor"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name}={value} outside [0, 1]")
        if not (self.rate >= 0.0 and math.isfinite(self.rate)):
            raise DomainError(f"rate={self.rate} must be finite and >= 0")
        if self.form != "constant" and self.floor > self.theta0:
            raise DomainError(f"floor={self.floor} exceeds theta0={self.theta0}")

    @classmethod
    def constant(cls, theta: float) -> "DifficultyCurve":
        return cls("constant", theta)

    @classmethod
    def linear(cls, theta0: float, rate: float, floor: float = 0.0) -> "DifficultyCurve":
        return cls("linear", theta0, floor, rate)

    @classmethod
    def exponential(cls, theta0: float, rate: float, floor: float = 0.0) -> "DifficultyCurve":
        return cls("exponential", theta0, floor, rate)

    @property
    def never_detects(self) -> bool:
        """True when the curve is identically 1."""
        if self.theta0 != 1.0:
            return False
        return self.form == "constant" or self.rate == 0.0 or self.floor == 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(np.isnan(t)):
            raise DomainError("effort must be >= 0")
        if self.form == "constant":
            out = np.full(t.shape, self.theta0)
        elif self.form == "linear":
            out = np.maximum(self.floor, self.theta0 - self.rate * t)
        else:
            out = self.floor + (self.theta0 - self.floor) * np.exp(-self.rate * t)
        return float(out) if out.ndim == 0 else out


def eval_difficulty(curve: DifficultyCurve, t: float) -> float:
    """Probability that ``curve``'s technique misses its fault at effort ``t``."""
    return curve(t)


@dataclass(frozen=True)
class FaultSpec:
    """One potential fault.

    ``pi`` is the probability that the fault, if it escapes, causes a field
    failure; ``v_field`` and ``f_effect`` are the field removal and failure
    effect costs.  ``predecessors`` lists the ids of the direct predecessor
    faults (transitive predecessors have to be listed explicitly).
    """

    id: str
    doc_class: str
    pi: float
    v_field: float = 0.0
    f_effect: float = 0.0
    predecessors: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "predecessors", frozenset(self.predecessors))

    @property
    def field_cost(self) -> float:
        return self.v_field + self.f_effect


@dataclass(frozen=True)
class TechniqueApplication:
    """One application of a defect-detection technique in the plan.

    Execution cost is ``exec_rate * effort``.  A fault without an entry in
    ``difficulty`` cannot be detected by this application; missing removal
    costs default to zero.  ``applicable_classes=None`` means the technique
    can see every document class.
    """

    id: str
    setup_cost: float = 0.0
    exec_rate: float = 0.0
    effort: float = 0.0
    difficulty: Mapping[str, DifficultyCurve] = field(default_factory=dict)
    removal_cost: Mapping[str, float] = field(default_factory=dict)
    applicable_classes: frozenset | None = None

    def __post_init__(self):
        object.__setattr__(self, "difficulty", dict(self.difficulty))
        object.__setattr__(self, "removal_cost", dict(self.removal_cost))
        if self.applicable_classes is not None:
            object.__setattr__(self, "applicable_classes", frozenset(self.applicable_classes))

    def applies_to(self, fault: FaultSpec) -> bool:
        return self.applicable_classes is None or fault.doc_class in self.applicable_classes

    def curve_for(self, fault: FaultSpec) -> DifficultyCurve | None:
        """Curve governing ``fault``, or None when it cannot be detected."""
        if not self.applies_to(fault):
            return None
        return self.difficulty.get(fault.id)

    def difficulty_of(self, fault: FaultSpec, effort: float | None = None) -> float:
        curve = self.curve_for(fault)
        if curve is None:
            return 1.0
        return curve(self.effort if effort is None else effort)

    @property
    def fixed_cost(self) -> float:
        """Setup plus execution cost."""
        return self.setup_cost + self.exec_rate * self.effort


@dataclass(frozen=True)
class Scenario:
    """Faults plus the ordered applications applied to them."""

    faults: Sequence[FaultSpec] = ()
    applications: Sequence[TechniqueApplication] = ()
    currency_unit: str = "staff-hours"
    effort_unit: str = "staff-hours"

    def __post_init__(self):
        object.__setattr__(self, "faults", tuple(self.faults))
        object.__setattr__(self, "applications", tuple(self.applications))

    @cached_property
    def fault_index(self) -> dict[str, int]:
        return {f.id: k for k, f in enumerate(self.faults)}

    @cached_property
    def application_index(self) -> dict[str, int]:
        return {a.id: k for k, a in enumerate(self.applications)}

    def fault(self, fault_id: str) -> FaultSpec:
        try:
            return self.faults[self.fault_index[fault_id]]
        except KeyError:
            raise UnknownIdError(f"unknown fault {fault_id!r}") from None

    def application(self, app_id: str) -> TechniqueApplication:
        try:
            return self.applications[self.application_index[app_id]]
        except KeyError:
            raise UnknownIdError(f"unknown application {app_id!r}") from None

    @property
    def efforts(self) -> np.ndarray:
        return np.array([a.effort for a in self.applications], dtype=float)

    def with_efforts(self, efforts: Mapping[str, float] | Sequence[float]) -> "Scenario":
        if isinstance(efforts, Mapping):
            for app_id in efforts:
                self.application(app_id)
            apps = [replace(a, effort=float(efforts.get(a.id, a.effort))) for a in self.applications]
        else:
            efforts = list(efforts)
            if len(efforts) != len(self.applications):
                raise DomainError("need one effort per application")
            apps = [replace(a, effort=float(t)) for a, t in zip(self.applications, efforts)]
        return replace(self, applications=apps)

    def reordered(self, app_ids: Sequence[str]) -> "Scenario":
        if sorted(app_ids) != sorted(self.application_index):
            raise DomainError("ordering must be a permutation of the application ids")
        return replace(self, applications=[self.application(a) for a in app_ids])


@dataclass(frozen=True)
class FaultEventProbabilities:
    """How a single fault's story ends: detected by one application, resolved
    through a predecessor detection, or escaped to the field."""

    fault_id: str
    p_detected_by: Mapping[str, float]
    p_predecessor_first: float
    p_escape: float

    @property
    def p_detected(self) -> float:
        return sum(self.p_detected_by.values())

    @property
    def total(self) -> float:
        return self.p_detected + self.p_predecessor_first + self.p_escape


# -- vectorised core -------------------------------------------------------

def predecessor_indices(scenario: Scenario) -> tuple[tuple[int, ...], ...]:
    index = scenario.fault_index
    out = []
    for f in scenario.faults:
        try:
            out.append(tuple(sorted(index[j] for j in f.predecessors)))
        except KeyError as exc:
            raise UnknownIdError(f"fault {f.id!r} has unknown predecessor {exc.args[0]!r}") from None
    return tuple(out)


def difficulty_matrix(scenario: Scenario, efforts=None) -> np.ndarray:
    """theta_x(i, t_x) with applications on axis -2 and faults on axis -1.

    ``efforts`` may carry leading batch dimensions (shape ``(..., n_apps)``);
    by default each application's own effort is used.
    """
    t = scenario.efforts if efforts is None else np.asarray(efforts, dtype=float)
    n_apps, n_faults = len(scenario.applications), len(scenario.faults)
    if t.shape[-1:] != (n_apps,):
        raise DomainError(f"efforts must have trailing dimension {n_apps}")
    theta = np.ones(t.shape + (n_faults,))
    for x, app in enumerate(scenario.applications):
        for i, fault in enumerate(scenario.faults):
            curve = app.curve_for(fault)
            if curve is not None:
                theta[..., x, i] = curve(t[..., x])
    return theta


def predecessor_survival(theta: np.ndarray, preds) -> np.ndarray:
    """Per application, probability that no predecessor of fault i is detected."""
    out = np.ones_like(theta)
    for i, js in enumerate(preds):
        if js:
            out[..., i] = np.prod(theta[..., list(js)], axis=-1)
    return out


def event_arrays(theta: np.ndarray, preds):
    """Return ``(prior, p_detected, p_predecessor_first, p_escape)``.

    ``prior[..., x, i]`` is the probability that neither fault i nor any of
    its predecessors was detected by an application strictly before x.  A
    fault detected in the same application as one of its predecessors counts
    as detected by that application.
    """
    pred_surv = predecessor_survival(theta, preds)
    chain = theta * pred_surv
    cum = np.cumprod(chain, axis=-2)
    prior = np.ones_like(chain)
    prior[..., 1:, :] = cum[..., :-1, :]
    p_detected = (1.0 - theta) * prior
    p_pred = np.sum(prior * theta * (1.0 - pred_surv), axis=-2)
    if chain.shape[-2]:
        p_escape = cum[..., -1, :]
    else:
        p_escape = np.ones(chain.shape[:-2] + chain.shape[-1:])
    return prior, p_detected, p_pred, p_escape


# -- scalar operations -----------------------------------------------------

def non_detection_prior(scenario: Scenario, x: str, i: str) -> float:
    """Probability that fault ``i`` and its predecessors all survived every
    application before ``x``."""
    xi = scenario.application_index.get(x)
    if xi is None:
        raise UnknownIdError(f"unknown application {x!r}")
    fi = scenario.fault_index.get(i)
    if fi is None:
        raise UnknownIdError(f"unknown fault {i!r}")
    prior, *_ = event_arrays(difficulty_matrix(scenario), predecessor_indices(scenario))
    return float(prior[xi, fi])


def all_fault_event_probabilities(scenario: Scenario) -> list[FaultEventProbabilities]:
    _, p_det, p_pred, p_esc = event_arrays(difficulty_matrix(scenario), predecessor_indices(scenario))
    apps = [a.id for a in scenario.applications]
    return [
        FaultEventProbabilities(
            fault_id=f.id,
            p_detected_by={a: float(p_det[x, i]) for x, a in enumerate(apps)},
            p_predecessor_first=float(p_pred[i]),
            p_escape=float(p_esc[i]),
        )
        for i, f in enumerate(scenario.faults)
    ]


def fault_event_probabilities(scenario: Scenario, i: str) -> FaultEventProbabilities:
    idx = scenario.fault_index.get(i)
    if idx is None:
        raise UnknownIdError(f"unknown fault {i!r}")
    return all_fault_event_probabilities(scenario)[idx]


# -- validation ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    detail: str = ""

    def __str__(self) -> str:
        text = f"{self.where}: {self.kind}"
        return f"{text} ({self.detail})" if self.detail else text


def _duplicates(ids: Iterable[str]) -> list[str]:
    seen, dup = set(), []
    for x in ids:
        if x in seen and x not in dup:
            dup.append(x)
        seen.add(x)
    return dup


def _bad_number(v) -> bool:
    return not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v)


def validate_scenario(scenario: Scenario) -> list[Violation]:
    """Every problem found in ``scenario``; empty iff it is well formed."""
    out: list[Violation] = []
    for d in _duplicates(f.id for f in scenario.faults):
        out.append(Violation("duplicate id", f"faults[{d}]"))
    for d in _duplicates(a.id for a in scenario.applications):
        out.append(Violation("duplicate id", f"applications[{d}]"))

    fault_ids = set(scenario.fault_index)
    for f in scenario.faults:
        where = f"faults[{f.id}]"
        if not f.id:
            out.append(Violation("empty id", where))
        if not f.doc_class:
            out.append(Violation("empty document class", where))
        if _bad_number(f.pi) or not 0.0 <= f.pi <= 1.0:
            out.append(Violation("probability out of range", where + ".pi", f"{f.pi}"))
        for name in ("v_field", "f_effect"):
            v = getattr(f, name)
            if _bad_number(v) or v < 0:
                out.append(Violation("negative cost", f"{where}.{name}", f"{v}"))
        for j in sorted(f.predecessors):
            if j not in fault_ids:
                out.append(Violation("unknown predecessor", where + ".predecessors", j))

    graph = {f.id: {j for j in f.predecessors if j in fault_ids} for f in scenario.faults}
    try:
        tuple(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as exc:
        cycle = " -> ".join(exc.args[1])
        out.append(Violation("propagation cycle", "faults", cycle))

    by_id = {f.id: f for f in scenario.faults}
    for a in scenario.applications:
        where = f"applications[{a.id}]"
        if not a.id:
            out.append(Violation("empty id", where))
        for name in ("setup_cost", "exec_rate"):
            v = getattr(a, name)
            if _bad_number(v) or v < 0:
                out.append(Violation("negative cost", f"{where}.{name}", f"{v}"))
        if _bad_number(a.effort) or a.effort < 0:
            out.append(Violation("negative effort", where + ".effort", f"{a.effort}"))
        for fid, curve in a.difficulty.items():
            if fid not in by_id:
                out.append(Violation("unknown fault", f"{where}.difficulty", fid))
            elif not isinstance(curve, DifficultyCurve):
                out.append(Violation("not a difficulty curve", f"{where}.difficulty[{fid}]"))
            elif not a.applies_to(by_id[fid]) and not curve.never_detects:
                out.append(Violation(
                    "class/difficulty inconsistency", f"{where}.difficulty[{fid}]",
                    f"class {by_id[fid].doc_class!r} not applicable but curve can detect"))
        for fid, v in a.removal_cost.items():
            if fid not in by_id:
                out.append(Violation("unknown fault", f"{where}.removal_cost", fid))
            if _bad_number(v) or v < 0:
                out.append(Violation("negative cost", f"{where}.removal_cost[{fid}]", f"{v}"))
    return out


def require_valid(scenario: Scenario) -> Scenario:
    violations = validate_scenario(scenario)
    if violations:
        raise ScenarioValidationError(violations)
    return scenario
