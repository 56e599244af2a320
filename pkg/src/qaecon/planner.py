"""Decision support on top of the closed-form model.

* :func:`optimize_effort` splits an effort budget over the applications on a
  grid (exhaustively when the grid is small, otherwise by coordinate ascent
  from grid seeds).
* :func:`optimize_order` searches application orderings.
* :func:`sensitivity_oat` perturbs one input at a time and reports ROI
  elasticities.

Searches enumerate candidates in a fixed order and return the first one
whose objective is within a relative ``TIE_TOLERANCE`` of the best value, so
results do not depend on floating-point noise between mathematically equal
candidates.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .economics import CostBreakdown, combined_terms, evaluate_scenario, objective_values, roi
from .errors import DomainError, InfeasibleBudgetError, UnknownIdError
from .model import Scenario, require_valid

TIE_TOLERANCE = 1e-10
MAX_GRID_POINTS = 10**6
_CHUNK = 1 << 15


def _tol(value: float) -> float:
    return TIE_TOLERANCE * max(1.0, abs(value)) if math.isfinite(value) else 0.0


def _first_best(values: np.ndarray) -> int:
    best = float(np.max(values))
    return int(np.argmax(values >= best - _tol(best)))


# -- effort allocation -------------------------------------------------------

@dataclass(frozen=True)
class Budget:
    """Total effort to spend, the grid resolution, and optional per-application
    ``(min, max)`` effort bounds."""

    total_effort: float
    grid_step: float
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.total_effort >= 0:
            raise DomainError("total_effort must be >= 0")
        if not self.grid_step > 0:
            raise DomainError("grid_step must be > 0")
        object.__setattr__(self, "bounds", {k: (float(lo), float(hi)) for k, (lo, hi) in self.bounds.items()})


@dataclass(frozen=True)
class EffortPlan:
    efforts: Mapping[str, float]
    breakdown: CostBreakdown
    objective: str
    value: float
    method: str
    evaluated: int


def _grid(scenario: Scenario, budget: Budget):
    ids = [a.id for a in scenario.applications]
    for app_id in budget.bounds:
        scenario.application(app_id)
    total, step = budget.total_effort, budget.grid_step
    mins = np.array([budget.bounds.get(a, (0.0, total))[0] for a in ids])
    maxs = np.array([budget.bounds.get(a, (0.0, total))[1] for a in ids])
    eps = 1e-9 * max(1.0, total)
    if np.any(mins < 0) or np.any(mins > maxs):
        raise InfeasibleBudgetError("each bound needs 0 <= min <= max")
    if mins.sum() > total + eps or maxs.sum() < total - eps:
        raise InfeasibleBudgetError(
            f"budget {total} outside [{mins.sum()}, {maxs.sum()}] implied by the bounds")
    spare = total - mins.sum()
    units = round(spare / step)
    if abs(units * step - spare) > eps:
        raise DomainError(f"discretionary effort {spare} is not a multiple of grid_step {step}")
    units = max(units, 0)
    caps = [int(math.floor((hi - lo) / step + 1e-9)) for lo, hi in zip(mins, maxs)]
    if sum(caps) < units:
        raise InfeasibleBudgetError("bounds leave no grid point that spends the whole budget")
    return ids, mins, units, caps


def _count_compositions(units: int, caps: Sequence[int]) -> int:
    ways = [1] + [0] * units
    for cap in caps:
        prefix = list(itertools.accumulate(ways, initial=0))
        ways = [prefix[t + 1] - prefix[max(0, t - cap)] for t in range(units + 1)]
    return ways[units]


def _compositions(units: int, caps: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """All ways to put ``units`` into bins with capacities ``caps``, in
    lexicographic order."""
    n = len(caps)
    if n == 0:
        if units == 0:
            yield ()
        return
    rest = [sum(caps[k + 1:]) for k in range(n)]

    def rec(prefix, remaining, k):
        if k == n - 1:
            if remaining <= caps[k]:
                yield prefix + (remaining,)
            return
        for take in range(max(0, remaining - rest[k]), min(caps[k], remaining) + 1):
            yield from rec(prefix + (take,), remaining - take, k + 1)

    yield from rec((), units, 0)


def _values(scenario, efforts, objective):
    d, o, r = combined_terms(scenario, efforts)
    return objective_values(d, o, r, objective)


def _fill(order: Iterable[int], units: int, caps: Sequence[int]) -> list[int]:
    alloc = [0] * len(caps)
    for k in order:
        take = min(caps[k], units)
        alloc[k] += take
        units -= take
    return alloc


def _ascent(scenario, mins, step, units, caps, objective):
    n = len(caps)
    share = [min(c, units // n) for c in caps]
    seeds = [_fill(range(n), units - sum(share), [c - s for c, s in zip(caps, share)])]
    seeds[0] = [s + extra for s, extra in zip(share, seeds[0])]
    for k in range(n):
        seeds.append(_fill([k] + [j for j in range(n) if j != k], units, caps))
    seed_vals = _values(scenario, mins + step * np.array(seeds, dtype=float), objective)
    evaluated = len(seeds)
    current = seeds[_first_best(seed_vals)]
    value = float(np.max(seed_vals))
    while True:
        moves = []
        for a, b in itertools.permutations(range(n), 2):
            if current[a] > 0 and current[b] < caps[b]:
                cand = list(current)
                cand[a] -= 1
                cand[b] += 1
                moves.append(cand)
        if not moves:
            break
        vals = _values(scenario, mins + step * np.array(moves, dtype=float), objective)
        evaluated += len(moves)
        k = _first_best(vals)
        if vals[k] <= value + _tol(value):
            break
        current, value = moves[k], float(vals[k])
    return current, value, evaluated


def optimize_effort(scenario: Scenario, budget: Budget, objective: str = "roi",
                    max_grid_points: int = MAX_GRID_POINTS) -> EffortPlan:
    """Best split of ``budget.total_effort`` over the applications.

    Every allocation spends the whole budget.  The uniform split (each
    application gets its minimum plus an equal share of the rest) is always
    evaluated as well, even when it falls between grid points.
    """
    require_valid(scenario)
    ids, mins, units, caps = _grid(scenario, budget)
    step = budget.grid_step
    objective_values(np.zeros(1), np.ones(1), np.zeros(1), objective)  # reject unknown objectives early

    if _count_compositions(units, caps) <= max_grid_points:
        method = "exhaustive"
        allocs, vals, evaluated = [], [], 0
        gen = _compositions(units, caps)
        while True:
            chunk = list(itertools.islice(gen, _CHUNK))
            if not chunk:
                break
            arr = np.array(chunk, dtype=float).reshape(len(chunk), len(ids))
            allocs.append(arr)
            vals.append(_values(scenario, mins + step * arr, objective))
            evaluated += len(chunk)
        allocs = np.concatenate(allocs)
        vals = np.concatenate(vals)
        k = _first_best(vals)
        efforts, value = mins + step * allocs[k], float(vals[k])
    else:
        method = "coordinate-ascent"
        alloc, value, evaluated = _ascent(scenario, mins, step, units, caps, objective)
        efforts = mins + step * np.array(alloc, dtype=float)

    if ids:
        uniform = mins + (budget.total_effort - mins.sum()) / len(ids)
        maxs = np.array([budget.bounds.get(a, (0.0, budget.total_effort))[1] for a in ids])
        if np.all(uniform <= maxs + 1e-12):
            u_val = float(_values(scenario, uniform, objective))
            evaluated += 1
            if u_val > value + _tol(value):
                efforts, value, method = uniform, u_val, method + "+uniform"

    chosen = scenario.with_efforts([float(t) for t in efforts])
    return EffortPlan(
        efforts={a: float(t) for a, t in zip(ids, efforts)},
        breakdown=evaluate_scenario(chosen, strict_roi=False),
        objective=objective,
        value=value,
        method=method,
        evaluated=evaluated,
    )


# -- ordering ------------------------------------------------------------------

@dataclass(frozen=True)
class OrderPlan:
    order: tuple[str, ...]
    breakdown: CostBreakdown
    objective: str
    value: float
    method: str
    evaluated: int


def _order_value(scenario: Scenario, order: Sequence[str], objective: str) -> float:
    apps = [scenario.application(a) for a in order]
    return float(_values(replace(scenario, applications=apps), np.array([a.effort for a in apps]), objective))


def optimize_order(scenario: Scenario, max_permutations: int = 40320, objective: str = "roi") -> OrderPlan:
    """Best ordering of the applications.

    Exhaustive when ``n!`` does not exceed ``max_permutations`` (ties go to
    the lexicographically smallest id sequence); otherwise applications are
    inserted one by one, in id order, at their best position.
    """
    require_valid(scenario)
    ids = sorted(a.id for a in scenario.applications)
    if math.factorial(len(ids)) <= max_permutations:
        method = "exhaustive"
        perms = list(itertools.permutations(ids))
        vals = np.array([_order_value(scenario, p, objective) for p in perms])
        order = perms[_first_best(vals)]
        evaluated = len(perms)
    else:
        method = "greedy-insertion"
        order, evaluated = (), 0
        for app in ids:
            cands = [order[:p] + (app,) + order[p:] for p in range(len(order) + 1)]
            vals = np.array([_order_value(scenario, c, objective) for c in cands])
            evaluated += len(cands)
            order = cands[_first_best(vals)]
    best = scenario.reordered(order)
    return OrderPlan(
        order=tuple(order),
        breakdown=evaluate_scenario(best, strict_roi=False),
        objective=objective,
        value=_order_value(scenario, order, objective),
        method=method,
        evaluated=evaluated,
    )


# -- sensitivity -----------------------------------------------------------------

APP_FIELDS = ("setup_cost", "exec_rate", "effort")
FAULT_FIELDS = ("pi", "v_field", "f_effect")
CURVE_FIELDS = ("theta0", "floor", "rate")


@dataclass(frozen=True)
class SensitivityEntry:
    factor: str
    base_value: float
    roi_minus: float
    roi_plus: float
    elasticity: float


@dataclass(frozen=True)
class SensitivityReport:
    base_roi: float
    delta: float
    entries: tuple[SensitivityEntry, ...]  # ranked by |elasticity|, then name

    def ranking(self) -> list[str]:
        return [e.factor for e in self.entries]


def factor_paths(scenario: Scenario) -> list[str]:
    """Every numeric input of ``scenario`` addressable by :func:`get_factor`."""
    out = []
    for a in scenario.applications:
        out += [f"applications.{a.id}.{name}" for name in APP_FIELDS]
        out += [f"applications.{a.id}.removal_cost.{fid}" for fid in a.removal_cost]
        for fid, curve in a.difficulty.items():
            params = ("theta0",) if curve.form == "constant" else CURVE_FIELDS
            out += [f"applications.{a.id}.difficulty.{fid}.{p}" for p in params]
    for f in scenario.faults:
        out += [f"faults.{f.id}.{name}" for name in FAULT_FIELDS]
    return out


def _split_id(rest: str, ids: Iterable[str], path: str) -> tuple[str, str]:
    hits = [i for i in ids if rest.startswith(i + ".")]
    if not hits:
        raise UnknownIdError(f"unknown factor path {path!r}")
    best = max(hits, key=len)
    return best, rest[len(best) + 1:]


def _resolve(scenario: Scenario, path: str):
    head, _, rest = path.partition(".")
    if head == "faults":
        fid, attr = _split_id(rest, scenario.fault_index, path)
        if attr in FAULT_FIELDS:
            return ("fault", fid, attr, None)
    elif head == "applications":
        aid, attr = _split_id(rest, scenario.application_index, path)
        app = scenario.application(aid)
        if attr in APP_FIELDS:
            return ("app", aid, attr, None)
        kind, _, sub = attr.partition(".")
        if kind == "removal_cost" and sub in app.removal_cost:
            return ("removal", aid, sub, None)
        if kind == "difficulty":
            fid, param = _split_id(sub, app.difficulty, path)
            if param in CURVE_FIELDS:
                return ("curve", aid, fid, param)
    raise UnknownIdError(f"unknown factor path {path!r}")


def get_factor(scenario: Scenario, path: str) -> float:
    kind, owner, name, param = _resolve(scenario, path)
    if kind == "fault":
        return float(getattr(scenario.fault(owner), name))
    app = scenario.application(owner)
    if kind == "app":
        return float(getattr(app, name))
    if kind == "removal":
        return float(app.removal_cost[name])
    return float(getattr(app.difficulty[name], param))


def _domain(scenario: Scenario, path: str) -> tuple[float, float]:
    kind, owner, name, param = _resolve(scenario, path)
    if kind == "fault" and name == "pi":
        return 0.0, 1.0
    if kind == "curve":
        curve = scenario.application(owner).difficulty[name]
        if param == "theta0":
            return (0.0 if curve.form == "constant" else curve.floor), 1.0
        if param == "floor":
            return 0.0, curve.theta0
    return 0.0, math.inf


def set_factor(scenario: Scenario, path: str, value: float) -> Scenario:
    """Copy of ``scenario`` with one numeric input replaced."""
    kind, owner, name, param = _resolve(scenario, path)
    if kind == "fault":
        faults = [replace(f, **{name: value}) if f.id == owner else f for f in scenario.faults]
        return replace(scenario, faults=faults)
    app = scenario.application(owner)
    if kind == "app":
        new = replace(app, **{name: value})
    elif kind == "removal":
        new = replace(app, removal_cost={**app.removal_cost, name: value})
    else:
        curve = replace(app.difficulty[name], **{param: value})
        new = replace(app, difficulty={**app.difficulty, name: curve})
    apps = [new if a.id == owner else a for a in scenario.applications]
    return replace(scenario, applications=apps)


def _roi_of(scenario: Scenario) -> float:
    return roi(*(float(v) for v in combined_terms(scenario)))


def sensitivity_oat(scenario: Scenario, factors: Sequence[str] | None = None,
                    delta: float = 0.01) -> SensitivityReport:
    """One-at-a-time ROI elasticities by central differences.

    Each factor f is moved to ``f*(1-delta)`` and ``f*(1+delta)`` (clipped to
    its valid range) and the elasticity is the relative ROI change divided by
    the relative factor change.
    """
    if not delta > 0:
        raise DomainError("delta must be > 0")
    require_valid(scenario)
    base = _roi_of(scenario)
    if base == 0:
        raise DomainError("elasticity undefined at break-even (ROI = 0)")
    factors = factor_paths(scenario) if factors is None else list(factors)
    entries = []
    for path in factors:
        f0 = get_factor(scenario, path)
        lo, hi = _domain(scenario, path)
        f_minus = min(max(f0 * (1 - delta), lo), hi)
        f_plus = min(max(f0 * (1 + delta), lo), hi)
        r_minus = _roi_of(set_factor(scenario, path, f_minus))
        r_plus = _roi_of(set_factor(scenario, path, f_plus))
        if f_plus == f_minus:
            elasticity = 0.0
        else:
            elasticity = ((r_plus - r_minus) / base) / ((f_plus - f_minus) / f0)
        entries.append(SensitivityEntry(path, f0, r_minus, r_plus, elasticity))
    entries.sort(key=lambda e: (-abs(e.elasticity), e.factor))
    return SensitivityReport(base, delta, tuple(entries))
