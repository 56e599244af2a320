"""Monte Carlo replay of a QA plan, used as an oracle for the closed forms.

Each replication draws, for every (application, fault) pair, whether the
application would detect that fault, plus one field-failure draw per fault.
Faults are then walked through the applications in order:

* the fault is detected by the first application whose own draw hits while
  the chain is still open (its removal cost is charged to direct cost and,
  if the fault would have failed in the field, its field cost is booked as
  revenue);
* otherwise, a hit on any predecessor closes the chain without charges;
* a chain still open after the last application escapes and, if it fails in
  the field, its field cost is booked as future cost.

Setup and execution costs are deterministic and added after sampling.

Replications are processed in fixed blocks of ``BLOCK_SIZE``.  Block ``b``
draws from ``SeedSequence(seed, spawn_key=(b,))`` and block statistics are
merged in block order, so results are bit-identical for any thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Mapping

import numpy as np

from .errors import DomainError
from .model import (
    FaultEventProbabilities,
    Scenario,
    difficulty_matrix,
    predecessor_indices,
    require_valid,
)

BLOCK_SIZE = 1 << 16
THREADS_ENV = "QAECON_THREADS"
QUANTITIES = ("direct", "future", "revenue", "detected")


@dataclass(frozen=True)
class SimulationConfig:
    replications: int
    seed: int = 0
    confidence_level: float = 0.95

    def __post_init__(self):
        if isinstance(self.replications, bool) or not isinstance(self.replications, (int, np.integer)):
            raise DomainError("replications must be an integer")
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if not 0.0 < self.confidence_level < 1.0:
            raise DomainError("confidence_level must lie in (0, 1)")


@dataclass(frozen=True)
class SimulationResult:
    mean_direct: float
    mean_future: float
    mean_revenue: float
    mean_detected: float
    se_direct: float
    se_future: float
    se_revenue: float
    se_detected: float
    # fault id -> {application id | "predecessor_first" | "escape": count}
    event_counts: Mapping[str, Mapping[str, int]]
    replications: int
    seed: int
    confidence_level: float = 0.95

    def mean(self, quantity: str) -> float:
        return getattr(self, f"mean_{quantity}")

    def std_error(self, quantity: str) -> float:
        return getattr(self, f"se_{quantity}")

    def confidence_interval(self, quantity: str) -> tuple[float, float]:
        z = NormalDist().inv_cdf(0.5 + self.confidence_level / 2)
        m, se = self.mean(quantity), self.std_error(quantity)
        return m - z * se, m + z * se

    def event_frequencies(self, fault_id: str) -> FaultEventProbabilities:
        counts = dict(self.event_counts[fault_id])
        n = self.replications
        pred = counts.pop("predecessor_first")
        esc = counts.pop("escape")
        return FaultEventProbabilities(fault_id, {k: v / n for k, v in counts.items()}, pred / n, esc / n)


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise DomainError(f"{THREADS_ENV} must be >= 1")
    return value


class _Plan:
    """Scenario flattened to the arrays a block needs."""

    def __init__(self, scenario: Scenario):
        faults, apps = scenario.faults, scenario.applications
        self.n_apps, self.n_faults = len(apps), len(faults)
        self.p_detect = 1.0 - difficulty_matrix(scenario)
        self.preds = [list(js) for js in predecessor_indices(scenario)]
        self.removal = np.array([[a.removal_cost.get(f.id, 0.0) for f in faults] for a in apps],
                                dtype=float).reshape(self.n_apps, self.n_faults)
        self.pi = np.array([f.pi for f in faults], dtype=float)
        self.field = np.array([f.field_cost for f in faults], dtype=float)
        self.fixed = float(sum(a.fixed_cost for a in apps))


def _moments(values: np.ndarray):
    mean = float(values.mean())
    return len(values), mean, float(np.sum((values - mean) ** 2))


def _merge(a, b):
    na, ma, m2a = a
    nb, mb, m2b = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * nb / n, m2a + m2b + delta * delta * na * nb / n


def _run_block(plan: _Plan, seed: int, block: int, n: int):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    hits = rng.random((n, plan.n_apps, plan.n_faults)) < plan.p_detect
    fails = rng.random((n, plan.n_faults)) < plan.pi

    removal = np.zeros(n)
    future = np.zeros(n)
    revenue = np.zeros(n)
    detected = np.zeros(n)
    counts = np.zeros((plan.n_faults, plan.n_apps + 2), dtype=np.int64)
    for i in range(plan.n_faults):
        own = hits[:, :, i]
        pred = hits[:, :, plan.preds[i]].any(axis=2) if plan.preds[i] else None
        open_ = np.ones(n, dtype=bool)
        found = np.zeros(n, dtype=bool)
        for x in range(plan.n_apps):
            hit = open_ & own[:, x]
            counts[i, x] = np.count_nonzero(hit)
            removal += hit * plan.removal[x, i]
            found |= hit
            open_ &= ~hit
            if pred is not None:
                closed = open_ & pred[:, x]
                counts[i, plan.n_apps] += np.count_nonzero(closed)
                open_ &= ~closed
        counts[i, plan.n_apps + 1] = np.count_nonzero(open_)
        revenue += (found & fails[:, i]) * plan.field[i]
        future += (open_ & fails[:, i]) * plan.field[i]
        detected += found
    return [_moments(v) for v in (removal, future, revenue, detected)], counts


def simulate(scenario: Scenario, config: SimulationConfig, threads: int | None = None) -> SimulationResult:
    """Sample ``config.replications`` lifecycles of ``scenario``."""
    require_valid(scenario)
    if threads is None:
        threads = default_threads()
    if threads < 1:
        raise DomainError("threads must be >= 1")
    plan = _Plan(scenario)
    reps = int(config.replications)
    sizes = [min(BLOCK_SIZE, reps - start) for start in range(0, reps, BLOCK_SIZE)]

    def work(block: int):
        return _run_block(plan, config.seed, block, sizes[block])

    if threads == 1 or len(sizes) == 1:
        blocks = [work(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(work, range(len(sizes))))

    moments = blocks[0][0]
    counts = blocks[0][1].copy()
    for block_moments, block_counts in blocks[1:]:
        moments = [_merge(a, b) for a, b in zip(moments, block_moments)]
        counts += block_counts

    stats = {}
    for name, (n, mean, m2) in zip(QUANTITIES, moments):
        var = m2 / (n - 1) if n > 1 else 0.0
        stats[name] = (mean, float(np.sqrt(var / n)))
    stats["direct"] = (stats["direct"][0] + plan.fixed, stats["direct"][1])

    app_ids = [a.id for a in scenario.applications]
    event_counts = {}
    for i, f in enumerate(scenario.faults):
        row = {a: int(counts[i, x]) for x, a in enumerate(app_ids)}
        row["predecessor_first"] = int(counts[i, plan.n_apps])
        row["escape"] = int(counts[i, plan.n_apps + 1])
        event_counts[f.id] = row

    return SimulationResult(
        mean_direct=stats["direct"][0],
        mean_future=stats["future"][0],
        mean_revenue=stats["revenue"][0],
        mean_detected=stats["detected"][0],
        se_direct=stats["direct"][1],
        se_future=stats["future"][1],
        se_revenue=stats["revenue"][1],
        se_detected=stats["detected"][1],
        event_counts=event_counts,
        replications=reps,
        seed=config.seed,
        confidence_level=config.confidence_level,
    )


def efficiency(result: SimulationResult, scenario: Scenario) -> float:
    """Expected number of detected faults per unit of total effort."""
    total = float(sum(a.effort for a in scenario.applications))
    if total <= 0:
        raise DomainError("efficiency undefined for zero total effort")
    return result.mean_detected / total
