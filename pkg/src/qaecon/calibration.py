"""Survey-level calibration data for the QA economics model.

All table entries are summary quadruples (lowest, mean, median, highest) over
published studies, each study weighted equally.  Percentages are stored on
the 0-100 scale exactly as tabulated; :func:`as_fraction` is the one place
where they are converted to probabilities.
"""
from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, UnknownIdError

# Time conventions used when the surveyed studies were merged.
STAFF_HOURS_PER_DAY = 6.0
STAFF_MINUTES_PER_HOUR = 60.0

# Inspection reading rate guideline (not used by the model: the effect of
# deviating from it is not understood).
OPTIMAL_INSPECTION_RATE_PAGES_PER_HOUR = 1.0
INSPECTION_RATE_BANDWIDTH_PAGES_PER_HOUR = 0.8
WORDS_PER_PAGE = 300

INSPECTION_PLANNING_HOURS = 2.0
INSPECTION_KICKOFF_HOURS = 0.5

# Field removal costs after dropping the two box-plot outliers of the
# underlying study set.  The raw values are not available, so these are
# reference numbers only.
FIELD_REMOVAL_COST_FILTERED_MEAN = 27.24
FIELD_REMOVAL_COST_FILTERED_MEDIAN = 27.0

# Rough cross-technique averages of the difficulty (as fractions).
TYPICAL_TEST_DIFFICULTY = 0.45
TYPICAL_INSPECTION_DIFFICULTY = 0.65

# Efficiency advantage of trained testing staff; informational, not modelled.
STAFF_EXPERIENCE_EFFICIENCY_GAIN = (0.10, 0.15)

PERCENT = "%"


def as_fraction(percent: float) -> float:
    """Convert a 0-100 percentage from the tables into a probability."""
    return percent / 100.0


@dataclass(frozen=True)
class SummaryStats:
    lowest: float
    mean: float
    median: float
    highest: float
    unit: str = ""

    def __post_init__(self):
        if not (self.lowest <= self.median <= self.highest and self.lowest <= self.mean <= self.highest):
            raise DomainError(
                f"inconsistent summary: lowest={self.lowest} mean={self.mean} "
                f"median={self.median} highest={self.highest}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lowest, self.mean, self.median, self.highest)


@dataclass(frozen=True)
class CalibrationEntry:
    key: str
    stats: SummaryStats
    unit: str
    source_note: str


def _entry(key, values, unit, note):
    return CalibrationEntry(key, SummaryStats(*values, unit=unit), unit, note)


_EFF_TESTS = "survey summary: effectiveness of test techniques"
_EFFI_TESTS = "survey summary: efficiency of test techniques"
_DIFF_TESTS = "difficulty = 100 - effectiveness, test techniques"
_REM_TESTS = "survey summary: removal costs in test phases; staff-day = 6 staff-hours"
_EXEC_INSP = "survey summary: inspection execution costs; LOC variants treated as equal"
_REM_INSP = "survey summary: removal costs of inspections"
_DEF_H = "defects/staff-hour"
_H_DEF = "staff-hours/defect"
_H_KLOC = "staff-hours/KLOC"

_ENTRIES = [
    _entry("test.functional.effectiveness", (33, 53.26, 48.85, 88), PERCENT, _EFF_TESTS),
    _entry("test.structural.effectiveness", (17, 54.78, 56.85, 89), PERCENT, _EFF_TESTS),
    _entry("test.all.effectiveness", (7.2, 49.85, 47, 89), PERCENT, _EFF_TESTS),
    _entry("test.functional.efficiency", (1.22, 1.72, 1.71, 2.47), _DEF_H, _EFFI_TESTS),
    _entry("test.structural.efficiency", (0.22, 1.5, 2.07, 2.2), _DEF_H, _EFFI_TESTS),
    _entry("test.all.efficiency", (0.04, 1.26, 1.5, 2.47), _DEF_H, _EFFI_TESTS),
    _entry("test.functional.difficulty", (12, 46.74, 51.15, 67), PERCENT, _DIFF_TESTS),
    _entry("test.structural.difficulty", (11, 45.22, 43.15, 83), PERCENT, _DIFF_TESTS),
    _entry("test.all.difficulty", (11, 50.15, 53, 92.8), PERCENT, _DIFF_TESTS),
    _entry("test.unit.removal_cost", (1.5, 3.46, 2.5, 6), _H_DEF, _REM_TESTS),
    _entry("test.integration.removal_cost", (3.06, 5.42, 4.55, 9.5), _H_DEF, _REM_TESTS),
    _entry("test.system.removal_cost", (2.82, 8.37, 6.2, 20), _H_DEF,
           _REM_TESTS + "; functional and system test phases combined"),
    _entry("test.all.removal_cost", (0.2, 8, 4.95, 52), _H_DEF, _REM_TESTS),
    _entry("inspection.design.preparation.execution_cost", (3.6, 4.68, 4.68, 5.76), _H_KLOC, _EXEC_INSP),
    _entry("inspection.design.meeting.execution_cost", (3.6, 4.07, 4.07, 4.54), _H_KLOC, _EXEC_INSP),
    _entry("inspection.design.all.execution_cost", (7.2, 8.75, 8.75, 10.3), _H_KLOC, _EXEC_INSP),
    _entry("inspection.code.preparation.execution_cost", (4.91, 6.49, 6.67, 7.9), _H_KLOC, _EXEC_INSP),
    _entry("inspection.code.meeting.execution_cost", (3.32, 7.02, 4.4, 13.33), _H_KLOC, _EXEC_INSP),
    _entry("inspection.code.all.execution_cost", (6.67, 13.2, 11.15, 22), _H_KLOC, _EXEC_INSP),
    _entry("inspection.effectiveness", (8.5, 34.14, 30, 92.7), PERCENT,
           "survey summary: effectiveness of inspections"),
    _entry("inspection.efficiency", (0.16, 1.87, 1.18, 6), _DEF_H,
           "survey summary: efficiency of inspections"),
    _entry("inspection.difficulty", (7.3, 65.86, 70, 91.5), PERCENT,
           "difficulty = 100 - effectiveness, inspections"),
    _entry("inspection.requirements.removal_cost", (0.05, 1.06, 1.1, 2), _H_DEF, _REM_INSP),
    _entry("inspection.design.removal_cost", (0.07, 2.31, 0.83, 6.3), _H_DEF,
           _REM_INSP + "; only four data points"),
    _entry("inspection.coding.removal_cost", (0.17, 2.71, 1.95, 6.3), _H_DEF, _REM_INSP),
    _entry("inspection.all.removal_cost", (0.05, 1.91, 1.2, 7.5), _H_DEF, _REM_INSP),
    _entry("field.removal_cost", (3.9, 57.42, 27.6, 250), _H_DEF,
           "survey summary: field removal costs; without two outliers: "
           "mean 27.24, median 27"),
]

DATASET: Mapping[str, CalibrationEntry] = {e.key: e for e in _ENTRIES}

# Effectiveness -> difficulty pairs that the tables derive from each other.
DIFFICULTY_PAIRS = {
    "test.functional.effectiveness": "test.functional.difficulty",
    "test.structural.effectiveness": "test.structural.difficulty",
    "test.all.effectiveness": "test.all.difficulty",
    "inspection.effectiveness": "inspection.difficulty",
}


def dataset_keys() -> list[str]:
    return sorted(DATASET)


def builtin_dataset(key: str) -> CalibrationEntry:
    try:
        return DATASET[key]
    except KeyError:
        raise UnknownIdError(f"unknown calibration key {key!r}; available: {', '.join(dataset_keys())}") from None


# -- defect types ----------------------------------------------------------

DEFECT_TYPES = ("initialisation", "control", "data", "computation", "interface", "cosmetic")


@dataclass(frozen=True)
class DefectTypeDifficultyProfile:
    """Difficulty (percent) per defect type for each technique family."""

    family: str
    values: Mapping[str, float]
    source_note: str

    def __post_init__(self):
        for t, v in self.values.items():
            if t not in DEFECT_TYPES:
                raise DomainError(f"unknown defect type {t!r}")
            if not 0 <= v <= 100:
                raise DomainError(f"{t}: difficulty {v} outside [0, 100]")

    def difficulty(self, defect_type: str) -> float:
        """Difficulty as a probability."""
        try:
            return as_fraction(self.values[defect_type])
        except KeyError:
            raise UnknownIdError(f"unknown defect type {defect_type!r}") from None


def _profile(family, column, note):
    return DefectTypeDifficultyProfile(family, dict(zip(DEFECT_TYPES, column)), note)


_TYPES_TESTS = "single study: difficulty per defect type, testing"
DEFECT_TYPE_PROFILES: Mapping[str, DefectTypeDifficultyProfile] = {
    p.family: p for p in (
        _profile("functional_test", (25.0, 33.3, 71.7, 35.8, 69.3, 91.7), _TYPES_TESTS),
        _profile("structural_test", (53.8, 51.2, 73.2, 41.2, 75.4, 92.3), _TYPES_TESTS),
        _profile("test_overall", (38.5, 47.2, 74.7, 75.4, 66.9, 89.2), _TYPES_TESTS),
        _profile("inspection", (35.4, 57.2, 79.3, 29.1, 53.3, 83.3),
                 "single study: difficulty per defect type, inspections"),
    )
}


def defect_type_profile(family: str) -> DefectTypeDifficultyProfile:
    try:
        return DEFECT_TYPE_PROFILES[family]
    except KeyError:
        raise UnknownIdError(
            f"unknown technique family {family!r}; available: {', '.join(sorted(DEFECT_TYPE_PROFILES))}"
        ) from None


# -- statistics ------------------------------------------------------------

def summary_stats(values: Iterable[float], unit: str = "") -> SummaryStats:
    """Equal-weight lowest / mean / median / highest of ``values``."""
    values = [float(v) for v in values]
    if not values:
        raise DomainError("summary_stats needs at least one value")
    lo, hi = min(values), max(values)
    # fmean can round a hair outside [lo, hi] when all values are equal
    mean = min(max(statistics.fmean(values), lo), hi)
    return SummaryStats(lo, mean, statistics.median(values), hi, unit)


def quartiles(values: Sequence[float]) -> tuple[float, float]:
    """Tukey hinges: medians of the lower and upper halves, the middle
    element excluded for odd lengths."""
    xs = sorted(values)
    half = len(xs) // 2
    return statistics.median(xs[:half]), statistics.median(xs[len(xs) - half:])


def iqr_outlier_filter(values: Sequence[float], k: float = 1.5) -> tuple[list[float], list[float]]:
    """Split ``values`` into (kept, removed) using box-plot fences.

    Values lying exactly on a fence are kept.  Input order is preserved.
    """
    if len(values) < 4:
        raise DomainError("outlier filter needs at least 4 values")
    q1, q3 = quartiles(values)
    iqr = q3 - q1
    lo, hi = q1 - k * iqr, q3 + k * iqr
    kept = [v for v in values if lo <= v <= hi]
    removed = [v for v in values if not lo <= v <= hi]
    return kept, removed


def derive_difficulty_stats(e: SummaryStats) -> SummaryStats:
    """Difficulty summary (percent) from an effectiveness summary (percent).

    Since difficulty = 100 - effectiveness, the extremes swap places.
    """
    for v in e.as_tuple():
        if not 0 <= v <= 100:
            raise DomainError(f"effectiveness {v} outside [0, 100]")
    return SummaryStats(100 - e.highest, 100 - e.mean, 100 - e.median, 100 - e.lowest, e.unit)


# -- cost rules --------------------------------------------------------------

# Per-function-point effort of test phases (staff-hours per fp).
SETUP_HOURS_PER_FP = {"unit": 0.50, "function": 0.75, "system": 1.00, "field": 0.50}
EXECUTION_HOURS_PER_FP = {"unit": 0.25, "function": 0.50, "system": 0.50, "field": 0.50}


def _per_fp(table, phase, size_fp):
    if phase not in table:
        raise UnknownIdError(f"unknown test phase {phase!r}; expected one of {sorted(table)}")
    if not size_fp >= 0:
        raise DomainError("size in function points must be >= 0")
    return table[phase] * size_fp


def setup_cost_per_fp(phase: str, size_fp: float) -> float:
    return _per_fp(SETUP_HOURS_PER_FP, phase, size_fp)


def execution_cost_per_fp(phase: str, size_fp: float) -> float:
    return _per_fp(EXECUTION_HOURS_PER_FP, phase, size_fp)


def inspection_fixed_setup() -> float:
    """Planning plus kick-off effort of one inspection, in staff-hours."""
    return INSPECTION_PLANNING_HOURS + INSPECTION_KICKOFF_HOURS


def geometric_failure_probabilities(n: int, first: float, ratio: float) -> list[float]:
    """Failure probabilities ``first * ratio**(k-1)`` for k = 1..n."""
    if n < 0:
        raise DomainError("n must be >= 0")
    if not 0.0 <= first <= 1.0:
        raise DomainError("first term must lie in [0, 1]")
    if not 0.0 < ratio <= 1.0:
        raise DomainError("ratio must lie in (0, 1]")
    out, p = [], first
    for _ in range(n):
        out.append(p)
        p *= ratio
    return out


# -- severities ----------------------------------------------------------------

SEVERITY_LEVELS = {
    1: "system or program inoperable",
    2: "major functions disabled or incorrect",
    3: "minor functions disabled or incorrect",
    4: "superficial error",
}


@dataclass(frozen=True)
class SeverityDistribution:
    levels: tuple[tuple[int, float], ...]

    def __post_init__(self):
        levels = tuple((int(k), float(s)) for k, s in self.levels)
        object.__setattr__(self, "levels", levels)
        ids = [k for k, _ in levels]
        if not levels or len(set(ids)) != len(ids) or any(k not in SEVERITY_LEVELS for k in ids):
            raise DomainError("severity levels must be distinct ids from 1..4")
        if any(not 0.0 <= s <= 1.0 for _, s in levels):
            raise DomainError("severity shares must lie in [0, 1]")
        if abs(math.fsum(s for _, s in levels) - 1.0) > 1e-9:
            raise DomainError("severity shares must sum to 1")

    @classmethod
    def from_percentages(cls, percentages: Mapping[int, float]) -> "SeverityDistribution":
        return cls(tuple((k, as_fraction(v)) for k, v in percentages.items()))


JONES_SEVERITY = SeverityDistribution.from_percentages({1: 10, 2: 40, 3: 30, 4: 20})
JONES_SEVERITY_ALTERNATIVE = SeverityDistribution.from_percentages({1: 3, 2: 15, 3: 60, 4: 22})


def effect_cost_expectation(dist: SeverityDistribution, unit_costs: Mapping[int, float]) -> float:
    """Expected failure effect cost given a cost per severity level."""
    missing = [k for k, _ in dist.levels if k not in unit_costs]
    if missing:
        raise UnknownIdError(f"no unit cost for severity level(s) {missing}")
    return math.fsum(share * unit_costs[k] for k, share in dist.levels)


# -- static analysis -----------------------------------------------------------

@dataclass(frozen=True)
class StaticAnalysisProfile:
    """Bug finding tools, as fractions.  False-positive ratios come from three
    Java tools; effectiveness is measured after removing false positives."""

    fp_lowest: float
    fp_mean: float
    fp_highest: float
    effectiveness_overall: float
    effectiveness_severest: float
    effectiveness_second_severest: float
    effectiveness_lower_severities: tuple[float, float]
    # interface consistency rules and anomaly analysis on a 28-fault program
    interface_rules_found: int = 2
    anomaly_analysis_found: int = 4
    known_faults: int = 28


def static_analysis_profile() -> StaticAnalysisProfile:
    return StaticAnalysisProfile(
        fp_lowest=as_fraction(31),
        fp_mean=as_fraction(66),
        fp_highest=as_fraction(96),
        effectiveness_overall=as_fraction(81),
        effectiveness_severest=as_fraction(22),
        effectiveness_second_severest=as_fraction(20),
        effectiveness_lower_severities=(as_fraction(70), as_fraction(88)),
    )


# -- CSV -----------------------------------------------------------------------

CSV_COLUMNS = ("key", "unit", "lowest", "mean", "median", "highest", "source_note")


def format_number(x: float) -> str:
    """Shortest round-trip text for ``x``, '.' as decimal separator."""
    text = repr(float(x))
    return text[:-2] if text.endswith(".0") else text


def export_csv(path, entries: Iterable[CalibrationEntry] | None = None) -> None:
    entries = DATASET.values() if entries is None else entries
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for e in sorted(entries, key=lambda e: e.key):
            writer.writerow([e.key, e.unit, *(format_number(v) for v in e.stats.as_tuple()), e.source_note])


def read_csv(path) -> list[CalibrationEntry]:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        _entry(r["key"], tuple(float(r[c]) for c in ("lowest", "mean", "median", "highest")),
               r["unit"], r["source_note"])
        for r in rows
    ]
