"""``qaecon`` command line.

Exit codes: 0 success, 1 other errors (unknown factor, undefined
elasticity, ...), 2 unreadable or malformed input, 3 scenario validation
failure, 4 bad simulation settings, 5 infeasible budget.

Reports are CSV on stdout ('.' decimals, ',' separators, LF line ends).
"""
from __future__ import annotations

import argparse
import csv
import sys

from . import calibration
from .economics import CostBreakdown, evaluate_scenario
from .errors import (
    DomainError,
    InfeasibleBudgetError,
    QAEconError,
    ScenarioParseError,
    ScenarioValidationError,
    UnknownIdError,
)
from .model import Scenario
from .planner import Budget, optimize_effort, optimize_order, sensitivity_oat
from .scenario_io import load_scenario
from .simulator import SimulationConfig, SimulationResult, default_threads, simulate

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_VALIDATION, EXIT_SIMCONFIG, EXIT_BUDGET = 0, 1, 2, 3, 4, 5

REPORT_HEADER = ("quantity", "value", "unit", "provenance")
SENSITIVITY_HEADER = ("rank", "factor", "base_value", "roi_minus", "roi_plus", "elasticity")


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def fmt(x) -> str:
    """Report number format: 10 significant digits."""
    return f"{float(x):.10g}"


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def breakdown_rows(b: CostBreakdown, scenario: Scenario, provenance: str = "analytic") -> list[tuple]:
    cur = scenario.currency_unit
    rows = [
        ("direct", fmt(b.direct), cur, provenance),
        ("future", fmt(b.future), cur, provenance),
        ("revenue", fmt(b.revenue), cur, provenance),
        ("roi", "undefined" if b.roi is None else fmt(b.roi), "ratio", provenance),
    ]
    for ev in b.per_fault:
        for app_id, p in ev.p_detected_by.items():
            rows.append((f"p_detected_by.{ev.fault_id}.{app_id}", fmt(p), "probability", provenance))
        rows.append((f"p_predecessor_first.{ev.fault_id}", fmt(ev.p_predecessor_first), "probability", provenance))
        rows.append((f"p_escape.{ev.fault_id}", fmt(ev.p_escape), "probability", provenance))
    return rows


def simulation_rows(r: SimulationResult, scenario: Scenario) -> list[tuple]:
    cur = scenario.currency_unit
    rows = [("replications", str(r.replications), "count", "config"),
            ("seed", str(r.seed), "-", "config")]
    for name, unit in (("direct", cur), ("future", cur), ("revenue", cur), ("detected", "faults")):
        rows.append((f"mean_{name}", fmt(r.mean(name)), unit, f"simulated +/- {fmt(r.std_error(name))}"))
    for f in scenario.faults:
        freq = r.event_frequencies(f.id)
        for app_id, p in freq.p_detected_by.items():
            rows.append((f"freq_detected_by.{f.id}.{app_id}", fmt(p), "probability", "simulated"))
        rows.append((f"freq_predecessor_first.{f.id}", fmt(freq.p_predecessor_first), "probability", "simulated"))
        rows.append((f"freq_escape.{f.id}", fmt(freq.p_escape), "probability", "simulated"))
    return rows


def _load(path) -> Scenario:
    try:
        return load_scenario(path)
    except ScenarioParseError as exc:
        raise _Exit(EXIT_PARSE, f"parse error: {exc}") from None
    except DomainError as exc:
        raise _Exit(EXIT_VALIDATION, f"validation error: {exc}") from None


def _evaluate(scenario: Scenario) -> CostBreakdown:
    try:
        return evaluate_scenario(scenario, strict_roi=False)
    except ScenarioValidationError as exc:
        raise _Exit(EXIT_VALIDATION, "validation error:\n  " + "\n  ".join(map(str, exc.violations))) from None


def cmd_evaluate(args, out) -> int:
    scenario = _load(args.scenario)
    w = _writer(out)
    w.writerow(REPORT_HEADER)
    w.writerows(breakdown_rows(_evaluate(scenario), scenario))
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    scenario = _load(args.scenario)
    _evaluate(scenario)
    try:
        config = SimulationConfig(args.reps, args.seed)
        threads = default_threads() if args.threads is None else args.threads
        result = simulate(scenario, config, threads=threads)
    except DomainError as exc:
        raise _Exit(EXIT_SIMCONFIG, f"simulation settings: {exc}") from None
    w = _writer(out)
    w.writerow(REPORT_HEADER)
    w.writerows(simulation_rows(result, scenario))
    return EXIT_OK


def _parse_bound(text: str):
    try:
        app, _, rng = text.partition("=")
        lo, _, hi = rng.partition(":")
        return app, (float(lo), float(hi))
    except ValueError:
        raise _Exit(EXIT_PARSE, f"bad --bound {text!r}; expected APP=MIN:MAX") from None


def cmd_optimize(args, out) -> int:
    scenario = _load(args.scenario)
    _evaluate(scenario)
    rows = []
    if args.order:
        plan = optimize_order(scenario, max_permutations=args.max_permutations, objective=args.objective)
        scenario = scenario.reordered(plan.order)
        rows += [(f"order.{k + 1}", app, "position", plan.method) for k, app in enumerate(plan.order)]
        breakdown, value = plan.breakdown, plan.value
    if args.budget is not None:
        try:
            budget = Budget(args.budget, args.grid_step, dict(_parse_bound(b) for b in args.bound))
            plan = optimize_effort(scenario, budget, objective=args.objective)
        except InfeasibleBudgetError as exc:
            raise _Exit(EXIT_BUDGET, f"infeasible budget: {exc}") from None
        except UnknownIdError as exc:
            raise _Exit(EXIT_PARSE, str(exc)) from None
        except DomainError as exc:
            raise _Exit(EXIT_ERROR, str(exc)) from None
        rows += [(f"effort.{a}", fmt(t), scenario.effort_unit, plan.method) for a, t in plan.efforts.items()]
        scenario = scenario.with_efforts(plan.efforts)
        breakdown, value = plan.breakdown, plan.value
    rows.append(("objective." + args.objective, fmt(value), "ratio" if args.objective == "roi" else scenario.currency_unit,
                 "analytic"))
    w = _writer(out)
    w.writerow(REPORT_HEADER)
    w.writerows(rows + breakdown_rows(breakdown, scenario))
    return EXIT_OK


def cmd_sensitivity(args, out) -> int:
    scenario = _load(args.scenario)
    _evaluate(scenario)
    try:
        report = sensitivity_oat(scenario, factors=args.factor or None, delta=args.delta)
    except UnknownIdError as exc:
        raise _Exit(EXIT_PARSE, str(exc)) from None
    except DomainError as exc:
        raise _Exit(EXIT_ERROR, str(exc)) from None
    w = _writer(out)
    w.writerow(SENSITIVITY_HEADER)
    for k, e in enumerate(report.entries, start=1):
        w.writerow((k, e.factor, fmt(e.base_value), fmt(e.roi_minus), fmt(e.roi_plus), fmt(e.elasticity)))
    return EXIT_OK


def calibration_row(entry: calibration.CalibrationEntry) -> tuple:
    return (entry.key, entry.unit, *(calibration.format_number(v) for v in entry.stats.as_tuple()),
            entry.source_note)


def cmd_calibration(args, out) -> int:
    if args.action == "list":
        for key in calibration.dataset_keys():
            out.write(key + "\n")
    elif args.action == "show":
        try:
            entry = calibration.builtin_dataset(args.key)
        except UnknownIdError as exc:
            raise _Exit(EXIT_PARSE, str(exc)) from None
        w = _writer(out)
        w.writerow(calibration.CSV_COLUMNS)
        w.writerow(calibration_row(entry))
    else:
        try:
            calibration.export_csv(args.path)
        except OSError as exc:
            raise _Exit(EXIT_ERROR, f"cannot write {args.path}: {exc.strerror}") from None
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qaecon", description="Economics of defect-detection plans.")
    sub = p.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="expected costs, revenue and ROI")
    ev.add_argument("scenario")
    ev.set_defaults(func=cmd_evaluate)

    sim = sub.add_parser("simulate", help="Monte Carlo estimate of the same quantities")
    sim.add_argument("scenario")
    sim.add_argument("--reps", type=int, default=100_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: $QAECON_THREADS or 1); results do not depend on it")
    sim.set_defaults(func=cmd_simulate)

    opt = sub.add_parser("optimize", help="effort allocation and/or application order")
    opt.add_argument("scenario")
    opt.add_argument("--budget", type=float, default=None, help="total effort to distribute")
    opt.add_argument("--grid-step", type=float, default=1.0)
    opt.add_argument("--bound", action="append", default=[], metavar="APP=MIN:MAX")
    opt.add_argument("--order", action="store_true", help="also search the application order")
    opt.add_argument("--max-permutations", type=int, default=40320)
    opt.add_argument("--objective", choices=("roi", "net_benefit"), default="roi")
    opt.set_defaults(func=cmd_optimize)

    sens = sub.add_parser("sensitivity", help="one-at-a-time ROI elasticities")
    sens.add_argument("scenario")
    sens.add_argument("--delta", type=float, default=0.01)
    sens.add_argument("--factor", action="append", default=[], help="factor path; repeatable (default: all)")
    sens.set_defaults(func=cmd_sensitivity)

    cal = sub.add_parser("calibration", help="built-in survey data")
    cal_sub = cal.add_subparsers(dest="action", required=True)
    cal_sub.add_parser("list")
    show = cal_sub.add_parser("show")
    show.add_argument("key")
    export = cal_sub.add_parser("export")
    export.add_argument("path")
    cal.set_defaults(func=cmd_calibration)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "optimize" and args.budget is None and not args.order:
        parser.error("optimize needs --budget and/or --order")
    try:
        return args.func(args, out)
    except _Exit as exc:
        print(f"qaecon: {exc}", file=sys.stderr)
        return exc.code
    except QAEconError as exc:
        print(f"qaecon: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
