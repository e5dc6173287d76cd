"""Command-line front end: check fairness, test efficiency, run solvers,
compute impossibility certificates, and reproduce the named scenarios.

Exit codes: 0 success / all checks passed, 1 a check or solve failed,
2 usage errors or unknown scenarios.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from famdiv.economy import Allocation, EconomyError, parse_allocation, parse_economy
from famdiv.equilibrium import restricted_equilibrium, tatonnement, verify_equilibrium
from famdiv.fairness import FairnessCriterion, check_fairness
from famdiv.pareto import ParetoStatus, pareto_oracle_grid, pareto_test_mrs
from famdiv.sampling import equal_split_allocation
from famdiv.scenarios import UnknownScenarioError, run_all, run_scenario, scenario_names
from famdiv.solvers import (
    PARETO_OPTIMALITY,
    ObjectiveSet,
    Region,
    SolverDiagnosticsError,
    certify_nonexistence,
    family_ee_solve,
    fs_welfare_max,
    leximin,
)

_CRITERIA = {c.value: c for c in FairnessCriterion}


def _load_economy(path: str):
    return parse_economy(Path(path).read_text(encoding="utf-8"))


def _load_allocation(path: str) -> Allocation:
    return parse_allocation(Path(path).read_text(encoding="utf-8"))


def _parse_bundle(text: str) -> np.ndarray:
    try:
        values = json.loads(text)
    except json.JSONDecodeError:
        values = [float(part) for part in text.split(",")]
    return np.asarray(values, dtype=float)


def _emit(doc: dict, as_json: bool, lines):
    if as_json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _cmd_check(args) -> int:
    econ = _load_economy(args.economy)
    alloc = _load_allocation(args.allocation)
    criterion = _CRITERIA[args.criterion]
    reference = _parse_bundle(args.reference) if args.reference else None
    report = check_fairness(econ, alloc, criterion, eps=args.eps, reference=reference)
    lines = [f"{criterion.value}: {'holds' if report.holds else 'violated'}"]
    lines += [
        f"  {w.who} vs {w.against if isinstance(w.against, str) else np.round(w.against, 6).tolist()}: gap {w.gap:.6g}"
        for w in report.witnesses
    ]
    _emit(report.to_dict(), args.json, lines)
    return 0 if report.holds else 1


def _cmd_pareto(args) -> int:
    econ = _load_economy(args.economy)
    alloc = _load_allocation(args.allocation)
    verdict = pareto_test_mrs(econ, alloc, eps=args.eps)
    doc = {"mrs_test": verdict.to_dict()}
    lines = [f"MRS test: {verdict.status.value}"
             + (f" (gap {verdict.mrs_gap:.6g})" if verdict.mrs_gap is not None else "")
             + (f" ({verdict.reason})" if verdict.reason else "")]
    optimal = verdict.status == ParetoStatus.OPTIMAL
    if args.grid:
        dominator = pareto_oracle_grid(econ, alloc, grid_n=args.grid, eps=args.eps)
        doc["grid_dominator"] = None if dominator is None else dominator.to_dict()
        lines.append(
            "grid oracle: no dominator" if dominator is None else f"grid oracle: dominated by {dominator.to_dict()['bundles']}"
        )
        optimal = optimal and dominator is None
    _emit(doc, args.json, lines)
    return 0 if optimal else 1


def _cmd_solve(args) -> int:
    econ = _load_economy(args.economy)
    if args.method == "leximin":
        result = leximin(econ, ObjectiveSet.INDIVIDUAL_NORMALIZED, Region.ALL)
        doc = result.to_dict()
        summary = f"leximin objective values: {np.round(result.objective_values, 6).tolist()}"
    elif args.method == "fs-welfare":
        alloc = fs_welfare_max(econ)
        doc = {"allocation": alloc.to_dict()}
        summary = f"welfare-maximal fair-share allocation over {econ.n_families} families"
    elif args.method == "family-ee":
        result = family_ee_solve(econ)
        doc = result.to_dict()
        summary = f"common family value {result.common_value:.6g}, reference scale {result.scale:.6g}"
    elif args.method == "equilibrium":
        trip = tatonnement(econ, equal_split_allocation(econ))
        if trip is None:
            print("price iteration did not converge", file=sys.stderr)
            return 1
        doc = {**trip.to_dict(), "report": verify_equilibrium(econ, trip, eps=1e-5).to_dict()}
        summary = f"equilibrium prices {doc['prices']}"
    else:  # restricted-equilibrium
        trip = restricted_equilibrium(econ)
        if trip is None:
            print("restricted price iteration did not converge or failed its checks", file=sys.stderr)
            return 1
        doc = {**trip.to_dict(), "report": verify_equilibrium(econ, trip, eps=1e-5, restricted=True).to_dict()}
        summary = f"restricted equilibrium prices {doc['prices']}"
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    _emit(doc, args.json, [summary])
    return 0


def _cmd_certify(args) -> int:
    econ = _load_economy(args.economy)
    criteria = []
    for name in args.criteria.split(","):
        name = name.strip()
        if name == PARETO_OPTIMALITY:
            criteria.append(PARETO_OPTIMALITY)
        elif name in _CRITERIA:
            criteria.append(_CRITERIA[name])
        else:
            print(f"unknown criterion {name!r}", file=sys.stderr)
            return 2
    cert = certify_nonexistence(econ, criteria, grid_n=args.grid)
    lines = [f"grid {g}: min joint violation {v:.6g}" for g, v in cert.history]
    _emit(cert.to_dict(), args.json, lines)
    return 0


def _cmd_repro(args) -> int:
    overrides = {}
    if args.grid:
        overrides["grid_n"] = args.grid
    if args.all:
        reports = run_all(overrides, parallel=args.parallel)
    else:
        reports = [run_scenario(name, overrides) for name in args.scenario]
    doc = [r.to_dict() for r in reports]
    lines = []
    for r in reports:
        lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name}")
        for a in r.assertions:
            mark = "ok" if a["passed"] else "FAILED"
            lines.append(f"    [{mark}] {a['assertion']}")
    _emit(doc if len(doc) > 1 else doc[0], args.json, lines)
    return 0 if all(r.passed for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="famdiv",
        description="Fair and efficient division of divisible goods among families.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="evaluate a fairness criterion on an allocation")
    check.add_argument("economy")
    check.add_argument("--allocation", required=True)
    check.add_argument("--criterion", required=True, choices=sorted(_CRITERIA))
    check.add_argument("--reference", help="reference bundle for the EE criteria, e.g. '0.5,0.5'")
    check.add_argument("--eps", type=float, default=1e-9)
    check.add_argument("--json", action="store_true")
    check.set_defaults(func=_cmd_check)

    pareto = sub.add_parser("pareto", help="test an allocation for Pareto optimality")
    pareto.add_argument("economy")
    pareto.add_argument("--allocation", required=True)
    pareto.add_argument("--grid", type=int, help="also run the brute-force grid oracle")
    pareto.add_argument("--eps", type=float, default=1e-9)
    pareto.add_argument("--json", action="store_true")
    pareto.set_defaults(func=_cmd_pareto)

    solve = sub.add_parser("solve", help="compute a fair efficient allocation")
    solve.add_argument("economy")
    solve.add_argument(
        "--method",
        required=True,
        choices=["leximin", "fs-welfare", "family-ee", "equilibrium", "restricted-equilibrium"],
    )
    solve.add_argument("--out", help="write the JSON result to a file")
    solve.add_argument("--json", action="store_true")
    solve.set_defaults(func=_cmd_solve)

    certify = sub.add_parser("certify", help="grid-certify joint impossibility of criteria")
    certify.add_argument("economy")
    certify.add_argument("--criteria", required=True,
                         help="comma-separated, e.g. 'individual-ne,pareto-optimality'")
    certify.add_argument("--grid", type=int, default=64)
    certify.add_argument("--json", action="store_true")
    certify.set_defaults(func=_cmd_certify)

    repro = sub.add_parser("repro", help="run the pinned reproduction scenarios")
    repro.add_argument("scenario", nargs="*", help=f"one of: {', '.join(scenario_names())}")
    repro.add_argument("--all", action="store_true")
    repro.add_argument("--parallel", action="store_true")
    repro.add_argument("--grid", type=int, help="override certificate grid resolution")
    repro.add_argument("--json", action="store_true")
    repro.set_defaults(func=_cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "repro" and not args.all and not args.scenario:
        parser.error("repro needs scenario names or --all")
    try:
        return args.func(args)
    except UnknownScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (EconomyError, FileNotFoundError) as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SolverDiagnosticsError as exc:
        print(f"solver failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
