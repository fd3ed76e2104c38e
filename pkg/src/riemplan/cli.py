"""Command-line entry point: ``riemplan solve <file> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io
from .bvp import multi_start, shoot, validate_scenario
from .errors import (
    BarrierViolation,
    ConstraintCountError,
    CutLocusError,
    ScenarioError,
    SingularChartError,
    UnsupportedManifoldError,
)
from .potentials import potential_value
from .scenario import build_scenario, parse_scenario, set_key
from .verify import verify_solution

logger = logging.getLogger("riemplan")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2
INPUT_ERRORS = (
    ScenarioError,
    ConstraintCountError,
    BarrierViolation,
    SingularChartError,
    CutLocusError,
    UnsupportedManifoldError,
    ValueError,
)


def parse_sweep(text: str):
    """``key=a:b:steps`` -> (key, values)."""
    try:
        key, rng = text.split("=", 1)
        a, b, steps = rng.split(":")
        values = np.linspace(float(a), float(b), int(steps))
    except ValueError as exc:
        raise ScenarioError(f"bad --sweep {text!r}; expected key=a:b:steps") from exc
    if int(steps) < 1:
        raise ScenarioError("--sweep needs at least one step")
    return key.strip(), [float(v) for v in values]


def _prepare(sf):
    scenario = build_scenario(sf)
    validate_scenario(scenario)
    potential_value(scenario.bundle, scenario.manifold, scenario.boundary.p0)
    return scenario


def _run_record(label, scenario, solution, wall, verify):
    rec = {
        "label": label,
        "converged": solution.converged,
        "iterations": solution.iterations,
        "final_residual": solution.residual_norm,
        "J": solution.cost,
        "min_clearance": solution.clearance.as_dict() if solution.clearance else None,
        "wall_time": wall,
        "status": solution.diagnostics.get("status"),
    }
    if verify and solution.converged:
        rec["verify"] = verify_solution(scenario, solution)
    return rec


def _emit(out: Path, label, scenario, solution):
    name = scenario.manifold.name
    io.write_trajectory(out / f"{label}_trajectory.csv", name, solution.times, solution.jets)
    io.write_jets(out / f"{label}_jets.csv", name, solution.times, solution.jets)


def cmd_solve(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        sf = parse_scenario(args.file)
        variants = [(sf.name, sf)]
        if args.sweep:
            key, values = parse_sweep(args.sweep)
            variants = [(f"{sf.name}_sweep{k}", set_key(sf, key, v)) for k, v in enumerate(values)]
        prepared = [(label, _prepare(v)) for label, v in variants]
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    records = []
    if args.multi_start and args.multi_start > 1:
        label, scenario = prepared[0]
        t0 = time.perf_counter()
        results = multi_start(scenario, args.multi_start, workers=args.workers)
        wall = time.perf_counter() - t0
        for k, sol in results:
            if sol is None:
                records.append({"label": f"{label}_start{k}", "converged": False, "status": "failed"})
                continue
            rec = _run_record(f"{label}_start{k}", scenario, sol, wall, args.verify)
            rec["start"] = k
            records.append(rec)
            _emit(out, rec["label"], scenario, sol)
        ok = any(r["converged"] for r in records)
    else:

        def run(item):
            label, scenario = item
            t0 = time.perf_counter()
            sol = shoot(scenario)
            return label, scenario, sol, time.perf_counter() - t0

        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            done = list(pool.map(run, prepared))
        for label, scenario, sol, wall in done:
            records.append(_run_record(label, scenario, sol, wall, args.verify))
            _emit(out, label, scenario, sol)
        ok = all(r["converged"] for r in records)

    report = {"scenario": sf.name, "file": str(args.file), "runs": records}
    report_path = out / f"{sf.name}_report.json"
    report_path.write_text(json.dumps(report, indent=2, default=float))
    for r in records:
        if r.get("converged"):
            print(f"{r['label']}: converged, J={r['J']:.10g}, residual={r['final_residual']:.3e}")
        else:
            print(f"{r['label']}: NOT converged ({r.get('status')})")
    print(f"report written to {report_path}")
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riemplan", description="Collision-avoiding variational trajectories on manifolds")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="solve a scenario file")
    solve.add_argument("file", type=Path)
    solve.add_argument("--out", default="out", help="output directory (default: ./out)")
    solve.add_argument("--multi-start", type=int, default=0, metavar="N", help="solve from N jittered seeds")
    solve.add_argument("--sweep", default=None, metavar="KEY=A:B:STEPS", help="sweep a numeric scenario key")
    solve.add_argument("--verify", action="store_true", help="append residual, clearance and minimality checks")
    solve.add_argument("--workers", type=int, default=None, help="worker threads for sweeps and multi-start")
    solve.set_defaults(func=cmd_solve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
