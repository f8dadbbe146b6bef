"""Command-line front end: plan, paths, validate-model, sample."""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources

from .markov import NotStochastic, StochasticMatrix, speed_bin
from .reward import NoPaths
from .scenario import (ParseError, ValidationError, load_scenario, path_table, render_rows, run_scenario, summary,
                       write_results)
from .validation import sample_chain, sample_layered

EXIT_OK, EXIT_INPUT, EXIT_NO_PATHS = 0, 1, 2


def bundled_scenario(name: str) -> str:
    """Filesystem path of a bundled scenario, e.g. ``scenario1``."""
    return str(resources.files("lanechange") / "data" / f"{name}.json")


def _unit_interval(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"gamma must be in [0, 1], got {v}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _scenario_arg(text: str) -> str:
    if text.startswith("bundled:"):
        return bundled_scenario(text.split(":", 1)[1])
    return text


def _load(args):
    s = load_scenario(args.scenario)
    if getattr(args, "gamma", None) is not None:
        s = dataclasses.replace(s, gamma=args.gamma)
    return s


def _fmt_path(waypoints) -> str:
    return "->".join(f"({i},{j})" for i, j in waypoints)


def cmd_plan(args) -> int:
    s = _load(args)
    result = run_scenario(s, workers=args.workers)
    best = result.best
    hi, lo = result.reward_extrema
    print(f"scenario: {s.name or args.scenario}")
    print(f"paths evaluated: {result.path_count}")
    print(f"best path (id {best.path_id}): {_fmt_path(best.waypoints)}")
    print(f"cumulative reward: {best.cumulative_reward:.4f}  (max {hi:.4f}, min {lo:.4f})")
    print("waypoint  reward")
    for p, v in zip(best.waypoints, best.display_rewards):
        print(f"({p[0]},{p[1]})  {v:.3f}")
    if args.top_k:
        print(f"top {args.top_k}:")
        for e in result.ranked()[:args.top_k]:
            print(f"  {e.path_id:5d}  {e.cumulative_reward:9.4f}  {e.length_m:8.4f} m  {_fmt_path(e.waypoints)}")
    if args.out:
        for f in write_results(result, args.out, args.format):
            print(f"wrote {f}")
    return EXIT_OK


def cmd_paths(args) -> int:
    s = _load(args)
    result = run_scenario(s, workers=args.workers)
    info = summary(result)
    print(f"path count: {info['path_count']}")
    print(f"shortest length: {info['shortest_length_m']:.4f} m")
    print(f"longest length: {info['longest_length_m']:.4f} m")
    print(f"length reward: max {info['length_reward_max']:.4f}, min {info['length_reward_min']:.4f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        target = os.path.join(args.out, f"paths.{args.format}")
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_rows(path_table(result), args.format))
        print(f"wrote {target}")
    return EXIT_OK


def _read_matrix(path: str):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if isinstance(doc, dict):
        doc = doc.get("matrix")
    return doc


def cmd_validate_model(args) -> int:
    if args.matrix:
        raw = _read_matrix(args.matrix)
        try:
            m = StochasticMatrix(raw)
        except NotStochastic as exc:
            print(json.dumps({"valid": False, "error": str(exc), "row": exc.row, "row_sum": exc.row_sum}, indent=1))
            return EXIT_INPUT
        except (TypeError, ValueError) as exc:
            print(json.dumps({"valid": False, "error": f"not a numeric matrix: {exc}"}, indent=1))
            return EXIT_INPUT
        sums = m.values.sum(axis=1)
        print(json.dumps({"valid": True, "n": m.n, "max_row_sum_error": float(abs(sums - 1).max())}, indent=1))
        return EXIT_OK
    s = load_scenario(args.scenario)  # validation errors surface as exit 1 in main()
    report = {"valid": True, "vehicles": [
        {"id": v.id, "speed_matrix_n": v.model.speed_matrix.n, "lane_matrices": len(v.model.lane_matrices),
         "lanes": v.model.lanes} for v in s.vehicles]}
    print(json.dumps(report, indent=1))
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.matrix:
        raw = _read_matrix(args.matrix)
        try:
            m = StochasticMatrix(raw)
        except (NotStochastic, TypeError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        rep = sample_chain(m, args.start, args.horizon, args.samples, args.seed, args.workers)
    else:
        s = load_scenario(args.scenario)
        vehicles = {v.id: v for v in s.vehicles}
        if not vehicles:
            print("error: scenario has no vehicles to sample", file=sys.stderr)
            return EXIT_INPUT
        vid = args.vehicle or next(iter(vehicles))
        if vid not in vehicles:
            print(f"error: no vehicle {vid!r}; have {sorted(vehicles)}", file=sys.stderr)
            return EXIT_INPUT
        v = vehicles[vid]
        rep = sample_layered(v.model, speed_bin(v.speed_mph).index, v.start.lane, args.horizon, args.samples,
                             args.seed, args.workers)
    doc = rep.to_dict()
    doc["tolerance"] = args.tolerance
    doc["passed"] = rep.max_abs_error <= args.tolerance
    text = json.dumps(doc, indent=1)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "sample_report.json"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK if doc["passed"] else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lanechange", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", type=_scenario_arg, required=scenario_required,
                       help="scenario JSON file, or bundled:<name> (e.g. bundled:scenario1)")
        p.add_argument("--out", help="directory for exported tables")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=_positive_int, default=1)

    p = sub.add_parser("plan", help="select the best path for a scenario")
    common(p)
    p.add_argument("--gamma", type=_unit_interval)
    p.add_argument("--top-k", type=_nonneg_int, default=0)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("paths", help="enumerate admissible paths")
    common(p)
    p.add_argument("--gamma", type=_unit_interval)
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("validate-model", help="check transition matrices")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--matrix", help="JSON nested array (or {\"matrix\": ...})")
    g.add_argument("--scenario", type=_scenario_arg)
    p.set_defaults(func=cmd_validate_model)

    p = sub.add_parser("sample", help="Monte Carlo check of a chain against its matrix powers")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--matrix")
    g.add_argument("--scenario", type=_scenario_arg)
    p.add_argument("--vehicle", help="vehicle id (layered sampling from a scenario)")
    p.add_argument("--start", type=_nonneg_int, default=0, help="start state (single-matrix mode)")
    p.add_argument("--horizon", type=_nonneg_int, default=1)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoPaths as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_PATHS


if __name__ == "__main__":
    sys.exit(main())
