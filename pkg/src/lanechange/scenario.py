"""Scenario documents, end-to-end planning runs and result export."""
from __future__ import annotations

import csv
import io
import json
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .crash import MPH, EgoState, VehicleSpec, cumulative_distances, markov_steps
from .grid import Action, GridPosition, RoadGrid
from .markov import (N_SPEED_RANGES, SPEED_LABELS, LayeredVehicleModel, NotStochastic, StochasticMatrix,
                     MAX_SPEED_MPH)
from .paths import ACTION_ORDER, PathSet, enumerate_paths, NoPath
from .reward import DEFAULT_GAMMA, NoPaths, PathEvaluation, evaluate_path, select_best_path


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class ValidationError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Scenario:
    grid: RoadGrid
    ego: EgoState
    vehicles: tuple[VehicleSpec, ...]
    gamma: float = DEFAULT_GAMMA
    time_step_s: float = 1.0
    empty_road: bool = False
    actions: tuple[Action, ...] = ACTION_ORDER
    name: str = ""


@dataclass(frozen=True)
class PlanResult:
    scenario: Scenario
    pathset: PathSet = field(repr=False)
    evaluations: tuple[PathEvaluation, ...] = field(repr=False)
    best: PathEvaluation

    @property
    def path_count(self) -> int:
        return len(self.evaluations)

    @property
    def reward_extrema(self) -> tuple[float, float]:
        rewards = [e.cumulative_reward for e in self.evaluations]
        return max(rewards), min(rewards)

    def ranked(self) -> list[PathEvaluation]:
        return sorted(self.evaluations, key=lambda e: (-e.cumulative_reward, e.path_id))


# --------------------------------------------------------------------------- parsing

_ACTION_NAMES = {a.name.lower(): a for a in Action}

_KEYS = {
    "": {"name", "description", "grid", "ego", "vehicles", "gamma", "time_step_s", "empty_road", "actions"},
    "grid": {"rows", "lanes", "cell_length_m", "cell_width_m"},
    "ego": {"start", "goal", "speed_mph"},
    "vehicle": {"id", "start", "speed_mph", "speed_matrix", "lane_matrices", "description"},
}


def _check_keys(obj: Mapping, kind: str, where: str) -> None:
    unknown = sorted(set(obj) - _KEYS[kind])
    if unknown:
        raise ValidationError(where, f"unknown field(s) {unknown}")


def _cell(value: Any, where: str, grid: RoadGrid) -> GridPosition:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
        raise ValidationError(where, f"expected [row, lane] integer pair, got {value!r}")
    if not grid.contains(value):
        raise ValidationError(where, f"cell {list(value)} outside {grid.rows}x{grid.lanes} grid")
    return GridPosition(*value)


def _number(obj: Mapping, key: str, where: str, default=None) -> float:
    if key not in obj:
        if default is None:
            raise ValidationError(f"{where}.{key}" if where else key, "required field missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{where}.{key}" if where else key, f"expected a number, got {v!r}")
    return float(v)


def _matrix(value: Any, where: str, n: int) -> StochasticMatrix:
    if (not isinstance(value, list) or len(value) != n
            or not all(isinstance(r, list) and len(r) == n for r in value)):
        raise ValidationError(where, f"expected a {n}x{n} nested array")
    try:
        return StochasticMatrix(value)
    except NotStochastic as exc:
        raise ValidationError(where, str(exc)) from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(where, f"non-numeric entry ({exc})") from None


def _vehicle_model(doc: Mapping, where: str, lanes: int) -> LayeredVehicleModel:
    default = LayeredVehicleModel.default()
    if "speed_matrix" in doc:
        speed = _matrix(doc["speed_matrix"], f"{where}.speed_matrix", N_SPEED_RANGES)
    else:
        speed = default.speed_matrix
    raw = doc.get("lane_matrices")
    if raw is None:
        lane = list(default.lane_matrices)
        explicit = set()
    elif isinstance(raw, list):
        if len(raw) != N_SPEED_RANGES:
            raise ValidationError(f"{where}.lane_matrices", f"expected {N_SPEED_RANGES} matrices, got {len(raw)}")
        lane = [_matrix(q, f"{where}.lane_matrices[{i}]", lanes) for i, q in enumerate(raw)]
        explicit = set(range(N_SPEED_RANGES))
    elif isinstance(raw, dict):
        lane = list(default.lane_matrices)
        explicit = set()
        for label, q in raw.items():
            if label not in SPEED_LABELS or len(label) != 1:
                raise ValidationError(f"{where}.lane_matrices.{label}", "key must be a speed range label A..L")
            idx = SPEED_LABELS.index(label)
            lane[idx] = _matrix(q, f"{where}.lane_matrices.{label}", lanes)
            explicit.add(idx)
    else:
        raise ValidationError(f"{where}.lane_matrices", "expected a list of 12 matrices or a label->matrix object")
    for i, q in enumerate(lane):
        if q.n != lanes:
            field_name = f"{where}.lane_matrices" + (f"[{i}]" if i in explicit else "")
            raise ValidationError(field_name, f"default lane matrix is {q.n}x{q.n} but the grid has {lanes} lanes; "
                                              "supply lane matrices explicitly")
    return LayeredVehicleModel(speed, tuple(lane))


def scenario_from_dict(doc: Mapping, name: str = "") -> Scenario:
    if not isinstance(doc, Mapping):
        raise ValidationError("<root>", "scenario must be a JSON object")
    _check_keys(doc, "", "<root>")
    g = doc.get("grid", {})
    if not isinstance(g, Mapping):
        raise ValidationError("grid", "expected an object")
    _check_keys(g, "grid", "grid")
    rows, lanes = _number(g, "rows", "grid", 6), _number(g, "lanes", "grid", 5)
    if rows != int(rows) or lanes != int(lanes) or rows < 1 or lanes < 1:
        raise ValidationError("grid", f"rows and lanes must be positive integers, got {rows}, {lanes}")
    length, width = _number(g, "cell_length_m", "grid", 10.0), _number(g, "cell_width_m", "grid", 4.0)
    if length <= 0 or width <= 0:
        raise ValidationError("grid", "cell dimensions must be positive")
    grid = RoadGrid(int(rows), int(lanes), length, width)

    e = doc.get("ego")
    if not isinstance(e, Mapping):
        raise ValidationError("ego", "required object missing")
    _check_keys(e, "ego", "ego")
    ego_speed = _number(e, "speed_mph", "ego")
    if not 0.0 < ego_speed <= MAX_SPEED_MPH:
        raise ValidationError("ego.speed_mph", f"{ego_speed} outside (0, {MAX_SPEED_MPH:g}]")
    ego = EgoState(_cell(e.get("start"), "ego.start", grid), _cell(e.get("goal"), "ego.goal", grid), ego_speed)

    raw_vehicles = doc.get("vehicles", [])
    if not isinstance(raw_vehicles, list):
        raise ValidationError("vehicles", "expected a list")
    vehicles = []
    occupied = {ego.start: "ego"}
    for n, v in enumerate(raw_vehicles):
        where = f"vehicles[{n}]"
        if not isinstance(v, Mapping):
            raise ValidationError(where, "expected an object")
        _check_keys(v, "vehicle", where)
        vid = str(v.get("id", f"C{n + 1}"))
        start = _cell(v.get("start"), f"{where}.start", grid)
        if start in occupied:
            raise ValidationError(f"{where}.start", f"cell {list(start)} already occupied by {occupied[start]}")
        occupied[start] = vid
        speed = _number(v, "speed_mph", where)
        if not 0.0 <= speed <= MAX_SPEED_MPH:
            raise ValidationError(f"{where}.speed_mph", f"{speed} outside [0, {MAX_SPEED_MPH:g}]")
        if vid in {x.id for x in vehicles}:
            raise ValidationError(f"{where}.id", f"duplicate vehicle id {vid!r}")
        vehicles.append(VehicleSpec(vid, start, speed, _vehicle_model(v, where, grid.lanes)))

    empty_road = doc.get("empty_road", False)
    if not isinstance(empty_road, bool):
        raise ValidationError("empty_road", "expected true or false")
    if not vehicles and not empty_road:
        raise ValidationError("vehicles", "no surrounding vehicles; set \"empty_road\": true for an empty road")
    if vehicles and empty_road:
        raise ValidationError("empty_road", "empty-road mode cannot list vehicles")

    gamma = _number(doc, "gamma", "", DEFAULT_GAMMA)
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError("gamma", f"{gamma} outside [0, 1]")
    step = _number(doc, "time_step_s", "", 1.0)
    if step <= 0:
        raise ValidationError("time_step_s", "must be positive")

    raw_actions = doc.get("actions")
    if raw_actions is None:
        actions = ACTION_ORDER
    else:
        if not isinstance(raw_actions, list) or not raw_actions:
            raise ValidationError("actions", "expected a non-empty list of action names")
        unknown = [a for a in raw_actions if a not in _ACTION_NAMES]
        if unknown:
            raise ValidationError("actions", f"unknown action(s) {unknown}; known: {sorted(_ACTION_NAMES)}")
        chosen = {_ACTION_NAMES[a] for a in raw_actions}
        actions = tuple(a for a in ACTION_ORDER if a in chosen)

    return Scenario(grid, ego, tuple(vehicles), gamma, step, empty_road, actions,
                    str(doc.get("name", name)))


def parse_scenario(source: str, name: str = "") -> Scenario:
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from None
    return scenario_from_dict(doc, name)


def load_scenario(path: str | os.PathLike) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text, name=os.path.splitext(os.path.basename(path))[0])


def scenario_to_dict(s: Scenario) -> dict:
    doc: dict[str, Any] = {}
    if s.name:
        doc["name"] = s.name
    doc["grid"] = {"rows": s.grid.rows, "lanes": s.grid.lanes,
                   "cell_length_m": s.grid.cell_length_m, "cell_width_m": s.grid.cell_width_m}
    doc["ego"] = {"start": list(s.ego.start), "goal": list(s.ego.goal), "speed_mph": s.ego.speed_mph}
    doc["vehicles"] = [
        {"id": v.id, "start": list(v.start), "speed_mph": v.speed_mph,
         "speed_matrix": v.model.speed_matrix.tolist(),
         "lane_matrices": [q.tolist() for q in v.model.lane_matrices]}
        for v in s.vehicles
    ]
    doc["gamma"] = s.gamma
    doc["time_step_s"] = s.time_step_s
    if s.empty_road:
        doc["empty_road"] = True
    if s.actions != ACTION_ORDER:
        doc["actions"] = [a.name.lower() for a in s.actions]
    return doc


def dump_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2)


# --------------------------------------------------------------------------- running

def run_scenario(s: Scenario, workers: int = 1) -> PlanResult:
    try:
        pathset = enumerate_paths(s.grid, s.ego.start, s.ego.goal, s.actions)
    except NoPath as exc:
        raise NoPaths(str(exc)) from None

    def evaluate(chunk):
        cache: dict = {}
        return [evaluate_path(s.grid, pathset, p, s.ego, s.vehicles, s.gamma, s.time_step_s, s.empty_road, cache)
                for p in chunk]

    paths = pathset.paths
    if workers <= 1:
        evaluations = evaluate(paths)
    else:
        size = -(-len(paths) // workers)
        chunks = [paths[i:i + size] for i in range(0, len(paths), size)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            evaluations = [e for part in pool.map(evaluate, chunks) for e in part]
    evaluations = tuple(evaluations)
    return PlanResult(s, pathset, evaluations, select_best_path(evaluations))


# --------------------------------------------------------------------------- export

def _fmt_cell(p) -> str:
    return f"({p[0]},{p[1]})"


def path_table(r: PlanResult) -> list[dict]:
    return [{"path_id": e.path_id, "waypoints": len(e.waypoints), "length_m": e.length_m,
             "length_reward": e.length_reward, "cumulative_reward": e.cumulative_reward,
             "path": " ".join(_fmt_cell(p) for p in e.waypoints)}
            for e in r.evaluations]


def waypoint_table(r: PlanResult) -> list[dict]:
    best = r.best
    dists = cumulative_distances(r.scenario.grid, r.pathset[best.path_id])
    speed = r.scenario.ego.speed_mph * MPH
    rows = []
    for q, (p, rc, shown) in enumerate(zip(best.waypoints, best.waypoint_rewards, best.display_rewards)):
        t = dists[q] / speed
        rows.append({"step": q, "waypoint": _fmt_cell(p), "reward": shown, "waypoint_reward": rc,
                     "distance_m": dists[q], "time_s": t,
                     "markov_steps": markov_steps(t, r.scenario.time_step_s) if q else 0})
    return rows


def length_histogram(r: PlanResult) -> list[dict]:
    """Path count per distinct length, with the length reward at that length."""
    counts = Counter((e.length_m, e.length_reward) for e in r.evaluations)
    return [{"length_m": length, "length_reward": reward, "paths": n}
            for (length, reward), n in sorted(counts.items())]


def summary(r: PlanResult) -> dict:
    hi, lo = r.reward_extrema
    lrs = [e.length_reward for e in r.evaluations]
    return {"scenario": r.scenario.name, "path_count": r.path_count,
            "best_path_id": r.best.path_id,
            "best_path": [list(p) for p in r.best.waypoints],
            "best_reward": r.best.cumulative_reward,
            "reward_max": hi, "reward_min": lo,
            "shortest_length_m": r.pathset.shortest_length_m,
            "longest_length_m": r.pathset.longest_length_m,
            "length_reward_max": max(lrs), "length_reward_min": min(lrs),
            "gamma": r.scenario.gamma}


TABLES = {"paths": path_table, "waypoints": waypoint_table, "length_rewards": length_histogram}


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def render_rows(rows: list[dict], fmt: str) -> str:
    if fmt == "csv":
        return _csv(rows)
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def export_results(r: PlanResult, fmt: str = "csv") -> dict[str, str]:
    """Serialize the three result tables plus a JSON summary, keyed by file name."""
    out = {f"{name}.{fmt}": render_rows(build(r), fmt) for name, build in TABLES.items()}
    out["summary.json"] = json.dumps(summary(r), indent=1) + "\n"
    return out


def write_results(r: PlanResult, out_dir: str | os.PathLike, fmt: str = "csv") -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for fname, text in export_results(r, fmt).items():
        target = os.path.join(out_dir, fname)
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(target)
    return written
