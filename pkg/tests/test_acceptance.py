"""Acceptance criteria, one test each. Every test prints a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even with
output capture on) or directly with ``python tests/test_acceptance.py``.

Criteria 2 and 4 fail with the default geometry and the reward formula as
implemented; see README.md ("Known deviations") for the analysis.
"""
import contextlib
import io
import itertools
import pathlib
import re
import sys
import tempfile
import time
from fractions import Fraction

import numpy as np
import pytest

from lanechange.cli import bundled_scenario, main
from lanechange.crash import crash_probability
from lanechange.grid import Action, GridPosition, RoadGrid, action_between
from lanechange.markov import DEFAULT_LANE_MATRIX, DEFAULT_SPEED_MATRIX, EXAMPLE_3STATE, StochasticMatrix
from lanechange.paths import ACTION_ORDER, NoPath, enumerate_paths, length_reward
from lanechange.scenario import export_results, load_scenario, run_scenario, write_results
from lanechange.validation import sample_chain

sys.path.insert(0, str(pathlib.Path(__file__).parent))
from oracles import brute_force_paths  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parents[1]
S1_PATH = [(0, 0), (1, 1), (1, 2), (2, 3), (3, 4), (4, 4), (5, 4)]
S2_PATH = [(0, 0), (0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 4), (5, 4)]
S1_WAYPOINT_VALUES = [1, 0.898, 0.809, 0.729, 0.656, 0.590, 0.531]
S2_WAYPOINT_VALUES = [1, 0.898, 0.799, 0.729, 0.656, 0.590, 0.531, 0.478]
FOUR_ACTIONS = tuple(a for a in ACTION_ORDER if a is not Action.LATERAL_LEFT)

_cache = {}


def result(name):
    if name not in _cache:
        _cache[name] = run_scenario(load_scenario(bundled_scenario(name)))
    return _cache[name]


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line, flush=True)
    return line


def criterion_01_path_count():
    g = RoadGrid()
    t0 = time.perf_counter()
    ps = enumerate_paths(g, (0, 0), (5, 4))
    elapsed = time.perf_counter() - t0
    four = len(enumerate_paths(g, (0, 0), (5, 4), FOUR_ACTIONS))
    oracle = len(brute_force_paths(g, (0, 0), (5, 4)))
    readme = (ROOT / "README.md").read_text(encoding="utf-8")
    documented = "4763" in readme and "1921" in readme
    # The five-action filter counts 4763; the reported 1921 is reproduced exactly by
    # the four-action set without left lateral moves. The deviation is documented.
    ok = len(ps) == oracle == 4763 and four == 1921 and documented and elapsed < 1.0
    return 1, ok, (f"five actions -> {len(ps)} paths (oracle {oracle}, documented deviation {documented}); "
                   f"four actions without lateral_left -> {four} (target 1921); enumeration {elapsed:.3f} s")


def criterion_02_length_reward_extrema():
    g = RoadGrid()
    ps = enumerate_paths(g, (0, 0), (5, 4))
    rewards = [length_reward(ps, p) for p in ps]
    hi, lo = max(rewards), min(rewards)
    alt = RoadGrid(cell_length_m=5.0)
    ps5 = enumerate_paths(alt, (0, 0), (5, 4))
    lo5 = min(length_reward(ps5, p) for p in ps5)
    ok = hi == 1.0 and abs(lo - 0.22) <= 0.005
    return 2, ok, (f"max {hi!r} (target 1.0), min {lo:.4f} (target 0.22 +/- 0.005) with 10 m x 4 m cells; "
                   f"for reference a 5 m cell length gives min {lo5:.4f}")


def _plan_output(name):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(["plan", "--scenario", f"bundled:{name}"])
    return code, buf.getvalue()


def _printed_path(out):
    m = re.search(r"best path \(id \d+\): (\S+)", out)
    return [tuple(map(int, c)) for c in re.findall(r"\((\d+),(\d+)\)", m.group(1))] if m else None


def criterion_03_scenario_paths():
    c1, out1 = _plan_output("scenario1")
    c2, out2 = _plan_output("scenario2")
    p1, p2 = _printed_path(out1), _printed_path(out2)
    ok = c1 == 0 and c2 == 0 and p1 == S1_PATH and p2 == S2_PATH
    return 3, ok, (f"scenario1 -> {p1 == S1_PATH and 'reference path' or p1}, "
                   f"scenario2 -> {p2 == S2_PATH and 'reference path' or p2} (calibrated bundled matrices)")


def criterion_04_reward_extrema():
    targets = {"scenario1": (46.21, 20.34), "scenario2": (43.58, 19.91)}
    parts, ok = [], True
    for name, (tmax, tmin) in targets.items():
        hi, lo = result(name).reward_extrema
        ok &= abs(hi - tmax) <= 2.0 and abs(lo - tmin) <= 2.0
        parts.append(f"{name} max {hi:.2f}/min {lo:.2f} (target {tmax}/{tmin} +/- 2.0)")
    return 4, ok, "; ".join(parts)


def criterion_05_waypoint_decay():
    ok, parts = True, []
    for name, table in (("scenario1", S1_WAYPOINT_VALUES), ("scenario2", S2_WAYPOINT_VALUES)):
        shown = result(name).best.display_rewards
        ratios = [b / a for a, b in zip(shown, shown[1:])]
        rows_ok = len(shown) == len(table) and all(abs(s - t) <= 0.05 for s, t in zip(shown, table))
        this = shown[0] == 1.0 and all(abs(r - 0.9) <= 0.02 for r in ratios) and rows_ok
        ok &= this
        worst = max(abs(s - t) for s, t in zip(shown, table))
        parts.append(f"{name} start {shown[0]:g}, ratios {min(ratios):.3f}..{max(ratios):.3f}, "
                     f"max table deviation {worst:.3f}")
    return 5, ok, "; ".join(parts)


def criterion_06_oracle_equivalence():
    mismatches = checked = 0
    for rows, lanes in itertools.product(range(1, 5), range(1, 5)):
        g = RoadGrid(rows, lanes)
        cells = [(i, j) for i in range(rows) for j in range(lanes)]
        for s, t in itertools.product(cells, cells):
            try:
                got = {tuple(map(tuple, p.waypoints)) for p in enumerate_paths(g, s, t)}
            except NoPath:
                got = set()
            mismatches += got != brute_force_paths(g, s, t)
            checked += 1
    return 6, mismatches == 0, f"{checked} grid/start/goal cases, {mismatches} mismatches"


def criterion_07_matrix_powers():
    m = StochasticMatrix(EXAMPLE_3STATE)
    exact = [[Fraction(x).limit_denominator(100) for x in row] for row in EXAMPLE_3STATE]
    p00 = sum(exact[0][k] * exact[k][0] for k in range(3))
    first = p00 == Fraction(17, 40) and abs(m.power(2)[0, 0] - float(p00)) <= 1e-12
    worst = 0.0
    for raw in (DEFAULT_SPEED_MATRIX, DEFAULT_LANE_MATRIX):
        sm = StochasticMatrix(raw)
        for k in range(65):
            pk = sm.power(k)
            worst = max(worst, float(np.abs(pk.sum(axis=1) - 1).max()))
            first &= bool(pk.min() >= 0)
    ok = first and worst <= 1e-9
    return 7, ok, f"P^2[0,0] = {float(m.power(2)[0, 0])!r} (exact {p00}); worst row-sum error k<=64: {worst:.2e}"


def criterion_08_monte_carlo():
    worst, reproducible, runs = 0.0, True, 0
    for raw in (EXAMPLE_3STATE, DEFAULT_SPEED_MATRIX, DEFAULT_LANE_MATRIX):
        m = StochasticMatrix(raw)
        for start in range(m.n):
            for h in range(1, 6):
                rep = sample_chain(m, start, h, 100_000, seed=1000 + 10 * start + h)
                worst = max(worst, rep.max_abs_error)
                runs += 1
        again = sample_chain(m, 0, 5, 100_000, seed=7)
        reproducible &= again == sample_chain(m, 0, 5, 100_000, seed=7, workers=3)
    ok = worst <= 0.01 and reproducible
    return 8, ok, (f"{runs} chains x 100000 samples, max abs error {worst:.4f} (limit 0.01); "
                   f"bit-exact under fixed seed: {reproducible}")


def _path_ok(g, p, s, t):
    w = p.waypoints
    steps = [action_between(a, b) for a, b in zip(w, w[1:])]
    return (w[0] == s and w[-1] == t and len(set(w)) == len(w) and all(g.contains(c) for c in w)
            and all(b[0] >= a[0] for a, b in zip(w, w[1:]))
            and not any(x.is_lateral and y.is_lateral for x, y in zip(steps, steps[1:])))


def criterion_09_properties():
    g = RoadGrid()
    bad_paths = sum(not _path_ok(g, p, (0, 0), (5, 4)) for p in enumerate_paths(g, (0, 0), (5, 4)))
    bad_prob = 0
    n_prob = 0
    for name in ("scenario1", "scenario2"):
        s = load_scenario(bundled_scenario(name))
        for v in s.vehicles:
            for i, j in itertools.product(range(g.rows), range(g.lanes)):
                for t in np.linspace(0.1, 12.0, 60):
                    p = crash_probability(g, v, GridPosition(i, j), float(t))
                    bad_prob += not 0.0 <= p <= 1.0
                    n_prob += 1
        bad_prob += sum(not 0.0 <= r <= 1.0 for e in result(name).evaluations for r in e.waypoint_rewards)
    s1 = load_scenario(bundled_scenario("scenario1"))
    base = export_results(run_scenario(s1))
    identical = all(export_results(run_scenario(s1, workers=w)) == base for w in (1, 2, 4))
    ok = bad_paths == 0 and bad_prob == 0 and identical
    return 9, ok, (f"path invariant violations {bad_paths}; out-of-range probabilities/rewards {bad_prob} "
                   f"({n_prob} crash probabilities sampled); exports byte-identical across runs/workers: {identical}")


def criterion_10_runtime():
    t0 = time.perf_counter()
    r = run_scenario(load_scenario(bundled_scenario("scenario1")))
    with tempfile.TemporaryDirectory() as d:
        write_results(r, d, "csv")
    elapsed = time.perf_counter() - t0
    return 10, elapsed < 5.0, f"full scenario1 pipeline {elapsed:.2f} s (limit 5 s)"


CRITERIA = [fn for name, fn in sorted(globals().items()) if name.startswith("criterion_")]


@pytest.mark.parametrize("check", CRITERIA, ids=[fn.__name__ for fn in CRITERIA])
def test_acceptance(check, capsys):
    n, ok, detail = check()
    with capsys.disabled():
        print()
        line = report(n, ok, detail)
    assert ok, line


if __name__ == "__main__":
    results = [check() for check in CRITERIA]
    for n, ok, detail in results:
        report(n, ok, detail)
    sys.exit(0 if all(ok for _, ok, _ in results) else 1)
