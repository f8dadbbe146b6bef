#!/usr/bin/env python3
"""Fit per-vehicle transition matrices so the bundled scenarios select their reference paths.

Only vehicle positions and speeds are known for the two reference scenarios;
the matrices actually used to produce the reference results are not. This
script starts from the default speed/lane matrices and moves them as little as
possible (squared distance) until the reference path is the unique argmax of
the cumulative reward, with every waypoint on it crash-free.

Support is restricted so the fitted chains stay plausible: speed may rise by at
most one range per step (any drop is allowed), lanes change by at most one per
step.

Requires torch (``pip install -e .[calibration]``). Writes
src/lanechange/data/scenario{1,2}.json plus *_default_matrices.json variants.

    python scripts/calibrate_scenarios.py [--steps 3000]
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import torch

from lanechange.crash import MPH, cumulative_distances, markov_steps, required_speed
from lanechange.markov import DEFAULT_LANE_MATRIX, DEFAULT_SPEED_MATRIX, N_SPEED_RANGES, SPEED_LABELS, speed_bin
from lanechange.paths import enumerate_paths, length_reward
from lanechange.scenario import run_scenario, scenario_from_dict

DATA = os.path.join(os.path.dirname(__file__), os.pardir, "src", "lanechange", "data")

BASES = {
    "scenario1": {
        "ego": {"start": [0, 0], "goal": [5, 4], "speed_mph": 30},
        "vehicles": [{"id": "C1", "start": [1, 0], "speed_mph": 30},
                     {"id": "C2", "start": [1, 2], "speed_mph": 35},
                     {"id": "C3", "start": [2, 3], "speed_mph": 30}],
        "target": [[0, 0], [1, 1], [1, 2], [2, 3], [3, 4], [4, 4], [5, 4]],
    },
    "scenario2": {
        "ego": {"start": [0, 0], "goal": [5, 4], "speed_mph": 15},
        "vehicles": [{"id": "C1", "start": [0, 1], "speed_mph": 20},
                     {"id": "C2", "start": [0, 2], "speed_mph": 15},
                     {"id": "C3", "start": [2, 3], "speed_mph": 10}],
        "target": [[0, 0], [0, 1], [1, 2], [1, 3], [2, 4], [3, 4], [4, 4], [5, 4]],
    },
}

GAMMA = 0.9
DECIMALS = 4
torch.set_default_dtype(torch.float64)


def crash_keys(doc):
    """Per path, per waypoint, per vehicle: index into a table of distinct crash events."""
    s = scenario_from_dict(doc)
    ps = enumerate_paths(s.grid, s.ego.start, s.ego.goal, s.actions)
    keys: dict = {}
    g_max = max(len(p) for p in ps)
    idx = np.full((len(ps), g_max, len(s.vehicles)), -1)
    for n, p in enumerate(ps):
        dist = cumulative_distances(s.grid, p)
        for q in range(1, len(p)):
            t = dist[q] / (s.ego.speed_mph * MPH)
            k = markov_steps(t, s.time_step_s)
            for vi, v in enumerate(s.vehicles):
                need = required_speed(s.grid, v, p.waypoints[q], t)
                if need.reachable:
                    key = (vi, k, speed_bin(v.speed_mph).index, speed_bin(need.mph).index,
                           v.start.lane, p.waypoints[q][1])
                    idx[n, q, vi] = keys.setdefault(key, len(keys))
    lengths = np.array([len(p) for p in ps])
    rt = np.array([length_reward(ps, p) for p in ps])
    return s, ps, list(keys), idx, lengths, rt


def fit(doc, target, steps, lr=0.05, margin=0.2):
    s, ps, keys, idx, lengths, rt = crash_keys(doc)
    target_id = next(p.id for p in ps if [list(w) for w in p.waypoints] == target)
    n_veh = len(s.vehicles)
    P0 = torch.tensor(DEFAULT_SPEED_MATRIX)
    Q0 = torch.tensor(DEFAULT_LANE_MATRIX)
    ii = torch.arange(N_SPEED_RANGES)
    speed_mask = torch.where(ii[None, :] <= ii[:, None] + 1, 0.0, -1e4)
    jj = torch.arange(Q0.shape[0])
    lane_mask = torch.where((jj[None, :] - jj[:, None]).abs() <= 1, 0.0, -1e4)
    logit_p = [torch.log(P0 + 1e-3).clone().requires_grad_(True) for _ in range(n_veh)]
    logit_q = [torch.log(Q0 + 1e-3).repeat(N_SPEED_RANGES, 1, 1).clone().requires_grad_(True)
               for _ in range(n_veh)]
    opt = torch.optim.Adam(logit_p + logit_q, lr=lr)

    idx_t = torch.tensor(idx)
    mask = torch.tensor((np.arange(idx.shape[1])[None, :] < lengths[:, None]).astype(float))
    weights = torch.tensor([0.0] + [GAMMA ** k for k in range(2, idx.shape[1] + 1)])
    rt_t, g_t = torch.tensor(rt), torch.tensor(lengths, dtype=torch.float64)
    ids = torch.arange(len(ps))
    # earlier ids win ties, so only they need a strict margin
    need = torch.where(ids < target_id, margin, 0.02 * margin)
    need[target_id] = -1e9

    for it in range(steps):
        Ps = [torch.softmax(x + speed_mask, dim=1) for x in logit_p]
        Qs = [torch.softmax(x + lane_mask, dim=2) for x in logit_q]
        pp, pq, vals = {}, {}, []
        for vi, k, a, b, la, lb in keys:
            if (vi, k) not in pp:
                pp[vi, k] = torch.linalg.matrix_power(Ps[vi], k)
            if (vi, b, k) not in pq:
                pq[vi, b, k] = torch.linalg.matrix_power(Qs[vi][b], k)
            vals.append(pp[vi, k][a, b] * pq[vi, b, k][la, lb])
        crash = torch.cat([torch.stack(vals), torch.zeros(1)])[idx_t]
        rc = (1 - crash.mean(dim=2)) * mask
        R = (rt_t / 3 + (rc * weights).sum(dim=1) / g_t) * 100
        violation = torch.relu(R - R[target_id] + need)
        drift = sum(((p - P0) ** 2).sum() for p in Ps) + sum(((q - Q0) ** 2).sum() for q in Qs)
        loss = (violation ** 2).sum() + drift + 100 * crash[target_id].sum()
        opt.zero_grad()
        loss.backward()
        opt.step()
        if it % 500 == 0 or it == steps - 1:
            r = R.detach()
            gap = float(r[target_id] - torch.cat([r[:target_id], r[target_id + 1:]]).max())
            print(f"  step {it:5d}  loss {float(loss):.5f}  gap {gap:+.5f}  drift {float(drift):.4f}", flush=True)
    return [p.detach().numpy() for p in Ps], [q.detach().numpy() for q in Qs]


def tidy(m: np.ndarray, floor=5e-4) -> np.ndarray:
    """Drop negligible entries, round, and put the rounding residue on each row's largest entry."""
    m = np.where(m < floor, 0.0, m)
    m = np.round(m / m.sum(axis=-1, keepdims=True), DECIMALS)
    flat = m.reshape(-1, m.shape[-1])
    for row in flat:
        j = int(np.argmax(row))
        row[j] = round(1.0 - (row.sum() - row[j]), DECIMALS)
    return flat.reshape(m.shape)


def scenario_doc(name, base, models=None):
    doc = {"name": name, "description": "", "ego": base["ego"], "vehicles": [], "gamma": GAMMA}
    default_q = np.array(DEFAULT_LANE_MATRIX)
    for vi, v in enumerate(base["vehicles"]):
        entry = dict(v)
        if models is not None:
            P, Qs = models[vi]
            entry["speed_matrix"] = P.tolist()
            entry["lane_matrices"] = {SPEED_LABELS[b]: Qs[b].tolist() for b in range(N_SPEED_RANGES)
                                      if not np.array_equal(Qs[b], default_q)}
        doc["vehicles"].append(entry)
    return doc


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--only", choices=sorted(BASES))
    args = ap.parse_args(argv)
    torch.manual_seed(0)
    ok = True
    for name, base in BASES.items():
        if args.only and name != args.only:
            continue
        plain = {"ego": base["ego"], "vehicles": base["vehicles"]}
        print(f"{name}: fitting")
        Ps, Qs = fit(plain, base["target"], args.steps)
        models = [(tidy(P), tidy(Q)) for P, Q in zip(Ps, Qs)]
        doc = scenario_doc(name, base, models)
        doc["description"] = ("Vehicle matrices fitted by scripts/calibrate_scenarios.py "
                              "(minimal change from the default matrices).")
        result = run_scenario(scenario_from_dict(doc))
        chosen = [list(w) for w in result.best.waypoints]
        hit = chosen == base["target"]
        ok &= hit
        hi, lo = result.reward_extrema
        print(f"{name}: best {chosen} {'matches' if hit else 'DOES NOT match'} target; "
              f"reward max {hi:.4f} min {lo:.4f}")
        with open(os.path.join(DATA, f"{name}.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        ref = scenario_doc(f"{name}_default_matrices", base)
        ref["description"] = "Same setup with the default speed and lane matrices for every vehicle."
        with open(os.path.join(DATA, f"{name}_default_matrices.json"), "w", encoding="utf-8") as fh:
            json.dump(ref, fh, indent=1)
            fh.write("\n")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
