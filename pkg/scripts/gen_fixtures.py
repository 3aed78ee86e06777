"""Generate the bundled benchmark fixtures.

Writes every committed config under src/alspg/bench/configs/. Layouts and
goal sets are seeded-random, so rerunning this script reproduces the same
files byte for byte. Run with --check to also screen each fixture against
the solvers it is meant for (slow; used before committing regenerated
fixtures).

Usage: python3 scripts/gen_fixtures.py [--check]
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

import numpy as np

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "alspg" / "bench" / "configs"

ARENA_START = (0.05, 0.05)
ARENA_GOAL = (0.95, 0.95)
PUSH_GOAL_DEFAULT = [0.1, 0.1, math.pi / 3]


def _write(rel: str, doc: dict) -> None:
    path = CONFIGS / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(CONFIGS.parents[3])}")


def _point_in_rect(p, center, length, width, angle, margin=0.0) -> bool:
    c, s = math.cos(angle), math.sin(angle)
    dx, dy = p[0] - center[0], p[1] - center[1]
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    return abs(lx) <= length / 2 + margin and abs(ly) <= width / 2 + margin


def sample_layout(seed: int, n_rect: int = 4) -> list[dict]:
    """Four rotated rectangles that leave the start and goal corners open."""
    rng = np.random.default_rng(seed)
    rects: list[dict] = []
    while len(rects) < n_rect:
        center = rng.uniform(0.2, 0.8, size=2)
        length = rng.uniform(0.15, 0.3)
        width = rng.uniform(0.08, 0.18)
        angle = rng.uniform(0.0, math.pi)
        if _point_in_rect(ARENA_START, center, length, width, angle, margin=0.07):
            continue
        if _point_in_rect(ARENA_GOAL, center, length, width, angle, margin=0.07):
            continue
        rects.append({
            "kind": "rectangle",
            "center": [round(float(center[0]), 4), round(float(center[1]), 4)],
            "length": round(float(length), 4),
            "width": round(float(width), 4),
            "angle": round(float(angle), 4),
            "region": "out",
        })
    return rects


def obstacle_case(index: int) -> dict:
    layout = sample_layout(seed=100 + index)
    return {
        "kind": "planning",
        "name": f"obstacle-case{index}",
        "model": {"name": "double_integrator", "dt": 0.05},
        "solver": "alspg",
        "seed": index,
        "horizon": 60,
        "x0": [ARENA_START[0], ARENA_START[1], 0.0, 0.0],
        "cost": {
            "goal": [ARENA_GOAL[0], ARENA_GOAL[1]],
            "goal_dims": [0, 1],
            "weights": [1.0, 1.0],
            "w_terminal": 0.1,
            "w_control": 1e-4,
        },
        "constraints": [
            {"dims": [0, 1], "set": rect, "times": "all"} for rect in layout
        ],
        "solver_options": {"tol": 1e-6, "max_outer": 30, "inner_max_iters": 60},
    }


def push_planning(goal, seed: int, name: str, solver: str) -> dict:
    doc = {
        "kind": "planning",
        "name": name,
        "model": {"name": "pusher_slider"},
        "solver": solver,
        "seed": seed,
        "horizon": 60,
        "x0": [0.0, 0.0, 0.0, 0.0],
        "cost": {
            "goal": [round(float(g), 6) for g in goal],
            "goal_dims": [0, 1, 2],
            "weights": [100.0, 100.0, 1.0],
            "w_terminal": 1.0,
            "w_control": 1e-4,
        },
        "u_init": [0.05, 0.0],
    }
    if solver == "alspg":
        doc["control_lower"] = [0.0, -0.1]
        doc["control_upper"] = [0.1, 0.1]
        doc["solver_options"] = {
            "tol": 1e-4, "max_outer": 10, "inner_tol": 1e-4, "inner_max_iters": 120,
        }
    else:
        doc["solver_options"] = {"max_iters": 120}
    return doc


def sample_push_goals(seed: int = 7, count: int = 10) -> list[list[float]]:
    rng = np.random.default_rng(seed)
    goals = []
    for _ in range(count):
        r = rng.uniform(0.06, 0.11)
        phi = rng.uniform(-0.6, 0.6)
        th = rng.uniform(0.3, 1.2)
        goals.append([float(r * math.cos(phi)), float(r * math.sin(phi)), float(th)])
    return goals


def push_mpc(solver: str) -> dict:
    doc = {
        "kind": "mpc",
        "name": f"push-mpc-{solver}",
        "model": {"name": "pusher_slider"},
        "solver": solver,
        "seed": 1,
        "horizon": 60,
        "x0": [0.0, 0.0, 0.0, 0.0],
        "cost": {
            "goal": [round(g, 6) for g in PUSH_GOAL_DEFAULT],
            "goal_dims": [0, 1, 2],
            "weights": [100.0, 100.0, 4.0],
            "w_terminal": 1.0,
            "w_running": 0.2,
            "w_control": 1e-4,
        },
        "u_init": [0.05, 0.0],
        "mpc": {"steps": 42},
    }
    if solver == "alspg":
        doc["control_lower"] = [0.0, -0.1]
        doc["control_upper"] = [0.1, 0.1]
        doc["solver_options"] = {
            "tol": 2e-2, "max_outer": 2, "inner_tol": 2e-2, "inner_max_iters": 10,
            "rho0": 10.0, "rho_max": 1e4,
        }
    else:
        doc["solver_options"] = {"max_iters": 25}
    return doc


def box_disturbance() -> dict:
    return {
        "kind": "mpc",
        "name": "box-disturbance",
        "model": {"name": "kinematic_chain", "dt": 0.05},
        "solver": "alspg",
        "seed": 5,
        "horizon": 50,
        "x0": [0.4, 0.3, -0.2],
        "cost": {
            "goal": [1.9, 0.6],
            "task_space": True,
            "w_terminal": 1.0,
            "w_running": 0.1,
            "w_control": 1e-4,
        },
        "ee_set": {"kind": "box", "lower": [0.2, -0.1], "upper": [2.2, 0.9]},
        "ee_times": [5, 10, 15, 20, 25, 30, 35, 40, 45, 50],
        "control_lower": [-1.5, -1.5, -1.5],
        "control_upper": [1.5, 1.5, 1.5],
        "solver_options": {
            "tol": 1e-4, "max_outer": 3, "inner_tol": 1e-4, "inner_max_iters": 20,
            "rho0": 10.0, "rho_max": 1e4,
        },
        "mpc": {"steps": 70, "disturbance": {"step": 25, "delta": [0.35, -0.25, 0.3]}},
    }


def chain_reach(horizon: int, solver: str) -> dict:
    doc = {
        "kind": "planning",
        "name": f"chain-reach-T{horizon}-{solver}",
        "group": solver,
        "model": {"name": "kinematic_chain", "dt": 0.01},
        "solver": solver,
        "seed": 0,
        "horizon": horizon,
        "x0": [0.0, 0.0, 0.0],
        "cost": {
            "goal": [1.2, 0.8],
            "task_space": True,
            "w_terminal": 1.0,
            "w_control": 1e-3,
        },
    }
    if solver == "spg":
        doc["solver_options"] = {"tol": 1e-4, "max_iters": 300}
    else:
        doc["solver_options"] = {"max_iters": 100}
    return doc


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--check", action="store_true",
                        help="run each fixture against its solvers before writing")
    args = parser.parse_args()

    cases = [obstacle_case(i) for i in range(1, 6)]
    for case in cases:
        _write(f"obstacle_cars/case{case['seed']}.json", case)

    _write("push/goal_default.json",
           push_planning(PUSH_GOAL_DEFAULT, seed=1, name="push-goal-default", solver="alspg"))

    _write("mpc/push_mpc_alspg.json", push_mpc("alspg"))
    _write("mpc/push_mpc_ilqr.json", push_mpc("ilqr"))
    _write("mpc/box_disturbance.json", box_disturbance())

    # Ablation suite: each layout under both the projection solver and the
    # folded-inequality ablation, identical budgets.
    _write("suites/obstacle_ablation.json", {
        "name": "obstacle-ablation",
        "configs": [
            {"config": f"../obstacle_cars/case{i}.json", "solver": solver,
             "group": group, "name": f"case{i}-{group}"}
            for i in range(1, 6)
            for solver, group in (("alspg", "proj"), ("alspg_noproj", "woproj"))
        ],
    })

    goals = sample_push_goals()
    _write("suites/push_goals.json", {
        "name": "push-goals",
        "configs": [
            {**push_planning(goal, seed=i, name=f"push-goal{i:02d}-{solver}", solver=solver),
             "group": solver}
            for i, goal in enumerate(goals)
            for solver in ("alspg", "ilqr")
        ],
    })

    _write("suites/push_mpc.json", {
        "name": "push-mpc",
        "configs": ["../mpc/push_mpc_alspg.json", "../mpc/push_mpc_ilqr.json"],
    })

    _write("suites/horizon_scaling.json", {
        "name": "horizon-scaling",
        "configs": [
            chain_reach(horizon, solver)
            for horizon in (100, 500, 1000)
            for solver in ("spg", "ilqr")
        ],
    })

    if args.check:
        check(cases)


def check(cases: list[dict]) -> None:
    """Screen the generated fixtures: solve each and print the key numbers."""
    from alspg.bench.problems import run_config, state_violation_fn, build_model
    from alspg.bench.schema import ProblemConfig

    print("\n-- obstacle cases (proj vs woproj) --")
    for case in cases:
        results = {}
        for solver in ("alspg", "alspg_noproj"):
            cfg = ProblemConfig.model_validate({**case, "solver": solver})
            out = run_config(cfg)
            viol = state_violation_fn(cfg, build_model(cfg.model))
            traj_viol = max(viol(np.asarray(s)) for s in out.solution["states"])
            results[solver] = (out.report.counters.n_jac, out.report.f, traj_viol)
        (j1, f1, v1), (j2, f2, v2) = results["alspg"], results["alspg_noproj"]
        flag = "OK " if j1 < j2 and v1 <= 1e-6 else "BAD"
        print(f"{flag} {case['name']}: proj n_jac={j1} f={f1:.4g} viol={v1:.2g} | "
              f"woproj n_jac={j2} f={f2:.4g} viol={v2:.2g}")


if __name__ == "__main__":
    main()
