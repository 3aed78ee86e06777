"""Acceptance gate: every required end-to-end behavior, one line per check.

Run with -v to see one pass/fail line per criterion. Each test is
self-contained (its own oracles and tolerances) and uses only public APIs
plus the bundled fixture configs.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

import alspg.bench
from alspg.al import (
    ConstraintBlock,
    DenseMap,
    NlpProblem,
    al_gradient,
    al_value,
    reduce_inequalities,
)
from alspg.bench.problems import build_model, state_violation_fn
from alspg.bench.runner import apply_overrides, execute, load_config, load_suite, run_suite
from alspg.ilqr import IlqrOptions, ilqr_solve
from alspg.models import (
    ChanceConstraintMap,
    KinematicChainModel,
    PlanarArm,
    TaskSpaceGoalCost,
    robust_ik,
)
from alspg.sets import (
    Bounds,
    HyperplaneSlab,
    Point,
    PolytopeIn,
    PolytopeOut,
    QuadricAnnulus,
    RectangleIn,
    RectangleOut,
    SecondOrderCone,
    Stacked,
    rotated_rectangle_set,
)
from alspg.shooting import LinearizedDynamics, build_oc_problem, jac_transpose_vec
from alspg.spg import SpgOptions, spg_minimize

from test_ilqr import LinearModel, QuadCost, lqr_riccati_controls
from test_shooting import dense_control_jacobian

CONFIGS_DIR = Path(alspg.bench.__file__).parent / "configs"


# --------------------------------------------------------------- projection


def _projection_variants():
    rng = np.random.default_rng(41)
    slab_a = rng.standard_normal(3)
    poly_rows_in = tuple(
        (rng.standard_normal(3), float(rng.uniform(0.2, 1.0))) for _ in range(5)
    )
    poly_rows_out = tuple(
        (rng.standard_normal(2), float(rng.uniform(-0.3, 0.3))) for _ in range(3)
    )
    return [
        ("bounds", 3, Bounds(np.array([-1.0, -np.inf, 0.2]), np.array([1.0, 0.5, np.inf]))),
        ("point", 2, Point(np.array([0.3, -1.1]))),
        ("slab", 3, HyperplaneSlab(slab_a, -0.5, 1.2)),
        ("ball", 2, QuadricAnnulus(np.array([0.2, -0.1]), 0.0, 0.5)),
        ("annulus", 2, QuadricAnnulus(np.array([0.2, -0.1]), 0.1, 0.6)),
        ("cone", 3, SecondOrderCone()),
        ("rect_in", 2, RectangleIn(0.7)),
        ("rect_out", 2, RectangleOut(0.5)),
        ("poly_in", 3, PolytopeIn(poly_rows_in)),
        ("poly_out", 2, PolytopeOut(poly_rows_out)),
        ("rot_rect_out", 2, rotated_rectangle_set(
            np.array([0.3, 0.2]), 0.7, 0.8, 0.4, inside=False)),
        ("stacked", 6, Stacked(RectangleIn(0.6), count=3, block_dim=2)),
    ]


def test_projection_suite_membership_idempotence_and_optimality():
    t0 = time.perf_counter()
    for name, dim, s in _projection_variants():
        rng = np.random.default_rng(hash(name) % 2**32)
        feasible_pool = [s.project(rng.uniform(-3, 3, dim)) for _ in range(20)]
        for _ in range(1000):
            z = rng.uniform(-3.0, 3.0, dim)
            p = s.project(z)
            assert s.contains(p, tol=1e-9), f"{name}: projection left the set"
            again = s.project(p)
            assert float(np.max(np.abs(again - p))) <= 1e-9, f"{name}: not idempotent"
        # optimality oracles on a subsample (independent feasible witnesses)
        for _ in range(100):
            z = rng.uniform(-3.0, 3.0, dim)
            p = s.project(z)
            if s.is_convex:
                for y in feasible_pool[:5]:
                    assert float((z - p) @ (y - p)) <= 1e-8, f"{name}: VI violated"
            else:
                dz = float(np.linalg.norm(z - p))
                for y in feasible_pool:
                    assert dz <= float(np.linalg.norm(z - y)) + 1e-6, (
                        f"{name}: a feasible sample beats the projection"
                    )
    assert time.perf_counter() - t0 < 10.0


# ------------------------------------------------------ augmented Lagrangian


def test_al_gradient_matches_central_differences_on_random_problems():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    for _ in range(50):
        d = int(rng.integers(2, 7))
        Qh = rng.standard_normal((d, d))
        Q = Qh @ Qh.T + np.eye(d)
        b = rng.standard_normal(d)

        def f(x, Q=Q, b=b):
            return 0.5 * float(x @ Q @ x) + float(b @ x)

        def grad_f(x, Q=Q, b=b):
            return Q @ x + b

        blocks = []
        for _ in range(int(rng.integers(1, 4))):
            k = int(rng.integers(1, 5))
            G = rng.standard_normal((k, d))
            c = rng.standard_normal(k)
            g = DenseMap(k, lambda x, G=G, c=c: G @ x + c, lambda x, G=G: G)
            choice = rng.integers(0, 4)
            if choice == 0:
                target = Bounds(-np.abs(rng.standard_normal(k)), np.abs(rng.standard_normal(k)))
            elif choice == 1:
                target = HyperplaneSlab(rng.standard_normal(k) if k > 1 else np.ones(1), -0.4, 0.9)
            elif choice == 2 and k >= 2:
                target = SecondOrderCone()
            else:
                target = Point(rng.standard_normal(k))
            blocks.append(ConstraintBlock(
                g=g, set=target,
                lam=rng.standard_normal(k),
                rho=float(rng.uniform(0.5, 50.0)),
            ))

        problem = NlpProblem(f, grad_f, Bounds(np.full(d, -np.inf), np.full(d, np.inf)), blocks)
        x = rng.uniform(-1.5, 1.5, d)
        ga = al_gradient(problem, x)
        h = 1e-6
        gfd = np.empty(d)
        for i in range(d):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            gfd[i] = (al_value(problem, xp) - al_value(problem, xm)) / (2 * h)
        rel = float(np.max(np.abs(ga - gfd))) / max(1.0, float(np.max(np.abs(ga))))
        assert rel <= 1e-5
    assert time.perf_counter() - t0 < 30.0


def test_hinge_fold_zero_iff_every_row_feasible():
    rng = np.random.default_rng(13)
    total = 0
    zeros_seen = feasible_seen = 0
    for _ in range(100):
        d = int(rng.integers(2, 5))
        k = int(rng.integers(2, 7))
        A = rng.standard_normal((k, d))
        b = np.abs(rng.standard_normal(k)) * 0.5
        terms = [
            (lambda x, a=A[i], bi=b[i]: float(a @ x - bi), lambda x, a=A[i]: a)
            for i in range(k)
        ]
        fold = reduce_inequalities(terms)
        for _ in range(100):
            x = rng.standard_normal(d) * 0.6
            h = float(fold.value(x)[0])
            rows_ok = bool(np.all(A @ x - b <= 0.0))
            assert (h == 0.0) == rows_ok
            total += 1
            zeros_seen += h == 0.0
            feasible_seen += rows_ok
    assert total == 10_000
    assert 0 < zeros_seen < total  # both outcomes actually exercised


# ---------------------------------------------------------------- recursion


def test_adjoint_recursion_matches_dense_block_jacobian():
    t0 = time.perf_counter()
    rng = np.random.default_rng(23)
    for _ in range(100):
        T = int(rng.integers(1, 51))
        m = int(rng.integers(1, 6))
        n = int(rng.integers(1, 6))
        A_seq = rng.standard_normal((T, m, m))
        for t in range(T):  # keep products bounded so 1e-10 is meaningful
            A_seq[t] /= 1.0 + np.linalg.norm(A_seq[t], 2)
        B_seq = rng.standard_normal((T, m, n))
        lin = LinearizedDynamics(A_seq=A_seq, B_seq=B_seq)
        y = rng.standard_normal(T * m)
        z = jac_transpose_vec(lin, y)
        z_dense = dense_control_jacobian(lin).T @ y
        assert float(np.max(np.abs(z - z_dense))) <= 1e-10
    assert time.perf_counter() - t0 < 10.0


# ---------------------------------------------------------------------- spg


def test_unit_stepsize_reduces_to_projected_gradient():
    rng = np.random.default_rng(5)
    opts = SpgOptions(epsilon=1e-12, max_iters=15, gamma_min=1.0, gamma_max=1.0,
                      keep_iterates=True)
    for _ in range(20):
        d = int(rng.integers(2, 6))
        c = rng.uniform(-2, 2, d)
        box = Bounds(rng.uniform(-1.5, -0.5, d), rng.uniform(0.5, 1.5, d))

        def f(x, c=c):
            return 0.5 * float((x - c) @ (x - c))

        def grad(x, c=c):
            return x - c

        x0 = rng.uniform(-1, 1, d)
        _, rep = spg_minimize(f, grad, box, x0, opts, gamma0=1.0)
        for xk, xk1 in zip(rep.x_trace[:-1], rep.x_trace[1:]):
            d_dir = box.project(xk - 1.0 * grad(xk)) - xk
            expected = xk + 1.0 * d_dir
            assert np.array_equal(xk1, expected)


def test_spectral_stepsizes_stay_inside_curvature_band():
    H = np.diag([1.0, 10.0])
    dom = Bounds(np.full(2, -np.inf), np.full(2, np.inf))

    def f(x):
        return 0.5 * float(x @ H @ x)

    def grad(x):
        return H @ x

    rng = np.random.default_rng(2)
    opts = SpgOptions(epsilon=1e-10, max_iters=200, keep_iterates=True)
    for _ in range(10):
        x0 = rng.uniform(-3, 3, 2)
        _, rep = spg_minimize(f, grad, dom, x0, opts)
        assert rep.converged
        for xk, xk1 in zip(rep.x_trace[:-1], rep.x_trace[1:]):
            s = xk1 - xk
            if float(np.linalg.norm(s)) == 0.0:
                continue
            y = grad(xk1) - grad(xk)
            g1 = float(s @ s) / float(s @ y)
            g2 = float(s @ y) / float(y @ y)
            assert 0.1 - 1e-12 <= g1 <= 1.0 + 1e-12
            assert 0.1 - 1e-12 <= g2 <= 1.0 + 1e-12


# --------------------------------------------------------------------- ilqr


def test_ilqr_one_sweep_matches_riccati_oracle():
    rng = np.random.default_rng(77)
    A = np.eye(3) + 0.1 * rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 2))
    Q = np.diag([1.0, 0.6, 0.3])
    R = np.diag([0.5, 0.9])
    Qf = np.diag([8.0, 8.0, 8.0])
    x0 = np.array([0.7, -0.4, 0.2])
    T = 12
    u_ref = lqr_riccati_controls(A, B, Q, R, Qf, x0, T)
    traj, rep = ilqr_solve(LinearModel(A, B), x0, QuadCost(Q, R, Qf),
                           np.zeros((T, 2)), IlqrOptions(reg0=1e-12))
    assert float(np.max(np.abs(traj.controls - u_ref))) <= 1e-8
    assert rep.converged


# --------------------------------------------------------------- scaling law


def test_first_order_updates_grow_slower_with_horizon():
    t0 = time.perf_counter()
    arm = PlanarArm.three_link()
    model = KinematicChainModel(arm, dt=0.01)
    target = np.array([1.2, 0.8])
    x0 = np.array([0.3, -0.2, 0.1])
    horizons = [100, 500, 1000, 2000]

    def spg_time(T: int) -> float:
        cost = TaskSpaceGoalCost(arm, target, w_terminal=1.0, w_control=1e-3)
        prob = build_oc_problem(model, x0, cost, horizon=T)
        opts = SpgOptions(epsilon=1e-300, max_iters=25)
        tic = time.perf_counter()
        spg_minimize(prob.nlp.f, prob.nlp.grad_f, prob.nlp.domain,
                     np.zeros(T * 3), opts, counters=prob.counters)
        return time.perf_counter() - tic

    def ilqr_time(T: int) -> float:
        cost = TaskSpaceGoalCost(arm, target, w_terminal=1.0, w_control=1e-3)
        opts = IlqrOptions(tol=1e-300, max_iters=8)
        tic = time.perf_counter()
        ilqr_solve(model, x0, cost, np.zeros((T, 3)), opts)
        return time.perf_counter() - tic

    spg_time(100)  # warm both paths before timing
    ilqr_time(100)
    t_spg = [spg_time(T) for T in horizons]
    t_ilqr = [ilqr_time(T) for T in horizons]
    slope_spg = float(np.polyfit(horizons, t_spg, 1)[0])
    slope_ilqr = float(np.polyfit(horizons, t_ilqr, 1)[0])
    assert slope_spg < slope_ilqr, (t_spg, t_ilqr)
    assert time.perf_counter() - t0 < 300.0


# ----------------------------------------------------------------- push task


def test_push_planning_reaches_default_goal_pose():
    cfg = load_config(CONFIGS_DIR / "push" / "goal_default.json")
    rec = execute(cfg)
    assert rec.converged
    final = np.asarray(rec.solution["final_state"])
    goal = np.asarray(cfg.cost.goal)
    assert float(np.hypot(final[0] - goal[0], final[1] - goal[1])) <= 1e-2
    assert abs(final[2] - goal[2]) <= 0.05


def test_push_goal_batch_cost_spread_not_worse_than_baseline():
    path = CONFIGS_DIR / "suites" / "push_goals.json"
    res = run_suite(load_suite(path), base_dir=path.parent)
    assert res.exit_code == 0, [m.error for m in res.members if m.error]
    summary = res.summary()
    assert summary["alspg"]["count"] == 10 and summary["ilqr"]["count"] == 10
    assert summary["alspg"]["objective"]["std"] <= summary["ilqr"]["objective"]["std"]


def test_push_mpc_needs_fewer_evaluations_than_baseline():
    path = CONFIGS_DIR / "suites" / "push_mpc.json"
    res = run_suite(load_suite(path), base_dir=path.parent)
    assert res.exit_code == 0, [m.error for m in res.members if m.error]
    by_solver = {r.solver: r for r in res.records}
    assert by_solver["alspg"].counters["n_f"] < by_solver["ilqr"].counters["n_f"]
    assert by_solver["alspg"].counters["n_jac"] < by_solver["ilqr"].counters["n_jac"]


# ----------------------------------------------------------------- obstacles


def test_obstacle_ablation_projection_wins_jacobian_budget_collision_free():
    wins = 0
    for i in range(1, 6):
        cfg = load_config(CONFIGS_DIR / "obstacle_cars" / f"case{i}.json")
        violation = state_violation_fn(cfg, build_model(cfg.model))
        n_jac = {}
        for solver in ("alspg", "alspg_noproj"):
            rec = execute(apply_overrides(cfg, solver=solver))
            n_jac[solver] = rec.counters["n_jac"]
            worst = max(violation(np.asarray(s)) for s in rec.solution["states"])
            assert worst <= 1e-6, f"case{i}/{solver}: trajectory collides ({worst:.2e})"
        wins += n_jac["alspg"] < n_jac["alspg_noproj"]
    assert wins >= 4, f"projection solver won only {wins}/5 layouts"


# ----------------------------------------------------------------- robust ik


def test_robust_ik_monte_carlo_satisfaction_band():
    t0 = time.perf_counter()
    arm = PlanarArm.three_link()
    chance = ChanceConstraintMap(mu=np.array([0.0, 1.0]),
                                 sigma_sqrt=0.2 * np.eye(2), eta=0.8)
    q, rep = robust_ik(arm, np.array([0.8, -0.3, 0.4]), chance)
    assert rep.converged
    rate = chance.satisfaction_rate(arm.fk(q), n_samples=10_000, seed=0)
    assert 0.75 <= rate <= 1.0
    assert time.perf_counter() - t0 < 30.0


# ----------------------------------------------------------------------- mpc


def test_mpc_box_constraints_recover_after_disturbance():
    cfg = load_config(CONFIGS_DIR / "mpc" / "box_disturbance.json")
    rec = execute(cfg)
    assert rec.converged
    steps = rec.solution["steps"]
    hit = cfg.mpc.disturbance.step
    post = [s["constraint_violation"] for s in steps[hit + 1:]]
    assert max(post[:3]) > 1e-3, "disturbance never produced a violation"
    recovery = next(i for i, v in enumerate(post) if v <= 1e-3)
    assert recovery <= 100, f"violation stayed above 1e-3 for {recovery} steps"
    assert rec.solution["final_violation"] <= 1e-3


# ---------------------------------------------------------------- playground


def test_playground_drag_log_replays_without_the_ui():
    """Feeding the recorded drag log into a fresh service session must
    retrace the recorded joint trajectory exactly, with every outgoing
    message schema-valid and each drag segment settling below 1e-4."""
    from alspg.bench.schema import PlanarArmSpec
    from alspg.service.app import PlaygroundSession
    from alspg.service.protocol import message_adapter

    path = Path(__file__).resolve().parent.parent / "frontend" / "fixtures" / "drag_log.json"
    log = json.loads(path.read_text())
    assert log["protocol"] == "playground" and log["version"] == 1
    messages, recorded = log["messages"], log["replies"]
    assert len(messages) == len(recorded)

    session = PlaygroundSession(PlanarArmSpec())
    fresh = []
    segment_ends = []
    last_kind = None
    for i, msg in enumerate(messages):
        message_adapter.validate_python(msg)
        reply = session.handle(json.dumps(msg))
        fresh.append(json.loads(reply.model_dump_json()))
        if msg["type"] == "target":
            kind = msg["set"]["kind"]
            if last_kind is not None and kind != last_kind:
                segment_ends.append(i - 1)
            last_kind = kind
    segment_ends.append(len(messages) - 1)

    kinds = {m["set"]["kind"] for m in messages if m["type"] == "target"}
    assert kinds == {"point", "plane", "circle", "rectangle"}

    # determinism with the browser absent: same q, ee, and residual per tick
    # (elapsed_ms and the budget flag are wall time, so they are excluded)
    for new, old in zip(fresh, recorded):
        assert new["type"] == old["type"]
        if new["type"] == "state":
            assert new["q"] == old["q"]
            assert new["ee"] == old["ee"]
            assert new["residual"] == old["residual"]

    assert len(segment_ends) == 4
    for end in segment_ends:
        assert fresh[end]["type"] == "state"
        assert fresh[end]["residual"] <= 1e-4
