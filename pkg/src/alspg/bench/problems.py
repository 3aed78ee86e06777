"""Turn validated configs into runnable problems and run them.

This is the bridge between the declarative schema and the solver API: set
descriptors become projection sets, model specs become dynamics models,
and each problem kind gets a runner that returns a SolveReport plus a
JSON-ready solution document.

The alspg_noproj solver is the no-projection ablation: every state
constraint is folded into a single scalar equality (the sum of inequality
violations) handled through the constraint function instead of through
projections. Both variants share the rollout/linearization cache, so their
work counters are directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..al import AlspgOptions, alspg_solve
from ..ilqr import IlqrOptions, ilqr_solve
from ..models import (
    ChanceConstraintMap,
    DoubleIntegrator2D,
    KinematicChainModel,
    PlanarArm,
    PusherSlider,
    TaskSpaceGoalCost,
    constrained_ik,
    robust_ik,
)
from ..report import Counters, SolveReport, Termination
from ..sets import (
    Bounds,
    HyperplaneSlab,
    Point,
    ProjectionSet,
    QuadricAnnulus,
    Stacked,
    rotated_rectangle_set,
    rotation2d,
)
from ..shooting import (
    ExtraConstraint,
    GoalCost,
    MpcStepRecord,
    OutputConstraint,
    ShootingProblem,
    build_oc_problem,
    mpc_loop,
    state_indices,
)
from ..spg import SpgOptions, spg_minimize
from . import schema
from .schema import ProblemConfig, SetSpec, StateConstraintSpec


# ------------------------------------------------------------------ builders


def build_arm(spec) -> PlanarArm:
    lengths = tuple(spec.link_lengths)
    if getattr(spec, "joint_limit", None) is None:
        return PlanarArm(lengths)
    n = len(lengths)
    lim = float(spec.joint_limit)
    return PlanarArm(lengths, joint_limits=Bounds(np.full(n, -lim), np.full(n, lim)))


def build_model(spec):
    if spec.name == "kinematic_chain":
        return KinematicChainModel(build_arm(spec), dt=spec.dt)
    if spec.name == "double_integrator":
        return DoubleIntegrator2D(dt=spec.dt)
    if spec.name == "pusher_slider":
        return PusherSlider(
            half_length=spec.half_length,
            half_width=spec.half_width,
            mu_c=spec.mu_contact,
            c=spec.limit_surface_c,
            dt=spec.dt,
        )
    raise ValueError(f"{spec.name} is not a dynamics model")


def build_set(spec: SetSpec) -> ProjectionSet:
    if spec.kind == "point":
        return Point(np.asarray(spec.target, dtype=float))
    if spec.kind == "plane":
        a = np.asarray(spec.normal, dtype=float)
        if spec.side == "on":
            return HyperplaneSlab(a, spec.offset, spec.offset)
        if spec.side == "below":
            return HyperplaneSlab(a, -np.inf, spec.offset)
        return HyperplaneSlab(a, spec.offset, np.inf)
    if spec.kind == "circle":
        c = np.asarray(spec.center, dtype=float)
        return QuadricAnnulus(c, 0.5 * spec.r_inner**2, 0.5 * spec.r_outer**2)
    if spec.kind == "rectangle":
        return rotated_rectangle_set(
            spec.center, spec.angle, spec.length, spec.width, inside=spec.region == "in"
        )
    lo = np.array([-np.inf if v is None else v for v in spec.lower], dtype=float)
    hi = np.array([np.inf if v is None else v for v in spec.upper], dtype=float)
    return Bounds(lo, hi)


def _times_list(times, T: int) -> list[int]:
    if times == "all":
        return list(range(1, T + 1))
    if times == "last":
        return [T]
    return [int(t) for t in times]


def _constraint_times(c: StateConstraintSpec, T: int) -> list[int]:
    return _times_list(c.times, T)


def state_blocks_from_config(config: ProblemConfig, m: int) -> list[tuple]:
    """(selector, set) pairs for build_oc_problem, one per constraint entry."""
    T = config.horizon
    blocks = []
    for c in config.constraints:
        times = _constraint_times(c, T)
        sel = state_indices(T, m, times=times, dims=c.dims)
        inner = build_set(c.set_spec)
        blocks.append((sel, Stacked(inner, len(times)) if len(times) > 1 else inner))
    return blocks


# ------------------------------------------- inequality forms (for the fold)


def _violation_terms(spec: SetSpec):
    """Scalar inequality forms g(p) <= 0 equivalent to membership in the set.

    Returns a list of (value, grad) pairs over the set's ambient point p;
    used by the no-projection ablation, which folds all of them into one
    equality. Point specs have no inequality form and are rejected upstream.
    """
    if spec.kind == "plane":
        a = np.asarray(spec.normal, dtype=float)
        b = float(spec.offset)
        below = (lambda p: float(a @ p) - b, lambda p: a)
        above = (lambda p: b - float(a @ p), lambda p: -a)
        if spec.side == "below":
            return [below]
        if spec.side == "above":
            return [above]
        return [below, above]
    if spec.kind == "circle":
        c = np.asarray(spec.center, dtype=float)
        lo, hi = 0.5 * spec.r_inner**2, 0.5 * spec.r_outer**2
        def z(p):
            d = p - c
            return 0.5 * float(d @ d)
        terms = [(lambda p: z(p) - hi, lambda p: p - c)]
        if lo > 0.0:
            terms.append((lambda p: lo - z(p), lambda p: c - p))
        return terms
    if spec.kind == "rectangle":
        A = np.diag([1.0, spec.length / spec.width]) @ rotation2d(-spec.angle)
        center = np.asarray(spec.center, dtype=float)
        half = 0.5 * spec.length

        def edge(p):
            y = A @ (p - center)
            k = int(np.argmax(np.abs(y)))
            return y, k

        if spec.region == "in":
            def v_in(p):
                y, k = edge(p)
                return abs(y[k]) - half

            def g_in(p):
                y, k = edge(p)
                return math.copysign(1.0, y[k]) * A[k]

            return [(v_in, g_in)]

        def v_out(p):
            y, k = edge(p)
            return half - abs(y[k])

        def g_out(p):
            y, k = edge(p)
            return -math.copysign(1.0, y[k]) * A[k]

        return [(v_out, g_out)]
    if spec.kind == "box":
        terms = []
        for i, (lo, hi) in enumerate(zip(spec.lower, spec.upper)):
            if lo is not None:
                e = np.zeros(len(spec.lower))
                e[i] = -1.0
                terms.append((lambda p, lo=lo, i=i: lo - p[i], lambda p, e=e: e))
            if hi is not None:
                e = np.zeros(len(spec.upper))
                e[i] = 1.0
                terms.append((lambda p, hi=hi, i=i: p[i] - hi, lambda p, e=e: e))
        return terms
    raise ValueError(f"{spec.kind} has no inequality form")


def fold_constraints_extra(config: ProblemConfig, m: int, arm=None) -> ExtraConstraint:
    """All state/end-effector constraints as one scalar equality h(x) = 0.

    h sums the positive parts of every inequality over every constrained
    timestep, so h = 0 is exactly joint feasibility; its subgradient
    scatters each active term back into the stacked states.
    """
    T = config.horizon
    entries = []  # (t, dims or None for end-effector, value, grad)
    for c in config.constraints:
        dims = np.asarray(c.dims, dtype=int)
        for v, g in _violation_terms(c.set_spec):
            for t in _constraint_times(c, T):
                entries.append((t, dims, v, g))
    if config.ee_set is not None:
        for v, g in _violation_terms(config.ee_set):
            for t in _times_list(config.ee_times, T):
                entries.append((t, None, v, g))

    def value(xs, us):
        X = xs.reshape(T, m)
        total = 0.0
        for t, dims, v, _ in entries:
            p = arm.fk(X[t - 1]) if dims is None else X[t - 1][dims]
            total += max(0.0, float(v(p)))
        return np.array([total])

    def jt_states(xs, us, w):
        X = xs.reshape(T, m)
        out = np.zeros(T * m)
        for t, dims, v, g in entries:
            x_row = X[t - 1]
            p = arm.fk(x_row) if dims is None else x_row[dims]
            if float(v(p)) > 0.0:
                dp = np.asarray(g(p), dtype=float)
                if dims is None:
                    dp = arm.jacobian(x_row).T @ dp
                    out[(t - 1) * m : t * m] += dp
                else:
                    out[(t - 1) * m + dims] += dp
        return out * float(w[0])

    def jt_controls(xs, us, w):
        return np.zeros(us.size)

    return ExtraConstraint(dim=1, value=value, jt_states=jt_states, jt_controls=jt_controls)


# ------------------------------------------------------------ option mapping


def alspg_options_from(so: schema.SolverOptionsSpec, tol_default: float = 1e-5) -> AlspgOptions:
    inner = SpgOptions(
        epsilon=so.inner_tol if so.inner_tol is not None else SpgOptions().epsilon,
        max_iters=so.inner_max_iters if so.inner_max_iters is not None else SpgOptions().max_iters,
    )
    return AlspgOptions(
        epsilon_outer=so.tol if so.tol is not None else tol_default,
        max_outer=so.max_outer if so.max_outer is not None else AlspgOptions().max_outer,
        rho0=so.rho0 if so.rho0 is not None else AlspgOptions().rho0,
        rho_max=so.rho_max if so.rho_max is not None else AlspgOptions().rho_max,
        inner=inner,
    )


def ilqr_options_from(so: schema.SolverOptionsSpec) -> IlqrOptions:
    return IlqrOptions(
        tol=so.tol if so.tol is not None else IlqrOptions().tol,
        max_iters=so.max_iters if so.max_iters is not None else IlqrOptions().max_iters,
    )


def spg_options_from(so: schema.SolverOptionsSpec) -> SpgOptions:
    return SpgOptions(
        epsilon=so.tol if so.tol is not None else SpgOptions().epsilon,
        max_iters=so.max_iters if so.max_iters is not None else SpgOptions().max_iters,
    )


# -------------------------------------------------------------------- pieces


def build_cost(config: ProblemConfig, model):
    c = config.cost
    if c.task_space:
        return TaskSpaceGoalCost(
            model.arm,
            np.asarray(c.goal, dtype=float),
            w_terminal=c.w_terminal,
            w_control=c.w_control,
            w_running=c.w_running,
        )
    return GoalCost(
        goal=np.asarray(c.goal, dtype=float),
        goal_dims=tuple(c.goal_dims) if c.goal_dims is not None else None,
        w_terminal=c.w_terminal,
        w_control=c.w_control,
        w_running=c.w_running,
        weights=np.asarray(c.weights, dtype=float) if c.weights is not None else None,
    )


def control_set_from_config(config: ProblemConfig, n: int) -> Optional[ProjectionSet]:
    if config.control_lower is None and config.control_upper is None:
        return None
    lo = config.control_lower or [None] * n
    hi = config.control_upper or [None] * n
    lo = np.array([-np.inf if v is None else v for v in lo], dtype=float)
    hi = np.array([np.inf if v is None else v for v in hi], dtype=float)
    return Stacked(Bounds(lo, hi), config.horizon)


def _initial_controls(config: ProblemConfig, T: int, n: int) -> np.ndarray:
    if config.u_init is None:
        return np.zeros((T, n))
    return np.tile(np.asarray(config.u_init, dtype=float), (T, 1))


def goal_error_fn(config: ProblemConfig, model=None):
    """State -> scalar distance to the configured goal (weighted infinity norm).

    Task-space costs measure the error at the arm tip instead.
    """
    c = config.cost
    goal = np.asarray(c.goal, dtype=float)
    if c.task_space:
        arm = (model or build_model(config.model)).arm

        def tip_err(x):
            return float(np.max(np.abs(arm.fk(x) - goal)))

        return tip_err
    dims = np.asarray(c.goal_dims, dtype=int) if c.goal_dims is not None else None
    w = np.asarray(c.weights, dtype=float) if c.weights is not None else None

    def err(x):
        e = (x[dims] if dims is not None else x) - goal
        if w is not None:
            e = e * np.sqrt(w / np.max(w))
        return float(np.max(np.abs(e)))

    return err


def build_shooting_problem(config: ProblemConfig) -> ShootingProblem:
    """The shooting problem a config describes, constraints included.

    Solver choice decides the constraint plumbing: projections onto blocks
    for alspg, the folded scalar equality for alspg_noproj, and nothing
    beyond the control bounds for spg (ilqr never comes through here).
    """
    model = build_model(config.model)
    m, n, T = model.state_dim, model.control_dim, config.horizon
    x0 = np.asarray(config.x0, dtype=float) if config.x0 is not None else np.zeros(m)
    cost = build_cost(config, model)
    kwargs = dict(
        control_set=control_set_from_config(config, n),
        counters=Counters(),
    )
    if config.solver == "alspg":
        kwargs["state_blocks"] = state_blocks_from_config(config, m)
        if config.ee_set is not None:
            kwargs["output_blocks"] = [
                OutputConstraint(
                    fn=model.arm.fk,
                    jac=model.arm.jacobian,
                    target=build_set(config.ee_set),
                    times=_times_list(config.ee_times, T),
                    dim=2,
                )
            ]
    elif config.solver == "alspg_noproj":
        arm = model.arm if config.ee_set is not None else None
        kwargs["extra_h"] = fold_constraints_extra(config, m, arm=arm)
    return build_oc_problem(model, x0, cost, T, **kwargs)


# ------------------------------------------------------------------- runners


@dataclass
class ExperimentOutcome:
    report: SolveReport
    solution: dict


def _seeded_q0(arm: PlanarArm, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-0.5, 0.5, arm.dof)


def run_ik(config: ProblemConfig) -> ExperimentOutcome:
    arm = build_arm(config.model)
    q0 = np.asarray(config.x0, dtype=float) if config.x0 is not None else _seeded_q0(arm, config.seed)
    opts = alspg_options_from(config.solver_options, tol_default=1e-5)
    q, report = constrained_ik(arm, q0, build_set(config.task_set), opts=opts)
    return ExperimentOutcome(
        report,
        {"q0": q0.tolist(), "q": q.tolist(), "tip": arm.fk(q).tolist()},
    )


def run_robust_ik(config: ProblemConfig) -> ExperimentOutcome:
    arm = build_arm(config.model)
    q0 = np.asarray(config.x0, dtype=float) if config.x0 is not None else _seeded_q0(arm, config.seed)
    ch = config.chance
    chance = ChanceConstraintMap(
        np.asarray(ch.mean_slope, dtype=float),
        np.asarray(ch.sqrt_covariance, dtype=float),
        ch.level,
    )
    opts = alspg_options_from(config.solver_options, tol_default=1e-6)
    q, report = robust_ik(arm, q0, chance, opts=opts)
    tip = arm.fk(q)
    rate = chance.satisfaction_rate(tip, seed=config.seed)
    return ExperimentOutcome(
        report,
        {"q0": q0.tolist(), "q": q.tolist(), "tip": tip.tolist(), "satisfaction_rate": rate},
    )


def run_planning(config: ProblemConfig) -> ExperimentOutcome:
    model = build_model(config.model)
    T, n = config.horizon, model.control_dim
    x0 = np.asarray(config.x0, dtype=float) if config.x0 is not None else np.zeros(model.state_dim)
    U0 = _initial_controls(config, T, n)

    if config.solver == "ilqr":
        cost = build_cost(config, model)
        opts = ilqr_options_from(config.solver_options)
        traj, report = ilqr_solve(model, x0, cost, U0, opts)
        u_flat, states = traj.controls.ravel(), traj.states
    elif config.solver == "spg":
        problem = build_shooting_problem(config)
        opts = spg_options_from(config.solver_options)
        u_flat, report = spg_minimize(
            problem.nlp.f, problem.nlp.grad_f, problem.nlp.domain, U0.ravel(),
            opts, counters=problem.counters,
        )
        states = problem.traj(u_flat).states
    else:
        problem = build_shooting_problem(config)
        opts = alspg_options_from(config.solver_options)
        u_flat, report = alspg_solve(problem.nlp, U0.ravel(), opts)
        states = problem.traj(u_flat).states

    final = states[-1]
    err = goal_error_fn(config, model)(final)
    return ExperimentOutcome(
        report,
        {"final_state": final.tolist(), "goal_error": err,
         "states": np.asarray(states, dtype=float).tolist(),
         "controls": np.asarray(u_flat, dtype=float).reshape(T, n).tolist()},
    )


def state_violation_fn(config: ProblemConfig, model):
    """State -> worst constraint violation, measured at the state itself.

    Uses projection distance (infinity norm) onto every configured set;
    zero means the state satisfies all of them. This is the physical
    feasibility readout for MPC logs, independent of solver internals.
    """
    checks = []
    for c in config.constraints:
        s = build_set(c.set_spec)
        dims = np.asarray(c.dims, dtype=int)
        checks.append((s, dims))
    ee = None
    if config.ee_set is not None:
        ee = build_set(config.ee_set)

    def violation(x):
        x = np.asarray(x, dtype=float)
        worst = 0.0
        for s, dims in checks:
            p = x[dims]
            worst = max(worst, float(np.max(np.abs(p - s.project(p)), initial=0.0)))
        if ee is not None:
            p = model.arm.fk(x)
            worst = max(worst, float(np.max(np.abs(p - ee.project(p)), initial=0.0)))
        return worst

    return violation


def _make_plant(config: ProblemConfig, model):
    """Plant stepper with the configured one-off disturbance baked in."""
    d = config.mpc.disturbance
    count = {"i": 0}

    def plant(x, u):
        x_next = np.asarray(model.step(x, u), dtype=float)
        if d is not None and count["i"] == d.step:
            x_next = x_next + np.asarray(d.delta, dtype=float)
        count["i"] += 1
        return x_next

    return plant


def _mpc_solution(records: list[MpcStepRecord], final_state, reached: bool, violation) -> dict:
    return {
        "final_state": np.asarray(final_state, dtype=float).tolist(),
        "reached_goal": bool(reached),
        "steps": [
            {
                "state": r.state.tolist(),
                "control": r.control.tolist(),
                "objective": None if not np.isfinite(r.objective) else float(r.objective),
                "residual": None if not np.isfinite(r.residual) else float(r.residual),
                "constraint_violation": violation(r.state),
                "solve_time_s": float(r.solve_time),
                "n_f": r.n_f, "n_grad": r.n_grad, "n_jac": r.n_jac,
                "solver_failed": bool(r.solver_failed),
            }
            for r in records
        ],
    }


def _mpc_termination(records, reached: bool, goal_tol) -> Termination:
    """Success for a receding-horizon run.

    With a goal tolerance, success means reaching it before the step budget.
    Without one the run has a fixed duration, so completing every step with
    no per-step solver failure is the success condition.
    """
    if goal_tol is not None:
        return Termination.CONVERGED if reached else Termination.MAX_ITERS
    if any(r.solver_failed for r in records):
        return Termination.STAGNATION
    return Termination.CONVERGED


def run_mpc(config: ProblemConfig) -> ExperimentOutcome:
    model = build_model(config.model)
    T, n = config.horizon, model.control_dim
    x0 = np.asarray(config.x0, dtype=float) if config.x0 is not None else np.zeros(model.state_dim)
    U0 = _initial_controls(config, T, n)
    plant = _make_plant(config, model)
    err = goal_error_fn(config, model)
    goal_tol = config.mpc.goal_tol

    if config.solver == "alspg":
        problem = build_shooting_problem(config)
        opts = alspg_options_from(config.solver_options)
        log = mpc_loop(
            problem, plant, x0, config.mpc.steps, opts,
            goal_error=err if goal_tol is not None else None,
            goal_tol=goal_tol, u_init=U0,
        )
        records, final, reached, counters = log.records, log.final_state, log.reached_goal, log.counters
        last = records[-1] if records else None
        report = SolveReport(
            x=np.asarray([r.control for r in records]).ravel(),
            f=last.objective if last else float("nan"),
            termination=_mpc_termination(records, reached, goal_tol),
            iterations=len(records),
            residual=last.residual if last else float("nan"),
            counters=counters,
        )
    else:
        records, final, reached, report = _ilqr_mpc(config, model, plant, x0, U0)

    violation = state_violation_fn(config, model)
    solution = _mpc_solution(records, final, reached, violation)
    solution["goal_error"] = err(np.asarray(final, dtype=float))
    solution["final_violation"] = violation(np.asarray(final, dtype=float))
    return ExperimentOutcome(report, solution)


def _ilqr_mpc(config: ProblemConfig, model, plant, x0, U0):
    """Receding-horizon loop around the second-order baseline.

    Mirrors mpc_loop: shift-and-repeat warm starts, hold the previous
    sequence on a failed solve, stop early at the goal.
    """
    import time as _time

    cost = build_cost(config, model)
    opts = ilqr_options_from(config.solver_options)
    err = goal_error_fn(config, model)
    goal_tol = config.mpc.goal_tol
    T = config.horizon
    x = np.asarray(x0, dtype=float).copy()
    U = U0.copy()
    counters = Counters()
    records: list[MpcStepRecord] = []
    reached = False

    for step in range(config.mpc.steps):
        if goal_tol is not None and err(x) <= goal_tol:
            reached = True
            break
        t0 = _time.perf_counter()
        try:
            traj, rep = ilqr_solve(model, x, cost, U, opts)
            failed = not np.all(np.isfinite(traj.controls))
        except Exception:
            rep = None
            failed = True
        dt_solve = _time.perf_counter() - t0
        if rep is not None:
            counters += rep.counters
        if not failed:
            U = traj.controls.copy()
        u_apply = U[0].copy()
        records.append(
            MpcStepRecord(
                state=x.copy(), control=u_apply,
                objective=rep.f if rep else float("inf"),
                residual=rep.residual if rep else float("inf"),
                solve_time=dt_solve,
                n_f=rep.counters.n_f if rep else 0,
                n_grad=rep.counters.n_grad if rep else 0,
                n_jac=rep.counters.n_jac if rep else 0,
                solver_failed=failed,
            )
        )
        x = np.asarray(plant(x, u_apply), dtype=float)
        U = np.vstack([U[1:], U[-1:]])

    if goal_tol is not None and err(x) <= goal_tol:
        reached = True
    last = records[-1] if records else None
    report = SolveReport(
        x=np.asarray([r.control for r in records]).ravel(),
        f=last.objective if last else float("nan"),
        termination=_mpc_termination(records, reached, goal_tol),
        iterations=len(records),
        residual=last.residual if last else float("nan"),
        counters=counters,
    )
    return records, x, reached, report


_RUNNERS = {
    "ik": run_ik,
    "robust_ik": run_robust_ik,
    "planning": run_planning,
    "mpc": run_mpc,
}


def run_config(config: ProblemConfig) -> ExperimentOutcome:
    """Run one validated config to completion and package the outcome."""
    return _RUNNERS[config.kind](config)
