"""Direct shooting: optimal control as a problem in the controls only.

States are always the rollout of the controls, so the decision variable is
the stacked control sequence u = [u_0, ..., u_{T-1}]. Constraint Jacobians
with respect to u are never materialized; everything goes through a
backward recursion whose cost is linear in the horizon.

Canonical layout, used by every selector and stacked vector in this module:
time-major, states x_1..x_T (the initial state is not a variable), controls
u_0..u_{T-1}.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .al import AlspgOptions, ConstraintBlock, ConstraintMap, NlpProblem, alspg_solve
from .report import Counters, Termination
from .sets import Bounds, ProjectionSet


class RolloutDiverged(RuntimeError):
    def __init__(self, timestep: int):
        super().__init__(f"dynamics produced a non-finite state at timestep {timestep}")
        self.timestep = timestep


@dataclass
class Trajectory:
    x0: np.ndarray
    states: np.ndarray  # (T, m), rows are x_1 .. x_T
    controls: np.ndarray  # (T, n), rows are u_0 .. u_{T-1}

    @property
    def horizon(self) -> int:
        return self.controls.shape[0]

    def full_states(self) -> np.ndarray:
        """(T+1, m) array with the initial state prepended."""
        return np.vstack([self.x0[None, :], self.states])

    def flat_states(self) -> np.ndarray:
        return self.states.ravel()


@dataclass
class LinearizedDynamics:
    A_seq: np.ndarray  # (T, m, m), A_t = d step / d x at (x_t, u_t)
    B_seq: np.ndarray  # (T, m, n)

    @property
    def horizon(self) -> int:
        return self.A_seq.shape[0]


class DynamicsModel:
    """Discrete-time dynamics x_{t+1} = step(x_t, u_t).

    Subclasses define step and jacobians; the batch hooks (rollout,
    linearize) default to per-step loops and may be overridden when the
    model admits something faster (an integrator's rollout is a cumulative
    sum, for instance).
    """

    state_dim: int
    control_dim: int
    dt: float

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobians(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def rollout(self, x0: np.ndarray, controls: np.ndarray) -> np.ndarray:
        states = np.empty((controls.shape[0], self.state_dim))
        x = np.asarray(x0, dtype=float)
        for t in range(controls.shape[0]):
            x = np.asarray(self.step(x, controls[t]), dtype=float)
            if not np.all(np.isfinite(x)):
                raise RolloutDiverged(t)
            states[t] = x
        return states

    def linearize(self, x0: np.ndarray, states: np.ndarray, controls: np.ndarray) -> LinearizedDynamics:
        T = controls.shape[0]
        m, n = self.state_dim, self.control_dim
        A = np.empty((T, m, m))
        B = np.empty((T, m, n))
        xs = np.vstack([np.asarray(x0, dtype=float)[None, :], states[:-1]])
        for t in range(T):
            A[t], B[t] = self.jacobians(xs[t], controls[t])
        return LinearizedDynamics(A, B)


def rollout(model: DynamicsModel, x0: np.ndarray, controls: np.ndarray) -> Trajectory:
    """Forward simulation; raises RolloutDiverged naming the bad timestep."""
    controls = np.asarray(controls, dtype=float)
    if controls.ndim != 2 or controls.shape[1] != model.control_dim:
        raise ValueError("controls must be (T, control_dim)")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.state_dim,):
        raise ValueError("x0 dimension does not match the model")
    states = model.rollout(x0, controls)
    if not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.all(np.isfinite(states), axis=1)))
        raise RolloutDiverged(bad)
    return Trajectory(x0=x0.copy(), states=states, controls=controls.copy())


def jac_transpose_vec(lin: LinearizedDynamics, y: np.ndarray) -> np.ndarray:
    """z = (d rollout / d controls)^T y without the big matrix.

    y stacks T state-sized vectors, z stacks T control-sized vectors.
    Backward pass: carry = y_t + A_{t+1}^T carry, z_t = B_t^T carry, from
    the last timestep down. A_0 never enters any product. O(T (m^2 + mn)).
    """
    T = lin.horizon
    m = lin.A_seq.shape[1]
    n = lin.B_seq.shape[2]
    y = np.asarray(y, dtype=float).reshape(T, m)
    z = np.empty((T, n))
    carry = y[T - 1].copy()
    z[T - 1] = lin.B_seq[T - 1].T @ carry
    for t in range(T - 2, -1, -1):
        carry = y[t] + lin.A_seq[t + 1].T @ carry
        z[t] = lin.B_seq[t].T @ carry
    return z.ravel()


def state_indices(T: int, m: int, times: Sequence[int], dims: Optional[Sequence[int]] = None) -> np.ndarray:
    """Flat indices into the stacked states for x_t (t in 1..T), chosen dims.

    The stacked layout has no x_0, so time t maps to row t-1.
    """
    dims = np.arange(m) if dims is None else np.asarray(dims, dtype=int)
    out = []
    for t in times:
        if not (1 <= t <= T):
            raise ValueError(f"timestep {t} outside 1..{T}")
        if np.any(dims < 0) or np.any(dims >= m):
            raise ValueError("state dimension index out of range")
        out.extend(((t - 1) * m + dims).tolist())
    return np.asarray(out, dtype=int)


class TrajectoryCost:
    """Cost over a trajectory with gradients in the stacked layout.

    Costs are assumed separable across timesteps (no cross-time coupling),
    which is what lets the per-timestep Hessian hooks below describe the
    full quadratic model for second-order baselines. First-order solvers
    only ever use value and the two gradients.
    """

    def value(self, traj: Trajectory) -> float:
        raise NotImplementedError

    def grad_states(self, traj: Trajectory) -> np.ndarray:
        """(T, m) gradient w.r.t. the stacked states."""
        raise NotImplementedError

    def grad_controls(self, traj: Trajectory) -> np.ndarray:
        """(T, n) direct gradient w.r.t. the controls."""
        raise NotImplementedError

    def hess_states(self, traj: Trajectory) -> np.ndarray:
        """(T, m, m) per-timestep state Hessian blocks (optional hook)."""
        raise NotImplementedError

    def hess_controls(self, traj: Trajectory) -> np.ndarray:
        """(T, n, n) per-timestep control Hessian blocks (optional hook)."""
        raise NotImplementedError


@dataclass
class GoalCost(TrajectoryCost):
    """Reach a goal in selected state dimensions with quadratic penalties.

    w_terminal weighs the final-state error, w_control the total squared
    control effort, w_running (optional) the same goal error at every
    intermediate step. weights, when given, scale the error per dimension
    (useful when positions and angles share one goal vector).
    """

    goal: np.ndarray
    goal_dims: Optional[tuple] = None
    w_terminal: float = 1.0
    w_control: float = 1e-4
    w_running: float = 0.0
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.goal = np.asarray(self.goal, dtype=float)
        if self.goal_dims is not None:
            self.goal_dims = tuple(int(d) for d in self.goal_dims)
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.goal.shape:
                raise ValueError("weights must match the goal vector")

    def _dims(self, m: int):
        return np.arange(m) if self.goal_dims is None else np.asarray(self.goal_dims)

    def _w(self):
        return 1.0 if self.weights is None else self.weights

    def value(self, traj: Trajectory) -> float:
        dims = self._dims(traj.states.shape[1])
        e_T = traj.states[-1, dims] - self.goal
        v = self.w_terminal * float(np.sum(self._w() * e_T * e_T))
        v += self.w_control * float(np.sum(traj.controls**2))
        if self.w_running:
            e = traj.states[:-1][:, dims] - self.goal
            v += self.w_running * float(np.sum(self._w() * e * e))
        return v

    def grad_states(self, traj: Trajectory) -> np.ndarray:
        dims = self._dims(traj.states.shape[1])
        g = np.zeros_like(traj.states)
        w = self._w()
        g[-1, dims] = 2.0 * self.w_terminal * w * (traj.states[-1, dims] - self.goal)
        if self.w_running:
            g[:-1][:, dims] += 2.0 * self.w_running * w * (traj.states[:-1][:, dims] - self.goal)
        return g

    def grad_controls(self, traj: Trajectory) -> np.ndarray:
        return 2.0 * self.w_control * traj.controls

    def hess_states(self, traj: Trajectory) -> np.ndarray:
        T, m = traj.states.shape
        dims = self._dims(m)
        diag = np.zeros(m)
        diag[dims] = 2.0 * self._w()
        H = np.zeros((T, m, m))
        H[-1] = self.w_terminal * np.diag(diag)
        if self.w_running:
            H[:-1] = self.w_running * np.diag(diag)
        return H

    def hess_controls(self, traj: Trajectory) -> np.ndarray:
        T, n = traj.controls.shape
        return np.broadcast_to(2.0 * self.w_control * np.eye(n), (T, n, n)).copy()


@dataclass
class ExtraConstraint:
    """General h(states, controls) = 0 hook for build_oc_problem.

    value(states_flat, controls_flat) returns the constraint vector;
    jt_states/jt_controls return J_x^T w and J_u^T w respectively.
    """

    dim: int
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jt_states: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    jt_controls: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class OutputConstraint:
    """Constrain a nonlinear output of the state to a set, timestep by timestep.

    For every t in times (1-based, like state_indices) the vector fn(x_t)
    must land in target; jac(x) is the output Jacobian d fn / d x.  Each
    timestep becomes its own constraint block with its own multiplier.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    target: "ProjectionSet"
    times: Sequence[int]
    dim: int


class _SelectedStatesMap(ConstraintMap):
    """g(u) = selected entries of the rolled-out states."""

    def __init__(self, problem: "ShootingProblem", selector: np.ndarray):
        self._p = problem
        self.selector = selector
        self.dim = int(selector.size)

    def value(self, u):
        return self._p.traj(u).flat_states()[self.selector]

    def jt_vec(self, u, w):
        lin = self._p.lin(u)
        y = np.zeros(self._p.horizon * self._p.model.state_dim)
        np.add.at(y, self.selector, np.asarray(w, dtype=float))
        return jac_transpose_vec(lin, y)


class _ExtraMap(ConstraintMap):
    """g(u) = h(F(x0, u), u) via the chain rule through the rollout."""

    def __init__(self, problem: "ShootingProblem", extra: ExtraConstraint):
        self._p = problem
        self._h = extra
        self.dim = extra.dim

    def value(self, u):
        traj = self._p.traj(u)
        return np.atleast_1d(self._h.value(traj.flat_states(), traj.controls.ravel()))

    def jt_vec(self, u, w):
        traj = self._p.traj(u)
        lin = self._p.lin(u)
        xs, us = traj.flat_states(), traj.controls.ravel()
        w = np.asarray(w, dtype=float)
        y = self._h.jt_states(xs, us, w)
        return jac_transpose_vec(lin, y) + self._h.jt_controls(xs, us, w)


class _OutputMap(ConstraintMap):
    """g(u) = fn(x_t) for one timestep of an OutputConstraint."""

    def __init__(self, problem: "ShootingProblem", out: OutputConstraint, t: int):
        self._p = problem
        self._o = out
        self._t = int(t)
        self.dim = out.dim

    def value(self, u):
        traj = self._p.traj(u)
        return np.atleast_1d(np.asarray(self._o.fn(traj.states[self._t - 1]), dtype=float))

    def jt_vec(self, u, w):
        traj = self._p.traj(u)
        lin = self._p.lin(u)
        J = np.asarray(self._o.jac(traj.states[self._t - 1]), dtype=float)
        m = self._p.model.state_dim
        y = np.zeros(self._p.horizon * m)
        y[(self._t - 1) * m : self._t * m] = J.T @ np.asarray(w, dtype=float)
        return jac_transpose_vec(lin, y)


class ShootingProblem:
    """Optimal control in u with rollout/linearization caching.

    The cache keeps the latest trajectory and (lazily) its linearization;
    every constraint block and the objective gradient share them, so one
    gradient evaluation costs at most one rollout and one linearization
    regardless of the number of blocks.

    set_initial_state rebinds x0 in place (receding-horizon use) and keeps
    the constraint blocks, so multipliers survive across MPC steps.
    """

    def __init__(
        self,
        model: DynamicsModel,
        x0: np.ndarray,
        cost: TrajectoryCost,
        horizon: int,
        control_set: Optional[ProjectionSet] = None,
        state_blocks: Sequence[tuple] = (),
        output_blocks: Sequence[OutputConstraint] = (),
        extra_h: Optional[ExtraConstraint] = None,
        counters: Optional[Counters] = None,
    ):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.model = model
        self.horizon = int(horizon)
        self.x0 = np.asarray(x0, dtype=float).copy()
        self.cost = cost
        self.counters = counters if counters is not None else Counters()
        n_u = self.horizon * model.control_dim
        n_x = self.horizon * model.state_dim
        domain = control_set if control_set is not None else Bounds.unbounded(n_u)
        if domain.dim is not None and domain.dim != n_u:
            raise ValueError("control set dimension must be horizon * control_dim")

        self._key: Optional[bytes] = None
        self._traj: Optional[Trajectory] = None
        self._lin: Optional[LinearizedDynamics] = None

        blocks = []
        for selector, s in state_blocks:
            selector = np.asarray(selector, dtype=int).ravel()
            if selector.size and (selector.min() < 0 or selector.max() >= n_x):
                raise ValueError("state selector out of range")
            if s.dim is not None and s.dim != selector.size:
                raise ValueError("state block set dimension must match its selector")
            blocks.append(ConstraintBlock(_SelectedStatesMap(self, selector), s))
        for out in output_blocks:
            if out.target.dim is not None and out.target.dim != out.dim:
                raise ValueError("output set dimension must match the output dimension")
            for t in out.times:
                if not 1 <= int(t) <= self.horizon:
                    raise ValueError("output constraint timestep out of range")
                blocks.append(ConstraintBlock(_OutputMap(self, out, int(t)), out.target))
        if extra_h is not None:
            from .sets import Point

            blocks.append(ConstraintBlock(_ExtraMap(self, extra_h), Point(np.zeros(extra_h.dim))))

        self.nlp = NlpProblem(
            f=self._objective,
            grad_f=self._objective_gradient,
            domain=domain,
            constraints=blocks,
            counters=self.counters,
        )

    def set_initial_state(self, x0: np.ndarray):
        self.x0 = np.asarray(x0, dtype=float).copy()
        self._key, self._traj, self._lin = None, None, None

    def traj(self, u: np.ndarray) -> Trajectory:
        u = np.asarray(u, dtype=float)
        key = u.tobytes()
        if key != self._key:
            controls = u.reshape(self.horizon, self.model.control_dim)
            self._traj = rollout(self.model, self.x0, controls)
            self._lin = None
            self._key = key
        return self._traj

    def lin(self, u: np.ndarray) -> LinearizedDynamics:
        traj = self.traj(u)
        if self._lin is None:
            self._lin = self.model.linearize(self.x0, traj.states, traj.controls)
            self.counters.n_jac += 1  # one full-horizon linearization
        return self._lin

    def _objective(self, u: np.ndarray) -> float:
        self.counters.n_f += 1
        try:
            traj = self.traj(u)
        except RolloutDiverged:
            return float("inf")
        return self.cost.value(traj)

    def _objective_gradient(self, u: np.ndarray) -> np.ndarray:
        self.counters.n_grad += 1
        traj = self.traj(u)
        lin = self.lin(u)
        gx = self.cost.grad_states(traj)
        gu = self.cost.grad_controls(traj)
        return jac_transpose_vec(lin, gx.ravel()) + gu.ravel()


def build_oc_problem(
    model: DynamicsModel,
    x0: np.ndarray,
    cost: TrajectoryCost,
    horizon: int,
    control_set: Optional[ProjectionSet] = None,
    state_blocks: Sequence[tuple] = (),
    output_blocks: Sequence[OutputConstraint] = (),
    extra_h: Optional[ExtraConstraint] = None,
    counters: Optional[Counters] = None,
) -> ShootingProblem:
    """Assemble a constrained shooting problem over the stacked controls.

    state_blocks pairs (selector, set): selector indexes the stacked states
    (see state_indices), set is the projection target for those entries.
    output_blocks constrain nonlinear state outputs per timestep.
    """
    return ShootingProblem(
        model, x0, cost, horizon,
        control_set=control_set,
        state_blocks=state_blocks,
        output_blocks=output_blocks,
        extra_h=extra_h,
        counters=counters,
    )


@dataclass
class MpcStepRecord:
    state: np.ndarray
    control: np.ndarray
    objective: float
    residual: float
    solve_time: float
    n_f: int
    n_grad: int
    n_jac: int
    solver_failed: bool


@dataclass
class MpcLog:
    records: list = field(default_factory=list)
    final_state: Optional[np.ndarray] = None
    reached_goal: bool = False
    counters: Counters = field(default_factory=Counters)

    @property
    def states(self) -> np.ndarray:
        return np.array([r.state for r in self.records])

    @property
    def controls(self) -> np.ndarray:
        return np.array([r.control for r in self.records])


def mpc_loop(
    problem: ShootingProblem,
    plant: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x0: np.ndarray,
    steps: int,
    opts: Optional[AlspgOptions] = None,
    goal_error: Optional[Callable[[np.ndarray], float]] = None,
    goal_tol: Optional[float] = None,
    u_init: Optional[np.ndarray] = None,
) -> MpcLog:
    """Receding-horizon loop around one reusable shooting problem.

    Each step re-anchors the problem at the measured state, solves with the
    previous control sequence shifted by one (last entry repeated), applies
    the first control to the plant, and logs the work done. A failed solve
    is logged and the previous (shifted) sequence is held, so the loop
    always completes its steps. When goal_error and goal_tol are given the
    loop stops early once the measured state is close enough.
    """
    opts = opts or AlspgOptions()
    T, n = problem.horizon, problem.model.control_dim
    x = np.asarray(x0, dtype=float).copy()
    u_seq = np.zeros((T, n)) if u_init is None else np.asarray(u_init, dtype=float).copy()
    log = MpcLog(counters=problem.counters)

    for step in range(steps):
        if goal_error is not None and goal_tol is not None and goal_error(x) <= goal_tol:
            log.reached_goal = True
            break
        problem.set_initial_state(x)
        before = problem.counters.copy()
        t_start = time.perf_counter()
        u_star, rep = alspg_solve(problem.nlp, u_seq.ravel(), opts, warm_start=(step > 0))
        dt_solve = time.perf_counter() - t_start

        failed = rep.termination is Termination.CALLBACK_FAILURE or not np.all(
            np.isfinite(u_star)
        )
        if not failed:
            u_seq = u_star.reshape(T, n)
        # on failure u_seq keeps the previous shifted sequence

        u_apply = u_seq[0].copy()
        record = MpcStepRecord(
            state=x.copy(),
            control=u_apply,
            objective=rep.f,
            residual=rep.residual,
            solve_time=dt_solve,
            n_f=problem.counters.n_f - before.n_f,
            n_grad=problem.counters.n_grad - before.n_grad,
            n_jac=problem.counters.n_jac - before.n_jac,
            solver_failed=failed,
        )
        log.records.append(record)

        x = np.asarray(plant(x, u_apply), dtype=float)
        u_seq = np.vstack([u_seq[1:], u_seq[-1:]])

    log.final_state = x
    if goal_error is not None and goal_tol is not None and goal_error(x) <= goal_tol:
        log.reached_goal = True
    return log
