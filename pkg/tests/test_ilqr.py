"""iLQR baseline tests.

The LQR instance is grounded twice: a dense quadratic-program solution
through the explicit rollout matrices, and an independent Riccati
recursion. iLQR must land on the same controls after one sweep.
"""

import numpy as np
import pytest

from alspg.al import AlspgOptions, alspg_solve
from alspg.ilqr import IlqrOptions, ilqr_solve
from alspg.models import DoubleIntegrator2D, PusherSlider
from alspg.report import Termination
from alspg.shooting import (
    DynamicsModel,
    GoalCost,
    LinearizedDynamics,
    Trajectory,
    TrajectoryCost,
    build_oc_problem,
    rollout,
)
from test_shooting import dense_control_jacobian


class LinearModel(DynamicsModel):
    def __init__(self, A, B, dt=1.0):
        self.A = np.asarray(A, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.state_dim = self.A.shape[0]
        self.control_dim = self.B.shape[1]
        self.dt = dt

    def step(self, x, u):
        return self.A @ x + self.B @ u

    def jacobians(self, x, u):
        return self.A.copy(), self.B.copy()


class QuadCost(TrajectoryCost):
    """sum_t x_t^T W_t x_t + u_t^T R u_t with W_t = Q except Qf at the end."""

    def __init__(self, Q, R, Qf):
        self.Q = np.asarray(Q, dtype=float)
        self.R = np.asarray(R, dtype=float)
        self.Qf = np.asarray(Qf, dtype=float)

    def _weights(self, T):
        return [self.Q] * (T - 1) + [self.Qf]

    def value(self, traj):
        T = traj.horizon
        v = sum(float(x @ W @ x) for x, W in zip(traj.states, self._weights(T)))
        v += sum(float(u @ self.R @ u) for u in traj.controls)
        return v

    def grad_states(self, traj):
        T = traj.horizon
        return np.vstack([2.0 * (W @ x) for x, W in zip(traj.states, self._weights(T))])

    def grad_controls(self, traj):
        return 2.0 * traj.controls @ self.R.T

    def hess_states(self, traj):
        return np.stack([2.0 * W for W in self._weights(traj.horizon)])

    def hess_controls(self, traj):
        T, n = traj.controls.shape
        return np.broadcast_to(2.0 * self.R, (T, n, n)).copy()


def lqr_riccati_controls(A, B, Q, R, Qf, x0, T):
    """Independent finite-horizon Riccati recursion for the QuadCost layout.

    Stage t's control shapes x_{t+1}, which carries weight Q (Qf at t=T-1),
    so the recursion folds the post-state weight into the value function.
    """
    m = A.shape[0]
    P = np.zeros((m, m))
    gains = [None] * T
    for t in range(T - 1, -1, -1):
        W = Qf if t == T - 1 else Q
        M = W + P
        F = np.linalg.solve(R + B.T @ M @ B, B.T @ M @ A)
        gains[t] = F
        P = A.T @ M @ A - A.T @ M @ B @ F
        P = 0.5 * (P + P.T)
    xs = np.asarray(x0, dtype=float)
    controls = np.empty((T, B.shape[1]))
    for t in range(T):
        controls[t] = -gains[t] @ xs
        xs = A @ xs + B @ controls[t]
    return controls


def lqr_dense_qp_controls(model, Q, R, Qf, x0, T):
    """Second oracle: minimize the explicit quadratic in the stacked u."""
    m, n = model.state_dim, model.control_dim
    lin = model.linearize(x0, np.zeros((T, m)), np.zeros((T, n)))
    G = dense_control_jacobian(lin)
    # drift: states with zero controls
    d = rollout(model, x0, np.zeros((T, n))).flat_states()
    W = np.zeros((T * m, T * m))
    for i in range(T):
        W[i * m : (i + 1) * m, i * m : (i + 1) * m] = Qf if i == T - 1 else Q
    Rbig = np.kron(np.eye(T), R)
    H = G.T @ W @ G + Rbig
    g = G.T @ W @ d
    return np.linalg.solve(H, -g).reshape(T, n)


def test_lqr_one_iteration_matches_riccati():
    rng = np.random.default_rng(0)
    A = np.eye(3) + 0.1 * rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 2))
    Q = np.diag([1.0, 0.5, 0.2])
    R = np.diag([0.4, 0.8])
    Qf = np.diag([10.0, 10.0, 10.0])
    x0 = np.array([1.0, -0.5, 0.3])
    T = 10
    model = LinearModel(A, B)
    cost = QuadCost(Q, R, Qf)

    u_ref = lqr_riccati_controls(A, B, Q, R, Qf, x0, T)
    u_qp = lqr_dense_qp_controls(model, Q, R, Qf, x0, T)
    np.testing.assert_allclose(u_ref, u_qp, atol=1e-9)  # the two oracles agree

    traj, rep = ilqr_solve(model, x0, cost, np.zeros((T, 2)), IlqrOptions(reg0=1e-12))
    np.testing.assert_allclose(traj.controls, u_ref, atol=1e-8)
    assert rep.termination is Termination.CONVERGED
    assert rep.iterations <= 2  # first sweep is exact, second only certifies
    assert rep.f == pytest.approx(cost.value(traj), rel=1e-12)


def test_double_integrator_reaching():
    model = DoubleIntegrator2D(dt=0.1)
    T = 40
    goal = np.array([1.0, -0.5, 0.0, 0.0])
    cost = GoalCost(goal=goal, w_terminal=100.0, w_control=1e-3)
    traj, rep = ilqr_solve(model, np.zeros(4), cost, np.zeros((T, 2)))
    assert rep.termination is Termination.CONVERGED
    assert np.linalg.norm(traj.states[-1] - goal) <= 1e-3


def test_cost_trace_monotone_on_pusher():
    ps = PusherSlider(dt=0.05)
    T = 30
    goals = [
        np.array([0.08, 0.05, 0.5]),
        np.array([0.05, -0.06, -0.4]),
        np.array([0.1, 0.0, 0.0]),
    ]
    for goal in goals:
        cost = GoalCost(
            goal=goal,
            goal_dims=(0, 1, 2),
            w_terminal=1.0,
            w_control=1e-4,
            weights=np.array([100.0, 100.0, 1.0]),
        )
        traj, rep = ilqr_solve(
            ps, np.zeros(4), cost, np.tile([0.04, 0.0], (T, 1)), IlqrOptions(max_iters=25)
        )
        diffs = np.diff(rep.f_trace)
        assert np.all(diffs <= 0.0)
        assert rep.f_trace[-1] < rep.f_trace[0]
        assert np.all(np.isfinite(traj.states))


def test_counters_shared_semantics_with_alspg():
    """One n_f per rollout-with-cost, one n_jac per linearization, for both
    solvers, asserted through the same instrumented cost and model."""

    class CountingCost(TrajectoryCost):
        def __init__(self, inner):
            self.inner = inner
            self.value_calls = 0

        def value(self, traj):
            self.value_calls += 1
            return self.inner.value(traj)

        def grad_states(self, traj):
            return self.inner.grad_states(traj)

        def grad_controls(self, traj):
            return self.inner.grad_controls(traj)

        def hess_states(self, traj):
            return self.inner.hess_states(traj)

        def hess_controls(self, traj):
            return self.inner.hess_controls(traj)

    class CountingModel(DynamicsModel):
        def __init__(self, inner):
            self.inner = inner
            self.state_dim = inner.state_dim
            self.control_dim = inner.control_dim
            self.dt = inner.dt
            self.linearize_calls = 0

        def step(self, x, u):
            return self.inner.step(x, u)

        def jacobians(self, x, u):
            return self.inner.jacobians(x, u)

        def linearize(self, x0, states, controls):
            self.linearize_calls += 1
            return self.inner.linearize(x0, states, controls)

    T = 20
    goal = np.array([0.8, 0.4, 0.0, 0.0])

    cost_i = CountingCost(GoalCost(goal=goal, w_terminal=50.0, w_control=1e-3))
    model_i = CountingModel(DoubleIntegrator2D(dt=0.1))
    _, rep_i = ilqr_solve(model_i, np.zeros(4), cost_i, np.zeros((T, 2)))
    assert rep_i.counters.n_f == cost_i.value_calls
    assert rep_i.counters.n_jac == model_i.linearize_calls
    assert rep_i.counters.n_f > rep_i.counters.n_jac  # line search pays rollouts

    cost_a = CountingCost(GoalCost(goal=goal, w_terminal=50.0, w_control=1e-3))
    model_a = CountingModel(DoubleIntegrator2D(dt=0.1))
    prob = build_oc_problem(model_a, np.zeros(4), cost_a, horizon=T)
    _, rep_a = alspg_solve(prob.nlp, np.zeros(T * 2), AlspgOptions())
    assert rep_a.counters.n_f == cost_a.value_calls
    assert rep_a.counters.n_jac == model_a.linearize_calls


def test_indefinite_control_hessian_regularizes():
    # a mildly concave control penalty makes some Quu blocks indefinite;
    # the Levenberg loop must absorb it and keep the trace monotone
    rng = np.random.default_rng(3)
    A = np.eye(2)
    B = np.eye(2)
    model = LinearModel(A, B)
    cost = QuadCost(
        Q=0.0 * np.eye(2), R=np.diag([-0.05, 0.1]), Qf=5.0 * np.eye(2)
    )
    x0 = np.array([1.0, -1.0])
    opts = IlqrOptions(max_iters=10, reg0=1e-6)
    traj, rep = ilqr_solve(model, x0, cost, 0.1 * rng.standard_normal((6, 2)), opts)
    assert max(rep.extras["reg_trace"]) > opts.reg0
    assert np.all(np.diff(rep.f_trace) <= 0)
    assert np.all(np.isfinite(traj.controls))


def test_divergent_rollout_backs_off():
    class FragileModel(DynamicsModel):
        state_dim = 1
        control_dim = 1
        dt = 0.1

        def step(self, x, u):
            if np.any(np.abs(u) > 5.0):
                return np.full(1, np.inf)
            return np.asarray(x) + self.dt * np.asarray(u)

        def jacobians(self, x, u):
            return np.eye(1), self.dt * np.eye(1)

    class PullCost(TrajectoryCost):
        # steep linear pull on the controls, tiny terminal anchor: the raw
        # step is enormous and the first forward rollouts blow up
        def value(self, traj):
            return float(-1e3 * np.sum(traj.controls) + traj.states[-1, 0] ** 2)

        def grad_states(self, traj):
            g = np.zeros_like(traj.states)
            g[-1] = 2.0 * traj.states[-1]
            return g

        def grad_controls(self, traj):
            return np.full_like(traj.controls, -1e3)

        def hess_states(self, traj):
            T = traj.horizon
            H = np.zeros((T, 1, 1))
            H[-1] = 2.0
            return H

        def hess_controls(self, traj):
            return np.zeros((traj.horizon, 1, 1))

    model = FragileModel()
    traj, rep = ilqr_solve(
        model, np.zeros(1), PullCost(), np.zeros((4, 1)), IlqrOptions(max_iters=1)
    )
    assert len(rep.extras["alpha_trace"]) == 1
    assert rep.extras["alpha_trace"][0] < 2**-8  # many halvings before a finite rollout
    assert np.all(np.isfinite(traj.states))
    assert rep.f_trace[-1] < rep.f_trace[0]


def test_options_validation():
    with pytest.raises(ValueError):
        IlqrOptions(tol=0.0)
    with pytest.raises(ValueError):
        IlqrOptions(backtrack_factor=1.0)
    with pytest.raises(ValueError):
        IlqrOptions(reg_growth=0.5)
    with pytest.raises(ValueError):
        IlqrOptions(reg_max=1e-9, reg0=1e-6)


def test_finite_difference_hessian_fallback():
    # a cost without Hessian hooks still solves through the FD quadratic model
    class PlainCost(TrajectoryCost):
        def __init__(self, goal):
            self.goal = goal

        def value(self, traj):
            e = traj.states[-1] - self.goal
            return float(e @ e) + 1e-3 * float(np.sum(traj.controls**2))

        def grad_states(self, traj):
            g = np.zeros_like(traj.states)
            g[-1] = 2.0 * (traj.states[-1] - self.goal)
            return g

        def grad_controls(self, traj):
            return 2e-3 * traj.controls

    model = LinearModel(np.eye(2), 0.5 * np.eye(2))
    goal = np.array([1.0, 2.0])
    traj, rep = ilqr_solve(model, np.zeros(2), PlainCost(goal), np.zeros((8, 2)))
    assert rep.termination is Termination.CONVERGED
    assert np.linalg.norm(traj.states[-1] - goal) <= 1e-2
