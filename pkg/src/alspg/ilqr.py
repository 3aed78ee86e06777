"""Unconstrained iLQR baseline.

Dynamic-programming backward pass on the linearized dynamics and
quadratized cost, then a backtracking forward rollout with the
time-varying affine policy. Exists purely as the second-order comparison
point; it shares the trajectory layout, the cost protocol, and the
evaluation-counter semantics with the shooting solver so reports are
directly comparable: n_f counts full-horizon rollout-with-cost
evaluations and n_jac counts full-horizon linearizations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .report import Counters, SolveReport, Termination
from .shooting import DynamicsModel, RolloutDiverged, Trajectory, TrajectoryCost, rollout


@dataclass(frozen=True)
class IlqrOptions:
    max_iters: int = 100
    tol: float = 1e-6  # stop when an accepted step decreases cost less than this
    backtrack_factor: float = 0.5
    alpha_floor: float = 1e-6
    reg0: float = 1e-6
    reg_growth: float = 10.0
    reg_max: float = 1e10
    keep_iterates: bool = False

    def __post_init__(self):
        if self.tol <= 0 or self.alpha_floor <= 0 or self.reg0 <= 0:
            raise ValueError("tolerances must be positive")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.reg_growth <= 1 or self.reg_max < self.reg0:
            raise ValueError("bad regularization schedule")


def _cost_hessians(cost: TrajectoryCost, traj: Trajectory, h: float = 1e-5):
    """Per-timestep Hessian blocks, finite-differenced when not provided."""
    try:
        return cost.hess_states(traj), cost.hess_controls(traj)
    except NotImplementedError:
        pass
    T, m = traj.states.shape
    n = traj.controls.shape[1]
    Hxx = np.zeros((T, m, m))
    Huu = np.zeros((T, n, n))
    for i in range(m):
        sp, sm = traj.states.copy(), traj.states.copy()
        sp[:, i] += h
        sm[:, i] -= h
        d = cost.grad_states(Trajectory(traj.x0, sp, traj.controls)) - cost.grad_states(
            Trajectory(traj.x0, sm, traj.controls)
        )
        Hxx[:, :, i] = d / (2 * h)
    for i in range(n):
        up, um = traj.controls.copy(), traj.controls.copy()
        up[:, i] += h
        um[:, i] -= h
        d = cost.grad_controls(Trajectory(traj.x0, traj.states, up)) - cost.grad_controls(
            Trajectory(traj.x0, traj.states, um)
        )
        Huu[:, :, i] = d / (2 * h)
    # symmetrize away finite-difference noise
    Hxx = 0.5 * (Hxx + np.swapaxes(Hxx, 1, 2))
    Huu = 0.5 * (Huu + np.swapaxes(Huu, 1, 2))
    return Hxx, Huu


def _backward_pass(lin, gx, gu, Hxx, Huu, reg):
    """Affine policy (k, K) per step; None when a control block resists
    factorization even with the current regularization."""
    T, m, _ = lin.A_seq.shape
    n = lin.B_seq.shape[2]
    k = np.empty((T, n))
    K = np.empty((T, n, m))
    # value function at the final state
    Vx = gx[T - 1].copy()
    Vxx = Hxx[T - 1].copy()
    stat = 0.0
    for t in range(T - 1, -1, -1):
        A, B = lin.A_seq[t], lin.B_seq[t]
        Qu = gu[t] + B.T @ Vx
        Quu = Huu[t] + B.T @ Vxx @ B
        Qux = B.T @ Vxx @ A
        stat = max(stat, float(np.max(np.abs(Qu))))
        try:
            L = np.linalg.cholesky(Quu + reg * np.eye(n))
        except np.linalg.LinAlgError:
            return None, None, stat
        rhs = np.column_stack([Qu[:, None], Qux])
        sol = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
        k[t] = -sol[:, 0]
        K[t] = -sol[:, 1:]
        if t == 0:
            break
        # cost gradient/Hessian at the pre-state x_t (stacked row t-1)
        Qx = gx[t - 1] + A.T @ Vx
        Qxx = Hxx[t - 1] + A.T @ Vxx @ A
        Vx = Qx + K[t].T @ Quu @ k[t] + K[t].T @ Qu + Qux.T @ k[t]
        Vxx = Qxx + K[t].T @ Quu @ K[t] + K[t].T @ Qux + Qux.T @ K[t]
        Vxx = 0.5 * (Vxx + Vxx.T)
    return k, K, stat


def _forward_pass(model, cost, traj, k, K, alpha, counters):
    """Closed-loop rollout with step length alpha; inf cost on divergence."""
    T = traj.horizon
    full_old = traj.full_states()
    u_new = np.empty_like(traj.controls)
    states = np.empty_like(traj.states)
    x = traj.x0.copy()
    counters.n_f += 1
    for t in range(T):
        u_new[t] = traj.controls[t] + alpha * k[t] + K[t] @ (x - full_old[t])
        x = np.asarray(model.step(x, u_new[t]), dtype=float)
        if not np.all(np.isfinite(x)):
            return None, float("inf")
        states[t] = x
    new_traj = Trajectory(traj.x0.copy(), states, u_new)
    c = float(cost.value(new_traj))
    return new_traj, c


def ilqr_solve(
    model: DynamicsModel,
    x0: np.ndarray,
    cost: TrajectoryCost,
    u_init: np.ndarray,
    opts: IlqrOptions = None,
) -> tuple[Trajectory, SolveReport]:
    """Minimize a trajectory cost over the controls, no constraints.

    Each iteration linearizes the dynamics once, quadratizes the cost,
    runs the backward pass (with Levenberg regularization of the control
    Hessian blocks when they resist factorization), and line-searches the
    closed-loop forward rollout. The accepted-cost trace is monotone by
    construction. Stops when an accepted step improves the cost by less
    than tol, when regularization saturates (stagnation), or at max_iters.
    """
    opts = opts or IlqrOptions()
    t0 = time.perf_counter()
    counters = Counters()
    u = np.asarray(u_init, dtype=float).copy()
    if u.ndim == 1:
        u = u.reshape(-1, model.control_dim)

    counters.n_f += 1
    traj = rollout(model, x0, u)
    f_cur = float(cost.value(traj))

    f_trace = [f_cur]
    x_trace = []
    alpha_trace = []
    reg_trace = []
    reg = opts.reg0
    termination = Termination.MAX_ITERS
    stationarity = float("inf")
    iterations = 0

    for _ in range(opts.max_iters):
        lin = model.linearize(traj.x0, traj.states, traj.controls)
        counters.n_jac += 1
        counters.n_grad += 1
        gx = cost.grad_states(traj)
        gu = cost.grad_controls(traj)
        Hxx, Huu = _cost_hessians(cost, traj)

        # escalate regularization until every control block factors
        while True:
            k, K, stationarity = _backward_pass(lin, gx, gu, Hxx, Huu, reg)
            if k is not None:
                break
            reg *= opts.reg_growth
            if reg > opts.reg_max:
                termination = Termination.STAGNATION
                break
        if k is None:
            break

        # backtracking line search on the closed-loop rollout
        alpha = 1.0
        accepted = None
        while alpha >= opts.alpha_floor:
            try:
                cand, f_new = _forward_pass(model, cost, traj, k, K, alpha, counters)
            except RolloutDiverged:
                cand, f_new = None, float("inf")
            if cand is not None and f_new < f_cur:
                accepted = (cand, f_new)
                break
            alpha *= opts.backtrack_factor

        if accepted is None:
            # no improvement at any step length: stiffen and retry, give up
            # once the regularization budget is spent
            reg *= opts.reg_growth
            reg_trace.append(reg)
            if reg > opts.reg_max:
                termination = Termination.STAGNATION
                break
            continue

        traj, f_new = accepted
        iterations += 1
        decrease = f_cur - f_new
        f_cur = f_new
        f_trace.append(f_cur)
        alpha_trace.append(alpha)
        reg_trace.append(reg)
        if opts.keep_iterates:
            x_trace.append(traj.controls.ravel().copy())
        reg = max(opts.reg0, reg / opts.reg_growth)
        if decrease < opts.tol:
            termination = Termination.CONVERGED
            break

    report = SolveReport(
        x=traj.controls.ravel().copy(),
        f=f_cur,
        termination=termination,
        iterations=iterations,
        residual=stationarity,
        counters=counters,
        wall_time=time.perf_counter() - t0,
        f_trace=f_trace,
        x_trace=x_trace,
    )
    report.extras["alpha_trace"] = alpha_trace
    report.extras["reg_trace"] = reg_trace
    return traj, report
