"""Desk-scale models: planar arm kinematics, point car, pusher-slider.

Everything here is a pure value object; the solvers only ever see callbacks
built from these. The inverse-kinematics entry points at the bottom pose
the standard stay-close-to-q0 problem over the joint-limit box with the
task expressed as a projection set on the end-effector position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .al import AlspgOptions, ConstraintBlock, FunctionMap, NlpProblem, alspg_solve
from .report import Counters, SolveReport
from .sets import Bounds, ProjectionSet, SecondOrderCone
from .shooting import DynamicsModel, GoalCost, LinearizedDynamics, TrajectoryCost


# --------------------------------------------------------------- planar arm


@dataclass(frozen=True)
class PlanarArm:
    """Planar revolute chain with the base at the origin.

    Joint angles are absolute increments along the chain; the end-effector
    position is the usual sum of link vectors at cumulative angles.
    """

    link_lengths: tuple
    joint_limits: Bounds = None

    def __post_init__(self):
        lengths = tuple(float(l) for l in np.atleast_1d(self.link_lengths))
        if len(lengths) < 1 or any(l <= 0 for l in lengths):
            raise ValueError("need at least one positive link length")
        object.__setattr__(self, "link_lengths", lengths)
        if self.joint_limits is None:
            n = len(lengths)
            object.__setattr__(
                self, "joint_limits", Bounds(np.full(n, -np.pi), np.full(n, np.pi))
            )
        if self.joint_limits.l.shape != (len(lengths),):
            raise ValueError("joint limits must have one entry per joint")

    @property
    def dof(self) -> int:
        return len(self.link_lengths)

    @property
    def reach(self) -> float:
        return float(sum(self.link_lengths))

    def fk(self, q: np.ndarray) -> np.ndarray:
        """End-effector position."""
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ValueError("q must have one entry per joint")
        angles = np.cumsum(q)
        lengths = np.asarray(self.link_lengths)
        return np.array(
            [float(lengths @ np.cos(angles)), float(lengths @ np.sin(angles))]
        )

    def jacobian(self, q: np.ndarray) -> np.ndarray:
        """(2, dof) position Jacobian.

        Joint i moves every link at or after it, so column i sums the
        rotated link vectors from i onward.
        """
        q = np.asarray(q, dtype=float)
        angles = np.cumsum(q)
        lengths = np.asarray(self.link_lengths)
        dx = -lengths * np.sin(angles)
        dy = lengths * np.cos(angles)
        # column i = sum_{j >= i} (dx_j, dy_j): reversed cumulative sums
        jx = np.cumsum(dx[::-1])[::-1]
        jy = np.cumsum(dy[::-1])[::-1]
        return np.vstack([jx, jy])

    @staticmethod
    def three_link() -> "PlanarArm":
        """Unit-length 3-axis arm with +-pi joint limits (the demo default)."""
        return PlanarArm((1.0, 1.0, 1.0))


def arm_fk(arm: PlanarArm, q: np.ndarray) -> np.ndarray:
    return arm.fk(q)


class KinematicChainModel(DynamicsModel):
    """Joint-space single integrator: q_{t+1} = q_t + dt * u_t.

    Rollouts are cumulative sums and the linearization is constant, so both
    batch hooks are overridden; with long horizons this model spends its
    time in the solver, not the simulation.
    """

    def __init__(self, arm: PlanarArm, dt: float = 0.01):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.arm = arm
        self.state_dim = arm.dof
        self.control_dim = arm.dof
        self.dt = float(dt)

    def step(self, x, u):
        return np.asarray(x, dtype=float) + self.dt * np.asarray(u, dtype=float)

    def jacobians(self, x, u):
        n = self.state_dim
        return np.eye(n), self.dt * np.eye(n)

    def rollout(self, x0, controls):
        return np.asarray(x0, dtype=float)[None, :] + self.dt * np.cumsum(controls, axis=0)

    def linearize(self, x0, states, controls):
        T = controls.shape[0]
        n = self.state_dim
        return LinearizedDynamics(
            np.broadcast_to(np.eye(n), (T, n, n)).copy(),
            np.broadcast_to(self.dt * np.eye(n), (T, n, n)).copy(),
        )


@dataclass
class TaskSpaceGoalCost(TrajectoryCost):
    """Reach a task-space target with the arm tip.

    The target is weighed at the final timestep (w_terminal) and, when
    w_running is nonzero, at every earlier timestep too; the running term
    turns goal reaching into tracking, which receding-horizon loops need
    to make progress before their horizon ends.
    """

    arm: PlanarArm
    target: np.ndarray
    w_terminal: float = 1.0
    w_control: float = 1e-4
    w_running: float = 0.0

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)

    def _stage_weights(self, T: int) -> np.ndarray:
        w = np.full(T, self.w_running)
        w[-1] = self.w_terminal
        return w

    def value(self, traj):
        total = self.w_control * float(np.sum(traj.controls**2))
        if self.w_running:
            for w, q in zip(self._stage_weights(len(traj.states)), traj.states):
                e = self.arm.fk(q) - self.target
                total += w * float(e @ e)
            return total
        e = self.arm.fk(traj.states[-1]) - self.target
        return total + self.w_terminal * float(e @ e)

    def grad_states(self, traj):
        g = np.zeros_like(traj.states)
        if self.w_running:
            for t, (w, q) in enumerate(zip(self._stage_weights(len(traj.states)), traj.states)):
                e = self.arm.fk(q) - self.target
                g[t] = 2.0 * w * (self.arm.jacobian(q).T @ e)
            return g
        q_T = traj.states[-1]
        e = self.arm.fk(q_T) - self.target
        g[-1] = 2.0 * self.w_terminal * (self.arm.jacobian(q_T).T @ e)
        return g

    def grad_controls(self, traj):
        return 2.0 * self.w_control * traj.controls

    def hess_states(self, traj):
        # Gauss-Newton blocks: curvature of the chain through the tip
        # Jacobian, second kinematic derivatives dropped
        T, m = traj.states.shape
        H = np.zeros((T, m, m))
        if self.w_running:
            for t, (w, q) in enumerate(zip(self._stage_weights(T), traj.states)):
                J = self.arm.jacobian(q)
                H[t] = 2.0 * w * (J.T @ J)
            return H
        J = self.arm.jacobian(traj.states[-1])
        H[-1] = 2.0 * self.w_terminal * (J.T @ J)
        return H

    def hess_controls(self, traj):
        T, n = traj.controls.shape
        return np.broadcast_to(2.0 * self.w_control * np.eye(n), (T, n, n)).copy()


# ---------------------------------------------------------------- point car


class DoubleIntegrator2D(DynamicsModel):
    """Point car: position and velocity in the plane, acceleration control.

    Discretized exactly (zero-order hold on the acceleration): the linear
    step is the closed-form integral, not an Euler approximation.
    """

    state_dim = 4  # (px, py, vx, vy)
    control_dim = 2

    def __init__(self, dt: float = 0.05):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = float(dt)
        h = self.dt
        self._A = np.eye(4)
        self._A[0, 2] = self._A[1, 3] = h
        self._B = np.vstack([0.5 * h * h * np.eye(2), h * np.eye(2)])

    def step(self, x, u):
        return self._A @ np.asarray(x, dtype=float) + self._B @ np.asarray(u, dtype=float)

    def jacobians(self, x, u):
        return self._A.copy(), self._B.copy()

    def linearize(self, x0, states, controls):
        T = controls.shape[0]
        return LinearizedDynamics(
            np.broadcast_to(self._A, (T, 4, 4)).copy(),
            np.broadcast_to(self._B, (T, 4, 2)).copy(),
        )


# ------------------------------------------------------------ pusher-slider


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    w = (float(theta) + np.pi) % (2.0 * np.pi) - np.pi
    return np.pi if w == -np.pi else w


class PusherSlider(DynamicsModel):
    """Quasi-static planar pushing of a rectangular slider.

    The pusher touches the left edge of the slider (body frame x = -a) at
    tangential coordinate phi in [-b, b]. Controls are the pusher velocity
    in the body frame: u = (v_n, v_t), normal component pointing into the
    slider. The contact force and slider twist come from an ellipsoidal
    limit surface with coefficient c (the effective moment arm relating
    torque capacity to force capacity), and the motion cone decides whether
    the pusher sticks or slides along the edge:

      * stick: contact force inside the friction cone, pusher and contact
        point move together;
      * slide_up / slide_down: force saturates on a cone edge, the pusher
        slips tangentially while maintaining normal contact;
      * separation: the pusher withdraws (v_n <= 0) or runs off the edge;
        the slider stays put.

    mu_s (slider-ground friction) only scales the force magnitude, which
    cancels in the quasi-static velocity law; it is stored for completeness.
    State: (x, y, theta, phi), theta wrapped to (-pi, pi].
    """

    state_dim = 4
    control_dim = 2

    def __init__(
        self,
        half_length: float = 0.05,
        half_width: float = 0.05,
        mu_s: float = 0.35,
        mu_c: float = 0.3,
        c: Optional[float] = None,
        dt: float = 0.05,
    ):
        if min(half_length, half_width, mu_s, mu_c, dt) <= 0:
            raise ValueError("physical parameters must be positive")
        self.a = float(half_length)
        self.b = float(half_width)
        self.mu_s = float(mu_s)
        self.mu_c = float(mu_c)
        self.c = float(c) if c is not None else 0.6 * math.sqrt(self.a * self.b)
        if self.c <= 0:
            raise ValueError("physical parameters must be positive")
        self.dt = float(dt)

    def _body_rates(self, phi: float, u: np.ndarray) -> tuple[np.ndarray, float, str]:
        """Slider twist (vx, vy, omega) in body frame, contact drift, mode."""
        v_n, v_t = float(u[0]), float(u[1])
        xc, yc = -self.a, float(np.clip(phi, -self.b, self.b))
        c2 = self.c * self.c

        if v_n <= 0.0:
            return np.zeros(3), v_t, "separation"

        # force direction (up to the quasi-static scale) for sticking:
        # contact point velocity equals pusher velocity
        denom = c2 + xc * xc + yc * yc
        gx = ((c2 + xc * xc) * v_n + xc * yc * v_t) / denom
        gy = (xc * yc * v_n + (c2 + yc * yc) * v_t) / denom

        if abs(gy) <= self.mu_c * gx:
            omega = (xc * gy - yc * gx) / c2
            return np.array([gx, gy, omega]), 0.0, "stick"

        # outside the motion cone: force on a friction-cone edge, the pusher
        # slides along the face; the normal velocity fixes the force scale
        s = 1.0 if gy > self.mu_c * gx else -1.0
        tau = (xc * s * self.mu_c - yc) / c2
        kappa = 1.0 - yc * tau
        scale = v_n / kappa
        vx = scale
        vy = scale * s * self.mu_c
        omega = scale * tau
        drift = v_t - (vy + omega * xc)
        return np.array([vx, vy, omega]), drift, "slide_up" if s > 0 else "slide_down"

    def step_with_mode(self, x, u) -> tuple[np.ndarray, str]:
        x = np.asarray(x, dtype=float)
        theta, phi = float(x[2]), float(x[3])
        twist, drift, mode = self._body_rates(phi, np.asarray(u, dtype=float))
        ct, st = math.cos(theta), math.sin(theta)
        world = np.array(
            [ct * twist[0] - st * twist[1], st * twist[0] + ct * twist[1]]
        )
        phi_new = phi + self.dt * drift
        if not (-self.b <= phi_new <= self.b):
            phi_new = float(np.clip(phi_new, -self.b, self.b))
            mode = "separation"
        theta_new = theta if twist[2] == 0.0 else wrap_angle(theta + self.dt * twist[2])
        out = np.array(
            [x[0] + self.dt * world[0], x[1] + self.dt * world[1], theta_new, phi_new]
        )
        return out, mode

    def step(self, x, u):
        return self.step_with_mode(x, u)[0]

    def jacobians(self, x, u, h: float = 1e-6):
        """Central finite differences; exact enough away from mode switches."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        A = np.empty((4, 4))
        B = np.empty((4, 2))
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            A[:, i] = (self.step(x + e, u) - self.step(x - e, u)) / (2 * h)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            B[:, i] = (self.step(x, u + e) - self.step(x, u - e)) / (2 * h)
        return A, B


# ------------------------------------------------------------ chance bounds


def normal_quantile(p: float) -> float:
    """Inverse CDF of the standard normal, accurate to about 1e-9.

    Rational approximation in three regions with one Halley refinement
    step on top; good far beyond what the chance constraints need.
    """
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie strictly between 0 and 1")
    # rational approximation (relative error ~1e-9 before refinement)
    a = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
    b = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        q = math.sqrt(-2 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1
        )
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1
        )
    else:
        q = math.sqrt(-2 * math.log(1 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1
        )
    # Halley refinement against the true CDF
    e = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


@dataclass(frozen=True)
class ChanceConstraintMap:
    """Stay under a stochastic hyperplane with probability at least eta.

    The plane's normal a is Gaussian with mean mu and covariance
    Sigma = Sigma_sqrt^T Sigma_sqrt; requiring P(a^T p <= 0) >= eta is the
    cone condition mu^T p + quantile(eta) * ||Sigma_sqrt p|| <= 0. Encoded
    for the unit second-order cone as (z, t) with z = quantile * Sigma_sqrt p
    and t = -mu^T p, so the analytic cone projection applies verbatim.
    """

    mu: np.ndarray
    sigma_sqrt: np.ndarray
    eta: float = 0.8

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        S = np.asarray(self.sigma_sqrt, dtype=float)
        if mu.ndim != 1 or S.shape != (mu.size, mu.size):
            raise ValueError("sigma_sqrt must be square and match mu")
        if abs(np.linalg.det(S)) < 1e-12:
            raise ValueError("sigma_sqrt must be full rank")
        if not (0.5 <= self.eta < 1.0):
            raise ValueError("eta must lie in [0.5, 1)")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma_sqrt", S)

    @property
    def dim(self) -> int:
        return self.mu.size + 1

    @property
    def quantile(self) -> float:
        return normal_quantile(self.eta)

    def cone_value(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.concatenate(
            [self.quantile * (self.sigma_sqrt @ p), [-float(self.mu @ p)]]
        )

    def cone_jt_vec(self, w: np.ndarray) -> np.ndarray:
        """(d cone_value / d p)^T w; constant in p since the map is linear."""
        w = np.asarray(w, dtype=float)
        return self.quantile * (self.sigma_sqrt.T @ w[:-1]) - self.mu * w[-1]

    def satisfaction_rate(self, p: np.ndarray, n_samples: int = 10_000, seed: int = 0) -> float:
        """Monte-Carlo estimate of P(a^T p <= 0) at a fixed point p."""
        rng = np.random.default_rng(seed)
        xi = rng.standard_normal((n_samples, self.mu.size))
        slopes = self.mu + xi @ self.sigma_sqrt  # rows: mu + Sigma_sqrt^T xi_k
        return float(np.mean(slopes @ np.asarray(p, dtype=float) <= 0.0))


# -------------------------------------------------------- inverse kinematics


def _ik_problem(arm: PlanarArm, q0, blocks) -> NlpProblem:
    q0 = np.asarray(q0, dtype=float)
    counters = Counters()

    def f(q):
        counters.n_f += 1
        d = q - q0
        return float(d @ d)

    def grad_f(q):
        counters.n_grad += 1
        return 2.0 * (q - q0)

    return NlpProblem(
        f=f, grad_f=grad_f, domain=arm.joint_limits, constraints=blocks, counters=counters
    )


def _task_block(arm: PlanarArm, task_set: ProjectionSet, counters) -> ConstraintBlock:
    gmap = FunctionMap(
        2,
        lambda q: arm.fk(q),
        lambda q, w: arm.jacobian(q).T @ np.asarray(w, dtype=float),
        counters=counters,
    )
    return ConstraintBlock(gmap, task_set)


def constrained_ik(
    arm: PlanarArm,
    q0: np.ndarray,
    task_set: ProjectionSet,
    extra_h=None,
    opts: Optional[AlspgOptions] = None,
) -> tuple[np.ndarray, SolveReport]:
    """Closest joint configuration to q0 whose end-effector lies in task_set.

    extra_h, when given, is a ConstraintMap enforced as an equality. An
    unreachable task comes back as a stagnation report with the best-effort
    configuration; callers decide how hard that failure is.
    """
    q0 = np.asarray(q0, dtype=float)
    if not arm.joint_limits.contains(q0, tol=1e-9):
        raise ValueError("q0 must respect the joint limits")
    problem = _ik_problem(arm, q0, [])
    problem.constraints.append(_task_block(arm, task_set, problem.counters))
    if extra_h is not None:
        from .al import equality_block

        problem.constraints.append(equality_block(extra_h))
    opts = opts or AlspgOptions(epsilon_outer=1e-5)
    return alspg_solve(problem, q0, opts)


def closed_loop_ik_step(
    arm: PlanarArm,
    q_current: np.ndarray,
    task_set: ProjectionSet,
    step_budget: int = 2,
    opts: Optional[AlspgOptions] = None,
) -> tuple[np.ndarray, SolveReport]:
    """One reactive IK update: a budget-limited solve anchored at q_current.

    Each call re-poses the stay-close problem at the current configuration,
    so iterating this under a static task set walks to a fixed point, and a
    moved task set simply changes the constraint for the next call. The
    report carries the step's residual and evaluation counters.
    """
    if step_budget < 1:
        raise ValueError("step_budget must be at least 1")
    base = opts or AlspgOptions(epsilon_outer=1e-5)
    limited = replace(base, max_outer=int(step_budget), anneal_inner_tol=False)
    return constrained_ik(arm, q_current, task_set, opts=limited)


def robust_ik(
    arm: PlanarArm,
    q0: np.ndarray,
    chance: ChanceConstraintMap,
    opts: Optional[AlspgOptions] = None,
) -> tuple[np.ndarray, SolveReport]:
    """IK under a stochastic halfspace, posed as cone membership.

    The chance constraint becomes g(q) in the unit second-order cone with
    g stacking the scaled covariance image of the tip position and the
    negated mean slope; no cone gradients are ever formed.
    """
    q0 = np.asarray(q0, dtype=float)
    if not arm.joint_limits.contains(q0, tol=1e-9):
        raise ValueError("q0 must respect the joint limits")
    problem = _ik_problem(arm, q0, [])

    def value(q):
        return chance.cone_value(arm.fk(q))

    def jt_vec(q, w):
        return arm.jacobian(q).T @ chance.cone_jt_vec(w)

    gmap = FunctionMap(chance.dim, value, jt_vec, counters=problem.counters)
    problem.constraints.append(ConstraintBlock(gmap, SecondOrderCone()))
    opts = opts or AlspgOptions(epsilon_outer=1e-6)
    return alspg_solve(problem, q0, opts)
