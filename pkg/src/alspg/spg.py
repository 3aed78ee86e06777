"""Spectral projected gradient descent over a single projection set.

The solver needs only objective values, gradients, and one Euclidean
projection per iteration. Curvature enters through spectral stepsizes
(alternating Barzilai-Borwein quotients), and a nonmonotone line search
lets the objective rise temporarily without losing global convergence.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .report import Counters, SolveReport, Termination
from .sets import ProjectionSet


class CallbackFailure(RuntimeError):
    """An objective or gradient callback produced NaN or Inf."""


class NotDescentDirection(RuntimeError):
    """The projected direction is not a descent direction (grad.d >= 0)."""


class LineSearchStagnation(RuntimeError):
    """The step length underflowed before the acceptance test passed."""


@dataclass(frozen=True)
class SpgOptions:
    epsilon: float = 1e-5
    max_iters: int = 1000
    memory: int = 10
    beta: float = 1e-4
    gamma_min: float = 1e-10
    gamma_max: float = 1e10
    gamma_small: float = 1e-4
    keep_iterates: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not (0 < self.beta < 1):
            raise ValueError("beta must lie in (0, 1)")
        if not (0 < self.gamma_min <= self.gamma_max):
            raise ValueError("gamma clamp is invalid")
        if self.gamma_small <= 0:
            raise ValueError("gamma_small must be positive")


def _finite_value(v: float, what: str) -> float:
    v = float(v)
    if not np.isfinite(v):
        raise CallbackFailure(f"{what} returned a non-finite value")
    return v


def _finite_vector(v: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise CallbackFailure(f"{what} returned non-finite entries")
    return v


def spectral_stepsize_update(
    s: np.ndarray, y: np.ndarray, gamma_prev: float, opts: SpgOptions
) -> float:
    """Alternating spectral stepsize from the last step and gradient change.

    gamma1 = s.s/s.y approximates the inverse of the largest curvature
    along s, gamma2 = s.y/y.y the inverse of the smallest. The alternation
    takes the short step when the two disagree strongly. Non-positive or
    non-finite curvature falls back to the long clamp, a fresh start rather
    than a failure.
    """
    sy = float(s @ y)
    if not np.isfinite(sy) or sy <= 0.0:
        return opts.gamma_max
    g1 = float(s @ s) / sy
    g2 = sy / float(y @ y)
    if not (np.isfinite(g1) and np.isfinite(g2)):
        return opts.gamma_max
    if g1 < 2.0 * g2:
        gamma = g2
    else:
        gamma = g1 - 0.5 * g2
    return float(np.clip(gamma, opts.gamma_min, opts.gamma_max))


def initial_stepsize(
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    opts: SpgOptions,
    g0: Optional[np.ndarray] = None,
    counters: Optional[Counters] = None,
) -> float:
    """Probe stepsize: one small gradient step, then the spectral quotient.

    Costs exactly one extra gradient evaluation (at the probe point). A zero
    gradient at x0 short-circuits to 1, and non-positive probe curvature
    also falls back to 1 rather than the aggressive long clamp.
    """
    x0 = np.asarray(x0, dtype=float)
    if g0 is None:
        g0 = _finite_vector(grad(x0), "gradient")
        if counters is not None:
            counters.n_grad += 1
    gnorm = float(np.max(np.abs(g0))) if g0.size else 0.0
    if gnorm == 0.0:
        return 1.0
    step = opts.gamma_small * max(1.0, float(np.max(np.abs(x0)))) / max(1.0, gnorm)
    x_bar = x0 - step * g0
    g_bar = _finite_vector(grad(x_bar), "gradient")
    if counters is not None:
        counters.n_grad += 1
    s = x_bar - x0
    y = g_bar - g0
    sy = float(s @ y)
    if not np.isfinite(sy) or sy <= 0.0:
        return 1.0
    gamma = spectral_stepsize_update(s, y, 1.0, opts)
    return float(np.clip(gamma, opts.gamma_min, opts.gamma_max))


def nonmonotone_linesearch(
    f: Callable[[np.ndarray], float],
    x_k: np.ndarray,
    d_k: np.ndarray,
    c: float,
    f_history,
    beta: float = 1e-4,
    counters: Optional[Counters] = None,
    max_trials: int = 100,
):
    """Backtracking with quadratic interpolation against the history maximum.

    Accepts the first alpha in (0, 1] with
        f(x_k + alpha d_k) <= max(f_history) + alpha * beta * c.
    The interpolated trial is kept only inside the absolute window
    [0.1, 0.9]; otherwise the step is halved. Returns (alpha, f_new).
    """
    if c >= 0.0:
        raise NotDescentDirection(f"grad.d = {c:.3e} >= 0")
    if len(f_history) == 0:
        raise ValueError("objective history must contain at least f(x_k)")
    f_max = max(f_history)
    f_xk = f_history[-1]

    alpha = 1.0
    for _ in range(max_trials):
        f_new = _finite_value(f(x_k + alpha * d_k), "objective")
        if counters is not None:
            counters.n_f += 1
        if f_new <= f_max + alpha * beta * c:
            return alpha, f_new
        denom = f_new - f_xk - alpha * c
        alpha_bar = -0.5 * alpha * alpha * c / denom if denom > 0 else -1.0
        if 0.1 <= alpha_bar <= 0.9:
            alpha = alpha_bar
        else:
            alpha = 0.5 * alpha
        if alpha < 1e-12:
            raise LineSearchStagnation("step length underflow")
    raise LineSearchStagnation("line search exceeded trial budget")


def spg_minimize(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    constraint_set: ProjectionSet,
    x0: np.ndarray,
    opts: Optional[SpgOptions] = None,
    counters: Optional[Counters] = None,
    gamma0: Optional[float] = None,
) -> tuple[np.ndarray, SolveReport]:
    """Minimize f over constraint_set starting from (the projection of) x0.

    Stops when the unit-step projected-gradient residual
    ||P(x - grad f(x)) - x||_inf drops to opts.epsilon. The stopping test
    deliberately uses stepsize 1 regardless of the current spectral value,
    so the tolerance has fixed units across problems.

    Iterates stay feasible: x0 is projected up front, and on nonconvex sets
    a partial line-search step is re-projected (chords of a nonconvex set
    can leave it). Accounting: n_grad = iterations + 2 unless the start is
    degenerate (zero gradient skips the probe).

    gamma0 warm-starts the spectral stepsize and skips the probe gradient
    (used by outer loops that re-solve a slowly changing problem).
    """
    opts = opts or SpgOptions()
    cnt = counters if counters is not None else Counters()
    t0 = time.perf_counter()

    def fail_report(x, f_x, k, msg) -> tuple[np.ndarray, SolveReport]:
        rep = SolveReport(
            x=x,
            f=f_x,
            termination=Termination.CALLBACK_FAILURE,
            iterations=k,
            residual=float("inf"),
            counters=cnt,
            wall_time=time.perf_counter() - t0,
        )
        rep.extras["failure"] = msg
        return x, rep

    x = constraint_set.project(np.asarray(x0, dtype=float))
    try:
        f_x = _finite_value(f(x), "objective")
        cnt.n_f += 1
        g = _finite_vector(grad(x), "gradient")
        cnt.n_grad += 1
        if gamma0 is not None:
            gamma = float(np.clip(gamma0, opts.gamma_min, opts.gamma_max))
        else:
            gamma = initial_stepsize(grad, x, opts, g0=g, counters=cnt)
    except CallbackFailure as e:
        return fail_report(x, float("nan"), 0, str(e))

    history = deque([f_x], maxlen=opts.memory)
    f_trace = [f_x]
    residual_trace: list[float] = []
    gamma_trace = [gamma]
    x_trace = [x.copy()] if opts.keep_iterates else []

    termination = Termination.MAX_ITERS
    iterations = 0
    residual = float("inf")

    for k in range(opts.max_iters):
        residual = float(np.max(np.abs(constraint_set.project(x - g) - x)))
        residual_trace.append(residual)
        if residual <= opts.epsilon:
            termination = Termination.CONVERGED
            break

        try:
            # direction; retry with shorter gamma if curvature tricked us
            # into a non-descent arc
            while True:
                d = constraint_set.project(x - gamma * g) - x
                c = float(g @ d)
                if c < 0.0:
                    break
                if gamma <= opts.gamma_min * (1 + 1e-12):
                    raise LineSearchStagnation("no descent direction at gamma_min")
                gamma = max(gamma / 10.0, opts.gamma_min)

            alpha, f_new = nonmonotone_linesearch(
                f, x, d, c, history, beta=opts.beta, counters=cnt
            )
            x_new = x + alpha * d
            if alpha < 1.0 and not constraint_set.is_convex:
                x_new = constraint_set.project(x_new)
                f_new = _finite_value(f(x_new), "objective")
                cnt.n_f += 1
            g_new = _finite_vector(grad(x_new), "gradient")
            cnt.n_grad += 1
        except LineSearchStagnation:
            termination = Termination.STAGNATION
            break
        except CallbackFailure as e:
            return fail_report(x, f_x, iterations, str(e))

        gamma = spectral_stepsize_update(x_new - x, g_new - g, gamma, opts)
        x, g, f_x = x_new, g_new, f_new
        iterations = k + 1
        history.append(f_x)
        f_trace.append(f_x)
        gamma_trace.append(gamma)
        if opts.keep_iterates:
            x_trace.append(x.copy())

    if termination is Termination.MAX_ITERS:
        # the loop ended after a step, so the last recorded residual is stale
        residual = float(np.max(np.abs(constraint_set.project(x - g) - x)))
        residual_trace.append(residual)

    report = SolveReport(
        x=x,
        f=f_x,
        termination=termination,
        iterations=iterations,
        residual=residual,
        counters=cnt,
        wall_time=time.perf_counter() - t0,
        f_trace=f_trace,
        residual_trace=residual_trace,
        x_trace=x_trace,
    )
    report.extras["gamma_trace"] = gamma_trace
    return x, report
