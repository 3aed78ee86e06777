"""Augmented Lagrangian outer loop around the spectral projected gradient.

Problems have the shape: minimize f(x) over x in a domain set D, subject to
g_i(x) in C_i for a list of constraint maps and projection sets. Each outer
iteration minimizes the augmented Lagrangian over D with SPG, then updates
multipliers and penalties per constraint block.

The penalty term never differentiates the projection: the gradient only
needs Jacobian-transpose products of the constraint maps, which is what
makes long-horizon trajectory problems cheap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .report import Counters, SolveReport, Termination
from .sets import Point, ProjectionSet
from .spg import SpgOptions, spg_minimize


class ConstraintMap:
    """Differentiable map with a Jacobian-transpose-vector product.

    Subclasses implement value(x) and jt_vec(x, w) = J(x)^T w. Keeping the
    Jacobian behind a product lets trajectory problems use a recursion
    instead of materializing the full matrix.
    """

    dim: int  # codomain dimension

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jt_vec(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FunctionMap(ConstraintMap):
    """Wrap plain callables as a constraint map.

    jt_vec_fn(x, w) must return J(x)^T w. When counters are supplied, every
    jt_vec call bills one Jacobian evaluation.
    """

    def __init__(self, dim: int, value_fn, jt_vec_fn, counters: Optional[Counters] = None):
        self.dim = int(dim)
        self._value = value_fn
        self._jt_vec = jt_vec_fn
        self.counters = counters

    def value(self, x):
        return np.atleast_1d(np.asarray(self._value(x), dtype=float))

    def jt_vec(self, x, w):
        if self.counters is not None:
            self.counters.n_jac += 1
        return np.asarray(self._jt_vec(x, w), dtype=float)


class DenseMap(ConstraintMap):
    """Constraint map from a dense Jacobian callback."""

    def __init__(self, dim: int, value_fn, jac_fn, counters: Optional[Counters] = None):
        self.dim = int(dim)
        self._value = value_fn
        self._jac = jac_fn
        self.counters = counters

    def value(self, x):
        return np.atleast_1d(np.asarray(self._value(x), dtype=float))

    def jt_vec(self, x, w):
        if self.counters is not None:
            self.counters.n_jac += 1
        return np.asarray(self._jac(x), dtype=float).T @ np.asarray(w, dtype=float)


@dataclass
class ConstraintBlock:
    """One g(x) in C constraint with its multiplier and penalty state."""

    g: ConstraintMap
    set: ProjectionSet
    lam: np.ndarray = None
    rho: float = 0.1
    v_prev: float = float("inf")

    def __post_init__(self):
        if self.lam is None:
            self.lam = np.zeros(self.g.dim)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.lam.shape != (self.g.dim,):
            raise ValueError("multiplier dimension must match the constraint codomain")
        if self.rho <= 0:
            raise ValueError("penalty must be positive")

    def reset(self, rho0: float):
        self.lam = np.zeros(self.g.dim)
        self.rho = float(rho0)
        self.v_prev = float("inf")


@dataclass
class NlpProblem:
    f: Callable[[np.ndarray], float]
    grad_f: Callable[[np.ndarray], np.ndarray]
    domain: ProjectionSet
    constraints: list
    counters: Counters = field(default_factory=Counters)


@dataclass(frozen=True)
class AlspgOptions:
    epsilon_outer: float = 1e-4
    rho0: float = 0.1
    rho_growth: float = 10.0
    rho_max: float = 1e8
    lambda_max: float = 1e8
    max_outer: int = 100
    # The penalty keeps its value only while the violation measure V makes
    # real progress: V_new <= v_decrease_factor * V_prev. With the factor at
    # 1.0 (plain nonincrease) a smooth strongly convex problem can pin rho
    # at rho0 forever while V creeps down at rate 1/(1 + rho * mu), which
    # stalls the multiplier iteration for hundreds of outer rounds. 0.5 is
    # the usual sufficient-decrease choice.
    v_decrease_factor: float = 0.5
    # The inner tolerance anneals from 1e-2 down to inner.epsilon across
    # outer rounds. Reactive callers that budget one or two outer rounds per
    # call want the final tolerance immediately; they turn the anneal off.
    anneal_inner_tol: bool = True
    inner: SpgOptions = field(default_factory=SpgOptions)

    def __post_init__(self):
        if self.rho0 <= 0:
            raise ValueError("rho0 must be positive")
        if self.rho_growth <= 1:
            raise ValueError("rho_growth must exceed 1")
        if self.rho_max < self.rho0:
            raise ValueError("rho_max must be >= rho0")
        if self.lambda_max <= 0:
            raise ValueError("lambda_max must be positive")
        if not (0 < self.v_decrease_factor <= 1):
            raise ValueError("v_decrease_factor must lie in (0, 1]")


def al_value(problem: NlpProblem, x: np.ndarray) -> float:
    """f(x) plus the shifted-penalty terms of every constraint block."""
    total = float(problem.f(x))
    for b in problem.constraints:
        shifted = b.g.value(x) + b.lam / b.rho
        r = shifted - b.set.project(shifted)
        total += 0.5 * b.rho * float(r @ r)
    return total


def al_gradient(problem: NlpProblem, x: np.ndarray) -> np.ndarray:
    """Gradient of the augmented Lagrangian.

    grad f(x) + sum_i rho_i J_i(x)^T (g_i(x) + lam_i/rho_i - proj(...)).
    Blocks whose shifted value already lies in the set contribute nothing
    and skip their Jacobian work entirely.
    """
    grad = np.asarray(problem.grad_f(x), dtype=float).copy()
    for b in problem.constraints:
        shifted = b.g.value(x) + b.lam / b.rho
        r = shifted - b.set.project(shifted)
        if np.any(r != 0.0):
            grad += b.rho * b.g.jt_vec(x, r)
    return grad


def auxiliary_v(block: ConstraintBlock, x: np.ndarray, gx: Optional[np.ndarray] = None) -> float:
    """Progress measure ||g(x) - proj(g(x) + lam/rho)||_2.

    Zero exactly when the constraint holds and the multiplier shift is
    consistent with it; drives the keep-or-grow penalty decision.
    """
    if gx is None:
        gx = block.g.value(x)
    shifted = gx + block.lam / block.rho
    return float(np.linalg.norm(gx - block.set.project(shifted)))


def constraint_residual(block: ConstraintBlock, x: np.ndarray, gx: Optional[np.ndarray] = None) -> float:
    """Plain feasibility gap ||g(x) - proj(g(x))||_inf, multiplier-free."""
    if gx is None:
        gx = block.g.value(x)
    r = gx - block.set.project(gx)
    return float(np.max(np.abs(r))) if r.size else 0.0


def reduce_inequalities(
    g_list: Sequence[tuple], counters: Optional[Counters] = None
) -> FunctionMap:
    """Fold scalar inequalities g_i(x) <= 0 into one equality map h(x) = 0.

    h(x) = sum_i max(0, g_i(x)) is zero iff every inequality holds, so a
    single Point({0}) block replaces any number of inequality rows. Each
    entry of g_list is a (value_fn, grad_fn) pair. Inactive terms (g_i <= 0)
    drop out of the gradient; exactly at zero the flat side is chosen.
    """
    g_list = list(g_list)

    def value(x):
        if not g_list:
            return np.zeros(1)
        return np.array([sum(max(0.0, float(v(x))) for v, _ in g_list)])

    def jt_vec(x, w):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for v, dv in g_list:
            if float(v(x)) > 0.0:
                out += np.asarray(dv(x), dtype=float)
        return out * float(w[0])

    return FunctionMap(1, value, jt_vec, counters=counters)


def equality_block(g: ConstraintMap, rho: float = 0.1) -> ConstraintBlock:
    """Convenience: a g(x) = 0 block as projection onto the zero point."""
    return ConstraintBlock(g=g, set=Point(np.zeros(g.dim)), rho=rho)


def alspg_solve(
    problem: NlpProblem,
    x0: np.ndarray,
    opts: Optional[AlspgOptions] = None,
    warm_start: bool = False,
) -> tuple[np.ndarray, SolveReport]:
    """Outer augmented-Lagrangian loop with SPG subproblem solves.

    warm_start=True keeps the blocks' current multipliers, penalties, and
    V values (receding-horizon use); otherwise blocks reset to lam = 0 and
    rho = opts.rho0.

    Converges when every block's feasibility gap is at most epsilon_outer
    and the last subproblem was solved at the final inner tolerance. If all
    penalties saturate at rho_max and the gap stops shrinking, gives up
    with a stagnation report.
    """
    opts = opts or AlspgOptions()
    t0 = time.perf_counter()

    x = np.asarray(x0, dtype=float).copy()
    if not warm_start:
        for b in problem.constraints:
            b.reset(opts.rho0)

    x_trace: list[np.ndarray] = []
    f_trace: list[float] = []
    residual_trace: list[float] = []
    block_residuals: list[list[float]] = []
    rho_trace: list[list[float]] = []
    v_trace: list[list[float]] = []
    inner_iters_total = 0
    gamma_carry: Optional[float] = None
    prev_residual = float("inf")
    termination = Termination.MAX_ITERS
    residual = float("inf")

    # Alg. state note: v_prev compares against V at the previous iterate
    # with the previous multiplier and the current penalty.
    if not warm_start:
        for b in problem.constraints:
            b.v_prev = auxiliary_v(b, x)

    for outer in range(opts.max_outer):
        if opts.anneal_inner_tol:
            eps_k = max(opts.inner.epsilon, 1e-2 * 0.1**outer)
        else:
            eps_k = opts.inner.epsilon
        inner_opts = replace(opts.inner, epsilon=eps_k)

        x, inner_rep = spg_minimize(
            lambda z: al_value(problem, z),
            lambda z: al_gradient(problem, z),
            problem.domain,
            x,
            inner_opts,
            gamma0=gamma_carry,
        )
        inner_iters_total += inner_rep.iterations
        gammas = inner_rep.extras.get("gamma_trace")
        gamma_carry = gammas[-1] if gammas else None

        if inner_rep.termination is Termination.CALLBACK_FAILURE:
            rep = SolveReport(
                x=x,
                f=float("nan"),
                termination=Termination.CALLBACK_FAILURE,
                iterations=outer,
                residual=float("inf"),
                counters=problem.counters.copy(),
                wall_time=time.perf_counter() - t0,
                x_trace=x_trace,
                f_trace=f_trace,
                constraint_residual_trace=residual_trace,
            )
            rep.extras["failure"] = inner_rep.extras.get("failure", "inner solver failed")
            return x, rep

        # one constraint evaluation per block serves the multiplier update,
        # the V test, the residual, and the penalty bookkeeping
        penalty = 0.0
        res_blocks = []
        v_blocks = []
        for b in problem.constraints:
            gx = b.g.value(x)
            shifted = gx + b.lam / b.rho
            proj = b.set.project(shifted)
            r = shifted - proj
            penalty += 0.5 * b.rho * float(r @ r)

            lam_new = np.clip(b.rho * r, -opts.lambda_max, opts.lambda_max)
            old_rho = b.rho
            b.lam = lam_new
            v_new = auxiliary_v(b, x, gx)  # new lam, old rho
            if v_new > opts.v_decrease_factor * b.v_prev:
                b.rho = min(b.rho * opts.rho_growth, opts.rho_max)
            b.v_prev = v_new if b.rho == old_rho else auxiliary_v(b, x, gx)

            res_blocks.append(constraint_residual(b, x, gx))
            v_blocks.append(v_new)

        residual = max(res_blocks) if res_blocks else 0.0
        x_trace.append(x.copy())
        f_trace.append(inner_rep.f - penalty)
        residual_trace.append(residual)
        block_residuals.append(res_blocks)
        rho_trace.append([b.rho for b in problem.constraints])
        v_trace.append(v_blocks)

        at_final_tol = eps_k <= opts.inner.epsilon * (1 + 1e-12)
        if residual <= opts.epsilon_outer and inner_rep.converged and at_final_tol:
            termination = Termination.CONVERGED
            break

        violated_maxed = all(
            b.rho >= opts.rho_max
            for b, rb in zip(problem.constraints, res_blocks)
            if rb > opts.epsilon_outer
        )
        if (
            residual > opts.epsilon_outer
            and problem.constraints
            and violated_maxed
            and residual >= prev_residual * (1.0 - 1e-6)
            and at_final_tol
        ):
            termination = Termination.STAGNATION
            break
        prev_residual = residual

    report = SolveReport(
        x=x,
        f=f_trace[-1] if f_trace else float(problem.f(x)),
        termination=termination,
        iterations=len(x_trace),
        residual=residual,
        counters=problem.counters.copy(),
        wall_time=time.perf_counter() - t0,
        x_trace=x_trace,
        f_trace=f_trace,
        constraint_residual_trace=residual_trace,
    )
    report.extras["inner_iterations"] = inner_iters_total
    report.extras["block_residuals"] = block_residuals
    report.extras["rho_trace"] = rho_trace
    report.extras["v_trace"] = v_trace
    report.extras["rho_final"] = [b.rho for b in problem.constraints]
    report.extras["gamma_carry"] = gamma_carry
    return x, report
