import numpy as np
import pytest

from alspg.al import (
    AlspgOptions,
    ConstraintBlock,
    DenseMap,
    FunctionMap,
    NlpProblem,
    al_gradient,
    al_value,
    alspg_solve,
    auxiliary_v,
    constraint_residual,
    equality_block,
    reduce_inequalities,
)
from alspg.report import Counters, Termination
from alspg.sets import Bounds, Point, QuadricAnnulus, SecondOrderCone
from alspg.spg import SpgOptions, spg_minimize


def identity_map(n, counters=None):
    return FunctionMap(n, lambda x: x, lambda x, w: w, counters=counters)


def affine_map(A, b, counters=None):
    A = np.asarray(A, dtype=float)
    return DenseMap(A.shape[0], lambda x: A @ x + b, lambda x: A, counters=counters)


def central_diff(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


class TestAlValueAndGradient:
    def test_no_constraints_is_plain_objective(self):
        p = NlpProblem(lambda x: float(x @ x), lambda x: 2 * x, Bounds.unbounded(2), [])
        x = np.array([1.0, -2.0])
        assert al_value(p, x) == pytest.approx(5.0)
        assert np.allclose(al_gradient(p, x), 2 * x)

    def test_feasible_block_contributes_nothing(self):
        blk = ConstraintBlock(identity_map(2), Bounds(-np.ones(2), np.ones(2)), rho=3.0)
        p = NlpProblem(lambda x: float(x @ x), lambda x: 2 * x, Bounds.unbounded(2), [blk])
        x = np.array([0.5, -0.5])  # inside the box, lam = 0
        assert al_value(p, x) == pytest.approx(float(x @ x))
        assert np.allclose(al_gradient(p, x), 2 * x)

    def test_hand_evaluated_penalty(self):
        # f = 0, g(x) = x, C = {0}, lam = 0, rho = 2, x = 3
        blk = equality_block(identity_map(1), rho=2.0)
        p = NlpProblem(lambda x: 0.0, lambda x: np.zeros(1), Bounds.unbounded(1), [blk])
        x = np.array([3.0])
        assert al_value(p, x) == pytest.approx(9.0)
        assert al_gradient(p, x)[0] == pytest.approx(6.0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        checked = 0
        while checked < 50:
            n = int(rng.integers(2, 5))
            B = rng.standard_normal((n, n))
            Q = B @ B.T + 0.5 * np.eye(n)
            a = rng.standard_normal(n)

            def f(x, Q=Q, a=a):
                return 0.5 * float((x - a) @ Q @ (x - a))

            def gf(x, Q=Q, a=a):
                return Q @ (x - a)

            blocks = []
            m = int(rng.integers(1, 3))
            for _ in range(m):
                kind = rng.choice(["affine_ball", "affine_box", "sin_soc"])
                if kind == "affine_ball":
                    A = rng.standard_normal((2, n))
                    g = affine_map(A, rng.standard_normal(2))
                    s = QuadricAnnulus.ball(rng.standard_normal(2), rng.uniform(0.5, 1.5))
                elif kind == "affine_box":
                    A = rng.standard_normal((3, n))
                    g = affine_map(A, rng.standard_normal(3))
                    s = Bounds(-np.ones(3), np.ones(3))
                else:
                    A = rng.standard_normal((3, n))

                    def val(x, A=A):
                        return np.concatenate([np.sin(A[:2] @ x), [1.0 + float(A[2] @ x) ** 2]])

                    def jac(x, A=A):
                        J = np.zeros((3, n))
                        J[:2] = np.cos(A[:2] @ x)[:, None] * A[:2]
                        J[2] = 2.0 * float(A[2] @ x) * A[2]
                        return J

                    g = DenseMap(3, val, jac)
                    s = SecondOrderCone()
                lam = rng.standard_normal(g.dim) * 0.5
                blocks.append(ConstraintBlock(g, s, lam=lam, rho=rng.uniform(0.5, 5.0)))

            p = NlpProblem(f, gf, Bounds.unbounded(n), blocks)
            x = rng.standard_normal(n)
            ga = al_gradient(p, x)
            gn = central_diff(lambda z: al_value(p, z), x)
            rel = np.linalg.norm(ga - gn) / (1.0 + np.linalg.norm(ga))
            assert rel <= 1e-5
            checked += 1

    def test_gradient_skips_jacobian_of_satisfied_blocks(self):
        cnt = Counters()
        blk = ConstraintBlock(identity_map(2, counters=cnt), Bounds(-np.ones(2), np.ones(2)))
        p = NlpProblem(lambda x: 0.0, lambda x: np.zeros(2), Bounds.unbounded(2), [blk])
        al_gradient(p, np.array([0.2, 0.3]))
        assert cnt.n_jac == 0
        al_gradient(p, np.array([2.0, 0.0]))
        assert cnt.n_jac == 1


class TestAuxiliaryV:
    def test_zero_at_feasible_with_zero_multiplier(self):
        blk = ConstraintBlock(identity_map(2), Bounds(-np.ones(2), np.ones(2)))
        assert auxiliary_v(blk, np.array([0.5, 0.5])) == 0.0

    def test_hand_value(self):
        blk = equality_block(identity_map(1), rho=7.0)
        assert auxiliary_v(blk, np.array([3.0])) == pytest.approx(3.0)


class TestReduceInequalities:
    def test_two_sided_interval(self):
        pairs = [
            (lambda x: float(x[0] - 1.0), lambda x: np.array([1.0])),
            (lambda x: float(-x[0] - 1.0), lambda x: np.array([-1.0])),
        ]
        h = reduce_inequalities(pairs)
        assert h.value(np.array([0.0]))[0] == 0.0
        assert h.value(np.array([3.0]))[0] == pytest.approx(2.0)
        # only the active inequality contributes to the gradient
        assert np.allclose(h.jt_vec(np.array([3.0]), np.ones(1)), [1.0])
        assert np.allclose(h.jt_vec(np.array([-3.0]), np.ones(1)), [-1.0])
        assert np.allclose(h.jt_vec(np.array([0.0]), np.ones(1)), [0.0])

    def test_empty_list_is_vacuous(self):
        h = reduce_inequalities([])
        assert h.value(np.array([5.0]))[0] == 0.0

    def test_zero_iff_all_rows_hold_exact(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((6, 3))
        b = rng.standard_normal(6)
        pairs = [
            (lambda x, i=i: float(A[i] @ x - b[i]), lambda x, i=i: A[i]) for i in range(6)
        ]
        h = reduce_inequalities(pairs)
        for _ in range(10_000):
            x = rng.standard_normal(3) * 2
            all_hold = bool(np.all(A @ x - b <= 0.0))
            assert (h.value(x)[0] == 0.0) == all_hold  # exact, no tolerance


class TestAlspgSolve:
    def test_point_constraint_toy(self):
        blk = ConstraintBlock(identity_map(1), Point(np.array([1.0])))
        p = NlpProblem(lambda x: float(x @ x), lambda x: 2 * x, Bounds.unbounded(1), [blk])
        x, rep = alspg_solve(p, np.array([5.0]))
        assert rep.converged
        assert abs(x[0] - 1.0) <= 1e-4

    def test_equality_on_box_lp(self):
        # min x + y on [-1,1]^2 with x + y = 0: optimum value 0 on the segment
        g = affine_map(np.array([[1.0, 1.0]]), np.zeros(1))
        blk = equality_block(g)
        p = NlpProblem(
            lambda x: float(x[0] + x[1]),
            lambda x: np.ones(2),
            Bounds(-np.ones(2), np.ones(2)),
            [blk],
        )
        x, rep = alspg_solve(p, np.array([0.7, 0.7]))
        assert rep.converged
        assert abs(x[0] + x[1]) <= 1e-4
        assert rep.f <= 1e-4

    def test_v_trend_and_penalty_monotonicity(self):
        blk = ConstraintBlock(identity_map(1), Point(np.array([1.0])))
        p = NlpProblem(lambda x: float(x @ x), lambda x: 2 * x, Bounds.unbounded(1), [blk])
        opts = AlspgOptions()
        x, rep = alspg_solve(p, np.array([5.0]), opts)
        assert rep.converged

        vs = [row[0] for row in rep.extras["v_trace"]]
        rhos = [row[0] for row in rep.extras["rho_trace"]]
        # V settles into a decreasing trend once multipliers engage
        assert all(vs[k + 1] <= vs[k] + 1e-12 for k in range(2, len(vs) - 1))
        # rho never decreases and only moves by the growth factor
        for a, b in zip(rhos, rhos[1:]):
            assert b == a or b == pytest.approx(min(a * opts.rho_growth, opts.rho_max))

    def test_complementarity_at_convergence(self):
        rng = np.random.default_rng(2)
        A = rng.standard_normal((2, 3))
        g = affine_map(A, np.array([0.5, -0.2]))
        blk = ConstraintBlock(g, QuadricAnnulus.ball(np.zeros(2), 0.3))
        p = NlpProblem(
            lambda x: float(x @ x),
            lambda x: 2 * x,
            Bounds.unbounded(3),
            [blk],
        )
        x, rep = alspg_solve(p, rng.standard_normal(3) * 2)
        assert rep.converged
        assert constraint_residual(blk, x) <= 1e-4
        assert np.max(np.abs(blk.lam)) <= 1e8

    def test_quadratic_penalty_crosscheck(self):
        # lam pinned at 0 and a huge rho: the AL reduces to a quadratic
        # penalty whose minimizer is analytic: x = rho/(2 + rho)
        rho = 1e6
        blk = ConstraintBlock(identity_map(1), Point(np.array([1.0])), rho=rho)
        p = NlpProblem(lambda x: float(x @ x), lambda x: 2 * x, Bounds.unbounded(1), [blk])
        x, rep = spg_minimize(
            lambda z: al_value(p, z),
            lambda z: al_gradient(p, z),
            p.domain,
            np.array([5.0]),
            SpgOptions(epsilon=1e-10),
        )
        assert rep.converged
        assert abs(x[0] - rho / (2.0 + rho)) <= 1e-6
        assert abs(x[0] - 1.0) <= 1e-3

    def test_traces_share_length(self):
        blk = ConstraintBlock(identity_map(1), Point(np.array([1.0])))
        p = NlpProblem(lambda x: float(x @ x), lambda x: 2 * x, Bounds.unbounded(1), [blk])
        x, rep = alspg_solve(p, np.array([5.0]))
        assert len(rep.x_trace) == len(rep.f_trace) == len(rep.constraint_residual_trace)
        assert rep.iterations == len(rep.x_trace)

    def test_warm_start_keeps_multipliers(self):
        blk = ConstraintBlock(identity_map(1), Point(np.array([1.0])))
        p = NlpProblem(lambda x: float(x @ x), lambda x: 2 * x, Bounds.unbounded(1), [blk])
        x, rep1 = alspg_solve(p, np.array([5.0]))
        lam_after = blk.lam.copy()
        assert np.any(lam_after != 0.0)
        x2, rep2 = alspg_solve(p, x, warm_start=True)
        assert rep2.converged
        assert rep2.iterations <= rep1.iterations
        # cold start would have wiped the multiplier before solving
        assert np.any(blk.lam != 0.0)

    def test_callback_failure_propagates(self):
        calls = {"n": 0}

        def f(x):
            calls["n"] += 1
            return float("nan") if calls["n"] > 2 else float(x @ x)

        blk = ConstraintBlock(identity_map(1), Point(np.array([1.0])))
        p = NlpProblem(f, lambda x: 2 * x, Bounds.unbounded(1), [blk])
        x, rep = alspg_solve(p, np.array([5.0]))
        assert rep.termination is Termination.CALLBACK_FAILURE
        assert "failure" in rep.extras

    def test_infeasible_problem_stagnates(self):
        # x = 1 and x = -1 cannot both hold
        b1 = ConstraintBlock(identity_map(1), Point(np.array([1.0])))
        b2 = ConstraintBlock(identity_map(1), Point(np.array([-1.0])))
        p = NlpProblem(lambda x: 0.0, lambda x: np.zeros(1), Bounds.unbounded(1), [b1, b2])
        opts = AlspgOptions(max_outer=60, rho_max=1e6, lambda_max=1e6)
        x, rep = alspg_solve(p, np.array([0.0]), opts)
        assert rep.termination in (Termination.STAGNATION, Termination.MAX_ITERS)
        # the balanced infeasible optimum sits between the two targets
        assert abs(x[0]) <= 0.5

    def test_options_validation(self):
        with pytest.raises(ValueError):
            AlspgOptions(rho0=0.0)
        with pytest.raises(ValueError):
            AlspgOptions(rho_growth=1.0)
        with pytest.raises(ValueError):
            AlspgOptions(rho_max=0.01, rho0=0.1)

    def test_block_validation(self):
        with pytest.raises(ValueError):
            ConstraintBlock(identity_map(2), Point(np.zeros(2)), lam=np.zeros(3))
        with pytest.raises(ValueError):
            ConstraintBlock(identity_map(2), Point(np.zeros(2)), rho=-1.0)
