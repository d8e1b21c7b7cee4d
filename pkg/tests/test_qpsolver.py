import io

import numpy as np
import pytest
import scipy.sparse as sp

from airways.qpsolver import (
    QPSettings,
    SparseQP,
    dump_qp,
    kkt_residuals,
    load_qp,
    solve,
)
from oracles import active_set_enumeration, random_box_qp


def make_qp(h, f, a_eq=None, b_eq=None, a_in=None, b_in=None) -> SparseQP:
    n = len(f)
    a_eq = np.zeros((0, n)) if a_eq is None else np.atleast_2d(a_eq)
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(b_eq)
    a_in = np.zeros((0, n)) if a_in is None else np.atleast_2d(a_in)
    b_in = np.zeros(0) if b_in is None else np.atleast_1d(b_in)
    return SparseQP(sp.csc_matrix(np.atleast_2d(h)), np.asarray(f, float),
                    sp.csc_matrix(a_eq), b_eq, sp.csc_matrix(a_in), b_in)


class TestBasicSolves:
    def test_unconstrained_scalar(self):
        sol = solve(make_qp([[1.0]], [-1.0]))
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(1.0, abs=1e-8)

    def test_active_upper_bound(self):
        sol = solve(make_qp([[1.0]], [-1.0], a_in=[[1.0]], b_in=[0.5]))
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(0.5, abs=1e-8)

    def test_symmetric_equality(self):
        sol = solve(make_qp(2.0 * np.eye(2), np.zeros(2),
                            a_eq=[[1.0, 1.0]], b_eq=[1.0]))
        assert sol.status == "optimal"
        np.testing.assert_allclose(sol.x, [0.5, 0.5], atol=1e-8)

    def test_inactive_bound_ignored(self):
        sol = solve(make_qp([[1.0]], [-1.0], a_in=[[1.0]], b_in=[10.0]))
        assert sol.x[0] == pytest.approx(1.0, abs=1e-8)

    def test_warm_start_accepted(self):
        qp = make_qp(2.0 * np.eye(2), np.zeros(2), a_eq=[[1.0, 1.0]],
                     b_eq=[1.0])
        sol = solve(qp, QPSettings(initial_x=np.array([0.4, 0.6])))
        np.testing.assert_allclose(sol.x, [0.5, 0.5], atol=1e-8)


class TestKktResiduals:
    def test_residuals_vanish_at_optimum(self):
        qp = make_qp([[1.0]], [-1.0], a_in=[[1.0]], b_in=[0.5])
        sol = solve(qp)
        station, p_eq, p_in, comp = kkt_residuals(
            qp, sol.x, (sol.y_eq, sol.y_ineq))
        assert max(station, p_eq, p_in, comp) < 1e-8

    def test_equality_violation_reported(self):
        qp = make_qp(2.0 * np.eye(2), np.zeros(2), a_eq=[[1.0, 1.0]],
                     b_eq=[1.0])
        x = np.array([0.5, 0.6])  # violates by 0.1
        _, p_eq, _, _ = kkt_residuals(qp, x, (np.zeros(1), np.zeros(0)))
        assert p_eq == pytest.approx(0.1)

    def test_unconstrained_stationarity_is_gradient_norm(self):
        rng = np.random.default_rng(0)
        h = np.eye(3) * 2.0
        f = rng.normal(size=3)
        qp = make_qp(h, f)
        x = rng.normal(size=3)
        station, _, _, _ = kkt_residuals(qp, x, (np.zeros(0), np.zeros(0)))
        assert station == pytest.approx(np.max(np.abs(h @ x + f)))


class TestOracleEquivalence:
    def test_matches_active_set_enumeration(self):
        rng = np.random.default_rng(2024)
        failures = []
        for trial in range(200):
            qp, dense = random_box_qp(rng)
            x_ref = active_set_enumeration(*dense)
            assert x_ref is not None
            sol = solve(qp)
            err = np.max(np.abs(sol.x - x_ref))
            if sol.status != "optimal" or err > 1e-5:
                failures.append((trial, sol.status, err))
        assert not failures, f"oracle mismatches: {failures[:5]}"

    def test_objective_not_worse_than_feasible_points(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            qp, dense = random_box_qp(rng)
            h, f, a_eq, b_eq, a_in, b_in = dense
            sol = solve(qp)
            x_ref = active_set_enumeration(*dense)
            scale = max(1.0, abs(qp.objective(x_ref)))
            assert qp.objective(sol.x) <= qp.objective(x_ref) + 1e-6 * scale


class TestDeterminism:
    def test_bitwise_identical_runs(self):
        rng = np.random.default_rng(99)
        qp, _ = random_box_qp(rng)
        sol1 = solve(qp)
        sol2 = solve(qp)
        assert sol1.iterations == sol2.iterations
        assert np.array_equal(sol1.x, sol2.x)
        assert np.array_equal(sol1.y_ineq, sol2.y_ineq)


class TestInfeasibility:
    def test_primal_infeasible_box(self):
        # x <= 0 and x >= 1 cannot both hold
        sol = solve(make_qp([[1.0]], [0.0], a_in=[[1.0], [-1.0]],
                            b_in=[0.0, -1.0]))
        assert sol.status == "primal_infeasible"

    def test_dual_infeasible_unbounded(self):
        sol = solve(make_qp([[0.0]], [-1.0]))
        assert sol.status == "dual_infeasible"

    def test_no_violating_x_labeled_optimal(self):
        # tight iteration budget: must not claim optimal without meeting it
        rng = np.random.default_rng(3)
        qp, _ = random_box_qp(rng)
        sol = solve(qp, QPSettings(max_iter=2, check_interval=1,
                                   polish=False))
        if sol.status == "optimal":
            station, p_eq, p_in, _ = kkt_residuals(
                qp, sol.x, (sol.y_eq, sol.y_ineq))
            scale = max(1.0, np.abs(sol.x).max())
            assert p_eq <= 1e-6 * scale and p_in <= 1e-6 * scale


class TestBandedProblem:
    def test_chain_equalities(self):
        # x_{i+1} = x_i + 0.1 u_i with terminal anchor, a tiny planner-shaped QP
        n_stages = 20
        n = 2 * n_stages  # interleaved [x_i, u_i]
        h = sp.lil_matrix((n, n))
        f = np.zeros(n)
        for i in range(n_stages):
            h[2 * i + 1, 2 * i + 1] = 1.0  # input energy
        h[2 * (n_stages - 1), 2 * (n_stages - 1)] = 100.0
        f[2 * (n_stages - 1)] = -100.0  # anchor x_last to 1
        rows, cols, vals, rhs = [], [], [], []
        r = 0
        for i in range(n_stages - 1):
            rows += [r, r, r]
            cols += [2 * (i + 1), 2 * i, 2 * i + 1]
            vals += [1.0, -1.0, -0.1]
            rhs.append(0.0)
            r += 1
        rows.append(r)
        cols.append(0)
        vals.append(1.0)
        rhs.append(0.0)
        a_eq = sp.coo_matrix((vals, (rows, cols)), shape=(r + 1, n))
        qp = SparseQP(h.tocsc(), f, a_eq.tocsc(), np.array(rhs),
                      sp.csc_matrix((0, n)), np.zeros(0))
        sol = solve(qp)
        assert sol.status == "optimal"
        # dynamics hold along the chain
        x_vals = sol.x[0::2]
        u_vals = sol.x[1::2]
        np.testing.assert_allclose(x_vals[1:], x_vals[:-1] + 0.1 * u_vals[:-1],
                                   atol=1e-7)
        assert x_vals[0] == pytest.approx(0.0, abs=1e-7)
        # analytic optimum of the soft anchor tradeoff: u_i = 0.5, x_N = 0.95
        assert x_vals[-1] == pytest.approx(0.95, abs=1e-6)


class TestDumpLoad:
    def test_round_trip(self):
        rng = np.random.default_rng(5)
        qp, _ = random_box_qp(rng)
        buf = io.StringIO()
        dump_qp(qp, buf)
        buf.seek(0)
        qp2 = load_qp(buf)
        assert (qp.hessian != qp2.hessian).nnz == 0
        np.testing.assert_array_equal(qp.linear, qp2.linear)
        assert (qp.eq_matrix != qp2.eq_matrix).nnz == 0
        np.testing.assert_array_equal(qp.eq_rhs, qp2.eq_rhs)
        assert (qp.ineq_matrix != qp2.ineq_matrix).nnz == 0
        np.testing.assert_array_equal(qp.ineq_rhs, qp2.ineq_rhs)

    def test_round_trip_solution_identical(self):
        rng = np.random.default_rng(6)
        qp, _ = random_box_qp(rng)
        buf = io.StringIO()
        dump_qp(qp, buf)
        buf.seek(0)
        sol1 = solve(qp)
        sol2 = solve(load_qp(buf))
        np.testing.assert_array_equal(sol1.x, sol2.x)


class TestValidation:
    def test_asymmetric_hessian_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            make_qp([[1.0, 0.5], [0.0, 1.0]], [0.0, 0.0])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SparseQP(sp.eye(2, format="csc"), np.zeros(3),
                     sp.csc_matrix((0, 2)), np.zeros(0),
                     sp.csc_matrix((0, 2)), np.zeros(0))
