import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerate_qp, grid_max_return, grid_qp_min, simplex_grid
from slidemv import _accel, kernels, qp
from slidemv.qp import QpProblem, SolverError, is_feasible, regularize, solve, verify_kkt


def random_problem(rng, d, r0_pos=None):
    A = rng.normal(size=(d, d))
    Q = A.T @ A + 1e-6 * np.eye(d)
    Q = 0.5 * (Q + Q.T)
    R = rng.normal(0.0, 0.01, d)
    t = rng.uniform() if r0_pos is None else r0_pos
    R0 = R.min() + t * (R.max() - R.min())
    return Q, R, R0


# -- feasibility ------------------------------------------------------------

def test_feasible_at_vertex():
    assert is_feasible([0.01, 0.02], 0.02)


def test_infeasible_above_best():
    assert not is_feasible([0.01, 0.02], 0.021)


def test_feasibility_matches_grid_dp():
    rng = np.random.default_rng(2024)
    h = 0.01
    for _ in range(200):
        R = rng.normal(0, 0.01, 6)
        R0 = rng.uniform(R.min() - 0.005, R.max() + 0.005)
        gmax = grid_max_return(R, 100)
        grid_nonempty = gmax >= R0
        if abs(R0 - R.max()) > h * np.abs(R).max():
            assert is_feasible(R, R0) == grid_nonempty


def test_feasibility_rejects_bad_input():
    with pytest.raises(ValueError):
        is_feasible([], 0.0)
    with pytest.raises(ValueError):
        is_feasible([np.nan], 0.0)


# -- analytic cases ---------------------------------------------------------

def test_symmetric_two_assets():
    c = 0.003
    sol = solve(QpProblem(np.eye(2), [c, c], c))
    assert sol.optimal
    np.testing.assert_allclose(sol.weights, [0.5, 0.5], atol=1e-9)
    assert sol.objective == pytest.approx(0.25, abs=1e-9)


def test_inverse_variance_split():
    # hand: d/dw [w^2 + 4(1-w)^2]/2 = w - 4(1-w) = 0 -> w = 4/5
    sol = solve(QpProblem(np.diag([1.0, 4.0]), [0.01, 0.01], 0.0))
    np.testing.assert_allclose(sol.weights, [0.8, 0.2], atol=1e-9)


def test_three_asset_return_floor_against_grid():
    Q, R, R0 = np.eye(3), np.array([0.0, 0.01, 0.02]), 0.015
    sol = solve(QpProblem(Q, R, R0))
    _, w_grid = grid_qp_min(Q, R, R0, simplex_grid(3, 1000))
    np.testing.assert_allclose(sol.weights, w_grid, atol=2e-3)
    # closed form with the floor binding: w = (1/12, 1/3, 7/12)
    np.testing.assert_allclose(sol.weights, [1 / 12, 1 / 3, 7 / 12], atol=1e-12)


def test_gmv_diagonal_inverse_variance():
    v = np.array([0.5, 1.0, 2.0, 4.0])
    sol = solve(QpProblem(np.diag(v), [0.0, 0.01, 0.02, 0.03], -1.0, ridge=0.0))
    target = (1 / v) / np.sum(1 / v)
    np.testing.assert_allclose(sol.weights, target, atol=1e-9)


def test_infeasible_status():
    sol = solve(QpProblem(np.eye(2), [0.01, 0.02], 0.03))
    assert sol.status == "infeasible" and sol.weights is None


def test_zero_covariance_uses_floor_ridge():
    sol = solve(QpProblem(np.zeros((3, 3)), [0.01, 0.01, 0.01], 0.0))
    assert sol.optimal
    assert sol.ridge == 1e-12
    np.testing.assert_allclose(sol.weights, 1 / 3, atol=1e-9)


def test_problem_validation():
    with pytest.raises(ValueError):
        QpProblem(np.eye(2), [1.0, 2.0, 3.0], 0.0)
    with pytest.raises(ValueError):
        QpProblem(np.array([[1.0, 0.5], [0.4, 1.0]]), [1.0, 2.0], 0.0)
    with pytest.raises(ValueError):
        QpProblem(np.eye(2), [1.0, 2.0], 0.0, ridge=-1.0)


def test_iteration_cap_is_numerical_failure(monkeypatch):
    monkeypatch.setattr(qp, "MAX_CHANGES_PER_DIM", 0)
    with pytest.raises(SolverError, match="iteration cap"):
        solve(QpProblem(np.eye(3), [0.0, 0.01, 0.02], 0.0))


def test_non_finite_is_numerical_failure():
    Q = np.eye(2)
    Q[0, 0] = np.inf
    with pytest.raises(SolverError, match="non-finite"):
        solve(QpProblem(Q, [0.01, 0.02], 0.0))


def test_zero_covariance_without_ridge():
    # H = 0: every feasible point is optimal, the vertex start is one of them
    sol = solve(QpProblem(np.zeros((2, 2)), [0.01, 0.01], 0.0, ridge=0.0))
    assert sol.optimal
    assert sol.weights.sum() == pytest.approx(1.0)
    assert np.all(sol.weights >= 0)
    assert sol.objective == 0.0


def test_tied_returns_at_target():
    # floor equals the common max return: the floor row is implied by the budget
    Q = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    R = np.array([0.001, 0.003, 0.003])
    sol = solve(QpProblem(Q, R, 0.003))
    assert sol.optimal
    np.testing.assert_allclose(sol.weights, [0.0, 0.5, 0.5], atol=1e-12)


# -- regularize -------------------------------------------------------------

def test_regularize_zero_matrix():
    np.testing.assert_array_equal(regularize(np.zeros((3, 3))), 1e-12 * np.eye(3))


def test_regularize_identity_relative():
    np.testing.assert_array_equal(regularize(np.eye(2)), (1 + 1e-8) * np.eye(2))


def test_regularize_rank_one():
    rng = np.random.default_rng(0)
    v = rng.normal(size=5)
    v /= np.linalg.norm(v)
    Q = np.outer(v, v)
    ridge = 1e-8 * np.trace(Q) / 5
    ev = np.linalg.eigvalsh(regularize(Q))
    np.testing.assert_allclose(ev[:4], ridge, rtol=1e-6, atol=0)
    assert ev[-1] == pytest.approx(1 + ridge, rel=1e-12)


# -- KKT audit --------------------------------------------------------------

def test_kkt_symmetric_case():
    prob = QpProblem(np.eye(2), [0.003, 0.003], 0.003)
    rep = verify_kkt(prob, solve(prob))
    assert rep.ok
    assert max(rep.gaps.values()) <= 1e-10


def test_kkt_flags_perturbed_point():
    prob = QpProblem(np.eye(2), [0.003, 0.003], 0.003)
    sol = solve(prob)
    bad = qp.PortfolioSolution(status="optimal", weights=sol.weights + [0.01, -0.01],
                               active_set=sol.active_set, ridge=sol.ridge)
    rep = verify_kkt(prob, bad)
    assert "stationarity" in rep.flags


def test_kkt_flags_wrong_active_set():
    prob = QpProblem(np.diag([1.0, 4.0, 9.0]), [0.0, 0.0, 0.0], 0.0)
    sol = solve(prob)
    bad = qp.PortfolioSolution(status="optimal", weights=np.array([1.0, 0.0, 0.0]),
                               active_set=(1, 2), ridge=sol.ridge)
    assert "dual" in verify_kkt(prob, bad).flags


def test_kkt_requires_optimal():
    with pytest.raises(ValueError):
        verify_kkt(QpProblem(np.eye(1), [0.0], 1.0), qp.PortfolioSolution(status="infeasible"))


# -- properties -------------------------------------------------------------

@pytest.mark.parametrize("d", [2, 3, 4, 6, 10])
def test_matches_support_enumeration(d):
    rng = np.random.default_rng(100 + d)
    for _ in range(30 if d <= 6 else 5):
        Q, R, R0 = random_problem(rng, d)
        sol = solve(QpProblem(Q, R, R0))
        w_ref = enumerate_qp(regularize(Q, sol.ridge), R, R0)
        np.testing.assert_allclose(sol.weights, w_ref, atol=1e-8)


def test_feasibility_exactness():
    rng = np.random.default_rng(9)
    for _ in range(300):
        d = int(rng.integers(1, 7))
        Q, R, _ = random_problem(rng, d)
        R0 = rng.uniform(R.min() - 0.01, R.max() + 0.01)
        assert (solve(QpProblem(Q, R, R0)).status == "infeasible") == (not is_feasible(R, R0))


def test_monotone_in_target():
    rng = np.random.default_rng(17)
    for _ in range(30):
        Q, R, _ = random_problem(rng, 5)
        objs = [solve(QpProblem(Q, R, r0)).objective for r0 in np.linspace(R.min(), R.max(), 10)]
        assert all(b >= a - 1e-15 for a, b in zip(objs, objs[1:]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_scale_covariance(seed, s):
    rng = np.random.default_rng(seed)
    Q, R, R0 = random_problem(rng, 4)
    a = solve(QpProblem(Q, R, R0))
    b = solve(QpProblem(s * Q, R, R0))
    np.testing.assert_allclose(b.weights, a.weights, atol=1e-8)
    assert b.objective == pytest.approx(s * a.objective, rel=1e-8)


def test_constraints_hold(market_2000):
    rng = np.random.default_rng(4)
    for _ in range(100):
        d = int(rng.integers(2, 17))
        Q, R, R0 = random_problem(rng, d)
        sol = solve(QpProblem(Q, R, R0))
        w = sol.weights
        assert w.min() >= -1e-10
        assert abs(w.sum() - 1) <= 1e-10
        assert R @ w >= R0 - 1e-10
        assert sol.kkt_residual <= 1e-8


def test_tie_break_is_deterministic():
    # every asset identical: the start vertex is the lowest index, result symmetric
    sol = solve(QpProblem(np.eye(4), [0.01] * 4, 0.01))
    np.testing.assert_allclose(sol.weights, 0.25, atol=1e-12)
    again = solve(QpProblem(np.eye(4), [0.01] * 4, 0.01))
    assert again.weights.tobytes() == sol.weights.tobytes()


def test_python_and_jit_kernels_agree():
    rng = np.random.default_rng(21)
    raw = _accel.py_func(kernels.active_set_qp)
    for _ in range(20):
        Q, R, R0 = random_problem(rng, 6)
        ridge = qp.default_ridge(Q)
        a = kernels.active_set_qp(Q, R, R0, ridge, 600, 1e-10, 1e-12)
        b = raw(Q, R, R0, ridge, 600, 1e-10, 1e-12)
        assert a[0] == b[0]
        np.testing.assert_allclose(a[1], b[1], atol=1e-12)
