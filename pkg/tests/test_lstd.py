import numpy as np
import pytest
from numpy.testing import assert_allclose

from projlstd.chain import (Trajectory, bellman_lambda, exact_value, mu_norm, sample_trajectory,
                            stationary_distribution)
from projlstd.features import ProjectionOperator, make_features
from projlstd.lstd import (EstimatorSolution, SingularSystemError, TraceState,
                           eligibility_traces, fixed_point_residual, lstd_lambda_batch,
                           lstd_lambda_rp_incremental, lstd_rp_batch, model_fixed_point,
                           solve_theta, value_of)
from projlstd.rp import apply, sample_projection

from .conftest import random_mrp


def naive_estimates(Psi, states, rewards, gamma, lam):
    """Oracle: traces from their defining double sum, then the plain averages."""
    n = len(states)
    k = Psi.shape[1]
    A, b = np.zeros((k, k)), np.zeros(k)
    for i in range(n - 1):
        z = sum((lam * gamma) ** (i - j) * Psi[states[j]] for j in range(i + 1))
        A += np.outer(z, Psi[states[i]] - gamma * Psi[states[i + 1]])
        b += z * rewards[i]
    return A / (n - 1), b / (n - 1)


def dense_model(mrp, mu, Psi, lam):
    """Oracle: model matrices from explicit inverses."""
    n, g = mrp.n_states, mrp.gamma
    Dmu = np.diag(mu)
    Minv = np.linalg.inv(np.eye(n) - lam * g * mrp.P)
    A = Psi.T @ Dmu @ (np.eye(n) - g * mrp.P) @ Minv @ Psi
    b = Psi.T @ Dmu @ Minv @ mrp.r
    return A, b


def rel(x, y):
    return np.linalg.norm(x - y) / np.linalg.norm(y)


@pytest.fixture
def problem():
    mrp = random_mrp(2, 10)
    mu = stationary_distribution(mrp)
    fm = make_features("random_bounded", 10, 6, seed=4)
    H = sample_projection(3, 6, 8)
    traj = sample_trajectory(mrp, 60, seed=1, mu=mu)
    return mrp, mu, fm, H, traj


class TestEstimators:
    @pytest.mark.parametrize("lam", [0.0, 0.4, 1.0])
    def test_incremental_matches_naive_oracle(self, problem, lam):
        mrp, _, fm, H, traj = problem
        Psi = fm.Phi @ H.H.T
        A, b = naive_estimates(Psi, traj.states, traj.rewards, mrp.gamma, lam)
        sol = lstd_lambda_rp_incremental(traj, fm, H, mrp.gamma, lam)
        assert_allclose(sol.A_hat, A, rtol=1e-11, atol=1e-13)
        assert_allclose(sol.b_hat, b, rtol=1e-11, atol=1e-13)
        assert sol.n_transitions == 59

    @pytest.mark.parametrize("lam", [0.0, 0.6, 0.95])
    def test_batch_matches_naive_oracle(self, problem, lam):
        mrp, _, fm, _, traj = problem
        A, b = naive_estimates(fm.Phi, traj.states, traj.rewards, mrp.gamma, lam)
        sol = lstd_lambda_batch(traj, fm, mrp.gamma, lam)
        assert_allclose(sol.A_hat, A, rtol=1e-11, atol=1e-13)
        assert_allclose(sol.b_hat, b, rtol=1e-11, atol=1e-13)

    def test_batch_chunking_is_invisible(self, problem):
        mrp, _, fm, _, traj = problem
        whole = lstd_lambda_batch(traj, fm, mrp.gamma, 0.7, chunk=10_000)
        pieces = lstd_lambda_batch(traj, fm, mrp.gamma, 0.7, chunk=7)
        assert rel(pieces.A_hat, whole.A_hat) < 1e-13
        assert rel(pieces.theta, whole.theta) < 1e-12

    def test_lambda_zero_reduces_to_lstd_rp(self, problem):
        mrp, _, fm, H, traj = problem
        a = lstd_lambda_rp_incremental(traj, fm, H, mrp.gamma, 0.0)
        b = lstd_rp_batch(traj, fm, H, mrp.gamma)
        assert rel(a.A_hat, b.A_hat) < 1e-12
        assert rel(a.theta, b.theta) < 1e-10

    def test_identity_projection_reduces_to_lstd_lambda(self, problem):
        mrp, _, fm, _, traj = problem
        a = lstd_lambda_rp_incremental(traj, fm, None, mrp.gamma, 0.5)
        b = lstd_lambda_rp_incremental(traj, fm, np.eye(fm.D), mrp.gamma, 0.5)
        c = lstd_lambda_batch(traj, fm, mrp.gamma, 0.5)
        assert rel(a.A_hat, b.A_hat) < 1e-14
        assert rel(a.A_hat, c.A_hat) < 1e-12

    def test_converges_to_model(self):
        mrp = random_mrp(5, 6)
        mu = stationary_distribution(mrp)
        fm = make_features("random_bounded", 6, 3, seed=0)
        traj = sample_trajectory(mrp, 200_000, seed=0, mu=mu)
        sol = lstd_lambda_rp_incremental(traj, fm, None, mrp.gamma, 0.5)
        A, b = dense_model(mrp, mu.mu, fm.Phi, 0.5)
        assert rel(sol.A_hat, A) < 0.03
        assert rel(sol.b_hat, b) < 0.03

    def test_input_checks(self, problem):
        mrp, _, fm, _, traj = problem
        with pytest.raises(ValueError):
            lstd_lambda_rp_incremental(traj, fm, np.eye(4), mrp.gamma, 0.5)
        with pytest.raises(ValueError):
            lstd_lambda_batch((np.array([0]), np.array([0.0])), fm, mrp.gamma, 0.5)
        with pytest.raises(ValueError):
            lstd_lambda_batch((np.array([0, 1]), np.array([0.0])), fm, mrp.gamma, 0.5)

    def test_value_of(self, problem):
        mrp, _, fm, _, traj = problem
        sol = lstd_lambda_batch(traj, fm, mrp.gamma, 0.5)
        assert isinstance(sol, EstimatorSolution)
        assert_allclose(value_of(sol, fm), fm.Phi @ sol.theta)
        with pytest.raises(ValueError):
            value_of(np.ones(2), fm)


class TestTraces:
    def test_filter_matches_recursion(self):
        rows = np.random.default_rng(0).normal(size=(40, 3))
        Z, last = eligibility_traces(rows, 0.9, 0.5)
        ts = TraceState(3, 0.5, 0.9)
        for i, row in enumerate(rows):
            assert_allclose(Z[i], ts.push(row), rtol=1e-13)
        assert_allclose(last, ts.z, rtol=1e-13)

    def test_carry_over_between_chunks(self):
        rows = np.random.default_rng(1).normal(size=(30, 2))
        Z, _ = eligibility_traces(rows, 0.9, 0.8)
        Z1, z1 = eligibility_traces(rows[:11], 0.9, 0.8)
        Z2, _ = eligibility_traces(rows[11:], 0.9, 0.8, zi=z1)
        assert_allclose(np.vstack([Z1, Z2]), Z, rtol=1e-13)


class TestSolve:
    def test_direct(self):
        A = np.array([[2.0, 1.0], [0.0, 3.0]])
        theta, kind, cond = solve_theta(A, np.array([3.0, 3.0]))
        assert kind == "direct" and cond < 10
        assert_allclose(theta, [1.0, 1.0])

    def test_pseudo_inverse_on_singular(self):
        A = np.array([[1.0, 1.0], [1.0, 1.0]])
        theta, kind, cond = solve_theta(A, np.array([2.0, 2.0]))
        assert kind == "pseudo_inverse" and cond > 1e12
        assert_allclose(theta, [1.0, 1.0])  # minimum-norm solution

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            solve_theta(np.ones((2, 3)), np.ones(2))
        with pytest.raises(ValueError):
            solve_theta(np.array([[np.nan]]), np.ones(1))


class TestModelFixedPoint:
    @pytest.mark.parametrize("lam", [0.0, 0.5, 0.9])
    def test_matches_dense_oracle(self, lam):
        mrp = random_mrp(7, 8)
        mu = stationary_distribution(mrp)
        Psi = apply(sample_projection(3, 5, 0), make_features("random_bounded", 8, 5, seed=1))
        fp = model_fixed_point(mrp, mu, Psi, lam)
        A, b = dense_model(mrp, mu.mu, Psi.Phi, lam)
        assert_allclose(fp.A, A, rtol=1e-10, atol=1e-13)
        assert_allclose(fp.b, b, rtol=1e-10, atol=1e-13)
        assert fixed_point_residual(mrp, mu, Psi, lam, fp.V_fixed) < 1e-12

    def test_one_hot_recovers_value(self, ring5, ring5_mu):
        fm = make_features("one_hot", 5, 5)
        for lam in (0.0, 0.5, 1.0):
            fp = model_fixed_point(ring5, ring5_mu, fm, lam)
            assert_allclose(fp.V_fixed, exact_value(ring5), atol=1e-12)

    def test_lambda_one_is_projection_of_value(self, ring5, ring5_mu):
        Psi = apply(sample_projection(3, 5, 1), make_features("one_hot", 5, 5))
        fp = model_fixed_point(ring5, ring5_mu, Psi, 1.0)
        proj = ProjectionOperator(Psi, ring5_mu)
        assert_allclose(fp.V_fixed, proj(exact_value(ring5)), atol=1e-12)

    def test_fixed_point_equation(self, ring5, ring5_mu):
        Psi = apply(sample_projection(2, 5, 3), make_features("one_hot", 5, 5))
        proj = ProjectionOperator(Psi, ring5_mu)
        fp = model_fixed_point(ring5, ring5_mu, Psi, 0.3)
        assert mu_norm(ring5_mu, fp.V_fixed - proj(bellman_lambda(ring5, 0.3, fp.V_fixed))) < 1e-12

    def test_singular_system(self, ring5, ring5_mu):
        Psi = np.ones((5, 2))
        with pytest.raises(SingularSystemError):
            model_fixed_point(ring5, ring5_mu, Psi, 0.5)

    def test_trajectory_type_roundtrip(self, ring5):
        traj = Trajectory(np.array([0, 1, 2]), ring5.r[[0, 1, 2]], 0, True)
        sol = lstd_lambda_batch(traj, make_features("one_hot", 5, 5), 0.9, 0.0)
        assert sol.n_transitions == 2
