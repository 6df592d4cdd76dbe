"""LSTD(lambda) estimators, with and without random projections.

All estimators process the ``n - 1`` transitions ``(X_i, X_{i+1})`` of a
length-``n`` trajectory and use the accumulating trace

    z_i = sum_{k=1}^{i} (lambda gamma)^{i-k} psi(X_k),

so ``A_hat = mean_i z_i (psi(X_i) - gamma psi(X_{i+1}))^T`` and
``b_hat = mean_i z_i r(X_i)``.  The discount multiplies the next-state
feature, and the trace starts from ``z_1 = psi(X_1)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.signal import lfilter

from .chain import Trajectory
from .features import FeatureMap, ProjectionOperator
from .kernels import lstd_accumulate
from .rp import ProjectionMatrix

COND_LIMIT = 1e12


class SingularSystemError(np.linalg.LinAlgError):
    def __init__(self, message, condition=np.inf):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class EstimatorSolution:
    A_hat: np.ndarray
    b_hat: np.ndarray
    theta: np.ndarray
    solve_kind: str
    condition_estimate: float
    n_transitions: int


@dataclass(frozen=True)
class ModelFixedPoint:
    A: np.ndarray
    b: np.ndarray
    theta_star: np.ndarray
    V_fixed: np.ndarray


class TraceState:
    """Eligibility trace ``z <- lambda gamma z + psi``, starting from zero."""

    def __init__(self, k, lam, gamma):
        self.z = np.zeros(k)
        self.lam = float(lam)
        self.gamma = float(gamma)

    def push(self, psi):
        self.z = self.lam * self.gamma * self.z + psi
        return self.z


def _as_matrix(features):
    if isinstance(features, FeatureMap):
        return features.Phi
    return np.ascontiguousarray(features, dtype=np.float64)


def _trajectory_arrays(trajectory):
    if isinstance(trajectory, Trajectory):
        states, rewards = trajectory.states, trajectory.rewards
    else:
        states, rewards = trajectory
    states = np.ascontiguousarray(states, dtype=np.int64)
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    if states.shape[0] < 2:
        raise ValueError("trajectory must contain at least two states")
    if rewards.shape != states.shape:
        raise ValueError("states and rewards must have equal length")
    return states, rewards


def solve_theta(A_hat, b_hat, cond_limit=COND_LIMIT):
    """Direct solve when ``cond(A) <= cond_limit``, else the pseudo-inverse.

    The condition number is the LAPACK 1-norm estimate from the LU factors,
    so the well-conditioned path costs one factorization.  The
    pseudo-inverse drops singular values below ``s_max / cond_limit`` and
    returns the minimum-norm least-squares solution of what remains.

    Returns
    -------
    theta, solve_kind, condition_estimate
    """
    A_hat = np.asarray(A_hat, dtype=np.float64)
    b_hat = np.asarray(b_hat, dtype=np.float64)
    if A_hat.ndim != 2 or A_hat.shape[0] != A_hat.shape[1]:
        raise ValueError(f"A_hat must be square, got shape {A_hat.shape}")
    if not (np.all(np.isfinite(A_hat)) and np.all(np.isfinite(b_hat))):
        raise ValueError("A_hat and b_hat must be finite")
    cond = condition_estimate(A_hat)
    if cond <= cond_limit:
        lu = linalg.lu_factor(A_hat, check_finite=False)
        return linalg.lu_solve(lu, b_hat, check_finite=False), "direct", cond
    theta = np.linalg.pinv(A_hat, rcond=1.0 / cond_limit) @ b_hat
    return theta, "pseudo_inverse", cond


def condition_estimate(A):
    """1-norm condition number estimate (``inf`` for an exactly singular LU)."""
    lu, piv, info = linalg.lapack.dgetrf(A)
    if info > 0:
        return np.inf
    rcond, _ = linalg.lapack.dgecon(lu, np.linalg.norm(A, 1), norm="1")
    return float(1.0 / rcond) if rcond > 0 else np.inf


def _solution(A, b, n_transitions):
    theta, kind, cond = solve_theta(A, b)
    return EstimatorSolution(A, b, theta, kind, cond, n_transitions)


def lstd_lambda_rp_incremental(trajectory, features_phi, H, gamma, lam):
    """LSTD(lambda)-RP in its incremental (running-average) form.

    ``psi(X_t) = H phi(X_t)`` is formed on the fly for each visited state.
    Pass ``H=None`` for the identity projection, which is plain LSTD(lambda).
    """
    states, rewards = _trajectory_arrays(trajectory)
    Phi = _as_matrix(features_phi)
    if H is not None:
        H = np.ascontiguousarray(H.H if isinstance(H, ProjectionMatrix) else H,
                                 dtype=np.float64)
        if H.shape[1] != Phi.shape[1]:
            raise ValueError(f"H expects D={H.shape[1]}, features have D={Phi.shape[1]}")
    A, b = lstd_accumulate(Phi, H, states, rewards, float(gamma), float(lam))
    return _solution(A, b, states.shape[0] - 1)


def eligibility_traces(rows, gamma, lam, zi=None):
    """All traces ``z_i`` for a sequence of feature rows (one per row)."""
    rows = np.asarray(rows, dtype=np.float64)
    lg = lam * gamma
    if lg == 0.0:
        return rows.copy(), rows[-1].copy()
    if zi is None:
        zi = np.zeros(rows.shape[1])
    Z, zf = lfilter([1.0], [1.0, -lg], rows, axis=0, zi=(lg * zi)[None, :])
    return Z, zf[0] / lg


def lstd_lambda_batch(trajectory, features, gamma, lam, chunk=2048):
    """Batch LSTD(lambda) on the given feature rows.

    With unprojected features this is the D-dimensional baseline; with a
    projected map ``Psi`` it is the batch form of LSTD(lambda)-RP.  Rows
    are processed in chunks so memory stays ``O(chunk * k)``.
    """
    states, rewards = _trajectory_arrays(trajectory)
    Phi = _as_matrix(features)
    k = Phi.shape[1]
    n_tr = states.shape[0] - 1
    A = np.zeros((k, k))
    b = np.zeros(k)
    z_prev = np.zeros(k)
    for start in range(0, n_tr, chunk):
        stop = min(start + chunk, n_tr)
        cur = Phi[states[start:stop]]
        nxt = Phi[states[start + 1:stop + 1]]
        Z, z_prev = eligibility_traces(cur, gamma, lam, zi=z_prev)
        A += Z.T @ (cur - gamma * nxt)
        b += Z.T @ rewards[start:stop]
    A /= n_tr
    b /= n_tr
    return _solution(A, b, n_tr)


def lstd_rp_batch(trajectory, features_phi, H, gamma):
    """LSTD-RP: batch LSTD(0) on the projected features ``Phi H^T``."""
    Hm = H.H if isinstance(H, ProjectionMatrix) else np.asarray(H)
    return lstd_lambda_batch(trajectory, _as_matrix(features_phi) @ Hm.T, gamma, 0.0)


def model_fixed_point(mrp, mu, features_psi, lam):
    """Model-based solution of ``V = Pi_G T^lambda V``.

    ``A = Psi^T D_mu (I - gamma P)(I - lam gamma P)^{-1} Psi`` and
    ``b = Psi^T D_mu (I - lam gamma P)^{-1} r``.

    Raises
    ------
    SingularSystemError
        If ``A`` is numerically singular.
    """
    Psi = _as_matrix(features_psi)
    w = mu.mu if hasattr(mu, "mu") else np.asarray(mu, dtype=np.float64)
    n = mrp.n_states
    if Psi.shape[0] != n:
        raise ValueError(f"{Psi.shape[0]} feature rows vs {n} states")
    g = mrp.gamma
    P = mrp.P
    M = np.eye(n) - lam * g * P
    sol = np.linalg.solve(M, np.column_stack([Psi, mrp.r]))
    MinvPsi, Minvr = sol[:, :-1], sol[:, -1]
    WPsi = w[:, None] * Psi
    A = WPsi.T @ (MinvPsi - g * (P @ MinvPsi))
    b = WPsi.T @ Minvr
    cond = condition_estimate(A)
    if cond > COND_LIMIT:
        raise SingularSystemError(
            f"model matrix A is numerically singular (condition estimate {cond:.3e})", cond)
    theta = linalg.solve(A, b)
    return ModelFixedPoint(A, b, theta, Psi @ theta)


def fixed_point_residual(mrp, mu, features_psi, lam, V_fixed, proj=None):
    """``||V_fixed - Pi_G T^lambda V_fixed||_mu``."""
    from .chain import bellman_lambda, mu_norm

    if proj is None:
        proj = ProjectionOperator(FeatureMap(_as_matrix(features_psi), 1.0, validate=False), mu)
    return mu_norm(mu, V_fixed - proj(bellman_lambda(mrp, lam, V_fixed)))


def value_of(solution, features):
    theta = solution.theta if isinstance(solution, (EstimatorSolution,)) else (
        solution.theta_star if isinstance(solution, ModelFixedPoint) else np.asarray(solution))
    Phi = _as_matrix(features)
    if Phi.shape[1] != theta.shape[0]:
        raise ValueError(f"theta has length {theta.shape[0]}, features have {Phi.shape[1]} columns")
    return Phi @ theta
