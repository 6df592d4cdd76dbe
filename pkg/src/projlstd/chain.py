"""Finite Markov reward processes.

A policy is assumed to be already applied, so a process is just a
row-stochastic transition matrix ``P``, a deterministic state reward ``r`` and
a discount ``gamma``.  This module provides the exact model-based quantities
(stationary distribution, value function, Bellman operators, mu-weighted
norm) and trajectory sampling.
"""

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import _rng
from .kernels import sample_path

STOCHASTIC_TOL = 1e-12


class ChainError(ValueError):
    """Raised for malformed or non-ergodic chains."""


class ConvergenceError(RuntimeError):
    """Raised when the stationary solver cannot reach its residual target."""


def _period(support):
    """Period of an irreducible chain from the BFS levels of state 0."""
    n = support.shape[0]
    order, _ = breadth_first_order(support, 0, directed=True, return_predecessors=True)
    level = np.full(n, -1, dtype=np.int64)
    level[0] = 0
    for u in order:
        nbrs = np.flatnonzero(support[u])
        fresh = nbrs[level[nbrs] < 0]
        level[fresh] = level[u] + 1
    g = 0
    rows, cols = np.nonzero(support)
    for u, v in zip(rows.tolist(), cols.tolist()):
        g = gcd(g, abs(int(level[u]) + 1 - int(level[v])))
    return g


@dataclass(frozen=True)
class MarkovRewardProcess:
    """Post-policy Markov chain ``(P, r, gamma)`` with declared reward bound.

    Parameters
    ----------
    P : (S, S) array_like
        Row-stochastic transition matrix.
    r : (S,) array_like
        State rewards.
    gamma : float
        Discount in [0, 1).  ``gamma = 0`` is accepted as a degenerate case.
    r_max : float, optional
        Declared bound on ``|r|``; defaults to ``max|r|`` (or 1 if r = 0).
    require_aperiodic : bool
        Reject periodic chains.  Irreducibility is always required.
    """

    P: np.ndarray
    r: np.ndarray
    gamma: float
    r_max: float = None
    require_aperiodic: bool = field(default=True, repr=False)

    def __post_init__(self):
        P = np.array(self.P, dtype=np.float64)
        r = np.array(self.r, dtype=np.float64).reshape(-1)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ChainError(f"P must be square, got shape {P.shape}")
        if r.shape[0] != P.shape[0]:
            raise ChainError(f"reward length {r.shape[0]} != number of states {P.shape[0]}")
        if not np.all(np.isfinite(P)) or np.any(P < 0):
            raise ChainError("P must have finite, nonnegative entries")
        row_err = np.max(np.abs(P.sum(axis=1) - 1.0))
        if row_err > STOCHASTIC_TOL:
            raise ChainError(f"rows of P must sum to 1 (max deviation {row_err:.3e})")
        gamma = float(self.gamma)
        if not 0.0 <= gamma < 1.0:
            raise ChainError(f"gamma must lie in [0, 1), got {gamma}")
        r_max = float(np.max(np.abs(r))) if self.r_max is None else float(self.r_max)
        if r_max == 0.0:
            r_max = 1.0
        if np.any(np.abs(r) > r_max):
            raise ChainError(f"|r| exceeds declared r_max={r_max}")

        support = P > 0
        n_comp, _ = connected_components(support, directed=True, connection="strong")
        if n_comp != 1:
            raise ChainError(f"chain is reducible ({n_comp} communicating classes)")
        if self.require_aperiodic:
            period = _period(support)
            if period != 1:
                raise ChainError(f"chain is periodic with period {period}")

        P.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "r_max", r_max)

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def v_max(self):
        return self.r_max / (1.0 - self.gamma)


@dataclass(frozen=True)
class StationaryDistribution:
    mu: np.ndarray
    method: str = "power"
    residual: float = 0.0

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    def __len__(self):
        return self.mu.shape[0]

    @property
    def diag(self):
        """The weighting matrix D_mu."""
        return np.diag(self.mu)


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    rewards: np.ndarray
    seed: int
    stationary_start: bool

    def __len__(self):
        return self.states.shape[0]


def stationary_distribution(mrp, tol=1e-13, max_iter=10**6):
    """Stationary distribution by power iteration on ``P.T``.

    Falls back to a dense eigen-solve when power iteration stalls (e.g. on
    periodic chains).  The result satisfies ``mu @ P == mu`` to 1e-10.

    Raises
    ------
    ConvergenceError
        If neither method reaches the 1e-10 residual target.
    """
    P = mrp.P
    n = P.shape[0]
    mu = np.full(n, 1.0 / n)
    method = "power"
    converged = False
    for _ in range(max_iter):
        nxt = mu @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - mu)) <= tol:
            mu = nxt
            converged = True
            break
        mu = nxt
    residual = float(np.max(np.abs(mu @ P - mu)))
    if not converged or residual > 1e-10:
        method = "eigen"
        w, vl = linalg.eig(P.T)
        idx = int(np.argmin(np.abs(w - 1.0)))
        vec = np.real(vl[:, idx])
        mu = np.abs(vec) / np.abs(vec).sum()
        residual = float(np.max(np.abs(mu @ P - mu)))
        if residual > 1e-10:
            raise ConvergenceError(
                f"stationary distribution residual {residual:.3e} exceeds 1e-10")
    return StationaryDistribution(mu, method=method, residual=residual)


def _check_len(mrp, f):
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (mrp.n_states,):
        raise ValueError(f"expected a vector of length {mrp.n_states}, got shape {f.shape}")
    return f


def exact_value(mrp):
    """``V = (I - gamma P)^{-1} r``."""
    n = mrp.n_states
    return np.linalg.solve(np.eye(n) - mrp.gamma * mrp.P, mrp.r)


def bellman(mrp, f):
    """``T f = r + gamma P f``."""
    f = _check_len(mrp, f)
    return mrp.r + mrp.gamma * (mrp.P @ f)


def bellman_lambda(mrp, lam, f):
    """Multi-step operator ``T^lambda f``, in closed form.

    ``T^lambda f = (I - lam gamma P)^{-1} r + (1 - lam) gamma P (I - lam gamma P)^{-1} f``.
    At ``lam = 1`` the second term vanishes and the result is the value function.
    """
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    f = _check_len(mrp, f)
    n = mrp.n_states
    g = mrp.gamma
    if lam == 1.0:
        return exact_value(mrp)
    M = np.eye(n) - lam * g * mrp.P
    if lam == 0.0:
        return bellman(mrp, f)
    rhs = np.column_stack([mrp.r, f])
    sol = np.linalg.solve(M, rhs)
    return sol[:, 0] + (1.0 - lam) * g * (mrp.P @ sol[:, 1])


def mu_norm(mu, f):
    """``||f||_mu = sqrt(sum_x f(x)^2 mu(x))``."""
    w = mu.mu if isinstance(mu, StationaryDistribution) else np.asarray(mu, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if f.shape != w.shape:
        raise ValueError(f"shape mismatch: f {f.shape} vs mu {w.shape}")
    return float(np.sqrt(np.dot(w, f * f)))


def sample_trajectory(mrp, n, seed, stationary_start=True, start_state=0, mu=None,
                      rng=None):
    """Sample ``X_1..X_n`` from the chain.

    One uniform is drawn per state: the first picks ``X_1`` from ``mu`` when
    ``stationary_start`` (otherwise it is consumed and ``start_state`` is
    used); each later one picks the successor by inverse-CDF on ``P[X_t]``.
    The uniforms come from the trajectory sub-stream of ``seed`` unless an
    explicit ``rng`` is supplied.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"trajectory length must be >= 2, got {n}")
    if rng is None:
        rng = _rng.stream(seed, _rng.TRAJECTORY)
    u = rng.random(n)
    if stationary_start:
        if mu is None:
            mu = stationary_distribution(mrp)
        w = mu.mu if isinstance(mu, StationaryDistribution) else np.asarray(mu)
        x0 = min(int(np.searchsorted(np.cumsum(w), u[0], side="right")), mrp.n_states - 1)
    else:
        x0 = int(start_state)
        if not 0 <= x0 < mrp.n_states:
            raise ValueError(f"start_state {x0} out of range")
    cdf = np.ascontiguousarray(np.cumsum(mrp.P, axis=1))
    states = sample_path(cdf, np.ascontiguousarray(u[1:]), x0)
    rewards = mrp.r[states]
    return Trajectory(states=states, rewards=rewards, seed=int(seed),
                      stationary_start=bool(stationary_start))


# ---------------------------------------------------------------------------
# test-bed generators

def _rewards_for(n_states, reward_kind, rng, rewards=None):
    if rewards is not None:
        r = np.asarray(rewards, dtype=np.float64)
        if r.shape != (n_states,):
            raise ChainError(f"rewards must have length {n_states}")
        return r
    if reward_kind in (None, "indicator"):
        r = np.zeros(n_states)
        r[0] = 1.0
        return r
    if reward_kind == "ends":
        r = np.zeros(n_states)
        r[0] = r[-1] = 1.0
        return r
    if reward_kind == "uniform":
        return rng.uniform(-1.0, 1.0, size=n_states)
    if reward_kind == "index":
        return np.linspace(-1.0, 1.0, n_states) if n_states > 1 else np.ones(1)
    raise ChainError(f"unknown reward_kind {reward_kind!r}")


def ring_matrix(n_states, stay):
    P = np.zeros((n_states, n_states))
    idx = np.arange(n_states)
    P[idx, (idx + 1) % n_states] += 1.0 - stay
    P[idx, idx] += stay
    return P


def chain_walk_matrix(n_states, noise):
    """Walk to the right, bounce at the right end; ``noise`` reverses a step.

    A step that would leave the line keeps the walker in place.
    """
    P = np.zeros((n_states, n_states))
    if n_states == 1:
        P[0, 0] = 1.0
        return P
    for x in range(n_states):
        step = 1 if x < n_states - 1 else -1
        for s, p in ((step, 1.0 - noise), (-step, noise)):
            if p == 0.0:
                continue
            y = x + s
            if y < 0 or y >= n_states:
                y = x
            P[x, y] += p
    return P


def random_ergodic_matrix(n_states, rng, concentration=1.0, floor=1e-3):
    """Rows drawn from Gamma(concentration) weights, floored to stay positive."""
    W = rng.gamma(concentration, size=(n_states, n_states)) + floor
    return W / W.sum(axis=1, keepdims=True)


def make_chain(kind, n_states, params=None, seed=0, gamma=0.9, reward_kind=None,
               rewards=None, strict=True):
    """Build a benchmark chain.

    kind : {"ring", "random_ergodic", "chain_walk"}
        ``ring``: ``P(i -> i+1 mod S) = 1 - stay``, ``P(i -> i) = stay``
        (params: ``stay``, default 0.1).
        ``random_ergodic``: strictly positive random rows (params:
        ``concentration``, ``floor``).
        ``chain_walk``: see :func:`chain_walk_matrix` (params: ``noise``,
        default 0.1).
    strict : bool
        Also require aperiodicity.  Degenerate deterministic chains such as
        ``chain_walk`` with ``noise=0`` need ``strict=False``.
    """
    params = dict(params or {})
    n_states = int(n_states)
    if n_states < 1:
        raise ChainError("n_states must be >= 1")
    rng = _rng.stream(seed, _rng.CHAIN)
    if kind == "ring":
        P = ring_matrix(n_states, float(params.get("stay", 0.1)))
    elif kind == "chain_walk":
        P = chain_walk_matrix(n_states, float(params.get("noise", 0.1)))
    elif kind == "random_ergodic":
        P = random_ergodic_matrix(n_states, rng,
                                  concentration=float(params.get("concentration", 1.0)),
                                  floor=float(params.get("floor", 1e-3)))
    else:
        raise ChainError(f"unknown chain kind {kind!r}")
    if reward_kind is None and rewards is None and kind == "chain_walk":
        reward_kind = "ends"
    r = _rewards_for(n_states, reward_kind, rng, rewards)
    return MarkovRewardProcess(P, r, gamma, r_max=params.get("r_max"),
                               require_aperiodic=strict)
