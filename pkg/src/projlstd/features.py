"""Feature matrices, Gram matrices and mu-weighted orthogonal projections."""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import _rng
from .chain import StationaryDistribution

RANK_TOL = 1e-10


class FeatureError(ValueError):
    pass


class SingularGramError(np.linalg.LinAlgError):
    """Gram matrix is not numerically positive definite."""

    def __init__(self, message, condition=np.inf):
        super().__init__(message)
        self.condition = condition


def _weights(mu):
    return mu.mu if isinstance(mu, StationaryDistribution) else np.asarray(mu, dtype=np.float64)


def check_full_rank(Phi, tol=RANK_TOL):
    """Numerical full-column-rank test.

    Returns ``(ok, info)`` where ``info`` holds the rank and the extreme
    singular values; a singular value counts if it exceeds ``tol * s_max``.
    """
    Phi = Phi.Phi if isinstance(Phi, FeatureMap) else np.asarray(Phi, dtype=np.float64)
    s = np.linalg.svd(Phi, compute_uv=False)
    s_max = float(s[0]) if s.size else 0.0
    rank = int(np.sum(s > tol * s_max)) if s_max > 0 else 0
    info = {"rank": rank, "columns": Phi.shape[1], "sigma_max": s_max,
            "sigma_min": float(s[-1]) if s.size else 0.0}
    return rank == Phi.shape[1], info


@dataclass(frozen=True)
class FeatureMap:
    """``|X| x D`` feature matrix whose row ``x`` is ``phi(x)``.

    ``L`` is the declared per-coordinate bound ``|phi_j(x)| <= L``.  With
    ``validate`` the bound and full column rank are checked at construction.
    """

    Phi: np.ndarray
    L: float
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        Phi = np.ascontiguousarray(self.Phi, dtype=np.float64)
        if Phi.ndim != 2:
            raise FeatureError(f"feature matrix must be 2-D, got shape {Phi.shape}")
        L = float(self.L)
        if self.validate:
            if L <= 0:
                raise FeatureError("L must be positive")
            if np.max(np.abs(Phi)) > L * (1 + 1e-12):
                raise FeatureError(f"feature entries exceed the declared bound L={L}")
            ok, info = check_full_rank(Phi)
            if not ok:
                raise FeatureError(
                    f"feature matrix is rank deficient (rank {info['rank']} < {info['columns']})")
        Phi.setflags(write=False)
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "L", L)

    @property
    def D(self):
        return self.Phi.shape[1]

    @property
    def n_states(self):
        return self.Phi.shape[0]

    def max_row_norm(self):
        return float(np.max(np.linalg.norm(self.Phi, axis=1)))


@dataclass(frozen=True)
class GramMatrix:
    M: np.ndarray
    nu_min: float


def gram(features, mu):
    """``M = Phi^T D_mu Phi`` and its smallest eigenvalue."""
    Phi = features.Phi if isinstance(features, FeatureMap) else np.asarray(features)
    w = _weights(mu)
    if Phi.shape[0] != w.shape[0]:
        raise ValueError(f"{Phi.shape[0]} feature rows vs {w.shape[0]} states")
    M = Phi.T @ (w[:, None] * Phi)
    M = 0.5 * (M + M.T)
    nu = float(linalg.eigvalsh(M, subset_by_index=[0, 0])[0])
    return GramMatrix(M, nu)


class ProjectionOperator:
    """mu-weighted orthogonal projection onto the span of a feature map.

    The Gram matrix is Cholesky-factored once at construction; a failed
    factorization raises :class:`SingularGramError` rather than regularizing.
    """

    def __init__(self, basis, mu):
        self.basis = basis if isinstance(basis, FeatureMap) else FeatureMap(basis, 1.0, validate=False)
        self.mu = mu
        self._w = _weights(mu)
        self.gram = gram(self.basis, self._w)
        try:
            self.solve_cache = linalg.cho_factor(self.gram.M, lower=True)
        except linalg.LinAlgError as exc:
            cond = np.linalg.cond(self.gram.M)
            raise SingularGramError(
                f"Gram matrix is not positive definite (condition estimate {cond:.3e})",
                condition=cond) from exc

    def coefficients(self, f):
        f = np.asarray(f, dtype=np.float64)
        Phi = self.basis.Phi
        if f.shape[0] != Phi.shape[0]:
            raise ValueError(f"vector length {f.shape[0]} != {Phi.shape[0]} states")
        return linalg.cho_solve(self.solve_cache, Phi.T @ (self._w * f))

    def __call__(self, f):
        return self.project(f)[0]

    def project(self, f):
        """Return ``(Pi f, alpha)`` with ``Pi f = Phi alpha``."""
        alpha = self.coefficients(f)
        return self.basis.Phi @ alpha, alpha


def project(op, f):
    return op.project(f)


def m_functional(alpha, features):
    """``m(f_alpha) = ||alpha||_2 * max_x ||phi(x)||_2``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (features.D,):
        raise ValueError(f"alpha must have length {features.D}")
    return float(np.linalg.norm(alpha) * features.max_row_norm())


def make_features(kind, n_states, D, L=1.0, seed=0, max_retries=20, validate=True):
    """Generate a bounded, full-rank feature map.

    kind : {"one_hot", "random_bounded", "fourier_on_index"}
        ``one_hot``: indicators of states ``0..D-1`` scaled by ``L``.
        ``random_bounded``: i.i.d. Uniform[-L, L] entries, resampled on rank
        failure.
        ``fourier_on_index``: ``L cos(pi j (x + 1/2) / |X|)`` for
        ``j = 0..D-1`` (a DCT-II basis, so orthogonal columns).

    ``validate=False`` skips the rank check for the deterministic kinds,
    whose full rank holds by construction (useful at large ``D``).
    """
    n_states, D, L = int(n_states), int(D), float(L)
    if D < 1:
        raise FeatureError("D must be >= 1")
    if D > n_states:
        raise FeatureError(f"D={D} exceeds |X|={n_states}: no full-rank map exists")
    if kind == "one_hot":
        Phi = np.zeros((n_states, D))
        Phi[np.arange(D), np.arange(D)] = L
        return FeatureMap(Phi, L, validate=validate)
    if kind == "fourier_on_index":
        x = np.arange(n_states)[:, None] + 0.5
        j = np.arange(D)[None, :]
        return FeatureMap(L * np.cos(np.pi * j * x / n_states), L, validate=validate)
    if kind == "random_bounded":
        rng = _rng.stream(seed, _rng.FEATURES, n_states, D)
        for _ in range(max_retries):
            Phi = rng.uniform(-L, L, size=(n_states, D))
            if check_full_rank(Phi)[0]:
                return FeatureMap(Phi, L)
        raise FeatureError(f"no full-rank random feature map after {max_retries} draws")
    raise FeatureError(f"unknown feature kind {kind!r}")
