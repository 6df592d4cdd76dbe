"""Gaussian random projections and Monte-Carlo checks of their JL properties."""

import warnings
from dataclasses import dataclass

import numpy as np

from . import _rng
from .features import FeatureMap, gram


@dataclass(frozen=True)
class ProjectionMatrix:
    """``d x D`` matrix with i.i.d. N(0, 1/d) entries, reproducible from ``seed``."""

    H: np.ndarray
    seed: int

    @property
    def d(self):
        return self.H.shape[0]

    @property
    def D(self):
        return self.H.shape[1]


def sample_projection(d, D, seed, *keys):
    """Draw ``H`` from the projection sub-stream of ``seed``.

    Extra ``keys`` select independent draws under one master seed.  The
    entries are ``standard_normal / sqrt(d)``.
    """
    d, D = int(d), int(D)
    if d < 1 or D < 1:
        raise ValueError(f"projection dimensions must be positive, got d={d}, D={D}")
    rng = _rng.stream(seed, _rng.PROJECTION, d, D, *keys)
    H = rng.standard_normal((d, D)) / np.sqrt(d)
    H.setflags(write=False)
    return ProjectionMatrix(H, int(seed))


def identity_projection(D):
    return ProjectionMatrix(np.eye(D), -1)


def _matrix(H):
    return H.H if isinstance(H, ProjectionMatrix) else np.asarray(H, dtype=np.float64)


def apply(H, features):
    """Projected feature map ``Psi = Phi H^T`` (rows ``psi(x) = H phi(x)``).

    The projected map's bound is the empirical ``max |psi_j(x)|``.
    """
    Hm = _matrix(H)
    Phi = features.Phi if isinstance(features, FeatureMap) else np.asarray(features)
    if Hm.shape[1] != Phi.shape[1]:
        raise ValueError(f"projection expects D={Hm.shape[1]} features, got {Phi.shape[1]}")
    Psi = Phi @ Hm.T
    L = float(np.max(np.abs(Psi))) or 1.0
    return FeatureMap(Psi, L, validate=False)


def jl_failure_bound(d, eps):
    """``2 exp(-d (eps^2/4 - eps^3/6))``."""
    return float(2.0 * np.exp(-d * (eps ** 2 / 4.0 - eps ** 3 / 6.0)))


def binomial_slack(p, n_trials, n_sigma=3.0):
    p = min(max(p, 0.0), 1.0)
    return float(n_sigma * np.sqrt(p * (1.0 - p) / n_trials))


def _rows(vectors):
    U = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    norms = np.linalg.norm(U, axis=1)
    keep = norms > 0
    skipped = int(np.count_nonzero(~keep))
    return U[keep], norms[keep], skipped


def jl_distortion_rate(H, vectors, eps):
    """Fraction of vectors with ``| ||Hu||^2 - ||u||^2 | >= eps ||u||^2``.

    Zero vectors are skipped with a warning stating how many.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    U, norms, skipped = _rows(vectors)
    if skipped:
        warnings.warn(f"skipped {skipped} zero vector(s)", RuntimeWarning, stacklevel=2)
    if U.shape[0] == 0:
        return 0.0
    Hm = _matrix(H)
    HU = U @ Hm.T
    proj_sq = np.einsum("ij,ij->i", HU, HU)
    ratio = np.abs(proj_sq - norms ** 2) / norms ** 2
    return float(np.mean(ratio >= eps))


def inner_product_distortion(H, us, w):
    """``max_k |Hu_k . Hw - u_k . w| / (||u_k|| ||w||)`` over nonzero ``u_k``."""
    w = np.asarray(w, dtype=np.float64)
    w_norm = np.linalg.norm(w)
    if w_norm == 0:
        raise ValueError("w must be nonzero")
    U, norms, _ = _rows(us)
    if U.shape[0] == 0:
        return 0.0
    Hm = _matrix(H)
    Hw = Hm @ w
    dist = np.abs((U @ Hm.T) @ Hw - U @ w) / (norms * w_norm)
    return float(np.max(dist))


def inner_product_min_dim(n, delta, eps):
    """Smallest d with ``d >= log(4n/delta) / (eps^2/4 - eps^3/6)``."""
    return int(np.ceil(np.log(4.0 * n / delta) / (eps ** 2 / 4.0 - eps ** 3 / 6.0)))


def gram_eig_lower_bound(nu_F, d, D, delta):
    """``(D/d) nu_F (1 - sqrt(d/D) - sqrt(2 log(2/delta) / D))^2``."""
    inner = 1.0 - np.sqrt(d / D) - np.sqrt(2.0 * np.log(2.0 / delta) / D)
    if inner <= 0:
        raise ValueError("D too small relative to d for the eigenvalue relation")
    return float((D / d) * nu_F * inner ** 2)


def projected_gram_min_eig(H, F):
    """Smallest eigenvalue of ``G = H F H^T`` for a precomputed Gram ``F``."""
    Hm = _matrix(H)
    G = Hm @ F @ Hm.T
    return float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])


def gram_eig_relation_rate(features, mu, d, delta, n_draws, seed):
    """Fraction of projection draws satisfying the Gram eigenvalue relation.

    Returns ``(rate, lower_bound, nu_F)``.
    """
    F = gram(features, mu)
    D = features.D
    bound = gram_eig_lower_bound(F.nu_min, d, D, delta)
    hits = 0
    for k in range(n_draws):
        H = sample_projection(d, D, seed, k)
        hits += projected_gram_min_eig(H, F.M) >= bound
    return hits / n_draws, bound, F.nu_min
