"""Means, pooled covariance, symmetric eigendecomposition and the shifted pseudoinverse."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse.linalg

SYMMETRY_TOL = 1e-8
# Gram eigenvalues below this fraction of the largest are treated as exact zeros
GRAM_RANK_TOL = 1e-9
_LANCZOS_MIN_P = 200


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues in non-increasing order; column j of ``vectors`` pairs with ``values[j]``."""

    values: np.ndarray
    vectors: np.ndarray

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """Symmetric p x p estimate.

    ``factor`` (r x p, optional) satisfies ``matrix == factor.T @ factor``;
    when r < p the nonzero spectrum is read off the r x r Gram matrix.
    """

    matrix: np.ndarray
    n_effective: int = 0
    factor: np.ndarray | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"covariance must be square, got shape {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        if self.factor is not None:
            f = np.asarray(self.factor, dtype=float)
            if f.ndim != 2 or f.shape[1] != m.shape[0]:
                raise ValueError("factor must be r x p")
            object.__setattr__(self, "factor", f)

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eigen(self) -> EigenPair:
        """Full decomposition, computed once and reused."""
        _check_symmetric(self.matrix)
        w, v = np.linalg.eigh(self.matrix)
        return EigenPair(w[::-1].copy(), v[:, ::-1].copy())

    @cached_property
    def range_eigen(self) -> EigenPair | None:
        """Nonzero eigenpairs via the Gram matrix, or None without a short factor.

        The remaining p - len(range_eigen) eigenvalues are zero.
        """
        f = self.factor
        if f is None or f.shape[0] >= f.shape[1]:
            return None
        w, u = np.linalg.eigh(f @ f.T)
        w, u = w[::-1], u[:, ::-1]
        keep = w > GRAM_RANK_TOL * max(float(w[0]), 0.0)
        if not keep.any():
            return EigenPair(np.zeros(0), np.zeros((self.p, 0)))
        w, u = w[keep], u[:, keep]
        v = (f.T @ u) / np.sqrt(w)
        return EigenPair(w.copy(), v)


def _as_matrix(sigma) -> np.ndarray:
    return sigma.matrix if isinstance(sigma, CovarianceEstimate) else np.asarray(sigma, dtype=float)


def _check_symmetric(m):
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if m.size and float(np.max(np.abs(m - m.T))) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")


def sample_mean(samples) -> np.ndarray:
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2 or s.shape[0] == 0:
        raise ValueError("sample_mean needs a non-empty n x p matrix")
    return s.mean(axis=0)


def mean_threshold(n: int, p: int, c: float = 1.0) -> float:
    return c * math.sqrt(math.log(p) / n)


def thresholded_mean(samples, c: float = 1.0) -> np.ndarray:
    """Sample mean with entries below ``c * sqrt(log p / n)`` in magnitude set to zero."""
    s = np.asarray(samples, dtype=float)
    n, p = s.shape
    if n < 2 or p < 2:
        raise ValueError("thresholded_mean needs n >= 2 and p >= 2")
    if c <= 0:
        raise ValueError("threshold multiplier must be positive")
    mu = s.mean(axis=0)
    return np.where(np.abs(mu) < mean_threshold(n, p, c), 0.0, mu)


def pooled_covariance(x, z, cov_threshold: float | None = None) -> CovarianceEstimate:
    """Equal-covariance estimate: each group centred at its own mean, divisor n_x + n_z - 2.

    ``cov_threshold=c`` hard-thresholds off-diagonal entries below
    ``c * sqrt(log p / (n_x + n_z))``; ``None`` disables it.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape[0] < 2 or z.shape[0] < 2:
        raise ValueError("pooled_covariance needs >= 2 samples in each group")
    if x.shape[1] != z.shape[1]:
        raise ValueError("groups have different dimensions")
    xc = x - x.mean(axis=0)
    zc = z - z.mean(axis=0)
    n = x.shape[0] + z.shape[0]
    s = (xc.T @ xc + zc.T @ zc) / (n - 2)
    s = 0.5 * (s + s.T)
    if cov_threshold is not None and cov_threshold > 0:
        p = s.shape[0]
        t = cov_threshold * math.sqrt(math.log(p) / n)
        off = ~np.eye(p, dtype=bool)
        s[off & (np.abs(s) < t)] = 0.0
        return CovarianceEstimate(s, n)
    return CovarianceEstimate(s, n, np.vstack([xc, zc]) / math.sqrt(n - 2))


def top_eigen(sigma, k: int = 1) -> EigenPair:
    """The ``k`` largest eigenpairs of a symmetric matrix."""
    if isinstance(sigma, CovarianceEstimate):
        p = sigma.p
        if not 1 <= k <= p:
            raise ValueError(f"k must be in [1, {p}]")
        r = sigma.range_eigen
        if r is not None and k <= len(r) and r.values[k - 1] > 0:
            return EigenPair(r.values[:k].copy(), r.vectors[:, :k].copy())
        if "eigen" in sigma.__dict__ or 4 * k > p:
            e = sigma.eigen
            return EigenPair(e.values[:k].copy(), e.vectors[:, :k].copy())
        m = sigma.matrix
    else:
        m = _as_matrix(sigma)
        p = m.shape[0]
        if not 1 <= k <= p:
            raise ValueError(f"k must be in [1, {p}]")
    _check_symmetric(m)
    if p >= _LANCZOS_MIN_P and 10 * k <= p:
        # fixed start vector keeps ARPACK deterministic
        v0 = 1.0 + np.arange(p) / p
        w, v = scipy.sparse.linalg.eigsh(m, k=k, which="LA", v0=v0, tol=0.0)
        order = np.argsort(-w, kind="stable")
        return EigenPair(w[order].copy(), v[:, order].copy())
    # LAPACK's index-subset drivers can return nothing on repeated eigenvalues
    w, v = np.linalg.eigh(m)
    return EigenPair(w[::-1][:k].copy(), v[:, ::-1][:, :k].copy())


def _invert(a, rel_tol):
    inv = np.zeros_like(a)
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    if amax > 0:
        keep = np.abs(a) > rel_tol * amax
        inv[keep] = 1.0 / a[keep]
        # the direction annihilated by construction is dropped regardless of tolerance
        inv[int(np.argmin(np.abs(a)))] = 0.0
    return inv


def _shifted_spectrum(lambda1, sigma, rel_tol):
    """(inverted shifted eigenvalues, eigenvectors, inverse on the null space or None)."""
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    cov = sigma if isinstance(sigma, CovarianceEstimate) else CovarianceEstimate(sigma)
    r = cov.range_eigen
    if r is None:
        e = cov.eigen
        return _invert(lambda1 - e.values, rel_tol), e.vectors, None
    # the null space of sigma is one eigenspace of lambda1 * I - sigma, stored last
    inv = _invert(np.append(lambda1 - r.values, lambda1), rel_tol)
    return inv[:-1], r.vectors, float(inv[-1])


def pinv_shifted(lambda1: float, sigma, rel_tol: float = 1e-8) -> np.ndarray:
    """Moore-Penrose inverse of ``lambda1 * I - sigma`` by eigenvalue inversion."""
    inv, v, inv_null = _shifted_spectrum(lambda1, sigma, rel_tol)
    out = (v * inv) @ v.T
    if inv_null is not None:
        out += inv_null * (np.eye(v.shape[0]) - v @ v.T)
    return 0.5 * (out + out.T)


def pinv_shifted_apply(lambda1: float, sigma, vec, rel_tol: float = 1e-8) -> np.ndarray:
    """``pinv_shifted(lambda1, sigma) @ vec`` without forming the p x p operator."""
    vec = np.asarray(vec, dtype=float)
    inv, v, inv_null = _shifted_spectrum(lambda1, sigma, rel_tol)
    coef = v.T @ vec
    out = v @ (inv * coef)
    if inv_null is not None:
        out += inv_null * (vec - v @ coef)
    return out
