"""Sparse principal components by truncated power iteration with deflation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Direction
from .estimators import CovarianceEstimate, top_eigen


@dataclass(frozen=True)
class SparsePcConfig:
    n_components: int = 1
    sparsity_budget: int | None = None  # None: ceil(sqrt(p))
    max_iter: int = 500
    conv_tol: float = 1e-7

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.sparsity_budget is not None and self.sparsity_budget < 1:
            raise ValueError("sparsity_budget must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.conv_tol <= 0:
            raise ValueError("conv_tol must be positive")

    def budget(self, p: int) -> int:
        s = math.ceil(math.sqrt(p)) if self.sparsity_budget is None else self.sparsity_budget
        if s > p:
            raise ValueError(f"sparsity_budget {s} exceeds p={p}")
        return s


def _truncate(y, s):
    out = np.zeros_like(y)
    keep = np.argsort(-np.abs(y), kind="stable")[:s]
    out[keep] = y[keep]
    nrm = np.linalg.norm(out)
    if nrm == 0:
        raise ValueError("no principal direction: truncated iterate vanished")
    return out / nrm


def _orient(v):
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def truncated_power(matrix, init, s, max_iter=500, conv_tol=1e-7):
    """Leading ``s``-sparse direction of ``matrix`` starting from ``init``."""
    v = _truncate(init, s)
    for _ in range(max_iter):
        nxt = _truncate(matrix @ v, s)
        if nxt @ v < 0:
            nxt = -nxt
        done = np.linalg.norm(nxt - v) <= conv_tol
        v = nxt
        if done:
            break
    return _orient(v)


def sparse_pc(sigma, config: SparsePcConfig = SparsePcConfig()) -> list[Direction]:
    """``config.n_components`` sparse unit directions, each with at most ``budget`` nonzeros.

    Component j runs truncated power iteration on ``sigma`` deflated by the
    earlier components (Rayleigh-quotient weights), initialised at the dense
    leading eigenvector of that deflated matrix. The largest-magnitude entry
    of each component is positive.
    """
    cov = sigma if isinstance(sigma, CovarianceEstimate) else CovarianceEstimate(sigma)
    m = cov.matrix
    if not np.any(m):
        raise ValueError("zero matrix has no principal direction")
    s = config.budget(cov.p)
    work = cov
    out = []
    for j in range(config.n_components):
        init = top_eigen(work, 1).vectors[:, 0]
        v = truncated_power(work.matrix, init, s, config.max_iter, config.conv_tol)
        out.append(Direction(v, f"pc{j + 1}"))
        if j + 1 < config.n_components:
            lam = float(v @ m @ v)
            work = CovarianceEstimate(work.matrix - lam * np.outer(v, v))
    return out


def choose_budget(sigma, candidate_budgets, config: SparsePcConfig = SparsePcConfig()) -> int:
    """Budget maximising ``v'Sv - lambda_1 * s / p``; ties go to the smaller budget."""
    cands = sorted(set(int(c) for c in candidate_budgets))
    if not cands:
        raise ValueError("no candidate budgets")
    cov = sigma if isinstance(sigma, CovarianceEstimate) else CovarianceEstimate(sigma)
    lam1 = float(top_eigen(cov, 1).values[0])
    best, best_score = None, -np.inf
    for s in cands:
        cfg = SparsePcConfig(1, s, config.max_iter, config.conv_tol)
        v = sparse_pc(cov, cfg)[0].weights
        score = float(v @ cov.matrix @ v) - lam1 * s / cov.p
        if score > best_score:
            best, best_score = s, score
    return best
