"""Out-of-fold nuisance fits and the eigenvector influence function.

For a fitted direction v (the k-th principal component of the pooled
covariance S, eigenvalue lam) and s = (lam*I - S)^+ (mu_x - mu_z), the
influence of an observation x from a group with mean mu is

    phi(x) = (s'c)(c'v) - s'Sv,   c = x - mu,

which is s'[(x - mu)(x - mu)' - S]v evaluated without the outer product.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from .dataset import Dataset, Direction, FoldPlan
from .estimators import (CovarianceEstimate, pinv_shifted_apply, pooled_covariance,
                         sample_mean, thresholded_mean, top_eigen)
from .sparse_pca import SparsePcConfig, sparse_pc

if TYPE_CHECKING:
    from .simulation import PopulationSpec

CONTROL = "control"
TREATMENT = "treatment"


@dataclass(frozen=True)
class NuisanceOptions:
    threshold_means: bool = True
    threshold_c: float = 1.0
    dense_pc: bool = False
    sparsity_budget: int | None = None
    cov_threshold: float | None = None
    rel_tol: float = 1e-8


@dataclass(frozen=True, eq=False)
class NuisanceFit:
    mu_x: np.ndarray
    mu_z: np.ndarray
    sigma: CovarianceEstimate
    lambda1: float
    v1: Direction
    s: np.ndarray
    w: float
    pc_index: int = 1

    @cached_property
    def s_sigma_v(self) -> float:
        return float(self.s @ (self.sigma.matrix @ self.v1.weights))

    def flipped(self) -> NuisanceFit:
        return replace(self, v1=-self.v1)

    def group_mean(self, group: str) -> np.ndarray:
        if group == CONTROL:
            return self.mu_x
        if group == TREATMENT:
            return self.mu_z
        raise ValueError(f"group must be {CONTROL!r} or {TREATMENT!r}, got {group!r}")


def principal_direction(sigma: CovarianceEstimate, pc_index: int, dense: bool = False,
                        sparsity_budget: int | None = None) -> Direction:
    if not 1 <= pc_index <= sigma.p:
        raise ValueError(f"pc_index {pc_index} outside 1..{sigma.p}")
    if dense:
        v = top_vector(sigma, pc_index)
        return Direction(v, f"pc{pc_index}")
    return sparse_pc(sigma, SparsePcConfig(pc_index, sparsity_budget))[-1]


def top_vector(sigma: CovarianceEstimate, pc_index: int) -> np.ndarray:
    v = top_eigen(sigma, pc_index).vectors[:, pc_index - 1]
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def nuisance_from_samples(x_train, z_train, pc_index: int = 1,
                          options: NuisanceOptions = NuisanceOptions(),
                          w: float = 0.5) -> NuisanceFit:
    """Nuisance quantities estimated from training samples of both groups."""
    x_train = np.asarray(x_train, dtype=float)
    z_train = np.asarray(z_train, dtype=float)
    if x_train.shape[0] < 2 or z_train.shape[0] < 2:
        raise ValueError("nuisance fitting needs >= 2 training samples per group")
    if options.threshold_means:
        mu_x = thresholded_mean(x_train, options.threshold_c)
        mu_z = thresholded_mean(z_train, options.threshold_c)
    else:
        mu_x, mu_z = sample_mean(x_train), sample_mean(z_train)
    sigma = pooled_covariance(x_train, z_train, options.cov_threshold)
    v = principal_direction(sigma, pc_index, options.dense_pc, options.sparsity_budget)
    lam = float(top_eigen(sigma, pc_index).values[pc_index - 1])
    s = pinv_shifted_apply(lam, sigma, mu_x - mu_z, options.rel_tol)
    return NuisanceFit(mu_x, mu_z, sigma, lam, v, s, w, pc_index)


def fit_nuisance(dataset: Dataset, plan: FoldPlan, m: int, pc_index: int = 1,
                 options: NuisanceOptions = NuisanceOptions()) -> NuisanceFit:
    """Fit on the complement of fold ``m``; ``w`` uses fold ``m``'s own group counts."""
    x_in, z_in, x_out, z_out = plan.split(dataset, m)
    if x_out.shape[0] < 2 or z_out.shape[0] < 2:
        raise ValueError(f"complement of fold {m} has fewer than 2 samples in a group")
    w = x_in.shape[0] / (x_in.shape[0] + z_in.shape[0])
    return nuisance_from_samples(x_out, z_out, pc_index, options, w)


def nuisance_from_population(spec: PopulationSpec, pc_index: int = 1, w: float = 0.5,
                             rel_tol: float = 1e-8) -> NuisanceFit:
    """Oracle nuisances: every quantity replaced by its population value."""
    lam, v = spec.eigenpair(pc_index)
    sigma = spec.covariance
    s = pinv_shifted_apply(lam, sigma, spec.mu_x - spec.mu_z, rel_tol)
    return NuisanceFit(spec.mu_x, spec.mu_z, sigma, lam, Direction(v, f"pc{pc_index}"), s, w, pc_index)


def influence_values(samples, fit: NuisanceFit, group: str) -> np.ndarray:
    c = np.atleast_2d(np.asarray(samples, dtype=float)) - fit.group_mean(group)
    return (c @ fit.s) * (c @ fit.v1.weights) - fit.s_sigma_v


def influence_value(x, fit: NuisanceFit, group: str) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != fit.s.shape:
        raise ValueError(f"expected a length-{fit.s.shape[0]} vector")
    return float(influence_values(x[None, :], fit, group)[0])


def true_influence(x, spec: PopulationSpec, group: str, pc_index: int = 1) -> np.ndarray | float:
    """Influence function at the population truth (a test oracle)."""
    fit = nuisance_from_population(spec, pc_index)
    x = np.asarray(x, dtype=float)
    vals = influence_values(x, fit, group)
    return float(vals[0]) if x.ndim == 1 else vals
