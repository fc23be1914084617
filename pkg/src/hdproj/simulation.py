"""Data-generating processes with population oracles, and the Monte Carlo harness.

Settings
--------
appA-global / appA-projected
    p = 100 Gaussian, Sigma = 3 v1 v1' + I, v1 uniform on the first 10
    coordinates; default N_X = 500, N_Z = 250.
f1-global / f1-projected / f1-alternative
    p = 1000 zero-inflated Gaussian: a N(mu_pre, Sigma_pre) draw with every
    entry independently zeroed with probability 1/2,
    Sigma_pre = 100 v1 v1' + 50 v2 v2' + I.
f2
    p = 300 Gaussian with a 30-block covariance, then half the entries
    zeroed at random and everything below 0.5 set to 0.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy.stats import kstest, norm

from .dataset import Dataset, make_folds
from .estimators import CovarianceEstimate
from .projection_tests import (DegenerateVarianceError, TestOptions, TestResult, t_anchored,
                               t_onestep, t_plugin)
from .seeding import mix64, rng_from_seed
from .sparse_logistic import AnchorConfig, fit_logistic_lasso

SETTINGS = ("appA-global", "appA-projected", "f1-global", "f1-projected", "f1-alternative", "f2")


@dataclass(frozen=True, eq=False)
class PopulationSpec:
    """Population means and covariance of a setting, plus analytic eigen-structure when known.

    ``eigvals`` is the full analytic spectrum in non-increasing order (or
    None); ``v1``/``v2`` are analytic eigenvectors (or None).
    """

    mu_x: np.ndarray
    mu_z: np.ndarray
    sigma: np.ndarray
    eigvals: np.ndarray | None = None
    v1: np.ndarray | None = None
    v2: np.ndarray | None = None
    label: str = ""

    @property
    def p(self) -> int:
        return self.mu_x.shape[0]

    @cached_property
    def covariance(self) -> CovarianceEstimate:
        return CovarianceEstimate(self.sigma)

    @cached_property
    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError:
            jitter = 1e-10 * np.trace(self.sigma) / self.p
            return np.linalg.cholesky(self.sigma + jitter * np.eye(self.p))

    def eigenpair(self, k: int) -> tuple[float, np.ndarray]:
        """(lambda_k, v_k), analytic where available, sign fixed so the largest entry is positive."""
        if not 1 <= k <= self.p:
            raise ValueError(f"pc index {k} outside 1..{self.p}")
        analytic = {1: self.v1, 2: self.v2}.get(k)
        if self.eigvals is not None:
            lam = float(self.eigvals[k - 1])
        else:
            lam = float(self.covariance.eigen.values[k - 1])
        v = analytic if analytic is not None else self.covariance.eigen.vectors[:, k - 1]
        v = np.asarray(v, dtype=float)
        return lam, (-v if v[np.argmax(np.abs(v))] < 0 else v)


def _frozen(*arrays):
    for a in arrays:
        if a is not None:
            a.flags.writeable = False
    return arrays


@lru_cache(maxsize=None)
def appendix_a_population(setting: str) -> PopulationSpec:
    p = 100
    mu_x = np.r_[np.full(5, 2.5), np.full(5, -2.5), np.zeros(90)]
    if setting == "global_null":
        mu_z = mu_x.copy()
    elif setting == "projected_null":
        mu_z = -mu_x
    else:
        raise ValueError(f"unknown setting {setting!r}")
    v1 = np.r_[np.ones(10), np.zeros(90)] / np.sqrt(10)
    sigma = 3 * np.outer(v1, v1) + np.eye(p)
    eig = np.r_[4.0, np.ones(p - 1)]
    _frozen(mu_x, mu_z, sigma, eig, v1)
    return PopulationSpec(mu_x, mu_z, sigma, eig, v1, None, f"appA-{setting}")


_F1_MEANS = {
    "global_null": (np.r_[np.ones(20), np.zeros(980)], np.r_[np.ones(20), np.zeros(980)]),
    "projected_null": (np.r_[np.ones(20), np.zeros(980)], np.r_[np.ones(20), np.full(20, 5.0), np.zeros(960)]),
    "alternative": (np.r_[np.ones(20), np.zeros(980)], np.r_[np.full(20, 1.2), np.full(20, 0.9), np.zeros(960)]),
}


def zero_inflated_pre(setting: str):
    """(mu_x_pre, mu_z_pre, sigma_pre, v1, v2) of the Gaussian layer."""
    if setting not in _F1_MEANS:
        raise ValueError(f"unknown setting {setting!r}")
    p = 1000
    v1 = np.r_[np.ones(20), np.zeros(980)] / np.sqrt(20)
    v2 = np.r_[np.zeros(20), np.ones(20), np.zeros(960)] / np.sqrt(20)
    sigma_pre = 100 * np.outer(v1, v1) + 50 * np.outer(v2, v2) + np.eye(p)
    mx, mz = _F1_MEANS[setting]
    return mx.copy(), mz.copy(), sigma_pre, v1, v2


@lru_cache(maxsize=None)
def zero_inflated_population(setting: str) -> PopulationSpec:
    """Moments after masking: mu = mu_pre / 2, Sigma_ii = Sigma_pre_ii / 2, Sigma_ij = Sigma_pre_ij / 4."""
    mx, mz, sigma_pre, v1, v2 = zero_inflated_pre(setting)
    sigma = sigma_pre / 4
    sigma[np.diag_indices_from(sigma)] = np.diag(sigma_pre) / 2
    eig = np.r_[26.75, 13.625, np.full(19, 1.75), np.full(19, 1.125), np.full(960, 0.5)]
    mu_x, mu_z = mx / 2, mz / 2
    _frozen(mu_x, mu_z, sigma, eig, v1, v2)
    return PopulationSpec(mu_x, mu_z, sigma, eig, v1, v2, f"f1-{setting}")


@lru_cache(maxsize=None)
def block_population() -> PopulationSpec:
    """Gaussian layer of the block setting (before masking and truncation)."""
    p = 300
    sigma = np.eye(p)
    sigma[:10, :10] = np.full((10, 10), 1.8) + 0.2 * np.eye(10)
    sigma[10:20, 10:20] = np.full((10, 10), 0.6) + 0.4 * np.eye(10)
    mu_x = np.ones(p)
    mu_z = np.r_[np.ones(10), np.full(10, 2.0), np.ones(280)]
    # compound symmetry a, b (size 10): a + 9b once, a - b nine times
    eig = np.sort(np.r_[18.2, 6.4, np.ones(280), np.full(9, 0.2), np.full(9, 0.4)])[::-1]
    v1 = np.r_[np.ones(10), np.zeros(290)] / np.sqrt(10)
    v2 = np.r_[np.zeros(10), np.ones(10), np.zeros(280)] / np.sqrt(10)
    _frozen(mu_x, mu_z, sigma, eig, v1, v2)
    return PopulationSpec(mu_x, mu_z, sigma, eig, v1, v2, "f2")


def _normal(rng, mu, chol, n):
    return mu + rng.standard_normal((n, mu.shape[0])) @ chol.T


def _setting_name(setting: str) -> str:
    return {"global": "global_null", "projected": "projected_null"}.get(setting, setting)


def gen_appendix_a(setting: str, seed: int, n_x: int = 500, n_z: int = 250):
    """Gaussian two-sample data with Sigma = 3 v1 v1' + I (p = 100)."""
    spec = appendix_a_population(_setting_name(setting))
    rng = rng_from_seed(seed)
    chol = spec.cholesky
    x = _normal(rng, spec.mu_x, chol, n_x)
    z = _normal(rng, spec.mu_z, chol, n_z)
    return Dataset(x, z), spec


def gen_zero_inflated(setting: str, n_per_group: int, seed: int, n_z: int | None = None):
    """Zero-inflated Gaussian data (p = 1000); ``n_z`` defaults to ``n_per_group``."""
    setting = _setting_name(setting)
    n_x = n_per_group
    n_z = n_per_group if n_z is None else n_z
    if min(n_x, n_z) < 4:
        raise ValueError("need at least 4 samples per group")
    spec = zero_inflated_population(setting)
    mx, mz, _, _, _ = zero_inflated_pre(setting)
    chol = _f1_cholesky()
    rng = rng_from_seed(seed)
    x = _normal(rng, mx, chol, n_x)
    z = _normal(rng, mz, chol, n_z)
    x[rng.random(x.shape) < 0.5] = 0.0
    z[rng.random(z.shape) < 0.5] = 0.0
    return Dataset(x, z), spec


@lru_cache(maxsize=1)
def _f1_cholesky():
    return np.linalg.cholesky(zero_inflated_pre("global_null")[2])


def gen_blocks(n_x: int = 250, n_z: int = 50, seed: int = 0):
    """Block-covariance data, half the entries zeroed, values below 0.5 set to 0 (p = 300)."""
    if min(n_x, n_z) < 4:
        raise ValueError("need at least 4 samples per group")
    spec = block_population()
    rng = rng_from_seed(seed)
    x = _normal(rng, spec.mu_x, spec.cholesky, n_x)
    z = _normal(rng, spec.mu_z, spec.cholesky, n_z)
    for a in (x, z):
        a[rng.random(a.shape) < 0.5] = 0.0
        a[a < 0.5] = 0.0
    return Dataset(x, z), spec


DEFAULT_SIZES = {"appA": (500, 250), "f1": (500, 500), "f2": (250, 50)}


@dataclass(frozen=True)
class GeneratorSpec:
    """A named setting with group sizes; calling it with a seed yields ``(Dataset, PopulationSpec)``."""

    setting: str
    n_x: int | None = None
    n_z: int | None = None

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; choose from {', '.join(SETTINGS)}")
        family = self.setting.split("-")[0]
        nx, nz = DEFAULT_SIZES[family]
        if self.n_z is not None:
            nz = self.n_z
        elif family == "f1" and self.n_x is not None:
            nz = self.n_x
        object.__setattr__(self, "n_x", nx if self.n_x is None else self.n_x)
        object.__setattr__(self, "n_z", nz)

    def __call__(self, seed: int):
        family, _, variant = self.setting.partition("-")
        if family == "appA":
            return gen_appendix_a(variant, seed, self.n_x, self.n_z)
        if family == "f1":
            return gen_zero_inflated(variant, self.n_x, seed, self.n_z)
        return gen_blocks(self.n_x, self.n_z, seed)


@dataclass(frozen=True)
class TestSpec:
    """Which statistic to run inside the harness; ``oracle`` substitutes population nuisances."""

    __test__ = False

    statistic: str = "plugin"
    pc_index: int = 1
    oracle: bool = False
    options: TestOptions = field(default_factory=TestOptions)
    anchor: AnchorConfig = field(default_factory=AnchorConfig)

    def __post_init__(self):
        if self.statistic not in ("plugin", "onestep", "anchored"):
            raise ValueError(f"unknown statistic {self.statistic!r}")

    def __call__(self, dataset, plan, population=None) -> TestResult:
        oracle = population if self.oracle else None
        if self.oracle and population is None:
            raise ValueError("oracle mode needs the population spec")
        if self.statistic == "plugin":
            return t_plugin(dataset, plan, None, self.options, oracle, self.pc_index)
        if self.statistic == "onestep":
            return t_onestep(dataset, plan, self.pc_index, self.options, oracle)
        return t_anchored(dataset, plan, self.anchor, self.options, oracle, pc_index=self.pc_index)


@dataclass
class McReport:
    reps: int
    rejections: int
    rejection_rate: float
    statistic_samples: np.ndarray
    ks_to_normal: float
    degenerate_reps: int
    seed: int
    alpha: float = 0.05
    ci_coverage: float | None = None
    rep_index: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "reps": self.reps,
            "rejections": self.rejections,
            "rejection_rate": self.rejection_rate,
            "statistic_samples": self.statistic_samples.tolist(),
            "ks_to_normal": self.ks_to_normal,
            "degenerate_reps": self.degenerate_reps,
            "seed": self.seed,
            "alpha": self.alpha,
            "ci_coverage": self.ci_coverage,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write_csv(self, path) -> None:
        idx = self.rep_index if self.rep_index is not None else np.arange(self.statistic_samples.size)
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("rep,t\n")
            for r, t in zip(idx.tolist(), self.statistic_samples.tolist()):
                fh.write(f"{r},{t!r}\n")


def _run_rep(job):
    r, base_seed, generator, tests, m_folds = job
    seed = mix64(base_seed, r)
    dataset, population = generator(seed)
    plan = make_folds(dataset.n_x, dataset.n_z, m_folds, seed)
    out = {}
    for name, test in tests.items():
        try:
            res = test(dataset, plan, population)
        except DegenerateVarianceError:
            out[name] = None
            continue
        if isinstance(res, TestResult):
            out[name] = (res.statistic, res.ci_95)
        else:
            out[name] = (float(res), None)
    return out


def default_workers() -> int:
    env = os.environ.get("HDPROJ_WORKERS")
    return int(env) if env else (os.cpu_count() or 1)


def monte_carlo_many(generator: Callable, tests: Mapping[str, Callable], reps: int,
                     base_seed: int = 0, alpha: float = 0.05, m_folds: int = 2,
                     workers: int = 1, ci_target: float = 0.0,
                     progress: Callable[[int], None] | None = None) -> dict[str, McReport]:
    """Run several statistics on the same simulated datasets.

    Replicate ``r`` draws its data and fold plan from seed ``mix64(base_seed, r)``;
    results are aggregated in replicate order, so the output does not depend
    on ``workers``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    jobs = [(r, base_seed, generator, dict(tests), m_folds) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_run_rep, jobs, chunksize=max(1, reps // (4 * workers))))
    else:
        rows = []
        for job in jobs:
            rows.append(_run_rep(job))
            if progress is not None:
                progress(len(rows))
    crit = float(norm.ppf(1 - alpha / 2))
    reports = {}
    for name in tests:
        idx = np.array([r for r, row in enumerate(rows) if row[name] is not None], dtype=np.int64)
        if idx.size == 0:
            raise DegenerateVarianceError(f"{name}: every replicate was degenerate")
        t = np.array([rows[r][name][0] for r in idx])
        cis = [rows[r][name][1] for r in idx]
        coverage = None
        if all(ci is not None for ci in cis):
            coverage = float(np.mean([lo <= ci_target <= hi for lo, hi in cis]))
        rejections = int(np.sum(np.abs(t) > crit))
        reports[name] = McReport(
            reps=reps,
            rejections=rejections,
            rejection_rate=rejections / idx.size,
            statistic_samples=t,
            ks_to_normal=float(kstest(t, "norm").statistic),
            degenerate_reps=reps - idx.size,
            seed=base_seed,
            alpha=alpha,
            ci_coverage=coverage,
            rep_index=idx,
        )
    return reports


def monte_carlo(generator: Callable, test: Callable, reps: int, base_seed: int = 0,
                alpha: float = 0.05, m_folds: int = 2, workers: int = 1,
                ci_target: float = 0.0) -> McReport:
    """Rejection proportion and null distribution of one statistic over ``reps`` replicates."""
    return monte_carlo_many(generator, {"t": test}, reps, base_seed, alpha, m_folds,
                            workers, ci_target)["t"]


def _degeneracy_rep(job):
    r, seed, setting, n = job
    sub = mix64(seed, r)
    if setting == "null":
        dataset, _ = gen_appendix_a("global_null", sub, 100, 50)
    else:
        dataset, _ = gen_zero_inflated("alternative", n, sub)
    feats = np.vstack([dataset.x, dataset.z])
    labels = np.r_[np.ones(dataset.n_x), np.zeros(dataset.n_z)]
    return fit_logistic_lasso(feats, labels, seed=sub).nonzero_count == 0


def degeneracy_demo(reps: int, seed: int = 0, setting: str = "null", n: int = 500,
                    workers: int = 1) -> float:
    """Fraction of replicates in which the CV logistic-lasso coefficient vector is exactly zero.

    ``setting="null"``: N_X = 100, N_Z = 50, p = 100, equal Gaussian means
    (the appA-global population). ``setting="f1-alternative"``: zero-inflated
    alternative with ``n`` samples per group.
    """
    if reps < 50:
        raise ValueError("degeneracy_demo needs reps >= 50")
    if setting not in ("null", "f1-alternative"):
        raise ValueError(f"unknown setting {setting!r}")
    jobs = [(r, seed, setting, n) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            zeros = list(pool.map(_degeneracy_rep, jobs))
    else:
        zeros = [_degeneracy_rep(j) for j in jobs]
    return float(np.mean(zeros))
