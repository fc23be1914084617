"""Two-sample data model, CSV ingestion, fold partitioning and sign alignment."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.random import Generator, Philox


class DataError(ValueError):
    """Raised for malformed input data (bad CSV, wrong shapes, non-finite values)."""


@dataclass(frozen=True)
class Dataset:
    """Control samples ``x`` (N_X x p) and treatment samples ``z`` (N_Z x p)."""

    x: np.ndarray
    z: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        z = np.array(self.z, dtype=float)
        if x.ndim != 2 or z.ndim != 2:
            raise DataError("x and z must be 2-D sample matrices")
        if x.shape[1] != z.shape[1]:
            raise DataError(f"column mismatch: x has {x.shape[1]}, z has {z.shape[1]}")
        if x.shape[0] < 2 or z.shape[0] < 2:
            raise DataError(f"each group needs >= 2 samples (got N_X={x.shape[0]}, N_Z={z.shape[0]})")
        if not (np.isfinite(x).all() and np.isfinite(z).all()):
            raise DataError("samples must be finite")
        x.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        if self.feature_names is not None:
            names = tuple(str(n) for n in self.feature_names)
            if len(names) != x.shape[1]:
                raise DataError(f"{len(names)} feature names for {x.shape[1]} columns")
            object.__setattr__(self, "feature_names", names)

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def n_x(self) -> int:
        return self.x.shape[0]

    @property
    def n_z(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every sample in each group to one of ``m_folds`` folds (0-based)."""

    m_folds: int
    x_assignment: np.ndarray
    z_assignment: np.ndarray
    seed: int

    def x_fold(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.x_assignment == m)

    def z_fold(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.z_assignment == m)

    def x_complement(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.x_assignment != m)

    def z_complement(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.z_assignment != m)

    def split(self, dataset: Dataset, m: int):
        """Return ``(x_in, z_in, x_out, z_out)``: fold ``m`` and its complement."""
        return (
            dataset.x[self.x_fold(m)],
            dataset.z[self.z_fold(m)],
            dataset.x[self.x_complement(m)],
            dataset.z[self.z_complement(m)],
        )


@dataclass(frozen=True)
class Direction:
    """A projection vector with a tag recording where it came from.

    ``origin`` is one of ``"pc<k>"`` (unit norm enforced), ``"classifier"``,
    ``"anchored"`` or ``"user"``.
    """

    weights: np.ndarray
    origin: str = "user"
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if not np.isfinite(w).all():
            raise DataError("direction weights must be finite")
        if self.origin.startswith("pc"):
            if not self.origin[2:].isdigit() or int(self.origin[2:]) < 1:
                raise DataError(f"bad PC origin tag {self.origin!r}")
            if abs(np.linalg.norm(w) - 1.0) > 1e-8:
                raise DataError("principal directions must have unit norm")
        elif self.origin not in ("classifier", "anchored", "user"):
            raise DataError(f"unknown direction origin {self.origin!r}")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.shape[0]

    def __neg__(self) -> Direction:
        return Direction(-self.weights, self.origin, dict(self.extra))

    @property
    def nonzeros(self) -> int:
        return int(np.count_nonzero(self.weights))


def make_folds(n_x: int, n_z: int, m: int, seed: int) -> FoldPlan:
    """Seeded shuffle of each group followed by round-robin fold assignment.

    Both permutations come from one Philox stream, X first, so the X
    assignment does not depend on ``n_z``.
    """
    if m < 2:
        raise ValueError(f"need at least 2 folds, got {m}")
    if m > min(n_x, n_z):
        raise ValueError(f"{m} folds but min group size is {min(n_x, n_z)}: a fold would be empty")
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    rng = Generator(Philox(seed))
    assignments = []
    for n in (n_x, n_z):
        perm = rng.permutation(n)
        a = np.empty(n, dtype=np.int64)
        a[perm] = np.arange(n) % m
        a.flags.writeable = False
        assignments.append(a)
    return FoldPlan(m, assignments[0], assignments[1], int(seed))


def align_sign(reference: Direction, candidate: Direction) -> Direction:
    """Flip ``candidate`` if it has negative inner product with ``reference``.

    A zero inner product leaves the candidate untouched.
    """
    if len(reference) != len(candidate):
        raise ValueError(f"length mismatch: {len(reference)} vs {len(candidate)}")
    if float(reference.weights @ candidate.weights) < 0:
        return -candidate
    return candidate


def _location(row: int, column: str) -> str:
    return f"row {row}, column {column!r}"


def load_csv(path, group_column: str, group_labels: Sequence[str]) -> Dataset:
    """Read a labelled sample matrix.

    Rows whose ``group_column`` equals ``group_labels[0]`` are control (X),
    ``group_labels[1]`` treatment (Z). Row numbers in errors count the header
    as row 1.
    """
    ctl, trt = group_labels
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if group_column not in header:
            raise DataError(f"{path}: group column {group_column!r} not in header {header}")
        gidx = header.index(group_column)
        names = [h for i, h in enumerate(header) if i != gidx]
        rows = {ctl: [], trt: []}
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(rec)} fields, expected {len(header)}")
            label = rec[gidx]
            if label not in rows:
                raise DataError(
                    f"{path}: {_location(lineno, group_column)}: unexpected label {label!r} "
                    f"(expected {ctl!r} or {trt!r})"
                )
            values = []
            for i, cell in enumerate(rec):
                if i == gidx:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: {_location(lineno, header[i])}: non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: {_location(lineno, header[i])}: non-finite value {cell!r}")
                values.append(v)
            rows[label].append(values)
    for label in (ctl, trt):
        if len(rows[label]) < 2:
            raise DataError(
                f"{path}: group column {group_column!r} has {len(rows[label])} rows labelled {label!r}; need >= 2"
            )
    p = len(names)
    return Dataset(
        np.array(rows[ctl], dtype=float).reshape(-1, p),
        np.array(rows[trt], dtype=float).reshape(-1, p),
        tuple(names),
    )


def write_csv(dataset: Dataset, path, group_column: str = "group",
              group_labels: Sequence[str] = ("control", "treatment")) -> None:
    """Write ``dataset`` with shortest round-trip float formatting."""
    names = dataset.feature_names or tuple(f"f{j + 1}" for j in range(dataset.p))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([group_column, *names])
        for label, block in zip(group_labels, (dataset.x, dataset.z)):
            for row in block:
                w.writerow([label, *map(repr, row.tolist())])


def load_direction_csv(path, feature_names: Sequence[str] | None = None,
                       origin: str = "user") -> Direction:
    """Read a ``feature_name,weight`` file.

    When ``feature_names`` is given the weights are reordered to match it and
    every feature must be present exactly once.
    """
    path = Path(path)
    names, weights = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["feature_name", "weight"]:
            raise DataError(f"{path}: header must be 'feature_name,weight'")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 2:
                raise DataError(f"{path}: row {lineno} has {len(rec)} fields, expected 2")
            try:
                v = float(rec[1])
            except ValueError:
                raise DataError(f"{path}: {_location(lineno, 'weight')}: non-numeric value {rec[1]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: {_location(lineno, 'weight')}: non-finite value {rec[1]!r}")
            names.append(rec[0])
            weights.append(v)
    if feature_names is None:
        return Direction(np.array(weights), origin)
    lookup = dict(zip(names, weights))
    if len(lookup) != len(names):
        raise DataError(f"{path}: duplicate feature names")
    missing = [n for n in feature_names if n not in lookup]
    extra = set(lookup) - set(feature_names)
    if missing or extra:
        raise DataError(f"{path}: feature mismatch (missing {missing[:5]}, unknown {sorted(extra)[:5]})")
    return Direction(np.array([lookup[n] for n in feature_names]), origin)


def write_direction_csv(direction: Direction, path, feature_names: Sequence[str] | None = None) -> None:
    names = feature_names or [f"f{j + 1}" for j in range(len(direction))]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_name", "weight"])
        for n, v in zip(names, direction.weights.tolist()):
            w.writerow([n, repr(v)])
