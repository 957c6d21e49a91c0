"""Dataset ingestion, response standardization, and data splitting.

Responses are standardized to sample mean 0 and sample standard deviation 1
(ddof=1); covariates are left untouched unless the caller opts in.  All
splitting is driven by an explicit integer seed so plans are reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Standardization:
    """Affine transform applied to a raw response: y_std = (y - mean) / sd."""

    mean: float
    sd: float

    def apply(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.sd

    def invert(self, values):
        return np.asarray(values, dtype=float) * self.sd + self.mean


def _locked(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Response vector plus covariate matrix (rows are observations).

    ``standardization`` records the (mean, sd) applied to the raw response,
    or None when the response is on its original scale.
    """

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...] | None = None
    standardization: Standardization | None = None

    def __post_init__(self):
        y = _locked(np.ravel(self.y))
        X = _locked(np.atleast_2d(self.X))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        if y.shape[0] != X.shape[0] or y.shape[0] < 1:
            raise DataError(
                f"y has {y.shape[0]} rows but X has {X.shape[0]}; need n >= 1"
            )
        if not np.isfinite(y).all():
            raise DataError("response contains non-finite values")
        if not np.isfinite(X).all():
            raise DataError("covariate matrix contains non-finite values")
        if self.standardization is not None:
            if abs(float(np.mean(y))) > 1e-10:
                raise DataError("standardized response does not have mean 0")
            if abs(float(np.std(y, ddof=1)) - 1.0) > 1e-10:
                raise DataError("standardized response does not have sd 1")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint train/test index sets drawn with a recorded seed."""

    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int
    fold_id: int | None = None

    def __post_init__(self):
        tr = _locked(self.train_indices, dtype=np.int64)
        te = _locked(self.test_indices, dtype=np.int64)
        object.__setattr__(self, "train_indices", tr)
        object.__setattr__(self, "test_indices", te)
        if tr.size and te.size and np.intersect1d(tr, te).size:
            raise ValueError("train and test indices overlap")
        if (tr < 0).any() or (te < 0).any():
            raise ValueError("indices must be non-negative")


def load_csv(path, response_column: str) -> Dataset:
    """Reads a header-first CSV and splits out the named response column.

    Every cell must parse as a finite number; the offending data row
    (1-based) and column name are reported otherwise.  The response is
    returned unstandardized.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: file is empty") from None
            header = [h.strip() for h in header]
            if response_column not in header:
                raise DataError(
                    f"{path}: response column {response_column!r} not found "
                    f"(columns: {', '.join(header)})"
                )
            resp_idx = header.index(response_column)
            rows = []
            for i, rec in enumerate(reader, start=1):
                if len(rec) != len(header):
                    raise DataError(
                        f"{path}: row {i} has {len(rec)} cells, expected {len(header)}"
                    )
                vals = []
                for name, cell in zip(header, rec):
                    try:
                        v = float(cell)
                    except ValueError:
                        raise DataError(
                            f"{path}: non-numeric value {cell.strip()!r} at "
                            f"row {i}, column {name!r}"
                        ) from None
                    if not math.isfinite(v):
                        raise DataError(
                            f"{path}: non-finite value at row {i}, column {name!r}"
                        )
                    vals.append(v)
                rows.append(vals)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    mat = np.asarray(rows, dtype=float)
    y = mat[:, resp_idx]
    X = np.delete(mat, resp_idx, axis=1)
    names = tuple(h for j, h in enumerate(header) if j != resp_idx)
    return Dataset(y=y, X=X, names=names)


def standardize_response(d: Dataset) -> Dataset:
    """Centers and scales the response to sample mean 0 and sd 1 (ddof=1)."""
    if d.n < 2:
        raise DataError("standardization needs at least 2 observations")
    mean = float(np.mean(d.y))
    sd = float(np.std(d.y, ddof=1))
    if sd <= 0.0 or not math.isfinite(sd):
        raise DataError("cannot standardize a constant response (sd = 0)")
    std = Standardization(mean=mean, sd=sd)
    return Dataset(y=std.apply(d.y), X=d.X, names=d.names, standardization=std)


def train_test_split(n: int, test_size: int, seed: int) -> SplitPlan:
    """Uniformly random disjoint split of 0..n-1; deterministic given seed."""
    if not 0 < test_size < n:
        raise ValueError(f"test_size must be in (0, {n}); got {test_size}")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitPlan(
        train_indices=np.sort(perm[test_size:]),
        test_indices=np.sort(perm[:test_size]),
        seed=seed,
    )


def kfold_plan(n: int, k: int, seed: int) -> list[SplitPlan]:
    """k folds whose test sets partition 0..n-1; sizes differ by at most 1."""
    if not 2 <= k <= n:
        raise ValueError(f"k must be in [2, {n}]; got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(perm, k)
    plans = []
    for fold_id, chunk in enumerate(chunks):
        test = np.sort(chunk)
        train = np.sort(np.setdiff1d(perm, chunk, assume_unique=True))
        plans.append(
            SplitPlan(
                train_indices=train, test_indices=test, seed=seed, fold_id=fold_id
            )
        )
    return plans


def take(d: Dataset, indices) -> Dataset:
    """Row subset of a dataset (used for fold/train/test slicing)."""
    idx = np.asarray(indices, dtype=np.int64)
    return Dataset(
        y=d.y[idx], X=d.X[idx], names=d.names, standardization=d.standardization
    )


def make_synthetic(n: int, p: int, noise_sd: float, seed: int) -> Dataset:
    """Gaussian covariates with a smooth nonlinear response plus noise.

    The response depends on at most the first three covariates, so the
    signal stays learnable when p >> n.  Rows are pairwise distinct with
    probability one.  The returned response is unstandardized.
    """
    if n < 2 or p < 1:
        raise ValueError(f"need n >= 2 and p >= 1; got n={n}, p={p}")
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be >= 0; got {noise_sd}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    f = np.sin(2.0 * X[:, 0])
    if p >= 2:
        f = f + 0.5 * X[:, 1] ** 2
    if p >= 3:
        f = f - 0.7 * np.tanh(X[:, 2])
    y = f + noise_sd * rng.standard_normal(n)
    names = tuple(f"x{j + 1}" for j in range(p))
    return Dataset(y=y, X=X, names=names)
