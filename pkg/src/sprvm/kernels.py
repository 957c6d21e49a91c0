"""Reproducing kernels, design matrices, and kernel-matrix sanity checks.

The design matrix for n training rows is n x (n+1): an intercept column of
ones followed by the kernel block k(x_i, x_j).  Gaussian and Laplace kernels
use the Euclidean distance; the polynomial kernel takes an integer degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import KernelOverflowError, NumericError

FAMILIES = ("gaussian", "laplace", "polynomial")
_ALIASES = {"poly": "polynomial", "rbf": "gaussian"}

# exp(x) overflows double just above this
_LOG_DBL_MAX = 709.0


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its single parameter theta.

    theta is a positive real bandwidth for gaussian/laplace and a positive
    integer degree for polynomial.
    """

    family: str
    theta: float

    def __post_init__(self):
        fam = _ALIASES.get(self.family.lower(), self.family.lower())
        if fam not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        th = float(self.theta)
        if not math.isfinite(th) or th <= 0:
            raise ValueError(f"theta must be finite and positive; got {self.theta}")
        if fam == "polynomial" and th != int(th):
            raise ValueError(f"polynomial degree must be an integer; got {self.theta}")


@dataclass(frozen=True)
class DesignMatrix:
    """Intercept column plus kernel block, with the training rows it came from."""

    K: np.ndarray
    spec: KernelSpec
    source_rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        K.setflags(write=False)
        object.__setattr__(self, "K", K)
        n = K.shape[0]
        if K.ndim != 2 or K.shape[1] != n + 1:
            raise ValueError(f"design matrix must be n x (n+1); got {K.shape}")
        if not (K[:, 0] == 1.0).all():
            raise ValueError("column 0 of the design matrix must be all ones")

    @property
    def n(self) -> int:
        return self.K.shape[0]


def _as_matrix(v):
    a = np.asarray(v, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    return a


def kernel_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel evaluations k(a_i, b_j) for all row pairs of A and B."""
    A, B = _as_matrix(A), _as_matrix(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(
            f"vector length mismatch: {A.shape[1]} vs {B.shape[1]} columns"
        )
    if spec.family == "gaussian":
        vals = np.exp(-cdist(A, B, "sqeuclidean") / spec.theta**2)
    elif spec.family == "laplace":
        vals = np.exp(-cdist(A, B, "euclidean") / spec.theta)
    else:
        deg = int(spec.theta)
        base = 1.0 + A @ B.T
        with np.errstate(divide="ignore"):
            too_big = np.log(np.abs(base)) * deg > _LOG_DBL_MAX
        if too_big.any():
            i, j = np.argwhere(too_big)[0]
            raise KernelOverflowError(
                f"polynomial kernel overflows at entry ({i}, {j}): "
                f"(1 + x_i.x_j) = {base[i, j]:.6g} with degree {deg}"
            )
        vals = base**deg
    if not np.isfinite(vals).all():
        i, j = np.argwhere(~np.isfinite(vals))[0]
        raise NumericError(f"non-finite kernel value at entry ({i}, {j})")
    return vals


def kernel_value(spec: KernelSpec, a, b) -> float:
    """Single kernel evaluation k(a, b)."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"vector length mismatch: {a.size} vs {b.size}")
    return float(kernel_matrix(spec, a, b)[0, 0])


def build_design(spec: KernelSpec, X) -> DesignMatrix:
    """n x (n+1) design matrix: ones column then the kernel block over X."""
    X = _as_matrix(X)
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one training row")
    K = np.empty((n, n + 1))
    K[:, 0] = 1.0
    K[:, 1:] = kernel_matrix(spec, X, X)
    return DesignMatrix(K=K, spec=spec, source_rows=X)


def prediction_row(spec: KernelSpec, X_train, x_new) -> np.ndarray:
    """Row (1, k(x_new, x_1), ..., k(x_new, x_n)) for a new covariate vector."""
    X_train = _as_matrix(X_train)
    x_new = np.asarray(x_new, dtype=float).ravel()
    if x_new.size != X_train.shape[1]:
        raise ValueError(
            f"x_new has {x_new.size} entries, expected {X_train.shape[1]}"
        )
    row = np.empty(X_train.shape[0] + 1)
    row[0] = 1.0
    row[1:] = kernel_matrix(spec, x_new, X_train)[0]
    return row


@dataclass(frozen=True)
class ConditionIIIReport:
    """Result of the off-diagonal ratio check on the kernel block.

    Violations are (i, j) row indices into the training data; a pair (j, j)
    flags a zero diagonal entry k(x_j, x_j).
    """

    holds: bool
    violations: tuple[tuple[int, int], ...]


def check_condition_iii(
    design: DesignMatrix, rel_tol: float = 1e-12, zero_tol: float = 1e-300
) -> ConditionIIIReport:
    """Checks k_ij / k_jj != 1 and k_jj != 0 for all i != j in the kernel block.

    |k_ij/k_jj - 1| <= rel_tol counts as a violation and |k_jj| <= zero_tol
    counts as a zero diagonal; the intercept column is not involved.
    """
    block = design.K[:, 1:]
    diag = np.diag(block)
    violations: list[tuple[int, int]] = []
    zero_cols = np.abs(diag) <= zero_tol
    for j in np.flatnonzero(zero_cols):
        violations.append((int(j), int(j)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = block / diag[None, :]
    bad = np.abs(ratio - 1.0) <= rel_tol
    np.fill_diagonal(bad, False)
    bad[:, zero_cols] = False
    for i, j in np.argwhere(bad):
        violations.append((int(i), int(j)))
    violations.sort()
    return ConditionIIIReport(holds=not violations, violations=tuple(violations))


def check_full_row_rank(design: DesignMatrix, tol: float = 1e-10) -> bool:
    """True iff the numeric row rank of the design matrix equals n.

    Rank counts singular values above tol times the largest one.
    """
    s = np.linalg.svd(design.K, compute_uv=False)
    if s.size == 0 or s[0] <= 0:
        return False
    rank = int((s > tol * s[0]).sum())
    return rank == design.n
