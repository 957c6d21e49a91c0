"""Serialization of fits, draws, grids, and run manifests.

Draw matrices and grids go to CSV with full-precision (repr) floats so
repeated runs are byte-identical; structured records go to JSON with sorted
keys.  Schemas carry a schema_version field.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np

from .data import Standardization
from .errors import DataError
from .kernels import KernelSpec
from .rvm import RvmDraws
from .sprvm import SprvmDraws

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from None


def save_draws_csv(draws, path) -> None:
    """One row per retained scan.

    Single-penalty: lambda then beta_0..beta_n.  Multi-penalty: inv_sigma2,
    lambda_0..lambda_n, then beta_0..beta_n.
    """
    np1 = draws.beta.shape[1]
    beta_cols = [f"beta_{i}" for i in range(np1)]
    if isinstance(draws, SprvmDraws):
        header = ["lambda"] + beta_cols
        mat = np.column_stack([draws.lam, draws.beta])
    elif isinstance(draws, RvmDraws):
        header = ["inv_sigma2"] + [f"lambda_{i}" for i in range(np1)] + beta_cols
        mat = np.column_stack([draws.inv_sigma2, draws.lambdas, draws.beta])
    else:
        raise TypeError(f"unsupported draws type: {type(draws).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in mat:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def load_draws_csv(path, method: str) -> dict:
    """Reads a draws CSV back into arrays keyed by parameter block."""
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            mat = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise DataError(f"{path} is not a valid draws CSV: {exc}") from None
    beta_idx = [i for i, h in enumerate(header) if h.startswith("beta_")]
    out = {"beta": mat[:, beta_idx]}
    if method == "SPRVM":
        out["lambda"] = mat[:, header.index("lambda")]
    else:
        out["inv_sigma2"] = mat[:, header.index("inv_sigma2")]
        lam_idx = [i for i, h in enumerate(header) if h.startswith("lambda_")]
        out["lambdas"] = mat[:, lam_idx]
    return out


def save_marglik_grid_csv(grid, path) -> None:
    """Rows of theta, xi, log_ml with DIVERGENT marking infinite cells."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("theta,xi,log_ml\n")
        for i, theta in enumerate(grid.theta_values):
            for j, xi in enumerate(grid.xi_values):
                cell = "DIVERGENT" if grid.divergent[i, j] else _fmt(grid.log_ml[i, j])
                fh.write(f"{_fmt(theta)},{_fmt(xi)},{cell}\n")


def save_matrix_csv(mat, header, path) -> None:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in mat:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    """Header-first CSV of finite numbers (covariate rows for prediction)."""
    try:
        with open(path, encoding="utf-8") as fh:
            fh.readline()
            mat = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise DataError(f"{path} has non-numeric cells: {exc}") from None
    if mat.size == 0:
        raise DataError(f"{path}: no data rows")
    if not np.isfinite(mat).all():
        raise DataError(f"{path} contains non-finite values")
    return mat


def write_manifest(path, command: str, config: dict, seeds, inputs, extra=None) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "seeds": seeds,
        "package_version": _package_version(),
        "input_digests": {str(p): sha256_file(p) for p in inputs},
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        payload.update(extra)
    write_json(path, payload)


def _package_version() -> str:
    from . import __version__

    return __version__


def save_fit_json(
    path,
    method: str,
    spec: KernelSpec,
    config,
    standardization: Standardization,
    posterior_mean_beta,
    x_train,
    draws_files,
    manifest_file,
    propriety=None,
    psrf=None,
    xi=None,
) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": method,
        "kernel": {"family": spec.family, "theta": spec.theta},
        "config": config,
        "standardization": {
            "mean": standardization.mean,
            "sd": standardization.sd,
        },
        "posterior_mean_beta": [float(v) for v in posterior_mean_beta],
        "x_train": [[float(v) for v in row] for row in np.atleast_2d(x_train)],
        "draws_files": [str(f) for f in draws_files],
        "manifest": str(manifest_file),
    }
    if xi is not None:
        payload["xi"] = xi
    if propriety is not None:
        payload["propriety_report"] = propriety
    if psrf is not None:
        payload["psrf"] = psrf
    write_json(path, payload)


def load_fit_json(path) -> dict:
    fit = read_json(path)
    for key in ("method", "kernel", "standardization", "x_train", "draws_files"):
        if key not in fit:
            raise DataError(f"{path} is not a fit artifact (missing {key!r})")
    base = Path(path).parent
    fit["_draws_paths"] = [
        p if Path(p).is_absolute() else str(base / Path(p).name)
        for p in fit["draws_files"]
    ]
    return fit
