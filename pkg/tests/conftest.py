import numpy as np
import pytest

from sprvm import KernelSpec, build_design, make_synthetic, standardize_response


@pytest.fixture
def small_problem():
    """Standardized synthetic data plus a Gaussian design, n=12."""
    ds = standardize_response(make_synthetic(12, 3, 0.25, seed=11))
    design = build_design(KernelSpec("gaussian", 1.5), ds.X)
    return ds, design


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    return str(path)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
