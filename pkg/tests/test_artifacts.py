import numpy as np
import pytest
from numpy.testing import assert_array_equal

from sprvm import (
    KernelSpec,
    RvmConfig,
    SprvmConfig,
    build_design,
    make_synthetic,
    rvm_run_gibbs,
    run_gibbs,
    standardize_response,
)
from sprvm import artifacts
from sprvm.errors import DataError


@pytest.fixture
def fitted(small_problem):
    ds, design = small_problem
    sp = run_gibbs(SprvmConfig(m=60, burn_in=20, seed=1), design, ds.y)
    rv = rvm_run_gibbs(RvmConfig(m=60, burn_in=20, seed=1), design, ds.y)
    return sp, rv


class TestDrawsCsv:
    def test_sprvm_round_trip_is_exact(self, fitted, tmp_path):
        sp, _ = fitted
        path = tmp_path / "sp.csv"
        artifacts.save_draws_csv(sp, path)
        header = path.read_text().splitlines()[0]
        assert header.startswith("lambda,beta_0,")
        loaded = artifacts.load_draws_csv(path, "SPRVM")
        assert_array_equal(loaded["lambda"], sp.lam)
        assert_array_equal(loaded["beta"], sp.beta)

    def test_rvm_round_trip_is_exact(self, fitted, tmp_path):
        _, rv = fitted
        path = tmp_path / "rv.csv"
        artifacts.save_draws_csv(rv, path)
        header = path.read_text().splitlines()[0]
        assert header.startswith("inv_sigma2,lambda_0,")
        loaded = artifacts.load_draws_csv(path, "RVM")
        assert_array_equal(loaded["inv_sigma2"], rv.inv_sigma2)
        assert_array_equal(loaded["lambdas"], rv.lambdas)
        assert_array_equal(loaded["beta"], rv.beta)

    def test_garbage_file_raises_data_error(self, tmp_path):
        path = tmp_path / "junk.csv"
        path.write_text("lambda,beta_0\n1.0,not_a_number\n")
        with pytest.raises(DataError):
            artifacts.load_draws_csv(path, "SPRVM")


class TestFitJson:
    def test_missing_keys_rejected(self, tmp_path):
        path = tmp_path / "notafit.json"
        artifacts.write_json(path, {"method": "SPRVM"})
        with pytest.raises(DataError, match="fit artifact"):
            artifacts.load_fit_json(path)

    def test_draws_paths_resolve_relative_to_fit(self, fitted, tmp_path):
        sp, _ = fitted
        sub = tmp_path / "deep"
        sub.mkdir()
        artifacts.save_draws_csv(sp, sub / "run.draws.csv")
        artifacts.save_fit_json(
            sub / "run.fit.json",
            method="SPRVM",
            spec=KernelSpec("gaussian", 1.5),
            config={},
            standardization=standardize_response(
                make_synthetic(5, 1, 0.3, seed=0)
            ).standardization,
            posterior_mean_beta=np.zeros(3),
            x_train=np.zeros((2, 1)),
            draws_files=["run.draws.csv"],
            manifest_file="run.manifest.json",
        )
        fit = artifacts.load_fit_json(sub / "run.fit.json")
        assert fit["_draws_paths"] == [str(sub / "run.draws.csv")]

    def test_manifest_digest_matches_input(self, tmp_path):
        data = tmp_path / "input.csv"
        data.write_text("y,x\n1,2\n")
        artifacts.write_manifest(
            tmp_path / "m.json", command="fit", config={}, seeds=[0], inputs=[data]
        )
        manifest = artifacts.read_json(tmp_path / "m.json")
        assert manifest["input_digests"][str(data)] == artifacts.sha256_file(data)
        assert manifest["schema_version"] == artifacts.SCHEMA_VERSION
