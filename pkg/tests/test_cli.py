import json

import pytest
from click.testing import CliRunner

from sprvm import make_synthetic
from sprvm.cli import main

from conftest import write_csv


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def data_csv(tmp_path):
    ds = make_synthetic(16, 3, 0.2, seed=44)
    rows = [(ds.y[i], *ds.X[i]) for i in range(ds.n)]
    return write_csv(tmp_path / "train.csv", ("y", "x1", "x2", "x3"), rows)


@pytest.fixture
def newpoint_csv(tmp_path):
    ds = make_synthetic(16, 3, 0.2, seed=44)
    return write_csv(tmp_path / "new.csv", ("x1", "x2", "x3"), [tuple(ds.X[0]), tuple(ds.X[3])])


def fit_args(data_csv, prefix, method="sprvm", extra=()):
    return [
        "fit", "--data", data_csv, "--response", "y", "--method", method,
        "--kernel", "gaussian", "--theta", "1.5", "--iters", "400",
        "--burnin", "200", "--seed", "3", "--out-prefix", str(prefix),
        *extra,
    ]


class TestFit:
    def test_writes_artifacts(self, runner, data_csv, tmp_path):
        prefix = tmp_path / "run"
        result = runner.invoke(main, fit_args(data_csv, prefix))
        assert result.exit_code == 0, result.output
        fit = json.loads((tmp_path / "run.fit.json").read_text())
        assert fit["method"] == "SPRVM"
        assert len(fit["posterior_mean_beta"]) == 17
        assert fit["propriety_report"]["sufficient_ok"] is True
        assert (tmp_path / "run.draws.csv").exists()
        manifest = json.loads((tmp_path / "run.manifest.json").read_text())
        assert data_csv in manifest["input_digests"]

    def test_four_chains_emit_psrf(self, runner, data_csv, tmp_path):
        prefix = tmp_path / "multi"
        result = runner.invoke(
            main, fit_args(data_csv, prefix, extra=["--chains", "4", "--threads", "2"])
        )
        assert result.exit_code == 0, result.output
        fit = json.loads((tmp_path / "multi.fit.json").read_text())
        assert "psrf" in fit and fit["psrf"]["chains"] == 4
        assert "max PSRF" in result.output
        assert (tmp_path / "multi.draws.chain3.csv").exists()

    def test_improper_prior_refused_exit_5(self, runner, data_csv, tmp_path):
        result = runner.invoke(
            main,
            fit_args(data_csv, tmp_path / "x", extra=["--prior-a", "0.5", "--prior-b", "0"]),
        )
        assert result.exit_code == 5
        assert "improper" in result.output

    def test_missing_file_exit_3(self, runner, tmp_path):
        result = runner.invoke(main, fit_args(str(tmp_path / "ghost.csv"), tmp_path / "x"))
        assert result.exit_code == 3

    def test_numeric_error_exit_4(self, runner, tmp_path):
        ds = make_synthetic(6, 1, 0.1, seed=0)
        rows = [(ds.y[i], 40.0 + ds.X[i, 0]) for i in range(6)]
        path = write_csv(tmp_path / "big.csv", ("y", "x1"), rows)
        result = runner.invoke(
            main,
            [
                "fit", "--data", path, "--response", "y", "--method", "sprvm",
                "--kernel", "poly", "--theta", "400", "--iters", "50",
                "--burnin", "10", "--out-prefix", str(tmp_path / "x"),
            ],
        )
        assert result.exit_code == 4
        assert "overflow" in result.output

    def test_usage_error_exit_2(self, runner, data_csv, tmp_path):
        result = runner.invoke(
            main,
            ["fit", "--data", data_csv, "--response", "y", "--iters", "10",
             "--burnin", "20", "--out-prefix", str(tmp_path / "x")],
        )
        assert result.exit_code == 2

    def test_byte_identical_repetition(self, runner, data_csv, tmp_path):
        r1 = runner.invoke(main, fit_args(data_csv, tmp_path / "a"))
        r2 = runner.invoke(main, fit_args(data_csv, tmp_path / "b"))
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert (tmp_path / "a.draws.csv").read_bytes() == (tmp_path / "b.draws.csv").read_bytes()

    def test_standardize_covariates_flag_changes_design(self, runner, data_csv, tmp_path):
        r1 = runner.invoke(main, fit_args(data_csv, tmp_path / "raw"))
        r2 = runner.invoke(
            main, fit_args(data_csv, tmp_path / "std", extra=["--standardize-covariates"])
        )
        assert r1.exit_code == 0 and r2.exit_code == 0
        raw = json.loads((tmp_path / "raw.fit.json").read_text())
        std = json.loads((tmp_path / "std.fit.json").read_text())
        cols = list(zip(*std["x_train"]))
        for col in cols:
            assert abs(sum(col) / len(col)) < 1e-10
        assert raw["x_train"] != std["x_train"]

    def test_other_kernels_accepted(self, runner, data_csv, tmp_path):
        for kernel, theta in (("laplace", "2.0"), ("poly", "2")):
            result = runner.invoke(
                main,
                ["fit", "--data", data_csv, "--response", "y", "--method", "sprvm",
                 "--kernel", kernel, "--theta", theta, "--iters", "200",
                 "--burnin", "100", "--out-prefix", str(tmp_path / kernel)],
            )
            assert result.exit_code == 0, result.output
            fit = json.loads((tmp_path / f"{kernel}.fit.json").read_text())
            expected = "polynomial" if kernel == "poly" else kernel
            assert fit["kernel"]["family"] == expected


class TestPredict:
    def test_sprvm_predictions_with_mcse(self, runner, data_csv, newpoint_csv, tmp_path):
        prefix = tmp_path / "run"
        assert runner.invoke(main, fit_args(data_csv, prefix)).exit_code == 0
        out = tmp_path / "preds.csv"
        result = runner.invoke(
            main,
            ["predict", "--model", str(tmp_path / "run.fit.json"),
             "--input", newpoint_csv, "--output", str(out)],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "prediction,mcse"
        assert len(lines) == 3
        for line in lines[1:]:
            pred, mcse = line.split(",")
            float(pred)
            assert float(mcse) >= 0.0

    def test_rvm_predictions_mark_mcse_na(self, runner, data_csv, newpoint_csv, tmp_path):
        prefix = tmp_path / "rrun"
        assert runner.invoke(main, fit_args(data_csv, prefix, method="rvm")).exit_code == 0
        out = tmp_path / "preds.csv"
        result = runner.invoke(
            main,
            ["predict", "--model", str(tmp_path / "rrun.fit.json"),
             "--input", newpoint_csv, "--output", str(out)],
        )
        assert result.exit_code == 0
        assert "MCSE unavailable (no known convergence rate)" in result.output
        for line in out.read_text().strip().splitlines()[1:]:
            assert line.endswith(",NA")

    def test_byte_identical_predictions(self, runner, data_csv, newpoint_csv, tmp_path):
        assert runner.invoke(main, fit_args(data_csv, tmp_path / "p")).exit_code == 0
        for name in ("o1.csv", "o2.csv"):
            assert (
                runner.invoke(
                    main,
                    ["predict", "--model", str(tmp_path / "p.fit.json"),
                     "--input", newpoint_csv, "--output", str(tmp_path / name)],
                ).exit_code
                == 0
            )
        assert (tmp_path / "o1.csv").read_bytes() == (tmp_path / "o2.csv").read_bytes()


class TestCv:
    def test_writes_result_json(self, runner, data_csv, tmp_path):
        out = tmp_path / "cv.json"
        result = runner.invoke(
            main,
            ["cv", "--data", data_csv, "--response", "y", "--method", "sprvm",
             "--theta-grid", "1,2", "--xi-grid", "1", "--k", "2", "--seed", "5",
             "--cv-iters", "200", "--cv-burnin", "100", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert len(payload["grid"]) == 2
        assert payload["best"] in payload["grid"]
        assert (tmp_path / "cv.json.manifest.json").exists()


class TestMlOpt:
    def test_grid_csv_and_argmax(self, runner, data_csv, tmp_path):
        prefix = tmp_path / "ml"
        result = runner.invoke(
            main,
            ["ml-opt", "--data", data_csv, "--response", "y",
             "--theta-grid", "0.5,1.5", "--xi-grid", "1,10",
             "--out-prefix", str(prefix)],
        )
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "ml.grid.csv").read_text().strip().splitlines()
        assert lines[0] == "theta,xi,log_ml"
        assert len(lines) == 5
        argmax = json.loads((tmp_path / "ml.argmax.json").read_text())
        assert argmax["theta"] in (0.5, 1.5)

    def test_divergent_cells_marked(self, runner, data_csv, tmp_path):
        prefix = tmp_path / "mld"
        result = runner.invoke(
            main,
            ["ml-opt", "--data", data_csv, "--response", "y",
             "--theta-grid", "1", "--xi-grid", "1",
             "--prior-a", "-1", "--prior-b", "0",
             "--out-prefix", str(prefix)],
        )
        assert result.exit_code == 0
        # all-divergent prior instead exits with the impropriety code
        result2 = runner.invoke(
            main,
            ["ml-opt", "--data", data_csv, "--response", "y",
             "--theta-grid", "1", "--xi-grid", "1",
             "--prior-a", "1", "--prior-b", "0",
             "--out-prefix", str(tmp_path / "mlbad")],
        )
        assert result2.exit_code == 5


class TestDiagnose:
    def test_psrf_and_prediction(self, runner, data_csv, newpoint_csv, tmp_path):
        prefix = tmp_path / "d"
        assert (
            runner.invoke(main, fit_args(data_csv, prefix, extra=["--chains", "3"])).exit_code
            == 0
        )
        out_json = tmp_path / "diag.json"
        result = runner.invoke(
            main,
            ["diagnose", "--fit", str(tmp_path / "d.fit.json"),
             "--new-point", newpoint_csv, "--out-json", str(out_json)],
        )
        assert result.exit_code == 0, result.output
        assert "max PSRF" in result.output
        payload = json.loads(out_json.read_text())
        assert payload["psrf"]["chains"] == 3
        assert len(payload["predictions"]) == 2
        assert payload["predictions"][0]["mcse"] >= 0

    def test_single_chain_notes_psrf_unavailable(self, runner, data_csv, tmp_path):
        prefix = tmp_path / "s"
        assert runner.invoke(main, fit_args(data_csv, prefix)).exit_code == 0
        result = runner.invoke(main, ["diagnose", "--fit", str(tmp_path / "s.fit.json")])
        assert result.exit_code == 0
        assert "PSRF unavailable" in result.output

    def test_rvm_mcse_note(self, runner, data_csv, newpoint_csv, tmp_path):
        prefix = tmp_path / "r"
        assert runner.invoke(main, fit_args(data_csv, prefix, method="rvm")).exit_code == 0
        result = runner.invoke(
            main,
            ["diagnose", "--fit", str(tmp_path / "r.fit.json"), "--new-point", newpoint_csv],
        )
        assert result.exit_code == 0
        assert "MCSE unavailable (no known convergence rate)" in result.output

    def test_spectral_estimator_flag(self, runner, data_csv, newpoint_csv, tmp_path):
        prefix = tmp_path / "sv"
        assert runner.invoke(main, fit_args(data_csv, prefix)).exit_code == 0
        result = runner.invoke(
            main,
            ["diagnose", "--fit", str(tmp_path / "sv.fit.json"),
             "--new-point", newpoint_csv, "--estimator", "sv"],
        )
        assert result.exit_code == 0
        assert "MCSE:" in result.output


class TestBench:
    def test_text_table_and_json(self, runner, data_csv, tmp_path):
        prefix = tmp_path / "bench"
        result = runner.invoke(
            main,
            ["bench", "--data", data_csv, "--response", "y",
             "--methods", "rvm,sprvm", "--splits", "1", "--test-size", "4",
             "--theta-grid", "1.5", "--xi-grid", "1", "--cv-k", "2",
             "--cv-iters", "120", "--cv-burnin", "60",
             "--final-iters", "200", "--final-burnin", "100",
             "--seed", "2", "--threads", "1",
             "--out-prefix", str(prefix)],
        )
        assert result.exit_code == 0, result.output
        assert "Mean RMSPE" in result.output
        payload = json.loads((tmp_path / "bench.bench.json").read_text())
        assert set(payload["per_method"]) == {"RVM", "SPRVM"}
        assert (tmp_path / "bench.bench.txt").exists()

    def test_unknown_method_exit_2(self, runner, data_csv, tmp_path):
        result = runner.invoke(
            main,
            ["bench", "--data", data_csv, "--response", "y", "--methods", "svm",
             "--splits", "1", "--test-size", "4", "--out-prefix", str(tmp_path / "x")],
        )
        assert result.exit_code == 2
