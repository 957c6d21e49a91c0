"""Command-line interface: fit, predict, cv, ml-opt, diagnose, bench.

Exit codes: 0 ok, 2 usage, 3 data, 4 numeric, 5 provably improper prior.
Every file-producing command writes a JSON run manifest with input digests
and the seeds used, so runs are reproducible; numeric outputs are
byte-identical across repeated runs with the same inputs and seeds.
"""

from __future__ import annotations

import dataclasses
import functools
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from . import __version__, _backend, artifacts
from . import data as data_mod
from . import diagnostics, kernels, marglik
from . import predict as predict_mod
from . import rvm as rvm_mod
from . import sprvm as sprvm_mod
from . import tune
from .errors import DataError, ImproperPriorError, NumericError

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_IMPROPER = 5


def _default_threads() -> int:
    env = os.environ.get("SPRVM_THREADS", "").strip()
    if env.isdigit() and int(env) > 0:
        return int(env)
    return os.cpu_count() or 1


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DataError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except ImproperPriorError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_IMPROPER)
        except NumericError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_USAGE)

    return wrapper


def _parse_grid(text: str, label: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"{label} must be comma-separated numbers; got {text!r}")
    if not vals:
        raise ValueError(f"{label} is empty")
    return vals


def _load_dataset(path, response, standardize_covariates=False):
    ds = data_mod.load_csv(path, response)
    if standardize_covariates:
        mu = ds.X.mean(axis=0)
        sd = ds.X.std(axis=0, ddof=1)
        if (sd <= 0).any():
            raise DataError("cannot standardize a constant covariate column")
        ds = data_mod.Dataset(y=ds.y, X=(ds.X - mu) / sd, names=ds.names)
    return ds


@click.group()
@click.version_option(version=__version__, message=f"%(prog)s %(version)s (backend: {_backend.BACKEND})")
def main():
    """Kernel regression with single- and multi-penalty Gibbs samplers."""


@main.command("fit")
@click.option("--data", "data_path", required=True, type=click.Path(), help="training CSV")
@click.option("--response", required=True, help="response column name")
@click.option("--method", type=click.Choice(["rvm", "sprvm"]), default="sprvm")
@click.option("--kernel", type=click.Choice(["gaussian", "laplace", "poly"]), default="gaussian")
@click.option("--theta", type=float, default=1.0, help="kernel parameter")
@click.option("--xi", type=float, default=1.0, help="noise precision (sprvm only)")
@click.option("--prior-a", type=float, default=None, help="penalty prior shape offset")
@click.option("--prior-b", type=float, default=None, help="penalty prior rate")
@click.option("--prior-c", type=float, default=0.0, help="noise prior shape offset (rvm)")
@click.option("--prior-d", type=float, default=0.0, help="noise prior rate (rvm)")
@click.option("--iters", type=int, default=10000, help="total Gibbs iterations per chain")
@click.option("--burnin", type=int, default=5000, help="burn-in iterations discarded")
@click.option("--chains", type=int, default=1, help="independent chains (>=2 enables PSRF)")
@click.option("--seed", type=int, default=0)
@click.option("--standardize-covariates", is_flag=True, default=False)
@click.option("--threads", type=int, default=None, help="parallel chains (default: cores)")
@click.option("--out-prefix", required=True, type=click.Path(), help="output path prefix")
@_handle_errors
def cmd_fit(
    data_path,
    response,
    method,
    kernel,
    theta,
    xi,
    prior_a,
    prior_b,
    prior_c,
    prior_d,
    iters,
    burnin,
    chains,
    seed,
    standardize_covariates,
    threads,
    out_prefix,
):
    """Fit one model and write draws, a fit artifact, and a manifest."""
    if burnin < 0 or iters <= burnin:
        raise ValueError(f"need iters > burnin >= 0; got iters={iters}, burnin={burnin}")
    if chains < 1:
        raise ValueError("chains must be >= 1")
    m = iters - burnin
    ds = _load_dataset(data_path, response, standardize_covariates)
    std = data_mod.standardize_response(ds)
    spec = kernels.KernelSpec(family=kernel, theta=theta)
    design = kernels.build_design(spec, std.X)
    chain_seeds = [seed] + [tune._derive_seed(seed, j) for j in range(1, chains)]
    # overdispersed starting penalties when multiple chains are requested
    offsets = [10.0 ** (j - (chains - 1) / 2.0) for j in range(chains)]

    def run_chain(j):
        if method == "sprvm":
            a = -1.0 if prior_a is None else prior_a
            b = 0.0 if prior_b is None else prior_b
            config = sprvm_mod.SprvmConfig(
                a=a, b=b, xi=xi, m=m, burn_in=burnin, seed=chain_seeds[j],
                init_lambda=offsets[j],
            )
            return sprvm_mod.run_gibbs(config, design, std.y)
        a = 0.001 if prior_a is None else prior_a
        b = 0.01 if prior_b is None else prior_b
        config = rvm_mod.RvmConfig(
            a=a, b=b, c=prior_c, d=prior_d, m=m, burn_in=burnin,
            seed=chain_seeds[j], init_lambda=offsets[j], init_inv_sigma2=offsets[j],
        )
        return rvm_mod.run_gibbs(config, design, std.y)

    n_workers = threads if threads else _default_threads()
    with ThreadPoolExecutor(max_workers=min(n_workers, chains)) as pool:
        all_draws = list(pool.map(run_chain, range(chains)))

    # stored by basename so fit artifacts stay relocatable
    draws_files = []
    for j, draws in enumerate(all_draws):
        suffix = ".draws.csv" if j == 0 else f".draws.chain{j}.csv"
        path = f"{out_prefix}{suffix}"
        artifacts.save_draws_csv(draws, path)
        draws_files.append(os.path.basename(path))

    psrf_payload = None
    if chains >= 2:
        psrf_payload = _psrf_report(method, all_draws).to_dict()

    beta_bar = predict_mod.posterior_mean_beta(all_draws[0])
    propriety = None
    if method == "sprvm":
        cfg = all_draws[0].config
        propriety = sprvm_mod.check_propriety(cfg.a, cfg.b, design.n, design).to_dict()
    manifest_file = f"{out_prefix}.manifest.json"
    config_dict = dataclasses.asdict(all_draws[0].config)
    if isinstance(config_dict.get("init_lambda"), np.ndarray):
        config_dict["init_lambda"] = config_dict["init_lambda"].tolist()
    artifacts.write_manifest(
        manifest_file,
        command="fit",
        config={**config_dict, "method": method, "kernel": kernel, "theta": theta},
        seeds=chain_seeds,
        inputs=[data_path],
        extra={"propriety_report": propriety} if propriety else None,
    )
    fit_file = f"{out_prefix}.fit.json"
    artifacts.save_fit_json(
        fit_file,
        method=method.upper(),
        spec=spec,
        config=config_dict,
        standardization=std.standardization,
        posterior_mean_beta=beta_bar,
        x_train=std.X,
        draws_files=draws_files,
        manifest_file=os.path.basename(manifest_file),
        propriety=propriety,
        psrf=psrf_payload,
        xi=xi if method == "sprvm" else None,
    )
    click.echo(f"wrote {fit_file}")
    if psrf_payload:
        _print_psrf_table(psrf_payload)


def _psrf_report(method, all_draws):
    np1 = all_draws[0].beta.shape[1]
    if method == "sprvm":
        names = ["lambda"] + [f"beta_{i}" for i in range(np1)]
        mats = [np.column_stack([d.lam, d.beta]) for d in all_draws]
    else:
        names = (
            ["inv_sigma2"]
            + [f"lambda_{i}" for i in range(np1)]
            + [f"beta_{i}" for i in range(np1)]
        )
        mats = [np.column_stack([d.inv_sigma2, d.lambdas, d.beta]) for d in all_draws]
    return diagnostics.psrf(mats, names=names)


def _print_psrf_table(payload):
    click.echo("parameter            PSRF")
    for name, value in payload["per_parameter"].items():
        flag = "  <- above 1.1 (tool default threshold)" if value > diagnostics.PSRF_WARN_THRESHOLD else ""
        click.echo(f"{name:<18} {value:8.4f}{flag}")
    click.echo(f"max PSRF: {payload['max_psrf']:.4f}")


def _reconstruct(fit):
    spec = kernels.KernelSpec(**fit["kernel"])
    x_train = np.asarray(fit["x_train"], dtype=float)
    design = kernels.build_design(spec, x_train)
    std = data_mod.Standardization(**fit["standardization"])
    method = fit["method"]
    raw = artifacts.load_draws_csv(fit["_draws_paths"][0], method)
    cfg = dict(fit["config"])
    if method == "SPRVM":
        config = sprvm_mod.SprvmConfig(**cfg)
        draws = sprvm_mod.SprvmDraws(
            beta=raw["beta"], lam=raw["lambda"], config=config, design=design
        )
    else:
        if isinstance(cfg.get("init_lambda"), list):
            cfg["init_lambda"] = np.asarray(cfg["init_lambda"])
        config = rvm_mod.RvmConfig(**cfg)
        draws = rvm_mod.RvmDraws(
            beta=raw["beta"],
            lambdas=raw["lambdas"],
            inv_sigma2=raw["inv_sigma2"],
            config=config,
            design=design,
        )
    return spec, x_train, std, draws


@main.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(), help="fit JSON")
@click.option("--input", "input_path", required=True, type=click.Path(), help="covariate CSV")
@click.option("--output", "output_path", required=True, type=click.Path(), help="output CSV")
@_handle_errors
def cmd_predict(model_path, input_path, output_path):
    """Predict each row of a covariate CSV with a stored fit."""
    fit = artifacts.load_fit_json(model_path)
    spec, x_train, std, draws = _reconstruct(fit)
    x_new = artifacts.load_matrix_csv(input_path)
    if x_new.shape[1] != x_train.shape[1]:
        raise DataError(
            f"{input_path} has {x_new.shape[1]} covariates but the fit used {x_train.shape[1]}"
        )
    results = predict_mod.predict_batch(draws, spec, x_train, x_new, std)
    with open(output_path, "w", encoding="utf-8") as fh:
        fh.write("prediction,mcse\n")
        for r in results:
            mcse = repr(float(r.mcse)) if r.mcse is not None else "NA"
            fh.write(f"{repr(float(r.point))},{mcse}\n")
    if results and results[0].mcse is None:
        click.echo("MCSE unavailable (no known convergence rate)", err=True)
    click.echo(f"wrote {output_path}")


@main.command("cv")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--response", required=True)
@click.option("--method", type=click.Choice(["rvm", "sprvm"]), default="sprvm")
@click.option("--kernel", type=click.Choice(["gaussian", "laplace", "poly"]), default="gaussian")
@click.option("--theta-grid", default="0.1,1,10", help="comma-separated thetas")
@click.option("--xi-grid", default="0.1,1,10", help="comma-separated xis (sprvm)")
@click.option("--k", type=int, default=10, help="folds")
@click.option("--seed", type=int, default=0)
@click.option("--cv-iters", type=int, default=3000, help="total iterations per fold fit")
@click.option("--cv-burnin", type=int, default=1000)
@click.option("--threads", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path(), help="CvResult JSON")
@_handle_errors
def cmd_cv(
    data_path, response, method, kernel, theta_grid, xi_grid, k, seed,
    cv_iters, cv_burnin, threads, out_path,
):
    """Cross-validate kernel (and noise precision) parameters."""
    if cv_burnin < 0 or cv_iters <= cv_burnin:
        raise ValueError("need cv-iters > cv-burnin >= 0")
    ds = _load_dataset(data_path, response)
    thetas = _parse_grid(theta_grid, "--theta-grid")
    budget = tune.SamplerBudget(m=cv_iters - cv_burnin, burn_in=cv_burnin)
    method_name = tune.METHOD_RVM if method == "rvm" else tune.METHOD_SPRVM
    if method == "sprvm":
        xis = _parse_grid(xi_grid, "--xi-grid")
        grid = [(t, x) for t in thetas for x in xis]
    else:
        grid = thetas
    result = tune.cross_validate(
        method_name, grid, ds, k, seed, budget, kernel,
        threads=threads or _default_threads(),
    )
    payload = {
        "schema_version": artifacts.SCHEMA_VERSION,
        "method": method_name,
        "kernel": kernel,
        "grid": [list(c) for c in result.grid],
        "cv_rmspe": [None if np.isnan(v) else v for v in result.cv_rmspe],
        "best": list(result.best),
        "folds": result.folds,
        "seed": result.seed,
        "failures": {str(k_): v for k_, v in result.failures.items()},
    }
    artifacts.write_json(out_path, payload)
    artifacts.write_manifest(
        f"{out_path}.manifest.json",
        command="cv",
        config={"method": method, "kernel": kernel, "k": k,
                "cv_iters": cv_iters, "cv_burnin": cv_burnin},
        seeds=[seed],
        inputs=[data_path],
    )
    click.echo(f"best: {result.best} (cv rmspe {min(v for v in result.cv_rmspe if not np.isnan(v)):.6g})")
    click.echo(f"wrote {out_path}")


@main.command("ml-opt")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--response", required=True)
@click.option("--kernel", type=click.Choice(["gaussian", "laplace", "poly"]), default="gaussian")
@click.option("--theta-grid", default="0.1,1,10")
@click.option("--xi-grid", default="0.1,1,10")
@click.option("--prior-a", type=float, default=-1.0)
@click.option("--prior-b", type=float, default=0.0)
@click.option("--out-prefix", required=True, type=click.Path())
@_handle_errors
def cmd_ml_opt(data_path, response, kernel, theta_grid, xi_grid, prior_a, prior_b, out_prefix):
    """Grid-optimize the marginal likelihood over (theta, xi)."""
    ds = data_mod.standardize_response(_load_dataset(data_path, response))
    grid = marglik.optimize_marglik(
        _parse_grid(theta_grid, "--theta-grid"),
        _parse_grid(xi_grid, "--xi-grid"),
        ds,
        kernel_family=kernel,
        a=prior_a,
        b=prior_b,
    )
    csv_path = f"{out_prefix}.grid.csv"
    artifacts.save_marglik_grid_csv(grid, csv_path)
    argmax_path = f"{out_prefix}.argmax.json"
    artifacts.write_json(
        argmax_path,
        {
            "schema_version": artifacts.SCHEMA_VERSION,
            "theta": grid.argmax[0],
            "xi": grid.argmax[1],
            "kernel": kernel,
            "prior": {"a": prior_a, "b": prior_b},
            "divergent_cells": int(grid.divergent.sum()),
        },
    )
    artifacts.write_manifest(
        f"{out_prefix}.manifest.json",
        command="ml-opt",
        config={"kernel": kernel, "prior_a": prior_a, "prior_b": prior_b},
        seeds=[],
        inputs=[data_path],
    )
    click.echo(f"argmax: theta={grid.argmax[0]:.6g}, xi={grid.argmax[1]:.6g}")
    click.echo(f"wrote {csv_path}")


@main.command("diagnose")
@click.option("--fit", "fit_path", required=True, type=click.Path())
@click.option("--new-point", "new_point_path", type=click.Path(), default=None,
              help="CSV with covariate rows to predict")
@click.option("--estimator", type=click.Choice(["bm", "sv"]), default="bm",
              help="MCSE covariance estimator: batch means or spectral variance")
@click.option("--out-json", type=click.Path(), default=None)
@_handle_errors
def cmd_diagnose(fit_path, new_point_path, estimator, out_json):
    """Print PSRF for stored chains and the MCSE at requested test points."""
    fit = artifacts.load_fit_json(fit_path)
    spec, x_train, std, draws = _reconstruct(fit)
    method = fit["method"]
    payload = {"schema_version": artifacts.SCHEMA_VERSION, "method": method}
    if len(fit["_draws_paths"]) >= 2:
        mats = []
        for p in fit["_draws_paths"]:
            raw = artifacts.load_draws_csv(p, method)
            if method == "SPRVM":
                mats.append(np.column_stack([raw["lambda"], raw["beta"]]))
            else:
                mats.append(
                    np.column_stack([raw["inv_sigma2"], raw["lambdas"], raw["beta"]])
                )
        np1 = draws.beta.shape[1]
        if method == "SPRVM":
            names = ["lambda"] + [f"beta_{i}" for i in range(np1)]
        else:
            names = (
                ["inv_sigma2"]
                + [f"lambda_{i}" for i in range(np1)]
                + [f"beta_{i}" for i in range(np1)]
            )
        report = diagnostics.psrf(mats, names=names)
        payload["psrf"] = report.to_dict()
        _print_psrf_table(payload["psrf"])
    else:
        click.echo("PSRF unavailable: fit stores a single chain (refit with --chains 4)")
    if new_point_path is not None:
        x_new = artifacts.load_matrix_csv(new_point_path)
        if method == "SPRVM" and estimator == "sv":
            cov = diagnostics.spectral_variance_cov(draws.beta)
            beta_bar = predict_mod.posterior_mean_beta(draws)
            preds = []
            for row_x in np.atleast_2d(x_new):
                row = kernels.prediction_row(spec, x_train, row_x)
                point_std = float(row @ beta_bar)
                mcse = diagnostics.prediction_mcse(cov, row) * std.sd
                preds.append({"prediction": float(std.invert(point_std)), "mcse": mcse})
        else:
            results = predict_mod.predict_batch(draws, spec, x_train, x_new, std)
            preds = [
                {"prediction": r.point, "mcse": r.mcse}
                for r in results
            ]
        payload["predictions"] = preds
        for pr in preds:
            if pr["mcse"] is None:
                click.echo(f"prediction: {pr['prediction']:.6g}  "
                           "MCSE unavailable (no known convergence rate)")
            else:
                click.echo(f"prediction: {pr['prediction']:.6g}  MCSE: {pr['mcse']:.6g}")
    if out_json:
        artifacts.write_json(out_json, payload)
        click.echo(f"wrote {out_json}")


@main.command("bench")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--response", required=True)
@click.option("--methods", default="rvm,sprvm,sprvm-ml",
              help="comma-separated subset of rvm,sprvm,sprvm-ml")
@click.option("--splits", type=int, default=20)
@click.option("--test-size", type=int, default=10)
@click.option("--seed", type=int, default=0)
@click.option("--kernel", type=click.Choice(["gaussian", "laplace", "poly"]), default="gaussian")
@click.option("--theta-grid", default=",".join(f"{t:g}" for t in tune.DEFAULT_THETA_GRID))
@click.option("--xi-grid", default=",".join(f"{x:g}" for x in tune.DEFAULT_XI_GRID))
@click.option("--cv-k", type=int, default=10)
@click.option("--cv-iters", type=int, default=3000)
@click.option("--cv-burnin", type=int, default=1000)
@click.option("--final-iters", type=int, default=10000)
@click.option("--final-burnin", type=int, default=5000)
@click.option("--threads", type=int, default=None)
@click.option("--out-prefix", required=True, type=click.Path())
@_handle_errors
def cmd_bench(
    data_path, response, methods, splits, test_size, seed, kernel,
    theta_grid, xi_grid, cv_k, cv_iters, cv_burnin, final_iters, final_burnin,
    threads, out_prefix,
):
    """Repeated-split RMSPE benchmark across methods."""
    name_map = {"rvm": tune.METHOD_RVM, "sprvm": tune.METHOD_SPRVM,
                "sprvm-ml": tune.METHOD_SPRVM_ML}
    try:
        method_names = [name_map[m.strip().lower()] for m in methods.split(",") if m.strip()]
    except KeyError as exc:
        raise ValueError(f"unknown method {exc.args[0]!r} in --methods")
    ds = _load_dataset(data_path, response)
    report = tune.benchmark(
        ds,
        method_names,
        splits=splits,
        test_size=test_size,
        seed=seed,
        kernel_family=kernel,
        theta_grid=_parse_grid(theta_grid, "--theta-grid"),
        xi_grid=_parse_grid(xi_grid, "--xi-grid"),
        cv_k=cv_k,
        cv_budget=tune.SamplerBudget(m=cv_iters - cv_burnin, burn_in=cv_burnin),
        final_budget=tune.SamplerBudget(m=final_iters - final_burnin, burn_in=final_burnin),
        threads=threads or _default_threads(),
    )
    table = _bench_table(report)
    click.echo(table)
    with open(f"{out_prefix}.bench.txt", "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    artifacts.write_json(
        f"{out_prefix}.bench.json",
        {
            "schema_version": artifacts.SCHEMA_VERSION,
            "per_method": report.per_method,
            "splits": report.splits,
            "test_size": report.test_size,
            "per_split": list(report.per_split),
            "failures": [list(f) for f in report.failures],
        },
    )
    artifacts.write_manifest(
        f"{out_prefix}.manifest.json",
        command="bench",
        config={"methods": methods, "splits": splits, "test_size": test_size,
                "kernel": kernel, "cv_k": cv_k},
        seeds=[seed],
        inputs=[data_path],
    )
    click.echo(f"wrote {out_prefix}.bench.json")


def _bench_table(report) -> str:
    lines = ["Method      Mean RMSPE", "-" * 24]
    for method, value in report.per_method.items():
        lines.append(f"{method:<10}  {value:10.4f}")
    lines.append(f"(splits: {report.splits}, test size: {report.test_size})")
    return "\n".join(lines)


if __name__ == "__main__":
    main()
