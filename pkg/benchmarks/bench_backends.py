"""Times the Gibbs scan loops on both backends.

Run from the repository root:

    python benchmarks/bench_backends.py [--sizes 20,60,120] [--iters 10000]

The two backends consume identical pre-generated variates, so the timing
comparison is draw-for-draw and the outputs are checked to match exactly.
"""

import argparse
import time

import numpy as np

from sprvm import KernelSpec, build_design, make_synthetic, standardize_response
from sprvm import _backend


def chain_args(n, total, seed=0):
    ds = standardize_response(make_synthetic(n, 3, 0.2, seed=seed))
    design = build_design(KernelSpec("gaussian", 1.5), ds.X)
    K, y = design.K, ds.y
    np1 = n + 1
    ktk = np.asfortranarray(K.T @ K)
    kty = K.T @ y
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((total, np1))
    g = rng.standard_gamma(0.5 * np1 - 1.0, size=total)
    sprvm_args = (ktk, kty, float(np.trace(ktk)), 1.0, 0.0, 1.0, total // 2, z, g)
    z2 = rng.standard_normal((total + 1, np1))
    g_sig = rng.standard_gamma(0.5 * n, size=total)
    g_lam = rng.standard_gamma(0.501, size=(total, np1))
    rvm_args = (
        ktk, kty, np.asfortranarray(K), y, float(np.trace(ktk)),
        0.01, 0.0, np.ones(np1), 1.0, total // 2, z2, g_sig, g_lam,
    )
    return sprvm_args, rvm_args


def time_call(fn, *args, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="20,60,120",
                        help="comma-separated training sizes n")
    parser.add_argument("--iters", type=int, default=10000,
                        help="total Gibbs iterations per chain")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = _backend.available_backends()
    if "cython" not in backends:
        print("note: compiled backend not built; timing the python backend only")

    header = f"{'chain':<8} {'n':>5} {'iters':>7} " + " ".join(
        f"{name + ' (s)':>12}" for name in backends
    )
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        sprvm_args, rvm_args = chain_args(n, args.iters)
        for label, fn_name, call_args in (
            ("sprvm", "run_sprvm_chain", sprvm_args),
            ("rvm", "run_rvm_chain", rvm_args),
        ):
            times = {}
            outputs = {}
            for name, mod in backends.items():
                times[name], outputs[name] = time_call(getattr(mod, fn_name), *call_args)
            row = f"{label:<8} {n:>5} {args.iters:>7} " + " ".join(
                f"{times[name]:>12.4f}" for name in backends
            )
            if len(backends) == 2:
                row += f" {times['python'] / times['cython']:>8.1f}x"
                same = all(
                    np.array_equal(a, b)
                    for a, b in zip(outputs["python"], outputs["cython"])
                )
                row += "  (outputs match)" if same else "  (OUTPUTS DIFFER!)"
            print(row)


if __name__ == "__main__":
    main()
