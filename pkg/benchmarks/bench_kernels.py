"""Compare the numba and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--n 256] [--repeat 20]

Times each hot kernel on an n x n image and one full TV reconstruction
solve per backend, and checks that both backends give the same iterates.
"""
import argparse
import time
from dataclasses import replace

import numpy as np

from inertial_cp import _kernels
from inertial_cp.experiments import ExperimentConfig, assemble_problem, generate_phantom
from inertial_cp.solvers import Variant, solve


def best_of(fn, repeat):
    fn()  # warm-up, includes jit compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(n, rng):
    x = rng.standard_normal(n * n)
    p = rng.standard_normal(2 * n * n)
    out_x, out_p = np.empty(n * n), np.empty(2 * n * n)
    return {
        "fwht": lambda: _kernels.fwht(x.copy()),
        "diff_forward": lambda: _kernels.diff_forward(x, n, out_p),
        "diff_adjoint": lambda: _kernels.diff_adjoint(p, n, out_x),
        "group_shrink": lambda: _kernels.group_shrink(p, 0.5, out_p),
        "group_norm_sum": lambda: _kernels.group_norm_sum(p),
    }


def tv_solve(n, iters):
    ph = generate_phantom(n, 600, 256, seed=0, min_size=1, max_size=4)
    tvp = assemble_problem(ph, 0.4, seed=0)
    cfg = ExperimentConfig(n=n, max_iters=iters).solver_config(Variant.ICP_YYBX)
    cfg = replace(cfg, epsilon=1e-300)  # run the full iteration budget
    return lambda: solve(tvp.saddle, cfg, tvp.x0, tvp.y0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--solve-iters", type=int, default=200)
    args = ap.parse_args()

    backends = sorted(_kernels.IMPLEMENTATIONS)
    if "numba" not in backends:
        print("numba is not available; only the numpy backend will be timed")
    results, finals = {}, {}
    for name in backends:
        _kernels.set_backend(name)
        rng = np.random.default_rng(0)
        for label, fn in kernel_cases(args.n, rng).items():
            results[(label, name)] = best_of(fn, args.repeat)
        run = tv_solve(args.n, args.solve_iters)
        results[("tv_solve", name)] = best_of(run, 1)
        finals[name] = run().x

    print(f"n={args.n}, best of {args.repeat} (tv_solve: {args.solve_iters} iterations)")
    print(f"{'kernel':<16}" + "".join(f"{b:>14}" for b in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    labels = list(kernel_cases(4, np.random.default_rng(0))) + ["tv_solve"]
    for label in labels:
        row = [results[(label, b)] for b in backends]
        line = f"{label:<16}" + "".join(f"{t * 1e3:>12.3f}ms" for t in row)
        if len(backends) == 2:
            line += f"   {row[1] / row[0]:7.2f}x"
        print(line)
    if len(finals) == 2:
        gap = np.max(np.abs(finals["numba"] - finals["numpy"]))
        print(f"max |x_numba - x_numpy| after tv_solve: {gap:.2e}")
    _kernels.set_backend(_kernels._env_backend())


if __name__ == "__main__":
    main()
