"""Command-line driver for the TV reconstruction study.

Example::

    python -m inertial_cp --n 64 --fractions 0.2,0.4 --epsilon 1e-2,1e-3 --out results

The output directory is ``--out`` if given, else ``$INERTIAL_CP_OUT``, else
``./results``.
"""
import argparse
import logging
import sys

from .experiments import OUT_ENV, SWEEP_ALPHAS, ExperimentConfig, default_output_dir, run_experiment
from .solvers import ConfigError, NonFiniteIterateError

log = logging.getLogger("inertial_cp")


def _floats(text):
    try:
        vals = tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _names(text):
    vals = tuple(t for t in text.replace(",", " ").split() if t)
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser():
    p = argparse.ArgumentParser(
        prog="inertial-cp",
        description="Compare plain and inertial primal-dual solvers on TV "
                    "compressive image reconstruction.")
    p.add_argument("--n", type=int, default=64, help="image side, a power of two (default 64)")
    p.add_argument("--fractions", type=_floats, default=(0.2, 0.4, 0.6, 0.8),
                   help="measurement fractions q/n^2, comma-separated")
    p.add_argument("--sigma", type=float, default=5.0, help="dual step size (default 5)")
    p.add_argument("--tau", type=float, default=None,
                   help="primal step size (default 0.124/sigma)")
    p.add_argument("--alpha", type=float, default=0.28,
                   help="extrapolation parameter of the inertial variants (default 0.28)")
    p.add_argument("--epsilon", type=_floats, default=(1e-3,),
                   help="stopping tolerance(s), comma-separated")
    p.add_argument("--variants", type=_names, default=("CP-yybx", "iCP-yybx"),
                   help="solver variants, comma-separated (default CP-yybx,iCP-yybx)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", default=None,
                   help=f"output directory (default ${OUT_ENV} or ./results)")
    p.add_argument("--alpha-sweep", action="store_true",
                   help="also run iCP-yybx for alpha in "
                        + ", ".join(str(a) for a in SWEEP_ALPHAS))
    p.add_argument("--image", default=None, metavar="RAW",
                   help="raw float64 image with a RAW.hdr side-car giving n; "
                        "replaces the synthetic phantom")
    p.add_argument("--rects", type=int, default=600, help="phantom rectangle count")
    p.add_argument("--levels", type=int, default=256, help="phantom intensity levels")
    p.add_argument("--rect-size", type=int, nargs=2, default=(1, 4), metavar=("MIN", "MAX"),
                   help="phantom rectangle side range (default 1 4)")
    p.add_argument("--images", type=int, default=1, help="number of phantoms (seeds seed..)")
    p.add_argument("--max-iters", type=int, default=100000, help="iteration cap per run")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock times in the CSVs (breaks byte-determinism)")
    p.add_argument("-q", "--quiet", action="store_true", help="only print errors")
    return p


def config_from_args(args):
    return ExperimentConfig(
        n=args.n, fractions=args.fractions, sigma=args.sigma, tau=args.tau,
        alpha=args.alpha, epsilons=args.epsilon, seed=args.seed,
        variants=args.variants,
        output_dir=args.out if args.out is not None else default_output_dir(),
        rect_count=args.rects, levels=args.levels,
        rect_min=args.rect_size[0], rect_max=args.rect_size[1],
        images=args.images, image_path=args.image, max_iters=args.max_iters,
        alpha_sweep=args.alpha_sweep, timing=args.timing)


def _print_summary(result, out):
    out.write("epsilon  fraction  variant     iterations  tv        feas_inf  snr\n")
    for r in result.summary:
        out.write(f"{r['epsilon']:<8.0e} {r['fraction']:<9.2f} {r['variant']:<11} "
                  f"{r['iterations']:<11d} {r['tv']:<9.2e} {r['feas_inf']:<9.2e} "
                  f"{r['snr']:.2f}\n")
    for r in result.ratios:
        out.write(f"eps {r['epsilon']:.0e} fraction {r['fraction']:.2f}: "
                  f"It2/It1 = {r['it2']}/{r['it1']} = {r['ratio']:.3f}\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    try:
        cfg = config_from_args(args)
        result = run_experiment(cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"inertial-cp: error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteIterateError as exc:
        print(f"inertial-cp: solver diverged: {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        _print_summary(result, sys.stdout)
        print(f"wrote {len(result.files)} files to {cfg.output_dir}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
