"""Total-variation compressive imaging experiments.

An ``n x n`` piecewise-constant image ``x*`` is measured through a
randomized partial Walsh-Hadamard operator ``B`` and reconstructed by

    min_x  iota_{B x = b}(x) + sum_i ||A_i x||

with ``A`` the periodic forward differences. Plain and inertial
primal-dual schemes are run from ``x0 = B^T b, y0 = 0`` and compared by
iteration counts at several tolerances.
"""
import csv
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import history_difference
from .linops import FiniteDifferenceMap, PartialWalshHadamardMap
from .proxops import AffineProjection, GroupNorm
from .solvers import ConfigError, SaddleProblem, SolverConfig, Variant, parse_variant, solve

log = logging.getLogger(__name__)

CSV_COLUMNS = ("k", "res", "tv", "snr", "feas_inf", "wall_clock")
SWEEP_ALPHAS = (0.05, 0.15, 0.25, 0.35)
OUT_ENV = "INERTIAL_CP_OUT"


def _is_pow2(n):
    return n >= 1 and not n & (n - 1)


# --------------------------------------------------------------------------
# images


@dataclass
class Phantom:
    """Piecewise-constant test image, column-stacked.

    ``perimeter_bound`` is the sum of rectangle perimeters ``2 (h + w)``;
    the number of pixels with a nonzero difference pair never exceeds it.
    """
    n: int
    image: np.ndarray
    seed: int
    rect_count: int
    levels: int
    rects: list = field(default_factory=list)
    perimeter_bound: int = 0

    def as_2d(self):
        return self.image.reshape(self.n, self.n, order="F")


def generate_phantom(n, rect_count=6, levels=4, seed=0, min_size=None, max_size=None):
    """Random axis-aligned rectangles painted on a constant background.

    Rectangle sides are drawn uniformly from ``[min_size, max_size]``
    (default ``[n/8, n/2]``, i.e. a few large blocks). Intensities come from
    ``levels`` equally spaced values in [0, 1]; every rectangle differs from
    the background. Deterministic in ``seed``.

    Many small rectangles with many levels give a texture-rich image whose
    TV reconstruction is not exact, which behaves much like a natural image;
    a few large ones give a cartoon that is recovered exactly.
    """
    n = int(n)
    if not _is_pow2(n) or n < 2:
        raise ValueError(
            f"image side must be a power of two (the Walsh-Hadamard transform "
            f"needs 2^j = n^2 pixels), got {n}")
    if rect_count < 0:
        raise ValueError(f"rect_count must be nonnegative, got {rect_count}")
    if levels < 2:
        raise ValueError(f"need at least 2 intensity levels, got {levels}")
    lo = max(1, n // 8) if min_size is None else int(min_size)
    hi = max(lo, n // 2) if max_size is None else int(max_size)
    hi = min(hi, n - 1)
    if not 1 <= lo <= hi:
        raise ValueError(f"invalid rectangle size range [{min_size}, {max_size}] for n={n}")
    rng = np.random.default_rng(seed)
    values = np.linspace(0.0, 1.0, levels)
    bg = int(rng.integers(levels))
    img = np.full((n, n), values[bg])
    rects = []
    perim = 0
    for _ in range(rect_count):
        h = int(rng.integers(lo, hi + 1))
        w = int(rng.integers(lo, hi + 1))
        r0 = int(rng.integers(0, n - h + 1))
        c0 = int(rng.integers(0, n - w + 1))
        lvl = int(rng.integers(levels - 1))
        lvl += lvl >= bg
        img[r0:r0 + h, c0:c0 + w] = values[lvl]
        rects.append((r0, c0, h, w, float(values[lvl])))
        perim += 2 * (h + w)
    return Phantom(n, img.ravel(order="F"), seed, rect_count, levels, rects, perim)


def save_raw_image(path, image, n):
    """Write a column-stacked float64 image and its ``.hdr`` side-car."""
    path = Path(path)
    image = np.asarray(image, dtype="<f8").ravel()
    if image.size != n * n:
        raise ValueError(f"image has {image.size} pixels, expected {n * n}")
    image.tofile(path)
    path.with_name(path.name + ".hdr").write_text(f"n {n}\norder column\ndtype float64-le\n")


def load_raw_image(path):
    """Read a raw image written by :func:`save_raw_image`.

    The side-car ``<path>.hdr`` holds ``n <side>`` (other keys are
    optional). Returns ``(n, column-stacked vector)``.
    """
    path = Path(path)
    hdr = path.with_name(path.name + ".hdr")
    if not hdr.exists():
        raise ConfigError(f"missing header file {hdr}")
    meta = {}
    for line in hdr.read_text().splitlines():
        parts = line.split()
        if len(parts) >= 2:
            meta[parts[0].lower()] = parts[1]
    if "n" not in meta:
        raise ConfigError(f"header {hdr} does not define n")
    n = int(meta["n"])
    if meta.get("order", "column").lower().startswith("row"):
        order = "C"
    else:
        order = "F"
    data = np.fromfile(path, dtype="<f8")
    if data.size != n * n:
        raise ConfigError(f"{path} holds {data.size} values, header says {n}x{n}")
    if not _is_pow2(n):
        raise ConfigError(f"image side {n} is not a power of two")
    return n, data.reshape(n, n, order=order).ravel(order="F").astype(np.float64)


# --------------------------------------------------------------------------
# problem assembly


@dataclass
class TVProblem:
    x_true: np.ndarray
    A: FiniteDifferenceMap
    B: PartialWalshHadamardMap
    b: np.ndarray
    f: AffineProjection
    g: GroupNorm
    fraction: float
    seed: int

    @property
    def saddle(self):
        return SaddleProblem(self.A, self.f, g=self.g)

    @property
    def x0(self):
        return self.B.adjoint_apply(self.b)

    @property
    def y0(self):
        return np.zeros(self.A.out_dim)


def operator_seed(seed, fraction):
    return int(np.random.SeedSequence([int(seed), int(round(fraction * 10000))])
               .generate_state(1)[0])


def assemble_problem(image, fraction, seed):
    """Build the TV compressive-sensing problem for ``image``.

    ``image`` is a :class:`Phantom` or a column-stacked square vector.
    ``q = round(fraction n^2)`` rows are sampled with ``seed``; the
    constant row is always among them so the image mean is measured.
    """
    x_true = image.image if isinstance(image, Phantom) else np.asarray(image, dtype=np.float64)
    npix = x_true.size
    n = int(round(math.sqrt(npix)))
    if n * n != npix:
        raise ValueError(f"image with {npix} pixels is not square")
    if not _is_pow2(n):
        raise ValueError(f"image side {n} is not a power of two")
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    q = int(round(fraction * npix))
    if q < 1:
        raise ValueError(f"fraction {fraction} yields no measurements for {npix} pixels")
    j = npix.bit_length() - 1
    B = PartialWalshHadamardMap.random(j, q, seed, keep_dc=True)
    b = B.apply(x_true)
    A = FiniteDifferenceMap(n)
    return TVProblem(x_true, A, B, b, AffineProjection(B, b), GroupNorm(npix),
                     float(fraction), seed)


# --------------------------------------------------------------------------
# experiment driver


@dataclass
class ExperimentConfig:
    """Settings of a TV reconstruction study.

    ``tau`` defaults to ``0.124 / sigma``. All (fraction, variant) runs go
    to the smallest tolerance in ``epsilons``; counts for larger
    tolerances are read off the same run, which is what a separate run
    stopped at that tolerance would produce.
    """
    n: int = 64
    fractions: tuple = (0.2, 0.4, 0.6, 0.8)
    sigma: float = 5.0
    tau: float = None
    alpha: float = 0.28
    epsilons: tuple = (1e-3,)
    seed: int = 0
    variants: tuple = ("CP-yybx", "iCP-yybx")
    output_dir: str = "results"
    rect_count: int = 600
    levels: int = 256
    rect_min: int = 1
    rect_max: int = 4
    images: int = 1
    image_path: str = None
    max_iters: int = 100000
    alpha_sweep: bool = False
    sweep_alphas: tuple = SWEEP_ALPHAS
    timing: bool = False

    def __post_init__(self):
        if self.tau is None:
            self.tau = 0.124 / self.sigma
        self.fractions = tuple(float(f) for f in np.atleast_1d(self.fractions))
        self.epsilons = tuple(float(e) for e in np.atleast_1d(self.epsilons))
        if isinstance(self.variants, str):
            self.variants = (self.variants,)
        self.variants = tuple(parse_variant(v) for v in self.variants)
        self.validate()

    def validate(self):
        if not self.fractions or any(not 0 < f <= 1 for f in self.fractions):
            raise ConfigError(f"fractions must lie in (0, 1], got {self.fractions}")
        if not self.epsilons or any(not e > 0 for e in self.epsilons):
            raise ConfigError(f"tolerances must be positive, got {self.epsilons}")
        if self.image_path is None and (not _is_pow2(int(self.n)) or self.n < 2):
            raise ConfigError(f"n must be a power of two, got {self.n}")
        if self.images < 1:
            raise ConfigError("need at least one image")
        for v in self.variants:
            self.solver_config(v)
        if self.alpha_sweep:
            for a in self.sweep_alphas:
                if not 0 <= a < 1:
                    raise ConfigError(f"sweep alpha {a} outside [0, 1)")

    def solver_config(self, variant, alpha=None, strict=True):
        return SolverConfig(variant, self.tau, self.sigma, 8.0,
                            alpha=self.alpha if alpha is None else alpha,
                            epsilon=min(self.epsilons), max_iters=self.max_iters,
                            strict_alpha=strict)


def _ensure_writable(out):
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out):
            pass
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def sci(v, digits=2):
    """Scientific notation such as ``3.41e+03``; ``inf``/``nan`` verbatim."""
    v = float(v)
    if not math.isfinite(v):
        return _fmt(v)
    return f"{v:.{digits}e}"


def write_history_csv(path, history, timing=True):
    """Per-iteration CSV with columns ``k,res,tv,snr,feas_inf,wall_clock``.

    Without ``timing`` the wall-clock column is written as ``nan`` so that
    repeated runs produce identical bytes.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in history:
            w.writerow([_fmt(r.k), _fmt(r.res), _fmt(r.tv), _fmt(r.snr),
                        _fmt(r.feas_inf), _fmt(r.wall_clock if timing else math.nan)])


def read_history_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in CSV_COLUMNS}


def iterations_to_tolerance(history, epsilon):
    """Index of the first record whose relative change is below ``epsilon``.

    Returns None if the tolerance was never met.
    """
    for r in history:
        if r.rel_change < epsilon:
            return r
    return None


@dataclass
class RunOutcome:
    image: int
    fraction: float
    variant: Variant
    alpha: float
    history: list
    feasibility: float
    csv_path: Path = None


@dataclass
class ExperimentResult:
    summary: list
    ratios: list
    runs: list
    sweep: list
    files: list

    def ratio_by_fraction(self, epsilon):
        return {r["fraction"]: r["ratio"] for r in self.ratios
                if r["epsilon"] == epsilon}


def _images(cfg):
    if cfg.image_path is not None:
        _, x = load_raw_image(cfg.image_path)
        return [x]
    return [generate_phantom(cfg.n, cfg.rect_count, cfg.levels, cfg.seed + i,
                             cfg.rect_min, cfg.rect_max).image
            for i in range(cfg.images)]


def _run_one(tvp, scfg, timing):
    worst = [0.0]
    B, b = tvp.B, tvp.b

    def check_feasible(state, rec):
        worst[0] = max(worst[0], float(np.max(np.abs(B.apply(state.x) - b))))

    res = solve(tvp.saddle, scfg, tvp.x0, tvp.y0, x_true=tvp.x_true,
                callback=check_feasible)
    return res, worst[0]


def run_experiment(cfg):
    """Run every (image, fraction, variant) and write CSV and plot data.

    Files under ``cfg.output_dir``:

    * ``runs/img{i}_f{pct}_{variant}.csv``: per-iteration history,
    * ``summary.csv``: one row per (epsilon, image, fraction, variant),
    * ``ratios.csv``: It2/It1 for iCP-yybx against CP-yybx,
    * ``alpha_sweep.csv`` when ``cfg.alpha_sweep`` is set,
    * ``plot/``: columnar data for curves, differences and bar charts.
    """
    out = _ensure_writable(cfg.output_dir)
    images = _images(cfg)
    n = int(round(math.sqrt(images[0].size)))
    (out / "runs").mkdir(exist_ok=True)
    runs, files = [], []
    for i, img in enumerate(images):
        for fraction in cfg.fractions:
            tvp = assemble_problem(img, fraction, operator_seed(cfg.seed + i, fraction))
            for variant in cfg.variants:
                t0 = time.perf_counter()
                res, feas = _run_one(tvp, cfg.solver_config(variant), cfg.timing)
                log.info("image %d fraction %.2f %s: %d iterations (%s) in %.2fs",
                         i, fraction, variant, res.iterations, res.reason,
                         time.perf_counter() - t0)
                path = out / "runs" / f"img{i}_f{round(fraction * 100):03d}_{variant.value}.csv"
                write_history_csv(path, res.history, cfg.timing)
                files.append(path)
                runs.append(RunOutcome(i, fraction, variant, cfg.alpha if variant.inertial else 0.0,
                                       res.history, feas, path))

    summary = _summary_rows(runs, cfg.epsilons, n)
    ratios = _ratio_rows(summary)
    files.append(_write_rows(out / "summary.csv", summary,
                             ("epsilon", "image", "fraction", "n", "variant", "tv",
                              "feas_inf", "snr", "iterations", "converged")))
    files.append(_write_rows(out / "ratios.csv", ratios,
                             ("epsilon", "image", "fraction", "n", "it1", "it2", "ratio")))

    sweep = []
    if cfg.alpha_sweep:
        sweep = _alpha_sweep(cfg, images, n)
        files.append(_write_rows(out / "alpha_sweep.csv", sweep,
                                 ("epsilon", "image", "fraction", "n", "alpha",
                                  "iterations", "converged")))

    plot_dir = out / "plot"
    files += emit_plot_data({_label(r): r.history for r in runs}, "curves", plot_dir)
    for a, b in (("CP-yybx", "CP-xxby"), ("iCP-yybx", "iCP-xxby")):
        for i in range(len(images)):
            for fraction in cfg.fractions:
                ha = _find(runs, i, fraction, a)
                hb = _find(runs, i, fraction, b)
                if ha is not None and hb is not None:
                    files += emit_plot_data({_label(ha): ha.history, _label(hb): hb.history},
                                            "difference", plot_dir)
    files += emit_plot_data(summary, "bars", plot_dir)
    if sweep:
        files += emit_plot_data(sweep, "alpha", plot_dir)
    return ExperimentResult(summary, ratios, runs, sweep, files)


def _label(run):
    return f"img{run.image}_f{round(run.fraction * 100):03d}_{run.variant.value}"


def _find(runs, image, fraction, variant):
    variant = parse_variant(variant)
    for r in runs:
        if r.image == image and r.fraction == fraction and r.variant is variant:
            return r
    return None


def _summary_rows(runs, epsilons, n):
    rows = []
    for eps in sorted(epsilons, reverse=True):
        for r in runs:
            rec = iterations_to_tolerance(r.history, eps)
            converged = rec is not None
            if rec is None:
                rec = r.history[-1]
            rows.append({"epsilon": eps, "image": r.image, "fraction": r.fraction, "n": n,
                         "variant": r.variant.value, "tv": rec.tv, "feas_inf": rec.feas_inf,
                         "snr": rec.snr, "iterations": rec.k, "converged": int(converged)})
    return rows


def _ratio_rows(summary):
    rows = []
    keyed = {(s["epsilon"], s["image"], s["fraction"], s["variant"]): s for s in summary}
    for (eps, img, frac, var), s in keyed.items():
        if var != Variant.CP_YYBX.value:
            continue
        t = keyed.get((eps, img, frac, Variant.ICP_YYBX.value))
        if t is None:
            continue
        rows.append({"epsilon": eps, "image": img, "fraction": frac, "n": s["n"],
                     "it1": s["iterations"], "it2": t["iterations"],
                     "ratio": t["iterations"] / s["iterations"]})
    return rows


def _alpha_sweep(cfg, images, n):
    rows = []
    for i, img in enumerate(images):
        for fraction in cfg.fractions:
            tvp = assemble_problem(img, fraction, operator_seed(cfg.seed + i, fraction))
            for a in cfg.sweep_alphas:
                scfg = cfg.solver_config(Variant.ICP_YYBX, alpha=a, strict=False)
                res = solve(tvp.saddle, scfg, tvp.x0, tvp.y0, x_true=tvp.x_true)
                for eps in sorted(cfg.epsilons, reverse=True):
                    rec = iterations_to_tolerance(res.history, eps)
                    rows.append({"epsilon": eps, "image": i, "fraction": fraction, "n": n,
                                 "alpha": a,
                                 "iterations": rec.k if rec else res.history[-1].k,
                                 "converged": int(rec is not None)})
    return rows


def _write_rows(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            out = []
            for c in columns:
                v = r[c]
                if c in ("tv", "feas_inf"):
                    out.append(sci(v))
                elif c == "snr":
                    out.append(f"{v:.2f}" if math.isfinite(v) else _fmt(v))
                elif isinstance(v, str):
                    out.append(v)
                else:
                    out.append(_fmt(v))
            w.writerow(out)
    return path


# --------------------------------------------------------------------------
# plot data


def emit_plot_data(data, mode, out_dir):
    """Write whitespace-separated columnar files for external plotting.

    Modes:
        ``curves``: ``data`` maps label -> history; one file per label
            with columns ``k res tv snr feas_inf``.
        ``difference``: ``data`` maps exactly two labels -> histories;
            absolute and relative differences of res, tv and snr.
        ``bars``: ``data`` is a list of summary rows; mean iteration count
            per (epsilon, fraction, n, variant), one file per epsilon.
        ``alpha``: ``data`` is a list of sweep rows; mean iteration count
            per (fraction, alpha), one file per epsilon.

    Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if mode == "curves":
        return [_write_dat(out / f"curve_{label}.dat", ("k", "res", "tv", "snr", "feas_inf"),
                           [[r.k, r.res, r.tv, r.snr, r.feas_inf] for r in hist])
                for label, hist in data.items()]
    if mode == "difference":
        if len(data) != 2:
            raise ValueError("difference mode needs exactly two histories")
        (la, ha), (lb, hb) = data.items()
        cols, arrays = ["k"], []
        for key in ("res", "tv", "snr"):
            ks, absd, rel = history_difference(ha, hb, key)
            if not arrays:
                arrays.append(ks)
            cols += [f"abs_{key}", f"rel_{key}"]
            arrays += [absd, rel]
        rows = [[int(k)] + [float(c[i]) for c in arrays[1:]]
                for i, k in enumerate(arrays[0])]
        return [_write_dat(out / f"diff_{la}_vs_{lb}.dat", cols, rows)]
    if mode == "bars":
        return _grouped(out, data, "bars", ("fraction", "n", "variant"), "variant")
    if mode == "alpha":
        return _grouped(out, data, "alpha_sweep", ("fraction", "n", "alpha"), "alpha")
    raise ValueError(f"unknown plot mode {mode!r}")


def _grouped(out, rows, stem, keys, column_key):
    paths = []
    for eps in sorted({r["epsilon"] for r in rows}, reverse=True):
        sel = [r for r in rows if r["epsilon"] == eps]
        cols = sorted({r[column_key] for r in sel}, key=str)
        groups = {}
        for r in sel:
            groups.setdefault((r["fraction"], r["n"]), {}).setdefault(r[column_key], []).append(
                r["iterations"])
        body = []
        for (frac, n), per in sorted(groups.items()):
            body.append([frac, n] + [float(np.mean(per[c])) if c in per else math.nan
                                     for c in cols])
        header = ["fraction", "n"] + [f"{column_key}={c}" for c in cols]
        paths.append(_write_dat(out / f"{stem}_eps{eps:.0e}.dat", header, body))
    return paths


def _write_dat(path, header, rows):
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")
    return path


def default_output_dir():
    return os.environ.get(OUT_ENV, "results")
