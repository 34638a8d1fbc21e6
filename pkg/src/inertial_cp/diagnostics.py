"""Metrics, rate certificates and sequence comparison."""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .linops import FiniteDifferenceMap

EQUIVALENCE_TOL = 1e-10


def snr(x, x_star):
    """Signal-to-noise ratio in dB against the mean-intensity image.

    ``20 log10(||mean(x*) - x*|| / ||x - x*||)``; ``inf`` when ``x == x*``.
    """
    x = np.asarray(x, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x.shape != x_star.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_star.shape}")
    ref = np.linalg.norm(x_star - x_star.mean())
    if ref == 0.0:
        raise ValueError("SNR is undefined for a constant reference image")
    err = np.linalg.norm(x - x_star)
    if err == 0.0:
        return math.inf
    return 20.0 * math.log10(ref / err)


def tv_value(A, x):
    """Sum over pixels of the Euclidean norm of the forward-difference pair."""
    if not isinstance(A, FiniteDifferenceMap):
        raise TypeError("tv_value needs a FiniteDifferenceMap")
    return _kernels.group_norm_sum(A.apply(x))


def g_residual(metric, w_new, anchor):
    """``||G (w_new - anchor)||`` in the Euclidean norm."""
    gx, gy = metric.apply(np.asarray(w_new[0]) - anchor[0],
                          np.asarray(w_new[1]) - anchor[1])
    return math.sqrt(float(gx @ gx + gy @ gy))


# --------------------------------------------------------------------------
# rate certificates


def certificate_constant(alpha):
    """``1 + 2 / (1 - 3 alpha)``, the O(1/k) constant for inertial steps."""
    if not 0 <= alpha < 1.0 / 3.0:
        raise ValueError(f"alpha must lie in [0, 1/3), got {alpha}")
    return 1.0 + 2.0 / (1.0 - 3.0 * alpha)


@dataclass
class RateCertificate:
    """Outcome of checking ``k min_{j<k} ||w^{j+1} - w_hat^j||_G^2 <= C d0``.

    ``ratios[k-1]`` is the left side over the right side at ``k``; the
    bound holds when ``worst_ratio <= 1``. ``products[k-1]`` is
    ``k * min_{j<k} ||.||_G^2``, whose decay is the o(1/k) trend.
    """
    constant: float
    g0_dist_sq: float
    ratios: np.ndarray
    products: np.ndarray
    worst_ratio: float
    worst_k: int

    @property
    def holds(self):
        return self.worst_ratio <= 1.0

    def product_at(self, k):
        return float(self.products[k - 1])

    def trend_ratio(self, k_early=100, k_late=1000):
        """``product(k_late) / product(k_early)``; below 1 means decay."""
        early = self.product_at(k_early)
        late = self.product_at(k_late)
        if early == 0.0:
            return 0.0 if late == 0.0 else math.inf
        return late / early

    def eventually_decreasing(self, tail=0.5):
        """Whether the product is nonincreasing over the last ``tail`` fraction."""
        start = int(len(self.products) * (1 - tail))
        return bool(np.all(np.diff(self.products[start:]) <= 0))


def _step_sq(history):
    recs = sorted(history, key=lambda r: r.k)
    ks = np.array([r.k for r in recs])
    if ks.size == 0:
        raise ValueError("empty history")
    if not np.array_equal(ks, np.arange(1, ks.size + 1)):
        raise ValueError("rate certificates need a history recorded at every iteration")
    return np.array([r.gdist_sq for r in recs])


def check_rate_certificate(history, g0_dist_sq, alpha):
    """Check the O(1/k) bound on the running minimum of the G-step.

    Args:
        history: IterationRecords with ``k = 1..K`` (every iteration).
        g0_dist_sq (float): ``||w^0 - w*||_G^2`` for a reference solution.
        alpha (float): Constant extrapolation parameter (0 for plain runs).
    """
    if g0_dist_sq is None or not np.isfinite(g0_dist_sq):
        raise ValueError("a reference solution distance is required")
    c = certificate_constant(alpha)
    steps = _step_sq(history)
    k = np.arange(1, steps.size + 1)
    products = k * np.minimum.accumulate(steps)
    bound = c * g0_dist_sq
    ratios = products / bound if bound > 0 else np.where(products > 0, np.inf, 0.0)
    worst = int(np.argmax(ratios))
    return RateCertificate(c, float(g0_dist_sq), ratios, products,
                           float(ratios[worst]), worst + 1)


def check_residual_rate(history, g0_dist_sq):
    """Worst ``k ||w^k - w^{k-1}||_G^2 / ||w^0 - w*||_G^2`` over the history.

    This is the non-inertial bound with constant 1 (no running minimum);
    a value at most 1 means it holds.
    """
    steps = _step_sq(history)
    k = np.arange(1, steps.size + 1)
    if g0_dist_sq <= 0:
        return 0.0 if np.all(steps == 0) else math.inf
    return float(np.max(k * steps) / g0_dist_sq)


def fejer_distances(traj_xs, traj_ys, metric, x_star, y_star):
    """``||w^k - w*||_G`` along a trajectory."""
    out = np.empty(len(traj_xs))
    for i, (x, y) in enumerate(zip(traj_xs, traj_ys)):
        out[i] = math.sqrt(max(metric.norm_sq(x - x_star, y - y_star), 0.0))
    return out


# --------------------------------------------------------------------------
# sequence equivalence


@dataclass
class EquivalenceReport:
    """Per-iteration max componentwise gap between two iterate logs."""
    variant_pair: tuple
    gaps: np.ndarray
    tol: float = EQUIVALENCE_TOL
    shift: tuple = (0, 0)
    first_divergence_iter: int = None
    max_gap: float = field(init=False)

    def __post_init__(self):
        self.max_gap = float(np.max(self.gaps)) if self.gaps.size else 0.0
        over = np.nonzero(self.gaps > self.tol)[0]
        self.first_divergence_iter = int(over[0]) if over.size else None

    @property
    def equivalent(self):
        return self.first_divergence_iter is None


def compare_runs(run_a, run_b, shift=0, tol=EQUIVALENCE_TOL, length=None):
    """Compare ``(x^k, y^k)`` of two runs.

    ``shift`` is an int or an ``(x_shift, y_shift)`` pair: ``run_b``'s
    ``x^k`` is compared with ``run_a``'s ``x^{k + x_shift}`` and likewise
    for ``y``. Cyclic reorderings need a shift of one in a single component.

    Runs are :class:`~inertial_cp.solvers.Trajectory` objects or
    ``(xs, ys)`` pairs of stacked arrays.
    """
    xa, ya, name_a = _unpack(run_a)
    xb, yb, name_b = _unpack(run_b)
    sx, sy = (shift, shift) if np.isscalar(shift) else tuple(shift)
    if sx < 0 or sy < 0:
        raise ValueError("shifts must be nonnegative")
    avail = min(len(xa) - sx, len(ya) - sy, len(xb), len(yb))
    if length is None:
        length = avail
    if length < 1 or length > avail:
        raise ValueError(
            f"runs are too short for {length} comparisons after shift "
            f"({sx}, {sy}): run_a has {len(xa)}, run_b has {len(xb)}")
    if xa.shape[1:] != xb.shape[1:] or ya.shape[1:] != yb.shape[1:]:
        raise ValueError("runs have incompatible dimensions")
    gx = np.max(np.abs(xa[sx:sx + length] - xb[:length]), axis=1)
    gy = np.max(np.abs(ya[sy:sy + length] - yb[:length]), axis=1)
    return EquivalenceReport((name_a, name_b), np.maximum(gx, gy), tol, (sx, sy))


def _unpack(run):
    if hasattr(run, "xs"):
        return np.asarray(run.xs), np.asarray(run.ys), str(getattr(run, "variant", "?"))
    xs, ys = run
    return np.asarray(xs), np.asarray(ys), "?"


def history_difference(hist_a, hist_b, key):
    """Absolute and relative per-iteration differences of one history field.

    Entries that agree (including ``inf`` vs ``inf`` and NaN vs NaN) give 0.
    """
    n = min(len(hist_a), len(hist_b))
    a = np.array([getattr(r, key) for r in hist_a[:n]], dtype=np.float64)
    b = np.array([getattr(r, key) for r in hist_b[:n]], dtype=np.float64)
    ks = np.array([r.k for r in hist_a[:n]])
    with np.errstate(invalid="ignore", divide="ignore"):
        same = (a == b) | (np.isnan(a) & np.isnan(b))
        absdiff = np.where(same, 0.0, np.abs(a - b))
        denom = np.maximum(np.abs(a), np.abs(b))
        rel = np.where(absdiff == 0.0, 0.0, absdiff / np.where(denom > 0, denom, 1.0))
    return ks, absdiff, rel
