"""Primal-dual iterations for ``min_x f(x) + g(A x)``.

Ten schemes share one state layout:

* the four Chambolle-Pock orderings ``CP-yxxb``, ``CP-xxby``, ``CP-xyyb``,
  ``CP-yybx`` (``b`` marks the extrapolated "bar" variable, so ``CP-yybx``
  updates y, then ybar, then x),
* the inertial ``iCP-yybx`` and ``iCP-xxby``,
* the linearized ADMM forms ``LADMD-yvx`` and ``LADMD-vxy`` on the dual
  splitting ``v + A^T y = 0``, and ``LADMP-xuy`` and ``LADMP-uyx`` on the
  primal splitting ``u = A x``.

Whichever of ``g`` / ``g*`` (and ``f`` / ``f*``) lacks a closed-form prox is
handled through Moreau's decomposition.
"""
import enum
import math
import time
import unicodedata
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .linops import LinearMap
from .proxops import Conjugate, ProxFunction

ALPHA_LIMIT = 1.0 / 3.0


class ConfigError(ValueError):
    """Invalid solver or experiment configuration."""


class NonFiniteIterateError(FloatingPointError):
    """An iterate picked up a NaN or infinity."""


class Variant(str, enum.Enum):
    CP_YXXB = "CP-yxxb"
    CP_XXBY = "CP-xxby"
    CP_XYYB = "CP-xyyb"
    CP_YYBX = "CP-yybx"
    ICP_YYBX = "iCP-yybx"
    ICP_XXBY = "iCP-xxby"
    LADMD_YVX = "LADMD-yvx"
    LADMD_VXY = "LADMD-vxy"
    LADMP_XUY = "LADMP-xuy"
    LADMP_UYX = "LADMP-uyx"

    @property
    def inertial(self):
        return self in (Variant.ICP_YYBX, Variant.ICP_XXBY)

    @property
    def metric_sign(self):
        """+1 for the yybx family (G has +A), -1 for the xxby family."""
        if self in (Variant.CP_YYBX, Variant.ICP_YYBX, Variant.CP_XYYB,
                    Variant.LADMP_XUY, Variant.LADMP_UYX):
            return 1
        return -1

    def __str__(self):
        return self.value


# Names with the overbar on the extrapolated variable, in update order.
_BAR_NAMES = {
    "CP-yx\u0304x": Variant.CP_YXXB,
    "CP-x\u0304xy": Variant.CP_XXBY,
    "CP-xy\u0304y": Variant.CP_XYYB,
    "CP-yy\u0304x": Variant.CP_YYBX,
    "iCP-yy\u0304x": Variant.ICP_YYBX,
    "iCP-x\u0304xy": Variant.ICP_XXBY,
}
_ALIASES = {unicodedata.normalize("NFC", k).lower(): v for k, v in _BAR_NAMES.items()}
_ALIASES.update({v.value.lower(): v for v in Variant})


def parse_variant(name):
    """Accept canonical names, overbar spellings (``CP-y\u0233x``) and any case."""
    if isinstance(name, Variant):
        return name
    key = unicodedata.normalize("NFC", str(name).strip().replace("_", "-")).lower()
    try:
        return _ALIASES[key]
    except KeyError:
        raise ConfigError(
            f"unknown variant {name!r}; choose from {[v.value for v in Variant]}") from None


# --------------------------------------------------------------------------
# problem, state, config


@dataclass(frozen=True)
class SaddleProblem:
    """``min_x max_y f(x) + <A x, y> - g*(y)``.

    Give either ``g`` or ``gstar`` (or both); the missing one is the
    Moreau-based :class:`~inertial_cp.proxops.Conjugate` of the other.
    """
    A: LinearMap
    f: ProxFunction
    g: ProxFunction = None
    gstar: ProxFunction = None

    def __post_init__(self):
        if self.g is None and self.gstar is None:
            raise ConfigError("problem needs g or g*")
        g = self.g if self.g is not None else self.gstar.conjugate()
        gstar = self.gstar if self.gstar is not None else self.g.conjugate()
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "gstar", gstar)
        if self.f.dim != self.A.in_dim:
            raise ConfigError(f"f has dimension {self.f.dim}, A expects {self.A.in_dim}")
        if g.dim != self.A.out_dim:
            raise ConfigError(f"g has dimension {g.dim}, A produces {self.A.out_dim}")

    @property
    def fstar(self):
        return self.f.conjugate()


@dataclass
class PrimalDualState:
    """Iterate ``w = (x, y)`` and the previous one.

    ``bar`` carries ``xbar`` for CP-yxxb and ``ybar`` for CP-xyyb.
    ``feas_inf`` is ``max |u - A z|`` for the splitting variable ``u``
    produced by the latest dual step.
    """
    x: np.ndarray
    y: np.ndarray
    x_prev: np.ndarray
    y_prev: np.ndarray
    k: int = 0
    bar: np.ndarray = None
    feas_inf: float = math.nan

    @classmethod
    def initial(cls, x0, y0, bar=None):
        x0 = np.array(x0, dtype=np.float64)
        y0 = np.array(y0, dtype=np.float64)
        return cls(x0, y0, x0.copy(), y0.copy(), 0, bar)

    def advance(self, x, y, bar=None, feas_inf=math.nan):
        return PrimalDualState(x, y, self.x, self.y, self.k + 1, bar, feas_inf)


@dataclass
class AuxiliaryState:
    """Splitting variables: ``u`` (LADMP, size m) or ``v`` (LADMD, size n)."""
    u: np.ndarray = None
    v: np.ndarray = None


@dataclass
class SolverConfig:
    """Step sizes, extrapolation schedule and stopping parameters.

    ``alpha`` is a constant or an explicit nondecreasing table (the last
    entry is held beyond its end). It only affects inertial variants.
    ``tau * sigma * norm_bound < 1`` is required; inertial variants also
    require ``sup alpha < 1/3`` unless ``strict_alpha`` is False.
    """
    variant: Variant
    tau: float
    sigma: float
    norm_bound: float
    alpha: object = 0.0
    epsilon: float = 1e-6
    max_iters: int = 100000
    record_stride: int = 1
    strict_alpha: bool = True

    def __post_init__(self):
        self.variant = parse_variant(self.variant)
        self.tau = float(self.tau)
        self.sigma = float(self.sigma)
        self.norm_bound = float(self.norm_bound)
        if not (self.tau > 0 and self.sigma > 0):
            raise ConfigError(f"tau and sigma must be positive, got {self.tau}, {self.sigma}")
        if not self.norm_bound >= 0:
            raise ConfigError(f"norm bound must be nonnegative, got {self.norm_bound}")
        prod = self.tau * self.sigma * self.norm_bound
        if not prod < 1.0:
            raise ConfigError(
                f"step sizes violate tau*sigma*rho(A^T A) < 1: got {prod:.6g}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iters) < 1 or int(self.record_stride) < 1:
            raise ConfigError("max_iters and record_stride must be at least 1")
        self.max_iters = int(self.max_iters)
        self.record_stride = int(self.record_stride)
        self.alpha = self._normalize_alpha(self.alpha)

    def _normalize_alpha(self, alpha):
        if callable(alpha):
            raise ConfigError("adaptive alpha schedules are not supported; "
                              "pass a constant or an explicit table")
        table = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
        if table.ndim != 1 or table.size == 0:
            raise ConfigError("alpha must be a scalar or a nonempty 1-D table")
        if np.any(table < 0) or not np.all(np.isfinite(table)):
            raise ConfigError("alpha values must be finite and nonnegative")
        if np.any(np.diff(table) < 0):
            raise ConfigError("alpha schedule must be nondecreasing")
        if self.variant.inertial and table.max() >= ALPHA_LIMIT:
            msg = f"alpha = {table.max():g} is not below 1/3; convergence is not guaranteed"
            if self.strict_alpha:
                raise ConfigError(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=3)
        return float(table[0]) if table.size == 1 else tuple(table.tolist())

    def alpha_at(self, k):
        if isinstance(self.alpha, tuple):
            return self.alpha[min(k, len(self.alpha) - 1)]
        return self.alpha

    @classmethod
    def for_map(cls, A, variant, tau, sigma, **kwargs):
        return cls(variant, tau, sigma, A.norm_bound, **kwargs)


# --------------------------------------------------------------------------
# G metric


class GMetric:
    """The weighting ``G = [[I/tau, s A^T], [s A, I/sigma]]`` with ``s = +-1``."""

    def __init__(self, A, tau, sigma, sign=1):
        if sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {sign}")
        self.A = A
        self.tau = float(tau)
        self.sigma = float(sigma)
        self.sign = sign

    @classmethod
    def for_config(cls, A, cfg):
        return cls(A, cfg.tau, cfg.sigma, cfg.variant.metric_sign)

    def apply(self, dx, dy):
        """``G (dx, dy)`` without forming G."""
        gx = dx / self.tau + self.sign * self.A.adjoint_apply(dy)
        gy = self.sign * self.A.apply(dx) + dy / self.sigma
        return gx, gy

    def norm_sq(self, dx, dy):
        dx = np.asarray(dx, dtype=np.float64)
        dy = np.asarray(dy, dtype=np.float64)
        return float(dx @ dx / self.tau + dy @ dy / self.sigma
                     + 2.0 * self.sign * (self.A.apply(dx) @ dy))

    def dense(self):
        a = self.A.to_dense()
        m, n = a.shape
        return np.block([[np.eye(n) / self.tau, self.sign * a.T],
                         [self.sign * a, np.eye(m) / self.sigma]])


def g_norm_sq(metric, w):
    x, y = w
    return metric.norm_sq(x, y)


# --------------------------------------------------------------------------
# single steps


def _primal_update(f, tau, x_anchor, A, y_dir):
    return f.prox(tau, x_anchor - tau * A.adjoint_apply(y_dir))


def _dual_update(gstar, sigma, y_anchor, Az):
    """``prox_sigma^{g*}(y_anchor + sigma A z)`` and ``max |u - A z|``.

    When ``g*`` is a Moreau conjugate the splitting variable
    ``u = prox_{1/sigma}^g(y_anchor/sigma + A z)`` is formed explicitly and
    ``y = y_anchor + sigma (A z - u)``.
    """
    if isinstance(gstar, Conjugate):
        u = gstar.base.prox(1.0 / sigma, y_anchor / sigma + Az)
        r = Az - u
        return y_anchor + sigma * r, float(np.max(np.abs(r)))
    y = gstar.prox(sigma, y_anchor + sigma * Az)
    return y, float(np.max(np.abs(y_anchor - y))) / sigma


def step_cp_yxxb(state, cfg, A, f, gstar):
    """CP-yxxb: ``y+ = prox(y + s A xbar); x+ = prox(x - t A^T y+); xbar+ = 2x+ - x``."""
    xbar = state.x if state.bar is None else state.bar
    y, feas = _dual_update(gstar, cfg.sigma, state.y, A.apply(xbar))
    x = _primal_update(f, cfg.tau, state.x, A, y)
    return state.advance(x, y, bar=2.0 * x - state.x, feas_inf=feas)


def step_cp_xxby(state, cfg, A, f, gstar):
    """CP-xxby: ``x+ = prox(x - t A^T y); xbar = 2x+ - x; y+ = prox(y + s A xbar)``."""
    x = _primal_update(f, cfg.tau, state.x, A, state.y)
    y, feas = _dual_update(gstar, cfg.sigma, state.y, A.apply(2.0 * x - state.x))
    return state.advance(x, y, feas_inf=feas)


def step_cp_xyyb(state, cfg, A, f, gstar):
    """CP-xyyb: ``x+ = prox(x - t A^T ybar); y+ = prox(y + s A x+); ybar+ = 2y+ - y``."""
    ybar = state.y if state.bar is None else state.bar
    x = _primal_update(f, cfg.tau, state.x, A, ybar)
    y, feas = _dual_update(gstar, cfg.sigma, state.y, A.apply(x))
    return state.advance(x, y, bar=2.0 * y - state.y, feas_inf=feas)


def step_cp_yybx(state, cfg, A, f, gstar):
    """CP-yybx: ``y+ = prox(y + s A x); ybar = 2y+ - y; x+ = prox(x - t A^T ybar)``."""
    y, feas = _dual_update(gstar, cfg.sigma, state.y, A.apply(state.x))
    x = _primal_update(f, cfg.tau, state.x, A, 2.0 * y - state.y)
    return state.advance(x, y, feas_inf=feas)


def extrapolate(state, alpha):
    """``w_hat = w + alpha (w - w_prev)``."""
    return (state.x + alpha * (state.x - state.x_prev),
            state.y + alpha * (state.y - state.y_prev))


def step_icp(state, cfg, A, f, gstar):
    """One inertial step; returns ``(new_state, (x_hat, y_hat))``.

    The CP-yybx or CP-xxby update is anchored at the extrapolated point,
    with the bar variable reflected through the anchor
    (``ybar = 2 y+ - y_hat`` and ``xbar = 2 x+ - x_hat``).
    """
    xh, yh = extrapolate(state, cfg.alpha_at(state.k))
    if cfg.variant is Variant.ICP_YYBX:
        y, feas = _dual_update(gstar, cfg.sigma, yh, A.apply(xh))
        x = _primal_update(f, cfg.tau, xh, A, 2.0 * y - yh)
    elif cfg.variant is Variant.ICP_XXBY:
        x = _primal_update(f, cfg.tau, xh, A, yh)
        y, feas = _dual_update(gstar, cfg.sigma, yh, A.apply(2.0 * x - xh))
    else:
        raise ConfigError(f"step_icp needs an inertial variant, got {cfg.variant}")
    return state.advance(x, y, feas_inf=feas), (xh, yh)


def grad_qd(A, tau, y, v, x):
    """``grad_y Q_D(y, v, x) = -A (x - tau (v + A^T y))``."""
    return -A.apply(x - tau * (v + A.adjoint_apply(y)))


def grad_qp(A, sigma, x, u, y):
    """``grad_x Q_P(x, u, y) = -A^T (sigma (u - A x) - y)``."""
    return -A.adjoint_apply(sigma * (u - A.apply(x)) - y)


def step_ladmd_yvx(state, aux, cfg, A, fstar, gstar):
    """LADMD-yvx on ``max -g*(y) - f*(v)  s.t.  v + A^T y = 0``."""
    if aux is None or aux.v is None:
        raise ConfigError("LADMD-yvx needs an initial v")
    tau = cfg.tau
    xs = state.x - tau * (aux.v + A.adjoint_apply(state.y))
    y, feas = _dual_update(gstar, cfg.sigma, state.y, A.apply(xs))
    aty = A.adjoint_apply(y)
    v = fstar.prox(1.0 / tau, state.x / tau - aty)
    x = state.x - tau * (v + aty)
    return state.advance(x, y, feas_inf=feas), AuxiliaryState(v=v)


def step_ladmd_vxy(state, aux, cfg, A, fstar, gstar):
    """LADMD-vxy: the v, x, y cyclic reordering; needs no initial v."""
    tau = cfg.tau
    aty = A.adjoint_apply(state.y)
    v = fstar.prox(1.0 / tau, state.x / tau - aty)
    x = state.x - tau * (v + aty)
    y, feas = _dual_update(gstar, cfg.sigma, state.y, A.apply(x - tau * (v + aty)))
    return state.advance(x, y, feas_inf=feas), AuxiliaryState(v=v)


def step_ladmp_xuy(state, aux, cfg, A, f, g):
    """LADMP-xuy on ``min f(x) + g(u)  s.t.  u = A x``."""
    if aux is None or aux.u is None:
        raise ConfigError("LADMP-xuy needs an initial u")
    sigma = cfg.sigma
    x = _primal_update(f, cfg.tau, state.x, A,
                       state.y - sigma * (aux.u - A.apply(state.x)))
    ax = A.apply(x)
    u = g.prox(1.0 / sigma, state.y / sigma + ax)
    r = u - ax
    y = state.y - sigma * r
    return (state.advance(x, y, feas_inf=float(np.max(np.abs(r)))),
            AuxiliaryState(u=u))


def step_ladmp_uyx(state, aux, cfg, A, f, g):
    """LADMP-uyx: the u, y, x cyclic reordering; needs no initial u."""
    sigma = cfg.sigma
    ax = A.apply(state.x)
    u = g.prox(1.0 / sigma, state.y / sigma + ax)
    r = u - ax
    y = state.y - sigma * r
    x = _primal_update(f, cfg.tau, state.x, A, y - sigma * r)
    return (state.advance(x, y, feas_inf=float(np.max(np.abs(r)))),
            AuxiliaryState(u=u))


def step(state, aux, cfg, problem):
    """Advance any variant by one iteration.

    Returns ``(state, aux, anchor)`` where ``anchor`` is the point the
    stopping rule and residual compare against: ``w^k`` or ``w_hat^k``.
    """
    A, v = problem.A, cfg.variant
    if v.inertial:
        new, anchor = step_icp(state, cfg, A, problem.f, problem.gstar)
        return new, aux, anchor
    anchor = (state.x, state.y)
    if v is Variant.CP_YXXB:
        new = step_cp_yxxb(state, cfg, A, problem.f, problem.gstar)
    elif v is Variant.CP_XXBY:
        new = step_cp_xxby(state, cfg, A, problem.f, problem.gstar)
    elif v is Variant.CP_XYYB:
        new = step_cp_xyyb(state, cfg, A, problem.f, problem.gstar)
    elif v is Variant.CP_YYBX:
        new = step_cp_yybx(state, cfg, A, problem.f, problem.gstar)
    elif v is Variant.LADMD_YVX:
        new, aux = step_ladmd_yvx(state, aux, cfg, A, problem.fstar, problem.gstar)
    elif v is Variant.LADMD_VXY:
        new, aux = step_ladmd_vxy(state, aux, cfg, A, problem.fstar, problem.gstar)
    elif v is Variant.LADMP_XUY:
        new, aux = step_ladmp_xuy(state, aux, cfg, A, problem.f, problem.g)
    else:
        new, aux = step_ladmp_uyx(state, aux, cfg, A, problem.f, problem.g)
    return new, aux, anchor


def initial_state(problem, cfg, x0, y0, aux0=None):
    """Starting state and auxiliaries for ``cfg.variant``.

    LADMD-yvx defaults to ``v0 = -A^T y0`` and LADMP-xuy to ``u0 = A x0``,
    the initializations under which they coincide with CP-yxxb and
    CP-xyyb respectively.
    """
    A = problem.A
    x0 = np.array(x0, dtype=np.float64).ravel()
    y0 = np.array(y0, dtype=np.float64).ravel()
    if x0.shape[0] != A.in_dim or y0.shape[0] != A.out_dim:
        raise ValueError(f"expected x0 of length {A.in_dim} and y0 of length "
                         f"{A.out_dim}, got {x0.shape[0]} and {y0.shape[0]}")
    v = cfg.variant
    bar = None
    if v is Variant.CP_YXXB:
        bar = x0.copy()
    elif v is Variant.CP_XYYB:
        bar = y0.copy()
    if aux0 is None:
        aux0 = AuxiliaryState()
    if v is Variant.LADMD_YVX and aux0.v is None:
        aux0 = AuxiliaryState(v=-A.adjoint_apply(y0))
    if v is Variant.LADMP_XUY and aux0.u is None:
        aux0 = AuxiliaryState(u=A.apply(x0))
    return PrimalDualState.initial(x0, y0, bar), aux0


# --------------------------------------------------------------------------
# stopping, history, driver


def relative_change(x, y, anchor):
    ax, ay = anchor
    dx = x - ax
    dy = y - ay
    num = math.sqrt(float(dx @ dx + dy @ dy))
    den = 1.0 + math.sqrt(float(ax @ ax + ay @ ay))
    return num / den


def check_stopping(state, anchor, epsilon):
    """``||w^{k+1} - anchor|| / (1 + ||anchor||) < epsilon``."""
    return relative_change(state.x, state.y, anchor) < epsilon


@dataclass(slots=True)
class IterationRecord:
    """Diagnostics for the step producing iterate ``k`` from iterate ``k - 1``.

    ``res`` is ``||G (w^k - anchor)||`` and ``gdist_sq`` is
    ``||w^k - anchor||_G^2``; ``anchor`` is ``w^{k-1}`` or its inertial
    extrapolation. ``tv`` is ``g(A x^k)`` (total variation in the imaging
    problem). ``snr`` is ``inf`` for an exact reconstruction and NaN when
    no ground truth was supplied.
    """
    k: int
    res: float
    tv: float
    snr: float
    feas_inf: float
    wall_clock: float
    gdist_sq: float = math.nan
    rel_change: float = math.nan


@dataclass
class SolveResult:
    state: PrimalDualState
    aux: AuxiliaryState
    history: list
    reason: str
    iterations: int
    iterates: list = field(default_factory=list)

    @property
    def x(self):
        return self.state.x

    @property
    def y(self):
        return self.state.y

    @property
    def converged(self):
        return self.reason == "converged"


def _snr(x, x_true):
    # local copy to avoid an import cycle with diagnostics
    from .diagnostics import snr
    return snr(x, x_true)


def solve(problem, cfg, x0, y0, *, aux0=None, x_true=None, callback=None,
          keep_iterates=False, record=True, clock=time.perf_counter):
    """Run ``cfg.variant`` until the stopping rule holds or ``max_iters``.

    Args:
        problem (SaddleProblem): The saddle problem.
        cfg (SolverConfig): Variant, steps and stopping parameters.
        x0, y0 (array): Starting point.
        aux0 (AuxiliaryState, optional): Initial ``u`` / ``v`` for LADM forms.
        x_true (array, optional): Ground truth for the SNR column.
        callback (callable, optional): Called as ``callback(state, record)``
            after every iteration (``record`` is None on unrecorded ones).
        keep_iterates (bool): Keep copies of every ``(x^k, y^k)``, k >= 0.
        record (bool): Build the per-iteration history.

    Returns:
        SolveResult with ``reason`` ``"converged"`` or ``"iteration_cap"``.

    Raises:
        NonFiniteIterateError: if an iterate becomes non-finite.
    """
    if cfg.norm_bound < problem.A.norm_bound * (1 - 1e-12):
        raise ConfigError(
            f"config norm bound {cfg.norm_bound:g} is below the map's "
            f"bound {problem.A.norm_bound:g}")
    state, aux = initial_state(problem, cfg, x0, y0, aux0)
    metric = GMetric.for_config(problem.A, cfg)
    g_has_value = not isinstance(problem.g, Conjugate) or \
        hasattr(problem.g.base, "conjugate_value")
    history = []
    iterates = [(state.x.copy(), state.y.copy())] if keep_iterates else []
    t0 = clock()
    reason = "iteration_cap"
    for it in range(cfg.max_iters):
        state, aux, anchor = step(state, aux, cfg, problem)
        if not (np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.y))):
            raise NonFiniteIterateError(
                f"{cfg.variant}: non-finite iterate at iteration {state.k}")
        rel = relative_change(state.x, state.y, anchor)
        done = rel < cfg.epsilon
        rec = None
        if record and (state.k % cfg.record_stride == 0 or done
                       or it == cfg.max_iters - 1):
            dx = state.x - anchor[0]
            dy = state.y - anchor[1]
            gx, gy = metric.apply(dx, dy)
            rec = IterationRecord(
                k=state.k,
                res=math.sqrt(float(gx @ gx + gy @ gy)),
                tv=problem.g.value(problem.A.apply(state.x)) if g_has_value else math.nan,
                snr=_snr(state.x, x_true) if x_true is not None else math.nan,
                feas_inf=state.feas_inf,
                wall_clock=clock() - t0,
                gdist_sq=float(dx @ gx + dy @ gy),
                rel_change=rel,
            )
            history.append(rec)
        if keep_iterates:
            iterates.append((state.x.copy(), state.y.copy()))
        if callback is not None:
            callback(state, rec)
        if done:
            reason = "converged"
            break
    return SolveResult(state, aux, history, reason, state.k, iterates)


@dataclass
class Trajectory:
    """Iterates ``(x^k, y^k)`` for ``k = 0..n`` of one variant."""
    variant: Variant
    xs: np.ndarray
    ys: np.ndarray
    anchors: list = field(default_factory=list)

    def __len__(self):
        return self.xs.shape[0]


def trajectory(problem, cfg, x0, y0, n_iter, aux0=None):
    """Run exactly ``n_iter`` steps (no stopping rule) and keep every iterate."""
    state, aux = initial_state(problem, cfg, x0, y0, aux0)
    xs = [state.x.copy()]
    ys = [state.y.copy()]
    anchors = []
    for _ in range(int(n_iter)):
        state, aux, anchor = step(state, aux, cfg, problem)
        xs.append(state.x.copy())
        ys.append(state.y.copy())
        anchors.append((np.array(anchor[0]), np.array(anchor[1])))
    return Trajectory(cfg.variant, np.array(xs), np.array(ys), anchors)


def reference_solution(problem, cfg, x0, y0, *, epsilon=1e-12, polish=True,
                       patience=50, cache_path=None):
    """High-accuracy ``(x*, y*)``: ``cfg`` rerun at ``epsilon`` with 10x the cap.

    Stopping at ``epsilon`` leaves an error of roughly
    ``epsilon / (1 - contraction)``. With ``polish`` the iteration then
    continues until the relative change has not reached a new minimum for
    ``patience`` steps (or is exactly zero), i.e. until rounding dominates.
    With ``cache_path`` the result is stored as ``.npz`` and reused.
    """
    if cache_path is not None:
        cache_path = Path(cache_path)
        if cache_path.exists():
            with np.load(cache_path) as data:
                return data["x"], data["y"]
    ref_cfg = replace(cfg, epsilon=epsilon, max_iters=cfg.max_iters * 10)
    res = solve(problem, ref_cfg, x0, y0, record=False)
    state, aux = res.state, res.aux
    if polish:
        best, since = math.inf, 0
        for _ in range(ref_cfg.max_iters):
            state, aux, anchor = step(state, aux, ref_cfg, problem)
            rel = relative_change(state.x, state.y, anchor)
            if rel == 0.0:
                break
            if rel < best:
                best, since = rel, 0
            else:
                since += 1
                if since >= patience:
                    break
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(cache_path, x=state.x, y=state.y)
    return state.x, state.y


def theta(problem, x, y):
    """``f(x) + g*(y)``."""
    return problem.f.value(x) + problem.gstar.value(y)


def skew_operator(A, x, y):
    """``F(w) = (A^T y, -A x)``."""
    return A.adjoint_apply(y), -A.apply(x)
