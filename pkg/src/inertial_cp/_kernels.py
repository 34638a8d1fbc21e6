"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The active backend is chosen at import time from ``INERTIAL_CP_BACKEND``
(``numba`` or ``numpy``). Setting ``INERTIAL_CP_DISABLE_NUMBA=1`` forces
numpy as well. If numba cannot be imported the numpy path is used.

All kernels operate on contiguous float64 vectors. Images are
column-stacked: pixel ``(i, j)`` of an ``n x n`` image lives at index
``i + n * j``.
"""
import os

import numpy as np

try:
    import numba as nb
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    nb = None
    HAS_NUMBA = False


def _env_backend():
    if os.environ.get("INERTIAL_CP_DISABLE_NUMBA", "").strip() not in ("", "0"):
        return "numpy"
    name = os.environ.get("INERTIAL_CP_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(
            f"INERTIAL_CP_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        return "numpy"
    return name


# --------------------------------------------------------------------------
# numpy implementations


def np_fwht(u):
    """Unnormalized Walsh-Hadamard transform of ``u`` in place (numpy)."""
    n = u.shape[0]
    h = 1
    while h < n:
        v = u.reshape(-1, 2, h)
        a = v[:, 0, :].copy()
        v[:, 0, :] += v[:, 1, :]
        v[:, 1, :] = a - v[:, 1, :]
        h *= 2
    return u


def np_diff_forward(x, n, out):
    img = x.reshape(n, n, order="F")
    h = out[: n * n].reshape(n, n, order="F")
    v = out[n * n:].reshape(n, n, order="F")
    # horizontal: next column minus current; vertical: next row minus current
    h[:, :-1] = img[:, 1:] - img[:, :-1]
    h[:, -1] = img[:, 0] - img[:, -1]
    v[:-1, :] = img[1:, :] - img[:-1, :]
    v[-1, :] = img[0, :] - img[-1, :]
    return out


def np_diff_adjoint(p, n, out):
    h = p[: n * n].reshape(n, n, order="F")
    v = p[n * n:].reshape(n, n, order="F")
    img = out.reshape(n, n, order="F")
    img[:, 1:] = h[:, :-1] - h[:, 1:]
    img[:, 0] = h[:, -1] - h[:, 0]
    img[1:, :] += v[:-1, :] - v[1:, :]
    img[0, :] += v[-1, :] - v[0, :]
    return out


def np_group_shrink(u, eta, out):
    half = u.shape[0] // 2
    a = u[:half]
    b = u[half:]
    nrm = np.hypot(a, b)
    scale = np.zeros_like(nrm)
    nz = nrm > eta
    scale[nz] = 1.0 - eta / nrm[nz]
    out[:half] = scale * a
    out[half:] = scale * b
    return out


def np_group_norm_sum(u):
    half = u.shape[0] // 2
    return float(np.sum(np.hypot(u[:half], u[half:])))


# --------------------------------------------------------------------------
# numba implementations

if HAS_NUMBA:

    @nb.njit(cache=True)
    def nb_fwht(u):
        n = u.shape[0]
        h = 1
        while h < n:
            for i in range(0, n, 2 * h):
                for j in range(i, i + h):
                    a = u[j]
                    b = u[j + h]
                    u[j] = a + b
                    u[j + h] = a - b
            h *= 2
        return u

    @nb.njit(cache=True)
    def nb_diff_forward(x, n, out):
        nn = n * n
        for j in range(n):
            jn = j + 1 if j + 1 < n else 0
            for i in range(n):
                inext = i + 1 if i + 1 < n else 0
                p = i + n * j
                out[p] = x[i + n * jn] - x[p]
                out[nn + p] = x[inext + n * j] - x[p]
        return out

    @nb.njit(cache=True)
    def nb_diff_adjoint(p, n, out):
        nn = n * n
        for j in range(n):
            jp = j - 1 if j > 0 else n - 1
            for i in range(n):
                ip = i - 1 if i > 0 else n - 1
                q = i + n * j
                out[q] = (p[i + n * jp] - p[q]) + (p[nn + ip + n * j] - p[nn + q])
        return out

    @nb.njit(cache=True)
    def nb_group_shrink(u, eta, out):
        half = u.shape[0] // 2
        for i in range(half):
            a = u[i]
            b = u[half + i]
            nrm = np.sqrt(a * a + b * b)
            if nrm > eta:
                s = 1.0 - eta / nrm
                out[i] = s * a
                out[half + i] = s * b
            else:
                out[i] = 0.0
                out[half + i] = 0.0
        return out

    @nb.njit(cache=True)
    def nb_group_norm_sum(u):
        half = u.shape[0] // 2
        total = 0.0
        for i in range(half):
            total += np.sqrt(u[i] * u[i] + u[half + i] * u[half + i])
        return total

else:  # pragma: no cover
    nb_fwht = nb_diff_forward = nb_diff_adjoint = None
    nb_group_shrink = nb_group_norm_sum = None


IMPLEMENTATIONS = {
    "numpy": {
        "fwht": np_fwht,
        "diff_forward": np_diff_forward,
        "diff_adjoint": np_diff_adjoint,
        "group_shrink": np_group_shrink,
        "group_norm_sum": np_group_norm_sum,
    },
}
if HAS_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "fwht": nb_fwht,
        "diff_forward": nb_diff_forward,
        "diff_adjoint": nb_diff_adjoint,
        "group_shrink": nb_group_shrink,
        "group_norm_sum": nb_group_norm_sum,
    }

BACKEND = None
fwht = diff_forward = diff_adjoint = group_shrink = group_norm_sum = None


def set_backend(name):
    """Switch the module-level kernels to ``name`` ('numba' or 'numpy')."""
    global BACKEND, fwht, diff_forward, diff_adjoint, group_shrink, group_norm_sum
    if name not in IMPLEMENTATIONS:
        raise ValueError(f"unknown or unavailable backend {name!r}; "
                         f"available: {sorted(IMPLEMENTATIONS)}")
    impl = IMPLEMENTATIONS[name]
    fwht = impl["fwht"]
    diff_forward = impl["diff_forward"]
    diff_adjoint = impl["diff_adjoint"]
    group_shrink = impl["group_shrink"]
    group_norm_sum = impl["group_norm_sum"]
    BACKEND = name


def get_backend():
    return BACKEND


set_backend(_env_backend())
