"""Independent reference computations used by several test modules."""
import numpy as np


def _grid(center, half, step):
    ax = np.arange(-half, half + step / 2, step)
    if center.size == 1:
        return center + ax[:, None]
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    return center + np.column_stack([gx.ravel(), gy.ravel()])


def brute_force_prox(value, gamma, z, extra=None, step=1e-3, box=5.0):
    """Minimize ``h(p) + ||p - z||^2 / (2 gamma)`` over a grid around ``z``.

    ``value`` evaluates ``h`` on a stack of points (rows), returning
    ``inf`` outside the domain. 1-D: one grid of spacing ``step`` on
    ``z +- box``. 2-D: spacing ``10 step`` over the box, then spacing
    ``step`` on a window of ``+-100 step`` around the coarse winner.
    ``extra`` adds candidate points, e.g. samples of a constraint set
    that no grid point hits exactly.
    """
    z = np.asarray(z, dtype=np.float64)
    extra = np.empty((0, z.size)) if extra is None else np.atleast_2d(extra)

    def objective(pts):
        return value(pts) + np.sum((pts - z) ** 2, axis=1) / (2.0 * gamma)

    if z.size == 1:
        pts = np.vstack([_grid(z, box, step), extra])
    else:
        coarse = np.vstack([_grid(z, box, 10 * step), extra])
        best = coarse[np.argmin(objective(coarse))]
        pts = np.vstack([_grid(best, 100 * step, step), extra])
    return pts[np.argmin(objective(pts))]


def dense_hadamard(size):
    """Sylvester Hadamard matrix from entry formula ``(-1)^{popcount(i & j)}``."""
    i = np.arange(size)
    bits = np.bitwise_and(i[:, None], i[None, :])
    pop = np.zeros_like(bits)
    while np.any(bits):
        pop += bits & 1
        bits >>= 1
    return np.where(pop % 2 == 0, 1.0, -1.0)


def ball_projection(y, radius):
    """Pairwise projection onto ``||(y[i], y[m+i])|| <= radius``."""
    m = y.size // 2
    nrm = np.hypot(y[:m], y[m:])
    scale = np.minimum(1.0, radius / np.maximum(nrm, 1e-300))
    return np.concatenate([y[:m] * scale, y[m:] * scale])


def quadratic_kkt(A, f, g):
    """Exact saddle point of ``f(x) + <Ax, y> - g*(y)`` for diagonal quadratics.

    Stationarity: ``D_f (x - c_f) + A^T y = 0`` and
    ``A x = c_g + y / d_g``.
    """
    a = A.to_dense()
    m, n = a.shape
    k = np.block([[np.diag(f.weights), a.T], [a, -np.diag(1.0 / g.weights)]])
    rhs = np.concatenate([f.weights * f.center, g.center])
    sol = np.linalg.solve(k, rhs)
    return sol[:n], sol[n:]
