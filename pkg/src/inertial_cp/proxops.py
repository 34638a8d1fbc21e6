"""Proximity operators.

Every function here is a :class:`ProxFunction`: it evaluates its value
(possibly ``+inf``) and its proximity operator

    prox_gamma^h(z) = argmin_x  h(x) + ||x - z||^2 / (2 gamma).

Conjugates are handled through Moreau's decomposition, so only one of
``h`` and ``h*`` ever needs a closed-form prox.
"""
import numpy as np

from . import _kernels


def _check_gamma(gamma):
    gamma = float(gamma)
    if not gamma > 0.0:
        raise ValueError(f"prox parameter must be positive, got {gamma}")
    return gamma


class ProxFunction:
    """Closed proper convex function with a computable prox.

    Subclasses implement ``_prox(gamma, z)`` and ``_value(z)``.
    """

    def __init__(self, dim):
        dim = int(dim)
        if dim < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        self.dim = dim

    def _check_z(self, z, what):
        z = np.ascontiguousarray(z, dtype=np.float64)
        if z.ndim != 1 or z.shape[0] != self.dim:
            raise ValueError(
                f"{type(self).__name__}.{what}: expected a vector of length "
                f"{self.dim}, got shape {z.shape}")
        return z

    def value(self, z):
        return float(self._value(self._check_z(z, "value")))

    __call__ = value

    def prox(self, gamma, z):
        """Return ``prox_gamma(z)``."""
        gamma = _check_gamma(gamma)
        return self._prox(gamma, self._check_z(z, "prox"))

    def conjugate(self):
        """The convex conjugate, with its prox obtained by Moreau's identity."""
        return Conjugate(self)

    def _value(self, z):
        raise NotImplementedError(f"{type(self).__name__} has no value()")

    def _prox(self, gamma, z):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


def prox(h, gamma, z):
    return h.prox(gamma, z)


def prox_conjugate_via_moreau(h, t, z):
    """``prox_t^{h*}(z)`` computed from the prox of ``h``.

    From ``z = prox_s^h(z) + s prox_{1/s}^{h*}(z/s)`` with ``s = 1/t``:
    ``prox_t^{h*}(z) = z - t prox_{1/t}^h(z / t)``.
    """
    t = _check_gamma(t)
    z = h._check_z(z, "prox_conjugate_via_moreau")
    return z - t * h._prox(1.0 / t, z / t)


def moreau_residual(h, t, z):
    """Norm of ``z - prox_t^h(z) - t prox_{1/t}^{h*}(z/t)`` using ``h.conjugate()``."""
    z = np.asarray(z, dtype=np.float64)
    hs = h.conjugate()
    return float(np.linalg.norm(z - h.prox(t, z) - t * hs.prox(1.0 / t, z / t)))


class Conjugate(ProxFunction):
    """Convex conjugate ``h*`` of a :class:`ProxFunction`.

    ``prox`` goes through Moreau's identity. ``value`` is available only when
    the base function provides ``conjugate_value``.
    """

    def __init__(self, base):
        super().__init__(base.dim)
        self.base = base

    def _prox(self, gamma, z):
        return z - gamma * self.base._prox(1.0 / gamma, z / gamma)

    def _value(self, z):
        conj = getattr(self.base, "conjugate_value", None)
        if conj is None:
            raise NotImplementedError(
                f"conjugate of {type(self.base).__name__} has no closed-form value")
        return conj(z)

    def conjugate(self):
        return self.base

    def __repr__(self):
        return f"Conjugate({self.base!r})"


class Zero(ProxFunction):
    """``h = 0``; prox is the identity."""

    def _value(self, z):
        return 0.0

    def _prox(self, gamma, z):
        return z.copy()

    def conjugate_value(self, z):
        return 0.0 if not np.any(z) else np.inf


class ZeroIndicator(ProxFunction):
    """Indicator of the origin; its conjugate is the zero function."""

    def _value(self, z):
        return 0.0 if not np.any(z) else np.inf

    def _prox(self, gamma, z):
        return np.zeros_like(z)

    def conjugate_value(self, z):
        return 0.0


class DiagonalQuadratic(ProxFunction):
    """``h(z) = 1/2 sum_i d_i (z_i - c_i)^2`` with ``d_i > 0``.

    ``weights=1, center=0`` is the plain ``1/2 ||z||^2``.
    """

    def __init__(self, dim, weights=1.0, center=0.0):
        super().__init__(dim)
        d = np.broadcast_to(np.asarray(weights, dtype=np.float64), (self.dim,)).copy()
        c = np.broadcast_to(np.asarray(center, dtype=np.float64), (self.dim,)).copy()
        if np.any(d <= 0):
            raise ValueError("quadratic weights must be positive")
        self.weights = d
        self.center = c

    def _value(self, z):
        r = z - self.center
        return 0.5 * float(np.sum(self.weights * r * r))

    def gradient(self, z):
        return self.weights * (np.asarray(z) - self.center)

    def _prox(self, gamma, z):
        gd = gamma * self.weights
        return (z + gd * self.center) / (1.0 + gd)

    def conjugate_value(self, z):
        return float(np.sum(z * self.center + 0.5 * z * z / self.weights))

    def conjugate_gradient(self, z):
        return self.center + np.asarray(z) / self.weights

    def conjugate_prox(self, gamma, z):
        """Closed-form prox of the conjugate, independent of Moreau."""
        gamma = _check_gamma(gamma)
        return self.weights * (z - gamma * self.center) / (self.weights + gamma)


class GroupNorm(ProxFunction):
    """``g(u) = weight * sum_i ||(u[i], u[m+i])||`` over ``m`` pairs.

    The layout matches :class:`~inertial_cp.linops.FiniteDifferenceMap`:
    first all first components, then all second components. The prox is
    pairwise soft-thresholding; a zero pair maps to zero.
    """

    def __init__(self, n_groups, weight=1.0):
        n_groups = int(n_groups)
        super().__init__(2 * n_groups)
        self.n_groups = n_groups
        self.weight = float(weight)
        if not self.weight > 0:
            raise ValueError("group norm weight must be positive")

    def _value(self, z):
        return self.weight * _kernels.group_norm_sum(z)

    def _prox(self, gamma, z):
        return _kernels.group_shrink(z, gamma * self.weight, np.empty_like(z))

    def conjugate_value(self, z):
        half = self.n_groups
        nrm = np.hypot(z[:half], z[half:])
        return 0.0 if np.all(nrm <= self.weight * (1 + 1e-12)) else np.inf


def group_soft_threshold(u, eta):
    """Shrink each pair ``(u[i], u[m+i])`` toward zero by ``eta`` in norm."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    if u.ndim != 1 or u.shape[0] % 2:
        raise ValueError(f"expected an even-length vector, got shape {u.shape}")
    eta = float(eta)
    if eta < 0:
        raise ValueError(f"threshold must be nonnegative, got {eta}")
    return _kernels.group_shrink(u, eta, np.empty_like(u))


class AffineProjection(ProxFunction):
    """Indicator of ``{x : B x = b}`` for a row-orthonormal ``B``.

    The prox is the orthogonal projection ``x + B^T (b - B x)``; the prox
    parameter plays no role and is accepted only for a uniform interface.
    ``B B^T = I`` is checked at construction with seeded random probes.

    Args:
        linmap (LinearMap): The operator ``B`` with ``B B^T = I``.
        data (array): Right-hand side ``b``.
        probes (int, optional): Number of random probes for the
            ``B B^T = I`` check; defaults to ``q``.
        seed (int): Probe seed.
        tol (float): Tolerance of the probe check and of ``value``.
    """

    def __init__(self, linmap, data, probes=None, seed=0, tol=1e-10):
        super().__init__(linmap.in_dim)
        data = np.asarray(data, dtype=np.float64).ravel()
        if data.shape[0] != linmap.out_dim:
            raise ValueError(
                f"data must have length {linmap.out_dim}, got {data.shape[0]}")
        self.map = linmap
        self.data = data
        self.tol = float(tol)
        self._check_row_orthonormal(linmap.out_dim if probes is None else probes, seed)

    def _check_row_orthonormal(self, probes, seed):
        rng = np.random.default_rng(seed)
        for _ in range(int(probes)):
            v = rng.standard_normal(self.map.out_dim)
            err = np.linalg.norm(self.map.apply(self.map.adjoint_apply(v)) - v)
            if err > self.tol * max(1.0, np.linalg.norm(v)):
                raise ValueError(
                    f"operator is not row-orthonormal: ||B B^T v - v|| = {err:.3e}")

    def feasibility(self, x):
        """``max |B x - b|``."""
        return float(np.max(np.abs(self.map.apply(x) - self.data)))

    def _value(self, z):
        return 0.0 if self.feasibility(z) <= self.tol * (1.0 + np.max(np.abs(self.data))) else np.inf

    def _prox(self, gamma, z):
        return z + self.map.adjoint_apply(self.data - self.map.apply(z))

    def project(self, x):
        return self._prox(1.0, self._check_z(x, "project"))


def project_affine(p, x):
    return p.project(x)
