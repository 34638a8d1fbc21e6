"""Matrix-free linear maps.

A :class:`LinearMap` is a forward/adjoint pair plus an optional upper
bound on the spectral radius of ``A^T A``. Three concrete maps cover the
needs of the solvers and the imaging experiments: dense matrices,
periodic first-order finite differences and randomized partial
Walsh-Hadamard transforms.
"""
import math

import numpy as np

from . import _kernels


def _as_vector(u, expected, what):
    u = np.ascontiguousarray(u, dtype=np.float64)
    if u.ndim != 1 or u.shape[0] != expected:
        raise ValueError(
            f"{what}: expected a vector of length {expected}, got shape {u.shape}")
    return u


class LinearMap:
    """A linear map ``R^in_dim -> R^out_dim`` given by callables.

    Args:
        in_dim (int): Input dimension.
        out_dim (int): Output dimension.
        forward (callable): ``u -> A u``.
        adjoint (callable): ``v -> A^T v``.
        norm_bound (float, optional): Upper bound on ``rho(A^T A)``. When
            ``None`` it is estimated by power iteration on first access; that
            estimate approaches the true value from below.
    """

    def __init__(self, in_dim, out_dim, forward, adjoint, norm_bound=None):
        in_dim = int(in_dim)
        out_dim = int(out_dim)
        if in_dim < 1 or out_dim < 1:
            raise ValueError(
                f"dimensions must be positive, got in_dim={in_dim}, out_dim={out_dim}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self._forward = forward
        self._adjoint = adjoint
        self._norm_bound = None if norm_bound is None else float(norm_bound)

    @property
    def shape(self):
        return (self.out_dim, self.in_dim)

    @property
    def norm_bound(self):
        if self._norm_bound is None:
            self._norm_bound = estimate_spectral_bound(self)
        return self._norm_bound

    def apply(self, u):
        """Return ``A u``."""
        u = _as_vector(u, self.in_dim, f"{type(self).__name__}.apply")
        return self._forward(u)

    def adjoint_apply(self, v):
        """Return ``A^T v``."""
        v = _as_vector(v, self.out_dim, f"{type(self).__name__}.adjoint_apply")
        return self._adjoint(v)

    __call__ = apply

    def to_dense(self):
        """Assemble the matrix column by column. Meant for small maps in tests."""
        out = np.empty((self.out_dim, self.in_dim))
        e = np.zeros(self.in_dim)
        for i in range(self.in_dim):
            e[i] = 1.0
            out[:, i] = self.apply(e)
            e[i] = 0.0
        return out

    def __repr__(self):
        return f"{type(self).__name__}(in_dim={self.in_dim}, out_dim={self.out_dim})"


class DenseMap(LinearMap):
    """Linear map backed by an explicit matrix."""

    def __init__(self, matrix, norm_bound=None):
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
        matrix.setflags(write=False)
        self.matrix = matrix
        super().__init__(matrix.shape[1], matrix.shape[0],
                         matrix.dot, matrix.T.dot, norm_bound)

    def to_dense(self):
        return self.matrix.copy()

    def spectral_radius(self):
        """Exact ``rho(A^T A)`` from the largest singular value."""
        return float(np.linalg.norm(self.matrix, 2) ** 2)


class IdentityMap(LinearMap):

    def __init__(self, dim):
        super().__init__(dim, dim, np.copy, np.copy, norm_bound=1.0)


class FiniteDifferenceMap(LinearMap):
    """Periodic forward differences of a column-stacked ``n x n`` image.

    The output stacks horizontal differences (next column minus current)
    over vertical differences (next row minus current), giving a vector
    of length ``2 n^2``. Pixel ``i`` owns the pair ``(out[i], out[n^2 + i])``.
    """

    def __init__(self, n):
        n = int(n)
        if n < 2:
            raise ValueError(f"image side must be at least 2, got {n}")
        self.n = n
        nn = n * n
        super().__init__(nn, 2 * nn, self._fwd, self._adj,
                         norm_bound=self.exact_spectral_radius(n))

    @staticmethod
    def exact_spectral_radius(n):
        # max over frequencies of (2 - 2 cos) in each direction
        if n % 2 == 0:
            return 8.0
        return 2.0 * (2.0 + 2.0 * math.cos(math.pi / n))

    def _fwd(self, x):
        return _kernels.diff_forward(x, self.n, np.empty(2 * self.n * self.n))

    def _adj(self, p):
        return _kernels.diff_adjoint(p, self.n, np.empty(self.n * self.n))


def _check_pow2(length):
    if length < 1 or length & (length - 1):
        raise ValueError(f"length must be a power of two, got {length}")
    return length.bit_length() - 1


def fwht_in_place(u):
    """Unnormalized fast Walsh-Hadamard transform, overwriting ``u``.

    Computes ``H_{2^j} u`` with the Sylvester ordering
    ``H_{2^j} = [[H, H], [H, -H]]`` in ``O(2^j j)`` operations. The caller
    applies the ``2^{-j/2}`` normalization.
    """
    if not isinstance(u, np.ndarray) or u.dtype != np.float64 \
            or u.ndim != 1 or not u.flags.c_contiguous or not u.flags.writeable:
        raise TypeError("fwht_in_place needs a writeable contiguous float64 vector")
    _check_pow2(u.shape[0])
    return _kernels.fwht(u)


def fwht(u):
    """Out-of-place unnormalized Walsh-Hadamard transform."""
    return fwht_in_place(np.array(u, dtype=np.float64))


def hadamard_matrix(j):
    """Dense ``H_{2^j}`` built from the block recursion (for tests)."""
    h = np.ones((1, 1))
    for _ in range(j):
        h = np.block([[h, h], [h, -h]])
    return h


class PartialWalshHadamardMap(LinearMap):
    """Selected rows of a column-permuted, normalized Walsh-Hadamard matrix.

    ``B x = (W x[col_perm])[rows]`` with ``W = 2^{-j/2} H_{2^j}``. Since
    ``W`` is symmetric and orthogonal, ``B B^T = I`` on ``R^q``.

    Args:
        j (int): Transform order exponent; the full transform has size 2^j.
        rows (array of int): Distinct selected row indices.
        col_perm (array of int, optional): Column permutation; identity if
            omitted.
        seed (int, optional): Seed the selection was drawn from, recorded
            for reproducibility only.
    """

    def __init__(self, j, rows, col_perm=None, seed=None):
        j = int(j)
        if j < 0:
            raise ValueError(f"transform order must be nonnegative, got {j}")
        size = 1 << j
        rows = np.asarray(rows, dtype=np.int64).ravel()
        if rows.size < 1:
            raise ValueError("at least one row must be selected")
        if rows.min() < 0 or rows.max() >= size or np.unique(rows).size != rows.size:
            raise ValueError(f"rows must be distinct indices in [0, {size})")
        if col_perm is None:
            col_perm = np.arange(size)
        col_perm = np.asarray(col_perm, dtype=np.int64).ravel()
        if col_perm.size != size or not np.array_equal(np.sort(col_perm), np.arange(size)):
            raise ValueError(f"col_perm must be a permutation of range({size})")
        rows.setflags(write=False)
        col_perm.setflags(write=False)
        self.j = j
        self.size = size
        self.rows = rows
        self.col_perm = col_perm
        self.seed = seed
        self._scale = 2.0 ** (-j / 2.0)
        super().__init__(size, rows.size, self._fwd, self._adj, norm_bound=1.0)

    @classmethod
    def random(cls, j, q, seed, keep_dc=False):
        """Draw ``q`` rows and a column permutation from ``seed``.

        Uses numpy's ``default_rng`` (PCG64), so a given seed yields the
        same operator on every platform. Rows are returned sorted. With
        ``keep_dc`` row 0 (the constant row, which no column permutation
        changes) is always selected; otherwise the image mean is
        unobservable whenever it is left out.
        """
        size = 1 << int(j)
        q = int(q)
        if not 1 <= q <= size:
            raise ValueError(f"number of rows must lie in [1, {size}], got {q}")
        rng = np.random.default_rng(seed)
        if keep_dc:
            rest = rng.choice(np.arange(1, size), size=q - 1, replace=False)
            rows = np.sort(np.concatenate(([0], rest)).astype(np.int64))
        else:
            rows = np.sort(rng.choice(size, size=q, replace=False))
        perm = rng.permutation(size)
        return cls(j, rows, perm, seed=seed)

    @property
    def q(self):
        return self.rows.size

    def _fwd(self, x):
        z = x[self.col_perm]  # fancy indexing copies, so the kernel may overwrite it
        _kernels.fwht(z)
        return self._scale * z[self.rows]

    def _adj(self, v):
        z = np.zeros(self.size)
        z[self.rows] = v
        _kernels.fwht(z)
        out = np.empty(self.size)
        out[self.col_perm] = self._scale * z
        return out


def estimate_spectral_bound(linmap, iters=200, seed=0, use_known=True):
    """Estimate ``rho(A^T A)`` by power iteration from a seeded start.

    Returns the Rayleigh quotient of the last iterate. On a positive
    semidefinite operator the quotient never decreases from one iteration
    to the next, and it never exceeds the true spectral radius. Maps that
    carry an analytic bound (finite differences, partial Walsh-Hadamard,
    identity) return it directly unless ``use_known`` is False.
    """
    if iters < 1:
        raise ValueError(f"iters must be at least 1, got {iters}")
    if linmap.in_dim < 1 or linmap.out_dim < 1:
        raise ValueError("cannot estimate the norm of a zero-dimensional map")
    if use_known and linmap._norm_bound is not None:
        return linmap._norm_bound
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(linmap.in_dim)
    x /= np.linalg.norm(x)
    rq = 0.0
    for _ in range(int(iters)):
        y = linmap.adjoint_apply(linmap.apply(x))
        rq = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        x = y / nrm
    return rq
