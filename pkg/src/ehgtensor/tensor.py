"""Dense 3-way tensors and the multilinear algebra built on them.

A tensor is a plain ``numpy.ndarray`` of shape ``(m, n, t)`` and dtype
float64.  Matrices are 2-D float64 arrays.  Modes are numbered 1, 2, 3.

Conventions (used by every module of the package):

* Storage layout is mode-1 fastest (Fortran order), so
  ``unfold(x, 1) == x.reshape(m, n * t, order="F")``.
* The mode-n unfolding ``X_(n)`` has ``x.shape[n-1]`` rows.  Its columns
  enumerate the remaining two modes in increasing mode order with the lower
  mode varying fastest (Kolda & Bader).  For mode 2 the column of entry
  ``(i, j, k)`` is ``i + m * k``; for mode 3 it is ``i + m * j``.
* With this ordering ``X = G x1 A x2 B x3 C`` satisfies
  ``X_(1) = A G_(1) (C kron B)^T``, ``X_(2) = B G_(2) (C kron A)^T`` and
  ``X_(3) = C G_(3) (B kron A)^T``, and ``vec(X) = (C kron B kron A) vec(G)``
  where ``vec`` is the Fortran-order flattening.
"""

import numpy as np

from .errors import ArgumentError

MODES = (1, 2, 3)


def as_tensor3(x, name="tensor"):
    """Return ``x`` as a finite float64 array of shape (m, n, t)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise ArgumentError(f"{name} must be 3-way, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} contains NaN or Inf entries")
    return arr


def _check_mode(mode):
    if mode not in MODES:
        raise ArgumentError(f"mode must be one of 1, 2, 3; got {mode!r}")


def unfold(x, mode):
    """Mode-``mode`` unfolding of a 3-way tensor.

    Returns a matrix of shape ``(x.shape[mode-1], prod(other dims))``.
    """
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ArgumentError(f"expected a 3-way tensor, got shape {x.shape}")
    axis = mode - 1
    return np.reshape(np.moveaxis(x, axis, 0), (x.shape[axis], -1), order="F")


def fold(a, mode, dims):
    """Inverse of :func:`unfold` for a tensor of shape ``dims``."""
    _check_mode(mode)
    a = np.asarray(a, dtype=np.float64)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ArgumentError(f"dims must have three entries, got {dims}")
    axis = mode - 1
    rest = [d for i, d in enumerate(dims) if i != axis]
    if a.ndim != 2 or a.shape != (dims[axis], rest[0] * rest[1]):
        raise ArgumentError(
            f"matrix of shape {a.shape} cannot be folded along mode {mode} "
            f"into dims {dims}"
        )
    full = np.reshape(a, (dims[axis], rest[0], rest[1]), order="F")
    return np.moveaxis(full, 0, axis)


def mode_product(x, u, mode):
    """n-mode product ``x x_n u``: contracts mode ``mode`` of ``x`` with the columns of ``u``."""
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    axis = mode - 1
    if u.ndim != 2 or x.ndim != 3 or u.shape[1] != x.shape[axis]:
        raise ArgumentError(
            f"cannot multiply tensor {x.shape} along mode {mode} by matrix {u.shape}"
        )
    out = np.tensordot(u, x, axes=(1, axis))
    return np.moveaxis(out, 0, axis)


def tucker_reconstruct(core, u1, u2, u3):
    """Full tensor ``core x1 u1 x2 u2 x3 u3``."""
    core = np.asarray(core, dtype=np.float64)
    factors = [np.asarray(u, dtype=np.float64) for u in (u1, u2, u3)]
    if core.ndim != 3:
        raise ArgumentError(f"core must be 3-way, got shape {core.shape}")
    for n, u in enumerate(factors):
        if u.ndim != 2 or u.shape[1] != core.shape[n]:
            raise ArgumentError(
                f"factor {n + 1} has shape {u.shape}, core has {core.shape[n]} "
                f"components along mode {n + 1}"
            )
    return np.einsum("abc,ia,jb,kc->ijk", core, *factors, optimize=True)


def cp_reconstruct(u1, u2, u3, weights=None):
    """Sum of rank-one terms ``sum_r w_r a_r o b_r o c_r``."""
    u1, u2, u3 = (np.asarray(u, dtype=np.float64) for u in (u1, u2, u3))
    if not (u1.shape[1] == u2.shape[1] == u3.shape[1]):
        raise ArgumentError("CP factors must share the same number of columns")
    if weights is not None:
        u1 = u1 * np.asarray(weights, dtype=np.float64)
    return np.einsum("ir,jr,kr->ijk", u1, u2, u3, optimize=True)


def frobenius_norm(x):
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.sum(x * x)))


def khatri_rao(a, b):
    """Column-wise Kronecker product; row index of ``b`` varies fastest."""
    if a.shape[1] != b.shape[1]:
        raise ArgumentError("Khatri-Rao operands need equal column counts")
    return np.einsum("ir,jr->ijr", a, b).reshape(a.shape[0] * b.shape[0], -1)


def hosvd_factors(x, ranks):
    """Leading left singular vectors of each unfolding.

    Returns a list of three matrices with ``ranks[n]`` orthonormal columns.
    When a requested rank exceeds the number of singular vectors the
    unfolding provides, the basis is completed with the orthogonal complement.
    """
    x = np.asarray(x, dtype=np.float64)
    factors = []
    for n, r in enumerate(ranks):
        size = x.shape[n]
        if not 1 <= r <= size:
            raise ArgumentError(f"rank {r} along mode {n + 1} is outside [1, {size}]")
        xn = unfold(x, n + 1)
        u, _, _ = np.linalg.svd(xn, full_matrices=False)
        if u.shape[1] < r:
            u = _complete_basis(u, r)
        factors.append(np.ascontiguousarray(u[:, :r]))
    return factors


def _complete_basis(u, r):
    # fixed generator: completion must not depend on any caller seed
    extra = np.random.default_rng(12345).standard_normal((u.shape[0], r - u.shape[1]))
    extra -= u @ (u.T @ extra)
    q, _ = np.linalg.qr(extra)
    q -= u @ (u.T @ q)
    q, _ = np.linalg.qr(q)
    return np.hstack([u, q])

