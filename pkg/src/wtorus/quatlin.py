"""Quaternion and quaternionic 2x2 matrix algebra.

Conventions
-----------
* A quaternion is a real array with last axis of length 4, ordered
  ``(w, x, y, z)`` for ``w + x i + y j + z k`` with ``ij = k``.
* ``H^2`` is a *right* H-module; quaternionic matrices act on the left.
* The complex structure ``I`` is right multiplication by ``i``.  Writing
  ``h = a + j b`` with ``a, b`` complex turns ``H`` into ``C^2`` and
  ``H^2`` into ``C^4`` with coordinates ``(a1, b1, a2, b2)``.  Left
  multiplication by ``q = a + j b`` is then the complex matrix
  ``[[a, -conj(b)], [b, conj(a)]]``.

All functions broadcast over leading axes.
"""

from __future__ import annotations

import numpy as np

_J_BLOCK = np.array([[0.0, -1.0], [1.0, 0.0]], dtype=complex)
# Right multiplication by j on C^4 is v -> STRUCT @ conj(v).
STRUCT = np.kron(np.eye(2), _J_BLOCK)


def quat(w=0.0, x=0.0, y=0.0, z=0.0):
    return np.array([w, x, y, z], dtype=float)


ONE = quat(1.0)
I = quat(0.0, 1.0)
J = quat(0.0, 0.0, 1.0)
K = quat(0.0, 0.0, 0.0, 1.0)


def quat_mul(a, b):
    """Hamilton product of quaternion arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_norm2(q):
    q = np.asarray(q, dtype=float)
    return np.sum(q * q, axis=-1)


def quat_inv(q):
    q = np.asarray(q, dtype=float)
    return quat_conj(q) / quat_norm2(q)[..., None]


def is_unit_imaginary(q, tol=1e-12):
    q = np.asarray(q, dtype=float)
    return (np.abs(q[..., 0]) <= tol) & (np.abs(quat_norm2(q) - 1.0) <= tol)


def quat_to_pair(q):
    """Split ``q = a + j b`` into complex ``(a, b)``."""
    q = np.asarray(q, dtype=float)
    a = q[..., 0] + 1j * q[..., 1]
    b = q[..., 2] - 1j * q[..., 3]
    return a, b


def pair_to_quat(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return np.stack([a.real, a.imag, b.real, -b.imag], axis=-1)


def left_mul_matrix(q):
    """Complex 2x2 matrix of ``h -> q h`` in the coordinates ``h = a + j b``."""
    a, b = quat_to_pair(q)
    out = np.empty(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = -np.conj(b)
    out[..., 1, 0] = b
    out[..., 1, 1] = np.conj(a)
    return out


def matrix_to_quat(m):
    """Inverse of :func:`left_mul_matrix` (reads the first column)."""
    m = np.asarray(m)
    return pair_to_quat(m[..., 0, 0], m[..., 1, 0])


def qmat_to_cmat(m):
    """Quaternionic 2x2 matrices ``(..., 2, 2, 4)`` to complex ``(..., 4, 4)``."""
    blocks = left_mul_matrix(m)  # (..., 2, 2, 2, 2)
    lead = blocks.shape[:-4]
    return blocks.swapaxes(-3, -2).reshape(lead + (4, 4))


def cmat_to_qmat(c):
    c = np.asarray(c)
    lead = c.shape[:-2]
    blocks = c.reshape(lead + (2, 2, 2, 2)).swapaxes(-3, -2)
    return matrix_to_quat(blocks)


def qvec_to_cvec(v):
    """Quaternionic vectors ``(..., 2, 4)`` to ``C^4`` vectors ``(..., 4)``."""
    a, b = quat_to_pair(v)
    lead = a.shape[:-1]
    return np.stack([a, b], axis=-1).reshape(lead + (4,))


def cvec_to_qvec(c):
    c = np.asarray(c)
    lead = c.shape[:-1]
    pairs = c.reshape(lead + (2, 2))
    return pair_to_quat(pairs[..., 0], pairs[..., 1])


def right_mul_j(v):
    """``v -> v j`` on ``C^4`` vectors (the quaternionic structure)."""
    return np.einsum("ab,...b->...a", STRUCT, np.conj(v))


def quaternionic_defect(c):
    """``|| STRUCT conj(C) STRUCT^-1 - C ||``; zero iff ``C`` comes from a QMat2."""
    c = np.asarray(c)
    twisted = STRUCT @ np.conj(c) @ STRUCT.T
    return np.linalg.norm(twisted - c, axis=(-2, -1))


def qmat_mul(m, n):
    """Product of quaternionic matrices ``(..., r, s, 4) @ (..., s, t, 4)``."""
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    prod = quat_mul(m[..., :, :, None, :], n[..., None, :, :, :])
    return prod.sum(axis=-3)


def qmat_vec(m, v):
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    return quat_mul(m, v[..., None, :, :]).sum(axis=-2)


def eig4(m):
    """Eigenvalues of complex 4x4 matrices, sorted by (real, imag).

    Defective matrices are fine; expect ``sqrt(eps)`` accuracy on
    nontrivial Jordan blocks.
    """
    m = np.asarray(m, dtype=complex)
    ev = np.linalg.eigvals(m)
    order = np.lexsort((ev.imag, ev.real), axis=-1)
    return np.take_along_axis(ev, order, axis=-1)


def match_spectra(a, b):
    """Max distance between two eigenvalue multisets under optimal pairing."""
    from itertools import permutations

    a = np.asarray(a)
    b = np.asarray(b)
    best = np.inf
    for perm in permutations(range(len(b))):
        best = min(best, float(np.max(np.abs(a - b[list(perm)]))))
    return best
