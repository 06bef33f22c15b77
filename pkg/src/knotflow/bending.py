"""Quadratic forms of the cubic Hermite space and the bending energy.

Scalar degrees of freedom are interleaved per node, [p_0, d_0, p_1, d_1, ...],
so a closed curve occupies a (2N, 3) array.  All three forms (mass, first
derivative, second derivative) are exact on the Hermite space, assembled from
closed-form element matrices on each subinterval.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from knotflow.curve import HermiteCurve, PeriodicPartition

__all__ = [
    "pack_dofs",
    "unpack_dofs",
    "stiffness_matrix",
    "mass_matrix",
    "first_derivative_matrix",
    "bending_energy",
    "bending_gradient",
]


def pack_dofs(positions: np.ndarray, derivatives: np.ndarray) -> np.ndarray:
    """Interleave nodal positions and derivatives into a (2N, 3) dof array."""
    n = positions.shape[0]
    out = np.empty((2 * n, positions.shape[1]) if positions.ndim == 2 else (2 * n,))
    out[0::2] = positions
    out[1::2] = derivatives
    return out


def unpack_dofs(dofs: np.ndarray):
    return dofs[0::2], dofs[1::2]


def _element_blocks(h: np.ndarray):
    """Per-segment 4x4 element matrices for widths h: (second, zeroth, first) forms."""
    n = h.size
    h2 = h * h
    o = np.ones(n)

    S = np.empty((n, 4, 4))
    S[:, 0] = np.stack([12.0 * o, 6.0 * h, -12.0 * o, 6.0 * h], axis=1)
    S[:, 1] = np.stack([6.0 * h, 4.0 * h2, -6.0 * h, 2.0 * h2], axis=1)
    S[:, 2] = np.stack([-12.0 * o, -6.0 * h, 12.0 * o, -6.0 * h], axis=1)
    S[:, 3] = np.stack([6.0 * h, 2.0 * h2, -6.0 * h, 4.0 * h2], axis=1)
    S /= (h2 * h)[:, None, None]

    M = np.empty((n, 4, 4))
    M[:, 0] = np.stack([156.0 * o, 22.0 * h, 54.0 * o, -13.0 * h], axis=1)
    M[:, 1] = np.stack([22.0 * h, 4.0 * h2, 13.0 * h, -3.0 * h2], axis=1)
    M[:, 2] = np.stack([54.0 * o, 13.0 * h, 156.0 * o, -22.0 * h], axis=1)
    M[:, 3] = np.stack([-13.0 * h, -3.0 * h2, -22.0 * h, 4.0 * h2], axis=1)
    M *= (h / 420.0)[:, None, None]

    K = np.empty((n, 4, 4))
    K[:, 0] = np.stack([36.0 * o, 3.0 * h, -36.0 * o, 3.0 * h], axis=1)
    K[:, 1] = np.stack([3.0 * h, 4.0 * h2, -3.0 * h, -h2], axis=1)
    K[:, 2] = np.stack([-36.0 * o, -3.0 * h, 36.0 * o, -3.0 * h], axis=1)
    K[:, 3] = np.stack([3.0 * h, -h2, -3.0 * h, 4.0 * h2], axis=1)
    K /= (30.0 * h)[:, None, None]

    return S, M, K


def _assemble(partition: PeriodicPartition, which: int) -> sp.csr_matrix:
    n = partition.n
    blocks = _element_blocks(partition.widths)[which]
    segs = np.arange(n)
    nxt = (segs + 1) % n
    # element dofs in order (p_e, d_e, p_{e+1}, d_{e+1})
    dofs = np.stack([2 * segs, 2 * segs + 1, 2 * nxt, 2 * nxt + 1], axis=1)
    rows = np.repeat(dofs, 4, axis=1).ravel()
    cols = np.tile(dofs, (1, 4)).ravel()
    mat = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(2 * n, 2 * n))
    return mat.tocsr()


def stiffness_matrix(partition: PeriodicPartition) -> sp.csr_matrix:
    """Periodic form of second derivatives: A[i, j] = integral of phi_i'' phi_j''."""
    return _assemble(partition, 0)


def mass_matrix(partition: PeriodicPartition) -> sp.csr_matrix:
    """Periodic L2 form: A[i, j] = integral of phi_i phi_j."""
    return _assemble(partition, 1)


def first_derivative_matrix(partition: PeriodicPartition) -> sp.csr_matrix:
    """Periodic form of first derivatives: A[i, j] = integral of phi_i' phi_j'."""
    return _assemble(partition, 2)


def bending_energy(curve: HermiteCurve, kappa: float = 1.0) -> float:
    """(kappa/2) integral over the unit interval of |u''(x)|^2."""
    S = stiffness_matrix(curve.partition)
    dofs = pack_dofs(curve.positions, curve.derivatives)
    return 0.5 * kappa * float(np.sum(dofs * (S @ dofs)))


def bending_gradient(curve: HermiteCurve, kappa: float = 1.0) -> np.ndarray:
    """Gradient of the bending energy with respect to the (2N, 3) dof array."""
    S = stiffness_matrix(curve.partition)
    return kappa * (S @ pack_dofs(curve.positions, curve.derivatives))
