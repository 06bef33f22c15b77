"""Closed piecewise-cubic Hermite curves over the periodic unit interval.

A curve is stored as nodal positions and nodal first derivatives on a
partition of [0, 1).  Between nodes it is the cubic Hermite interpolant,
which is globally C^1.  Second derivatives are piecewise linear with jumps
at the nodes; evaluation at a node returns the right limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "PeriodicPartition",
    "HermiteCurve",
    "HermiteField",
    "CurveScale",
    "DegenerateCurveError",
    "from_samples",
    "rescale_to_length",
    "polyline_length",
    "hermite_basis",
]


class DegenerateCurveError(ValueError):
    """Raised when an operation needs a curve of positive length."""


@dataclass(frozen=True)
class PeriodicPartition:
    """Strictly increasing nodes x_0 < ... < x_{N-1} in [0, 1), wrapped periodically."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("a periodic partition needs at least 3 nodes")
        if nodes[0] < 0.0 or nodes[-1] >= 1.0:
            raise ValueError("partition nodes must lie in [0, 1)")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("partition nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, n: int) -> "PeriodicPartition":
        return cls(np.arange(n) / float(n))

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @cached_property
    def widths(self) -> np.ndarray:
        """Subinterval widths h_i = x_{i+1} - x_i, the last one wrapping to x_0 + 1."""
        h = np.empty(self.n)
        h[:-1] = np.diff(self.nodes)
        h[-1] = self.nodes[0] + 1.0 - self.nodes[-1]
        h.setflags(write=False)
        return h

    @property
    def h_max(self) -> float:
        return float(self.widths.max())

    @cached_property
    def midpoints(self) -> np.ndarray:
        m = np.mod(self.nodes + 0.5 * self.widths, 1.0)
        m.setflags(write=False)
        return m

    def locate(self, x):
        """Segment index and local coordinate t in [0, 1) for parameters x (mod 1).

        A parameter exactly at a node belongs to the segment starting there.
        """
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        # points in [0, x_0) fall into the wrapping last segment
        idx = np.where(idx < 0, self.n - 1, idx)
        left = self.nodes[idx]
        offset = x - left
        offset = np.where(offset < 0.0, offset + 1.0, offset)
        t = offset / self.widths[idx]
        return idx, t


def hermite_basis(t, h):
    """Cubic Hermite basis on one segment: values, first and second derivatives.

    Returns three (4, ...) arrays B, dB, ddB with the derivative-dof entries
    already scaled by the segment width h, so a field on the segment is
    B[0] p0 + B[1] d0 + B[2] p1 + B[3] d1 and dB/ddB differentiate in the
    global parameter.
    """
    t, h = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(h, dtype=float))
    t2 = t * t
    t3 = t2 * t
    B = np.stack([
        1.0 - 3.0 * t2 + 2.0 * t3,
        h * (t - 2.0 * t2 + t3),
        3.0 * t2 - 2.0 * t3,
        h * (t3 - t2),
    ])
    dB = np.stack([
        (-6.0 * t + 6.0 * t2) / h,
        1.0 - 4.0 * t + 3.0 * t2,
        (6.0 * t - 6.0 * t2) / h,
        3.0 * t2 - 2.0 * t,
    ])
    ddB = np.stack([
        (-6.0 + 12.0 * t) / (h * h),
        (-4.0 + 6.0 * t) / h,
        (6.0 - 12.0 * t) / (h * h),
        (-2.0 + 6.0 * t) / h,
    ])
    return B, dB, ddB


@dataclass(frozen=True)
class HermiteField:
    """Nodal data of a discrete perturbation field on the same partition as a curve."""

    positions: np.ndarray
    derivatives: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=float)
        der = np.ascontiguousarray(self.derivatives, dtype=float)
        if pos.shape != der.shape or pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("field data must be two (N, 3) arrays")
        pos.setflags(write=False)
        der.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "derivatives", der)


@dataclass(frozen=True)
class HermiteCurve:
    """Closed C^1 curve: nodal positions and derivatives on a periodic partition."""

    partition: PeriodicPartition
    positions: np.ndarray
    derivatives: np.ndarray

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=float)
        der = np.ascontiguousarray(self.derivatives, dtype=float)
        n = self.partition.n
        if pos.shape != (n, 3) or der.shape != (n, 3):
            raise ValueError("positions and derivatives must both have shape (N, 3)")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(der))):
            raise ValueError("curve data must be finite")
        pos.setflags(write=False)
        der.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "derivatives", der)

    @property
    def n(self) -> int:
        return self.partition.n

    def segment_dofs(self):
        """Per-segment dof arrays (p0, d0, p1, d1), each (N, 3), wrapping at the end."""
        p0 = self.positions
        d0 = self.derivatives
        p1 = np.roll(self.positions, -1, axis=0)
        d1 = np.roll(self.derivatives, -1, axis=0)
        return p0, d0, p1, d1

    def evaluate(self, x, order: int = 0) -> np.ndarray:
        """Evaluate the curve (order 0), its derivative (1) or second derivative (2)."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        idx, t = self.partition.locate(np.atleast_1d(x))
        h = self.partition.widths[idx]
        B = hermite_basis(t, h)[order]
        p0, d0, p1, d1 = self.segment_dofs()
        out = (
            B[0][:, None] * p0[idx]
            + B[1][:, None] * d0[idx]
            + B[2][:, None] * p1[idx]
            + B[3][:, None] * d1[idx]
        )
        return out[0] if scalar else out

    @cached_property
    def polyline_length(self) -> float:
        return polyline_length(self.positions)

    @cached_property
    def speed(self) -> float:
        """Mean nodal parametric speed, the constant L of a near-arclength curve."""
        return float(np.mean(np.linalg.norm(self.derivatives, axis=1)))

    def with_data(self, positions, derivatives) -> "HermiteCurve":
        return HermiteCurve(self.partition, positions, derivatives)

    def translated(self, vector) -> "HermiteCurve":
        v = np.asarray(vector, dtype=float).reshape(1, 3)
        return self.with_data(self.positions + v, self.derivatives)

    def rotated(self, matrix) -> "HermiteCurve":
        R = np.asarray(matrix, dtype=float)
        return self.with_data(self.positions @ R.T, self.derivatives @ R.T)

    def to_snapshot(self) -> dict:
        return {
            "nodes": self.partition.nodes.tolist(),
            "positions": self.positions.tolist(),
            "derivatives": self.derivatives.tolist(),
        }

    @classmethod
    def from_snapshot(cls, data: dict) -> "HermiteCurve":
        try:
            nodes = data["nodes"]
            positions = data["positions"]
            derivatives = data["derivatives"]
        except (KeyError, TypeError) as exc:
            raise ValueError("snapshot needs nodes, positions and derivatives") from exc
        return cls(PeriodicPartition(np.asarray(nodes)), np.asarray(positions),
                   np.asarray(derivatives))


@dataclass(frozen=True)
class CurveScale:
    """Ambient scale of a run: target length and the parametric speed L ~ length."""

    target_length: float
    speed: float


def from_samples(partition: PeriodicPartition, f, fprime) -> HermiteCurve:
    """Interpolate an analytic closed map f: R/Z -> R^3 at the partition nodes."""
    x = partition.nodes
    pos = np.asarray(f(x), dtype=float)
    der = np.asarray(fprime(x), dtype=float)
    if pos.shape != (partition.n, 3):
        pos = pos.reshape(partition.n, 3)
    if der.shape != (partition.n, 3):
        der = der.reshape(partition.n, 3)
    return HermiteCurve(partition, pos, der)


def polyline_length(positions) -> float:
    """Length of the closed polygon through the given points."""
    pos = np.asarray(positions, dtype=float)
    edges = np.roll(pos, -1, axis=0) - pos
    return float(np.sum(np.linalg.norm(edges, axis=1)))


def rescale_to_length(curve: HermiteCurve, target: float) -> HermiteCurve:
    """Scale positions and derivatives so the inscribed polygon has the target length."""
    current = curve.polyline_length
    if current <= 0.0 or not np.isfinite(current):
        raise DegenerateCurveError("cannot rescale a curve of zero length")
    factor = target / current
    return curve.with_data(curve.positions * factor, curve.derivatives * factor)
