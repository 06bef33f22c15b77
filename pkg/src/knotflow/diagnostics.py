"""Per-step monitors: energy ledger, stability test, parametrization drift,
self-distance of the inscribed polygon, and crossing detection between steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import HermiteCurve
from .tangent_point import NonEmbeddedError

__all__ = [
    "DiagnosticsRecord",
    "stability_verdict",
    "arclength_deviation",
    "min_pair_distance",
    "bilipschitz",
    "isotopy_monitor",
]

OVERLAP_RATIO_LIMIT = 1.0e12
# near-tangency margin for the crossing test, relative to curve length
CONTACT_MARGIN = 1.0e-9


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One monitoring row per completed step."""

    step: int
    e_total: float
    e_bend: float
    e_tp_weighted: float
    length: float
    arclength_dev: float
    bilipschitz: float
    min_pair_dist: float
    stable: bool
    isotopy_ok: bool

    def __post_init__(self):
        split = self.e_bend + self.e_tp_weighted
        scale = max(1.0, abs(self.e_total))
        if abs(self.e_total - split) > 1.0e-12 * scale:
            raise ValueError("energy split does not sum to the total")
        if self.min_pair_dist < 0.0:
            raise ValueError("min_pair_dist must be nonnegative")


def stability_verdict(e_prev: float, e_curr: float, tau: float) -> bool:
    """Per-step energy test: (E_curr - E_prev)/tau <= (3/2) tau^(1/2)."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    return (e_curr - e_prev) / tau <= 1.5 * np.sqrt(tau)


def arclength_deviation(
    curve: HermiteCurve, speed: float, include_midpoints: bool = True
) -> float:
    """Max relative defect of |u'|^2 against speed^2 over the control points.

    Checks every node and, unless disabled, every segment midpoint.  The
    nodal-only variant is the quantity whose growth along the flow is governed
    by the per-node speed identity.
    """
    if speed <= 0.0:
        raise ValueError("speed must be positive")
    sq = speed * speed
    nodal = np.sum(curve.derivatives**2, axis=1)
    dev = np.max(np.abs(nodal - sq))
    if include_midpoints:
        mid = curve.evaluate(curve.partition.midpoints, order=1)
        dev = max(dev, np.max(np.abs(np.sum(mid**2, axis=1) - sq)))
    return float(dev / sq)


def _segment_pair_distance(p1, p2, q1, q2):
    """Clamped closest-point distance between segment batches, vectorized."""
    d1 = p2 - p1
    d2 = q2 - q1
    r = p1 - q1
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    denom = a * e - b * b
    s = np.where(denom > 0.0, np.clip((b * f - c * e) / np.where(denom > 0.0, denom, 1.0), 0.0, 1.0), 0.0)
    t = np.where(e > 0.0, (b * s + f) / np.where(e > 0.0, e, 1.0), 0.0)
    t_clamped = np.clip(t, 0.0, 1.0)
    s = np.where(
        a > 0.0,
        np.clip((b * t_clamped - c) / np.where(a > 0.0, a, 1.0), 0.0, 1.0),
        0.0,
    )
    diff = p1 + s[..., None] * d1 - (q1 + t_clamped[..., None] * d2)
    return np.linalg.norm(diff, axis=-1)


def _nonadjacent_edge_pairs(n: int):
    i, j = np.triu_indices(n, k=2)
    #  wrap adjacency: edge 0 shares a vertex with edge n-1
    keep = ~((i == 0) & (j == n - 1))
    return i[keep], j[keep]


def min_pair_distance(curve_or_positions) -> float:
    """Minimum distance between nonadjacent edges of the inscribed polygon."""
    if isinstance(curve_or_positions, HermiteCurve):
        positions = curve_or_positions.positions
    else:
        positions = np.asarray(curve_or_positions, dtype=float)
    n = positions.shape[0]
    nxt = np.roll(positions, -1, axis=0)
    i, j = _nonadjacent_edge_pairs(n)
    dist = _segment_pair_distance(positions[i], nxt[i], positions[j], nxt[j])
    return float(np.min(dist))


def _golden_section_max(fun, lo, hi, iterations=40):
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iterations):
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fun(d)
        else:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(c)
    x = 0.5 * (a + b)
    return x, fun(x)


def bilipschitz(curve: HermiteCurve, sample_density: int = 8) -> float:
    """Largest ratio of periodic parameter distance to spatial distance.

    Estimated on sample_density parameters per segment, then sharpened by
    alternating golden-section sweeps around the sampled maximizer.  The local
    limit 1/min|u'| is always honored as a lower bound.
    """
    if sample_density < 1:
        raise ValueError("sample_density must be at least 1")
    part = curve.partition
    offsets = (np.arange(sample_density) + 0.5) / sample_density
    params = (part.nodes[:, None] + part.widths[:, None] * offsets[None, :]).ravel()
    params = np.mod(params, 1.0)
    points = curve.evaluate(params, order=0)
    sampled = np.linalg.norm(curve.evaluate(params, order=1), axis=1)
    nodal = np.linalg.norm(curve.derivatives, axis=1)
    min_speed = float(min(np.min(sampled), np.min(nodal)))
    if min_speed <= 0.0:
        raise NonEmbeddedError("vanishing tangent")
    local_bound = 1.0 / min_speed

    m = params.size
    best = 0.0
    best_pair = (0.0, 0.5)
    block = 512
    for start in range(0, m, block):
        px = params[start : start + block]
        dx = px[:, None] - params[None, :]
        per = np.abs(dx - np.round(dx))
        sep = np.linalg.norm(
            points[start : start + block, None, :] - points[None, :, :], axis=-1
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(per > 0.0, per / sep, 0.0)
        if not np.all(np.isfinite(ratio)):
            raise NonEmbeddedError("coincident points at distinct parameters")
        k = int(np.argmax(ratio))
        val = float(ratio.flat[k])
        if val > best:
            best = val
            best_pair = (float(px[k // m]), float(params[k % m]))

    def ratio_at(x, y):
        dx = x - y
        per = abs(dx - round(dx))
        if per == 0.0:
            return 0.0
        sep = np.linalg.norm(
            curve.evaluate(np.mod(x, 1.0), order=0)
            - curve.evaluate(np.mod(y, 1.0), order=0)
        )
        if sep == 0.0:
            raise NonEmbeddedError("coincident points at distinct parameters")
        return per / sep

    x_star, y_star = best_pair
    width = 1.0 / (part.nodes.size * sample_density)
    for _ in range(3):
        x_star, _ = _golden_section_max(
            lambda x: ratio_at(x, y_star), x_star - width, x_star + width
        )
        y_star, best_here = _golden_section_max(
            lambda y: ratio_at(x_star, y), y_star - width, y_star + width
        )
        best = max(best, best_here)

    result = max(best, local_bound)
    if not np.isfinite(result) or result > OVERLAP_RATIO_LIMIT:
        raise NonEmbeddedError("parameter/space distance ratio diverged")
    return float(result)


def _triple(x, y, z):
    return np.einsum("...i,...i->...", x, np.cross(y, z))


def _coplanarity_coeffs(sa0, sav, sb0, sbv, ta0, tav, tb0, tbv):
    """Cubic coefficients of det[b-a, d-c, c-a] in the blend parameter.

    Endpoints move linearly, a(s) = a0 + s av and so on; returns (c3, c2, c1,
    c0) arrays over the pair batch.
    """
    u0, u1 = sb0 - sa0, sbv - sav
    v0, v1 = tb0 - ta0, tbv - tav
    w0, w1 = ta0 - sa0, tav - sav
    c0 = _triple(u0, v0, w0)
    c1 = _triple(u1, v0, w0) + _triple(u0, v1, w0) + _triple(u0, v0, w1)
    c2 = _triple(u1, v1, w0) + _triple(u1, v0, w1) + _triple(u0, v1, w1)
    c3 = _triple(u1, v1, w1)
    return c3, c2, c1, c0


def _batched_cubic_roots(c3, c2, c1, c0):
    """Real roots in [0,1] of a batch of cubics, padded with zeros.

    Rows with an identically vanishing polynomial get all-zero placeholders;
    they are covered by the caller's dense distance sweep.
    """
    k = c3.shape[0]
    roots = np.zeros((k, 3))
    scale = np.maximum.reduce([np.abs(c3), np.abs(c2), np.abs(c1), np.abs(c0)])
    tiny = 1.0e-13 * np.where(scale > 0.0, scale, 1.0)

    cubic = np.abs(c3) > tiny
    if np.any(cubic):
        comp = np.zeros((int(np.sum(cubic)), 3, 3))
        comp[:, 0, 0] = -c2[cubic] / c3[cubic]
        comp[:, 0, 1] = -c1[cubic] / c3[cubic]
        comp[:, 0, 2] = -c0[cubic] / c3[cubic]
        comp[:, 1, 0] = 1.0
        comp[:, 2, 1] = 1.0
        eig = np.linalg.eigvals(comp)
        real = np.where(np.abs(eig.imag) < 1.0e-8, eig.real, 0.0)
        roots[cubic] = real

    quad = (~cubic) & (np.abs(c2) > tiny)
    if np.any(quad):
        disc = c1[quad] ** 2 - 4.0 * c2[quad] * c0[quad]
        safe = np.sqrt(np.maximum(disc, 0.0))
        r1 = np.where(disc >= 0.0, (-c1[quad] + safe) / (2.0 * c2[quad]), 0.0)
        r2 = np.where(disc >= 0.0, (-c1[quad] - safe) / (2.0 * c2[quad]), 0.0)
        roots[quad, 0] = r1
        roots[quad, 1] = r2

    lin = (~cubic) & (~quad) & (np.abs(c1) > tiny)
    if np.any(lin):
        roots[lin, 0] = -c0[lin] / c1[lin]

    return np.clip(roots, 0.0, 1.0)


def isotopy_monitor(curve_prev: HermiteCurve, curve_curr: HermiteCurve) -> bool:
    """True iff no nonadjacent polygon edge pair crosses between the steps.

    Vertices are interpolated linearly in a blend parameter s in [0,1]; a
    crossing requires an instant where the two segments are coplanar and
    intersect, so candidate instants are the roots of the coplanarity cubic
    plus a dense sweep that covers degenerate coplanar motion.  Near-tangency
    below a small fraction of the length counts as a crossing so the answer
    errs on the safe side.
    """
    p_prev = curve_prev.positions
    p_curr = curve_curr.positions
    if p_prev.shape != p_curr.shape:
        raise ValueError("curves must share a partition")
    if not np.allclose(curve_prev.partition.nodes, curve_curr.partition.nodes):
        raise ValueError("curves must share a partition")

    n = p_prev.shape[0]
    margin = CONTACT_MARGIN * curve_curr.polyline_length

    a0 = p_prev
    a1 = np.roll(p_prev, -1, axis=0)
    b0 = p_curr
    b1 = np.roll(p_curr, -1, axis=0)

    # swept bounding boxes per edge, inflated by the contact margin
    lo = np.minimum.reduce([a0, a1, b0, b1]) - margin
    hi = np.maximum.reduce([a0, a1, b0, b1]) + margin
    i, j = _nonadjacent_edge_pairs(n)
    overlap = np.all(lo[i] <= hi[j], axis=1) & np.all(lo[j] <= hi[i], axis=1)
    i, j = i[overlap], j[overlap]
    if i.size == 0:
        return True

    sa0, sav = a0[i], b0[i] - a0[i]
    sb0, sbv = a1[i], b1[i] - a1[i]
    ta0, tav = a0[j], b0[j] - a0[j]
    tb0, tbv = a1[j], b1[j] - a1[j]

    roots = _batched_cubic_roots(
        *_coplanarity_coeffs(sa0, sav, sb0, sbv, ta0, tav, tb0, tbv)
    )
    grid = np.broadcast_to(np.linspace(0.0, 1.0, 17), (i.size, 17))
    instants = np.concatenate([grid, roots], axis=1)

    s = instants[:, :, None]
    pa = sa0[:, None, :] + s * sav[:, None, :]
    pb = sb0[:, None, :] + s * sbv[:, None, :]
    qa = ta0[:, None, :] + s * tav[:, None, :]
    qb = tb0[:, None, :] + s * tbv[:, None, :]
    dist = _segment_pair_distance(pa, pb, qa, qb)
    return bool(np.min(dist) >= margin)
