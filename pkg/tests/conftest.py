import numpy as np

from knotflow.curve import HermiteCurve, HermiteField, PeriodicPartition, from_samples


def fourier_maps(coeffs):
    """Closed map from a list of (cos_vec, sin_vec, frequency) triples."""

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (3,))
        for c, s, k in coeffs:
            w = 2.0 * np.pi * k
            out += np.asarray(c) * np.cos(w * x)[..., None]
            out += np.asarray(s) * np.sin(w * x)[..., None]
        return out

    def fp(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (3,))
        for c, s, k in coeffs:
            w = 2.0 * np.pi * k
            out += -w * np.asarray(c) * np.sin(w * x)[..., None]
            out += w * np.asarray(s) * np.cos(w * x)[..., None]
        return out

    return f, fp


def random_embedded_curve(seed, n=50):
    """Circle radius 1 plus a small random Fourier perturbation; well embedded."""
    rng = np.random.default_rng(seed)
    coeffs = [
        (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), 1),
    ]
    for k in range(2, 6):
        amp = 0.08 / (k * k)
        coeffs.append((rng.normal(scale=amp, size=3), rng.normal(scale=amp, size=3), k))
    f, fp = fourier_maps(coeffs)
    return from_samples(PeriodicPartition.uniform(n), f, fp)


def random_field(seed, n, scale=1.0):
    rng = np.random.default_rng(seed)
    return HermiteField(rng.normal(scale=scale, size=(n, 3)),
                        rng.normal(scale=scale, size=(n, 3)))


def shift_curve(curve, field, s):
    """curve + s * field as a new HermiteCurve."""
    return HermiteCurve(
        curve.partition,
        curve.positions + s * field.positions,
        curve.derivatives + s * field.derivatives,
    )
