"""knotflow: constrained H^2 gradient flow for self-avoiding elastic closed curves."""

from knotflow.curve import (
    CurveScale,
    DegenerateCurveError,
    HermiteCurve,
    HermiteField,
    PeriodicPartition,
    from_samples,
    rescale_to_length,
)

__all__ = [
    "CurveScale",
    "DegenerateCurveError",
    "HermiteCurve",
    "HermiteField",
    "PeriodicPartition",
    "from_samples",
    "rescale_to_length",
]

__version__ = "0.1.0"
