"""Artifact persistence: diagnostics CSV, curve snapshots, polyline export.

All floating text output is written at 17 significant digits so reruns are
diffable and JSON round-trips reproduce the arrays bitwise.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .curve import HermiteCurve
from .diagnostics import DiagnosticsRecord

__all__ = [
    "ENERGY_COLUMNS",
    "SNAPSHOT_FORMAT",
    "curvature_attribute",
    "export_curve",
    "load_snapshot",
    "save_snapshot",
    "write_energy_csv",
]

ENERGY_COLUMNS = (
    "step",
    "e_total",
    "e_bend",
    "e_tp_weighted",
    "length",
    "arclength_dev",
    "min_pair_dist",
    "stable",
    "isotopy_ok",
)

SNAPSHOT_FORMAT = "knotflow-snapshot"


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _energy_row(record: DiagnosticsRecord) -> str:
    return ",".join(
        [
            str(record.step),
            _fmt(record.e_total),
            _fmt(record.e_bend),
            _fmt(record.e_tp_weighted),
            _fmt(record.length),
            _fmt(record.arclength_dev),
            _fmt(record.min_pair_dist),
            "true" if record.stable else "false",
            "true" if record.isotopy_ok else "false",
        ]
    )


def write_energy_csv(path: str | Path, records: Iterable[DiagnosticsRecord]) -> Path:
    """One header line plus one row per record, in stream order."""
    path = Path(path)
    lines = [",".join(ENERGY_COLUMNS)]
    lines.extend(_energy_row(r) for r in records)
    path.write_text("\n".join(lines) + "\n")
    return path


def save_snapshot(
    path: str | Path,
    curve: HermiteCurve,
    step: int = 0,
    seed: int = 0,
    extra: dict | None = None,
) -> Path:
    """JSON state file; arrays round-trip bitwise through float repr."""
    path = Path(path)
    payload = {
        "format": SNAPSHOT_FORMAT,
        "version": 1,
        "step": int(step),
        "seed": int(seed),
        "speed": curve.speed,
        "curve": curve.to_snapshot(),
    }
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=1) + "\n")
    return path


def load_snapshot(path: str | Path) -> tuple[HermiteCurve, dict]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"{path} is not a {SNAPSHOT_FORMAT} file")
    try:
        curve = HermiteCurve.from_snapshot(payload["curve"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: bad curve data: {exc}") from exc
    meta = {k: v for k, v in payload.items() if k != "curve"}
    return curve, meta


def curvature_attribute(curve: HermiteCurve) -> np.ndarray:
    """Nodal curvature |u' x u''| / |u'|^3, one value per node.

    The second derivative jumps across nodes for a C^1 spline, so the two
    one-sided limits are averaged; the quotient is parametrization invariant
    and so carries physical units of inverse length.
    """
    n = curve.n
    nodes = curve.partition.nodes
    widths = curve.partition.widths
    eps = 1.0e-9
    right = curve.evaluate((nodes + eps * widths) % 1.0, order=2)
    left = curve.evaluate((nodes - eps * np.roll(widths, 1)) % 1.0, order=2)
    second = 0.5 * (left + right)
    first = curve.derivatives
    cross = np.cross(first, second)
    speed = np.linalg.norm(first, axis=1)
    return np.linalg.norm(cross, axis=1) / speed**3


def export_curve(
    path: str | Path, curve: HermiteCurve, fmt: str = "obj"
) -> tuple[Path, Path | None]:
    """Closed polyline with per-vertex curvature.

    ``obj`` writes vertices, a closing repeat of the first vertex, and one
    polyline element, with the curvature values in a sibling ``.curv.csv``
    file aligned line-for-line with the vertices.  ``csv`` writes a single
    table with positions and curvature.  Returns (main file, attribute file).
    """
    path = Path(path)
    kappa = curvature_attribute(curve)
    closed_pos = np.concatenate([curve.positions, curve.positions[:1]], axis=0)
    closed_kappa = np.concatenate([kappa, kappa[:1]])

    if fmt == "obj":
        lines = [f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}" for p in closed_pos]
        lines.append("l " + " ".join(str(i + 1) for i in range(closed_pos.shape[0])))
        path.write_text("\n".join(lines) + "\n")
        attr = path.with_suffix(".curv.csv")
        attr.write_text(
            "curvature\n" + "\n".join(_fmt(k) for k in closed_kappa) + "\n"
        )
        return path, attr
    if fmt == "csv":
        lines = ["x,y,z,curvature"]
        lines.extend(
            f"{_fmt(p[0])},{_fmt(p[1])},{_fmt(p[2])},{_fmt(k)}"
            for p, k in zip(closed_pos, closed_kappa)
        )
        path.write_text("\n".join(lines) + "\n")
        return path, None
    raise ValueError(f"unknown export format {fmt!r}")
