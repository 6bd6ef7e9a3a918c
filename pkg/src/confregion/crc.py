"""Confidence Region Calibration (CRC) curves, deviation areas and verdicts.

A CRC curve records, for every ``delta`` on a uniform grid, the fraction of
test regions that missed their true label and the average region width.
Regions are well calibrated when the error never exceeds ``delta``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .forecast import ascending_order, as_forecast_set, region_masks

DEFAULT_GRID = 100
DEFAULT_LOOSE_TOLERANCE = 1e-4

CRC_HEADER = ("confidence", "delta", "err", "unc")


@dataclass(frozen=True)
class CrcCurve:
    deltas: tuple[float, ...]
    err: tuple[float, ...]
    unc: tuple[float, ...]
    n: int

    def __post_init__(self):
        if not (len(self.deltas) == len(self.err) == len(self.unc)):
            raise ValueError("curve columns differ in length")
        if len(self.deltas) < 2:
            raise ValueError("a curve needs at least two grid points")
        if self.deltas[0] != 0.0 or self.deltas[-1] != 1.0:
            raise ValueError("curve grid must run from delta 0 to delta 1")
        if any(b <= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise ValueError("curve grid must be strictly ascending")

    @property
    def grid_intervals(self) -> int:
        return len(self.deltas) - 1


@dataclass(frozen=True)
class CalibrationVerdict:
    err_above_area: float
    avg_width_area: float
    strict_calibrated: bool
    loose_calibrated: bool
    loose_tolerance: float


def delta_grid(intervals: int) -> np.ndarray:
    if intervals < 2:
        raise ValueError(f"grid needs at least 2 intervals, got {intervals}")
    return np.arange(intervals + 1) / intervals


def compute_crc_curve(forecasts, grid_intervals: int = DEFAULT_GRID) -> CrcCurve:
    """Score the regions of a labelled batch at every point of a uniform grid.

    Each grid point rebuilds its regions from the forecasts; the sort order is
    shared between points since it does not depend on ``delta``.
    """
    fs = as_forecast_set(forecasts)
    if len(fs) == 0:
        raise ValueError("no forecasts to evaluate")
    if not fs.has_labels:
        raise ValueError("every forecast needs a true label to build a CRC curve")
    grid = delta_grid(grid_intervals)
    order = ascending_order(fs.probs)
    rows = np.arange(len(fs))
    err, unc = [], []
    for delta in grid:
        mask = region_masks(fs.probs, float(delta), order=order)
        err.append(float(np.mean(~mask[rows, fs.labels])))
        unc.append(float(np.mean(mask.sum(axis=1) / fs.num_labels)))
    return CrcCurve(tuple(float(d) for d in grid), tuple(err), tuple(unc), len(fs))


def err_above_area(curve: CrcCurve) -> float:
    """Area where the error line rises above the diagonal ``err = delta``.

    Trapezium rule on ``max(0, err - delta)``; an interval in which the sign
    changes contributes only the triangle up to the linear crossing point.
    """
    d = np.asarray(curve.deltas)
    f = np.asarray(curve.err) - d
    total = 0.0
    for i in range(len(d) - 1):
        h = d[i + 1] - d[i]
        a, b = f[i], f[i + 1]
        if a >= 0 and b >= 0:
            total += 0.5 * (a + b) * h
        elif a > 0 > b:
            total += 0.5 * a * (h * a / (a - b))
        elif b > 0 > a:
            total += 0.5 * b * (h * b / (b - a))
    return float(total)


def avg_width_area(curve: CrcCurve) -> float:
    """Trapezium-rule area under the average region width line."""
    d = np.asarray(curve.deltas)
    u = np.asarray(curve.unc)
    return float(np.sum(0.5 * (u[1:] + u[:-1]) * np.diff(d)))


def verdict(curve: CrcCurve, loose_tolerance: float = DEFAULT_LOOSE_TOLERANCE) -> CalibrationVerdict:
    if loose_tolerance < 0:
        raise ValueError("loose tolerance must be non-negative")
    above = err_above_area(curve)
    return CalibrationVerdict(
        err_above_area=above,
        avg_width_area=avg_width_area(curve),
        strict_calibrated=above == 0.0,
        loose_calibrated=above <= loose_tolerance,
        loose_tolerance=float(loose_tolerance),
    )


# -- serialization ------------------------------------------------------------


def crc_table_text(curve: CrcCurve) -> str:
    """CRC table as CSV text, confidence descending from 1.0."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CRC_HEADER)
    for d, e, u in zip(curve.deltas, curve.err, curve.unc):
        writer.writerow([repr(1.0 - d), repr(d), repr(e), repr(u)])
    return buf.getvalue()


def summary_dict(curve: CrcCurve, v: CalibrationVerdict) -> dict:
    return {
        "n": curve.n,
        "grid_intervals": curve.grid_intervals,
        "err_above_area": v.err_above_area,
        "avg_width_area": v.avg_width_area,
        "strict_calibrated": v.strict_calibrated,
        "loose_calibrated": v.loose_calibrated,
        "loose_tolerance": v.loose_tolerance,
    }


def summary_text(curve: CrcCurve, v: CalibrationVerdict) -> str:
    return json.dumps(summary_dict(curve, v), indent=2) + "\n"


def emit_crc_data(curve: CrcCurve, v: CalibrationVerdict) -> tuple[str, str]:
    """Render the CRC table and JSON summary.  Writing is left to the caller."""
    if abs(err_above_area(curve) - v.err_above_area) > 1e-12:
        raise ValueError("verdict does not belong to this curve")
    return crc_table_text(curve), summary_text(curve, v)


def parse_crc_table(text: str, n: int = 0) -> CrcCurve:
    """Read a CRC table back.  Raises ``ValueError`` naming the bad line."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("CRC table is empty") from None
    if tuple(h.strip() for h in header) != CRC_HEADER:
        raise ValueError(f"line 1: expected header {','.join(CRC_HEADER)!r}, got {','.join(header)!r}")
    deltas, err, unc = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            _, d, e, u = (float(x) for x in row)
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric field in {row!r}") from None
        deltas.append(d)
        err.append(e)
        unc.append(u)
    if len(deltas) < 2:
        raise ValueError("CRC table needs at least two grid rows")
    return CrcCurve(tuple(deltas), tuple(err), tuple(unc), n)
