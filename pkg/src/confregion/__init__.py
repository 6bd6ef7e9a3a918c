"""Confidence region prediction from probability forecasts.

Convert per-label probability forecasts into label sets that should contain
the true label at a chosen confidence level, then measure how often they fail
and how wide they are across all confidence levels (CRC curves).
"""

from .crc import CalibrationVerdict, CrcCurve, avg_width_area, compute_crc_curve, err_above_area, verdict
from .forecast import (
    ForecastError,
    ForecastSet,
    ForecastVector,
    LabelSpace,
    RegionPrediction,
    build_region,
    build_regions_batch,
    region_masks,
    sort_forecasts,
)
from .metrics import err_indicator, error_rate, score_regions, square_loss, unc_fraction

__version__ = "0.1.0"

__all__ = [
    "CalibrationVerdict",
    "CrcCurve",
    "ForecastError",
    "ForecastSet",
    "ForecastVector",
    "LabelSpace",
    "RegionPrediction",
    "avg_width_area",
    "build_region",
    "build_regions_batch",
    "compute_crc_curve",
    "err_above_area",
    "err_indicator",
    "error_rate",
    "region_masks",
    "score_regions",
    "sort_forecasts",
    "square_loss",
    "unc_fraction",
    "verdict",
]
