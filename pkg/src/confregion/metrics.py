"""Region quality (error and width) and forecast quality (error rate, square loss)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .forecast import ForecastSet, RegionPrediction, as_forecast_set


@dataclass(frozen=True)
class RegionScore:
    err_fraction: float
    avg_width: float
    delta: float
    n: int


@dataclass(frozen=True)
class ForecastScore:
    error_rate_percent: float
    square_loss: float
    n: int


def err_indicator(region: RegionPrediction, true_label: int) -> int:
    """1 if the true label was left out of the region, else 0."""
    if not 0 <= true_label < region.num_labels:
        raise ValueError(f"true label {true_label} outside [0, {region.num_labels})")
    return 0 if true_label in region else 1


def unc_fraction(region: RegionPrediction) -> float:
    """Fraction of all labels that the region predicts."""
    return len(region) / region.num_labels


def score_regions(regions: Sequence[RegionPrediction], true_labels: Sequence[int]) -> RegionScore:
    """Average error indicator and width over a batch of regions."""
    if len(regions) != len(true_labels):
        raise ValueError(f"{len(regions)} regions but {len(true_labels)} true labels")
    if not regions:
        raise ValueError("cannot score an empty batch")
    deltas = {r.delta for r in regions}
    if len(deltas) > 1:
        raise ValueError(f"regions mix confidence levels: {sorted(deltas)}")
    errs = [err_indicator(r, int(y)) for r, y in zip(regions, true_labels)]
    widths = [unc_fraction(r) for r in regions]
    n = len(regions)
    return RegionScore(sum(errs) / n, sum(widths) / n, regions[0].delta, n)


def _labelled(forecasts) -> ForecastSet:
    fs = as_forecast_set(forecasts)
    if len(fs) == 0:
        raise ValueError("no forecasts to score")
    if not fs.has_labels:
        missing = [eid for eid, y in zip(fs.example_ids, fs.labels) if y < 0]
        raise ValueError(f"forecasts without a true label: {missing[:5]}")
    return fs


def error_rate(forecasts) -> float:
    """Percentage of forecasts whose top label is wrong.

    Ties for the top probability go to the lowest label id.
    """
    fs = _labelled(forecasts)
    predicted = np.argmax(fs.probs, axis=1)
    return 100.0 * float(np.mean(predicted != fs.labels))


def square_loss(forecasts) -> float:
    """Brier score summed over labels and averaged over examples (range [0, 2])."""
    fs = _labelled(forecasts)
    target = np.zeros_like(fs.probs)
    target[np.arange(len(fs)), fs.labels] = 1.0
    return float(np.mean(np.sum((fs.probs - target) ** 2, axis=1)))


def score_forecasts(forecasts) -> ForecastScore:
    fs = _labelled(forecasts)
    return ForecastScore(error_rate(fs), square_loss(fs), len(fs))
