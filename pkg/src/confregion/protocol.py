"""Repeated train/test evaluation: split, preprocess, train, forecast, score."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import learners
from .crc import DEFAULT_GRID, DEFAULT_LOOSE_TOLERANCE, CalibrationVerdict, CrcCurve, compute_crc_curve, verdict
from .dataset_io import SPLIT_PRNG, Dataset, DatasetError, SplitPlan, fit_preprocessor, preprocess, split
from .forecast import ForecastSet
from .learners import LearnerConfig
from .metrics import ForecastScore, score_forecasts


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeedResult:
    seed: int
    n_train: int
    n_test: int
    score: ForecastScore
    curve: CrcCurve
    verdict: CalibrationVerdict
    forecasts: ForecastSet


@dataclass(frozen=True)
class ProtocolReport:
    dataset: str
    config: LearnerConfig
    plan: SplitPlan
    preprocess_scope: str
    grid_intervals: int
    loose_tolerance: float
    runs: tuple[SeedResult, ...]

    def mean(self) -> dict:
        """Arithmetic means over seeds; the verdict flags judge the mean area."""
        k = len(self.runs)
        err_rate = sum(r.score.error_rate_percent for r in self.runs) / k
        loss = sum(r.score.square_loss for r in self.runs) / k
        above = sum(r.verdict.err_above_area for r in self.runs) / k
        width = sum(r.verdict.avg_width_area for r in self.runs) / k
        return {
            "error_rate_percent": err_rate,
            "square_loss": loss,
            "crc_err_above_area": above,
            "crc_avg_width_area": width,
            "strict_calibrated": above == 0.0,
            "loose_calibrated": above <= self.loose_tolerance,
        }

    def to_dict(self) -> dict:
        cfg = {"kind": self.config.kind}
        if self.config.kind == "dwknn":
            cfg["k"] = self.config.k
        else:
            cfg["variance_floor"] = self.config.variance_floor
            cfg["laplace_alpha"] = self.config.laplace_alpha
        return {
            "dataset": self.dataset,
            "learner": cfg,
            "split": {
                "train_fraction": self.plan.train_fraction,
                "seeds": list(self.plan.seeds),
                "prng": SPLIT_PRNG,
            },
            "preprocess_scope": self.preprocess_scope,
            "grid_intervals": self.grid_intervals,
            "loose_tolerance": self.loose_tolerance,
            "seeds": [
                {
                    "seed": r.seed,
                    "n_train": r.n_train,
                    "n_test": r.n_test,
                    "error_rate_percent": r.score.error_rate_percent,
                    "square_loss": r.score.square_loss,
                    "crc_err_above_area": r.verdict.err_above_area,
                    "crc_avg_width_area": r.verdict.avg_width_area,
                    "strict_calibrated": r.verdict.strict_calibrated,
                    "loose_calibrated": r.verdict.loose_calibrated,
                }
                for r in self.runs
            ],
            "mean": self.mean(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def run_protocol(
    data: Dataset,
    config: LearnerConfig,
    plan: SplitPlan = SplitPlan(),
    grid_intervals: int = DEFAULT_GRID,
    loose_tolerance: float = DEFAULT_LOOSE_TOLERANCE,
    preprocess_scope: Literal["train", "all"] = "train",
) -> ProtocolReport:
    """Evaluate one learner on ``data`` once per split seed.

    ``preprocess_scope="train"`` fits imputation and scaling on each training
    half; ``"all"`` fits them once on the whole dataset before splitting.
    """
    if preprocess_scope not in ("train", "all"):
        raise ProtocolError(f"unknown preprocess scope {preprocess_scope!r}")
    labelled = data.class_labels(allow_missing=True) >= 0
    if not labelled.all():
        data = data.take(np.flatnonzero(labelled))
    global_pre = fit_preprocessor(data) if preprocess_scope == "all" else None
    runs = []
    for seed in plan.seeds:
        try:
            train, test = split(data, plan, seed)
            if global_pre is not None:
                train, test = global_pre.transform(train), global_pre.transform(test)
            else:
                train, test = preprocess(train, test)
            model = learners.train(train, config)
            fs = learners.forecast_dataset(model, test)
            curve = compute_crc_curve(fs, grid_intervals)
            runs.append(
                SeedResult(seed, train.n_rows, test.n_rows, score_forecasts(fs), curve,
                           verdict(curve, loose_tolerance), fs)
            )
        except (DatasetError, learners.LearnerError, ValueError) as exc:
            raise ProtocolError(f"seed {seed}: {exc}") from exc
    return ProtocolReport(data.name, config, plan, preprocess_scope, grid_intervals,
                          float(loose_tolerance), tuple(runs))
