"""Synthetic tasks with known conditionals for checking region calibration.

A Bayes-optimal forecaster reports the true conditional distribution.  Its
regions should err at level ``1 - delta`` with frequency at most ``delta``,
and the chance that the observed error exceeds ``delta + epsilon`` on ``n``
examples is at most ``exp(-2 epsilon^2 n)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .forecast import ForecastSet, ForecastVector, region_masks

#: Bumped whenever the default conditional family changes.
TASK_VERSION = 1
_COEF_SEED = 20050101
_COEF_SCALE = 4.0


def default_coefficients(num_labels: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed softmax-linear coefficients: weights ``(labels, dim)``, biases ``(labels,)``.

    Drawn from a dedicated generator so they never depend on the task seed.
    Scaled so the conditionals spread over (0, 1) instead of piling up at the
    corners of the simplex.
    """
    rng = np.random.Generator(np.random.PCG64([_COEF_SEED, num_labels, dim]))
    weights = rng.normal(0.0, _COEF_SCALE, size=(num_labels, dim))
    biases = -0.5 * weights.sum(axis=1)  # centres each logit on the unit cube
    return weights, biases


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sharpen(probs: np.ndarray, temperature: float) -> np.ndarray:
    """Raise to ``1 / temperature`` and renormalize (computed in log space)."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    probs = np.asarray(probs, dtype=float)
    if temperature == 1.0:
        return probs.copy()
    with np.errstate(divide="ignore"):
        logp = np.log(probs) / temperature
    return _softmax(logp)


@dataclass(frozen=True)
class SyntheticTask:
    """Objects uniform on ``[0, 1]^dim``, labels from a known conditional.

    ``conditional`` overrides the default softmax-linear family; it maps an
    ``(n, dim)`` object matrix to an ``(n, num_labels)`` probability matrix.
    ``temperature`` distorts only the reported forecasts, never the labels.
    """

    num_labels: int = 3
    dim: int = 2
    seed: int = 0
    temperature: float = 1.0
    conditional: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.num_labels < 2:
            raise ValueError("a task needs at least two labels")
        if self.dim < 1:
            raise ValueError("object dimension must be at least 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    def true_conditionals(self, objects: np.ndarray) -> np.ndarray:
        if self.conditional is not None:
            p = np.asarray(self.conditional(objects), dtype=float)
        else:
            w, b = default_coefficients(self.num_labels, self.dim)
            p = _softmax(objects @ w.T + b)
        if p.shape != (objects.shape[0], self.num_labels):
            raise ValueError(f"conditional returned shape {p.shape}")
        return p


def _sample(task: SyntheticTask, n: int, rng: np.random.Generator) -> ForecastSet:
    objects = rng.random((n, task.dim))
    cond = task.true_conditionals(objects)
    cdf = np.cumsum(cond, axis=1)
    u = rng.random(n)[:, None]
    labels = np.minimum((u >= cdf).sum(axis=1), task.num_labels - 1)
    return ForecastSet(sharpen(cond, task.temperature), labels)


def sample_arrays(task: SyntheticTask, n: int, stream: int = 0) -> ForecastSet:
    """Draw ``n`` labelled forecasts; ``stream`` selects an independent sub-seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.PCG64([task.seed, stream]))
    return _sample(task, n, rng)


def sample_batch(task: SyntheticTask, n: int) -> list[ForecastVector]:
    return sample_arrays(task, n).vectors()


def perturb_forecaster(task: SyntheticTask, temperature: float) -> SyntheticTask:
    """Same task, forecasts sharpened (< 1) or flattened (> 1)."""
    return replace(task, temperature=float(temperature))


def hoeffding_bound(n: int, epsilon: float) -> float:
    return math.exp(-2.0 * epsilon * epsilon * n)


def binomial_threshold(bound: float, trials: int, sigmas: float = 3.0) -> float:
    """Bound plus ``sigmas`` standard deviations of a Binomial(trials, bound) frequency."""
    return bound + sigmas * math.sqrt(bound * (1.0 - bound) / trials)


@dataclass(frozen=True)
class BoundCheck:
    n: int
    delta: float
    epsilon: float
    trials: int
    observed_failure_freq: float
    bound: float
    threshold: float
    mean_err: float
    temperature: float = 1.0
    seed: int = 0

    @property
    def passed(self) -> bool:
        return self.observed_failure_freq <= self.threshold

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "observed_failure_freq": self.observed_failure_freq,
            "bound": self.bound,
            "pass": self.passed,
            "threshold": self.threshold,
            "mean_err": self.mean_err,
            "temperature": self.temperature,
            "seed": self.seed,
            "task_version": TASK_VERSION,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def trial_errors(task: SyntheticTask, n: int, delta: float, trials: int) -> np.ndarray:
    """Region error fraction at ``1 - delta`` for each independent trial."""
    out = np.empty(trials)
    for t in range(trials):
        fs = sample_arrays(task, n, stream=t)
        mask = region_masks(fs.probs, delta)
        out[t] = np.mean(~mask[np.arange(n), fs.labels])
    return out


def check_theorem1(task: SyntheticTask, n: int = 1000, delta: float = 0.1,
                   epsilon: float = 0.05, trials: int = 200) -> BoundCheck:
    """Monte-Carlo frequency of ``Err >= delta + epsilon`` against the Hoeffding bound."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    if trials < 1 or n < 1:
        raise ValueError("n and trials must be at least 1")
    errs = trial_errors(task, n, delta, trials)
    failures = float(np.mean(errs >= delta + epsilon))
    bound = hoeffding_bound(n, epsilon)
    return BoundCheck(n, float(delta), float(epsilon), trials, failures, bound,
                      binomial_threshold(bound, trials), float(errs.mean()),
                      task.temperature, task.seed)


def pooled_forecasts(task: SyntheticTask, n: int, trials: int) -> ForecastSet:
    """All trial batches stacked into one set, e.g. for a pooled CRC curve."""
    parts = [sample_arrays(task, n, stream=t) for t in range(trials)]
    return ForecastSet(np.vstack([p.probs for p in parts]), np.concatenate([p.labels for p in parts]))
