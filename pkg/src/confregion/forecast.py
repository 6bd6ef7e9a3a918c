"""Probability forecasts and their conversion into confidence regions.

A forecast assigns a probability to every label.  At confidence level
``1 - delta`` the region keeps the most probable labels and drops the least
probable ones for as long as the dropped mass stays strictly below ``delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

#: Forecasts whose entries sum to within this distance of 1 are renormalized;
#: anything further away is rejected as corrupt.
SUM_TOLERANCE = 5e-3


class ForecastError(ValueError):
    """Raised when a forecast violates the probability-vector contract."""


@dataclass(frozen=True)
class LabelSpace:
    """Ordered, named label set.  Label ids are positions in ``names``."""

    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) < 2:
            raise ValueError("a label space needs at least two labels")
        if any(not n for n in self.names):
            raise ValueError("label names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate label names in {self.names}")

    def __len__(self) -> int:
        return len(self.names)

    @property
    def num_labels(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown label {name!r}") from None


def normalize_probs(probs: Iterable[float], tol: float = SUM_TOLERANCE) -> tuple[float, ...]:
    """Validate a probability vector and renormalize it to sum to 1.

    Entries outside [0, 1] are always rejected, never clipped.  A vector whose
    sum is within ``tol`` of 1 is divided by its sum; otherwise it is rejected.
    """
    values = tuple(float(p) for p in probs)
    if not values:
        raise ForecastError("empty probability vector")
    for j, p in enumerate(values):
        if not (0.0 <= p <= 1.0):  # also catches NaN
            raise ForecastError(f"probability {p!r} at position {j} is outside [0, 1]")
    total = math.fsum(values)
    if abs(total - 1.0) > tol:
        raise ForecastError(f"probabilities sum to {total:.6g}, more than {tol:g} away from 1")
    if total != 1.0:
        values = tuple(p / total for p in values)
    return values


@dataclass(frozen=True)
class ForecastVector:
    """One example's forecast.  ``probs`` is normalized on construction."""

    example_id: str
    probs: tuple[float, ...]
    true_label: int | None = None

    def __post_init__(self):
        try:
            probs = normalize_probs(self.probs)
        except ForecastError as exc:
            raise ForecastError(f"example {self.example_id!r}: {exc}") from None
        object.__setattr__(self, "probs", probs)
        if self.true_label is not None:
            label = int(self.true_label)
            if not 0 <= label < len(probs):
                raise ForecastError(
                    f"example {self.example_id!r}: true label {label} outside [0, {len(probs)})"
                )
            object.__setattr__(self, "true_label", label)

    @property
    def num_labels(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class RegionPrediction:
    """Labels predicted at confidence ``1 - delta``.

    ``members`` lists label ids by descending probability, so the most likely
    label comes first.
    """

    example_id: str
    delta: float
    members: tuple[int, ...]
    excluded_mass: float
    num_labels: int
    member_set: frozenset[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "member_set", frozenset(self.members))

    def __contains__(self, label: int) -> bool:
        return label in self.member_set

    def __len__(self) -> int:
        return len(self.members)


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta!r}")
    return delta


def sort_forecasts(forecast: ForecastVector) -> list[tuple[int, float]]:
    """Return ``(label, probability)`` pairs in ascending probability.

    Ties are broken by ascending label id, which makes the order total.
    """
    return sorted(enumerate(forecast.probs), key=lambda pair: (pair[1], pair[0]))


def build_region(forecast: ForecastVector, delta: float) -> RegionPrediction:
    """Convert a forecast into a confidence region at level ``1 - delta``.

    Walking the ascending order, the region starts at the last position ``k``
    whose strict prefix mass is still below ``delta``.  With ``delta == 0`` no
    position qualifies and the whole label set is returned.
    """
    delta = _check_delta(delta)
    ordered = sort_forecasts(forecast)
    start = 0
    prefix = 0.0
    excluded = 0.0
    # prefix is the mass strictly before position k
    for k, (_, p) in enumerate(ordered):
        if prefix < delta:
            start = k
            excluded = prefix
        else:
            break
        prefix += p
    members = tuple(label for label, _ in reversed(ordered[start:]))
    return RegionPrediction(
        example_id=forecast.example_id,
        delta=delta,
        members=members,
        excluded_mass=excluded,
        num_labels=forecast.num_labels,
    )


def build_regions_batch(forecasts: Sequence[ForecastVector], delta: float) -> list[RegionPrediction]:
    """Element-wise :func:`build_region`, preserving input order."""
    delta = _check_delta(delta)
    if forecasts:
        width = forecasts[0].num_labels
        for fv in forecasts:
            if fv.num_labels != width:
                raise ForecastError(
                    f"example {fv.example_id!r} has {fv.num_labels} labels, expected {width}"
                )
    return [build_region(fv, delta) for fv in forecasts]


# -- array path -------------------------------------------------------------


def ascending_order(probs: np.ndarray) -> np.ndarray:
    """Row-wise ascending argsort with ties broken by lower label id first."""
    return np.argsort(probs, axis=1, kind="stable")


def region_masks(probs: np.ndarray, delta: float, order: np.ndarray | None = None) -> np.ndarray:
    """Vectorized region membership for a ``(n, labels)`` probability matrix.

    Returns a boolean matrix with the same shape.  Agrees exactly with
    :func:`build_region` applied row by row; pass a precomputed ``order`` to
    avoid re-sorting when sweeping many ``delta`` values.
    """
    delta = _check_delta(delta)
    probs = np.asarray(probs, dtype=float)
    n, m = probs.shape
    if order is None:
        order = ascending_order(probs)
    sorted_p = np.take_along_axis(probs, order, axis=1)
    # strict prefix mass before each sorted position, accumulated left to right
    prefix = np.zeros_like(sorted_p)
    if m > 1:
        prefix[:, 1:] = np.cumsum(sorted_p[:, :-1], axis=1)
    start = np.maximum((prefix < delta).sum(axis=1) - 1, 0)
    keep_sorted = np.arange(m)[None, :] >= start[:, None]
    mask = np.zeros((n, m), dtype=bool)
    np.put_along_axis(mask, order, keep_sorted, axis=1)
    return mask


@dataclass(frozen=True)
class ForecastSet:
    """A batch of forecasts held as arrays.

    ``labels`` uses -1 for examples without a known true label.
    """

    probs: np.ndarray
    labels: np.ndarray
    example_ids: tuple[str, ...] = ()
    label_space: LabelSpace | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2:
            raise ForecastError("probability matrix must be two-dimensional")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != probs.shape[0]:
            raise ForecastError("labels and probability rows differ in length")
        ids = tuple(self.example_ids) or tuple(str(i) for i in range(probs.shape[0]))
        if len(ids) != probs.shape[0]:
            raise ForecastError("example ids and probability rows differ in length")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "example_ids", ids)

    def __len__(self) -> int:
        return self.probs.shape[0]

    @property
    def num_labels(self) -> int:
        return self.probs.shape[1]

    @property
    def has_labels(self) -> bool:
        return bool(np.all(self.labels >= 0))

    @classmethod
    def from_vectors(cls, forecasts: Sequence[ForecastVector], label_space: LabelSpace | None = None):
        if not forecasts:
            m = label_space.num_labels if label_space else 0
            return cls(np.zeros((0, m)), np.zeros(0, dtype=np.int64), (), label_space)
        width = forecasts[0].num_labels
        if any(fv.num_labels != width for fv in forecasts):
            raise ForecastError("forecasts do not share one label space")
        probs = np.array([fv.probs for fv in forecasts], dtype=float)
        labels = np.array([-1 if fv.true_label is None else fv.true_label for fv in forecasts])
        return cls(probs, labels, tuple(fv.example_id for fv in forecasts), label_space)

    def vectors(self) -> list[ForecastVector]:
        return [
            ForecastVector(eid, tuple(row), None if y < 0 else int(y))
            for eid, row, y in zip(self.example_ids, self.probs.tolist(), self.labels.tolist())
        ]


def as_forecast_set(forecasts) -> ForecastSet:
    if isinstance(forecasts, ForecastSet):
        return forecasts
    return ForecastSet.from_vectors(list(forecasts))
