"""Built-in probability forecasters: distance-weighted K-NN and Naive Bayes.

Both work on a :class:`~confregion.dataset_io.Dataset` that has already been
preprocessed (no missing values, numerics scaled to [0, 1]).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .dataset_io import Dataset
from .forecast import ForecastError, ForecastSet, ForecastVector, LabelSpace, normalize_probs


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerConfig:
    kind: Literal["dwknn", "naivebayes"]
    k: int = 5
    variance_floor: float = 1e-9
    laplace_alpha: float = 1.0
    # "reject" refuses classes with no training rows; "zero" gives them prior 0
    empty_classes: Literal["reject", "zero"] = "reject"

    def __post_init__(self):
        if self.kind not in ("dwknn", "naivebayes"):
            raise LearnerError(f"unknown learner {self.kind!r}")
        if self.k < 1:
            raise LearnerError(f"k must be at least 1, got {self.k}")
        if not self.variance_floor > 0:
            raise LearnerError("variance floor must be positive")
        if self.laplace_alpha < 0:
            raise LearnerError("laplace alpha must be non-negative")
        if self.empty_classes not in ("reject", "zero"):
            raise LearnerError(f"unknown empty-class policy {self.empty_classes!r}")

    def describe(self) -> str:
        return f"DW{self.k}-NN" if self.kind == "dwknn" else "Naive Bayes"


def _encode_features(data: Dataset) -> np.ndarray:
    """Numeric columns as-is, nominal columns one-hot."""
    cols = []
    for j in data.schema.feature_indices:
        attr = data.schema.attributes[j]
        col = data.values[:, j]
        if np.isnan(col).any():
            raise LearnerError(f"attribute {attr.name!r} has missing values; preprocess first")
        if attr.is_nominal:
            onehot = np.zeros((len(col), len(attr.values)))
            onehot[np.arange(len(col)), col.astype(int)] = 1.0
            cols.append(onehot)
        else:
            cols.append(col[:, None])
    if not cols:
        return np.zeros((data.n_rows, 0))
    return np.hstack(cols)


# -- distance-weighted K-NN ---------------------------------------------------


@dataclass(frozen=True)
class DwknnModel:
    config: LearnerConfig
    label_space: LabelSpace
    features: np.ndarray
    labels: np.ndarray

    def forecast_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.features.shape[1]:
            raise LearnerError(f"query has {x.shape[1]} features, model expects {self.features.shape[1]}")
        k = self.config.k
        m = self.label_space.num_labels
        out = np.zeros((x.shape[0], m))
        for i, q in enumerate(x):
            dist = np.sqrt(np.sum((self.features - q) ** 2, axis=1))
            nearest = np.argsort(dist, kind="stable")[:k]
            d = dist[nearest]
            if np.any(d == 0.0):
                weights = (d == 0.0).astype(float)
            else:
                weights = 1.0 / d
            np.add.at(out[i], self.labels[nearest], weights)
            out[i] /= out[i].sum()
        return out


def train_dwknn(train: Dataset, config: LearnerConfig) -> DwknnModel:
    if train.n_rows == 0:
        raise LearnerError("empty training set")
    if config.k > train.n_rows:
        raise LearnerError(f"k = {config.k} exceeds the {train.n_rows} training rows")
    return DwknnModel(config, train.label_space, _encode_features(train), train.class_labels())


def forecast_dwknn(model: DwknnModel, x) -> np.ndarray:
    """Forecast for one encoded object vector."""
    return model.forecast_matrix(np.asarray(x, dtype=float)[None, :])[0]


# -- Naive Bayes -------------------------------------------------------------


@dataclass(frozen=True)
class NaiveBayesModel:
    config: LearnerConfig
    label_space: LabelSpace
    priors: np.ndarray
    # per numeric feature index: (means, variances) over classes
    gaussians: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    # per nominal feature index: (classes, values) conditional probability table
    tables: dict[int, np.ndarray] = field(default_factory=dict)

    def log_joint(self, values: np.ndarray) -> np.ndarray:
        """Log prior plus log likelihood, shape ``(n, classes)``."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        with np.errstate(divide="ignore"):
            out = np.tile(np.log(self.priors), (values.shape[0], 1))
        for j, (mu, var) in self.gaussians.items():
            x = values[:, j][:, None]
            out += -0.5 * np.log(2.0 * np.pi * var)[None, :] - (x - mu[None, :]) ** 2 / (2.0 * var[None, :])
        for j, table in self.tables.items():
            idx = values[:, j].astype(int)
            with np.errstate(divide="ignore"):
                out += np.log(table[:, idx].T)
        return out

    def forecast_matrix(self, values: np.ndarray) -> np.ndarray:
        logp = self.log_joint(values)
        logp -= np.max(logp, axis=1, keepdims=True)
        p = np.exp(logp)
        return p / p.sum(axis=1, keepdims=True)


def train_naive_bayes(train: Dataset, config: LearnerConfig) -> NaiveBayesModel:
    """Class priors, a Gaussian per numeric attribute and class, and
    Laplace-smoothed frequency tables for nominal attributes."""
    if train.n_rows == 0:
        raise LearnerError("empty training set")
    y = train.class_labels()
    m = train.label_space.num_labels
    counts = np.bincount(y, minlength=m).astype(float)
    empty = [train.label_space.names[c] for c in range(m) if counts[c] == 0]
    if empty and config.empty_classes == "reject":
        raise LearnerError(f"classes with no training examples: {empty}")
    priors = counts / counts.sum()
    gaussians: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    tables: dict[int, np.ndarray] = {}
    for j in train.schema.feature_indices:
        attr = train.schema.attributes[j]
        col = train.values[:, j]
        if np.isnan(col).any():
            raise LearnerError(f"attribute {attr.name!r} has missing values; preprocess first")
        if attr.is_nominal:
            nv = len(attr.values)
            table = np.zeros((m, nv))
            np.add.at(table, (y, col.astype(int)), 1.0)
            table = (table + config.laplace_alpha) / (counts[:, None] + config.laplace_alpha * nv)
            # an empty class under the "zero" policy has 0/0 rows; its prior is 0 anyway
            tables[j] = np.nan_to_num(table, nan=1.0 / nv)
        else:
            mu = np.zeros(m)
            var = np.full(m, config.variance_floor)
            for c in range(m):
                if counts[c]:
                    vals = col[y == c]
                    mu[c] = vals.mean()
                    var[c] = max(float(vals.var()), config.variance_floor)
            gaussians[j] = (mu, var)
    return NaiveBayesModel(config, train.label_space, priors, gaussians, tables)


def forecast_naive_bayes(model: NaiveBayesModel, x) -> np.ndarray:
    """Forecast for one row of raw attribute values (class column ignored)."""
    return model.forecast_matrix(np.asarray(x, dtype=float)[None, :])[0]


# -- shared front end -------------------------------------------------------------


def train(data: Dataset, config: LearnerConfig):
    if config.kind == "dwknn":
        return train_dwknn(data, config)
    return train_naive_bayes(data, config)


def forecast_dataset(model, data: Dataset) -> ForecastSet:
    """Forecast every row of ``data``; true labels come from its class column."""
    if isinstance(model, DwknnModel):
        probs = model.forecast_matrix(_encode_features(data))
    else:
        probs = model.forecast_matrix(data.values)
    labels = data.class_labels(allow_missing=True)
    ids = tuple(str(i) for i in data.row_ids)
    return ForecastSet(probs, labels, ids, data.label_space)


# -- forecast CSV import --------------------------------------------------------

FORECAST_PREFIX = "p_"


class ForecastFormatError(ValueError):
    pass


def import_forecasts(source) -> tuple[LabelSpace, list[ForecastVector]]:
    """Read forecasts from ``example_id,true_label,p_<name>,...`` CSV.

    ``source`` is a path-like or a text stream.  Errors carry line numbers.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ForecastFormatError("line 1: forecast file is empty") from None
    if len(header) < 4 or header[0] != "example_id" or header[1] != "true_label":
        raise ForecastFormatError(
            "line 1: header must be example_id,true_label,p_<label>,... with at least two labels"
        )
    names = []
    for col in header[2:]:
        if not col.startswith(FORECAST_PREFIX) or len(col) == len(FORECAST_PREFIX):
            raise ForecastFormatError(f"line 1: probability column {col!r} must look like p_<label>")
        names.append(col[len(FORECAST_PREFIX):])
    try:
        space = LabelSpace(tuple(names))
    except ValueError as exc:
        raise ForecastFormatError(f"line 1: {exc}") from None
    forecasts = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ForecastFormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        eid = row[0].strip()
        if not eid:
            raise ForecastFormatError(f"line {lineno}: empty example_id")
        if eid in seen:
            raise ForecastFormatError(f"line {lineno}: duplicate example_id {eid!r}")
        seen.add(eid)
        label_name = row[1].strip()
        true_label = None
        if label_name:
            try:
                true_label = space.index(label_name)
            except KeyError:
                raise ForecastFormatError(f"line {lineno}: unknown true_label {label_name!r}") from None
        try:
            probs = [float(c) for c in row[2:]]
        except ValueError:
            raise ForecastFormatError(f"line {lineno}: non-numeric probability") from None
        if any(math.isnan(p) for p in probs):
            raise ForecastFormatError(f"line {lineno}: NaN probability")
        try:
            normalize_probs(probs)
        except ForecastError as exc:
            raise ForecastFormatError(f"line {lineno}: {exc}") from None
        forecasts.append(ForecastVector(eid, tuple(probs), true_label))
    return space, forecasts


def forecasts_csv_text(space: LabelSpace, forecasts) -> str:
    """Inverse of :func:`import_forecasts` (probabilities at full precision)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["example_id", "true_label"] + [FORECAST_PREFIX + n for n in space.names])
    for fv in forecasts:
        label = "" if fv.true_label is None else space.names[fv.true_label]
        w.writerow([fv.example_id, label] + [repr(float(p)) for p in fv.probs])
    return buf.getvalue()
