"""Tabular datasets: ARFF / CSV parsing, preprocessing and train/test splits.

Rows are stored as a float matrix.  Numeric cells hold their value, nominal
cells hold the index into the attribute's value list, and missing cells are
NaN.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .forecast import LabelSpace

#: Shuffles use numpy's PCG64 bit generator seeded directly with the split seed.
SPLIT_PRNG = "numpy.PCG64/v1"

MISSING_TOKENS = ("?", "")


class DatasetError(ValueError):
    """Malformed dataset input.  Messages carry line / column context."""


@dataclass(frozen=True)
class Attribute:
    name: str
    values: tuple[str, ...] | None = None  # None means numeric

    @property
    def is_nominal(self) -> bool:
        return self.values is not None

    def value_index(self, token: str) -> int:
        try:
            return self.values.index(token)
        except ValueError:
            raise KeyError(token) from None


@dataclass(frozen=True)
class Schema:
    attributes: tuple[Attribute, ...]
    class_index: int = -1

    def __post_init__(self):
        attrs = tuple(self.attributes)
        object.__setattr__(self, "attributes", attrs)
        if not attrs:
            raise DatasetError("schema has no attributes")
        ci = self.class_index % len(attrs)
        object.__setattr__(self, "class_index", ci)
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise DatasetError(f"duplicate attribute names in {names}")
        cls = attrs[ci]
        if not cls.is_nominal or len(cls.values) < 2:
            raise DatasetError(f"class attribute {cls.name!r} must be nominal with at least two values")

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def class_attribute(self) -> Attribute:
        return self.attributes[self.class_index]

    @property
    def feature_indices(self) -> list[int]:
        return [j for j in range(len(self.attributes)) if j != self.class_index]


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    values: np.ndarray
    name: str = "dataset"
    row_ids: tuple[int, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1, len(self.schema.attributes))
        object.__setattr__(self, "values", values)
        if not self.row_ids:
            object.__setattr__(self, "row_ids", tuple(range(values.shape[0])))
        elif len(self.row_ids) != values.shape[0]:
            raise DatasetError("row ids and rows differ in length")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def label_space(self) -> LabelSpace:
        return LabelSpace(self.schema.class_attribute.values)

    def class_labels(self, allow_missing: bool = False) -> np.ndarray:
        col = self.values[:, self.schema.class_index]
        missing = np.isnan(col)
        if missing.any() and not allow_missing:
            raise DatasetError(f"{int(missing.sum())} rows have no class label")
        return np.where(missing, -1, np.nan_to_num(col, nan=-1)).astype(np.int64)

    def take(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.schema, self.values[rows], self.name, tuple(self.row_ids[i] for i in rows))

    def equals(self, other: "Dataset") -> bool:
        return (
            self.schema == other.schema
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values, equal_nan=True))
        )


# -- ARFF -------------------------------------------------------------------

_NUMERIC_TYPES = {"numeric", "real", "integer"}


def _split_fields(line: str, lineno: int) -> list[str]:
    """Split on commas outside single or double quotes and unquote each field."""
    fields, buf, quote, quoted = [], [], None, False
    i = 0
    while i < len(line):
        ch = line[i]
        if quote:
            if ch == "\\" and i + 1 < len(line):
                buf.append(line[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = None
            else:
                buf.append(ch)
        elif ch in "'\"" and not "".join(buf).strip():
            quote, quoted, buf = ch, True, []
        elif ch.isspace() and quoted:
            pass  # whitespace after a closing quote
        elif ch == ",":
            fields.append((("".join(buf)), quoted))
            buf, quoted = [], False
        else:
            buf.append(ch)
        i += 1
    if quote:
        raise DatasetError(f"line {lineno}: unterminated quote")
    fields.append(("".join(buf), quoted))
    return [f if q else f.strip() for f, q in fields]


def _parse_name(rest: str, lineno: int) -> tuple[str, str]:
    rest = rest.strip()
    if rest[:1] in ("'", '"'):
        q = rest[0]
        end = rest.find(q, 1)
        if end < 0:
            raise DatasetError(f"line {lineno}: unterminated quoted attribute name")
        return rest[1:end], rest[end + 1:].strip()
    parts = rest.split(None, 1)
    if len(parts) < 2:
        raise DatasetError(f"line {lineno}: attribute declaration missing a type")
    return parts[0], parts[1].strip()


def parse_arff(stream, name: str | None = None, class_index: int = -1) -> Dataset:
    """Parse the numeric/nominal subset of ARFF.

    ``stream`` is a text stream or a string.  String, date, relational and
    sparse data are rejected.  The class attribute defaults to the last one.
    """
    text = stream if isinstance(stream, str) else stream.read()
    relation = None
    attrs: list[Attribute] = []
    rows: list[list[float]] = []
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            low = line.lower()
            if low.startswith("@relation"):
                relation = _parse_name(line[len("@relation"):] + " x", lineno)[0]
            elif low.startswith("@attribute"):
                aname, atype = _parse_name(line[len("@attribute"):], lineno)
                if atype.startswith("{"):
                    if not atype.endswith("}"):
                        raise DatasetError(f"line {lineno}: unterminated nominal value list")
                    values = tuple(v for v in _split_fields(atype[1:-1], lineno))
                    if any(v == "" for v in values) or len(set(values)) != len(values):
                        raise DatasetError(f"line {lineno}: empty or duplicate nominal value in {aname!r}")
                    attrs.append(Attribute(aname, values))
                elif atype.split()[0].lower() in _NUMERIC_TYPES:
                    attrs.append(Attribute(aname))
                else:
                    raise DatasetError(
                        f"line {lineno}: attribute {aname!r} has unsupported type {atype.split()[0]!r}"
                        " (only numeric and nominal are accepted)"
                    )
            elif low.startswith("@data"):
                if not attrs:
                    raise DatasetError(f"line {lineno}: @data before any @attribute")
                in_data = True
            else:
                raise DatasetError(f"line {lineno}: unexpected header line {line[:40]!r}")
            continue
        if line.startswith("{"):
            raise DatasetError(f"line {lineno}: sparse ARFF rows are not supported")
        fields = _split_fields(line, lineno)
        rows.append(_convert_row(fields, attrs, lineno))
    if not in_data:
        raise DatasetError("no @data section")
    try:
        schema = Schema(tuple(attrs), class_index)
    except DatasetError as exc:
        raise DatasetError(f"schema: {exc}") from None
    values = np.array(rows, dtype=float).reshape(-1, len(attrs))
    return Dataset(schema, values, name or relation or "dataset")


def _convert_row(fields: list[str], attrs: Sequence[Attribute], lineno: int) -> list[float]:
    if len(fields) != len(attrs):
        raise DatasetError(f"line {lineno}: expected {len(attrs)} values, got {len(fields)}")
    out = []
    for col, (tok, attr) in enumerate(zip(fields, attrs), start=1):
        if tok in MISSING_TOKENS:
            out.append(math.nan)
        elif attr.is_nominal:
            try:
                out.append(float(attr.value_index(tok)))
            except KeyError:
                raise DatasetError(
                    f"line {lineno}, column {col} ({attr.name}): {tok!r} is not a declared value"
                ) from None
        else:
            try:
                v = float(tok)
            except ValueError:
                raise DatasetError(
                    f"line {lineno}, column {col} ({attr.name}): {tok!r} is not numeric"
                ) from None
            if not math.isfinite(v):
                raise DatasetError(f"line {lineno}, column {col} ({attr.name}): non-finite value")
            out.append(v)
    return out


_PLAIN = re.compile(r"^[^\s,'\"{}%]+$")


def _quote(token: str) -> str:
    if _PLAIN.match(token):
        return token
    return "'" + token.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _format_cell(v: float, attr: Attribute) -> str:
    if math.isnan(v):
        return "?"
    if attr.is_nominal:
        return _quote(attr.values[int(v)])
    return repr(float(v))


def serialize_arff(data: Dataset) -> str:
    lines = [f"@relation {_quote(data.name)}", ""]
    for j, attr in enumerate(data.schema.attributes):
        kind = "{" + ",".join(_quote(v) for v in attr.values) + "}" if attr.is_nominal else "numeric"
        lines.append(f"@attribute {_quote(attr.name)} {kind}")
    lines += ["", "@data"]
    for row in data.values:
        lines.append(",".join(_format_cell(v, a) for v, a in zip(row, data.schema.attributes)))
    return "\n".join(lines) + "\n"


# -- CSV ----------------------------------------------------------------------


def parse_csv_with_schema(stream, schema: Schema, name: str = "dataset") -> Dataset:
    """Parse CSV whose header matches ``schema``; '?' or an empty cell is missing."""
    text = stream if isinstance(stream, str) else stream.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DatasetError("line 1: CSV has no header") from None
    if header != schema.names:
        raise DatasetError(f"line 1: header {header} does not match schema {schema.names}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        rows.append(_convert_row([c.strip() for c in row], schema.attributes, lineno))
    return Dataset(schema, np.array(rows, dtype=float).reshape(-1, len(schema.attributes)), name)


def infer_csv_schema(stream, class_column: str | None = None) -> Schema:
    """Guess a schema from CSV content: a column is numeric when every present
    cell parses as a float, nominal otherwise (values in first-seen order).
    The class column is always nominal."""
    text = stream if isinstance(stream, str) else stream.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DatasetError("line 1: CSV has no header")
    header = [h.strip() for h in rows[0]]
    ci = len(header) - 1 if class_column is None else header.index(class_column) if class_column in header else None
    if ci is None:
        raise DatasetError(f"class column {class_column!r} not in header {header}")
    columns: list[list[str]] = [[] for _ in header]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetError(f"line {lineno}: expected {len(header)} values, got {len(row)}")
        for j, c in enumerate(row):
            c = c.strip()
            if c not in MISSING_TOKENS:
                columns[j].append(c)
    attrs = []
    for j, (hname, cells) in enumerate(zip(header, columns)):
        numeric = j != ci and all(_is_float(c) for c in cells)
        attrs.append(Attribute(hname) if numeric else Attribute(hname, tuple(dict.fromkeys(cells))))
    return Schema(tuple(attrs), ci)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_dataset(path, class_column: str | None = None) -> Dataset:
    """Load ``.arff`` or ``.csv`` from disk, or a bundled dataset by name."""
    p = Path(path)
    if not p.exists() and str(path) in bundled_datasets():
        return load_bundled(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"{path}: {exc.strerror or exc}") from None
    try:
        if p.suffix.lower() == ".arff":
            ds = parse_arff(text, name=p.stem)
            if class_column is not None:
                ds = Dataset(Schema(ds.schema.attributes, ds.schema.names.index(class_column)), ds.values, ds.name)
            return ds
        schema = infer_csv_schema(text, class_column)
        return parse_csv_with_schema(text, schema, name=p.stem)
    except (DatasetError, ValueError) as exc:
        raise DatasetError(f"{path}: {exc}") from None


def bundled_datasets() -> list[str]:
    return sorted(
        f.name[:-5] for f in resources.files("confregion.data").iterdir() if f.name.endswith(".arff")
    )


def load_bundled(name: str) -> Dataset:
    """The UCI Iris and Glass tables ship with the package."""
    res = resources.files("confregion.data") / f"{name}.arff"
    if not res.is_file():
        raise DatasetError(f"no bundled dataset {name!r}; choose from {bundled_datasets()}")
    return parse_arff(res.read_text(encoding="utf-8"), name=name)


# -- preprocessing ------------------------------------------------------------


@dataclass(frozen=True)
class Preprocessor:
    """Min-max scaling and mean/mode imputation fitted on one dataset."""

    schema: Schema
    fill: tuple[float, ...]
    lows: tuple[float, ...]
    highs: tuple[float, ...]

    def transform(self, data: Dataset) -> Dataset:
        if data.schema != self.schema:
            raise DatasetError("dataset schema differs from the fitted schema")
        v = data.values.copy()
        for j in self.schema.feature_indices:
            col = v[:, j]
            col[np.isnan(col)] = self.fill[j]
            if not self.schema.attributes[j].is_nominal:
                lo, hi = self.lows[j], self.highs[j]
                if hi > lo:
                    col[:] = np.clip((col - lo) / (hi - lo), 0.0, 1.0)
                else:
                    col[:] = 0.0
        return Dataset(self.schema, v, data.name, data.row_ids)


def fit_preprocessor(data: Dataset) -> Preprocessor:
    n_attr = len(data.schema.attributes)
    fill = [math.nan] * n_attr
    lows = [math.nan] * n_attr
    highs = [math.nan] * n_attr
    for j in data.schema.feature_indices:
        attr = data.schema.attributes[j]
        col = data.values[:, j]
        seen = col[~np.isnan(col)]
        if seen.size == 0:
            raise DatasetError(f"attribute {attr.name!r} has no observed values to fit on")
        if attr.is_nominal:
            counts = np.bincount(seen.astype(int), minlength=len(attr.values))
            fill[j] = float(np.argmax(counts))  # ties go to the first declared value
        else:
            fill[j] = float(seen.mean())
            lows[j] = float(seen.min())
            highs[j] = float(seen.max())
    return Preprocessor(data.schema, tuple(fill), tuple(lows), tuple(highs))


def preprocess(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset]:
    """Impute and scale both halves using statistics of ``train`` only.

    Test values outside the training range are clipped to [0, 1].
    """
    if train.schema != test.schema:
        raise DatasetError("train and test do not share a schema")
    pre = fit_preprocessor(train)
    return pre.transform(train), pre.transform(test)


# -- splitting -------------------------------------------------------------------


@dataclass(frozen=True)
class SplitPlan:
    train_fraction: float = 0.66
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not 0.0 < self.train_fraction < 1.0:
            raise DatasetError(f"train fraction must lie in (0, 1), got {self.train_fraction}")
        if not self.seeds:
            raise DatasetError("split plan needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise DatasetError(f"split seeds must be distinct, got {self.seeds}")

    @classmethod
    def repeats(cls, count: int = 5, train_fraction: float = 0.66, base_seed: int = 0) -> "SplitPlan":
        return cls(train_fraction, tuple(range(base_seed, base_seed + count)))


def train_size(n: int, fraction: float) -> int:
    # round first so that 0.66 * 150 = 98.99999999999999 still lands on 99
    return math.ceil(round(fraction * n, 9))


def split(data: Dataset, plan: SplitPlan, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle with PCG64(seed) and cut after ceil(train_fraction * n) rows."""
    if seed not in plan.seeds:
        raise DatasetError(f"seed {seed} is not part of the split plan {plan.seeds}")
    n = data.n_rows
    if n < 3:
        raise DatasetError(f"dataset has {n} rows; at least 3 are needed to split")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    cut = min(max(train_size(n, plan.train_fraction), 1), n - 1)
    return data.take(perm[:cut]), data.take(perm[cut:])
