"""Core domain types: attribute schemas, normalized datasets, queries, and results.

A dataset is a fixed table of N rows over D attributes.  Numeric attributes
are stored normalized to [0, 1]; categorical attributes are interned to dense
integer symbol ids with per-value frequency statistics kept alongside.  Both
kinds share one float64 matrix so the query engine can work on contiguous
rows.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

METRICS = ("euclidean", "manhattan")
AGGREGATES = ("arithmetic", "geometric", "harmonic")


class DataFormatError(ValueError):
    """A malformed input table, schema sidecar, or raw value."""


class QueryError(ValueError):
    """A query that is inconsistent with itself or with a dataset."""


@dataclass(frozen=True)
class AttributeSpec:
    """One column of a dataset.

    raw_min/raw_max are the declared bounds of a numeric column in source
    units; when omitted they are inferred from the data at normalization
    time.  Categorical columns carry no bounds.
    """

    name: str
    kind: str = NUMERIC
    raw_min: float | None = None
    raw_max: float | None = None

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataFormatError(f"unknown attribute kind {self.kind!r} for column {self.name!r}")
        if self.raw_min is not None:
            object.__setattr__(self, "raw_min", float(self.raw_min))
        if self.raw_max is not None:
            object.__setattr__(self, "raw_max", float(self.raw_max))
        if self.kind == CATEGORICAL and not (self.raw_min is None and self.raw_max is None):
            raise DataFormatError(f"categorical column {self.name!r} cannot declare bounds")
        if self.raw_min is not None and self.raw_max is not None and not self.raw_min < self.raw_max:
            raise DataFormatError(
                f"column {self.name!r} needs raw_min < raw_max, got [{self.raw_min}, {self.raw_max}]"
            )


@dataclass(frozen=True)
class Record:
    """A materialized row: numeric values normalized, categoricals as symbol ids."""

    id: int
    values: tuple[float, ...]


class Dataset:
    """An immutable normalized table plus categorical frequency statistics.

    Attributes
    ----------
    schema : list[AttributeSpec]
        Column definitions in order.
    values : np.ndarray
        (n, d) float64 matrix.  Numeric columns hold values in [0, 1];
        categorical columns hold dense symbol ids stored as floats.
    bounds : dict[int, tuple[float, float]]
        Effective raw bounds per numeric column (declared or observed).
    cat_labels : dict[int, list[str]]
        Symbol id -> original label, per categorical column.
    cat_freqs : dict[int, np.ndarray]
        Per categorical column, frequency of each symbol id over the table.
    """

    def __init__(self, schema, values, bounds, cat_labels, cat_freqs):
        self.schema = list(schema)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self.values.setflags(write=False)
        self.bounds = dict(bounds)
        self.cat_labels = {c: list(v) for c, v in cat_labels.items()}
        self.cat_freqs = {c: np.asarray(v, dtype=np.int64) for c, v in cat_freqs.items()}
        self._columns = {spec.name: i for i, spec in enumerate(self.schema)}
        if len(self._columns) != len(self.schema):
            raise DataFormatError("duplicate column names in schema")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return len(self.schema)

    def column(self, name: str) -> int:
        try:
            return self._columns[name]
        except KeyError:
            raise QueryError(f"unknown attribute {name!r}") from None

    def spec(self, name: str) -> AttributeSpec:
        return self.schema[self.column(name)]

    def record(self, i: int) -> Record:
        return Record(int(i), tuple(float(v) for v in self.values[i]))

    def records(self):
        for i in range(self.n):
            yield self.record(i)

    def numeric_columns(self) -> list[int]:
        return [i for i, s in enumerate(self.schema) if s.kind == NUMERIC]

    def to_raw(self, col: int, value: float):
        """Map a normalized value back to source units (or a label)."""
        if self.schema[col].kind == CATEGORICAL:
            return self.cat_labels[col][int(value)]
        lo, hi = self.bounds[col]
        return lo + value * (hi - lo)

    def normalize_value(self, col: int, raw: float) -> float:
        """Map a raw numeric value into [0, 1] using the column bounds."""
        spec = self.schema[col]
        if spec.kind != NUMERIC:
            raise QueryError(f"attribute {spec.name!r} is categorical, not numeric")
        lo, hi = self.bounds[col]
        v = (float(raw) - lo) / (hi - lo)
        if not 0.0 <= v <= 1.0:
            raise QueryError(
                f"value {raw} for attribute {spec.name!r} falls outside its domain [{lo}, {hi}]"
            )
        return v

    def checksum(self) -> str:
        h = hashlib.sha1()
        for spec in self.schema:
            h.update(repr((spec.name, spec.kind, spec.raw_min, spec.raw_max)).encode())
        h.update(self.values.tobytes())
        for c in sorted(self.cat_labels):
            h.update(repr(self.cat_labels[c]).encode())
        return h.hexdigest()


def normalize(rows, schema) -> Dataset:
    """Build a Dataset from raw rows.

    Numeric cells are mapped by (v - raw_min) / (raw_max - raw_min), with
    bounds taken from the schema when declared and from the observed column
    min/max otherwise.  Categorical cells are interned to dense symbol ids in
    first-appearance order and counted.

    Raises DataFormatError for constant numeric columns, values outside
    declared bounds, or ragged rows.
    """
    schema = list(schema)
    d = len(schema)
    rows = list(rows)
    n = len(rows)
    for r, row in enumerate(rows):
        if len(row) != d:
            raise DataFormatError(f"row {r} has {len(row)} cells, expected {d}")

    values = np.empty((n, d), dtype=np.float64)
    bounds: dict[int, tuple[float, float]] = {}
    cat_labels: dict[int, list[str]] = {}
    cat_freqs: dict[int, np.ndarray] = {}

    for c, spec in enumerate(schema):
        if spec.kind == NUMERIC:
            try:
                col = np.array([float(row[c]) for row in rows], dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise DataFormatError(f"non-numeric cell in numeric column {spec.name!r}: {exc}") from None
            if spec.raw_min is not None and spec.raw_max is not None:
                lo, hi = float(spec.raw_min), float(spec.raw_max)
                if n and (col.min() < lo or col.max() > hi):
                    raise DataFormatError(
                        f"column {spec.name!r} has values outside declared bounds [{lo}, {hi}]"
                    )
            else:
                if n == 0:
                    raise DataFormatError(
                        f"column {spec.name!r} has no rows and no declared bounds to normalize by"
                    )
                lo, hi = float(col.min()), float(col.max())
                if lo == hi:
                    raise DataFormatError(
                        f"column {spec.name!r} is constant ({lo}); cannot normalize without declared bounds"
                    )
            bounds[c] = (lo, hi)
            values[:, c] = (col - lo) / (hi - lo)
        else:
            labels: list[str] = []
            index: dict[str, int] = {}
            ids = np.empty(n, dtype=np.float64)
            for r, row in enumerate(rows):
                label = str(row[c])
                if label not in index:
                    index[label] = len(labels)
                    labels.append(label)
                ids[r] = index[label]
            freqs = np.zeros(len(labels), dtype=np.int64)
            for r in range(n):
                freqs[int(ids[r])] += 1
            values[:, c] = ids
            cat_labels[c] = labels
            cat_freqs[c] = freqs

    return Dataset(schema, values, bounds, cat_labels, cat_freqs)


def load_schema_sidecar(path) -> dict[str, dict[str, str]]:
    """Parse a plain key-value sidecar: lines of '<column>.<field> = <value>'.

    Recognized fields: kind, min, max.  '#' starts a comment.
    """
    out: dict[str, dict[str, str]] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(f"{path}:{lineno}: expected 'name.field = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise DataFormatError(f"{path}:{lineno}: key {key!r} is missing a field suffix")
        name, fieldname = key.rsplit(".", 1)
        if fieldname not in ("kind", "min", "max"):
            raise DataFormatError(f"{path}:{lineno}: unknown field {fieldname!r}")
        out.setdefault(name, {})[fieldname] = value
    return out


def load_csv(path, schema_path=None) -> Dataset:
    """Load a CSV dataset (header row required) with an optional schema sidecar.

    Without a sidecar, every column is treated as numeric with observed
    bounds.  Rows containing empty cells are rejected.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        raw_rows = [row for row in reader if row]

    declared = load_schema_sidecar(schema_path) if schema_path else {}
    unknown = set(declared) - set(header)
    if unknown:
        raise DataFormatError(f"schema sidecar names columns not in the CSV: {sorted(unknown)}")

    schema = []
    for name in header:
        info = declared.get(name, {})
        kind = info.get("kind", NUMERIC)
        raw_min = float(info["min"]) if "min" in info else None
        raw_max = float(info["max"]) if "max" in info else None
        schema.append(AttributeSpec(name, kind, raw_min, raw_max))

    for r, row in enumerate(raw_rows):
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {r + 1} has {len(row)} cells, expected {len(header)}")
        for c, cell in enumerate(row):
            if cell.strip() == "":
                raise DataFormatError(f"{path}: row {r + 1} has an empty cell in column {header[c]!r}")

    return normalize(raw_rows, schema)


def save_csv(dataset: Dataset, path, schema_path=None) -> None:
    """Write a dataset back to CSV in source units, plus an optional sidecar.

    Numeric cells are emitted denormalized with full float precision, so a
    round trip through load_csv reproduces the dataset bit for bit.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([spec.name for spec in dataset.schema])
        for i in range(dataset.n):
            row = []
            for c, spec in enumerate(dataset.schema):
                v = dataset.to_raw(c, dataset.values[i, c])
                row.append(v if spec.kind == CATEGORICAL else repr(float(v)))
            writer.writerow(row)
    if schema_path is not None:
        lines = []
        for c, spec in enumerate(dataset.schema):
            lines.append(f"{spec.name}.kind = {spec.kind}")
            if spec.kind == NUMERIC:
                lo, hi = dataset.bounds[c]
                lines.append(f"{spec.name}.min = {lo!r}")
                lines.append(f"{spec.name}.max = {hi!r}")
        Path(schema_path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Query:
    """A point query with a diversity requirement.

    point : ordered (attribute name, normalized target in [0, 1]) pairs.
    diversity : attribute names diversity is measured on; required nonempty
        whenever min_div > 0.
    min_div : minimum pairwise diversity for two answers to count as diverse.
    decay : geometric decay rate of the diversity weight vector, in (0, 1).
    """

    point: tuple[tuple[str, float], ...]
    k: int
    min_div: float = 0.0
    diversity: tuple[str, ...] = ()
    decay: float = 0.1
    metric: str = "euclidean"
    aggregate: str = "harmonic"

    def __post_init__(self):
        pairs = self.point.items() if isinstance(self.point, dict) else self.point
        object.__setattr__(self, "point", tuple((str(a), float(v)) for a, v in pairs))
        object.__setattr__(self, "diversity", tuple(str(a) for a in self.diversity))
        if len({name for name, _ in self.point}) != len(self.point):
            raise QueryError("duplicate point attributes")
        if self.k < 1:
            raise QueryError(f"k must be at least 1, got {self.k}")
        if not 0.0 <= self.min_div <= 1.0:
            raise QueryError(f"min_div must lie in [0, 1], got {self.min_div}")
        if not 0.0 < self.decay < 1.0:
            raise QueryError(f"decay must lie strictly inside (0, 1), got {self.decay}")
        if self.metric not in METRICS:
            raise QueryError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.aggregate not in AGGREGATES:
            raise QueryError(f"aggregate must be one of {AGGREGATES}, got {self.aggregate!r}")
        if not self.point:
            raise QueryError("a query needs at least one point attribute")
        for name, value in self.point:
            if not 0.0 <= value <= 1.0:
                raise QueryError(f"target for {name!r} must be normalized to [0, 1], got {value}")
        if self.min_div > 0 and not self.diversity:
            raise QueryError("min_div > 0 requires at least one diversity attribute")
        if len(set(self.diversity)) != len(self.diversity):
            raise QueryError("duplicate diversity attributes")

    @property
    def point_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.point)

    @property
    def point_values(self) -> tuple[float, ...]:
        return tuple(value for _, value in self.point)

    def validate_for(self, dataset: Dataset) -> None:
        """Check attribute names and kinds against a dataset schema."""
        if len(self.point) > dataset.dim:
            raise QueryError("more point attributes than dataset dimensions")
        for name, _ in self.point:
            if dataset.spec(name).kind != NUMERIC:
                raise QueryError(f"point attribute {name!r} must be numeric")
        for name in self.diversity:
            dataset.column(name)


@dataclass
class ExecutionStats:
    """Effort counters for one query execution."""

    tuples_read: int = 0
    nodes_expanded: int = 0
    pqueue_peak: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True)
class Answer:
    record: Record
    distance: float
    diverse: bool


@dataclass
class ResultSet:
    """Ordered answers with their set score and execution statistics."""

    answers: list[Answer]
    score: float
    stats: ExecutionStats = field(default_factory=ExecutionStats)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(a.record.id for a in self.answers)

    @property
    def distances(self) -> tuple[float, ...]:
        return tuple(a.distance for a in self.answers)

    @property
    def fully_diverse(self) -> bool:
        return all(a.diverse for a in self.answers)

    def result_hash(self) -> str:
        h = hashlib.sha1()
        for a in self.answers:
            h.update(f"{a.record.id}:{int(a.diverse)};".encode())
        return h.hexdigest()
