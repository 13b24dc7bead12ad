"""CSV ingestion, schema inference, and the numeric encoding round trip.

Tables are handled as lists of string cells (the CSV domain). Numerics are
z-scored with the population standard deviation, categoricals one-hot
encoded over levels in first-appearance order, and the protected column is
kept out of the feature matrix entirely.
"""

from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError

MISSING_TOKENS = {"", "?", "na", "n/a", "nan", "null"}
MISSING_LEVEL = "__missing__"


def is_missing(cell):
    return cell.strip().lower() in MISSING_TOKENS


def split_fingerprint(n, width, labels, split):
    """Identify a (labels, split) pairing; feature values stay out of the
    hash so a dataset and its debiased reconstruction match."""
    train_idx, val_idx = split
    h = hashlib.sha256()
    h.update(f"{n},{width}".encode())
    h.update(np.ascontiguousarray(np.asarray(labels, dtype=np.float64)).tobytes())
    h.update(np.ascontiguousarray(np.sort(np.asarray(train_idx))).tobytes())
    h.update(np.ascontiguousarray(np.sort(np.asarray(val_idx))).tobytes())
    return h.hexdigest()[:16]


def _parse_number(cell):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


@dataclass
class Column:
    name: str
    kind: str  # "numeric" | "categorical"
    levels: list[str] | None = None  # categorical, first-appearance order
    mean: float | None = None
    std: float | None = None
    protected: bool = False
    dropped: bool = False  # constant numeric column, excluded from x
    constant_value: str | None = None  # original text, reinserted on decode

    @property
    def width(self):
        if self.protected or self.dropped:
            return 0
        return 1 if self.kind == "numeric" else len(self.levels)


@dataclass
class Schema:
    """Per-column metadata in original file order; exactly one protected."""

    columns: list[Column]

    @property
    def protected_column(self):
        for col in self.columns:
            if col.protected:
                return col
        raise ConfigError("schema has no protected column")

    @property
    def encoded_width(self):
        return sum(col.width for col in self.columns)

    def encoded_blocks(self):
        """Yield (column, start, stop) slices into the encoded matrix."""
        offset = 0
        for col in self.columns:
            if col.width:
                yield col, offset, offset + col.width
                offset += col.width

    def validate(self):
        n_protected = sum(c.protected for c in self.columns)
        if n_protected != 1:
            raise ConfigError(f"schema must flag exactly one protected column, got {n_protected}")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        for col in self.columns:
            if col.kind == "categorical":
                if not col.levels or len(set(col.levels)) != len(col.levels):
                    raise DataError(f"column {col.name!r}: levels must be unique and non-empty")
            elif col.kind == "numeric" and not col.protected and not col.dropped:
                if col.std is None or col.std <= 0:
                    raise DataError(f"column {col.name!r}: stddev must be > 0")


@dataclass
class Dataset:
    """Encoded feature matrix plus the protected attribute, kept apart."""

    x: np.ndarray  # (n, d) z-scored numerics + one-hot categoricals
    labels: np.ndarray  # int class labels (classification) or float (regression)
    schema: Schema
    train_idx: np.ndarray
    val_idx: np.ndarray
    mode: str = "classification"
    classes: list[str] = field(default_factory=list)  # protected level names
    protected_raw: list[str] = field(default_factory=list)
    n_dropped_rows: int = 0

    @property
    def n_rows(self):
        return self.x.shape[0]

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def chance_level(self):
        """Loss of an uninformed adversary: ln C, or label variance for regression."""
        if self.mode == "classification":
            return float(np.log(self.n_classes))
        return float(np.var(self.labels))

    def fingerprint(self):
        return split_fingerprint(
            self.n_rows, self.x.shape[1], self.labels, (self.train_idx, self.val_idx)
        )


@dataclass
class DebiasedOutput:
    y: np.ndarray  # reconstruction, encoded space
    header: list[str]
    rows: list[list[str]]  # decoded table, original column types
    provenance: dict


def infer_schema(header, rows, protected, overrides=None):
    """Infer per-column kinds and encoding statistics.

    A column is numeric iff every non-missing cell parses as a number;
    ``overrides`` (name -> kind) wins. Constant numeric columns are dropped
    from the encoding with a warning.
    """
    overrides = overrides or {}
    if protected not in header:
        raise ConfigError(f"protected column {protected!r} not found in header {header}")
    for name in overrides:
        if name not in header:
            raise ConfigError(f"type override for unknown column {name!r}")
    columns = []
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        present = [c for c in cells if not is_missing(c)]
        if name in overrides:
            kind = overrides[name]
            if kind not in ("numeric", "categorical"):
                raise ConfigError(f"override for {name!r} must be numeric or categorical")
            if kind == "numeric" and any(_parse_number(c) is None for c in present):
                raise DataError(f"column {name!r} forced numeric but has non-numeric cells")
        else:
            kind = (
                "numeric"
                if present and all(_parse_number(c) is not None for c in present)
                else "categorical"
            )
        col = Column(name=name, kind=kind, protected=(name == protected))
        if kind == "numeric":
            values = np.array([_parse_number(c) for c in present], dtype=np.float64)
            col.mean = float(values.mean()) if values.size else 0.0
            col.std = float(values.std()) if values.size else 0.0  # population
            if not col.protected and (values.size == 0 or col.std == 0.0):
                warnings.warn(f"dropping constant numeric column {name!r}")
                col.dropped = True
                col.constant_value = cells[0] if cells else ""
        else:
            levels = []
            seen = set()
            for c in cells:
                level = MISSING_LEVEL if is_missing(c) else c
                if level not in seen:
                    seen.add(level)
                    levels.append(level)
            col.levels = levels
        columns.append(col)
    schema = Schema(columns)
    schema.validate()
    return schema


def encode(rows, schema):
    """Encode raw string rows into the numeric feature matrix."""
    n = len(rows)
    x = np.zeros((n, schema.encoded_width))
    for col, start, stop in schema.encoded_blocks():
        j = [c.name for c in schema.columns].index(col.name)
        if col.kind == "numeric":
            out = np.empty(n)
            for i, row in enumerate(rows):
                cell = row[j]
                v = col.mean if is_missing(cell) else _parse_number(cell)
                if v is None:
                    raise DataError(f"column {col.name!r}: cannot parse {cell!r} as number")
                out[i] = v
            x[:, start] = (out - col.mean) / col.std
        else:
            index = {level: k for k, level in enumerate(col.levels)}
            for i, row in enumerate(rows):
                cell = row[j]
                level = MISSING_LEVEL if is_missing(cell) else cell
                if level not in index:
                    raise DataError(f"column {col.name!r}: unseen level {level!r}")
                x[i, start + index[level]] = 1.0
    return x


def format_number(v):
    return f"{v:.10g}"


def decode(y, schema, protected_values=None):
    """Decode a reconstruction back into table rows.

    Numerics are un-z-scored, one-hot blocks decoded by argmax (ties break
    to the lowest-index level). Dropped constant columns are reinserted.
    The protected column is omitted unless ``protected_values`` supplies the
    original cells to reattach.

    Returns (header, rows) with all cells as strings.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != schema.encoded_width:
        raise ShapeError(
            f"reconstruction width {y.shape} does not match encoded width "
            f"{schema.encoded_width}"
        )
    blocks = {col.name: (start, stop) for col, start, stop in schema.encoded_blocks()}
    header = []
    decoded_cols = []
    for col in schema.columns:
        if col.protected:
            if protected_values is None:
                continue
            if len(protected_values) != y.shape[0]:
                raise ShapeError("protected_values length does not match row count")
            header.append(col.name)
            decoded_cols.append(list(protected_values))
        elif col.dropped:
            header.append(col.name)
            decoded_cols.append([col.constant_value] * y.shape[0])
        elif col.kind == "numeric":
            start, _ = blocks[col.name]
            header.append(col.name)
            decoded_cols.append([format_number(v * col.std + col.mean) for v in y[:, start]])
        else:
            start, stop = blocks[col.name]
            picks = np.argmax(y[:, start:stop], axis=1)  # first max wins ties
            header.append(col.name)
            decoded_cols.append([col.levels[k] for k in picks])
    rows = [[decoded_cols[c][i] for c in range(len(header))] for i in range(y.shape[0])]
    return header, rows


def _protected_labels(cells, column, bins, regression):
    """Turn raw protected cells into adversary targets."""
    if regression:
        if column.kind != "numeric":
            raise ConfigError("regression adversary requires a numeric protected column")
        values = np.array([_parse_number(c) for c in cells], dtype=np.float64)
        std = values.std()
        if std == 0:
            raise DataError("protected column is constant")
        return (values - values.mean()) / std, []
    if column.kind == "categorical":
        index = {level: k for k, level in enumerate(column.levels)}
        return np.array([index[c if not is_missing(c) else MISSING_LEVEL] for c in cells]), list(column.levels)
    # numeric protected attribute: quantile-bin into classes
    values = np.array([_parse_number(c) for c in cells], dtype=np.float64)
    if bins < 2:
        raise ConfigError("need at least 2 protected bins")
    edges = np.unique(np.quantile(values, np.linspace(0, 1, bins + 1)[1:-1]))
    labels = np.searchsorted(edges, values, side="left")
    kept = np.unique(labels)
    if kept.size < 2:
        raise DataError("protected column does not split into 2 or more bins")
    remap = {old: new for new, old in enumerate(kept)}
    labels = np.array([remap[v] for v in labels])
    names = [f"bin{k}" for k in range(kept.size)]
    if kept.size < bins:
        warnings.warn(f"protected column only supports {kept.size} of {bins} requested bins")
    return labels, names


def load_csv(path, protected, overrides=None, delimiter=",", bins=4, regression=False):
    """Load a delimited text file with header into a Dataset.

    Rows with a missing protected value are dropped (count reported on the
    returned dataset). The initial split is all-train; call split() for a
    validation holdout.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh, delimiter=delimiter)
            table = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not table:
        raise DataError(f"{path}: empty file")
    header, rows = table[0], table[1:]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}")
    if protected not in header:
        raise ConfigError(f"protected column {protected!r} not found in {path}")
    p = header.index(protected)
    kept = [row for row in rows if not is_missing(row[p])]
    n_dropped = len(rows) - len(kept)
    if n_dropped:
        warnings.warn(f"dropped {n_dropped} rows with missing protected value")
    if len(kept) < 2:
        raise DataError(f"{path}: fewer than 2 usable rows")
    schema = infer_schema(header, kept, protected, overrides)
    x = encode(kept, schema)
    protected_raw = [row[p] for row in kept]
    labels, classes = _protected_labels(protected_raw, schema.protected_column, bins, regression)
    return Dataset(
        x=x,
        labels=labels,
        schema=schema,
        train_idx=np.arange(len(kept)),
        val_idx=np.arange(0),
        mode="regression" if regression else "classification",
        classes=classes,
        protected_raw=protected_raw,
        n_dropped_rows=n_dropped,
    )


def split(dataset, validation_fraction, seed):
    """Deterministic stratified train/validation split.

    Stratifies by protected class where class counts permit; falls back to
    an unstratified shuffle (with a warning) if a class would vanish from
    the train side.
    """
    if not 0 < validation_fraction < 1:
        raise ConfigError("validation_fraction must be in (0, 1)")
    n = dataset.n_rows
    rng = np.random.default_rng(seed)
    val_parts = []
    stratified = dataset.mode == "classification"
    if stratified:
        for c in range(dataset.n_classes):
            members = np.flatnonzero(dataset.labels == c)
            k = int(math.floor(validation_fraction * members.size + 0.5))
            if members.size - k < 1:
                warnings.warn(
                    f"class {c} too small to stratify; falling back to unstratified split"
                )
                stratified = False
                break
            val_parts.append(rng.permutation(members)[:k])
    if not stratified:
        k = max(1, int(math.floor(validation_fraction * n + 0.5)))
        order = rng.permutation(n)
        val_idx = order[:k]
    else:
        val_idx = np.concatenate(val_parts) if val_parts else np.arange(0)
    val_mask = np.zeros(n, dtype=bool)
    val_mask[val_idx] = True
    return Dataset(
        x=dataset.x,
        labels=dataset.labels,
        schema=dataset.schema,
        train_idx=np.flatnonzero(~val_mask),
        val_idx=np.sort(val_idx),
        mode=dataset.mode,
        classes=dataset.classes,
        protected_raw=dataset.protected_raw,
        n_dropped_rows=dataset.n_dropped_rows,
    )


def write_csv(path, header, rows):
    """UTF-8, LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
