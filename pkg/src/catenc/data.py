"""Column-major tables, CSV ingestion, splitting, and the preprocessing pipeline.

The pipeline order is fixed: impute on train statistics, encode categoricals,
standardize every encoded column with train statistics. Nothing here ever looks
at test rows while fitting; the tests pin that down.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import encoders as enc_mod


class SchemaError(ValueError):
    """Raised when a table does not match its declared schema."""


class _Missing:
    """Sentinel for a missing cell. Distinct from every level string and float."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "MISSING"


MISSING = _Missing()

#: Cell spellings treated as missing on ingestion, for both column kinds.
MISSING_TOKENS = frozenset({"", "N.A", "N.A.", "NA", "N/A", "NaN", "nan", "NULL", "null", "?"})


class ColumnKind(enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dataclass
class DataTable:
    """A small column-major table with a declared schema and target column.

    schema: ordered (name, kind) pairs covering every stored column.
    columns: name -> list of cell values; numeric cells are float or MISSING,
        categorical cells are str or MISSING.
    target: name of the target column (must appear in the schema).
    """

    schema: tuple[tuple[str, ColumnKind], ...]
    columns: dict[str, list]
    target: str

    def __post_init__(self) -> None:
        names = [name for name, _ in self.schema]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if set(names) != set(self.columns):
            raise SchemaError("schema names and stored columns disagree")
        if self.target not in self.columns:
            raise SchemaError(f"target column {self.target!r} not in table")
        lengths = {len(col) for col in self.columns.values()}
        if len(lengths) > 1:
            raise SchemaError(f"ragged columns: lengths {sorted(lengths)}")

    @property
    def row_count(self) -> int:
        return len(self.columns[self.target])

    def kind(self, name: str) -> ColumnKind:
        for col, kind in self.schema:
            if col == name:
                return kind
        raise KeyError(name)

    def column(self, name: str) -> list:
        return self.columns[name]

    def feature_names(self) -> list[str]:
        return [name for name, _ in self.schema if name != self.target]

    def categorical_names(self) -> list[str]:
        return [
            name
            for name, kind in self.schema
            if kind is ColumnKind.CATEGORICAL and name != self.target
        ]

    def target_values(self) -> np.ndarray:
        vals = self.columns[self.target]
        if any(v is MISSING for v in vals):
            raise SchemaError(f"target column {self.target!r} has missing values")
        return np.asarray(vals, dtype=float)

    def target_is_binary(self) -> bool:
        """True when every target value is 0 or 1 and both classes could occur."""
        vals = set(self.target_values().tolist())
        return vals <= {0.0, 1.0}

    def task(self) -> str:
        return "classification" if self.target_is_binary() else "regression"

    def subset(self, rows: Sequence[int]) -> "DataTable":
        cols = {name: [col[i] for i in rows] for name, col in self.columns.items()}
        return DataTable(schema=self.schema, columns=cols, target=self.target)

    def rows(self) -> Iterable[tuple]:
        names = [name for name, _ in self.schema]
        for i in range(self.row_count):
            yield tuple(self.columns[name][i] for name in names)


def read_schema(path: str) -> tuple[dict[str, ColumnKind], str]:
    """Parse a sidecar schema file.

    Lines are ``column = numeric|categorical`` plus one ``target = <name>`` line;
    blank lines and ``#`` comments are skipped.
    """
    kinds: dict[str, ColumnKind] = {}
    target = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'name = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "target":
                target = value
            else:
                try:
                    kinds[key] = ColumnKind(value)
                except ValueError:
                    raise SchemaError(
                        f"{path}:{lineno}: kind must be numeric or categorical, got {value!r}"
                    ) from None
    if target is None:
        raise SchemaError(f"{path}: no 'target =' line")
    if target not in kinds:
        raise SchemaError(f"{path}: target {target!r} has no declared kind")
    return kinds, target


def _parse_numeric(cell: str) -> tuple[object, bool]:
    """Return (value, was_bad). Missing tokens and unparsable cells map to MISSING;
    only the latter count as bad."""
    text = cell.strip()
    if text in MISSING_TOKENS:
        return MISSING, False
    try:
        value = float(text)
    except ValueError:
        return MISSING, True
    if not np.isfinite(value):
        return MISSING, True
    return value, False


def load_csv(path: str, schema: Mapping[str, ColumnKind], target: str) -> DataTable:
    """Load a header-ed CSV into a DataTable under a declared schema.

    Declared columns absent from the file raise SchemaError; file columns that are
    not declared are dropped. Unparsable or empty cells become the missing marker.
    A declared numeric column whose unparsable cells outnumber half the rows is a
    schema error (the declaration is considered wrong, not the data).
    """
    if target not in schema:
        raise SchemaError(f"target {target!r} missing from schema")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: no header row") from None
        header = [h.strip() for h in header]
        missing_cols = [name for name in schema if name not in header]
        if missing_cols:
            raise SchemaError(f"{path}: declared columns absent: {missing_cols}")
        col_pos = {name: header.index(name) for name in schema}
        columns: dict[str, list] = {name: [] for name in schema}
        bad_counts = {name: 0 for name in schema}
        n_rows = 0
        for row in reader:
            if not row:
                continue
            n_rows += 1
            for name, kind in schema.items():
                cell = row[col_pos[name]] if col_pos[name] < len(row) else ""
                if kind is ColumnKind.NUMERIC:
                    value, bad = _parse_numeric(cell)
                    bad_counts[name] += bad
                    columns[name].append(value)
                else:
                    text = cell.strip()
                    columns[name].append(MISSING if text in MISSING_TOKENS else text)
    for name, kind in schema.items():
        if kind is ColumnKind.NUMERIC and n_rows and bad_counts[name] * 2 > n_rows:
            raise SchemaError(
                f"{path}: column {name!r} declared numeric but "
                f"{bad_counts[name]}/{n_rows} cells do not parse"
            )
    table_schema = tuple((name, schema[name]) for name in schema)
    return DataTable(schema=table_schema, columns=columns, target=target)


def infer_schema(path: str, target: str) -> dict[str, ColumnKind]:
    """Guess column kinds from a CSV: numeric when every non-missing cell parses
    as a finite float, categorical otherwise. Convenience for schema-less input."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        numericish = {name: True for name in header}
        seen_value = {name: False for name in header}
        for row in reader:
            if not row:
                continue
            for j, name in enumerate(header):
                cell = row[j].strip() if j < len(row) else ""
                if cell in MISSING_TOKENS:
                    continue
                seen_value[name] = True
                value, bad = _parse_numeric(cell)
                if bad or value is MISSING:
                    numericish[name] = False
    schema = {
        name: ColumnKind.NUMERIC if (numericish[name] and seen_value[name]) else ColumnKind.CATEGORICAL
        for name in header
    }
    if target not in schema:
        raise SchemaError(f"target {target!r} not among CSV columns {header}")
    return schema


@dataclass
class SplitPair:
    train: DataTable
    test: DataTable
    ratio: float
    seed: int


def split_train_test(table: DataTable, ratio: float, seed: int) -> SplitPair:
    """Seeded uniform shuffle, then a prefix cut of round(ratio * n) train rows.

    The cut is clamped so both sides stay nonempty; no stratification.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    n = table.row_count
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(ratio * n))
    n_train = min(max(n_train, 1), n - 1)
    train_rows = perm[:n_train].tolist()
    test_rows = perm[n_train:].tolist()
    return SplitPair(
        train=table.subset(train_rows),
        test=table.subset(test_rows),
        ratio=ratio,
        seed=seed,
    )


@dataclass
class FittedPreprocessor:
    """Frozen imputation fills plus per-encoded-column standardization stats.

    standardize_params aligns with the encoded feature matrix; layout records the
    (column name, width) block structure of that matrix in schema order.
    """

    schema: tuple[tuple[str, ColumnKind], ...]
    target: str
    impute_values: dict[str, object]
    standardize_params: tuple[tuple[float, float], ...] | None = None
    layout: tuple[tuple[str, int], ...] | None = None


def _mode_first_appearance(values: list) -> str:
    counts: dict[str, int] = {}
    order: list[str] = []
    for v in values:
        if v is MISSING:
            continue
        if v not in counts:
            counts[v] = 0
            order.append(v)
        counts[v] += 1
    best = order[0]
    for v in order[1:]:
        if counts[v] > counts[best]:
            best = v
    return best


def fit_preprocessor(
    train: DataTable,
    encoders: Mapping[str, enc_mod.FittedEncoder] | None = None,
) -> FittedPreprocessor:
    """Learn imputation fills (numeric mean, categorical mode with first-appearance
    tie-break) from train rows only.

    When fitted encoders for every categorical feature are supplied, also freeze
    per-column standardization statistics of the imputed, encoded train matrix
    (population std; a zero-spread column standardizes to zeros).
    """
    fills: dict[str, object] = {}
    for name, kind in train.schema:
        if name == train.target:
            continue
        col = train.column(name)
        present = [v for v in col if v is not MISSING]
        if not present:
            raise SchemaError(f"column {name!r} is entirely missing; cannot impute")
        if kind is ColumnKind.NUMERIC:
            fills[name] = float(np.mean(present))
        else:
            fills[name] = _mode_first_appearance(col)
    pre = FittedPreprocessor(schema=train.schema, target=train.target, impute_values=fills)
    if encoders is None:
        return pre
    matrix, layout = _encode_features(pre, encoders, impute(pre, train))
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0)  # population std
    pre.standardize_params = tuple((float(m), float(s)) for m, s in zip(means, stds))
    pre.layout = layout
    return pre


def impute(pre: FittedPreprocessor, table: DataTable) -> DataTable:
    """Fill missing feature cells with the preprocessor's train-time values."""
    cols = {}
    for name, _ in table.schema:
        col = table.column(name)
        if name == table.target or name not in pre.impute_values:
            cols[name] = list(col)
        else:
            fill = pre.impute_values[name]
            cols[name] = [fill if v is MISSING else v for v in col]
    return DataTable(schema=table.schema, columns=cols, target=table.target)


def fit_pipeline(
    train: DataTable, spec: "enc_mod.EncoderSpec"
) -> tuple[FittedPreprocessor, dict[str, enc_mod.FittedEncoder]]:
    """Canonical train-side flow: impute, fit one encoder per categorical feature,
    freeze standardization stats. Returns the preprocessor and encoder map."""
    base = fit_preprocessor(train)
    filled = impute(base, train)
    target = filled.target_values() if spec.variant in enc_mod.TARGET_VARIANTS else None
    fitted = {
        name: enc_mod.fit(spec, filled.column(name), target)
        for name in train.categorical_names()
    }
    return fit_preprocessor(train, fitted), fitted


def _encode_features(
    pre: FittedPreprocessor,
    encoders: Mapping[str, enc_mod.FittedEncoder],
    table: DataTable,
) -> tuple[np.ndarray, tuple[tuple[str, int], ...]]:
    blocks: list[np.ndarray] = []
    layout: list[tuple[str, int]] = []
    for name, kind in pre.schema:
        if name == pre.target:
            continue
        col = table.column(name)
        if kind is ColumnKind.CATEGORICAL:
            if name not in encoders:
                raise ValueError(f"no fitted encoder for categorical column {name!r}")
            block = enc_mod.transform(encoders[name], col)
        else:
            block = np.asarray(col, dtype=float).reshape(-1, 1)
        blocks.append(block)
        layout.append((name, block.shape[1]))
    if not blocks:
        return np.empty((table.row_count, 0)), tuple(layout)
    return np.hstack(blocks), tuple(layout)


def apply_pipeline(
    pre: FittedPreprocessor,
    encoders: Mapping[str, enc_mod.FittedEncoder],
    table: DataTable,
) -> np.ndarray:
    """Impute, encode, standardize a table into a float matrix using train-time
    statistics only. The table's schema must match the fit-time schema."""
    if table.schema != pre.schema or table.target != pre.target:
        raise SchemaError("table schema does not match the fitted preprocessor")
    if pre.standardize_params is None:
        raise ValueError("preprocessor lacks standardization stats; refit with encoders")
    matrix, layout = _encode_features(pre, encoders, impute(pre, table))
    if layout != pre.layout:
        raise SchemaError(
            f"encoded layout {layout} does not match fit-time layout {pre.layout}"
        )
    out = np.empty_like(matrix)
    for j, (mean, std) in enumerate(pre.standardize_params):
        if std == 0.0:
            out[:, j] = 0.0
        else:
            out[:, j] = (matrix[:, j] - mean) / std
    return out


def pipeline_layout(pre: FittedPreprocessor) -> tuple[tuple[str, int], ...]:
    """(column name, encoded width) blocks of the feature matrix, in schema order."""
    if pre.layout is None:
        raise ValueError("preprocessor was fitted without encoders; no layout")
    return pre.layout
