"""Mixed-variable design schemas, design points, and tabular datasets.

A design space is an ordered list of features, each either continuous
(bounded reals) or categorical (a fixed token set). Design points are plain
tuples aligned with the schema; continuous entries are floats, categorical
entries are tokens. Non-actionable features are frozen at the query's value
by every operator in the package.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

Value = Union[float, str]
DesignPoint = tuple[Value, ...]

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


class DesignSpaceError(ValueError):
    """Invalid schema, point, or dataset."""


class SchemaMismatchError(DesignSpaceError):
    """Input data does not cover the schema's features."""


class RowValidationError(DesignSpaceError):
    """A dataset row failed validation.

    Carries the offending row index (0-based, excluding the header) and
    column name.
    """

    def __init__(self, row: int, column: str, message: str):
        super().__init__(f"row {row}, column {column!r}: {message}")
        self.row = row
        self.column = column


@dataclass(frozen=True)
class FeatureSpec:
    """One feature of a design schema.

    Continuous features carry finite bounds (lower < upper); categorical
    features carry at least two distinct tokens. ``actionable`` marks whether
    counterfactuals may modify the feature.
    """

    name: str
    kind: str
    lower: float | None = None
    upper: float | None = None
    categories: tuple[str, ...] | None = None
    actionable: bool = True

    def __post_init__(self):
        if not self.name:
            raise DesignSpaceError("feature name must be non-empty")
        if self.kind == CONTINUOUS:
            if self.categories is not None:
                raise DesignSpaceError(f"feature {self.name!r}: continuous features take no categories")
            if self.lower is None or self.upper is None:
                raise DesignSpaceError(f"feature {self.name!r}: continuous features need lower and upper bounds")
            lower, upper = float(self.lower), float(self.upper)
            if not (np.isfinite(lower) and np.isfinite(upper)):
                raise DesignSpaceError(f"feature {self.name!r}: bounds must be finite")
            if not lower < upper:
                raise DesignSpaceError(f"feature {self.name!r}: lower must be < upper")
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)
        elif self.kind == CATEGORICAL:
            if self.lower is not None or self.upper is not None:
                raise DesignSpaceError(f"feature {self.name!r}: categorical features take no bounds")
            cats = tuple(self.categories or ())
            if len(cats) < 2:
                raise DesignSpaceError(f"feature {self.name!r}: need at least 2 categories")
            if len(set(cats)) != len(cats):
                raise DesignSpaceError(f"feature {self.name!r}: duplicate categories")
            object.__setattr__(self, "categories", cats)
        else:
            raise DesignSpaceError(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_continuous(self) -> bool:
        return self.kind == CONTINUOUS


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of validating one design point; carries the first violation."""

    ok: bool
    feature: str | None = None
    message: str | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class DesignSchema:
    """Ordered feature definitions for a mixed-variable design space."""

    features: tuple[FeatureSpec, ...]
    # Derived arrays, filled in __post_init__.
    continuous_mask: np.ndarray = field(init=False, repr=False, compare=False)
    lower_bounds: np.ndarray = field(init=False, repr=False, compare=False)
    upper_bounds: np.ndarray = field(init=False, repr=False, compare=False)
    category_counts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        feats = tuple(self.features)
        object.__setattr__(self, "features", feats)
        if not feats:
            raise DesignSpaceError("schema needs at least one feature")
        names = [f.name for f in feats]
        if len(set(names)) != len(names):
            raise DesignSpaceError("feature names must be unique")
        if not any(f.actionable for f in feats):
            raise DesignSpaceError("at least one feature must be actionable")
        cont = np.array([f.is_continuous for f in feats], dtype=bool)
        lower = np.array([f.lower if f.is_continuous else np.nan for f in feats], dtype=float)
        upper = np.array([f.upper if f.is_continuous else np.nan for f in feats], dtype=float)
        counts = np.array([0 if f.is_continuous else len(f.categories) for f in feats], dtype=int)
        object.__setattr__(self, "continuous_mask", cont)
        object.__setattr__(self, "lower_bounds", lower)
        object.__setattr__(self, "upper_bounds", upper)
        object.__setattr__(self, "category_counts", counts)

    @property
    def dimension(self) -> int:
        return len(self.features)

    @property
    def actionable_mask(self) -> np.ndarray:
        return np.array([f.actionable for f in self.features], dtype=bool)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def validate_values(self, values: Sequence[Value]) -> ValidationResult:
        """Check one point against the schema; reports the first violation."""
        if len(values) != self.dimension:
            return ValidationResult(False, None, f"expected {self.dimension} values, got {len(values)}")
        for feat, value in zip(self.features, values):
            if feat.is_continuous:
                if isinstance(value, str) or not isinstance(value, (int, float, np.floating, np.integer)):
                    return ValidationResult(False, feat.name, f"expected a number, got {value!r}")
                if not np.isfinite(float(value)):
                    return ValidationResult(False, feat.name, f"value {value!r} is not finite")
            else:
                if value not in feat.categories:
                    return ValidationResult(False, feat.name, f"{value!r} is not one of {list(feat.categories)}")
        return ValidationResult(True)

    def canonical_point(self, values: Sequence[Value]) -> DesignPoint:
        """Validate and normalize a point (continuous entries become floats)."""
        result = self.validate_values(values)
        if not result:
            raise DesignSpaceError(f"invalid design point ({result.feature}): {result.message}")
        return tuple(
            float(v) if feat.is_continuous else str(v)
            for feat, v in zip(self.features, values)
        )

    def encode(self, values: Sequence[Value]) -> np.ndarray:
        """Encode a point as a float vector; categorical tokens become codes."""
        out = np.empty(self.dimension, dtype=float)
        for i, (feat, value) in enumerate(zip(self.features, values)):
            out[i] = float(value) if feat.is_continuous else feat.categories.index(value)
        return out

    def encode_many(self, points: Iterable[Sequence[Value]]) -> np.ndarray:
        rows = [self.encode(p) for p in points]
        if not rows:
            return np.empty((0, self.dimension), dtype=float)
        return np.vstack(rows)

    def decode(self, vector: np.ndarray) -> DesignPoint:
        """Inverse of :meth:`encode`; exact for float64 round trips."""
        values: list[Value] = []
        for feat, raw in zip(self.features, vector):
            if feat.is_continuous:
                values.append(float(raw))
            else:
                values.append(feat.categories[int(raw)])
        return tuple(values)

    def decode_many(self, matrix: np.ndarray) -> list[DesignPoint]:
        return [self.decode(row) for row in matrix]


def validate_point(values: Sequence[Value], schema: DesignSchema) -> ValidationResult:
    """Validate a design point against a schema without raising."""
    return schema.validate_values(values)


@dataclass(frozen=True)
class Dataset:
    """Schema-validated rows plus observed per-feature ranges.

    ``ranges`` is aligned with the schema; categorical positions hold NaN and
    are never read. A zero range is allowed only for constant columns.
    """

    schema: DesignSchema
    rows: tuple[DesignPoint, ...]
    ranges: np.ndarray = field(init=False, repr=False, compare=False)
    encoded: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = tuple(self.schema.canonical_point(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        encoded = self.schema.encode_many(rows)
        ranges = np.full(self.schema.dimension, np.nan)
        cont = self.schema.continuous_mask
        if len(rows) and cont.any():
            cols = encoded[:, cont]
            ranges[cont] = cols.max(axis=0) - cols.min(axis=0)
        elif cont.any():
            ranges[cont] = 0.0
        object.__setattr__(self, "encoded", encoded)
        object.__setattr__(self, "ranges", ranges)

    def __len__(self) -> int:
        return len(self.rows)


def load_dataset(source: Union[str, Path, TextIO], schema: DesignSchema) -> Dataset:
    """Load a header-bearing CSV into a validated Dataset.

    Columns not named in the schema are ignored; missing schema columns raise
    :class:`SchemaMismatchError`. Unparseable cells raise
    :class:`RowValidationError` naming the row and column.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as handle:
            return load_dataset(handle, schema)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaMismatchError("empty dataset stream") from None
    header = [h.strip() for h in header]
    positions = {}
    for feat in schema.features:
        if feat.name not in header:
            raise SchemaMismatchError(f"dataset is missing column {feat.name!r}")
        positions[feat.name] = header.index(feat.name)

    rows: list[DesignPoint] = []
    for row_index, record in enumerate(reader):
        if not record:
            continue
        values: list[Value] = []
        for feat in schema.features:
            cell = record[positions[feat.name]].strip()
            if feat.is_continuous:
                try:
                    value: Value = float(cell)
                except ValueError:
                    raise RowValidationError(row_index, feat.name, f"cannot parse {cell!r} as a number") from None
                if not np.isfinite(value):
                    raise RowValidationError(row_index, feat.name, f"{cell!r} is not finite")
            else:
                if cell not in feat.categories:
                    raise RowValidationError(row_index, feat.name, f"{cell!r} is not one of {list(feat.categories)}")
                value = cell
            values.append(value)
        rows.append(tuple(values))
    return Dataset(schema=schema, rows=tuple(rows))


def random_point(dataset: Dataset, query: DesignPoint, rng: np.random.Generator) -> DesignPoint:
    """Draw a uniform dataset row, freezing non-actionable features at the query.

    Raises :class:`DesignSpaceError` on an empty dataset.
    """
    if len(dataset) == 0:
        raise DesignSpaceError("cannot draw from an empty dataset")
    row = dataset.rows[int(rng.integers(0, len(dataset)))]
    return overwrite_non_actionable(row, query, dataset.schema)


def uniform_point(schema: DesignSchema, query: DesignPoint, rng: np.random.Generator) -> DesignPoint:
    """Draw uniformly over bounds/categories for actionable features only."""
    values: list[Value] = []
    for feat, q in zip(schema.features, query):
        if not feat.actionable:
            values.append(q)
        elif feat.is_continuous:
            values.append(float(rng.uniform(feat.lower, feat.upper)))
        else:
            values.append(feat.categories[int(rng.integers(0, len(feat.categories)))])
    return tuple(values)


def overwrite_non_actionable(values: Sequence[Value], query: DesignPoint, schema: DesignSchema) -> DesignPoint:
    return tuple(
        q if not feat.actionable else v
        for feat, v, q in zip(schema.features, values, query)
    )


# --- schema (de)serialization ---------------------------------------------

_FEATURE_KEYS = {"name", "kind", "lower", "upper", "categories", "actionable"}


def feature_from_doc(doc: dict, where: str = "feature") -> FeatureSpec:
    unknown = set(doc) - _FEATURE_KEYS
    if unknown:
        raise DesignSpaceError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        kind = doc["kind"]
        name = doc["name"]
    except KeyError as exc:
        raise DesignSpaceError(f"{where}: missing key {exc}") from None
    return FeatureSpec(
        name=name,
        kind=kind,
        lower=doc.get("lower"),
        upper=doc.get("upper"),
        categories=tuple(doc["categories"]) if "categories" in doc else None,
        actionable=bool(doc.get("actionable", True)),
    )


def schema_from_doc(doc: dict) -> DesignSchema:
    if set(doc) != {"features"}:
        raise DesignSpaceError(f"schema document must have exactly a 'features' key, got {sorted(doc)}")
    features = tuple(
        feature_from_doc(f, where=f"features[{i}]") for i, f in enumerate(doc["features"])
    )
    return DesignSchema(features=features)


def schema_to_doc(schema: DesignSchema) -> dict:
    features = []
    for f in schema.features:
        entry: dict = {"name": f.name, "kind": f.kind, "actionable": f.actionable}
        if f.is_continuous:
            entry["lower"] = f.lower
            entry["upper"] = f.upper
        else:
            entry["categories"] = list(f.categories)
        features.append(entry)
    return {"features": features}


def load_schema(source: Union[str, Path, TextIO]) -> DesignSchema:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return schema_from_doc(json.load(handle))
    if isinstance(source, io.TextIOBase):
        return schema_from_doc(json.load(source))
    return schema_from_doc(json.load(source))
