"""Counterfactual quality objectives over mixed-variable design points.

Three built-in objectives are always computed against the query:

- proximity: mean per-feature Gower distance,
- sparsity: fraction of features whose value changed,
- manifold proximity: mean Gower distance to the k nearest dataset rows.

User-supplied auxiliary objectives read predictor output channels (or an
arithmetic expression over them). All objectives are stored in minimization
convention: maximize-direction auxiliaries are negated on evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .design_space import Dataset, DesignSchema, DesignSpaceError, Value
from .expressions import compile_expression

# Tolerance for deciding a continuous feature "changed", relative to its
# range; the floor guards constant columns.
CHANGE_TOLERANCE = 1e-9
RANGE_FLOOR = 1e-12

MINIMIZE = "minimize"
MAXIMIZE = "maximize"


@dataclass(frozen=True)
class ObjectiveValues:
    """All objective values for one candidate, minimization convention."""

    proximity: float
    sparsity: float
    manifold_proximity: float
    auxiliary: tuple[float, ...] = ()

    def as_array(self) -> np.ndarray:
        return np.array([self.proximity, self.sparsity, self.manifold_proximity, *self.auxiliary])


@dataclass(frozen=True)
class AuxiliaryObjectiveSpec:
    """A user objective evaluated from predictor output channels.

    Exactly one of ``channel`` (a predictor output channel name) or
    ``expression`` (arithmetic over channel names) must be given.
    """

    name: str
    direction: str = MINIMIZE
    channel: str | None = None
    expression: str | None = None

    def __post_init__(self):
        if self.direction not in (MINIMIZE, MAXIMIZE):
            raise DesignSpaceError(f"objective {self.name!r}: direction must be minimize or maximize")
        if (self.channel is None) == (self.expression is None):
            raise DesignSpaceError(f"objective {self.name!r}: give exactly one of channel or expression")

    def required_channels(self) -> tuple[str, ...]:
        if self.channel is not None:
            return (self.channel,)
        return compile_expression(self.expression).variables

    def raw_value(self, channels: Mapping[str, float]) -> float:
        """Evaluate the user-facing (direction-preserving) value."""
        if self.channel is not None:
            try:
                return float(channels[self.channel])
            except KeyError:
                raise DesignSpaceError(f"objective {self.name!r}: channel {self.channel!r} not available") from None
        expr = compile_expression(self.expression)
        missing = [v for v in expr.variables if v not in channels]
        if missing:
            raise DesignSpaceError(f"objective {self.name!r}: channels {missing} not available")
        return float(expr(channels))

    def stored_value(self, channels: Mapping[str, float]) -> float:
        """Evaluate in minimization convention (maximize values are negated)."""
        raw = self.raw_value(channels)
        return -raw if self.direction == MAXIMIZE else raw

    def to_raw(self, stored: float) -> float:
        return -stored if self.direction == MAXIMIZE else stored


def _check_same_schema(p: Sequence[Value], q: Sequence[Value], schema: DesignSchema) -> None:
    for label, point in (("p", p), ("q", q)):
        result = schema.validate_values(point)
        if not result:
            raise DesignSpaceError(f"{label} does not match schema ({result.feature}): {result.message}")


def gower_matrix(a: np.ndarray, b: np.ndarray, schema: DesignSchema, ranges: np.ndarray) -> np.ndarray:
    """Pairwise Gower distances between encoded point matrices.

    Args:
        a: encoded points, shape (n, d).
        b: encoded points, shape (m, d).
        schema: shared design schema.
        ranges: per-feature observed ranges (NaN at categorical positions).

    Returns:
        Distance matrix of shape (n, m). Continuous features contribute
        |a-b|/range (equality indicator when the range is zero); categorical
        features contribute an inequality indicator. Values may exceed 1 for
        points outside the observed dataset bounds.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d = schema.dimension
    cont = schema.continuous_mask
    total = np.zeros((a.shape[0], b.shape[0]))
    if cont.any():
        r = ranges[cont]
        diff = np.abs(a[:, None, cont] - b[None, :, cont])
        pos = r > 0.0
        if pos.any():
            total += (diff[:, :, pos] / r[pos]).sum(axis=2)
        if (~pos).any():
            total += (diff[:, :, ~pos] > 0.0).sum(axis=2)
    if (~cont).any():
        total += (a[:, None, ~cont] != b[None, :, ~cont]).sum(axis=2)
    return total / d


def changed_matrix(a: np.ndarray, b: np.ndarray, schema: DesignSchema, ranges: np.ndarray) -> np.ndarray:
    """Boolean (n, m, d) array marking per-feature changes between points."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    cont = schema.continuous_mask
    changed = np.zeros((a.shape[0], b.shape[0], schema.dimension), dtype=bool)
    if cont.any():
        tol = CHANGE_TOLERANCE * np.maximum(ranges[cont], RANGE_FLOOR)
        changed[:, :, cont] = np.abs(a[:, None, cont] - b[None, :, cont]) > tol
    if (~cont).any():
        changed[:, :, ~cont] = a[:, None, ~cont] != b[None, :, ~cont]
    return changed


def gower_distance(p: Sequence[Value], q: Sequence[Value], dataset_or_ranges, schema: DesignSchema | None = None) -> float:
    """Gower distance between two design points.

    Accepts either a Dataset (schema and ranges taken from it) or an explicit
    ranges array plus schema.
    """
    schema, ranges = _resolve_ranges(dataset_or_ranges, schema)
    _check_same_schema(p, q, schema)
    return float(gower_matrix(schema.encode(p), schema.encode(q), schema, ranges)[0, 0])


def changed_feature_ratio(p: Sequence[Value], q: Sequence[Value], dataset_or_ranges, schema: DesignSchema | None = None) -> float:
    """Fraction of features (out of all d) whose value differs between p and q."""
    schema, ranges = _resolve_ranges(dataset_or_ranges, schema)
    _check_same_schema(p, q, schema)
    changed = changed_matrix(schema.encode(p), schema.encode(q), schema, ranges)[0, 0]
    return float(changed.sum() / schema.dimension)


def avg_gower_to_knn(p: Sequence[Value], dataset: Dataset, k: int) -> float:
    """Mean Gower distance from p to its k nearest dataset rows."""
    if k < 1 or k > len(dataset):
        raise DesignSpaceError(f"k must be in [1, {len(dataset)}], got {k}")
    schema = dataset.schema
    result = schema.validate_values(p)
    if not result:
        raise DesignSpaceError(f"point does not match schema ({result.feature}): {result.message}")
    distances = gower_matrix(schema.encode(p), dataset.encoded, schema, dataset.ranges)[0]
    return float(np.partition(distances, k - 1)[:k].mean())


def manifold_proximity_batch(encoded: np.ndarray, dataset: Dataset, k: int) -> np.ndarray:
    """Vectorized avg_gower_to_knn over many encoded points."""
    if k < 1 or k > len(dataset):
        raise DesignSpaceError(f"k must be in [1, {len(dataset)}], got {k}")
    distances = gower_matrix(encoded, dataset.encoded, dataset.schema, dataset.ranges)
    return np.partition(distances, k - 1, axis=1)[:, :k].mean(axis=1)


def evaluate_objectives(
    p: Sequence[Value],
    q: Sequence[Value],
    dataset: Dataset | None,
    aux_specs: Sequence[AuxiliaryObjectiveSpec],
    channels: Mapping[str, float],
    schema: DesignSchema | None = None,
    knn_k: int = 5,
) -> ObjectiveValues:
    """Evaluate all objectives for one candidate against the query.

    ``channels`` must contain every predictor output referenced by
    ``aux_specs``. With no dataset, manifold proximity is 0 and ranges fall
    back to the schema's bounds widths.
    """
    schema, ranges = _resolve_ranges(dataset if dataset is not None else schema, schema)
    _check_same_schema(p, q, schema)
    ep, eq = schema.encode(p), schema.encode(q)
    proximity = float(gower_matrix(ep, eq, schema, ranges)[0, 0])
    sparsity = float(changed_matrix(ep, eq, schema, ranges)[0, 0].sum() / schema.dimension)
    if dataset is not None and len(dataset):
        manifold = float(manifold_proximity_batch(ep.reshape(1, -1), dataset, min(knn_k, len(dataset)))[0])
    else:
        manifold = 0.0
    auxiliary = tuple(spec.stored_value(channels) for spec in aux_specs)
    return ObjectiveValues(proximity, sparsity, manifold, auxiliary)


def bounds_ranges(schema: DesignSchema) -> np.ndarray:
    """Fallback ranges when no dataset is given: bounds widths."""
    ranges = np.full(schema.dimension, np.nan)
    cont = schema.continuous_mask
    ranges[cont] = schema.upper_bounds[cont] - schema.lower_bounds[cont]
    return ranges


def _resolve_ranges(dataset_or_ranges, schema: DesignSchema | None) -> tuple[DesignSchema, np.ndarray]:
    if isinstance(dataset_or_ranges, Dataset):
        return dataset_or_ranges.schema, dataset_or_ranges.ranges
    if isinstance(dataset_or_ranges, DesignSchema) and schema is None:
        return dataset_or_ranges, bounds_ranges(dataset_or_ranges)
    if schema is None:
        raise DesignSpaceError("a schema is required when passing raw ranges")
    return schema, np.asarray(dataset_or_ranges, dtype=float)
