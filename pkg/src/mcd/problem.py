"""Problem assembly: query, constraints, auxiliary objectives, predictors.

A problem couples a design schema and query with black-box predictors, hard
output constraints (closed bounds on predictor channels), domain constraint
functions (satisfied when >= 0), and auxiliary objectives. Constraint
violations aggregate to a single non-negative scalar that is zero exactly on
the feasible set; two-sided output constraints are normalized by their bound
width so heterogeneous channels sum comparably.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .design_space import (
    Dataset,
    DesignPoint,
    DesignSchema,
    DesignSpaceError,
    load_dataset,
    schema_from_doc,
    schema_to_doc,
)
from .objectives import AuxiliaryObjectiveSpec, bounds_ranges
from .predictors import (
    BuiltinBackend,
    PredictionRecord,
    PredictorSpec,
    SubprocessBackend,
)

SCHEMA_VERSION = "1"


class ConfigError(ValueError):
    """Malformed problem configuration."""


@dataclass(frozen=True)
class OutputConstraint:
    """Closed bounds on one predictor output channel; at least one finite."""

    channel: str
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if self.lower > self.upper:
            raise ConfigError(f"constraint on {self.channel!r}: lower {self.lower} > upper {self.upper}")
        if math.isinf(self.lower) and math.isinf(self.upper):
            raise ConfigError(f"constraint on {self.channel!r}: at least one bound must be finite")

    @property
    def width(self) -> float:
        """Normalizer for violation aggregation: bound width when two-sided."""
        if math.isfinite(self.lower) and math.isfinite(self.upper) and self.upper > self.lower:
            return self.upper - self.lower
        return 1.0


@dataclass(frozen=True)
class DomainConstraintSpec:
    """Named black-box constraint g(p), satisfied iff g(p) >= 0."""

    name: str
    function: Callable[[DesignPoint], float]


_DOMAIN_CONSTRAINTS: dict[str, Callable[[DesignPoint], float]] = {}


def register_domain_constraint(name: str, fn: Callable[[DesignPoint], float]) -> None:
    """Register a constraint function id usable from configuration files."""
    _DOMAIN_CONSTRAINTS[name] = fn


@dataclass(frozen=True)
class ProblemSpec:
    """The complete counterfactual search problem."""

    schema: DesignSchema
    query: DesignPoint
    predictors: tuple[PredictorSpec, ...]
    dataset: Dataset | None = None
    output_constraints: tuple[OutputConstraint, ...] = ()
    domain_constraints: tuple[DomainConstraintSpec, ...] = ()
    aux_objectives: tuple[AuxiliaryObjectiveSpec, ...] = ()
    knn_k: int = 5

    def __post_init__(self):
        object.__setattr__(self, "query", self.schema.canonical_point(self.query))
        if self.dataset is not None and self.dataset.schema is not self.schema:
            if self.dataset.schema != self.schema:
                raise ConfigError("dataset schema differs from problem schema")
        channels = set()
        for spec in self.predictors:
            channels.update(spec.channels)
        for constraint in self.output_constraints:
            if constraint.channel not in channels:
                raise ConfigError(f"constrained channel {constraint.channel!r} is not produced by any predictor")
        names = [o.name for o in self.aux_objectives]
        if len(set(names)) != len(names):
            raise ConfigError("auxiliary objective names must be unique")
        for objective in self.aux_objectives:
            missing = [c for c in objective.required_channels() if c not in channels]
            if missing:
                raise ConfigError(f"objective {objective.name!r} references unknown channels {missing}")
        if self.knn_k < 1:
            raise ConfigError("knn k must be >= 1")
        if self.dataset is not None and len(self.dataset) and self.knn_k > len(self.dataset):
            raise ConfigError(f"knn k = {self.knn_k} exceeds dataset size {len(self.dataset)}")

    @property
    def ranges(self) -> np.ndarray:
        if self.dataset is not None and len(self.dataset):
            return self.dataset.ranges
        return bounds_ranges(self.schema)

    def problem_hash(self) -> str:
        """Content hash of everything the cached objective values depend on.

        Predictor backends are deliberately excluded: sampling reads only
        cached outputs, so any backend producing the same channels is
        interchangeable at that stage.
        """
        doc = {
            "schema_version": SCHEMA_VERSION,
            "schema": schema_to_doc(self.schema),
            "query": list(self.query),
            "dataset": self._dataset_fingerprint(),
            "output_constraints": [
                {"channel": c.channel, "lower": _bound_doc(c.lower), "upper": _bound_doc(c.upper)}
                for c in self.output_constraints
            ],
            "domain_constraints": [c.name for c in self.domain_constraints],
            "objectives": [
                {"name": o.name, "direction": o.direction, "channel": o.channel, "expression": o.expression}
                for o in self.aux_objectives
            ],
            "knn_k": self.knn_k,
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def _dataset_fingerprint(self) -> str | None:
        if self.dataset is None:
            return None
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.dataset.encoded).tobytes())
        return digest.hexdigest()


def constraint_violation(
    values: Sequence,
    outputs: PredictionRecord | Mapping[str, float],
    spec: ProblemSpec,
) -> float:
    """Aggregate constraint violation; zero iff the candidate is feasible.

    Output-channel violations are normalized by bound width; domain
    constraints contribute their shortfall below zero. Failed prediction
    records are infinitely violating.
    """
    if isinstance(outputs, PredictionRecord):
        if outputs.failed:
            return math.inf
        channel_values: Mapping[str, float] = outputs.outputs
    else:
        channel_values = outputs
    total = 0.0
    for constraint in spec.output_constraints:
        try:
            observed = float(channel_values[constraint.channel])
        except KeyError:
            raise ConfigError(f"missing constrained channel {constraint.channel!r}") from None
        total += (max(0.0, constraint.lower - observed) + max(0.0, observed - constraint.upper)) / constraint.width
    for domain in spec.domain_constraints:
        total += max(0.0, -float(domain.function(tuple(values))))
    return total


def is_valid_counterfactual(
    values: Sequence,
    outputs: PredictionRecord | Mapping[str, float],
    spec: ProblemSpec,
) -> bool:
    """Feasible and different from the query in at least one feature."""
    if isinstance(outputs, PredictionRecord) and outputs.failed:
        return False
    if tuple(values) == spec.query:
        return False
    return constraint_violation(values, outputs, spec) == 0.0


def violations_batch(channel_matrix: np.ndarray, channel_names: Sequence[str], points: Sequence[DesignPoint],
                     failed: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Vectorized constraint violation for one generation of candidates."""
    n = len(points)
    total = np.zeros(n)
    index = {name: i for i, name in enumerate(channel_names)}
    for constraint in spec.output_constraints:
        col = channel_matrix[:, index[constraint.channel]]
        total += (np.maximum(0.0, constraint.lower - col) + np.maximum(0.0, col - constraint.upper)) / constraint.width
    for domain in spec.domain_constraints:
        total += np.array([max(0.0, -float(domain.function(p))) for p in points])
    total[failed] = math.inf
    return total


# --- configuration documents ------------------------------------------------

_TOP_KEYS = {"schema", "query", "dataset", "predictors", "constraints", "objectives", "optimizer", "sampling"}


def _bound_doc(x: float):
    return None if math.isinf(x) else x


def _require_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def parse_problem_config(doc: dict, base_dir: Path | None = None) -> tuple[ProblemSpec, dict]:
    """Parse a problem configuration document.

    Returns the problem plus the raw ``optimizer``/``sampling`` sections (the
    caller decides how to apply them). Unknown keys anywhere are rejected.
    Relative dataset paths resolve against ``base_dir``.
    """
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    _require_keys(doc, _TOP_KEYS, "config")
    for key in ("schema", "query", "predictors"):
        if key not in doc:
            raise ConfigError(f"config: missing required section {key!r}")

    try:
        schema = schema_from_doc(doc["schema"])
    except DesignSpaceError as exc:
        raise ConfigError(f"schema: {exc}") from None

    query_doc = doc["query"]
    if isinstance(query_doc, dict):
        _require_keys(query_doc, {"values"}, "query")
        query_doc = query_doc.get("values")
    if not isinstance(query_doc, list):
        raise ConfigError("query: expected a list of values (or {'values': [...]})")

    dataset = None
    if "dataset" in doc:
        dataset = _parse_dataset(doc["dataset"], schema, base_dir)

    predictors = tuple(
        _parse_predictor(p, i) for i, p in enumerate(doc["predictors"])
    )

    output_constraints: tuple[OutputConstraint, ...] = ()
    domain_constraints: tuple[DomainConstraintSpec, ...] = ()
    if "constraints" in doc:
        _require_keys(doc["constraints"], {"outputs", "domain"}, "constraints")
        output_constraints = tuple(
            _parse_output_constraint(c, i) for i, c in enumerate(doc["constraints"].get("outputs", []))
        )
        domain_constraints = tuple(
            _parse_domain_constraint(c, i) for i, c in enumerate(doc["constraints"].get("domain", []))
        )

    objectives = tuple(
        _parse_objective(o, i) for i, o in enumerate(doc.get("objectives", []))
    )

    sampling = doc.get("sampling", {})
    if not isinstance(sampling, dict):
        raise ConfigError("sampling: expected an object")
    _require_keys(sampling, {"knn_k"}, "sampling")
    knn_k = int(sampling.get("knn_k", 5))

    try:
        problem = ProblemSpec(
            schema=schema,
            query=tuple(query_doc),
            predictors=predictors,
            dataset=dataset,
            output_constraints=output_constraints,
            domain_constraints=domain_constraints,
            aux_objectives=objectives,
            knn_k=knn_k,
        )
    except DesignSpaceError as exc:
        raise ConfigError(str(exc)) from None

    optimizer_doc = doc.get("optimizer", {})
    if not isinstance(optimizer_doc, dict):
        raise ConfigError("optimizer: expected an object")
    return problem, optimizer_doc


def _parse_dataset(doc, schema: DesignSchema, base_dir: Path | None) -> Dataset:
    if not isinstance(doc, dict):
        raise ConfigError("dataset: expected an object with 'path' or 'rows'")
    _require_keys(doc, {"path", "rows"}, "dataset")
    if ("path" in doc) == ("rows" in doc):
        raise ConfigError("dataset: give exactly one of 'path' or 'rows'")
    if "rows" in doc:
        try:
            return Dataset(schema=schema, rows=tuple(tuple(r) for r in doc["rows"]))
        except DesignSpaceError as exc:
            raise ConfigError(f"dataset rows: {exc}") from None
    path = Path(doc["path"])
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    try:
        return load_dataset(path, schema)
    except FileNotFoundError:
        raise ConfigError(f"dataset: file not found: {path}") from None
    except DesignSpaceError as exc:
        raise ConfigError(f"dataset: {exc}") from None


def _parse_predictor(doc, index: int) -> PredictorSpec:
    where = f"predictors[{index}]"
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    _require_keys(doc, {"name", "channels", "backend"}, where)
    for key in ("name", "channels", "backend"):
        if key not in doc:
            raise ConfigError(f"{where}: missing key {key!r}")
    backend_doc = doc["backend"]
    _require_keys(backend_doc, {"type", "function", "command", "deterministic", "batch_size"}, f"{where}.backend")
    backend_type = backend_doc.get("type")
    if backend_type == "builtin":
        if "function" not in backend_doc:
            raise ConfigError(f"{where}.backend: builtin backends need 'function'")
        backend: BuiltinBackend | SubprocessBackend = BuiltinBackend(function=backend_doc["function"])
    elif backend_type == "subprocess":
        command = backend_doc.get("command")
        if not isinstance(command, list) or not command:
            raise ConfigError(f"{where}.backend: subprocess backends need a non-empty 'command' list")
        backend = SubprocessBackend(
            command=tuple(str(c) for c in command),
            deterministic=bool(backend_doc.get("deterministic", True)),
            batch_size=int(backend_doc.get("batch_size", 64)),
        )
    else:
        raise ConfigError(f"{where}.backend: unknown type {backend_type!r}")
    return PredictorSpec(name=doc["name"], channels=tuple(doc["channels"]), backend=backend)


def _parse_output_constraint(doc, index: int) -> OutputConstraint:
    where = f"constraints.outputs[{index}]"
    _require_keys(doc, {"channel", "lower", "upper"}, where)
    if "channel" not in doc:
        raise ConfigError(f"{where}: missing key 'channel'")
    lower = doc.get("lower")
    upper = doc.get("upper")
    try:
        return OutputConstraint(
            channel=doc["channel"],
            lower=-math.inf if lower is None else float(lower),
            upper=math.inf if upper is None else float(upper),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_domain_constraint(doc, index: int) -> DomainConstraintSpec:
    where = f"constraints.domain[{index}]"
    _require_keys(doc, {"name", "function"}, where)
    for key in ("name", "function"):
        if key not in doc:
            raise ConfigError(f"{where}: missing key {key!r}")
    fn_id = doc["function"]
    if fn_id not in _DOMAIN_CONSTRAINTS:
        raise ConfigError(f"{where}: unknown constraint function {fn_id!r}")
    return DomainConstraintSpec(name=doc["name"], function=_DOMAIN_CONSTRAINTS[fn_id])


def _parse_objective(doc, index: int) -> AuxiliaryObjectiveSpec:
    where = f"objectives[{index}]"
    _require_keys(doc, {"name", "direction", "channel", "expression"}, where)
    if "name" not in doc:
        raise ConfigError(f"{where}: missing key 'name'")
    try:
        return AuxiliaryObjectiveSpec(
            name=doc["name"],
            direction=doc.get("direction", "minimize"),
            channel=doc.get("channel"),
            expression=doc.get("expression"),
        )
    except DesignSpaceError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_problem_config(path: str | Path) -> tuple[ProblemSpec, dict]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}") from None
    return parse_problem_config(doc, base_dir=path.parent)


def problem_config_id(doc: dict) -> str:
    """Stable content hash of a full configuration document."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
