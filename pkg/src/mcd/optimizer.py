"""Mixed-variable NSGA-II search that fills a feasible-candidate archive.

The optimizer runs constrained non-dominated sorting (feasibility first, then
total violation, then Pareto dominance), binary tournaments on rank and
crowding, simulated binary crossover and polynomial mutation on continuous
genes, uniform swap/redraw operators on categorical genes, and a revert
operator that restores exact query values so sparse counterfactuals stay
reachable. Every feasible, query-distinct candidate ever evaluated lands in
the archive, which is the sole input of the sampling stage.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .design_space import (
    DesignPoint,
    DesignSchema,
    random_point,
    schema_from_doc,
    schema_to_doc,
    uniform_point,
)
from .objectives import (
    AuxiliaryObjectiveSpec,
    ObjectiveValues,
    changed_matrix,
    gower_matrix,
    manifold_proximity_batch,
)
from .predictors import PredictorError, PredictorRuntime
from .problem import ProblemSpec, violations_batch

SCHEMA_VERSION = "1"


class OptimizationError(RuntimeError):
    """Run aborted; carries whatever archive had been collected."""

    def __init__(self, message: str, partial_archive: "CandidateArchive | None" = None):
        super().__init__(message)
        self.partial_archive = partial_archive


class ArchiveError(ValueError):
    """Unreadable or incompatible archive file."""


@dataclass(frozen=True)
class OptimizerConfig:
    """NSGA-II settings. Population must be even and at least 4."""

    population: int = 100
    generations: int = 100
    crossover_probability: float = 0.9
    crossover_eta: float = 15.0
    mutation_probability: float | None = None  # default: 1 / actionable count
    mutation_eta: float = 20.0
    revert_probability: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ValueError("population size must be even and >= 4")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_probability", "revert_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.mutation_probability is not None and not 0.0 <= self.mutation_probability <= 1.0:
            raise ValueError("mutation_probability must be in [0, 1]")
        if self.crossover_eta <= 0 or self.mutation_eta <= 0:
            raise ValueError("distribution indices must be > 0")

    def to_doc(self) -> dict:
        return {
            "population": self.population,
            "generations": self.generations,
            "crossover_probability": self.crossover_probability,
            "crossover_eta": self.crossover_eta,
            "mutation_probability": self.mutation_probability,
            "mutation_eta": self.mutation_eta,
            "revert_probability": self.revert_probability,
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "OptimizerConfig":
        unknown = set(doc) - set(cls().to_doc())
        if unknown:
            raise ValueError(f"optimizer config: unknown keys {sorted(unknown)}")
        return cls(**doc)


@dataclass
class Individual:
    """One candidate with its evaluation and sorting bookkeeping."""

    values: DesignPoint
    objectives: ObjectiveValues | None = None
    violation: float = math.inf
    rank: int = -1
    crowding: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0


def dominates(a: Individual, b: Individual) -> bool:
    """Constrained domination: feasibility, then violation, then Pareto."""
    if a.feasible and not b.feasible:
        return True
    if not a.feasible and not b.feasible:
        return a.violation < b.violation
    if not a.feasible:
        return False
    fa, fb = a.objectives.as_array(), b.objectives.as_array()
    return bool(np.all(fa <= fb) and np.any(fa < fb))


def _dominance_matrix(F: np.ndarray, V: np.ndarray) -> np.ndarray:
    feasible = V <= 0.0
    fi, fj = feasible[:, None], feasible[None, :]
    less_eq = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    strict = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return (fi & ~fj) | (~fi & ~fj & (V[:, None] < V[None, :])) | (fi & fj & less_eq & strict)


def _sort_fronts(F: np.ndarray, V: np.ndarray) -> list[np.ndarray]:
    """Fast non-dominated sort; fronts hold original indices in order."""
    n = len(F)
    dom = _dominance_matrix(F, V)
    counts = dom.sum(axis=0)
    fronts: list[np.ndarray] = []
    assigned = np.zeros(n, dtype=bool)
    while not assigned.all():
        current = np.flatnonzero((counts == 0) & ~assigned)
        fronts.append(current)
        assigned[current] = True
        counts = counts - dom[current].sum(axis=0)
    return fronts


def _crowding_values(F: np.ndarray) -> np.ndarray:
    n = len(F)
    if n <= 2:
        return np.full(n, np.inf)
    crowd = np.zeros(n)
    for col in range(F.shape[1]):
        values = F[:, col]
        order = np.argsort(values, kind="stable")
        lo, hi = values[order[0]], values[order[-1]]
        if hi == lo:
            continue
        crowd[order[1:-1]] += (values[order[2:]] - values[order[:-2]]) / (hi - lo)
        crowd[order[0]] = np.inf
        crowd[order[-1]] = np.inf
    return crowd


def nondominated_sort(population: Sequence[Individual]) -> list[list[Individual]]:
    """Partition a population into fronts and set each individual's rank."""
    if not population:
        raise ValueError("population must be nonempty")
    F = np.vstack([ind.objectives.as_array() for ind in population])
    V = np.array([ind.violation for ind in population])
    fronts = []
    for rank, front in enumerate(_sort_fronts(F, V)):
        members = [population[i] for i in front]
        for ind in members:
            ind.rank = rank
        fronts.append(members)
    return fronts


def crowding_distance(front: Sequence[Individual]) -> np.ndarray:
    """Standard crowding distance; also stored on the individuals."""
    if not front:
        raise ValueError("front must be nonempty")
    F = np.vstack([ind.objectives.as_array() for ind in front])
    crowd = _crowding_values(F)
    for ind, value in zip(front, crowd):
        ind.crowding = float(value)
    return crowd


def revert_operator(
    values: Sequence,
    query: DesignPoint,
    probability: float,
    rng: np.random.Generator,
    schema: DesignSchema,
) -> DesignPoint:
    """Independently restore each actionable feature to the query's value."""
    out = list(values)
    for i, feat in enumerate(schema.features):
        if feat.actionable and rng.random() < probability:
            out[i] = query[i]
    return tuple(out)


def _offspring_matrix(
    X: np.ndarray,
    ranks: np.ndarray,
    crowding: np.ndarray,
    config: OptimizerConfig,
    schema: DesignSchema,
    query_encoded: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Produce one offspring generation from an evaluated population."""
    n, d = X.shape
    actionable = schema.actionable_mask
    cont = schema.continuous_mask & actionable
    cat = ~schema.continuous_mask & actionable
    n_act = int(actionable.sum())
    p_mut = config.mutation_probability if config.mutation_probability is not None else 1.0 / n_act

    # Binary tournament on (rank, crowding); ties keep the first draw.
    draws = rng.integers(0, n, size=(n, 2))
    first, second = draws[:, 0], draws[:, 1]
    first_wins = (ranks[first] < ranks[second]) | (
        (ranks[first] == ranks[second]) & (crowding[first] >= crowding[second])
    )
    winners = np.where(first_wins, first, second)
    a = X[winners[0::2]].copy()
    b = X[winners[1::2]].copy()
    half = n // 2

    do_pair = rng.random(half) < config.crossover_probability
    if cont.any():
        m = int(cont.sum())
        cross = (rng.random((half, m)) < 0.5) & do_pair[:, None]
        u = rng.random((half, m))
        exponent = 1.0 / (config.crossover_eta + 1.0)
        beta = np.where(u <= 0.5, (2.0 * u) ** exponent, (1.0 / (2.0 * (1.0 - u))) ** exponent)
        pa, pb = a[:, cont], b[:, cont]
        child1 = 0.5 * ((1.0 + beta) * pa + (1.0 - beta) * pb)
        child2 = 0.5 * ((1.0 - beta) * pa + (1.0 + beta) * pb)
        lo, hi = schema.lower_bounds[cont], schema.upper_bounds[cont]
        a[:, cont] = np.where(cross, np.clip(child1, lo, hi), pa)
        b[:, cont] = np.where(cross, np.clip(child2, lo, hi), pb)
    if cat.any():
        m = int(cat.sum())
        swap = (rng.random((half, m)) < 0.5) & do_pair[:, None]
        pa, pb = a[:, cat].copy(), b[:, cat].copy()
        a[:, cat] = np.where(swap, pb, pa)
        b[:, cat] = np.where(swap, pa, pb)

    offspring = np.empty_like(X)
    offspring[0::2] = a
    offspring[1::2] = b

    if cont.any():
        m = int(cont.sum())
        mutate = rng.random((n, m)) < p_mut
        u = rng.random((n, m))
        lo, hi = schema.lower_bounds[cont], schema.upper_bounds[cont]
        span = hi - lo
        x = offspring[:, cont]
        d1 = np.clip((x - lo) / span, 0.0, 1.0)
        d2 = np.clip((hi - x) / span, 0.0, 1.0)
        power = 1.0 / (config.mutation_eta + 1.0)
        low_side = (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (config.mutation_eta + 1.0)) ** power - 1.0
        high_side = 1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (config.mutation_eta + 1.0)) ** power
        delta = np.where(u < 0.5, low_side, high_side)
        offspring[:, cont] = np.where(mutate, np.clip(x + delta * span, lo, hi), x)
    if cat.any():
        for col in np.flatnonzero(cat):
            mutate = rng.random(n) < p_mut
            redraw = rng.integers(0, schema.category_counts[col], size=n).astype(float)
            offspring[:, col] = np.where(mutate, redraw, offspring[:, col])

    if actionable.any() and config.revert_probability > 0.0:
        revert = rng.random((n, n_act)) < config.revert_probability
        act = np.flatnonzero(actionable)
        offspring[:, act] = np.where(revert, query_encoded[act], offspring[:, act])
    offspring[:, ~actionable] = query_encoded[~actionable]
    return offspring


def make_offspring(
    parents: Sequence[Individual],
    config: OptimizerConfig,
    query: DesignPoint,
    schema: DesignSchema,
    rng: np.random.Generator,
) -> list[Individual]:
    """Breed one unevaluated offspring population from sorted parents."""
    X = schema.encode_many([ind.values for ind in parents])
    ranks = np.array([ind.rank for ind in parents])
    crowding = np.array([ind.crowding for ind in parents])
    matrix = _offspring_matrix(X, ranks, crowding, config, schema, schema.encode(query), rng)
    return [Individual(values=v) for v in schema.decode_many(matrix)]


@dataclass(frozen=True)
class ArchiveEntry:
    """One feasible candidate with its cached objectives and outputs."""

    values: DesignPoint
    objectives: ObjectiveValues
    channels: dict[str, float]


@dataclass(frozen=True)
class CandidateArchive:
    """Deduplicated feasible candidates: the decoupling boundary.

    Carries everything the sampling stage needs (schema, ranges, query,
    auxiliary objective declarations) so resampling never touches the
    dataset or predictors again.
    """

    problem_hash: str
    schema: DesignSchema
    query: DesignPoint
    ranges: tuple[float | None, ...]
    aux_objectives: tuple[AuxiliaryObjectiveSpec, ...]
    optimizer_config: OptimizerConfig
    knn_k: int
    entries: tuple[ArchiveEntry, ...]
    schema_version: str = SCHEMA_VERSION
    encoded: np.ndarray = field(init=False, repr=False, compare=False)
    ranges_array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(
            self, "encoded", self.schema.encode_many([e.values for e in self.entries])
        )
        object.__setattr__(
            self,
            "ranges_array",
            np.array([np.nan if r is None else float(r) for r in self.ranges]),
        )

    def __len__(self) -> int:
        return len(self.entries)

    def objective_matrix(self) -> np.ndarray:
        if not self.entries:
            return np.empty((0, 3 + len(self.aux_objectives)))
        return np.vstack([e.objectives.as_array() for e in self.entries])

    def to_doc(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "problem_hash": self.problem_hash,
            "config": {
                "optimizer": self.optimizer_config.to_doc(),
                "schema": schema_to_doc(self.schema),
                "query": list(self.query),
                "ranges": list(self.ranges),
                "objectives": [
                    {"name": o.name, "direction": o.direction, "channel": o.channel, "expression": o.expression}
                    for o in self.aux_objectives
                ],
                "knn_k": self.knn_k,
            },
            "entries": [
                {
                    "values": list(e.values),
                    "objectives": {
                        "proximity": e.objectives.proximity,
                        "sparsity": e.objectives.sparsity,
                        "manifold_proximity": e.objectives.manifold_proximity,
                        "auxiliary": list(e.objectives.auxiliary),
                    },
                    "channels": e.channels,
                }
                for e in self.entries
            ],
        }

    def save(self, path: str | Path) -> None:
        """Write atomically; output is byte-deterministic for equal content."""
        path = Path(path)
        blob = json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":")) + "\n"
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(blob)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def from_doc(cls, doc: dict) -> "CandidateArchive":
        try:
            version = doc["schema_version"]
            if version != SCHEMA_VERSION:
                raise ArchiveError(f"unsupported archive schema version {version!r}")
            config = doc["config"]
            schema = schema_from_doc(config["schema"])
            aux = tuple(
                AuxiliaryObjectiveSpec(
                    name=o["name"], direction=o["direction"],
                    channel=o.get("channel"), expression=o.get("expression"),
                )
                for o in config["objectives"]
            )
            entries = tuple(
                ArchiveEntry(
                    values=schema.canonical_point(e["values"]),
                    objectives=ObjectiveValues(
                        proximity=e["objectives"]["proximity"],
                        sparsity=e["objectives"]["sparsity"],
                        manifold_proximity=e["objectives"]["manifold_proximity"],
                        auxiliary=tuple(e["objectives"]["auxiliary"]),
                    ),
                    channels=dict(e["channels"]),
                )
                for e in doc["entries"]
            )
            return cls(
                problem_hash=doc["problem_hash"],
                schema=schema,
                query=schema.canonical_point(config["query"]),
                ranges=tuple(config["ranges"]),
                aux_objectives=aux,
                optimizer_config=OptimizerConfig.from_doc(config["optimizer"]),
                knn_k=int(config["knn_k"]),
                entries=entries,
                schema_version=version,
            )
        except ArchiveError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ArchiveError(f"malformed archive document: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "CandidateArchive":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ArchiveError(f"{path}: not valid JSON: {exc}") from None
        return cls.from_doc(doc)


@dataclass(frozen=True)
class GenerationProgress:
    generation: int
    feasible: int
    best_violation: float
    archive_size: int


ProgressSink = Callable[[GenerationProgress], None]


class _ArchiveBuilder:
    def __init__(self, spec: ProblemSpec, config: OptimizerConfig):
        self.spec = spec
        self.config = config
        self.seen: set[DesignPoint] = set()
        self.entries: list[ArchiveEntry] = []

    def add(self, points, objectives: list[ObjectiveValues], violations, records) -> None:
        for values, objs, violation, record in zip(points, objectives, violations, records):
            if violation != 0.0 or values == self.spec.query or values in self.seen:
                continue
            self.seen.add(values)
            self.entries.append(ArchiveEntry(values=values, objectives=objs, channels=dict(record.outputs)))

    def build(self) -> CandidateArchive:
        ranges = self.spec.ranges
        return CandidateArchive(
            problem_hash=self.spec.problem_hash(),
            schema=self.spec.schema,
            query=self.spec.query,
            ranges=tuple(None if math.isnan(r) else float(r) for r in ranges),
            aux_objectives=self.spec.aux_objectives,
            optimizer_config=self.config,
            knn_k=self.spec.knn_k,
            entries=tuple(self.entries),
        )


def _evaluate_generation(
    points: list[DesignPoint],
    X: np.ndarray,
    spec: ProblemSpec,
    runtime: PredictorRuntime,
    query_encoded: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, list[ObjectiveValues], list]:
    """Predict and score one generation; returns (F, V, objectives, records)."""
    records = runtime.predict_batch(points)
    names = runtime.channels
    channel_matrix = np.full((len(points), len(names)), np.nan)
    failed = np.zeros(len(points), dtype=bool)
    for i, record in enumerate(records):
        if record.failed:
            failed[i] = True
        else:
            channel_matrix[i] = [record.outputs[c] for c in names]

    schema, ranges = spec.schema, spec.ranges
    proximity = gower_matrix(X, query_encoded.reshape(1, -1), schema, ranges)[:, 0]
    sparsity = changed_matrix(X, query_encoded.reshape(1, -1), schema, ranges)[:, 0, :].sum(axis=1) / schema.dimension
    if spec.dataset is not None and len(spec.dataset):
        manifold = manifold_proximity_batch(X, spec.dataset, spec.knn_k)
    else:
        manifold = np.zeros(len(points))

    index = {name: i for i, name in enumerate(names)}
    aux_columns = []
    for objective in spec.aux_objectives:
        if objective.channel is not None:
            column = channel_matrix[:, index[objective.channel]].copy()
            if objective.direction == "maximize":
                column = -column
        else:
            column = np.empty(len(points))
            for i in range(len(points)):
                if failed[i]:
                    column[i] = np.nan
                else:
                    column[i] = objective.stored_value({n: channel_matrix[i, j] for n, j in index.items()})
        aux_columns.append(column)
    aux_matrix = np.column_stack(aux_columns) if aux_columns else np.empty((len(points), 0))

    F = np.column_stack([proximity, sparsity, manifold, aux_matrix])
    V = violations_batch(channel_matrix, names, points, failed, spec)
    # Any non-finite objective (failed prediction, degenerate expression)
    # makes the candidate infinitely violating rather than crashing the run.
    bad = ~np.isfinite(F).all(axis=1)
    F[bad] = np.where(np.isfinite(F[bad]), F[bad], np.inf)
    V[bad] = np.inf

    objectives = [
        ObjectiveValues(
            proximity=float(F[i, 0]),
            sparsity=float(F[i, 1]),
            manifold_proximity=float(F[i, 2]),
            auxiliary=tuple(float(x) for x in F[i, 3:]),
        )
        for i in range(len(points))
    ]
    return F, V, objectives, records


def _elitist_select(F: np.ndarray, V: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pick n survivors; returns (indices, ranks, crowding) aligned to picks."""
    fronts = _sort_fronts(F, V)
    chosen: list[int] = []
    ranks: list[int] = []
    crowds: list[float] = []
    for rank, front in enumerate(fronts):
        crowd = _crowding_values(F[front])
        if len(chosen) + len(front) <= n:
            chosen.extend(int(i) for i in front)
            ranks.extend([rank] * len(front))
            crowds.extend(float(c) for c in crowd)
        else:
            keep = n - len(chosen)
            # Highest crowding first, ties by pool position (stable sort).
            ordered = np.argsort(-crowd, kind="stable")[:keep]
            chosen.extend(int(front[i]) for i in ordered)
            ranks.extend([rank] * keep)
            crowds.extend(float(crowd[i]) for i in ordered)
            break
        if len(chosen) == n:
            break
    return np.array(chosen, dtype=int), np.array(ranks, dtype=int), np.array(crowds)


def run_optimization(
    spec: ProblemSpec,
    config: OptimizerConfig,
    progress: ProgressSink | None = None,
    runtime: PredictorRuntime | None = None,
) -> CandidateArchive:
    """Run the full search and return the archive of feasible candidates.

    The initial population is the query plus population-1 random draws
    (dataset rows when a dataset exists, else uniform over the bounds).
    Identical (spec, config) inputs produce identical archives, entry order
    included. On predictor failure the partial archive is preserved on the
    raised :class:`OptimizationError`.
    """
    rng = np.random.default_rng(config.seed)
    owns_runtime = runtime is None
    if runtime is None:
        runtime = PredictorRuntime(spec.predictors, spec.schema)
    builder = _ArchiveBuilder(spec, config)
    schema = spec.schema
    query_encoded = schema.encode(spec.query)

    try:
        points = [spec.query]
        for _ in range(config.population - 1):
            if spec.dataset is not None and len(spec.dataset):
                points.append(random_point(spec.dataset, spec.query, rng))
            else:
                points.append(uniform_point(schema, spec.query, rng))
        X = schema.encode_many(points)
        try:
            F, V, objectives, records = _evaluate_generation(points, X, spec, runtime, query_encoded)
        except PredictorError as exc:
            raise OptimizationError(str(exc), partial_archive=builder.build()) from exc
        builder.add(points, objectives, V, records)

        for generation in range(1, config.generations + 1):
            _, ranks, crowds = _rank_population(F, V)
            X_off = _offspring_matrix(X, ranks, crowds, config, schema, query_encoded, rng)
            off_points = schema.decode_many(X_off)
            try:
                F_off, V_off, obj_off, rec_off = _evaluate_generation(off_points, X_off, spec, runtime, query_encoded)
            except PredictorError as exc:
                raise OptimizationError(str(exc), partial_archive=builder.build()) from exc
            builder.add(off_points, obj_off, V_off, rec_off)

            pool_F = np.vstack([F, F_off])
            pool_V = np.concatenate([V, V_off])
            pool_X = np.vstack([X, X_off])
            pool_points = points + off_points
            survivors, _, _ = _elitist_select(pool_F, pool_V, config.population)
            F, V, X = pool_F[survivors], pool_V[survivors], pool_X[survivors]
            points = [pool_points[i] for i in survivors]

            if progress is not None:
                feasible = int((V == 0.0).sum())
                progress(GenerationProgress(
                    generation=generation,
                    feasible=feasible,
                    best_violation=float(V.min()),
                    archive_size=len(builder.entries),
                ))
        return builder.build()
    finally:
        if owns_runtime:
            runtime.close()


def _rank_population(F: np.ndarray, V: np.ndarray) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    fronts = _sort_fronts(F, V)
    ranks = np.empty(len(F), dtype=int)
    crowds = np.empty(len(F))
    for rank, front in enumerate(fronts):
        ranks[front] = rank
        crowds[front] = _crowding_values(F[front])
    return fronts, ranks, crowds
