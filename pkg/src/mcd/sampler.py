"""Decoupled counterfactual sampling from a candidate archive.

Once an archive exists, any number of requests can re-weight and re-select
counterfactual sets without touching predictors or the dataset. Each request
scores every candidate (weighted quality objectives plus, when targets are
given, a saturating target-achievement index), builds a performance-weighted
diversity kernel over Gower distances, and greedily picks a maximin-diverse
set. A count of one degenerates to "return the single best candidate".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .design_space import DesignPoint
from .objectives import MAXIMIZE, ObjectiveValues, gower_matrix
from .optimizer import CandidateArchive
from .problem import ProblemSpec

RATIO_EPS = 1e-12


class SamplingError(ValueError):
    """Unusable request or empty candidate pool."""


class ArchiveMismatchError(SamplingError):
    """Archive was produced for a different problem than supplied."""


@dataclass(frozen=True)
class TargetSpec:
    """A sampling-time target for one auxiliary objective.

    ``alpha`` weights the objective inside the achievement index; ``beta``
    controls how quickly extra achievement beyond the target saturates.
    """

    objective: str
    target: float
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.target):
            raise SamplingError(f"target for {self.objective!r} must be finite")
        if self.target <= 0:
            raise SamplingError(f"target for {self.objective!r} must be > 0 (ratio form)")
        if self.alpha <= 0 or self.beta <= 0:
            raise SamplingError(f"alpha and beta for {self.objective!r} must be > 0")


@dataclass(frozen=True)
class SamplingRequest:
    """Objective priority weights, optional targets, and the set size."""

    w_proximity: float = 0.0
    w_sparsity: float = 0.0
    w_manifold: float = 0.0
    w_diversity: float = 1.0
    targets: tuple[TargetSpec, ...] = ()
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("w_proximity", "w_sparsity", "w_manifold"):
            if getattr(self, name) < 0:
                raise SamplingError(f"{name} must be >= 0")
        if self.w_diversity <= 0:
            raise SamplingError("w_diversity must be > 0")
        if self.count < 1:
            raise SamplingError("count must be >= 1")
        if self.w_proximity == self.w_sparsity == self.w_manifold == 0 and not self.targets:
            raise SamplingError("request needs at least one nonzero weight or a target")
        names = [t.objective for t in self.targets]
        if len(set(names)) != len(names):
            raise SamplingError("duplicate target objectives")

    def to_doc(self) -> dict:
        return {
            "weights": {
                "proximity": self.w_proximity,
                "sparsity": self.w_sparsity,
                "manifold": self.w_manifold,
                "diversity": self.w_diversity,
            },
            "targets": [
                {"objective": t.objective, "target": t.target, "alpha": t.alpha, "beta": t.beta}
                for t in self.targets
            ],
            "count": self.count,
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SamplingRequest":
        if not isinstance(doc, dict):
            raise SamplingError("sampling request must be an object")
        unknown = set(doc) - {"weights", "targets", "count", "seed"}
        if unknown:
            raise SamplingError(f"sampling request: unknown keys {sorted(unknown)}")
        weights = doc.get("weights", {})
        bad = set(weights) - {"proximity", "sparsity", "manifold", "diversity"}
        if bad:
            raise SamplingError(f"sampling request weights: unknown keys {sorted(bad)}")
        targets = []
        for i, t in enumerate(doc.get("targets", [])):
            extra = set(t) - {"objective", "target", "alpha", "beta"}
            if extra:
                raise SamplingError(f"targets[{i}]: unknown keys {sorted(extra)}")
            if "objective" not in t or "target" not in t:
                raise SamplingError(f"targets[{i}]: needs 'objective' and 'target'")
            targets.append(TargetSpec(
                objective=t["objective"],
                target=float(t["target"]),
                alpha=float(t.get("alpha", 1.0)),
                beta=float(t.get("beta", 1.0)),
            ))
        try:
            return cls(
                w_proximity=float(weights.get("proximity", 0.0)),
                w_sparsity=float(weights.get("sparsity", 0.0)),
                w_manifold=float(weights.get("manifold", 0.0)),
                w_diversity=float(weights.get("diversity", 1.0)),
                targets=tuple(targets),
                count=int(doc.get("count", 1)),
                seed=int(doc.get("seed", 0)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SamplingError):
                raise
            raise SamplingError(f"sampling request: {exc}") from None


@dataclass(frozen=True)
class SampledCounterfactual:
    archive_index: int
    values: DesignPoint
    objectives: ObjectiveValues
    quality: float
    dtai: float | None
    achievement_ratios: dict[str, float]


@dataclass(frozen=True)
class CounterfactualSet:
    request: SamplingRequest
    entries: tuple[SampledCounterfactual, ...]

    def __len__(self) -> int:
        return len(self.entries)


# --- target achievement -----------------------------------------------------

def dtai_objective_score(ratio: float, alpha: float, beta: float) -> float:
    """Per-objective achievement score: linear below the target, saturating above.

    Slope is exactly ``alpha`` on both sides of ratio 1, which makes the
    aggregate index continuously differentiable where a target is exactly met.
    """
    if ratio <= 1.0:
        return alpha * ratio
    return alpha + (alpha * alpha / beta) * (1.0 - math.exp(-(beta / alpha) * (ratio - 1.0)))


def dtai(ratios: Sequence[float], alphas: Sequence[float], betas: Sequence[float]) -> float:
    """Aggregate achievement index, normalized to an upper bound of 1."""
    if len(ratios) != len(alphas) or len(ratios) != len(betas):
        raise SamplingError("ratios, alphas, betas must have equal length")
    if not len(ratios):
        raise SamplingError("dtai needs at least one target")
    score = sum(dtai_objective_score(r, a, b) for r, a, b in zip(ratios, alphas, betas))
    ceiling = sum(a + a * a / b for a, b in zip(alphas, betas))
    return score / ceiling


def achievement_ratio(raw_value: float, target: float, direction: str) -> float:
    """Target/value for minimization, value/target for maximization."""
    if direction == MAXIMIZE:
        return raw_value / target
    return target / max(raw_value, RATIO_EPS)


def _target_columns(archive: CandidateArchive, targets: Sequence[TargetSpec]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-entry achievement ratios (n x t) plus alpha/beta vectors."""
    by_name = {o.name: i for i, o in enumerate(archive.aux_objectives)}
    ratios = np.empty((len(archive), len(targets)))
    alphas = np.empty(len(targets))
    betas = np.empty(len(targets))
    objectives = archive.objective_matrix()
    for t_index, target in enumerate(targets):
        if target.objective not in by_name:
            raise SamplingError(f"target references unknown objective {target.objective!r}")
        objective = archive.aux_objectives[by_name[target.objective]]
        stored = objectives[:, 3 + by_name[target.objective]]
        raw = -stored if objective.direction == MAXIMIZE else stored
        if objective.direction == MAXIMIZE:
            ratios[:, t_index] = raw / target.target
        else:
            ratios[:, t_index] = target.target / np.maximum(raw, RATIO_EPS)
        alphas[t_index] = target.alpha
        betas[t_index] = target.beta
    return ratios, alphas, betas


def _dtai_vector(ratios: np.ndarray, alphas: np.ndarray, betas: np.ndarray) -> np.ndarray:
    below = alphas * ratios
    above = alphas + (alphas * alphas / betas) * (1.0 - np.exp(-(betas / alphas) * (ratios - 1.0)))
    scores = np.where(ratios <= 1.0, below, above).sum(axis=1)
    ceiling = (alphas + alphas * alphas / betas).sum()
    return scores / ceiling


# --- aggregate quality -------------------------------------------------------

def quality_scores(archive: CandidateArchive, request: SamplingRequest) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Quality in (0, 1] for every archive entry, plus DTAI and ratios.

    The penalty is the weighted sum of the three quality objectives plus, when
    targets exist, one minus the (clamped) achievement index; quality is
    1/(1+penalty). Uses only cached values: no predictor calls.
    """
    objectives = archive.objective_matrix()
    penalty = (
        request.w_proximity * objectives[:, 0]
        + request.w_sparsity * objectives[:, 1]
        + request.w_manifold * objectives[:, 2]
    )
    dtai_values = None
    ratio_matrix = None
    if request.targets:
        ratio_matrix, alphas, betas = _target_columns(archive, request.targets)
        dtai_values = _dtai_vector(ratio_matrix, alphas, betas)
        penalty = penalty + (1.0 - np.maximum(dtai_values, 0.0))
    return 1.0 / (1.0 + penalty), dtai_values, ratio_matrix


def quality_score(entry_objectives: ObjectiveValues, request: SamplingRequest,
                  dtai_value: float | None = None) -> float:
    """Scalar form of :func:`quality_scores` for one candidate."""
    penalty = (
        request.w_proximity * entry_objectives.proximity
        + request.w_sparsity * entry_objectives.sparsity
        + request.w_manifold * entry_objectives.manifold_proximity
    )
    if request.targets:
        if dtai_value is None:
            raise SamplingError("dtai_value required when targets are present")
        penalty += 1.0 - max(dtai_value, 0.0)
    return 1.0 / (1.0 + penalty)


# --- diversity and selection -------------------------------------------------

def diversity_matrix(archive: CandidateArchive, qualities: np.ndarray, w_diversity: float) -> np.ndarray:
    """Full performance-weighted diversity kernel D[i,j] = gower_ij * (QiQj)^(1/w_d)."""
    if len(qualities) != len(archive):
        raise SamplingError("qualities must align with archive entries")
    gower = gower_matrix(archive.encoded, archive.encoded, archive.schema, archive.ranges_array)
    weight = np.power(np.outer(qualities, qualities), 1.0 / w_diversity)
    matrix = gower * weight
    np.fill_diagonal(matrix, 0.0)
    return matrix


def k_greedy_sample(matrix: np.ndarray, qualities: np.ndarray, count: int) -> list[int]:
    """Greedy maximin selection over a precomputed diversity matrix.

    First pick is the highest quality (ties to the lower index); each later
    pick maximizes the minimum kernel distance to the already-selected set
    (ties to higher quality, then lower index). Requesting at least the pool
    size returns everything ordered by quality.
    """
    n = len(qualities)
    if n == 0:
        raise SamplingError("no valid counterfactuals")
    if count < 1:
        raise SamplingError("count must be >= 1")
    if count >= n:
        return [int(i) for i in np.argsort(-np.asarray(qualities), kind="stable")]
    return _greedy_maximin(lambda s: matrix[s], qualities, count)


def _greedy_maximin(row, qualities: np.ndarray, count: int) -> list[int]:
    """Shared greedy loop; ``row(s)`` yields kernel distances from entry s."""
    qualities = np.asarray(qualities, dtype=float)
    n = len(qualities)
    selected = [int(np.argmax(qualities))]
    min_dist = row(selected[0]).copy()
    available = np.ones(n, dtype=bool)
    available[selected[0]] = False
    while len(selected) < count and available.any():
        dist = np.where(available, min_dist, -np.inf)
        best = dist.max()
        candidates = np.flatnonzero(dist == best)
        if len(candidates) > 1:
            top_quality = qualities[candidates].max()
            candidates = candidates[qualities[candidates] == top_quality]
        pick = int(candidates[0])
        selected.append(pick)
        available[pick] = False
        min_dist = np.minimum(min_dist, row(pick))
    return selected


def sample(archive: CandidateArchive, request: SamplingRequest, spec: ProblemSpec | None = None) -> CounterfactualSet:
    """Select a diverse counterfactual set from the archive.

    Deterministic given (archive, request); performs zero predictor
    evaluations. When a problem is supplied its hash must match the archive's.
    """
    if spec is not None and spec.problem_hash() != archive.problem_hash:
        raise ArchiveMismatchError(
            "archive was produced for a different problem "
            f"({archive.problem_hash[:12]}... != {spec.problem_hash()[:12]}...)"
        )
    if len(archive) == 0:
        raise SamplingError("no valid counterfactuals")

    qualities, dtai_values, ratio_matrix = quality_scores(archive, request)
    if request.count >= len(archive):
        indices = [int(i) for i in np.argsort(-qualities, kind="stable")]
    else:
        exponent = 1.0 / request.w_diversity
        schema, ranges = archive.schema, archive.ranges_array
        encoded = archive.encoded

        def row(s: int) -> np.ndarray:
            gower = gower_matrix(encoded[s].reshape(1, -1), encoded, schema, ranges)[0]
            weighted = gower * (qualities[s] * qualities) ** exponent
            weighted[s] = 0.0
            return weighted

        indices = _greedy_maximin(row, qualities, request.count)

    entries = []
    for i in indices:
        entry = archive.entries[i]
        ratios: dict[str, float] = {}
        if ratio_matrix is not None:
            ratios = {t.objective: float(ratio_matrix[i, j]) for j, t in enumerate(request.targets)}
        entries.append(SampledCounterfactual(
            archive_index=i,
            values=entry.values,
            objectives=entry.objectives,
            quality=float(qualities[i]),
            dtai=None if dtai_values is None else float(dtai_values[i]),
            achievement_ratios=ratios,
        ))
    return CounterfactualSet(request=request, entries=tuple(entries))


# --- weight sweeps -----------------------------------------------------------

Override = Mapping[str, object]


def apply_overrides(request: SamplingRequest, overrides: Override) -> SamplingRequest:
    """Apply one schedule cell's overrides to a base request.

    Recognized keys: w_proximity/w_sparsity/w_manifold/w_diversity (floats)
    and ``targets``: a mapping of objective name to {target, alpha, beta}
    replacements (objectives without an existing target get one, requiring at
    least ``target``).
    """
    fields: dict = {}
    for key in ("w_proximity", "w_sparsity", "w_manifold", "w_diversity"):
        if key in overrides:
            fields[key] = float(overrides[key])  # type: ignore[arg-type]
    unknown = set(overrides) - {"w_proximity", "w_sparsity", "w_manifold", "w_diversity", "targets"}
    if unknown:
        raise SamplingError(f"unknown override keys {sorted(unknown)}")
    if "targets" in overrides:
        patches = overrides["targets"]
        existing = {t.objective: t for t in request.targets}
        for name, patch in patches.items():  # type: ignore[union-attr]
            bad = set(patch) - {"target", "alpha", "beta"}
            if bad:
                raise SamplingError(f"target override for {name!r}: unknown keys {sorted(bad)}")
            if name in existing:
                existing[name] = replace(existing[name], **{k: float(v) for k, v in patch.items()})
            else:
                if "target" not in patch:
                    raise SamplingError(f"target override for {name!r} needs a 'target' value")
                existing[name] = TargetSpec(
                    objective=name,
                    target=float(patch["target"]),
                    alpha=float(patch.get("alpha", 1.0)),
                    beta=float(patch.get("beta", 1.0)),
                )
        fields["targets"] = tuple(existing.values())
    return replace(request, **fields)


def sweep(
    archive: CandidateArchive,
    row_schedule: Sequence[Override],
    col_schedule: Sequence[Override],
    base_request: SamplingRequest,
    spec: ProblemSpec | None = None,
) -> list[list[CounterfactualSet]]:
    """Grid of single-best samples: row overrides applied, then column's."""
    grid: list[list[CounterfactualSet]] = []
    for row_override in row_schedule:
        row_sets: list[CounterfactualSet] = []
        for col_override in col_schedule:
            request = apply_overrides(base_request, row_override)
            request = apply_overrides(request, col_override)
            request = replace(request, count=1)
            row_sets.append(sample(archive, request, spec))
        grid.append(row_sets)
    return grid


def quality_weight_schedule(rows: int, base: float = 0.2, factor: float = 2.0) -> list[dict]:
    """Geometric schedule w_pr = w_sp = w_mp = base/factor^i for rows i = 1..n."""
    schedule = []
    for i in range(1, rows + 1):
        w = base / factor ** i
        schedule.append({"w_proximity": w, "w_sparsity": w, "w_manifold": w})
    return schedule


def alpha_pair_schedule(cols: int, first: str, second: str, rate: float = 1.5) -> list[dict]:
    """Priority crossfade: alpha_first = rate^(n-j), alpha_second = rate^(j-1)."""
    schedule = []
    for j in range(1, cols + 1):
        schedule.append({
            "targets": {
                first: {"alpha": rate ** (cols - j)},
                second: {"alpha": rate ** (j - 1)},
            }
        })
    return schedule


# --- presentation helpers ----------------------------------------------------

def counterfactual_set_doc(result: CounterfactualSet, archive: CandidateArchive) -> dict:
    """JSON document for one sampled set, with per-entry quality breakdown."""
    aux_names = [o.name for o in archive.aux_objectives]
    entries = []
    for entry in result.entries:
        raw_aux = {
            o.name: o.to_raw(v)
            for o, v in zip(archive.aux_objectives, entry.objectives.auxiliary)
        }
        breakdown = {
            "proximity_term": result.request.w_proximity * entry.objectives.proximity,
            "sparsity_term": result.request.w_sparsity * entry.objectives.sparsity,
            "manifold_term": result.request.w_manifold * entry.objectives.manifold_proximity,
            "target_penalty": None if entry.dtai is None else 1.0 - max(entry.dtai, 0.0),
        }
        entries.append({
            "archive_index": entry.archive_index,
            "values": list(entry.values),
            "objectives": {
                "proximity": entry.objectives.proximity,
                "sparsity": entry.objectives.sparsity,
                "manifold_proximity": entry.objectives.manifold_proximity,
                "auxiliary": raw_aux,
            },
            "quality": entry.quality,
            "dtai": entry.dtai,
            "achievement_ratios": entry.achievement_ratios,
            "quality_breakdown": breakdown,
        })
    return {
        "request": result.request.to_doc(),
        "feature_names": list(archive.schema.feature_names),
        "auxiliary_names": aux_names,
        "query": list(archive.query),
        "entries": entries,
    }


def counterfactual_set_rows(result: CounterfactualSet, archive: CandidateArchive) -> tuple[list[str], list[list]]:
    """CSV header and rows: features in schema order, then objectives, quality."""
    aux_names = [o.name for o in archive.aux_objectives]
    header = list(archive.schema.feature_names) + ["f_pr", "f_sp", "f_mp", *aux_names, "quality"]
    rows = []
    for entry in result.entries:
        raw_aux = [
            o.to_raw(v) for o, v in zip(archive.aux_objectives, entry.objectives.auxiliary)
        ]
        rows.append([
            *entry.values,
            entry.objectives.proximity,
            entry.objectives.sparsity,
            entry.objectives.manifold_proximity,
            *raw_aux,
            entry.quality,
        ])
    return header, rows
