"""A two-feature synthetic benchmark with analytic predictors.

Both outputs are cheap closed forms over the unit square:

- Y1 = (sin(3*pi*x1) + 1) / 2, a vertical band pattern;
- Y2 = max of two isotropic Gaussian bumps centered at (0.5, 0.3) and
  (0.5, 0.7) with sigma 0.2.

Under the canonical requirements 0.4 <= Y1 <= 0.6 and Y2 >= 0.6, the
feasible set splits into exactly four small disjoint regions (two sine bands
crossed with two Gaussian disks), which a grid flood fill verifies
independently of the optimizer. Running this module as a script serves the
same two outputs over the subprocess predictor protocol.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design_space import Dataset, DesignPoint, DesignSchema, FeatureSpec
from .objectives import AuxiliaryObjectiveSpec
from .predictors import BuiltinBackend, PredictorSpec, register_builtin, run_worker
from .problem import ProblemSpec

DATASET_SIZE = 1_000
DATASET_SEED = 42
GAUSSIAN_CENTERS = ((0.5, 0.3), (0.5, 0.7))
GAUSSIAN_SIGMA = 0.2
Y1_BOUNDS = (0.4, 0.6)
Y2_MIN = 0.6
QUERIES: dict[str, DesignPoint] = {
    "D1": (0.2, 0.3),
    "D2": (0.8, 0.5),
    "D3": (0.5, 0.9),
}


def y1(x1, x2=None):
    """Band response in [0, 1]; depends on x1 only."""
    return (np.sin(3.0 * np.pi * np.asarray(x1)) + 1.0) / 2.0


def y2(x1, x2):
    """Twin-bump response in (0, 1]: max of two Gaussian disks."""
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    best = None
    for cx, cy in GAUSSIAN_CENTERS:
        bump = np.exp(-((x1 - cx) ** 2 + (x2 - cy) ** 2) / (2.0 * GAUSSIAN_SIGMA**2))
        best = bump if best is None else np.maximum(best, bump)
    return best


def _predict(matrix: np.ndarray, schema: DesignSchema) -> np.ndarray:
    return np.column_stack([y1(matrix[:, 0]), y2(matrix[:, 0], matrix[:, 1])])


register_builtin("bench2d", _predict)


def make_schema() -> DesignSchema:
    return DesignSchema(features=(
        FeatureSpec(name="x1", kind="continuous", lower=0.0, upper=1.0),
        FeatureSpec(name="x2", kind="continuous", lower=0.0, upper=1.0),
    ))


def make_dataset(size: int = DATASET_SIZE, seed: int = DATASET_SEED) -> Dataset:
    """Uniform points over the unit square; bit-reproducible from the seed."""
    rng = np.random.default_rng(seed)
    points = rng.random((size, 2))
    schema = make_schema()
    return Dataset(schema=schema, rows=tuple((float(a), float(b)) for a, b in points))


def predictor_spec(subprocess_command: tuple[str, ...] | None = None) -> PredictorSpec:
    from .predictors import SubprocessBackend

    if subprocess_command is None:
        backend = BuiltinBackend(function="bench2d")
    else:
        backend = SubprocessBackend(command=tuple(subprocess_command))
    return PredictorSpec(name="bench2d", channels=("Y1", "Y2"), backend=backend)


def make_problem(
    query: str | DesignPoint = "D2",
    dataset: Dataset | None = None,
    y1_bounds: tuple[float, float] = Y1_BOUNDS,
    y2_min: float = Y2_MIN,
    with_aux_objectives: bool = False,
    subprocess_command: tuple[str, ...] | None = None,
) -> ProblemSpec:
    """Assemble the benchmark problem for one of the pinned queries."""
    from .problem import OutputConstraint

    if isinstance(query, str):
        query = QUERIES[query]
    if dataset is None:
        dataset = make_dataset()
    aux = ()
    if with_aux_objectives:
        aux = (
            AuxiliaryObjectiveSpec(name="peak_density", direction="maximize", channel="Y2"),
            AuxiliaryObjectiveSpec(name="band_level", direction="minimize", channel="Y1"),
        )
    return ProblemSpec(
        schema=dataset.schema,
        query=query,
        predictors=(predictor_spec(subprocess_command),),
        dataset=dataset,
        output_constraints=(
            OutputConstraint(channel="Y1", lower=y1_bounds[0], upper=y1_bounds[1]),
            OutputConstraint(channel="Y2", lower=y2_min),
        ),
        aux_objectives=aux,
        knn_k=5,
    )


def is_feasible(x1, x2, y1_bounds=Y1_BOUNDS, y2_min=Y2_MIN):
    """Ground-truth feasibility under closed bounds."""
    a = y1(x1)
    return (a >= y1_bounds[0]) & (a <= y1_bounds[1]) & (y2(x1, x2) >= y2_min)


@dataclass(frozen=True)
class ComponentReport:
    """Flood-fill census of the feasible set on a cell-center grid."""

    resolution: int
    count: int
    labels: np.ndarray  # (resolution, resolution), -1 for infeasible cells
    boxes: tuple[tuple[float, float, float, float], ...]  # (x1min, x1max, x2min, x2max)

    def component_of(self, point) -> int:
        """Index of the component whose bounding box contains the point."""
        x1, x2 = float(point[0]), float(point[1])
        for index, (a, b, c, d) in enumerate(self.boxes):
            if a <= x1 <= b and c <= x2 <= d:
                return index
        return -1


def feasible_components(resolution: int = 512, y1_bounds=Y1_BOUNDS, y2_min=Y2_MIN) -> ComponentReport:
    """Count connected feasible regions by 4-connectivity flood fill."""
    if resolution < 256:
        raise ValueError("resolution must be >= 256")
    centers = (np.arange(resolution) + 0.5) / resolution
    g1, g2 = np.meshgrid(centers, centers, indexing="ij")
    mask = np.asarray(is_feasible(g1, g2, y1_bounds, y2_min))
    labels = np.full(mask.shape, -1, dtype=int)
    boxes = []
    # A feasible point can sit a full cell beyond the outermost feasible cell
    # center (its own cell's center may sample infeasible), so boxes are
    # padded by 1.5 cells; regions are several dozen cells apart, so padded
    # boxes stay disjoint.
    pad = 1.5 / resolution
    component = 0
    for i, j in zip(*np.nonzero(mask)):
        if labels[i, j] != -1:
            continue
        queue = deque([(int(i), int(j))])
        labels[i, j] = component
        lo_i = hi_i = int(i)
        lo_j = hi_j = int(j)
        while queue:
            a, b = queue.popleft()
            lo_i, hi_i = min(lo_i, a), max(hi_i, a)
            lo_j, hi_j = min(lo_j, b), max(hi_j, b)
            for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                na, nb = a + da, b + db
                if 0 <= na < resolution and 0 <= nb < resolution and mask[na, nb] and labels[na, nb] == -1:
                    labels[na, nb] = component
                    queue.append((na, nb))
        boxes.append((
            centers[lo_i] - pad, centers[hi_i] + pad,
            centers[lo_j] - pad, centers[hi_j] + pad,
        ))
        component += 1
    return ComponentReport(resolution=resolution, count=component, labels=labels, boxes=tuple(boxes))


# --- emitted artifacts -------------------------------------------------------

def dataset_csv_text(dataset: Dataset) -> str:
    lines = ["x1,x2"]
    for a, b in dataset.rows:
        lines.append(f"{a!r},{b!r}")
    return "\n".join(lines) + "\n"


def mask_pgm_bytes(report: ComponentReport) -> bytes:
    """Binary portable graymap of the feasibility mask (white = feasible)."""
    res = report.resolution
    image = np.where(report.labels >= 0, 255, 0).astype(np.uint8)
    # Image rows run top to bottom = x2 descending; columns = x1 ascending.
    image = image.T[::-1]
    return f"P5\n{res} {res}\n255\n".encode("ascii") + image.tobytes()


def problem_config_doc(dataset_path: str, query: str = "D2") -> dict:
    """The canonical configuration document consumed by the command line."""
    return {
        "schema": {
            "features": [
                {"name": "x1", "kind": "continuous", "lower": 0.0, "upper": 1.0, "actionable": True},
                {"name": "x2", "kind": "continuous", "lower": 0.0, "upper": 1.0, "actionable": True},
            ]
        },
        "query": {"values": list(QUERIES[query])},
        "dataset": {"path": dataset_path},
        "predictors": [
            {"name": "bench2d", "channels": ["Y1", "Y2"], "backend": {"type": "builtin", "function": "bench2d"}}
        ],
        "constraints": {
            "outputs": [
                {"channel": "Y1", "lower": Y1_BOUNDS[0], "upper": Y1_BOUNDS[1]},
                {"channel": "Y2", "lower": Y2_MIN},
            ]
        },
        "objectives": [
            {"name": "peak_density", "direction": "maximize", "channel": "Y2"},
            {"name": "band_level", "direction": "minimize", "channel": "Y1"},
        ],
        "optimizer": {"population": 100, "generations": 100, "seed": 42},
        "sampling": {"knn_k": 5},
    }


def write_benchmark(out_dir: str | Path, resolution: int = 512, query: str = "D2") -> dict[str, Path]:
    """Emit dataset CSV, feasibility mask PGM, and problem config JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = make_dataset()
    dataset_path = out / "bench2d_dataset.csv"
    dataset_path.write_text(dataset_csv_text(dataset), encoding="utf-8")
    report = feasible_components(resolution)
    mask_path = out / "bench2d_mask.pgm"
    mask_path.write_bytes(mask_pgm_bytes(report))
    config_path = out / "bench2d_problem.json"
    config_path.write_text(
        json.dumps(problem_config_doc("bench2d_dataset.csv", query=query), indent=2) + "\n",
        encoding="utf-8",
    )
    return {"dataset": dataset_path, "mask": mask_path, "config": config_path}


def main() -> None:
    """Serve Y1/Y2 over the stdin/stdout predictor protocol."""

    def predict(designs):
        matrix = np.asarray(designs, dtype=float)
        return _predict(matrix, make_schema())

    run_worker(predict)


if __name__ == "__main__":
    main()
