"""Command line: run searches, resample archives, sweep weights, serve HTTP.

Exit codes are stable for scripting: 0 success, 2 configuration error,
3 predictor failure (partial archive preserved), 4 archive/problem mismatch,
5 no valid counterfactuals. The MCD_LOG environment variable
(error|warn|info|debug) controls verbosity.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import click

from . import bench2d as bench2d_module
from .expressions import ExpressionError, compile_expression
from .optimizer import (
    ArchiveError,
    CandidateArchive,
    OptimizationError,
    OptimizerConfig,
    run_optimization,
)
from .predictors import PredictorRuntime
from .problem import ConfigError, load_problem_config
from .sampler import (
    ArchiveMismatchError,
    SamplingError,
    SamplingRequest,
    TargetSpec,
    apply_overrides,
    counterfactual_set_doc,
    counterfactual_set_rows,
    sample,
    sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PREDICTOR = 3
EXIT_MISMATCH = 4
EXIT_EMPTY = 5

logger = logging.getLogger("mcd")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("MCD_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@click.group()
def main() -> None:
    """Counterfactual design search and resampling."""
    _setup_logging()


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(path_type=Path), help="Problem config JSON.")
@click.option("--dataset", "dataset_path", type=click.Path(path_type=Path), help="Override the config's dataset CSV.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("."), help="Output directory.")
@click.option("--seed", type=int, default=None, help="Override the optimizer seed.")
def cmd_run(config_path: Path, dataset_path: Path | None, out_dir: Path, seed: int | None) -> None:
    """Run the search and write archive.json plus manifest.json."""
    try:
        doc = json.loads(config_path.read_text(encoding="utf-8"))
        if dataset_path is not None:
            if not isinstance(doc, dict):
                raise ConfigError("configuration must be a JSON object")
            doc["dataset"] = {"path": str(dataset_path)}
        from .problem import parse_problem_config

        problem, optimizer_doc = parse_problem_config(doc, base_dir=config_path.parent)
        if seed is not None:
            optimizer_doc = dict(optimizer_doc, seed=seed)
        config = OptimizerConfig.from_doc(optimizer_doc)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        _fail(EXIT_CONFIG, str(exc))
        return

    out_dir.mkdir(parents=True, exist_ok=True)
    archive_path = out_dir / "archive.json"
    manifest_path = out_dir / "manifest.json"
    runtime = PredictorRuntime(problem.predictors, problem.schema)
    started = time.time()
    status = "finished"
    error = None
    try:
        archive = run_optimization(problem, config, progress=_log_progress, runtime=runtime)
    except OptimizationError as exc:
        archive = exc.partial_archive
        status = "failed"
        error = str(exc)
        logger.error("run aborted: %s", exc)
    finally:
        runtime.close()
    duration = time.time() - started

    if archive is not None:
        archive.save(archive_path)
    manifest = {
        "schema_version": "1",
        "status": status,
        "error": error,
        "config_path": str(config_path),
        "dataset_path": None if dataset_path is None else str(dataset_path),
        "archive_path": str(archive_path) if archive is not None else None,
        "seed": config.seed,
        "duration_seconds": duration,
        "evaluations": runtime.evaluations,
        "hashes": {
            "config": _sha256(config_path),
            "archive": _sha256(archive_path) if archive is not None else None,
        },
    }
    tmp = manifest_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, manifest_path)
    if status != "finished":
        sys.exit(EXIT_PREDICTOR)
    click.echo(f"archive: {archive_path} ({len(archive)} entries, {runtime.evaluations} evaluations)")


def _log_progress(event) -> None:
    logger.info(
        "generation %d: %d feasible, best violation %.6g, archive %d",
        event.generation, event.feasible, event.best_violation, event.archive_size,
    )


def _parse_target(text: str) -> TargetSpec:
    # Format: name=value[:alpha=a][:beta=b]
    head, *mods = text.split(":")
    if "=" not in head:
        raise ConfigError(f"--target {text!r}: expected <objective>=<value>")
    name, raw_value = head.split("=", 1)
    alpha = beta = 1.0
    for mod in mods:
        if "=" not in mod:
            raise ConfigError(f"--target {text!r}: expected alpha=<a> or beta=<b>, got {mod!r}")
        key, raw = mod.split("=", 1)
        if key == "alpha":
            alpha = float(raw)
        elif key == "beta":
            beta = float(raw)
        else:
            raise ConfigError(f"--target {text!r}: unknown modifier {key!r}")
    try:
        return TargetSpec(objective=name, target=float(raw_value), alpha=alpha, beta=beta)
    except (ValueError, SamplingError) as exc:
        raise ConfigError(f"--target {text!r}: {exc}") from None


def _load_archive_checked(archive_path: Path, config_path: Path | None) -> CandidateArchive:
    try:
        archive = CandidateArchive.load(archive_path)
    except (ArchiveError, OSError) as exc:
        _fail(EXIT_MISMATCH, f"cannot load archive: {exc}")
        raise  # unreachable
    if config_path is not None:
        try:
            problem, _ = load_problem_config(config_path)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, str(exc))
            raise
        if problem.problem_hash() != archive.problem_hash:
            _fail(EXIT_MISMATCH, "archive was produced for a different problem than --config")
    return archive


def _write_sets(result, archive, out_dir: Path, stem: str) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"{stem}.json"
    csv_path = out_dir / f"{stem}.csv"
    json_path.write_text(
        json.dumps(counterfactual_set_doc(result, archive), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    header, rows = counterfactual_set_rows(result, archive)
    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return json_path, csv_path


@main.command("sample")
@click.option("--archive", "archive_path", required=True, type=click.Path(path_type=Path))
@click.option("--count", required=True, type=int)
@click.option("--w-proximity", type=float, default=0.5, show_default=True)
@click.option("--w-sparsity", type=float, default=0.2, show_default=True)
@click.option("--w-manifold", type=float, default=0.5, show_default=True)
@click.option("--w-diversity", type=float, default=0.2, show_default=True)
@click.option("--target", "targets", multiple=True, help="<objective>=<value>[:alpha=<a>][:beta=<b>]; repeatable.")
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="Verify the archive against this problem config.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("."))
@click.option("--seed", type=int, default=0)
def cmd_sample(archive_path, count, w_proximity, w_sparsity, w_manifold, w_diversity, targets, config_path, out_dir, seed):
    """Draw a diverse counterfactual set; writes samples.json and samples.csv."""
    archive = _load_archive_checked(archive_path, config_path)
    try:
        request = SamplingRequest(
            w_proximity=w_proximity,
            w_sparsity=w_sparsity,
            w_manifold=w_manifold,
            w_diversity=w_diversity,
            targets=tuple(_parse_target(t) for t in targets),
            count=count,
            seed=seed,
        )
    except (ConfigError, SamplingError) as exc:
        _fail(EXIT_CONFIG, str(exc))
        return
    try:
        result = sample(archive, request)
    except ArchiveMismatchError as exc:
        _fail(EXIT_MISMATCH, str(exc))
        return
    except SamplingError as exc:
        _fail(EXIT_EMPTY, str(exc))
        return
    json_path, csv_path = _write_sets(result, archive, out_dir, "samples")
    click.echo(f"wrote {len(result)} counterfactuals to {json_path} and {csv_path}")


def _parse_schedule(text: str, variable: str, length: int) -> list[dict]:
    """Expand a schedule expression into per-cell override mappings.

    Assignments are separated by ';'. Targets: w_pr, w_sp, w_mp, w_d,
    quality (all three quality weights at once), alpha:<objective>,
    beta:<objective>, target:<objective>. Expressions may use the cell index
    (``i`` for rows, ``j`` for columns; 1-based) and ``n`` (schedule length).
    """
    assignments = []
    for part in filter(None, (chunk.strip() for chunk in text.split(";"))):
        if "=" not in part:
            raise ConfigError(f"schedule {text!r}: expected <name>=<expression> in {part!r}")
        name, expr_text = part.split("=", 1)
        try:
            expr = compile_expression(expr_text)
        except ExpressionError as exc:
            raise ConfigError(f"schedule {text!r}: {exc}") from None
        extra = set(expr.variables) - {variable, "n"}
        if extra:
            raise ConfigError(f"schedule {text!r}: unknown variables {sorted(extra)} (allowed: {variable}, n)")
        assignments.append((name.strip(), expr))

    weight_keys = {"w_pr": "w_proximity", "w_sp": "w_sparsity", "w_mp": "w_manifold", "w_d": "w_diversity"}
    cells = []
    for index in range(1, length + 1):
        env = {variable: index, "n": length}
        override: dict = {}
        for name, expr in assignments:
            value = expr(env)
            if name == "quality":
                if value < 0:
                    raise ConfigError(f"schedule {text!r}: negative weight {value} at {variable}={index}")
                override.update({"w_proximity": value, "w_sparsity": value, "w_manifold": value})
            elif name in weight_keys:
                if value < 0:
                    raise ConfigError(f"schedule {text!r}: negative weight {value} at {variable}={index}")
                override[weight_keys[name]] = value
            elif ":" in name:
                kind, objective = name.split(":", 1)
                if kind not in ("alpha", "beta", "target"):
                    raise ConfigError(f"schedule {text!r}: unknown assignment {name!r}")
                override.setdefault("targets", {}).setdefault(objective, {})[kind] = value
            else:
                raise ConfigError(f"schedule {text!r}: unknown assignment {name!r}")
        cells.append(override)
    return cells


@main.command("sweep")
@click.option("--archive", "archive_path", required=True, type=click.Path(path_type=Path))
@click.option("--rows", required=True, type=int)
@click.option("--cols", required=True, type=int)
@click.option("--row-schedule", required=True, help="e.g. 'quality=0.2/2^i'")
@click.option("--col-schedule", required=True, help="e.g. 'alpha:massTarget=1.5^(n-j);alpha:safety=1.5^(j-1)'")
@click.option("--w-proximity", type=float, default=0.5, show_default=True)
@click.option("--w-sparsity", type=float, default=0.2, show_default=True)
@click.option("--w-manifold", type=float, default=0.5, show_default=True)
@click.option("--w-diversity", type=float, default=0.2, show_default=True)
@click.option("--target", "targets", multiple=True, help="Base targets, as in sample.")
@click.option("--config", "config_path", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("."))
def cmd_sweep(archive_path, rows, cols, row_schedule, col_schedule, w_proximity, w_sparsity,
              w_manifold, w_diversity, targets, config_path, out_dir):
    """Grid of single-best counterfactuals under scheduled weight overrides."""
    archive = _load_archive_checked(archive_path, config_path)
    try:
        if rows < 1 or cols < 1:
            raise ConfigError("--rows and --cols must be >= 1")
        base = SamplingRequest(
            w_proximity=w_proximity,
            w_sparsity=w_sparsity,
            w_manifold=w_manifold,
            w_diversity=w_diversity,
            targets=tuple(_parse_target(t) for t in targets),
            count=1,
        )
        row_cells = _parse_schedule(row_schedule, "i", rows)
        col_cells = _parse_schedule(col_schedule, "j", cols)
        # Surface bad override keys/targets before sampling.
        for cell in row_cells + col_cells:
            apply_overrides(base, cell)
    except (ConfigError, SamplingError) as exc:
        _fail(EXIT_CONFIG, str(exc))
        return
    try:
        grid = sweep(archive, row_cells, col_cells, base)
    except ArchiveMismatchError as exc:
        _fail(EXIT_MISMATCH, str(exc))
        return
    except SamplingError as exc:
        _fail(EXIT_EMPTY, str(exc))
        return

    out_dir.mkdir(parents=True, exist_ok=True)
    grid_path = out_dir / "sweep.csv"
    aux_names = [o.name for o in archive.aux_objectives]
    header = ["row", "col", *archive.schema.feature_names, "f_pr", "f_sp", "f_mp", *aux_names, "quality"]
    with open(grid_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for i, row_sets in enumerate(grid, start=1):
            for j, result in enumerate(row_sets, start=1):
                _, rows_out = counterfactual_set_rows(result, archive)
                writer.writerow([i, j, *rows_out[0]])
    click.echo(f"wrote {rows * cols} grid cells to {grid_path}")


@main.command("bench2d")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("."))
@click.option("--resolution", type=int, default=512, show_default=True)
@click.option("--query", type=click.Choice(sorted(bench2d_module.QUERIES)), default="D2", show_default=True)
def cmd_bench2d(out_dir: Path, resolution: int, query: str) -> None:
    """Emit the benchmark dataset, feasibility mask, and problem config."""
    try:
        paths = bench2d_module.write_benchmark(out_dir, resolution=resolution, query=query)
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))
        return
    for kind, path in paths.items():
        click.echo(f"{kind}: {path}")


@main.command("serve")
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", "data_dir", type=click.Path(path_type=Path), default=Path("./mcd-data"), show_default=True)
@click.option("--no-cors", is_flag=True, default=False, help="Disable permissive cross-origin headers.")
@click.option("--parallel-runs", type=int, default=1, show_default=True)
def cmd_serve(port: int, host: str, data_dir: Path, no_cors: bool, parallel_runs: int) -> None:
    """Serve the HTTP API (problems, runs, interactive resampling)."""
    import uvicorn

    from .service import create_app

    uvicorn_levels = {"error": "error", "warn": "warning", "info": "info", "debug": "debug"}
    app = create_app(data_dir=data_dir, cors=not no_cors, max_parallel_runs=parallel_runs)
    uvicorn.run(app, host=host, port=port,
                log_level=uvicorn_levels.get(os.environ.get("MCD_LOG", "").lower(), "warning"))


if __name__ == "__main__":
    main()
