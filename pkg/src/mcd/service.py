"""HTTP facade: problem registration, async optimization runs, resampling.

Runs execute on a background thread pool (one at a time by default) and
persist their archives plus manifests under the data directory; the
in-memory index is rebuilt from those manifests on boot, so finished runs
survive restarts. Sampling endpoints are read-only and never trigger
predictor evaluations.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .design_space import schema_to_doc
from .optimizer import (
    ArchiveError,
    CandidateArchive,
    OptimizationError,
    OptimizerConfig,
    run_optimization,
)
from .problem import ConfigError, parse_problem_config, problem_config_id
from .sampler import (
    SamplingError,
    SamplingRequest,
    counterfactual_set_doc,
    sample,
)

logger = logging.getLogger("mcd.service")

PENDING = "pending"
RUNNING = "running"
FINISHED = "finished"
FAILED = "failed"


@dataclass
class RunRecord:
    run_id: str
    problem_id: str
    optimizer: OptimizerConfig
    state: str = PENDING
    created_at: float = field(default_factory=time.time)
    progress: dict | None = None
    error: str | None = None
    archive_path: Path | None = None
    archive: CandidateArchive | None = None

    def to_doc(self, problem_doc: dict | None = None) -> dict:
        doc = {
            "run_id": self.run_id,
            "problem_id": self.problem_id,
            "state": self.state,
            "created_at": self.created_at,
            "progress": self.progress,
            "error": self.error,
            "optimizer": self.optimizer.to_doc(),
            "archive_entries": None if self.archive is None else len(self.archive),
        }
        if problem_doc is not None:
            doc["problem"] = problem_doc
        return doc


class RunRegistry:
    """Problems, runs, and their persisted artifacts."""

    def __init__(self, data_dir: Path, max_parallel_runs: int = 1):
        self.data_dir = Path(data_dir)
        self.problems_dir = self.data_dir / "problems"
        self.runs_dir = self.data_dir / "runs"
        self.problems_dir.mkdir(parents=True, exist_ok=True)
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        self._problems: dict[str, dict] = {}
        self._runs: dict[str, RunRecord] = {}
        self._lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=max(1, max_parallel_runs))
        self._restore()

    # -- problems -----------------------------------------------------------

    def register_problem(self, doc: dict) -> str:
        try:
            parse_problem_config(doc, base_dir=self.data_dir)
        except ConfigError:
            raise
        problem_id = problem_config_id(doc)
        with self._lock:
            if problem_id not in self._problems:
                self._problems[problem_id] = doc
                path = self.problems_dir / f"{problem_id}.json"
                path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return problem_id

    def problem_doc(self, problem_id: str) -> dict | None:
        with self._lock:
            return self._problems.get(problem_id)

    def problem_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._problems)

    # -- runs ----------------------------------------------------------------

    def submit_run(self, problem_id: str, optimizer: OptimizerConfig) -> tuple[RunRecord, bool]:
        """Returns (record, created). 409s are decided by the caller."""
        doc = self.problem_doc(problem_id)
        if doc is None:
            raise KeyError(problem_id)
        run_id = self._run_id(problem_id, optimizer)
        with self._lock:
            existing = self._runs.get(run_id)
            if existing is not None:
                return existing, False
            record = RunRecord(run_id=run_id, problem_id=problem_id, optimizer=optimizer)
            self._runs[run_id] = record
        self._executor.submit(self._execute, record, doc)
        return record, True

    def run(self, run_id: str) -> RunRecord | None:
        with self._lock:
            return self._runs.get(run_id)

    def runs(self) -> list[RunRecord]:
        with self._lock:
            return sorted(self._runs.values(), key=lambda r: (r.created_at, r.run_id))

    def shutdown(self) -> None:
        self._executor.shutdown(wait=False, cancel_futures=True)

    @staticmethod
    def _run_id(problem_id: str, optimizer: OptimizerConfig) -> str:
        blob = json.dumps(
            {"problem": problem_id, "optimizer": optimizer.to_doc()},
            sort_keys=True, separators=(",", ":"),
        ).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:24]

    def _execute(self, record: RunRecord, problem_doc: dict) -> None:
        with self._lock:
            record.state = RUNNING
        run_dir = self.runs_dir / record.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        started = time.time()

        def on_progress(event):
            import math

            with self._lock:
                record.progress = {
                    "generation": event.generation,
                    "generations": record.optimizer.generations,
                    "feasible": event.feasible,
                    "best_violation": event.best_violation if math.isfinite(event.best_violation) else None,
                    "archive_size": event.archive_size,
                }

        archive = None
        error = None
        try:
            problem, _ = parse_problem_config(problem_doc, base_dir=self.data_dir)
            archive = run_optimization(problem, record.optimizer, progress=on_progress)
        except OptimizationError as exc:
            archive = exc.partial_archive
            error = str(exc)
        except Exception as exc:  # config drift, I/O: keep the service alive
            error = str(exc)
            logger.exception("run %s failed", record.run_id)

        archive_path = run_dir / "archive.json"
        if archive is not None:
            archive.save(archive_path)
        manifest = {
            "schema_version": "1",
            "run_id": record.run_id,
            "problem_id": record.problem_id,
            "status": FAILED if error else FINISHED,
            "error": error,
            "optimizer": record.optimizer.to_doc(),
            "seed": record.optimizer.seed,
            "archive_path": archive_path.name if archive is not None else None,
            "duration_seconds": time.time() - started,
            "created_at": record.created_at,
        }
        tmp = run_dir / "manifest.json.tmp"
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        tmp.replace(run_dir / "manifest.json")
        with self._lock:
            record.error = error
            record.archive = archive if error is None else None
            record.archive_path = archive_path if archive is not None else None
            record.state = FAILED if error else FINISHED

    def _restore(self) -> None:
        for path in sorted(self.problems_dir.glob("*.json")):
            try:
                self._problems[path.stem] = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                logger.warning("skipping unreadable problem file %s", path)
        for manifest_path in sorted(self.runs_dir.glob("*/manifest.json")):
            try:
                manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
                record = RunRecord(
                    run_id=manifest["run_id"],
                    problem_id=manifest["problem_id"],
                    optimizer=OptimizerConfig.from_doc(manifest["optimizer"]),
                    created_at=manifest.get("created_at", manifest_path.stat().st_mtime),
                )
                record.state = manifest["status"]
                record.error = manifest.get("error")
                if manifest.get("archive_path") and record.state == FINISHED:
                    archive_path = manifest_path.parent / manifest["archive_path"]
                    record.archive = CandidateArchive.load(archive_path)
                    record.archive_path = archive_path
                self._runs[record.run_id] = record
            except (KeyError, ValueError, ArchiveError, OSError) as exc:
                logger.warning("skipping unreadable run at %s: %s", manifest_path.parent, exc)


def create_app(data_dir: str | Path, cors: bool = True, max_parallel_runs: int = 1) -> FastAPI:
    """Build the application; state lives in a RunRegistry on the data dir."""
    registry = RunRegistry(Path(data_dir), max_parallel_runs=max_parallel_runs)
    app = FastAPI(title="mcd", version="0.1.0")
    app.state.registry = registry
    if cors:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def _problem_summary(record: RunRecord) -> dict | None:
        archive = record.archive
        if archive is None:
            return None
        return {
            "schema": schema_to_doc(archive.schema),
            "query": list(archive.query),
            "ranges": list(archive.ranges),
            "objectives": [
                {"name": o.name, "direction": o.direction, "channel": o.channel, "expression": o.expression}
                for o in archive.aux_objectives
            ],
        }

    def _get_run(run_id: str) -> RunRecord:
        record = registry.run(run_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return record

    def _require_finished(record: RunRecord) -> CandidateArchive:
        if record.state != FINISHED or record.archive is None:
            raise HTTPException(status_code=409, detail=f"run {record.run_id!r} is {record.state}, not finished")
        return record.archive

    @app.post("/v1/problems")
    def register_problem(doc: dict):
        try:
            problem_id = registry.register_problem(doc)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return {"problem_id": problem_id}

    @app.get("/v1/problems")
    def list_problems():
        return {"problems": registry.problem_ids()}

    @app.get("/v1/problems/{problem_id}")
    def get_problem(problem_id: str):
        doc = registry.problem_doc(problem_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"unknown problem {problem_id!r}")
        return {"problem_id": problem_id, "config": doc}

    @app.post("/v1/runs", status_code=202)
    def submit_run(body: dict):
        unknown = set(body) - {"problem_id", "optimizer", "seed"}
        if unknown:
            raise HTTPException(status_code=422, detail=f"unknown keys {sorted(unknown)}")
        problem_id = body.get("problem_id")
        if not isinstance(problem_id, str):
            raise HTTPException(status_code=422, detail="problem_id is required")
        optimizer_doc = dict(body.get("optimizer", {}))
        if "seed" in body:
            optimizer_doc["seed"] = body["seed"]
        try:
            config = OptimizerConfig.from_doc(optimizer_doc)
        except (TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        try:
            record, created = registry.submit_run(problem_id, config)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown problem {problem_id!r}") from None
        if not created and record.state in (PENDING, RUNNING):
            raise HTTPException(status_code=409, detail=f"identical run {record.run_id!r} is already {record.state}")
        return {"run_id": record.run_id}

    @app.get("/v1/runs")
    def list_runs():
        return {"runs": [record.to_doc() for record in registry.runs()]}

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str):
        record = _get_run(run_id)
        return record.to_doc(problem_doc=_problem_summary(record))

    @app.post("/v1/runs/{run_id}/samples")
    def sample_run(run_id: str, body: dict):
        record = _get_run(run_id)
        archive = _require_finished(record)
        try:
            request = SamplingRequest.from_doc(body)
            result = sample(archive, request)
        except SamplingError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return JSONResponse(counterfactual_set_doc(result, archive))

    @app.get("/v1/runs/{run_id}/candidates")
    def list_candidates(run_id: str, offset: int = 0, limit: int = 100):
        record = _get_run(run_id)
        archive = _require_finished(record)
        if offset < 0 or limit < 0:
            raise HTTPException(status_code=422, detail="offset and limit must be >= 0")
        page = archive.entries[offset:offset + limit]
        return {
            "total": len(archive),
            "offset": offset,
            "limit": limit,
            "entries": [
                {
                    "index": offset + i,
                    "values": list(entry.values),
                    "objectives": {
                        "proximity": entry.objectives.proximity,
                        "sparsity": entry.objectives.sparsity,
                        "manifold_proximity": entry.objectives.manifold_proximity,
                        "auxiliary": list(entry.objectives.auxiliary),
                    },
                    "channels": entry.channels,
                }
                for i, entry in enumerate(page)
            ],
        }

    return app
