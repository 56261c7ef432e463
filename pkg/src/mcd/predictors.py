"""Black-box predictor backends, evaluation caching, and the wire protocol.

Predictors are the only channel through which the search sees a model: they
map design points to named real-valued output channels. Two backends exist:

- builtin: a registered vectorized function, for analytic benchmarks and
  in-process models;
- subprocess: any external executable speaking newline-delimited JSON on
  stdin/stdout, which is how external ML stacks plug in without linking.

Wire protocol (one JSON object per line, UTF-8, ``\\n`` terminators):
request ``{"id": <int>, "designs": [[v1, ..., vd], ...]}`` with categorical
values as tokens; response ``{"id": <int>, "outputs": [[c1, ..., cm], ...]}``
with one output row per design, in order. Non-finite outputs are encoded as
the strings "nan"/"inf"/"-inf" and turn the affected record into a failure.
"""

from __future__ import annotations

import json
import math
import os
import queue
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .design_space import DesignPoint, DesignSchema

TIMEOUT_ENV_VAR = "MCD_PREDICTOR_TIMEOUT_MS"
DEFAULT_TIMEOUT_MS = 60_000
DEFAULT_BATCH_SIZE = 64

BuiltinFunction = Callable[[np.ndarray, DesignSchema], np.ndarray]

_BUILTINS: dict[str, BuiltinFunction] = {}


def register_builtin(name: str, fn: BuiltinFunction) -> None:
    """Register a vectorized builtin predictor function by id."""
    _BUILTINS[name] = fn


def builtin_function(name: str) -> BuiltinFunction:
    try:
        return _BUILTINS[name]
    except KeyError:
        raise PredictorError(f"unknown builtin predictor function {name!r}") from None


class PredictorError(RuntimeError):
    """Predictor backend failure (process exit, protocol violation, timeout).

    ``partial`` carries the records completed before the failure.
    """

    def __init__(self, message: str, partial: list["PredictionRecord"] | None = None):
        super().__init__(message)
        self.partial = partial or []


@dataclass(frozen=True)
class BuiltinBackend:
    function: str


@dataclass(frozen=True)
class SubprocessBackend:
    command: tuple[str, ...]
    deterministic: bool = True
    batch_size: int = DEFAULT_BATCH_SIZE


@dataclass(frozen=True)
class PredictorSpec:
    """Declares one predictor: its name, output channels, and backend."""

    name: str
    channels: tuple[str, ...]
    backend: BuiltinBackend | SubprocessBackend

    def __post_init__(self):
        if not self.channels:
            raise PredictorError(f"predictor {self.name!r} declares no output channels")
        if len(set(self.channels)) != len(self.channels):
            raise PredictorError(f"predictor {self.name!r} has duplicate channel names")


@dataclass(frozen=True)
class PredictionRecord:
    """Outputs for one design across all registered predictors."""

    values: DesignPoint
    outputs: dict[str, float] = field(default_factory=dict)
    failed: bool = False


def _json_value(x: float):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _parse_output(x) -> float:
    if isinstance(x, str):
        lowered = x.strip().lower()
        if lowered == "nan":
            return math.nan
        if lowered in ("inf", "+inf", "infinity"):
            return math.inf
        if lowered in ("-inf", "-infinity"):
            return -math.inf
        raise PredictorError(f"unparseable output value {x!r}")
    return float(x)


class _SubprocessWorker:
    """One child process speaking the line protocol; one request in flight."""

    def __init__(self, command: Sequence[str], timeout_ms: int):
        self.command = tuple(command)
        self.timeout_s = timeout_ms / 1000.0
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._next_id = 0
        self._lock = threading.Lock()

    def _ensure_started(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        self._proc = subprocess.Popen(
            list(self.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines = queue.Queue()
        thread = threading.Thread(target=self._pump, args=(self._proc,), daemon=True)
        thread.start()

    def _pump(self, proc: subprocess.Popen) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def request(self, designs: list[list]) -> list[list[float]]:
        with self._lock:
            self._ensure_started()
            assert self._proc is not None and self._proc.stdin is not None
            request_id = self._next_id
            self._next_id += 1
            payload = json.dumps({"id": request_id, "designs": designs}, separators=(",", ":"))
            try:
                self._proc.stdin.write(payload + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise PredictorError(f"predictor process {self.command[0]!r} is not accepting input: {exc}")
            try:
                line = self._lines.get(timeout=self.timeout_s)
            except queue.Empty:
                raise PredictorError(f"predictor {self.command[0]!r} timed out after {self.timeout_s:.1f}s") from None
            if line is None:
                raise PredictorError(f"predictor {self.command[0]!r} exited (code {self._proc.poll()})")
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PredictorError(f"predictor {self.command[0]!r} sent malformed JSON: {exc}") from None
            if doc.get("id") != request_id:
                raise PredictorError(f"predictor {self.command[0]!r} answered id {doc.get('id')} to request {request_id}")
            outputs = doc.get("outputs")
            if not isinstance(outputs, list) or len(outputs) != len(designs):
                raise PredictorError(
                    f"predictor {self.command[0]!r} returned {0 if outputs is None else len(outputs)} "
                    f"rows for {len(designs)} designs"
                )
            return [[_parse_output(x) for x in row] for row in outputs]

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
        self._proc = None


class PredictorRuntime:
    """Evaluates all registered predictors with exact-key memoization.

    The cache key is the full design value tuple; perturbing a continuous
    value by one ulp is a miss. The evaluation counter increments once per
    design sent to any backend and never decreases. Caching is disabled for
    subprocess backends declared non-deterministic.
    """

    def __init__(self, specs: Sequence[PredictorSpec], schema: DesignSchema, timeout_ms: int | None = None):
        seen: set[str] = set()
        for spec in specs:
            overlap = seen & set(spec.channels)
            if overlap:
                raise PredictorError(f"channel names {sorted(overlap)} declared by more than one predictor")
            seen.update(spec.channels)
        self.specs = tuple(specs)
        self.schema = schema
        if timeout_ms is None:
            timeout_ms = int(os.environ.get(TIMEOUT_ENV_VAR, DEFAULT_TIMEOUT_MS))
        self._cache: dict[DesignPoint, dict[str, float]] = {}
        self._failed: set[DesignPoint] = set()
        self._evaluations = 0
        self._lock = threading.Lock()
        self._cacheable = all(
            isinstance(s.backend, BuiltinBackend) or s.backend.deterministic for s in self.specs
        )
        self._workers: dict[str, _SubprocessWorker] = {}
        for spec in self.specs:
            if isinstance(spec.backend, SubprocessBackend):
                self._workers[spec.name] = _SubprocessWorker(spec.backend.command, timeout_ms)

    @property
    def channels(self) -> tuple[str, ...]:
        return tuple(c for spec in self.specs for c in spec.channels)

    @property
    def evaluations(self) -> int:
        return self._evaluations

    def cache_lookup(self, design: DesignPoint) -> PredictionRecord | None:
        key = tuple(design)
        with self._lock:
            if key in self._failed:
                return PredictionRecord(values=key, outputs={}, failed=True)
            cached = self._cache.get(key)
        if cached is None:
            return None
        return PredictionRecord(values=key, outputs=dict(cached), failed=False)

    def predict_batch(self, designs: Sequence[DesignPoint]) -> list[PredictionRecord]:
        """Evaluate designs across all predictors, in input order.

        Failed evaluations (non-finite outputs) are flagged, not dropped. A
        backend failure raises :class:`PredictorError` carrying the records
        completed so far.
        """
        keys = [tuple(d) for d in designs]
        records: list[PredictionRecord | None] = [None] * len(keys)
        pending: list[DesignPoint] = []
        pending_set: set[DesignPoint] = set()
        for i, key in enumerate(keys):
            hit = self.cache_lookup(key) if self._cacheable else None
            if hit is not None:
                records[i] = hit
            elif key not in pending_set:
                pending.append(key)
                pending_set.add(key)

        if pending:
            try:
                fresh = self._evaluate(pending)
            except PredictorError as exc:
                done = {r.values: r for r in exc.partial}
                partial = [records[i] or done.get(key) for i, key in enumerate(keys)]
                raise PredictorError(str(exc), partial=[r for r in partial if r is not None]) from None
            with self._lock:
                self._evaluations += len(pending)
                if self._cacheable:
                    for record in fresh.values():
                        if record.failed:
                            self._failed.add(record.values)
                        else:
                            self._cache[record.values] = dict(record.outputs)
            for i, key in enumerate(keys):
                if records[i] is None:
                    records[i] = fresh[key]
        return [r for r in records if r is not None]

    def _evaluate(self, designs: list[DesignPoint]) -> dict[DesignPoint, PredictionRecord]:
        outputs: dict[DesignPoint, dict[str, float]] = {key: {} for key in designs}
        completed: list[PredictionRecord] = []
        for spec in self.specs:
            if isinstance(spec.backend, BuiltinBackend):
                matrix = self.schema.encode_many(designs)
                values = np.atleast_2d(builtin_function(spec.backend.function)(matrix, self.schema))
                if values.shape != (len(designs), len(spec.channels)):
                    raise PredictorError(
                        f"builtin {spec.backend.function!r} returned shape {values.shape}, "
                        f"expected {(len(designs), len(spec.channels))}",
                        partial=completed,
                    )
                for key, row in zip(designs, values):
                    for channel, value in zip(spec.channels, row):
                        outputs[key][channel] = float(value)
            else:
                worker = self._workers[spec.name]
                size = spec.backend.batch_size
                wire_designs = [[_json_value(v) if isinstance(v, float) else v for v in key] for key in designs]
                rows: list[list[float]] = []
                for start in range(0, len(designs), size):
                    try:
                        rows.extend(worker.request(wire_designs[start:start + size]))
                    except PredictorError as exc:
                        for key, row in zip(designs, rows):
                            completed.append(self._record_from_row(key, spec, row, outputs[key]))
                        raise PredictorError(str(exc), partial=completed) from None
                for key, row in zip(designs, rows):
                    if len(row) != len(spec.channels):
                        raise PredictorError(
                            f"predictor {spec.name!r} returned {len(row)} values for {len(spec.channels)} channels",
                            partial=completed,
                        )
                    for channel, value in zip(spec.channels, row):
                        outputs[key][channel] = value

        result: dict[DesignPoint, PredictionRecord] = {}
        for key in designs:
            channel_values = outputs[key]
            failed = any(not math.isfinite(v) for v in channel_values.values())
            result[key] = PredictionRecord(values=key, outputs={} if failed else channel_values, failed=failed)
        return result

    def _record_from_row(self, key, spec, row, merged) -> PredictionRecord:
        values = dict(merged)
        for channel, value in zip(spec.channels, row):
            values[channel] = value
        failed = any(not math.isfinite(v) for v in values.values())
        return PredictionRecord(values=key, outputs={} if failed else values, failed=failed)

    def close(self) -> None:
        for worker in self._workers.values():
            worker.close()

    def __enter__(self) -> "PredictorRuntime":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def run_worker(predict: Callable[[list[list]], Iterable[Iterable[float]]], stdin=None, stdout=None) -> None:
    """Serve a predict function over the line protocol (for worker scripts).

    ``predict`` receives the decoded design rows of one request and must
    return one output row per design. Runs until stdin closes.
    """
    import sys

    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        rows = [[_json_value(float(x)) for x in row] for row in predict(doc["designs"])]
        stdout.write(json.dumps({"id": doc["id"], "outputs": rows}, separators=(",", ":")) + "\n")
        stdout.flush()
