"""Attaching an external model as a subprocess predictor.

Any executable that reads one JSON request per line on stdin and writes one
JSON response per line on stdout can serve as a predictor; nothing links
against this package. This demo writes such a worker script to disk, wires
it into a problem, and shows that it produces the same archive as the
in-process backend, byte for byte.
"""

import sys
import tempfile
from pathlib import Path

from mcd import OptimizerConfig, run_optimization
from mcd import bench2d

WORKER_SOURCE = '''
import json
import sys

import numpy as np

def predict(designs):
    x = np.asarray(designs, dtype=float)
    y1 = (np.sin(3 * np.pi * x[:, 0]) + 1) / 2
    y2 = np.maximum(
        np.exp(-((x[:, 0] - 0.5) ** 2 + (x[:, 1] - 0.3) ** 2) / (2 * 0.2 ** 2)),
        np.exp(-((x[:, 0] - 0.5) ** 2 + (x[:, 1] - 0.7) ** 2) / (2 * 0.2 ** 2)),
    )
    return np.column_stack([y1, y2]).tolist()

for line in sys.stdin:
    request = json.loads(line)
    print(json.dumps({"id": request["id"], "outputs": predict(request["designs"])}), flush=True)
'''

with tempfile.TemporaryDirectory() as tmp:
    worker_path = Path(tmp) / "my_predictor.py"
    worker_path.write_text(WORKER_SOURCE, encoding="utf-8")
    print(f"worker script: {worker_path}")

    dataset = bench2d.make_dataset()
    config = OptimizerConfig(population=60, generations=20, seed=5)

    local = run_optimization(bench2d.make_problem("D2", dataset=dataset), config)
    print(f"builtin backend: {len(local)} candidates")

    remote_problem = bench2d.make_problem(
        "D2", dataset=dataset,
        subprocess_command=(sys.executable, str(worker_path)),
    )
    remote = run_optimization(remote_problem, config)
    print(f"subprocess backend: {len(remote)} candidates")

    a = Path(tmp) / "local.json"
    b = Path(tmp) / "remote.json"
    local.save(a)
    remote.save(b)
    print("archives byte-identical:", a.read_bytes() == b.read_bytes())

print("""
The request/response framing is newline-delimited JSON:
  -> {"id": 0, "designs": [[0.1, 0.2], ...]}
  <- {"id": 0, "outputs": [[0.42, 0.9], ...]}
Categorical feature values travel as their tokens; non-finite outputs are
encoded as the strings "nan"/"inf" and mark the affected design as failed.
MCD_PREDICTOR_TIMEOUT_MS bounds the per-batch wait (default 60000).
""")
