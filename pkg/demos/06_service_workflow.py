"""The full HTTP workflow: register a problem, run it, resample interactively.

Boots the service in-process, drives it exactly the way the web client does:
POST the problem config, POST a run, poll until finished, then fire sampling
requests as "slider" positions change. Requires the service dependencies
(fastapi + httpx for the in-process client).
"""

import json
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from mcd import bench2d
from mcd.service import create_app

with tempfile.TemporaryDirectory() as tmp:
    data_dir = Path(tmp) / "data"
    data_dir.mkdir()
    (data_dir / "bench2d_dataset.csv").write_text(
        bench2d.dataset_csv_text(bench2d.make_dataset()), encoding="utf-8")

    config = bench2d.problem_config_doc("bench2d_dataset.csv")
    config["optimizer"] = {"population": 100, "generations": 60, "seed": 42}

    app = create_app(data_dir=data_dir, cors=True)
    with TestClient(app) as client:
        problem_id = client.post("/v1/problems", json=config).json()["problem_id"]
        print("problem registered:", problem_id[:16], "...")

        run_id = client.post("/v1/runs", json={"problem_id": problem_id}).json()["run_id"]
        print("run submitted:", run_id)
        while True:
            record = client.get(f"/v1/runs/{run_id}").json()
            if record["state"] in ("finished", "failed"):
                break
            if record["progress"]:
                print("  progress:", record["progress"])
            time.sleep(0.25)
        print("run state:", record["state"], "| archive entries:", record["archive_entries"])

        # Interactive loop: each "slider release" is one cheap POST.
        for diversity in (0.2, 2.0, 20.0):
            body = {
                "weights": {"proximity": 0.5, "sparsity": 0.2, "manifold": 0.5, "diversity": diversity},
                "count": 5,
            }
            started = time.perf_counter()
            response = client.post(f"/v1/runs/{run_id}/samples", json=body)
            elapsed = (time.perf_counter() - started) * 1000
            picks = [tuple(round(v, 3) for v in e["values"]) for e in response.json()["entries"]]
            print(f"diversity={diversity:<5} -> {picks}  ({elapsed:.0f} ms)")

        page = client.get(f"/v1/runs/{run_id}/candidates", params={"limit": 3}).json()
        print("\nfirst archive rows:", json.dumps(page["entries"], indent=2)[:400], "...")
