"""Boot a throwaway backend for the frontend acceptance test.

Serves the HTTP API on the given port with a fresh temporary data directory
(pre-seeded with the benchmark dataset CSV) and prints READY when listening.
"""

import argparse
import tempfile
from pathlib import Path

import uvicorn

from mcd import bench2d
from mcd.service import create_app


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, required=True)
    args = parser.parse_args()

    data_dir = Path(tempfile.mkdtemp(prefix="mcd-frontend-acceptance-"))
    (data_dir / "bench2d_dataset.csv").write_text(
        bench2d.dataset_csv_text(bench2d.make_dataset()), encoding="utf-8"
    )
    app = create_app(data_dir=data_dir, cors=True)
    print(f"READY port={args.port} data_dir={data_dir}", flush=True)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="error")


if __name__ == "__main__":
    main()
