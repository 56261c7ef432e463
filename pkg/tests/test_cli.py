import csv
import json
import sys

import pytest
from click.testing import CliRunner

from mcd import bench2d
from mcd.cli import main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def bench_dir(tmp_path):
    """Benchmark inputs plus a small-config variant for fast runs."""
    bench2d.write_benchmark(tmp_path, resolution=256)
    doc = json.loads((tmp_path / "bench2d_problem.json").read_text())
    doc["optimizer"] = {"population": 40, "generations": 15, "seed": 4}
    small = tmp_path / "small_problem.json"
    small.write_text(json.dumps(doc), encoding="utf-8")
    return tmp_path


def run_cli(runner, args):
    return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)


class TestBenchCommand:
    def test_emits_artifacts(self, runner, tmp_path):
        result = run_cli(runner, ["bench2d", "--out", tmp_path, "--resolution", 256])
        assert result.exit_code == 0
        for name in ("bench2d_dataset.csv", "bench2d_mask.pgm", "bench2d_problem.json"):
            assert (tmp_path / name).exists()


class TestRunCommand:
    def test_writes_archive_and_manifest(self, runner, bench_dir, tmp_path):
        out = tmp_path / "out"
        result = run_cli(runner, ["run", "--config", bench_dir / "small_problem.json", "--out", out])
        assert result.exit_code == 0
        archive = json.loads((out / "archive.json").read_text())
        assert len(archive["entries"]) >= 1
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "finished"
        assert manifest["evaluations"] > 0
        assert manifest["hashes"]["archive"]

    def test_malformed_config_exits_2_without_archive(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        out = tmp_path / "out"
        result = run_cli(runner, ["run", "--config", bad, "--out", out])
        assert result.exit_code == 2
        assert not (out / "archive.json").exists()

    def test_unknown_config_key_exits_2(self, runner, bench_dir, tmp_path):
        doc = json.loads((bench_dir / "small_problem.json").read_text())
        doc["extra"] = True
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc), encoding="utf-8")
        result = run_cli(runner, ["run", "--config", bad, "--out", tmp_path / "out"])
        assert result.exit_code == 2

    def test_dead_subprocess_predictor_exits_3_with_partial_archive(self, runner, bench_dir, tmp_path):
        doc = json.loads((bench_dir / "small_problem.json").read_text())
        doc["predictors"] = [{
            "name": "dead", "channels": ["Y1", "Y2"],
            "backend": {"type": "subprocess", "command": [sys.executable, "-c", "pass"]},
        }]
        config = tmp_path / "dead.json"
        config.write_text(json.dumps(doc), encoding="utf-8")
        out = tmp_path / "out"
        result = run_cli(runner, ["run", "--config", config, "--out", out])
        assert result.exit_code == 3
        assert (out / "archive.json").exists()  # partial archive preserved
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "failed"

    def test_dataset_flag_overrides_config(self, runner, bench_dir, tmp_path):
        other = tmp_path / "tiny.csv"
        other.write_text(bench2d.dataset_csv_text(bench2d.make_dataset(25, seed=9)), encoding="utf-8")
        out = tmp_path / "out"
        result = run_cli(runner, [
            "run", "--config", bench_dir / "small_problem.json", "--dataset", other, "--out", out,
        ])
        assert result.exit_code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["dataset_path"] == str(other)
        # Different dataset -> different ranges and manifold values -> different hash.
        archive = json.loads((out / "archive.json").read_text())
        base = run_cli(runner, ["run", "--config", bench_dir / "small_problem.json", "--out", tmp_path / "base"])
        assert base.exit_code == 0
        base_archive = json.loads((tmp_path / "base" / "archive.json").read_text())
        assert archive["problem_hash"] != base_archive["problem_hash"]

    def test_seed_determinism_byte_identical(self, runner, bench_dir, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            result = run_cli(runner, [
                "run", "--config", bench_dir / "small_problem.json", "--out", out, "--seed", 77,
            ])
            assert result.exit_code == 0
        assert (out1 / "archive.json").read_bytes() == (out2 / "archive.json").read_bytes()

    def test_writes_only_inside_out_dir(self, runner, bench_dir, tmp_path, monkeypatch):
        workdir = tmp_path / "cwd"
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        out = tmp_path / "only-here"
        result = run_cli(runner, ["run", "--config", bench_dir / "small_problem.json", "--out", out])
        assert result.exit_code == 0
        assert list(workdir.iterdir()) == []


@pytest.fixture
def finished_run(runner, bench_dir, tmp_path):
    out = tmp_path / "run"
    result = run_cli(runner, ["run", "--config", bench_dir / "small_problem.json", "--out", out])
    assert result.exit_code == 0
    return out


class TestSampleCommand:
    def test_balanced_weights_write_csv_and_json(self, runner, finished_run, tmp_path):
        out = tmp_path / "samples"
        result = run_cli(runner, [
            "sample", "--archive", finished_run / "archive.json", "--count", 5,
            "--w-proximity", 0.5, "--w-sparsity", 0.2, "--w-manifold", 0.5, "--w-diversity", 0.2,
            "--out", out,
        ])
        assert result.exit_code == 0
        with open(out / "samples.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["x1", "x2", "f_pr", "f_sp", "f_mp", "peak_density", "band_level", "quality"]
        assert len(rows) == 6
        doc = json.loads((out / "samples.json").read_text())
        assert len(doc["entries"]) == 5

    def test_count_one_single_best(self, runner, finished_run, tmp_path):
        out = tmp_path / "one"
        result = run_cli(runner, ["sample", "--archive", finished_run / "archive.json", "--count", 1, "--out", out])
        assert result.exit_code == 0
        doc = json.loads((out / "samples.json").read_text())
        assert len(doc["entries"]) == 1

    def test_resampling_does_not_touch_manifest(self, runner, finished_run, tmp_path):
        before = (finished_run / "manifest.json").read_bytes()
        for w in ("1.0", "9.0"):
            result = run_cli(runner, [
                "sample", "--archive", finished_run / "archive.json", "--count", 3,
                "--w-proximity", w, "--out", tmp_path / f"s{w}",
            ])
            assert result.exit_code == 0
        assert (finished_run / "manifest.json").read_bytes() == before

    def test_hash_mismatch_exits_4(self, runner, finished_run, bench_dir, tmp_path):
        doc = json.loads((bench_dir / "small_problem.json").read_text())
        doc["query"] = {"values": list(bench2d.QUERIES["D3"])}
        other = tmp_path / "other.json"
        other.write_text(json.dumps(doc), encoding="utf-8")
        result = run_cli(runner, [
            "sample", "--archive", finished_run / "archive.json", "--count", 1,
            "--config", other, "--out", tmp_path / "s",
        ])
        assert result.exit_code == 4

    def test_corrupt_archive_exits_4(self, runner, tmp_path):
        bad = tmp_path / "archive.json"
        bad.write_text("{}", encoding="utf-8")
        result = run_cli(runner, ["sample", "--archive", bad, "--count", 1, "--out", tmp_path / "s"])
        assert result.exit_code == 4

    def test_empty_archive_exits_5(self, runner, bench_dir, tmp_path):
        doc = json.loads((bench_dir / "small_problem.json").read_text())
        doc["constraints"]["outputs"][1] = {"channel": "Y2", "lower": 1.01}  # unattainable
        config = tmp_path / "infeasible.json"
        config.write_text(json.dumps(doc), encoding="utf-8")
        out = tmp_path / "run"
        assert run_cli(runner, ["run", "--config", config, "--out", out]).exit_code == 0
        result = run_cli(runner, ["sample", "--archive", out / "archive.json", "--count", 1, "--out", tmp_path / "s"])
        assert result.exit_code == 5
        assert "no valid counterfactuals" in result.output


class TestSweepCommand:
    def test_grid_csv_with_geometric_schedules(self, runner, finished_run, tmp_path):
        out = tmp_path / "sweep"
        result = run_cli(runner, [
            "sweep", "--archive", finished_run / "archive.json",
            "--rows", 6, "--cols", 6,
            "--row-schedule", "quality=0.2/2^i",
            "--col-schedule", "alpha:peak_density=1.5^(n-j);alpha:band_level=1.5^(j-1)",
            "--target", "peak_density=0.8", "--target", "band_level=0.5",
            "--out", out,
        ])
        assert result.exit_code == 0, result.output
        with open(out / "sweep.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert len(rows) == 37  # header + 36 cells
        assert rows[0][:2] == ["row", "col"]

    def test_single_cell_matches_sample_count_one(self, runner, finished_run, tmp_path):
        sweep_out = tmp_path / "sweep"
        result = run_cli(runner, [
            "sweep", "--archive", finished_run / "archive.json",
            "--rows", 1, "--cols", 1, "--row-schedule", "w_pr=0.5", "--col-schedule", "w_d=0.2",
            "--out", sweep_out,
        ])
        assert result.exit_code == 0
        sample_out = tmp_path / "sample"
        result = run_cli(runner, [
            "sample", "--archive", finished_run / "archive.json", "--count", 1,
            "--w-proximity", 0.5, "--w-sparsity", 0.2, "--w-manifold", 0.5, "--w-diversity", 0.2,
            "--out", sample_out,
        ])
        assert result.exit_code == 0
        with open(sweep_out / "sweep.csv", newline="") as handle:
            sweep_row = list(csv.reader(handle))[1][2:]
        with open(sample_out / "samples.csv", newline="") as handle:
            sample_row = list(csv.reader(handle))[1]
        assert sweep_row == sample_row

    def test_negative_weight_schedule_exits_2(self, runner, finished_run, tmp_path):
        result = run_cli(runner, [
            "sweep", "--archive", finished_run / "archive.json",
            "--rows", 2, "--cols", 1, "--row-schedule", "w_pr=0.1-0.2*i", "--col-schedule", "w_d=1",
            "--out", tmp_path / "s",
        ])
        assert result.exit_code == 2
