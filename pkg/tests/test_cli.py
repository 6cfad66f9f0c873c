import json

import pytest

from intervaltv import experiments as ex
from intervaltv.cli import main

SMALL = ex.ExperimentConfig(
    n=32,
    schedule=ex.ScheduleConfig(steps=4),
)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    cfg_path = out / "config.json"
    cfg_path.write_text(SMALL.to_json())
    return out, cfg_path


@pytest.fixture(scope="module")
def solved_dir(workdir):
    out, cfg = workdir
    d = out / "run"
    assert main(["synth", "--config", str(cfg), "--out", str(d), "--seed", "1"]) == 0
    assert main(["solve", "--out", str(d)]) == 0
    return d


class TestSynth:
    def test_invalid_config_exit_2(self, workdir, capsys):
        out, _ = workdir
        bad = out / "bad.json"
        bad.write_text(json.dumps({"n": 4}))
        assert main(["synth", "--config", str(bad), "--out", str(out / "x")]) == 2
        assert "n:" in capsys.readouterr().err

    def test_writes_instance_files(self, solved_dir):
        for name in (
            "meta.json",
            "ground_truth.csv",
            "data_noisy.csv",
            "data_lower.csv",
            "data_upper.csv",
            "operator_lower.csv",
            "operator_upper.csv",
        ):
            assert (solved_dir / name).exists()

    def test_determinism_byte_identical(self, workdir):
        out, cfg = workdir
        d1, d2 = out / "det1", out / "det2"
        for d in (d1, d2):
            assert main(["synth", "--config", str(cfg), "--out", str(d), "--seed", "7"]) == 0
        for name in ("ground_truth.csv", "data_noisy.csv", "operator_noisy.csv"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


class TestSolve:
    def test_missing_instance_exit_2(self, workdir):
        out, _ = workdir
        assert main(["solve", "--out", str(out / "nowhere")]) == 2

    def test_report_content(self, solved_dir):
        payload = json.loads((solved_dir / "solve_report.json").read_text())
        assert payload["passed"] is True
        assert payload["report"]["status"] == "optimal"
        assert payload["report"]["duality_gap"] <= 1e-7 * (1 + payload["report"]["objective"])
        assert "config_hash" in payload and "version" in payload
        assert "psnr" in payload["metrics"]

    def test_plotdata_columns(self, solved_dir):
        header = (solved_dir / "plotdata_solve.csv").read_text().splitlines()[0]
        assert header == "x,ground_truth,observed,reconstruction"


class TestDownstreamCommands:
    def test_debias(self, solved_dir):
        assert main(["debias", "--out", str(solved_dir)]) == 0
        payload = json.loads((solved_dir / "debias_report.json").read_text())
        assert payload["converged"] is True
        assert payload["gap"] <= 1e-5
        header = (solved_dir / "plotdata_debias.csv").read_text().splitlines()[0]
        assert header.endswith("debiased")

    def test_errorbars(self, solved_dir):
        assert main(["errorbars", "--out", str(solved_dir)]) == 0
        rows = (solved_dir / "errorbars.csv").read_text().splitlines()
        assert rows[0] == "region_start,region_end,lower,upper,ref_mean,exact_mean"
        for line in rows[1:]:
            parts = line.split(",")
            lower, upper, exact = float(parts[2]), float(parts[3]), float(parts[5])
            assert lower <= exact + 1e-9 <= upper + 2e-9
        header = (solved_dir / "plotdata_errorbars.csv").read_text().splitlines()[0]
        assert header == "x,ground_truth,observed,reconstruction,lower,upper"

    def test_baseline(self, solved_dir):
        assert main(["baseline", "--out", str(solved_dir)]) == 0
        payload = json.loads((solved_dir / "baseline_report.json").read_text())
        assert "naive" in payload and "morozov" in payload and "morozov_modified" in payload
        summary = (solved_dir / "baseline_summary.csv").read_text().splitlines()
        assert summary[0].startswith("method,status")
        assert len(summary) == 4

    def test_rate(self, workdir):
        out, cfg = workdir
        d = out / "rate_run"
        assert main(["rate", "--config", str(cfg), "--out", str(d), "--seed", "0"]) == 0
        rows = (d / "rate.csv").read_text().splitlines()
        eps = [float(r.split(",")[1]) for r in rows[1:]]
        assert len(eps) == 4 and all(b < a for a, b in zip(eps, eps[1:]))
        payload = json.loads((d / "rate_report.json").read_text())
        assert payload["slope"] is not None

    def test_report_renders_figures(self, solved_dir):
        assert main(["report", "--out", str(solved_dir)]) == 0
        summary = json.loads((solved_dir / "report_summary.json").read_text())
        made = summary["figures"]["."]
        assert any("reconstruction" in f for f in made)
        for rel in made:
            target = solved_dir / rel
            assert target.exists() and target.stat().st_size > 0

    def test_report_without_data_exit_2(self, workdir):
        out, _ = workdir
        empty = out / "empty"
        empty.mkdir(exist_ok=True)
        assert main(["report", "--out", str(empty)]) == 2


class TestBatchSeeds:
    def test_seeded_fanout(self, workdir):
        out, cfg = workdir
        d = out / "batch"
        assert main(["synth", "--config", str(cfg), "--out", str(d), "--seeds", "0,1"]) == 0
        assert (d / "seed-0" / "meta.json").exists()
        assert (d / "seed-1" / "meta.json").exists()
        meta0 = json.loads((d / "seed-0" / "meta.json").read_text())
        assert meta0["config"]["seed"] == 0

    def test_gamma_override(self, workdir):
        out, cfg = workdir
        d = out / "gam"
        assert main(
            ["synth", "--config", str(cfg), "--out", str(d), "--seed", "0", "--gamma", "0.01"]
        ) == 0
        meta = json.loads((d / "meta.json").read_text())
        assert meta["config"]["gamma"] == 0.01


def test_threaded_batch(workdir):
    out, cfg = workdir
    d = out / "threaded"
    code = main(
        ["synth", "--config", str(cfg), "--out", str(d), "--seeds", "0,1,2", "--threads", "2"]
    )
    assert code == 0
    for s in (0, 1, 2):
        assert (d / f"seed-{s}" / "meta.json").exists()
