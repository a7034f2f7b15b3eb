import json
import subprocess
import sys
from pathlib import Path

import pytest

from mass_sim.cli import main

DATA = Path(__file__).parent / "data"

SMALL = """\
n: 40
T: 8
R: 3
topology: {kind: BA, m: 2}
master_seed: 7
"""
FROZEN = """\
n: 30
T: 6
R: 3
topology: {kind: ER, p: 0.0}
"""


def cfg(tmp_path, text, name="config.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def data_files(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "manifest.json"}


class TestSimulate:
    def test_outputs(self, tmp_path):
        out = tmp_path / "o"
        assert main(["simulate", "--config", cfg(tmp_path, SMALL), "--out", str(out)]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["manifest.json", "summary.json"] + [f"trajectory_rep00{i}.csv" for i in range(3)]
        man = json.loads((out / "manifest.json").read_text())
        assert man["master_seed"] == 7 and len(man["config_hash"]) == 64
        assert set(man) >= {"command", "config_hash", "master_seed", "output_paths", "tool_version", "created_at"}
        assert sorted(man["output_paths"]) == sorted(n for n in names if n != "manifest.json")

    def test_missing_config(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "o")]) == 2

    def test_unknown_key(self, tmp_path):
        assert main(["simulate", "--config", cfg(tmp_path, SMALL + "colour: red\n"), "--out", str(tmp_path)]) == 2

    def test_bad_value(self, tmp_path):
        assert main(["simulate", "--config", cfg(tmp_path, "n: 0\n"), "--out", str(tmp_path)]) == 2

    def test_seed_override(self, tmp_path):
        c = cfg(tmp_path, SMALL)
        main(["simulate", "--config", c, "--out", str(tmp_path / "a"), "--seed", "99"])
        main(["simulate", "--config", c, "--out", str(tmp_path / "b")])
        assert json.loads((tmp_path / "a" / "manifest.json").read_text())["master_seed"] == 99
        assert data_files(tmp_path / "a") != data_files(tmp_path / "b")

    def test_deterministic_and_parallel(self, tmp_path):
        c = cfg(tmp_path, SMALL)
        main(["simulate", "--config", c, "--out", str(tmp_path / "a"), "--states"])
        main(["simulate", "--config", c, "--out", str(tmp_path / "b"), "--states", "--workers", "2"])
        assert data_files(tmp_path / "a") == data_files(tmp_path / "b")

    def test_io_error(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["simulate", "--config", cfg(tmp_path, SMALL), "--out", str(blocker / "sub")]) == 3

    def test_usage(self, capsys):
        assert main([]) == 2
        assert main(["simulate"]) == 2


class TestExperiment:
    def test_unknown(self, tmp_path):
        assert main(["experiment", "p9", "--config", cfg(tmp_path, SMALL), "--out", str(tmp_path)]) == 2

    def test_p4_frozen(self, tmp_path):
        out = tmp_path / "o"
        assert main(["experiment", "p4", "--config", cfg(tmp_path, FROZEN), "--out", str(out)]) == 0
        doc = json.loads((out / "p4.json").read_text())
        assert doc["h0_rejected"]["stationary"] is False

    @pytest.mark.parametrize("which", ["p1", "p2", "p3", "p4"])
    def test_deterministic(self, tmp_path, which):
        c = cfg(tmp_path, SMALL)
        for d in ("a", "b"):
            assert main(["experiment", which, "--config", c, "--out", str(tmp_path / d)]) == 0
        assert data_files(tmp_path / "a") == data_files(tmp_path / "b")
        assert (tmp_path / "a" / f"{which}.json").exists()


class TestBenchmark:
    def test_stability_frozen(self, tmp_path):
        out = tmp_path / "o"
        assert main(["benchmark", "stability", "--config", cfg(tmp_path, FROZEN), "--out", str(out)]) == 0
        rows = (out / "stability_series.csv").read_text().splitlines()[1:]
        w1 = [float(r.split(",")[3]) for r in rows if r.startswith("W1,")]
        assert w1 and all(v == 0 for v in w1)

    def test_perturbation_zero(self, tmp_path):
        text = SMALL + "benchmark: {inject_count: 0, at_step: 3}\n"
        out = tmp_path / "o"
        assert main(["benchmark", "perturbation", "--config", cfg(tmp_path, text), "--out", str(out)]) == 0
        doc = json.loads((out / "perturbation.json").read_text())
        assert doc["summary"]["mean_final_shift"] == 0

    def test_topology_single(self, tmp_path):
        text = SMALL + "benchmark:\n  topologies: [{kind: WS, k: 4, p: 0.1}]\n"
        out = tmp_path / "o"
        assert main(["benchmark", "topology", "--config", cfg(tmp_path, text), "--out", str(out)]) == 0
        assert json.loads((out / "topology.json").read_text())["conditions"] == ["WS(k=4,p=0.1)"]

    def test_heterogeneity(self, tmp_path):
        text = SMALL + "benchmark:\n  compositions: [{mode: none}, {mode: periphery, count: 4}]\n"
        out = tmp_path / "o"
        assert main(["benchmark", "heterogeneity", "--config", cfg(tmp_path, text), "--out", str(out)]) == 0
        doc = json.loads((out / "heterogeneity.json").read_text())
        assert doc["conditions"] == ["all_baseline", "4_amplifiers_periphery"]

    def test_unknown_bench_key(self, tmp_path):
        text = SMALL + "benchmark: {inject_cnt: 3}\n"
        assert main(["benchmark", "perturbation", "--config", cfg(tmp_path, text), "--out", str(tmp_path)]) == 2

    def test_unknown_name(self, tmp_path):
        assert main(["benchmark", "speed", "--config", cfg(tmp_path, SMALL), "--out", str(tmp_path)]) == 2

    @pytest.mark.parametrize("which", ["stability", "perturbation", "heterogeneity", "topology"])
    def test_deterministic(self, tmp_path, which):
        c = cfg(tmp_path, SMALL)
        for d in ("a", "b"):
            assert main(["benchmark", which, "--config", c, "--out", str(tmp_path / d)]) == 0
        assert data_files(tmp_path / "a") == data_files(tmp_path / "b")


class TestAnalyze:
    def test_empty(self, tmp_path, capsys):
        p = tmp_path / "e.jsonl"
        p.write_text("")
        assert main(["analyze", "--log", str(p), "--out", str(tmp_path / "o")]) == 2
        assert "no records" in capsys.readouterr().err

    def test_missing(self, tmp_path):
        assert main(["analyze", "--log", str(tmp_path / "x.jsonl"), "--out", str(tmp_path)]) == 2

    def test_fixture(self, tmp_path):
        expected = json.loads((DATA / "two_bin_expected.json").read_text())
        out = tmp_path / "o"
        argv = ["analyze", "--log", str(DATA / "two_bin_log.jsonl"), "--out", str(out)]
        assert main(argv + ["--bin-seconds", str(expected["bin_seconds"])]) == 0
        p3 = json.loads((out / "p3.json").read_text())
        p4 = json.loads((out / "p4.json").read_text())
        assert abs(p3["summary"]["fits"][0]["slope"] - expected["p3_slope"]) < 1e-10
        assert abs(p4["summary"]["w1"][0] - expected["p4_w1"]) < 1e-10
        assert {p.name for p in out.iterdir()} >= {f"p{i}.json" for i in range(1, 5)}

    def test_dangling_only(self, tmp_path, capsys):
        p = tmp_path / "d.jsonl"
        rows = [
            {"id": f"r{i}", "author": f"u{i}", "parent_id": "gone", "created_at": i * 90000, "karma": i}
            for i in range(3)
        ]
        p.write_text("".join(json.dumps(r) + "\n" for r in rows))
        assert main(["analyze", "--log", str(p), "--out", str(tmp_path / "o")]) == 0
        assert "parents missing" in capsys.readouterr().err

    def test_deterministic(self, tmp_path):
        argv = ["analyze", "--log", str(DATA / "two_bin_log.jsonl"), "--out"]
        main(argv + [str(tmp_path / "a")])
        main(argv + [str(tmp_path / "b")])
        assert data_files(tmp_path / "a") == data_files(tmp_path / "b")


def test_console_entry_point(tmp_path):
    out = tmp_path / "o"
    proc = subprocess.run(
        [sys.executable, "-m", "mass_sim.cli", "simulate", "--config", cfg(tmp_path, SMALL), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "manifest.json").exists()
