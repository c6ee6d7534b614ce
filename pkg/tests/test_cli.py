import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from skrecover.cli import main
from skrecover.sketch import read_sketch

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def tokens_file(tmp_path):
    rng = np.random.default_rng(0)
    words = [f"w{int(i)}" for i in rng.zipf(1.7, size=2000) % 60]
    path = tmp_path / "tokens.txt"
    path.write_text("\n".join(words) + "\n", encoding="utf-8")
    truth = {}
    for w in words:
        truth[w] = truth.get(w, 0) + 1
    return path, truth


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestSketchCommands:
    def test_build_info_roundtrip(self, tokens_file, tmp_path, capsys):
        path, truth = tokens_file
        out = tmp_path / "s.bin"
        assert run_cli("sketch", "build", path, "--j", 64, "--m-hashes", 3, "--seed", 5, "--out", out) == 0
        assert run_cli("sketch", "info", out) == 0
        info = capsys.readouterr().out
        assert "rows=3 width=64 n=2000" in info
        with open(out, "rb") as fh:
            sk = read_sketch(fh)
        assert sk.n == 2000

    def test_merge_equals_rebuild(self, tokens_file, tmp_path):
        path, _ = tokens_file
        lines = path.read_text().splitlines()
        half_a = tmp_path / "a.txt"
        half_b = tmp_path / "b.txt"
        half_a.write_text("\n".join(lines[:1000]) + "\n")
        half_b.write_text("\n".join(lines[1000:]) + "\n")
        for src, dst in [(half_a, "a.bin"), (half_b, "b.bin"), (path, "full.bin")]:
            assert run_cli("sketch", "build", src, "--j", 32, "--seed", 9, "--out", tmp_path / dst) == 0
        assert run_cli("sketch", "merge", tmp_path / "a.bin", tmp_path / "b.bin", "--out", tmp_path / "m.bin") == 0
        merged = read_sketch(open(tmp_path / "m.bin", "rb"))
        full = read_sketch(open(tmp_path / "full.bin", "rb"))
        assert merged == full


class TestEstimateCommands:
    def test_cms_estimate_upper_bounds_truth(self, tokens_file, tmp_path, capsys):
        path, truth = tokens_file
        out = tmp_path / "s.bin"
        run_cli("sketch", "build", path, "--j", 128, "--out", out)
        capsys.readouterr()
        key = "w1"
        assert run_cli("estimate", "freq", "--sketch", out, "--key", key, "--smoothing", "cms") == 0
        value = int(capsys.readouterr().out.strip())
        assert value >= truth.get(key, 0)

    def test_fit_then_estimate_and_interval(self, tokens_file, tmp_path, capsys):
        path, truth = tokens_file
        sk_path = tmp_path / "s.bin"
        params_path = tmp_path / "params.json"
        run_cli("sketch", "build", path, "--j", 64, "--out", sk_path)
        assert run_cli("fit", "dp", "--sketch", sk_path, "--out", params_path) == 0
        payload = json.loads(params_path.read_text())
        assert payload["kind"] == "dp" and payload["theta"] > 0
        capsys.readouterr()
        assert run_cli(
            "estimate", "freq", "--sketch", sk_path, "--key", "w1",
            "--smoothing", "dp", "--params-file", params_path,
        ) == 0
        value = float(capsys.readouterr().out.strip())
        assert value >= 0
        assert run_cli(
            "interval", "--sketch", sk_path, "--key", "w1",
            "--params-file", params_path, "--level", "0.9",
        ) == 0
        lo, hi = map(int, capsys.readouterr().out.split())
        assert 0 <= lo <= hi

    def test_estimate_card(self, tokens_file, tmp_path, capsys):
        path, truth = tokens_file
        sk_path = tmp_path / "s.bin"
        params_path = tmp_path / "params.json"
        run_cli("sketch", "build", path, "--j", 64, "--out", sk_path)
        run_cli("fit", "dp", "--sketch", sk_path, "--out", params_path)
        capsys.readouterr()
        assert run_cli(
            "estimate", "card", "--sketch", sk_path, "--smoothing", "dp",
            "--params-file", params_path,
        ) == 0
        value = float(capsys.readouterr().out.strip())
        assert 0 < value <= 2000


class TestSimulate:
    def test_simulate_pyp_writes_tokens_and_truth(self, tmp_path, capsys):
        out = tmp_path / "stream.txt"
        truth_out = tmp_path / "truth.csv"
        assert run_cli(
            "simulate", "pyp", "--gamma", 5, "--sigma", 0.5, "--n", 500,
            "--seed", 1, "--out", out, "--truth-out", truth_out,
        ) == 0
        tokens = out.read_text().splitlines()
        assert len(tokens) == 500
        lines = truth_out.read_text().splitlines()
        assert lines[0] == "symbol,count"
        total = sum(int(line.split(",")[1]) for line in lines[1:])
        assert total == 500

    def test_simulate_nggp_prefix_fit_round_trip(self, tmp_path, capsys):
        out = tmp_path / "stream.txt"
        assert run_cli(
            "simulate", "nggp", "--theta", 20, "--alpha", 0.4, "--n", 800,
            "--seed", 2, "--out", out,
        ) == 0
        capsys.readouterr()
        assert run_cli(
            "fit", "nggp-prefix", "--input", out, "--format", "u64", "--m", 800,
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["kind"] == "nggp"
        assert 0 < payload["alpha"] < 1


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["sketch", "explode"])
        assert err.value.code == 2

    def test_missing_file_returns_2(self, capsys):
        assert main(["sketch", "info", "/nonexistent/sketch.bin"]) == 2

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "skrecover.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "skrecover" in proc.stdout


class TestEvalRun:
    def test_reproduces_golden_csv(self, tmp_path):
        config = {
            "generator": {"kind": "pyp", "gamma": 5.0, "sigma": 0.25},
            "n": 1200,
            "width": 16,
            "num_hashes": 2,
            "repetitions": 2,
            "master_seed": 20260809,
            "prefix_m": 100,
            "card_mc_draws": 400,
            "nggp_pmf_draws": 400,
            "smoothing": ["dp", "nggp"],
            "rules": ["poe", "min"],
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        out_dir = tmp_path / "out"
        assert run_cli("eval", "run", "--config", cfg_path, "--out-dir", out_dir) == 0
        produced = (out_dir / "freq_mae.csv").read_text()
        golden = (DATA_DIR / "golden_freq_mae.csv").read_text()
        assert produced == golden
        produced_card = (out_dir / "cardinality.csv").read_text()
        golden_card = (DATA_DIR / "golden_cardinality.csv").read_text()
        assert produced_card == golden_card
