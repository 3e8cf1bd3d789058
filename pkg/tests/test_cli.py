import json
import subprocess
import sys
import time
from pathlib import Path

import pytest

import hindsight
from hindsight.cli import main
from hindsight.io import read_table

PRESETS = Path(hindsight.__file__).parent / "presets"


def write_config(path, text):
    path.write_text(text)
    return path


MINIMAL = """\
seed = 3
[game]
num_groups = 1
group_size = 10
[theta]
beta = 1.0
phi = 0.0
"""


def run(*argv):
    return main([str(a) for a in argv])


def test_simulate_minimal(tmp_path):
    cfg = write_config(tmp_path / "c.toml", MINIMAL)
    assert run("simulate", "--config", cfg, "--out", tmp_path / "a") == 0
    rows = read_table(tmp_path / "a" / "outcomes.csv")
    assert len(rows) == 10
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["seed"] == 3


def test_simulate_rerun_from_manifest_is_identical(tmp_path):
    cfg = write_config(tmp_path / "c.toml", MINIMAL)
    run("simulate", "--config", cfg, "--out", tmp_path / "a")
    run("simulate", "--config", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b")
    for name in ("outcomes.csv", "outcomes.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_beta_names_the_key(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.toml", "[theta]\nphi = 0.0\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path) == 2
    assert "theta.beta" in capsys.readouterr().err


@pytest.mark.parametrize("text, needle", [
    ("[theta]\nbeta = 1\nphi = 0\nfoo = 2\n", "c.toml:4: unknown key 'theta.foo'"),
    ("[theta\n", "c.toml"),
    ("[game]\ngroup_size = 'ten'\n[theta]\nbeta = 1\nphi = 0\n", "game.group_size"),
    ("[bootstrap]\nlevel = 1.5\n[theta]\nbeta = 1\nphi = 0\n", "level"),
])
def test_config_errors(tmp_path, capsys, text, needle):
    cfg = write_config(tmp_path / "c.toml", text)
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o") == 2
    assert needle in capsys.readouterr().err


def test_seed_flag_and_env(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "c.toml", MINIMAL.replace("seed = 3\n", ""))
    monkeypatch.setenv("HINDSIGHT_SEED", "41")
    run("simulate", "--config", cfg, "--out", tmp_path / "env")
    run("simulate", "--config", cfg, "--out", tmp_path / "flag", "--seed", "42")
    assert json.loads((tmp_path / "env" / "manifest.json").read_text())["seed"] == 41
    assert json.loads((tmp_path / "flag" / "manifest.json").read_text())["seed"] == 42


def simulated_csv(tmp_path):
    cfg = write_config(tmp_path / "c.toml", MINIMAL.replace("num_groups = 1", "num_groups = 3"))
    run("simulate", "--config", cfg, "--out", tmp_path / "sim")
    return cfg, tmp_path / "sim" / "outcomes.csv"


@pytest.mark.parametrize("method, ignored", [("modified", False), ("ignore-regret", True)])
def test_infer_single_point(tmp_path, method, ignored):
    cfg, data = simulated_csv(tmp_path)
    out = tmp_path / method
    assert run("infer", data, "--config", cfg, "--bootstrap", 50, "--method", method, "--out", out) == 0
    rows = read_table(out / "confidence_set.csv")
    assert len(rows) == 1 and rows[0]["accept"] in ("0", "1")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["ignore_regret"] is ignored
    assert len(manifest["data_sha256"]) == 64
    diag = json.loads((out / "diagnostics.json").read_text())
    assert "negligibility_max" in diag and diag["num_players"] == 30


def test_infer_malformed_row(tmp_path, capsys):
    cfg, data = simulated_csv(tmp_path)
    lines = data.read_text().splitlines()
    lines[3] = "2,0,oops,0.1,0.2"
    data.write_text("\n".join(lines) + "\n")
    assert run("infer", data, "--config", cfg, "--out", tmp_path / "i") == 3
    assert "outcomes.csv:4:" in capsys.readouterr().err


def test_coverage_table1_layout(tmp_path):
    out = tmp_path / "t1"
    assert run("coverage", "--config", PRESETS / "table1.toml", "--reps", 2, "--bootstrap", 20, "--out", out) == 0
    text = (out / "coverage.csv").read_text().splitlines()
    assert text[0] == "S,N_s,phi0,method,level,coverage,se,runtime_s"
    assert len(text) == 1 + 4


def test_power_one_csv_per_panel(tmp_path):
    out = tmp_path / "f1"
    code = run("power", "--config", PRESETS / "figure1.toml", "--reps", 1, "--bootstrap", 10,
               "--method", "modified", "--out", out)
    assert code == 0
    assert sorted(p.name for p in out.glob("power_*.csv")) == ["power_phi0_0.5.csv", "power_phi0_0.csv"]
    rows = read_table(out / "power_phi0_0.csv")
    assert len(rows) == 11 and {r["method"] for r in rows} == {"modified"}


def test_coverage_smoke_run_is_fast(tmp_path):
    start = time.perf_counter()
    code = run("coverage", "--config", PRESETS / "table1.toml", "--reps", 10, "--out", tmp_path)
    assert code == 0
    assert time.perf_counter() - start < 60


def test_mcdiarmid_check_passes(tmp_path, capsys):
    assert run("mcdiarmid-check", "--config", PRESETS / "mcdiarmid.toml", "--out", tmp_path) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
    assert len(read_table(tmp_path / "mcdiarmid.csv")) == len(lines)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hindsight.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and hindsight.__version__ in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "hindsight.cli", "simulate", "--workers", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
