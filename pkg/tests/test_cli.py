"""Command-line interface tests: exit codes, emitted files, overrides.

Most tests call main(argv) in process so exit codes and stderr are easy to
assert; one test drives the installed console script end to end.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from alivepf.cli import main


def read_csv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# ")
    meta = {}
    for token in lines[0][2:].split(" "):
        key, _, value = token.partition("=")
        meta[key] = value
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return meta, header, rows


def test_filter_alive_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "run"
    code = main(["filter", "--horizon", "5", "--n-alive", "10",
                 "--epsilon", "5.0", "--seed", "3", "--out", str(out)])
    assert code == 0
    meta, header, rows = read_csv(out / "filter_run.csv")
    assert header == ["step", "stopping_time", "filter_mean", "true_latent"]
    assert len(rows) == 5
    assert meta["variant"] == "alive"
    assert all(float(row[1]) >= 10 for row in rows)
    manifest = json.loads((out / "filter_run_manifest.json").read_text())
    assert manifest["variant"] == "alive"
    assert manifest["n_alive"] == 10
    assert isinstance(manifest["log_gamma"], float)
    assert isinstance(manifest["log_gamma_all_steps"], float)
    assert manifest["total_trials"] >= 5 * 10


def test_filter_lgo_variant(tmp_path):
    out = tmp_path / "lgo"
    code = main(["filter", "--horizon", "4", "--n-alive", "8",
                 "--variant", "lgo", "--out", str(out)])
    assert code == 0
    meta, _, rows = read_csv(out / "filter_run.csv")
    assert meta["variant"] == "lgo"
    assert len(rows) == 4
    manifest = json.loads((out / "filter_run_manifest.json").read_text())
    assert manifest["variant"] == "lgo"


def test_filter_standard_variant(tmp_path):
    out = tmp_path / "std"
    code = main(["filter", "--horizon", "6", "--n-alive", "30",
                 "--variant", "standard", "--epsilon", "8.0",
                 "--out", str(out)])
    assert code == 0
    _, header, rows = read_csv(out / "filter_run.csv")
    assert header == ["step", "alive_count", "filter_mean", "true_latent"]
    assert len(rows) == 6
    manifest = json.loads((out / "filter_run_manifest.json").read_text())
    assert manifest["variant"] == "standard"
    assert isinstance(manifest["collapsed"], bool)
    assert "collapse_step" in manifest


def test_filter_same_seed_is_byte_identical(tmp_path):
    args = ["filter", "--horizon", "4", "--n-alive", "12", "--seed", "21"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "filter_run.csv").read_bytes() == \
        (tmp_path / "b" / "filter_run.csv").read_bytes()


@pytest.mark.parametrize("extra", [
    ["--epsilon", "0.0"],
    ["--horizon", "0"],
    ["--sigma-v2", "-1.0"],
    ["--sigma-w2", "0.0"],
    ["--n-alive", "1"],
])
def test_filter_bad_arguments_exit_2(tmp_path, capsys, extra):
    code = main(["filter", "--out", str(tmp_path)] + extra)
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_filter_cap_exceeded_exits_3(tmp_path, capsys):
    code = main(["filter", "--horizon", "3", "--n-alive", "10",
                 "--epsilon", "1e-8", "--cap", "100", "--out", str(tmp_path)])
    assert code == 3
    assert "trial cap exceeded" in capsys.readouterr().err


def test_experiment_subcommand_with_overrides(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(
        {"experiment": "identities", "replicates": 200}))
    out = tmp_path / "out"
    code = main(["experiment", "--config", str(config_path),
                 "--seed", "11", "--replicates", "300", "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "identities_manifest.json").read_text())
    assert manifest["seed"] == 11
    assert manifest["config"]["replicates"] == 300
    meta, _, rows = read_csv(out / "identities.csv")
    assert meta["rows"] == str(len(rows)) == "13"


@pytest.mark.parametrize("payload", [
    None,                                     # missing file
    "{not json",                              # invalid JSON
    "[1, 2]",                                 # not an object
    '{"experiment": "mystery"}',              # unknown experiment
    '{"experiment": "identities", "typo": 1}',  # unknown setting
])
def test_experiment_bad_configs_exit_2(tmp_path, capsys, payload):
    config_path = tmp_path / "config.json"
    if payload is not None:
        config_path.write_text(payload)
    code = main(["experiment", "--config", str(config_path),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_pmmh_subcommand_rejects_non_pmmh_config(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"experiment": "identities"}))
    code = main(["pmmh", "--config", str(config_path),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    assert "pmmh" in capsys.readouterr().err


def test_pmmh_subcommand_runs_validation_chain(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(
        {"experiment": "pmmh_lg_validation", "horizon": 2,
         "iterations": 40, "n_alive": 5, "latent_grid": 100}))
    out = tmp_path / "out"
    code = main(["pmmh", "--config", str(config_path), "--seed", "8",
                 "--out", str(out)])
    assert code == 0
    manifest = json.loads(
        (out / "pmmh_lg_validation_manifest.json").read_text())
    assert manifest["seed"] == 8
    assert (out / "pmmh_lg_trace.csv").exists()
    assert (out / "pmmh_lg_posterior.csv").exists()


def test_identities_subcommand(tmp_path):
    out = tmp_path / "out"
    code = main(["identities", "--replicates", "150", "--seed", "9",
                 "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "identities_manifest.json").read_text())
    assert manifest["seed"] == 9
    assert manifest["config"]["replicates"] == 150


def test_no_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "out"
    result = subprocess.run(
        [sys.executable, "-m", "alivepf.cli", "identities",
         "--replicates", "50", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert (out / "identities.csv").exists()
    helptext = subprocess.run(
        [sys.executable, "-m", "alivepf.cli", "--help"],
        capture_output=True, text=True,
    )
    assert helptext.returncode == 0
    assert "filter" in helptext.stdout and "experiment" in helptext.stdout
