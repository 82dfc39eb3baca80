import json
import subprocess
import sys

import numpy as np
import pytest

from wickfield.dataset import read_dataset
from wickfield.phi43 import compute_C0, compute_C11
from wickfield.grid import GridSpec


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "wickfield.cli", *args],
        capture_output=True,
        text=True,
    )


def kv(stdout):
    out = {}
    for line in stdout.splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            out[key] = value
    return out


@pytest.fixture
def phi42_config(tmp_path):
    config = {
        "equation": "phi42",
        "master_seed": 12,
        "n_trajectories": 2,
        "config": {
            "grid": {"dim": 2, "n_per_axis": 16, "domain_length": 6.283185307179586},
            "cutoff": 4, "sigma": 1.0, "T": 0.1, "dt": 1e-3, "n_save": 2,
            "chaos": {"I": 1, "J": 4, "K": 2}, "u0": {"kind": "zero"},
        },
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config))
    return path


def test_zero_trajectories_ok(phi42_config, tmp_path):
    out = run_cli(
        "simulate-phi42", str(phi42_config), "--n-trajectories", "0",
        "--out", str(tmp_path / "empty"), "--threads", "1",
    )
    assert out.returncode == 0, out.stderr
    records, _ = read_dataset(tmp_path / "empty")
    assert records == []


def test_fixed_seed_runs_byte_identical(phi42_config, tmp_path):
    for name, threads in (("a", "1"), ("b", "2")):
        out = run_cli(
            "simulate-phi42", str(phi42_config), "--out", str(tmp_path / name),
            "--threads", threads,
        )
        assert out.returncode == 0, out.stderr
    names = [p.name for p in sorted((tmp_path / "a").iterdir())]
    assert names == [p.name for p in sorted((tmp_path / "b").iterdir())]
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_is_a_valid_config(phi42_config, tmp_path):
    out = run_cli("simulate-phi42", str(phi42_config), "--out", str(tmp_path / "a"))
    assert out.returncode == 0, out.stderr
    manifest = tmp_path / "a" / "manifest.json"
    out2 = run_cli("simulate-phi42", str(manifest), "--out", str(tmp_path / "b"))
    assert out2.returncode == 0, out2.stderr
    for entry in json.loads(manifest.read_text())["files"]:
        assert (tmp_path / "a" / entry["name"]).read_bytes() == (
            tmp_path / "b" / entry["name"]
        ).read_bytes()


def test_bad_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = run_cli("simulate-phi42", str(bad), "--out", str(tmp_path / "x"))
    assert out.returncode == 2
    assert "error:" in out.stderr

    no_seed = tmp_path / "noseed.json"
    no_seed.write_text(json.dumps({"config": {}}))
    out = run_cli("simulate-phi42", str(no_seed), "--out", str(tmp_path / "y"))
    assert out.returncode == 2


def test_missing_config_file_exits_4(tmp_path):
    out = run_cli("simulate-phi42", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x"))
    assert out.returncode == 4


def test_phi43_header_matches_library_values(tmp_path):
    config = {
        "equation": "phi43",
        "master_seed": 3,
        "n_trajectories": 1,
        "config": {
            "grid": {"dim": 3, "n_per_axis": 8, "domain_length": 6.283185307179586},
            "T": 0.02, "dt": 1e-3, "n_save": 2,
            "chaos": {"I": 1, "J": 4, "K": 2},
            "u0": {"kind": "white-noise"},
        },
    }
    path = tmp_path / "cfg43.json"
    path.write_text(json.dumps(config))
    out = run_cli("simulate-phi43", str(path), "--out", str(tmp_path / "ds"), "--threads", "1")
    assert out.returncode == 0, out.stderr
    values = kv(out.stdout)
    grid = GridSpec(3, 8, 6.283185307179586)
    assert float(values["C0"]) == compute_C0(grid)
    assert float(values["C11"]) == compute_C11(grid, 257)


def test_export_csv_round_trip(phi42_config, tmp_path):
    run_cli("simulate-phi42", str(phi42_config), "--out", str(tmp_path / "ds"))
    out = run_cli(
        "export-snapshots", str(tmp_path / "ds"), "--trajectory", "1",
        "--times", "0.05,0.1", "--format", "csv", "--out", str(tmp_path / "snaps"),
    )
    assert out.returncode == 0, out.stderr
    records, _ = read_dataset(tmp_path / "ds")
    stored = records[1].snapshots["u"][2]  # t = 0.1 is the last of 3 saves
    loaded = np.loadtxt(tmp_path / "snaps" / "traj00001_t0.1.csv", delimiter=",")
    # %.9g round-trips float32 exactly
    assert np.array_equal(loaded.astype(np.float32), stored)


def test_export_pgm_uniform_for_constant_field(tmp_path, phi42_config):
    run_cli("simulate-phi42", str(phi42_config), "--out", str(tmp_path / "ds"))
    out = run_cli(
        "export-snapshots", str(tmp_path / "ds"), "--trajectory", "0",
        "--times", "0", "--format", "pgm", "--out", str(tmp_path / "snaps"),
    )
    assert out.returncode == 0, out.stderr
    blob = (tmp_path / "snaps" / "traj00000_t0.pgm").read_bytes()
    assert blob.startswith(b"P5\n16 16\n255\n")
    pixels = np.frombuffer(blob.split(b"\n", 3)[3], dtype=np.uint8)
    # u0 = zero field: constant plane maps to a uniform image
    assert len(set(pixels.tolist())) == 1
    sidecar = json.loads((tmp_path / "snaps" / "traj00000_t0.json").read_text())
    assert sidecar["min"] == sidecar["max"] == 0.0


def test_export_missing_time_rejected(phi42_config, tmp_path):
    run_cli("simulate-phi42", str(phi42_config), "--out", str(tmp_path / "ds"))
    out = run_cli(
        "export-snapshots", str(tmp_path / "ds"), "--times", "0.033",
        "--out", str(tmp_path / "snaps"),
    )
    assert out.returncode == 2


def test_verify_io_suite_passes():
    out = run_cli("verify", "--suite", "io")
    assert out.returncode == 0, out.stdout + out.stderr
    assert "PASS" in out.stdout
