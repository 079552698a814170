import json

import numpy as np
import pytest

from shapeuq import cli
from shapeuq.config import RunConfig, load_config

TINY = {"k": 2.0, "p": 1, "mesh": {"n_theta": 8, "levels": 0, "band_layers": 1,
                                  "thin_ratio": 8.0},
        "pml": {"sigma0": 0.5}, "n_directions": 16}

SOLVE = {"k": 2.0, "p": 2, "mesh": {"levels": 0}, "pml": {"sigma0": 0.5}, "n_directions": 16}


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def run(tmp_path, command, data=None, *extra):
    argv = [command, "--out", str(tmp_path / "out")]
    if data is not None:
        argv += ["--config", str(write(tmp_path, data))]
    return cli.main(argv + list(extra))


def test_defaults_validate():
    cfg = load_config()
    assert cfg.k == 5.0 and cfg.uq.budgets == [1, 5, 13, 29]
    assert cfg.digest() == RunConfig().digest()


@pytest.mark.parametrize("bad", [
    {"k": 5.0, "unknown": 1},
    {"k": -1.0},
    {"mesh": {"n_theta": 15}},
    {"pml": {"R1": 1.5}},
    {"lam": 0.05},
    {"convergence": {"p_values": [1, 2], "first_levels": [0]}},
])
def test_invalid_configs_exit_2(tmp_path, bad, capsys):
    assert run(tmp_path, "mie", bad) == cli.EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config"
    assert (tmp_path / "out" / "error.json").exists()


def test_unreadable_config_exit_2(tmp_path):
    (tmp_path / "broken.json").write_text("{not json")
    assert cli.main(["mie", "--config", str(tmp_path / "broken.json"),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert cli.main(["mie", "--config", str(tmp_path / "missing.json"),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert cli.main(["mie", "--jobs", "0", "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_mie_command_outputs(tmp_path):
    assert run(tmp_path, "mie", {"k": 3.0, "n_directions": 8}) == 0
    out = tmp_path / "out"
    lines = (out / "mie_farfield.csv").read_text().splitlines()
    assert lines[0].startswith("# command=mie")
    assert any(line.startswith("# config_hash=") for line in lines)
    table = np.loadtxt(out / "mie_farfield.csv", delimiter=",", comments="#", skiprows=6)
    assert table.shape == (8, 4)
    assert json.loads((out / "mie_norms.json").read_text())["h1"] > 0


def test_solve_check_passes_and_is_deterministic(tmp_path):
    assert run(tmp_path, "solve", SOLVE, "--check") == 0
    first = (tmp_path / "out" / "farfield.csv").read_text()
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["series_relative_linf"] < 0.05
    assert report["residual_ok"]
    assert run(tmp_path, "solve", SOLVE) == 0
    assert (tmp_path / "out" / "farfield.csv").read_text() == first


def test_solve_check_failure_exit_4(tmp_path):
    assert run(tmp_path, "solve", dict(SOLVE, check_tolerance=1e-9), "--check") == cli.EXIT_CHECK
    assert json.loads((tmp_path / "out" / "error.json").read_text())["error"] == "check"


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise cli.SingularSystemError("factorization failed")

    monkeypatch.setattr(cli, "mie_solve", broken)
    assert run(tmp_path, "mie") == cli.EXIT_NUMERICAL


def test_scan_single_row(tmp_path):
    cfg = {"scan": {"k_min": 3.0, "k_max": 3.0, "n_i_values": [3.0]}}
    assert run(tmp_path, "scan-k", cfg) == 0
    table = np.loadtxt(tmp_path / "out" / "scan_k_ni_3.csv", delimiter=",", comments="#",
                       skiprows=6)
    assert table.shape == (4,)
    assert table[0] == 3.0


def test_small_uq_mean(tmp_path):
    cfg = dict(TINY, uq={"budgets": [1, 5], "reference_points": 3, "n_directions": 8})
    assert run(tmp_path, "uq-mean", cfg) == 0
    out = tmp_path / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["n_points"] == [1, 5]
    assert len(manifest["nodes"]) == 5
    rows = np.loadtxt(out / "uq_convergence.csv", delimiter=",", comments="#", skiprows=6)
    assert rows[1, 2] < rows[0, 2]


def test_uq_mean_rejects_large_index(tmp_path):
    assert run(tmp_path, "uq-mean", dict(TINY, n_i=3.0)) == cli.EXIT_CONFIG


def test_solve_with_shape_file(tmp_path):
    from shapeuq.shape import save_shape

    save_shape(tmp_path / "shape.json", [0.05, 0.02])
    cfg = dict(SOLVE, shape=str(tmp_path / "shape.json"))
    assert run(tmp_path, "solve", cfg) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert "series_relative_linf" not in report
    save_shape(tmp_path / "shape.json", [0.05], lam=0.3)
    assert run(tmp_path, "solve", cfg) == cli.EXIT_CONFIG
