import csv
import json

import numpy as np
import pytest

from kgzlab.cli import main
from kgzlab.config import load_preset
from kgzlab.runner import EXIT_BLOWUP, EXIT_CONFIG, EXIT_OK, EXIT_VERDICT, run

SMALL = """
system.kind = kgz
grid.kind = periodic-box-3d
grid.extent = 12
grid.points = 32
integrator.dt = 0.1
integrator.t_end = 1
data.eps = 0.05
data.k0 = 0.1
data.sigma_kg = 1.5
data.sigma_wave = 1.5
diagnostics.list = energy
output.energy_every = 2
output.checkpoints = 1
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_run_writes_artifacts(small_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(small_cfg), "--out", str(out)]) == EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert {"config.txt", "energy.csv", "diagnostics.json", "manifest.json", "checkpoints"} <= names
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_code"] == 0 and manifest["schema"] == "kgzlab.manifest/1"
    rows = list(csv.DictReader((out / "energy.csv").open()))
    assert len(rows) == 6 and float(rows[0]["t"]) == 0.0
    assert "artifacts in" in capsys.readouterr().out


def test_seed_override_changes_hash(small_cfg, tmp_path):
    main(["run", "--config", str(small_cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["run", "--config", str(small_cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
    ha = json.loads((tmp_path / "a" / "manifest.json").read_text())["config_hash"]
    hb = json.loads((tmp_path / "b" / "manifest.json").read_text())["config_hash"]
    assert ha != hb


def test_bad_config_exit_code(small_cfg, tmp_path, capsys):
    code = main(["run", "--config", str(small_cfg), "--set", "integrator.dt=-1", "--out", str(tmp_path / "x")])
    assert code == EXIT_CONFIG
    assert "integrator.dt" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_blow_up_exit_code(small_cfg, tmp_path):
    code = main(["run", "--config", str(small_cfg), "--set", "data.eps=1e200", "--out", str(tmp_path / "b")])
    assert code == EXIT_BLOWUP
    m = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert m["blowup_time"] == pytest.approx(0.1)


def test_failed_verdict_exit_code(tmp_path):
    # roundoff drift over t in [0, 10] cannot meet this tolerance
    cfg = load_preset("linear-conservation", **{"diagnostics.energy.tol": "1e-300"})
    assert run(cfg, tmp_path / "v").manifest.exit_code == EXIT_VERDICT


def test_zero_data_run_is_exactly_zero(tmp_path):
    cfg = load_preset("linear-conservation", **{"data.eps": "0", "data.k0": "0", "integrator.t_end": "1"})
    res = run(cfg, tmp_path / "z")
    assert res.manifest.exit_code == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "z" / "energy.csv").open()))
    assert all(float(r["natural"]) == 0.0 for r in rows)


def test_same_config_gives_identical_csv(small_cfg, tmp_path):
    for d in ("a", "b"):
        main(["run", "--config", str(small_cfg), "--out", str(tmp_path / d)])
    assert (tmp_path / "a" / "energy.csv").read_bytes() == (tmp_path / "b" / "energy.csv").read_bytes()


def test_restart_from_checkpoint(small_cfg, tmp_path):
    full = run(load_preset("kgz-small", **{"integrator.t_end": "1", "output.checkpoints": "0.5",
                                           "diagnostics.list": "energy"}), tmp_path / "full")
    ck = tmp_path / "full" / "checkpoints" / next(p.name for p in (tmp_path / "full" / "checkpoints").iterdir())
    rest = run(load_preset("kgz-small", **{"integrator.t_end": "0.5", "data.family": "from-file",
                                           "data.path": str(ck), "diagnostics.list": "energy"}), tmp_path / "rest")
    a, b = full.final_state.E.values, rest.final_state.E.values
    assert np.linalg.norm(a - b) < 1e-6 * np.linalg.norm(a)


def test_fit_subcommand(tmp_path, capsys):
    p = tmp_path / "s.csv"
    t = np.arange(1.0, 11.0)
    p.write_text("t,u\n" + "".join(f"{a},{b}\n" for a, b in zip(t, 3 * t**-1.5)))
    assert main(["fit", "--csv", str(p), "--window", "2,10"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["exponent"] == pytest.approx(-1.5)
    assert main(["fit", "--csv", str(p), "--max-ratio", "2"]) == EXIT_VERDICT


def test_identities_algebra(tmp_path, capsys):
    assert main(["identities", "--suite", "algebra", "--json", str(tmp_path / "a.json")]) == EXIT_OK
    assert json.loads((tmp_path / "a.json").read_text())[0]["passed"]


def test_check_data(capsys):
    assert main(["check-data", "--preset", "hypotheses"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["positivity"]["certified"] and doc["hypotheses"]["passed"]


def test_threads_flag(small_cfg, tmp_path, monkeypatch):
    from kgzlab import spectral
    monkeypatch.setenv("KGZLAB_THREADS", "3")
    main(["run", "--config", str(small_cfg), "--threads", "1", "--out", str(tmp_path / "t")])
    assert spectral.threads_from_env() == 3
