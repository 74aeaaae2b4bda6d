import json

import pytest

from morse_maslov.cli import main
from morse_maslov.exceptions import ConfigError
from morse_maslov.experiments import (
    ExperimentConfig,
    emit_report,
    report_json,
    resolve_out_dir,
    run_experiment,
)

DIRICHLET = {
    "domain": {"d": 2, "n": 9},
    "potential": {"type": "constant", "matrix": [[-25.0]]},
    "bc": {"type": "dirichlet"},
    "path": {"tau": 0.15},
    "solver": {"n_samples": 100},
}
ROBIN = {
    "domain": {"d": 2, "n": 9},
    "potential": {"type": "polynomial", "terms": [
        {"powers": [0, 0], "matrix": [[-8.0]]}, {"powers": [2, 0], "matrix": [[3.0]]}]},
    "bc": {"type": "robin", "theta": 0.3},
    "path": {"tau": 0.1},
    "solver": {"n_samples": 100},
}


def _write(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_list(capsys):
    assert main(["list"]) == 0
    assert "loop-zero" in capsys.readouterr().out


def test_run_dirichlet(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--config", _write(tmp_path, DIRICHLET), "--experiment",
               "verify-dirichlet", "--out", str(out), "--threads", "1"])
    assert rc == 0
    rep = json.loads((out / "verify-dirichlet.report.json").read_text())
    assert rep["pass"] and rep["experiment"] == "verify-dirichlet"
    assert (out / "verify-dirichlet.crossings.csv").exists()


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MORSE_MASLOV_OUT", str(tmp_path / "env"))
    cfg = ExperimentConfig.from_dict(DIRICHLET)
    assert resolve_out_dir(None, cfg) == str(tmp_path / "env")
    assert resolve_out_dir("x", cfg) == "x"


def test_wrong_experiment_for_bc_is_config_error(tmp_path, capsys):
    rc = main(["run", "--config", _write(tmp_path, ROBIN), "--experiment",
               "verify-dirichlet", "--out", str(tmp_path)])
    assert rc == 2
    assert "verify-dirichlet needs" in capsys.readouterr().err


@pytest.mark.parametrize("mutate", [
    lambda c: c["domain"].update(n=4),
    lambda c: c.update(bogus=1),
    lambda c: c["path"].update(tau=0.0),
    lambda c: c.update(potential={"type": "builtin", "name": "nope"}),
    lambda c: c.update(potential={"type": "polynomial",
                                  "terms": [{"powers": [1], "matrix": [[1.0]]}]}),
])
def test_invalid_configs(mutate):
    cfg = json.loads(json.dumps(DIRICHLET))
    mutate(cfg)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(cfg).grid()


def test_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main(["run", "--config", str(p), "--experiment", "loop-zero"]) == 2


def test_report_is_deterministic(tmp_path):
    a = run_experiment(ROBIN, "verify-robin-scalar")
    b = run_experiment(ROBIN, "verify-robin-scalar")
    assert a.passed
    strip = lambda r: {k: v for k, v in json.loads(report_json(r)).items() if k != "timing"}
    assert strip(a) == strip(b)
    paths = emit_report(a, str(tmp_path))
    assert all(p.startswith(str(tmp_path)) for p in paths)


def test_dtn_diagnostics_seeded():
    cfg = dict(ROBIN, seed=5, solver={"dtn_samples": 4})
    rep = run_experiment(cfg, "dtn-diagnostics")
    assert rep.passed
    again = run_experiment(cfg, "dtn-diagnostics")
    assert [r["lhs"] for r in rep.identities] == [r["lhs"] for r in again.identities]


def test_asymptotics_experiment():
    cfg = dict(ROBIN, potential={"type": "builtin", "name": "coupled_well"},
               bc={"type": "matrix_theta", "table": [[0.3, 0.0], [0.0, 0.0]]})
    rep = run_experiment(cfg, "asymptotics")
    assert rep.passed
