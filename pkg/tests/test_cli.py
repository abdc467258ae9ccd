import json
import subprocess
import sys
from pathlib import Path

import pytest

from feedback_dde.cli import main
from feedback_dde.io import load_config, read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, name, *args, config=None):
    out = tmp_path / name
    cfg = config if config is not None else CONFIGS / f"{name}.json"
    return main([args[0], "--config", str(cfg), "--out", str(out), *args[1:]]), out


def write_cfg(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


FORCED = json.loads((CONFIGS / "testosterone_forced.json").read_text())


def test_validate_preset_ok(tmp_path, capsys):
    code, out = run(tmp_path, "testosterone_forced", "validate")
    assert code == 0
    assert json.loads((out / "validation.json").read_text())["ok"] is True
    assert "H1" in capsys.readouterr().out


def test_validate_bounded_decay_fails(tmp_path, capsys):
    code, out = run(tmp_path, "bounded_decay_fail", "validate")
    assert code == 2
    assert "image-containment" in capsys.readouterr().out


def test_validate_empty_file(tmp_path, capsys):
    path = tmp_path / "empty.json"
    path.write_text("")
    code, _ = run(tmp_path, "x", "validate", config=path)
    assert code == 2
    assert "empty" in capsys.readouterr().err


def test_missing_config(tmp_path):
    code, _ = run(tmp_path, "x", "validate", config=tmp_path / "nope.json")
    assert code == 2


def test_bounds_writes_box(tmp_path):
    code, out = run(tmp_path, "worked_n2", "bounds")
    assert code == 0
    box = json.loads((out / "bounds.json").read_text())
    assert box["M"] == pytest.approx([2.1, 2.205, 2.31525], abs=1e-9)


def test_bounds_image_failure_is_config_exit(tmp_path):
    code, _ = run(tmp_path, "bounded_decay_fail", "bounds")
    assert code == 2


@pytest.mark.parametrize("name,degree", [("worked_n2", -1), ("n1", 1)])
def test_certify_degree(tmp_path, name, degree):
    code, out = run(tmp_path, name, "certify")
    assert code == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["degree"] == degree and cert["valid"] is True


def test_certify_sabotaged_box(tmp_path, capsys):
    code, out = run(tmp_path, "sabotaged_box", "certify")
    assert code == 3
    assert json.loads((out / "certificate.json").read_text())["valid"] is False
    assert "violation" in capsys.readouterr().out


def test_degenerate_manual_box_exits_3(tmp_path):
    doc = json.loads((CONFIGS / "sabotaged_box.json").read_text())
    doc["box"]["m"][1] = 5.0
    code, _ = run(tmp_path, "x", "certify", config=write_cfg(tmp_path, doc))
    assert code == 3


def test_bounded_decay_certify_exits_2(tmp_path):
    code, _ = run(tmp_path, "bounded_decay_fail", "certify")
    assert code == 2


def test_simulate_row_count(tmp_path):
    doc = dict(FORCED, horizon=2.0, step=1 / 64)
    code, out = run(tmp_path, "x", "simulate", config=write_cfg(tmp_path, doc))
    assert code == 0
    t, x = read_csv(out / "trajectory.csv")
    assert len(t) == 2 * 64 + 16 + 1
    assert x.shape[1] == 3 and t[0] == -0.25 and t[-1] == 2.0
    assert x.min() > 0


def test_simulate_zero_horizon(tmp_path):
    doc = dict(FORCED, horizon=0.0, step=1 / 64)
    code, out = run(tmp_path, "x", "simulate", config=write_cfg(tmp_path, doc))
    assert code == 0
    t, x = read_csv(out / "trajectory.csv")
    assert len(t) == 17 and t[-1] == 0.0


def test_simulate_step_above_delay(tmp_path, capsys):
    code, _ = run(tmp_path, "testosterone_forced", "simulate", "--step", "0.5")
    assert code == 2
    assert "delay" in capsys.readouterr().err


def test_simulate_blow_up_exits_4(tmp_path):
    # a huge manual history under a power-law decay overflows immediately
    doc = {"model": {"n": 1, "T": 1.0, "tau": [0.0], "eps": [0.0],
                     "F": {"family": "constant"}, "H": {"family": "linear_gain"},
                     "b": [{"family": "power", "q": 3.0}, {"family": "linear"}]},
           "history": [1e200, 1.0], "horizon": 1.0, "step": 0.25}
    code, _ = run(tmp_path, "x", "simulate", config=write_cfg(tmp_path, doc))
    assert code == 4


def test_find_periodic_forced(tmp_path):
    code, out = run(tmp_path, "testosterone_forced", "find-periodic")
    assert code == 0
    meta = json.loads((out / "orbit.json").read_text())
    assert meta["converged"] and meta["residual"] <= 1e-8
    assert meta["containment"]["ok"] and meta["degree"] == -1
    t, x = read_csv(out / "orbit.csv")
    assert t[0] == 0.0 and t[-1] == pytest.approx(1.0) and x.min() > 0


def test_find_periodic_autonomous(tmp_path):
    code, out = run(tmp_path, "testosterone_autonomous", "find-periodic")
    assert code == 0
    meta = json.loads((out / "orbit.json").read_text())
    assert max(meta["amplitude"]) <= 1e-7


def test_find_periodic_max_periods_one(tmp_path, capsys):
    code, out = run(tmp_path, "testosterone_forced", "find-periodic", "--max-periods", "1")
    assert code == 4
    assert "existence does not imply attractivity" in capsys.readouterr().err
    meta = json.loads((out / "orbit.json").read_text())
    assert meta["converged"] is False and len(meta["residual_history"]) == 1


def test_find_periodic_sabotaged_exits_3(tmp_path):
    code, _ = run(tmp_path, "sabotaged_box", "find-periodic")
    assert code == 3


def test_flags_override_and_echo(tmp_path):
    code, out = run(tmp_path, "worked_n2", "bounds", "--lambda", "0.5", "--tol", "1e-6", "--seed", "7")
    assert code == 0
    eff = json.loads((out / "effective_config.json").read_text())
    assert eff["lambda"] == 0.5 and eff["tol"] == 1e-6 and eff["seed"] == 7
    assert eff["out"] == str(out)


def test_bad_lambda_flag(tmp_path):
    code, _ = run(tmp_path, "worked_n2", "bounds", "--lambda", "1.5")
    assert code == 2


@pytest.mark.parametrize("name", ["testosterone_forced", "worked_n2"])
def test_effective_config_reloads(tmp_path, name):
    code, out = run(tmp_path, name, "bounds")
    assert code == 0
    cfg = load_config(out / "effective_config.json")
    assert cfg.to_dict() == json.loads((out / "effective_config.json").read_text())
    code2, out2 = run(tmp_path, name + "_again", "bounds", config=out / "effective_config.json")
    assert code2 == 0
    assert (out / "bounds.json").read_text() == (out2 / "bounds.json").read_text()


def test_outputs_deterministic(tmp_path):
    files = ["certificate.json", "validation.json", "orbit.csv", "orbit.json"]
    a = run(tmp_path, "worked_n2", "find-periodic")[1]
    b = main(["find-periodic", "--config", str(CONFIGS / "worked_n2.json"), "--out", str(tmp_path / "b")])
    assert b == 0
    for f in files:
        assert (a / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "feedback_dde", "certify", "--config", str(CONFIGS / "n1.json"),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "degree = 1" in proc.stdout
