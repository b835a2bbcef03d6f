import json

import numpy as np
import pytest

from poisson_hj import __version__
from poisson_hj.cli import COMPARE_HEADER, SIMULATE_HEADER, main
from poisson_hj.network import init_xavier, load_weights, save_weights

TINY_CONFIG = {"n_points": 40, "batch_size": 40, "n_iterations": 7, "layer_sizes": [4, 8, 8, 1], "seed": 2}


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], [row.split(",") for row in lines[1:]]


@pytest.fixture
def model(tmp_path):
    path = tmp_path / "model.json"
    save_weights(init_xavier((4, 16, 16, 1), 0), path)
    return path


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return path


def test_train_writes_model_loss_and_manifest(tmp_path, tiny_config):
    out = tmp_path / "run" / "m.json"
    out.parent.mkdir()
    assert main(["train", "--config", str(tiny_config), "--out", str(out)]) == 0
    header, rows = read_csv(out.with_suffix(".loss.csv"))
    assert header == "iteration,loss,dropped_points"
    assert len(rows) == TINY_CONFIG["n_iterations"]
    assert load_weights(out).layer_sizes == (4, 8, 8, 1)
    manifest = json.loads((tmp_path / "run" / "m.json.manifest.json").read_text())
    assert manifest["command"] == "train" and manifest["seed"] == 2
    assert manifest["tool_version"] == __version__
    assert manifest["config_digest"] == load_weights(out).training_config_digest
    assert {"started", "finished", "output_paths"} <= set(manifest)


def test_train_rerun_is_byte_identical(tmp_path, tiny_config):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["train", "--config", str(tiny_config), "--out", str(a), "--loss-csv", str(tmp_path / "a.csv")])
    main(["train", "--config", str(tiny_config), "--out", str(b), "--loss-csv", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.read_bytes() == b.read_bytes()


def test_train_rejects_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**TINY_CONFIG, "warmup": 10}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "m.json")]) == 2
    assert "warmup" in capsys.readouterr().err
    assert not (tmp_path / "m.json").exists()


def test_full_paper_scale_flag(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"n_iterations": 0}')
    out = tmp_path / "m.json"
    assert main(["train", "--full-paper-scale", "--config", str(cfg), "--out", str(out)]) == 0
    assert load_weights(out).layer_sizes == (4, 500, 250, 250, 250, 1)
    manifest = json.loads((tmp_path / "m.json.manifest.json").read_text())
    assert manifest["config"]["n_points"] == 80_000 and manifest["config"]["learning_rate"] == 1e-4


def test_simulate_zero_steps(tmp_path, model):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--model", str(model), "--ic", "1,1,2", "--steps", "0", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == SIMULATE_HEADER
    assert len(rows) == 1
    assert float(rows[0][5]) == pytest.approx(1.3833333333333333, abs=1e-15)
    assert float(rows[0][6]) == 3.0


def test_simulate_rows_conserve_casimir(tmp_path, model):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--model", str(model), "--ic", "3,2,0", "--h", "0.1", "--steps", "40", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert len(rows) == 41
    C = np.array([float(r[6]) for r in rows])
    assert np.abs(C - C[0]).max() <= 1e-7
    assert [int(r[0]) for r in rows] == list(range(41))
    assert all(float(r[8]) <= 1e-12 for r in rows)
    mu = np.array([[float(v) for v in r[2:5]] for r in rows])
    assert np.allclose(0.5 * np.sum(mu**2, axis=1), C, rtol=1e-15)
    manifest = json.loads((tmp_path / "sim.csv.manifest.json").read_text())
    assert manifest["model_digest"].startswith("sha256:")


def test_simulate_output_is_deterministic(tmp_path, model):
    args = ["simulate", "--model", str(model), "--ic", "1,1,2", "--steps", "10", "--out"]
    main(args + [str(tmp_path / "a.csv")])
    main(args + [str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_simulate_newton_failure_flushes_partial_csv(tmp_path, model, capsys):
    out = tmp_path / "sim.csv"
    code = main(["simulate", "--model", str(model), "--ic", "1,1,2", "--steps", "5", "--out", str(out), "--newton-tol", "1e-300", "--newton-max-iter", "2"])
    assert code == 1
    assert "step 1" in capsys.readouterr().err
    _, rows = read_csv(out)
    assert len(rows) == 1


def test_simulate_rejects_bad_model(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 1, "layer')
    assert main(["simulate", "--model", str(bad), "--ic", "1,1,2", "--out", str(tmp_path / "s.csv")]) == 2


@pytest.mark.parametrize("ic", ["1,1", "1,x,2", "1,2,nan"])
def test_bad_initial_condition(tmp_path, model, ic):
    with pytest.raises(SystemExit):
        main(["simulate", "--model", str(model), "--ic", ic, "--out", str(tmp_path / "s.csv")])


def test_compare_oracle_mode_is_zero(tmp_path):
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--oracle-mode", "--ic", "1,1,2", "--steps", "20", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == COMPARE_HEADER and len(rows) == 21
    assert all(float(r[2]) == 0.0 for r in rows)


def test_compare_model(tmp_path, model):
    out = tmp_path / "cmp.csv"
    assert main(["compare", "--model", str(model), "--ic", "1,1,2", "--steps", "30", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    C = np.array([float(r[5]) for r in rows])
    assert np.abs(C - 3.0).max() <= 1e-7
    assert float(rows[0][2]) == 0.0 and float(rows[-1][2]) > 0


def test_compare_requires_model(tmp_path):
    assert main(["compare", "--ic", "1,1,2", "--out", str(tmp_path / "c.csv")]) == 2


def test_check_without_model(tmp_path):
    out = tmp_path / "report.json"
    assert main(["check", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    names = [p["name"] for p in report["properties"]]
    assert report["all_passed"] is True
    assert len(names) == len(set(names)) >= 10
    assert all({"measured", "threshold", "passed"} <= set(p) for p in report["properties"])


def test_check_with_model(tmp_path, model):
    out = tmp_path / "report.json"
    assert main(["check", "--model", str(model), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["model"] == str(model)


def test_check_corrupted_model(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 1, "layer_sizes": [4, 2, 1], "weights": [[[1]]], "biases": [[0, 0], [0]]}')
    out = tmp_path / "report.json"
    assert main(["check", "--model", str(bad), "--out", str(out)]) == 2
    report = json.loads(out.read_text())
    assert report["all_passed"] is False
    assert report["error"]["type"] == "DimensionError"
