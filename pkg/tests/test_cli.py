import json

import numpy as np
import pytest

from mgtraj import __version__
from mgtraj.cli import main
from mgtraj.experiment import ExperimentManifest, content_hash
from mgtraj.metrics import METRICS_SCHEMA


def tree_bytes(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-data", "--scene", "junction3", "--n", "200", "--seed", "7", "--out", str(root / "data")]) == 0
    cfg = {"n_generators": 2, "epochs": 1, "batch_size": 50, "q": 3, "seed": 2}
    (root / "cfg.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(root / "cfg.json"), "--data", str(root / "data"),
                 "--out", str(root / "run")]) == 0
    return root


def test_gen_data_deterministic(workspace, tmp_path):
    assert main(["gen-data", "--scene", "junction3", "--n", "200", "--seed", "7", "--out", str(tmp_path)]) == 0
    a, b = tree_bytes(workspace / "data"), tree_bytes(tmp_path)
    a.pop("experiment.json"), b.pop("experiment.json")
    assert a == b
    header = (tmp_path / "trajectories.csv").read_text().splitlines()[0]
    assert header == "scene_id,ped_id,t,x,y,split"


def test_gen_data_circle_and_counts(tmp_path):
    assert main(["gen-data", "--scene", "circle", "--n", "60", "--out", str(tmp_path / "c")]) == 0
    index = json.loads((tmp_path / "c" / "gt_index.json").read_text())
    assert sorted(set(index["start"])) == list(range(6)) and index["n_records"] == 60
    lines = (tmp_path / "c" / "trajectories.csv").read_text().splitlines()
    assert len(lines) == 1 + 60 * 20
    assert main(["gen-data", "--scene", "corridor", "--n", "100", "--out", str(tmp_path / "k")]) == 0
    assert json.loads((tmp_path / "k" / "gt_index.json").read_text())["n_records"] <= 100


def test_gen_data_rejects_bad_scene(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["gen-data", "--scene", "roundabout", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_train_outputs_and_manifest(workspace):
    run = workspace / "run"
    for name in ("manifest.json", "params.bin", "train_log.csv", "experiment.json"):
        assert (run / name).is_file()
    rows = (run / "train_log.csv").read_text().splitlines()
    assert rows[0] == "epoch,d_loss,g_adv,g_cl,g_bom,pm_loss" and len(rows) == 2
    assert all(np.isfinite(float(v)) for v in rows[1].split(","))
    exp = ExperimentManifest.read(run)
    assert exp.seed == 2 and exp.version == __version__
    assert exp.dataset_hash == content_hash(workspace / "data")


def test_train_rerun_identical_params(workspace, tmp_path):
    assert main(["train", "--config", str(workspace / "cfg.json"), "--data", str(workspace / "data"),
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "params.bin").read_bytes() == (workspace / "run" / "params.bin").read_bytes()
    assert (tmp_path / "train_log.csv").read_bytes() == (workspace / "run" / "train_log.csv").read_bytes()


def test_train_usage_errors(workspace, tmp_path, capsys):
    assert main(["train", "--config", str(workspace / "cfg.json"), "--data", str(tmp_path / "none")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"lambda_cl": -1}))
    assert main(["train", "--config", str(bad), "--data", str(workspace / "data")]) == 2
    assert "lambda_cl" in capsys.readouterr().err
    bad.write_text(json.dumps({"learning_rate": 0.1}))
    assert main(["train", "--config", str(bad), "--data", str(workspace / "data")]) == 2


def test_eval_outputs(workspace, tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    out = tmp_path / "e"
    assert main(["eval", "--ckpt", str(workspace / "run"), "--data", str(workspace / "data"),
                 "--out", str(out)]) == 0
    doc = json.loads((out / "metrics.json").read_text())
    jsonschema.validate(doc, METRICS_SCHEMA)
    assert doc["k"] == 20 and doc["r_max"] == 2.0
    assert (out / "predictions.csv").read_text().startswith("sample_id,generator_id,pi,t,x,y\n")
    for svg in ("fan.svg", "pi_hist.svg"):
        assert (out / svg).read_text().startswith("<svg")
    exp = ExperimentManifest.read(out)
    assert exp.command == "eval" and exp.checkpoint_path == str(workspace / "run")


def test_eval_deterministic(workspace, tmp_path):
    args = ["eval", "--ckpt", str(workspace / "run"), "--data", str(workspace / "data"), "--k", "5"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_eval_generator_mismatch(workspace, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_generators": 4}))
    assert main(["eval", "--ckpt", str(workspace / "run"), "--data", str(workspace / "data"),
                 "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert main(["eval", "--ckpt", str(tmp_path / "missing"), "--data", str(workspace / "data")]) == 2


def test_grad_check_quick(capsys):
    assert main(["grad-check", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "gradient checks passed" in out
