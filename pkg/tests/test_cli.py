import json

import pytest

from sopshift import tracesim as ts
from sopshift.evalharness.cli import build_parser, main


@pytest.fixture(scope="module")
def staged(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--samples", str(ts.samples_for_rows(60)), "--seed", "2", "--out", str(root / "traces")]) == 0
    assert main(["featurize", "--in", str(root / "traces"), "--out", str(root / "feat")]) == 0
    assert main(["prep", "--in", str(root / "feat"), "--seed", "2", "--out", str(root / "data")]) == 0
    return root


def test_stage_outputs(staged):
    assert len(list((staged / "traces").glob("*.trace"))) == 6
    assert len(list((staged / "feat").glob("*.features"))) == 6
    for name in ("dataset.sopc", "split_manifest.json", "norm_stats.json"):
        assert (staged / "data" / name).exists()
    stats = json.loads((staged / "data" / "norm_stats.json").read_text())
    assert set(stats) == {"sys1", "sys2", "combined"}


def test_train_eval_report(staged, capsys):
    models = staged / "models"
    assert main(["train", "--preset", "dnn-sys1", "--data", str(staged / "data"), "--max-epochs", "2",
                 "--out", str(models)]) == 0
    meta = json.loads(capsys.readouterr().out)
    assert meta["stopped_epoch"] <= 1 and len(meta["digest"]) == 64
    assert main(["eval", "--data", str(staged / "data"), "--models", str(models), "--out", str(staged / "rep")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [ln.split()[:2] for ln in lines] == [["DNN", "S1"], ["DNN", "S3"]]
    assert main(["report", "--metrics", str(staged / "rep" / "metrics.json"), "--out", str(staged / "rep2")]) == 0
    assert (staged / "rep2" / "confusion_S1.svg").read_bytes() == (staged / "rep" / "confusion_S1.svg").read_bytes()


def test_train_vae_cmb_writes_heads(staged, capsys):
    models = staged / "cmb"
    assert main(["train", "--preset", "vae-cmb", "--data", str(staged / "data"), "--max-epochs", "1",
                 "--out", str(models)]) == 0
    meta = json.loads(capsys.readouterr().out)
    assert {f"vae_cmb_head_S{i}" for i in range(1, 5)} <= set(meta["phase2"])
    assert len(list(models.glob("vae_cmb_head_*.ckpt"))) == 4


def test_hpo_smoke(staged, capsys):
    out = staged / "studies"
    assert main(["hpo", "--model", "dnn", "--system", "1", "--trials", "2", "--max-epochs", "1",
                 "--data", str(staged / "data"), "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_trials"] == 2
    assert (out / "dnn_sys1.trials.jsonl").read_text().count("\n") == 2
    with pytest.raises(SystemExit):
        main(["hpo", "--model", "vae-cmb", "--system", "1", "--data", str(staged / "data"), "--out", str(out)])


def test_unknown_preset_and_missing_inputs(tmp_path, staged):
    with pytest.raises(SystemExit):
        main(["train", "--preset", "nope", "--data", str(staged / "data"), "--out", str(tmp_path)])
    with pytest.raises(SystemExit):
        main(["featurize", "--in", str(tmp_path), "--out", str(tmp_path / "x")])
    with pytest.raises(SystemExit):
        build_parser().parse_args(["hpo", "--model", "xgb", "--system", "1", "--data", "d"])


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--instances", "2", "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert "vae_graph" in out and "FAIL" not in out
