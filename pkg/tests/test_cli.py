import hashlib
import json

import numpy as np
import pytest

from cneegnet.cli import main
from cneegnet.data import read_epochs
from cneegnet.reporting import load_report, report_digest, save_report
from cneegnet.training import TrainReport

FAST_TRAIN_CONFIG = {
    "model": {"arch": "cn-eegnet", "f1": 4, "f2": 4, "d": 2,
              "kernel_length": 16, "dropout_rate": 0.1, "norm_rate": 0.25},
    "train": {"max_epochs": 3, "batch_size": 32, "early_stop": False},
    "optimizer": {"kind": "adam", "lr": 0.005},
}


def synth_args(out, **over):
    base = {"epochs": "120", "channels": "8", "samples": "64", "seed": "3",
            "oddball-rate": "0.5"}
    base.update(over)
    argv = ["synth", "--out", str(out)]
    for k, v in base.items():
        argv += [f"--{k}", v]
    return argv


@pytest.fixture()
def synth_config(tmp_path):
    p = tmp_path / "synth.json"
    p.write_text(json.dumps({"p300_latency_s": 0.25, "p300_width_s": 0.05,
                             "background_noise_uv": 0.5}))
    return str(p)


@pytest.fixture()
def data_file(tmp_path, synth_config):
    out = tmp_path / "epochs.eep"
    rc = main(synth_args(out) + ["--config", synth_config])
    assert rc == 0
    return out


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------- synth

def test_synth_writes_file_and_manifest(tmp_path, synth_config, capsys):
    out = tmp_path / "epochs.eep"
    rc = main(synth_args(out) + ["--config", synth_config])
    assert rc == 0
    text = capsys.readouterr().out
    assert "120 epochs" in text and "(60 targets, 60 non-targets)" in text
    ds = read_epochs(out)
    assert (ds.n_epochs, ds.n_channels, ds.n_samples) == (120, 8, 64)
    manifest = json.loads((tmp_path / "epochs.eep.manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["config"]["n_epochs"] == 120
    assert manifest["config"]["background_noise_uv"] == 0.5  # from config file
    assert manifest["outputs"][str(out)] == sha(out)


def test_synth_deterministic(tmp_path, synth_config):
    a, b = tmp_path / "a.eep", tmp_path / "b.eep"
    assert main(synth_args(a) + ["--config", synth_config]) == 0
    assert main(synth_args(b) + ["--config", synth_config]) == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.eep"
    assert main(synth_args(c, seed="4") + ["--config", synth_config]) == 0
    assert a.read_bytes() != c.read_bytes()


def test_synth_bad_rate_exits_2_naming_flag(tmp_path, capsys):
    rc = main(["synth", "--out", str(tmp_path / "x.eep"),
               "--oddball-rate", "1.5"])
    assert rc == 2
    assert "--oddball-rate" in capsys.readouterr().err


def test_synth_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_epochs": 30, "channels": 4, "samples": 128}))
    out = tmp_path / "x.eep"
    rc = main(["synth", "--out", str(out), "--config", str(cfg),
               "--channels", "6"])
    assert rc == 0
    ds = read_epochs(out)
    assert (ds.n_epochs, ds.n_channels) == (30, 6)


def test_synth_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"amplitude": 3}))
    rc = main(["synth", "--out", str(tmp_path / "x.eep"), "--config", str(cfg)])
    assert rc == 2
    assert "amplitude" in capsys.readouterr().err


# ---------------------------------------------------------------- train

def train_run(tmp_path, data_file, out_name, extra=()):
    cfg = tmp_path / "train.json"
    cfg.write_text(json.dumps(FAST_TRAIN_CONFIG))
    out = tmp_path / out_name
    rc = main(["train", "--data", str(data_file), "--config", str(cfg),
               "--out", str(out), "--seed", "1", *extra])
    return rc, out


def test_train_outputs(tmp_path, data_file, capsys):
    rc, out = train_run(tmp_path, data_file, "run1")
    assert rc == 0
    text = capsys.readouterr().out
    assert "trained cn-eegnet" in text and "test accuracy" in text
    for name in ("checkpoint.cnw1", "report.json", "history.csv",
                 "manifest.json"):
        assert (out / name).exists(), name
    report = load_report(out / "report.json")
    assert report.stopped_at_epoch == 3
    assert report.config["train"]["seed"] == 1          # flag won
    assert report.condition == "seated-unloaded"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["inputs"][str(data_file)] == sha(data_file)
    assert manifest["outputs"][str(out / "checkpoint.cnw1")] == sha(out / "checkpoint.cnw1")


def test_train_deterministic(tmp_path, data_file):
    _, out1 = train_run(tmp_path, data_file, "run1")
    _, out2 = train_run(tmp_path, data_file, "run2")
    assert sha(out1 / "checkpoint.cnw1") == sha(out2 / "checkpoint.cnw1")
    d1 = report_digest(load_report(out1 / "report.json"))
    d2 = report_digest(load_report(out2 / "report.json"))
    assert d1 == d2
    assert (out1 / "history.csv").read_bytes() == (out2 / "history.csv").read_bytes()


def test_train_preset_resolves_table3(tmp_path, data_file):
    out = tmp_path / "preset-run"
    rc = main(["train", "--data", str(data_file), "--preset", "table3-opt",
               "--epochs", "1", "--out", str(out)])
    assert rc == 0
    cfg = load_report(out / "report.json").config
    model = cfg["model"]
    assert (model["f1"], model["f2"], model["d"]) == (16, 16, 2)
    assert model["kernel_length"] == 64
    assert model["dropout_rate"] == 0.15 and model["norm_rate"] == 0.17
    assert cfg["optimizer"]["kind"] == "adam"
    assert cfg["train"]["max_epochs"] == 1              # flag overrode nothing else


def test_train_missing_data_flag_exits_2(capsys):
    assert main(["train"]) == 2


def test_train_nonexistent_data_exits_1(tmp_path, capsys):
    rc = main(["train", "--data", str(tmp_path / "nope.eep"),
               "--out", str(tmp_path / "o")])
    assert rc == 1


# ---------------------------------------------------------------- eval

def test_eval_roundtrip(tmp_path, data_file, capsys):
    _, out = train_run(tmp_path, data_file, "run1")
    capsys.readouterr()
    rc = main(["eval", "--model", str(out / "checkpoint.cnw1"),
               "--data", str(data_file)])
    assert rc == 0
    text = capsys.readouterr().out
    assert text.startswith("accuracy 0.")
    assert "confusion" in text


def test_eval_shape_mismatch_exits_1(tmp_path, data_file, synth_config, capsys):
    _, out = train_run(tmp_path, data_file, "run1")
    other = tmp_path / "wide.eep"
    assert main(synth_args(other, channels="12") + ["--config", synth_config]) == 0
    capsys.readouterr()
    rc = main(["eval", "--model", str(out / "checkpoint.cnw1"),
               "--data", str(other)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "12" in err and "expects" in err


# ---------------------------------------------------------------- sweep

def point_space_file(tmp_path):
    p = tmp_path / "space.json"
    p.write_text(json.dumps({"f1": [4], "f2": [4], "d": [2],
                             "dropout": [0.1, 0.1], "kernel_length": [16],
                             "norm_rate": [0.25, 0.25], "optimizer": ["adam"],
                             "batch_size": [32]}))
    return p


def sweep_run(tmp_path, data_file, out_name, workers):
    out = tmp_path / out_name
    rc = main(["sweep", "--data", str(data_file), "--budget", "2",
               "--space", str(point_space_file(tmp_path)), "--epochs", "2",
               "--seed", "7", "--workers", str(workers), "--out", str(out)])
    return rc, out


def test_sweep_outputs_and_worker_invariance(tmp_path, data_file, capsys):
    rc1, out1 = sweep_run(tmp_path, data_file, "s1", workers=1)
    rc2, out2 = sweep_run(tmp_path, data_file, "s2", workers=2)
    assert rc1 == 0 and rc2 == 0
    assert "2 trials ranked (0 failed)" in capsys.readouterr().out
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()
    blob = json.loads((out1 / "sweep.json").read_text())
    assert len(blob) == 2 and blob[0]["config"]["model"]["f1"] == 4
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["config"]["budget"] == 2
    assert manifest["seed"] == 7


def test_sweep_env_thread_cap(tmp_path, data_file, monkeypatch):
    monkeypatch.setenv("ERPNET_THREADS", "1")
    rc, out = sweep_run(tmp_path, data_file, "s3", workers=8)
    assert rc == 0
    rc_serial, out_serial = sweep_run(tmp_path, data_file, "s4", workers=1)
    assert (out / "sweep.csv").read_bytes() == (out_serial / "sweep.csv").read_bytes()


# ---------------------------------------------------------------- gradcheck

def test_gradcheck_passes(capsys):
    rc = main(["gradcheck", "--seeds", "2"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "gradcheck passed" in text
    for name in ("temporal_conv", "depthwise_conv", "separable_conv",
                 "batch_norm", "avg_pool", "dense_softmax"):
        assert name in text


def test_gradcheck_strict_tol_fails(capsys):
    rc = main(["gradcheck", "--seeds", "1", "--tol", "1e-18"])
    assert rc == 1
    assert "FAILED" in capsys.readouterr().out


# ---------------------------------------------------------------- report

def fake_report(acc, condition, seed):
    return TrainReport(config={"model": {}, "train": {}}, seed=seed,
                       history={"train_loss": [0.5], "train_acc": [0.8],
                                "val_loss": [0.6], "val_acc": [0.7]},
                       stopped_at_epoch=1, best_val_epoch=1, test_accuracy=acc,
                       confusion=[[1, 0], [0, 1]], wall_seconds=0.1,
                       condition=condition)


def test_report_aggregates_directories(tmp_path, capsys):
    for name, accs in (("cn-runs", (0.95, 0.99)), ("eeg-runs", (0.82, 0.9))):
        d = tmp_path / name
        d.mkdir()
        for i, acc in enumerate(accs):
            save_report(d / f"seed{i}.json", fake_report(acc, "seated-unloaded", i))
        # stray manifest-like JSON must be skipped, not fatal
        (d / "manifest.json").write_text('{"command": "train"}')
    out = tmp_path / "summary"
    rc = main(["report", "--in", str(tmp_path / "cn-runs"),
               str(tmp_path / "eeg-runs"), "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "cn-runs" in text and "eeg-runs" in text
    assert "seated-unloaded" in text
    csv_text = (out / "summary.csv").read_text()
    assert "cn-runs,overall,2,0.97" in csv_text
    assert (out / "summary.svg").read_text().startswith("<svg")


def test_report_empty_dir_exits_1(tmp_path, capsys):
    d = tmp_path / "empty"
    d.mkdir()
    rc = main(["report", "--in", str(d), "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "no training reports" in capsys.readouterr().err


# ---------------------------------------------------------------- misc

def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "cneegnet" in capsys.readouterr().out


def test_unknown_subcommand_exits_2():
    assert main(["frobnicate"]) == 2
