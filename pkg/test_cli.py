#!/usr/bin/env python3
"""
Tests for the command-line entry point and configuration layering
"""

import json

import pytest

import main
from config import Config
from model import checkpoint
from errors import ConfigError

TINY = ["--hidden", "4", "--head", "4,4", "--epochs", "2", "--no-progress"]


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ICEGNN_LOGS_DIR", str(tmp_path / "logs"))
    for var in Config.ENV_KEYS:
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def synthetic(tmp_path):
    data_dir = tmp_path / "data"
    assert main.main(["synth", "--seed", "7", "--n", "8", "--n-traces", "8", "--out", str(data_dir)]) == 0
    return data_dir / "records.jsonl", data_dir / "mar.csv"


def data_args(synthetic):
    records, mar = synthetic
    return ["--records", str(records), "--mar", str(mar), "--n-traces", "8"]


def test_synth_writes_records_and_mar(synthetic):
    records, mar = synthetic
    assert records.exists() and mar.exists()
    assert len(records.read_text().splitlines()) == 8


def test_synth_then_trials_end_to_end(synthetic, tmp_path):
    out = tmp_path / "run"
    code = main.main(["trials", *data_args(synthetic), *TINY, "--n-trials", "2", "--output-dir", str(out)])
    assert code == 0
    report = json.loads((out / "trials.json").read_text())
    assert report["label"] == "PSAGE-LSTM"
    assert len(report["trial_rmse"]) == 2
    assert report["wall_time"] is None


def test_trials_outputs_are_byte_identical(synthetic, tmp_path):
    for name in ("a", "b"):
        main.main(["trials", *data_args(synthetic), *TINY, "--n-trials", "1", "--output-dir", str(tmp_path / name)])
    assert (tmp_path / "a" / "trials.json").read_bytes() == (tmp_path / "b" / "trials.json").read_bytes()


def test_train_then_eval(synthetic, tmp_path):
    out = tmp_path / "run"
    assert main.main(["train", *data_args(synthetic), *TINY, "--output-dir", str(out)]) == 0
    for name in ("checkpoint.bin", "history.json", "eval.json"):
        assert (out / name).exists()
    assert len(json.loads((out / "history.json").read_text())) == 2

    report = tmp_path / "eval.json"
    code = main.main(["eval", *data_args(synthetic), "--checkpoint", str(out / "checkpoint.bin"), "--out", str(report)])
    assert code == 0
    assert json.loads(report.read_text())["n_samples"] == 8


def test_build_then_train_from_samples(synthetic, tmp_path):
    samples = tmp_path / "samples.jsonl"
    assert main.main(["build", *data_args(synthetic), "--out", str(samples)]) == 0
    assert len(samples.read_text().splitlines()) == 8
    out = tmp_path / "run"
    assert main.main(["train", "--samples", str(samples), *TINY, "--output-dir", str(out)]) == 0
    assert (out / "checkpoint.bin").exists()


def test_gradcheck_exits_zero(capsys):
    assert main.main(["gradcheck"]) == 0
    assert "full_model_sage" in capsys.readouterr().out


def test_report_merges_two_trial_reports(synthetic, tmp_path):
    paths = []
    for mask in ("all", "base"):
        path = tmp_path / f"{mask}.json"
        main.main(["trials", *data_args(synthetic), *TINY, "--feature-mask", mask,
                   "--n-trials", "2", "--out", str(path), "--output-dir", str(tmp_path)])
        paths.append(str(path))
    prefix = tmp_path / "table"
    assert main.main(["report", *paths, "--out", str(prefix)]) == 0
    lines = (tmp_path / "table.txt").read_text().splitlines()
    assert len(lines) == 4
    assert "PSAGE-LSTM" in lines[2] and "GraphSAGE-LSTM" in lines[3]
    assert len((tmp_path / "table.csv").read_text().splitlines()) == 3


def test_unknown_flag_is_an_error():
    with pytest.raises(SystemExit) as info:
        main.main(["train", "--learning-rate", "0.1"])
    assert info.value.code == 2


def test_missing_records_file_is_a_config_error(tmp_path):
    code = main.main(["trials", "--records", str(tmp_path / "nope.jsonl"), "--feature-mask", "base"])
    assert code == ConfigError.exit_code


def test_physical_mask_without_mar_is_rejected(synthetic):
    records, _ = synthetic
    code = main.main(["trials", "--records", str(records), "--n-traces", "8", *TINY])
    assert code == ConfigError.exit_code


def test_malformed_config_file(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("epochs: [1, 2\n")
    assert main.main(["gradcheck", "--config", str(path)]) == ConfigError.exit_code
    path.write_text("learning_rate: 0.1\n")
    assert main.main(["gradcheck", "--config", str(path)]) == ConfigError.exit_code


def test_config_precedence(tmp_path, monkeypatch):
    path = tmp_path / "exp.yaml"
    path.write_text("workers: 3\nepochs: 10\nhidden: 32\n")
    config = Config.from_file(path)
    assert config.get_system_config()["workers"] == 3
    assert config.get_train_config()["epochs"] == 10

    monkeypatch.setenv("ICEGNN_WORKERS", "5")
    config = Config.from_file(path)
    assert config.get_system_config()["workers"] == 5

    args = main.build_parser().parse_args(["trials", "--config", str(path), "--workers", "2", "--hidden", "16"])
    config = main.load_config(args)
    assert config.get_system_config()["workers"] == 2
    assert config.get_model_config()["hidden"] == 16
    assert config.get_train_config()["epochs"] == 10


def test_shipped_configs_load():
    for name in ("psage_lstm", "graphsage_lstm", "gcn_lstm"):
        config = Config.from_file(Config().PROJECT_ROOT / "configs" / f"{name}.yaml")
        main.model_config_from(config)
        main.train_config_from(config)
    assert Config.from_file(Config().PROJECT_ROOT / "configs" / "gcn_lstm.yaml").get_train_config()["epochs"] == 300


def test_epochs_default_follows_cell_kind(tmp_path):
    parser = main.build_parser()
    gcn = main.load_config(parser.parse_args(["trials", "--cell-kind", "gcn"]))
    assert main.train_config_from(gcn).epochs == 300
    sage = main.load_config(parser.parse_args(["trials"]))
    assert main.train_config_from(sage).epochs == 450

    explicit = main.load_config(parser.parse_args(["trials", "--cell-kind", "gcn", "--epochs", "12"]))
    assert main.train_config_from(explicit).epochs == 12
    path = tmp_path / "exp.yaml"
    path.write_text("cell_kind: gcn\nepochs: 40\n")
    assert main.train_config_from(Config.from_file(path)).epochs == 40


def test_train_from_samples_uses_their_feature_mask(synthetic, tmp_path):
    samples = tmp_path / "base.jsonl"
    assert main.main(["build", *data_args(synthetic), "--feature-mask", "base", "--out", str(samples)]) == 0
    out = tmp_path / "run"
    assert main.main(["train", "--samples", str(samples), *TINY, "--output-dir", str(out)]) == 0
    model = checkpoint.load(out / "checkpoint.bin")
    assert model.config.feature_mask == "11100000"


def test_eval_rejects_samples_with_another_mask(synthetic, tmp_path):
    out = tmp_path / "run"
    assert main.main(["train", *data_args(synthetic), *TINY, "--output-dir", str(out)]) == 0
    samples = tmp_path / "base.jsonl"
    main.main(["build", *data_args(synthetic), "--feature-mask", "base", "--out", str(samples)])
    code = main.main(["eval", "--samples", str(samples), "--checkpoint", str(out / "checkpoint.bin")])
    assert code == ConfigError.exit_code
