#!/usr/bin/env python3
"""
Tests for the optimizer, schedule, training loop, RMSE evaluation and trial reports
"""

import math

import numpy as np
import pytest
import torch

from core.matrix import Parameter
from dataset.records import SplitSpec, split
from dataset.samples import build_samples
from dataset.synth import SynthParams, synth_generate
from errors import NumericFailureError
from geo.layer_graph import BASE_MASK, FULL_MASK
from model.network import LayerThicknessModel, ModelConfig, NormStats
from training.optim import Adam, StepSchedule, lr_at
from training.trainer import TrainConfig, Trainer, evaluate_rmse, train, training_mse
from training.trials import (
    TrialReport,
    format_table,
    read_report,
    reports_to_frame,
    run_trials,
    summarize,
    sweep_masks,
    write_report,
)

TINY_MODEL = dict(hidden=6, head=(8, 6), dropout_p=0.0)


def tiny_samples(n_records=4, n_traces=10, seed=0, mask=FULL_MASK):
    data = synth_generate(seed, n_records, SynthParams(n_traces=n_traces))
    return build_samples(data.records, data.mar, mask)


def test_lr_schedule_values():
    assert lr_at(0) == 0.01
    assert lr_at(74) == 0.01
    assert lr_at(75) == 0.005
    assert lr_at(150) == 0.0025
    schedule = StepSchedule()
    rates = [schedule.lr_at(e) for e in range(500)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert len(set(rates[75:150])) == 1


def test_adam_zero_gradient_leaves_parameter():
    p = Parameter("w", np.array([[1.5, -2.0]]))
    opt = Adam([p], weight_decay=0.0)
    opt.step()
    np.testing.assert_array_equal(p.value, [[1.5, -2.0]])


def test_adam_minimizes_scalar_quadratic():
    p = Parameter("theta", np.array([[1.0]]))
    opt = Adam([p], lr=0.01, weight_decay=0.0)
    for _ in range(500):
        p.grad += 2.0 * p.value
        opt.step()
    assert abs(p.value[0, 0]) < 0.1


@pytest.mark.parametrize("decoupled", [False, True])
def test_adam_matches_torch(decoupled):
    rng = np.random.default_rng(0)
    start = rng.standard_normal((3, 4))
    grads = [rng.standard_normal((3, 4)) for _ in range(20)]

    p = Parameter("w", start.copy())
    opt = Adam([p], lr=0.01, weight_decay=0.01, decoupled=decoupled)
    t = torch.tensor(start.copy(), requires_grad=True)
    cls = torch.optim.AdamW if decoupled else torch.optim.Adam
    topt = cls([t], lr=0.01, weight_decay=0.01)
    for g in grads:
        p.grad += g
        opt.step()
        t.grad = torch.tensor(g)
        topt.step()
    np.testing.assert_allclose(p.value, t.detach().numpy(), atol=1e-12)


def test_adam_rejects_non_finite_gradient_before_update():
    a = Parameter("a", np.ones((1, 2)))
    b = Parameter("b", np.ones((1, 2)))
    opt = Adam([a, b])
    a.grad += 1.0
    b.grad[0, 1] = np.nan
    with pytest.raises(NumericFailureError):
        opt.step()
    np.testing.assert_array_equal(a.value, 1.0)
    assert opt.t == 0


class _LookupModel:
    """Stand-in model returning targets shifted by a fixed offset"""

    def __init__(self, samples, offset):
        self.table = {id(s.inputs[0]): s.targets + offset for s in samples}

    def predict_denormalized(self, graphs):
        return self.table[id(graphs[-1])]


def test_rmse_exact_and_constant_error():
    samples = tiny_samples()
    assert evaluate_rmse(_LookupModel(samples, 0.0), samples).rmse == 0.0
    result = evaluate_rmse(_LookupModel(samples, 2.0), samples)
    assert result.rmse == pytest.approx(2.0, abs=1e-12)
    assert all(v == pytest.approx(2.0, abs=1e-12) for v in result.per_year)


def test_rmse_matches_scalar_loop():
    samples = tiny_samples()
    rng = np.random.default_rng(1)
    model = _LookupModel(samples, 0.0)
    for key in model.table:
        model.table[key] = rng.uniform(0, 20, model.table[key].shape)
    total, count = 0.0, 0
    for s in samples:
        pred = model.table[id(s.inputs[0])]
        for i in range(pred.shape[0]):
            for j in range(pred.shape[1]):
                total += (pred[i, j] - s.targets[i, j]) ** 2
                count += 1
    assert evaluate_rmse(model, samples).rmse == pytest.approx(math.sqrt(total / count), abs=1e-12)


def test_one_epoch_one_sample_is_one_step():
    samples = tiny_samples()[:1]
    model = LayerThicknessModel(ModelConfig(**TINY_MODEL), seed=0)
    trainer = Trainer(model, TrainConfig(epochs=1))
    _, history = trainer.train(samples)
    assert trainer.optimizer.t == 1
    assert len(history) == 1 and history[0]["val_rmse"] is None
    assert model.trained_epochs == 1


def test_training_is_bit_exact_for_same_seed():
    samples = tiny_samples()
    runs = []
    for _ in range(2):
        model = LayerThicknessModel(ModelConfig(**{**TINY_MODEL, "dropout_p": 0.2}), seed=3)
        _, history = train(model, samples[:3], samples[3:], TrainConfig(epochs=4, seed=3))
        runs.append((history, model.state()))
    assert runs[0][0] == runs[1][0]
    for name, value in runs[0][1].items():
        assert np.array_equal(value, runs[1][1][name])


def test_training_reduces_loss():
    samples = tiny_samples()
    model = LayerThicknessModel(ModelConfig(**TINY_MODEL), seed=0, norm_stats=NormStats.from_samples(samples))
    initial = training_mse(model, samples)
    _, history = train(model, samples, (), TrainConfig(epochs=120, seed=0))
    assert training_mse(model, samples) < 0.5 * initial
    assert history[-1]["train_loss"] < 0.5 * history[0]["train_loss"]
    assert all(math.isfinite(h["train_loss"]) for h in history)


def test_best_validation_parameters_are_kept():
    samples = tiny_samples(n_records=6)
    model = LayerThicknessModel(ModelConfig(**TINY_MODEL), seed=1)
    _, history = train(model, samples[:4], samples[4:], TrainConfig(epochs=15, seed=1))
    best = min(range(len(history)), key=lambda e: history[e]["val_rmse"])
    assert model.trained_epochs == best + 1
    assert evaluate_rmse(model, samples[4:]).rmse == history[best]["val_rmse"]


def test_training_does_not_modify_samples():
    samples = tiny_samples()
    before = [(s.targets.copy(), [g.node_features.copy() for g in s.inputs]) for s in samples]
    model = LayerThicknessModel(ModelConfig(**TINY_MODEL), seed=0)
    train(model, samples, (), TrainConfig(epochs=2))
    for s, (targets, features) in zip(samples, before):
        assert np.array_equal(s.targets, targets)
        assert all(np.array_equal(g.node_features, f) for g, f in zip(s.inputs, features))


def test_non_finite_gradient_aborts_with_last_good_state():
    samples = tiny_samples()
    model = LayerThicknessModel(ModelConfig(**TINY_MODEL), seed=0)
    trainer = Trainer(model, TrainConfig(epochs=10))
    real_step = trainer.optimizer.step
    calls = []

    def poisoned_step():
        calls.append(1)
        if len(calls) == 9:
            model.parameters()[0].grad[0, 0] = np.inf
        real_step()

    trainer.optimizer.step = poisoned_step
    with pytest.raises(NumericFailureError) as info:
        trainer.train(samples)
    assert len(info.value.history) == 2
    for name, value in info.value.last_good_state.items():
        assert np.array_equal(model.state()[name], value)


def test_summarize_single_trial():
    report = summarize("PSAGE-LSTM", [2.5], [[2.5] * 15], {})
    assert report.mean == 2.5
    assert report.std == 0.0 and not report.std_defined


def test_summarize_identical_trials():
    report = summarize("PSAGE-LSTM", [3.1] * 5, [[3.1] * 15] * 5, {})
    assert report.std == 0.0 and report.std_defined
    assert report.mean == pytest.approx(3.1)


def test_report_result_format():
    report = TrialReport("PSAGE-LSTM", [], 2.85262, 0.07481, True, [], {})
    assert report.result() == "2.8526 ± 0.0748"


def test_report_round_trip_and_table(tmp_path):
    a = summarize("PSAGE-LSTM", [2.0, 2.2], [[2.0] * 15, [2.2] * 15], {"model": {"feature_mask": "11111111"}})
    b = summarize("GCN-LSTM", [3.0, 3.4], [[3.0] * 15, [3.4] * 15], {"model": {"feature_mask": "11100000"}})
    write_report(a, tmp_path / "a.json")
    assert read_report(tmp_path / "a.json") == a
    table = format_table([a, b])
    lines = table.splitlines()
    assert len(lines) == 4
    assert "PSAGE-LSTM" in lines[2] and "2.1000 ± 0.1414" in lines[2]
    frame = reports_to_frame([a, b])
    assert list(frame["Model"]) == ["PSAGE-LSTM", "GCN-LSTM"]


def test_run_trials_small():
    data = synth_generate(5, 6, SynthParams(n_traces=8))
    report = run_trials(
        data.records, data.mar, ModelConfig(**TINY_MODEL), TrainConfig(epochs=2), n_trials=2
    )
    assert report.label == "PSAGE-LSTM"
    assert len(report.trial_rmse) == 2 and not report.failed
    assert report.wall_time is None
    assert report.config["n_trials"] == 2


def test_run_trials_parallel_matches_sequential():
    data = synth_generate(6, 6, SynthParams(n_traces=8))
    config = ModelConfig(**TINY_MODEL)
    seq = run_trials(data.records, data.mar, config, TrainConfig(epochs=2), n_trials=2, workers=1)
    par = run_trials(data.records, data.mar, config, TrainConfig(epochs=2), n_trials=2, workers=2)
    assert seq.trial_rmse == par.trial_rmse


def test_trial_splits_differ_by_seed():
    samples = tiny_samples(n_records=10)
    first = [s.id for s in split(samples, SplitSpec(0))[2]]
    second = [s.id for s in split(samples, SplitSpec(1))[2]]
    assert first != second


def test_sweep_covers_every_mask():
    data = synth_generate(8, 5, SynthParams(n_traces=8))
    reports = sweep_masks(data.records, data.mar, ModelConfig(**TINY_MODEL), TrainConfig(epochs=1), n_trials=1)
    masks = [r.config["model"]["feature_mask"] for r in reports]
    assert len(masks) == 32 and len(set(masks)) == 32
    assert reports[0].label == "GraphSAGE-LSTM"


@pytest.mark.slow
def test_four_samples_overfit():
    # weight decay off; lr halves every 400 epochs
    samples = tiny_samples(n_records=4, n_traces=64, seed=12)
    model = LayerThicknessModel(ModelConfig(dropout_p=0.0), seed=0, norm_stats=NormStats.from_samples(samples))
    initial = training_mse(model, samples)
    train(model, samples, (), TrainConfig(epochs=2000, seed=0, weight_decay=0.0, lr_period=400))
    assert training_mse(model, samples) <= 1e-3 * initial


@pytest.mark.slow
def test_physical_features_help_on_informative_data():
    data = synth_generate(21, 40, SynthParams(n_traces=32))
    model = dict(hidden=32, head=(32, 16), dropout_p=0.2)
    train_config = TrainConfig(epochs=150)
    physics = run_trials(data.records, data.mar, ModelConfig(feature_mask="all", **model), train_config, n_trials=5)
    base = run_trials(data.records, data.mar, ModelConfig(feature_mask="base", **model), train_config, n_trials=5)
    assert len(physics.trial_rmse) == len(base.trial_rmse) == 5
    assert physics.mean <= 0.8 * base.mean
