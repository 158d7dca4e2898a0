import numpy as np
import pytest

from conftest import synthetic_instance
from triggerkit.model import ModelConfig, flatten_params, gradients, init_params
from triggerkit.training import (Adam, FeatureScaler, TrainConfig, TrainingDivergedError,
                                 build_instances, fit_scaler, top1_accuracy, train)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(temporal_only=True, semantic_only=True)


def test_scaler_zscores_training_features(toy_dataset):
    scaler = fit_scaler(toy_dataset)
    rows = np.asarray([e.features for vid in toy_dataset.splits["train"]
                       for e in toy_dataset.videos[vid].events])
    transformed = scaler.transform(rows)
    assert np.max(np.abs(transformed.mean(axis=0))) < 1e-9
    stds = transformed.std(axis=0)
    assert np.all((np.abs(stds - 1.0) < 1e-6) | (stds < 1e-6))


def test_instances_have_consistent_shapes(toy_instances):
    for split, instances in toy_instances.items():
        for inst in instances:
            n, d = inst.feats.shape
            assert d == 52
            assert inst.labels.shape == (n,)
            assert inst.labels.sum() >= 1.0
            assert inst.src.shape == inst.dst.shape
            assert inst.t4.shape == (len(inst.src), 4)
            assert np.all(inst.src < n) and np.all(inst.dst < n)
            assert np.all(inst.src < inst.dst)
            assert len(inst.premise_event_ids) == n
            assert len(inst.premise_types) == n


def test_window_pruning_reduces_edges(toy_dataset):
    scaler = fit_scaler(toy_dataset)
    full = build_instances(toy_dataset, "train", scaler, None)
    pruned = build_instances(toy_dataset, "train", scaler, 1.0)
    assert sum(len(i.src) for i in pruned) < sum(len(i.src) for i in full)


def test_adam_moves_against_gradient():
    adam = Adam(3)
    theta = np.zeros(3)
    grad = np.array([1.0, -2.0, 0.5])
    out = adam.step(theta, grad, lr=0.1)
    assert np.all(np.sign(out) == -np.sign(grad))


def test_one_epoch_improves_loss(toy_dataset):
    config_base = TrainConfig(epochs=0, batch_size=16, seed=3, n_layers=2,
                              early_stop_patience=None)
    init_result = train(toy_dataset, config_base)
    from triggerkit.training import build_instances as bi

    insts = bi(toy_dataset, "train", init_result.model.scaler, None)
    loss0, _ = gradients(insts, init_result.model.params, init_result.model.config)

    config = TrainConfig(epochs=1, batch_size=16, learning_rate=1e-3, seed=3,
                         n_layers=2, early_stop_patience=None)
    result = train(toy_dataset, config)
    loss1, _ = gradients(insts, result.model.params, result.model.config)
    assert result.curve[0].train_loss < loss0 or loss1 < loss0


def test_zero_epochs_returns_initialization(toy_dataset):
    config = TrainConfig(epochs=0, seed=5, n_layers=2)
    result = train(toy_dataset, config)
    params = init_params(config.model_config(toy_dataset.feature_dim), 5,
                         mean_edge_distance=_mean_dist(toy_dataset, config))
    assert np.array_equal(flatten_params(result.model.params), flatten_params(params))
    assert result.curve == []


def _mean_dist(dataset, config):
    from triggerkit.training import _mean_edge_distance, build_instances, fit_scaler

    scaler = fit_scaler(dataset)
    return _mean_edge_distance(build_instances(dataset, "train", scaler, config.window))


def test_same_seed_identical_curves(toy_dataset):
    config = TrainConfig(epochs=2, batch_size=16, seed=9, n_layers=1,
                         early_stop_patience=None)
    a = train(toy_dataset, config)
    b = train(toy_dataset, config)
    assert [(r.train_loss, r.val_accuracy) for r in a.curve] == \
        [(r.train_loss, r.val_accuracy) for r in b.curve]
    assert np.array_equal(flatten_params(a.model.params), flatten_params(b.model.params))


def test_best_epoch_checkpoint_retained(toy_dataset):
    config = TrainConfig(epochs=3, batch_size=16, seed=1, n_layers=1,
                         early_stop_patience=None)
    result = train(toy_dataset, config)
    best = max(result.curve, key=lambda r: r.val_accuracy)
    assert result.curve[result.best_epoch - 1].val_accuracy == best.val_accuracy


def test_divergence_aborts_with_context(toy_dataset, monkeypatch):
    import triggerkit.training as training_mod

    def bad_gradients(batch, params, config, pos_weight=1.0):
        loss, grads = gradients(batch, params, config, pos_weight)
        return float("nan"), grads

    monkeypatch.setattr(training_mod, "gradients", bad_gradients)
    with pytest.raises(TrainingDivergedError) as err:
        train(toy_dataset, TrainConfig(epochs=1, seed=0, n_layers=1))
    assert err.value.epoch == 1
    assert err.value.step == 0


def test_top1_accuracy_oracle_and_ties():
    rng = np.random.default_rng(4)
    instances = [synthetic_instance(rng, n_premises=5, d=4) for _ in range(10)]
    oracle = lambda inst: inst.labels.astype(float)
    assert top1_accuracy(instances, oracle) == 100.0
    # Constant scores break ties to the earliest premise.
    flat = lambda inst: np.zeros(inst.n_nodes)
    expected = 100.0 * np.mean([inst.labels[0] == 1.0 for inst in instances])
    assert top1_accuracy(instances, flat) == expected
