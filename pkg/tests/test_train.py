import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lesionxfer import models, train
from lesionxfer.errors import DataError, NumericError
from lesionxfer.nn import SGD, RMSprop, Rng, predict
from lesionxfer.train import (
    EarlyStopping, EpochRecord, History, LabeledData, ReduceLROnPlateau, TrainConfig, batch_accuracy, fit,
    run_feature_extractor_stage, run_finetune_stage,
)


def toy_data(n, seed, size=16, channels=3):
    """Bright images are positive; inputs carry their row index in pixel (0, 0, 0)."""
    rng = Rng(seed)
    y = (np.arange(n) % 3 == 0).astype(np.float32)
    x = rng.uniform((n, size, size, channels)).astype(np.float32) * 0.5 + y[:, None, None, None] * 0.5
    x[:, 0, 0, 0] = np.arange(n)
    return LabeledData(x, y)


def fe_net(seed=0):
    net = models.build_feature_extractor(models.tiny_conv_backbone((16, 16, 3)))
    return net, models.init_network(net, Rng(seed))


def test_early_stopping_examples():
    es = EarlyStopping(min_delta=0.01, patience=2)
    assert [es.update(v) for v in (0.50, 0.505, 0.509)] == [False, False, True]
    es = EarlyStopping(min_delta=0.01, patience=3)
    assert not any(es.update(0.1 + 0.02 * i) for i in range(40))


def test_plateau_examples():
    p = ReduceLROnPlateau(factor=0.1, patience=5, learning_rate=1e-3)
    assert all(p.update(0.1 + 0.01 * i) == 1e-3 for i in range(30))
    p = ReduceLROnPlateau(factor=0.5, patience=4, learning_rate=1.0)
    lrs = [p.update(0.6) for _ in range(9)]
    assert lrs[-1] == 0.25 and lrs.count(1.0) == 4


@given(st.lists(st.floats(0, 1), min_size=1, max_size=80), st.integers(1, 10))
def test_plateau_only_moves_by_factor(seq, patience):
    p = ReduceLROnPlateau(factor=0.1, patience=patience, learning_rate=1.0)
    reductions = 0
    prev = 1.0
    for v in seq:
        lr = p.update(v)
        if lr != prev:
            reductions += 1
            assert math.isclose(lr, prev * 0.1)
        prev = lr
    assert reductions <= len(seq) // patience


@given(st.lists(st.floats(0, 1), min_size=1, max_size=80), st.integers(1, 10))
def test_early_stopping_needs_patience_epochs(seq, patience):
    es = EarlyStopping(min_delta=0.01, patience=patience)
    stops = [es.update(v) for v in seq]
    if True in stops:
        assert stops.index(True) + 1 >= patience + 1


@given(st.lists(st.tuples(st.floats(allow_nan=False), st.floats(0, 1), st.floats(0, 1),
                          st.floats(1e-9, 1.0)), max_size=20))
def test_history_csv_round_trip(rows):
    h = History(EpochRecord(i + 1, *r) for i, r in enumerate(rows))
    assert History.from_csv(h.to_csv()) == h


def test_batch_accuracy_threshold():
    assert batch_accuracy(np.array([[0.5], [0.49]]), np.array([[1.0], [0.0]])) == 1.0


def test_batch_count_41_records(monkeypatch):
    calls = []
    real = train.backward

    def counting(net, params, cache, dout):
        calls.append(len(dout))
        return real(net, params, cache, dout)

    monkeypatch.setattr(train, "backward", counting)
    net, params = fe_net()
    fit(net, params, toy_data(41, 1), toy_data(6, 2), TrainConfig(RMSprop(), 1, 32))
    assert calls == [32, 9]


def test_single_epoch_best_is_epoch_one():
    net, params = fe_net()
    res = fit(net, params, toy_data(12, 1), toy_data(6, 2), TrainConfig(RMSprop(), 1, 4))
    assert len(res.history) == 1 and res.best_epoch == 1
    assert all(np.array_equal(res.params[k], res.final_params[k]) for k in params)


def test_best_checkpoint_contract_and_determinism():
    net, params = fe_net(3)
    tr, va = toy_data(30, 4), toy_data(12, 5)
    config = TrainConfig(RMSprop(learning_rate=1e-2), 6, 8, seed=9)
    a = fit(net, params, tr, va, config)
    b = fit(net, params, tr, va, config)
    assert a.history == b.history
    assert all(np.array_equal(a.params[k], b.params[k]) for k in params)
    accs = [r.val_acc for r in a.history]
    assert a.best_val_acc == max(accs) and a.best_epoch == accs.index(max(accs)) + 1
    recomputed = batch_accuracy(predict(net, a.params, va.inputs)[:, None], va.targets)
    assert recomputed == a.best_val_acc >= max(accs)
    # inputs are untouched
    assert fit(net, params, tr, va, config).history == a.history


def test_epochs_visit_the_expanded_list(monkeypatch):
    seen = []
    real = train.forward

    def recording(net, params, inputs, train=False, **kw):
        if train:
            seen.append(np.asarray(inputs)[:, 0, 0, 0].astype(int).tolist())
        return real(net, params, inputs, train=train, **kw)

    monkeypatch.setattr(train, "forward", recording)
    base = toy_data(10, 1)
    idx = np.r_[np.arange(10), 0, 0, 3, 3]  # duplicated rows, as oversampling makes
    data = base.take(idx)
    net, params = fe_net()
    fit(net, params, data, toy_data(4, 2), TrainConfig(RMSprop(), 3, 4))
    per_epoch = len(range(0, len(idx), 4))
    epochs = [sum(seen[e * per_epoch:(e + 1) * per_epoch], []) for e in range(3)]
    for visited in epochs:
        assert Counter(visited) == Counter(idx.tolist())
    assert epochs[0] != epochs[1]


def test_empty_data_rejected():
    net, params = fe_net()
    empty = LabeledData(np.zeros((0, 16, 16, 3), np.float32), np.zeros(0))
    with pytest.raises(DataError):
        fit(net, params, empty, toy_data(4, 1), TrainConfig(RMSprop(), 1))
    with pytest.raises(DataError):
        fit(net, params, toy_data(4, 1), empty, TrainConfig(RMSprop(), 1))


def test_non_finite_loss_raises():
    net, params = fe_net()
    data = toy_data(8, 1)
    data.inputs[3] = np.nan
    with pytest.raises(NumericError):
        fit(net, params, data, toy_data(4, 2), TrainConfig(RMSprop(), 1, 4))


def test_all_frozen_loss_constant():
    net, params = fe_net()
    net = net.with_trainable([])
    res = fit(net, params, toy_data(12, 1), toy_data(4, 2), TrainConfig(SGD(0.1), 4, 4))
    losses = [r.train_loss for r in res.history]
    assert all(math.isclose(v, losses[0], rel_tol=1e-6) for v in losses)


def test_feature_extractor_stage():
    net, params = fe_net(2)
    tr, va = toy_data(24, 3), toy_data(9, 4)
    a = run_feature_extractor_stage(net, params, tr, va, seed=5, batch_size=8)
    assert 1 <= len(a.history) <= 20
    for k, v in params.items():
        if not k.startswith("head/"):
            assert np.array_equal(a.final_params[k], v)
    b = run_feature_extractor_stage(net, params, tr, va, seed=5, batch_size=8)
    assert a.history == b.history


def test_finetune_stage_trains_only_last_blocks():
    net, params = fe_net(2)
    tr, va = toy_data(24, 3), toy_data(9, 4)
    stage1 = run_feature_extractor_stage(net, params, tr, va, seed=5, max_epochs=2, batch_size=8)
    ft_net, res = run_finetune_stage(net, stage1, tr, va, seed=5, max_epochs=3, batch_size=8)
    assert set(ft_net.trainable_blocks()) == {"block4", "block5", "head"}
    assert [r.lr for r in res.history] == [1e-4] * 3
    for k, v in stage1.params.items():
        moved = not np.array_equal(res.final_params[k], v)
        if k.split("/")[0] in ("block1", "block2", "block3"):
            assert not moved, k
    assert any(not np.array_equal(res.final_params[k], stage1.params[k]) for k in stage1.params
               if k.startswith("block5/"))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(RMSprop(), 0)
    with pytest.raises(ValueError):
        TrainConfig(RMSprop(), 1, batch_size=0)
