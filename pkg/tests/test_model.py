import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightdic.datasets import gaussian_blobs
from lightdic.errors import InputError, TrainingError, ValidationError
from lightdic.model import (
    LinearModel,
    TrainConfig,
    assemble_inputs,
    design_width,
    evaluate,
    forward,
    loss_and_grad,
    predict,
    softmax,
    train,
)
from lightdic.propagation import AggregatedFeatures, PropagationConfig
from lightdic.splits import TaskKind, TaskSplit


def _agg(n=5, width=3, seed=0):
    rng = np.random.default_rng(seed)
    return AggregatedFeatures(rng.standard_normal((n, width)), rng.standard_normal((n, width)), PropagationConfig())


def _split(kind, train, labels, num_classes=2):
    empty = np.empty((0,) + np.asarray(train).shape[1:], dtype=np.int64)
    none = np.empty(0, np.int64)
    return TaskSplit(kind, np.asarray(train), empty, empty, np.asarray(labels), none, none, num_classes)


def test_zero_model_uniform():
    P = forward(LinearModel.zeros(4, 5), np.ones((3, 4)))
    assert np.all(P == 0.2)


def test_softmax_no_overflow():
    assert np.array_equal(softmax([[1000.0, 0.0]]), [[1.0, 0.0]])


@settings(max_examples=100)
@given(st.integers(0, 2**31), st.floats(-1e3, 1e3))
def test_softmax_rows_and_shift(seed, shift):
    Z = np.random.default_rng(seed).standard_normal((6, 4)) * 20
    P = softmax(Z)
    assert np.all(P >= 0)
    assert np.abs(P.sum(axis=1) - 1).max() <= 1e-12
    assert np.abs(softmax(Z + shift) - P).max() <= 1e-12


def test_forward_width_mismatch():
    with pytest.raises(ValidationError):
        forward(LinearModel.zeros(4, 2), np.ones((3, 5)))


def _finite_difference_error(seed, eps=1e-5):
    rng = np.random.default_rng(seed)
    N, d, C = rng.integers(2, 12), rng.integers(1, 6), rng.integers(2, 5)
    X = rng.standard_normal((N, d))
    y = rng.integers(0, C, N)
    W = rng.standard_normal((d, C))
    b = rng.standard_normal(C)
    wd = float(rng.uniform(0, 0.5))
    _, dW, db = loss_and_grad(W, b, X, y, wd)
    num_W = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        E = np.zeros_like(W)
        E[idx] = eps
        num_W[idx] = (loss_and_grad(W + E, b, X, y, wd)[0] - loss_and_grad(W - E, b, X, y, wd)[0]) / (2 * eps)
    num_b = np.array([
        (loss_and_grad(W, b + eps * e, X, y, wd)[0] - loss_and_grad(W, b - eps * e, X, y, wd)[0]) / (2 * eps)
        for e in np.eye(C)
    ])
    analytic = np.concatenate([dW.ravel(), db])
    numeric = np.concatenate([num_W.ravel(), num_b])
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), 1e-12)


@pytest.mark.parametrize("seed", range(50))
def test_gradient_finite_differences(seed):
    assert _finite_difference_error(seed) <= 1e-5


def _brute_force_separable(X, y, angles=3600):
    # scan directions and thresholds for a perfect split
    for t in np.linspace(0, np.pi, angles, endpoint=False):
        s = X @ np.array([np.cos(t), np.sin(t)])
        lo, hi = s[y == 0], s[y == 1]
        if lo.max() < hi.min() or hi.max() < lo.min():
            return True
    return False


def test_blobs_reach_full_training_accuracy():
    X, y = gaussian_blobs(100, seed=0)
    assert _brute_force_separable(X, y)
    model, losses = train(LinearModel.zeros(2, 2), X, y, TrainConfig(learning_rate=0.1, epochs=200))
    assert np.mean(predict(model, X) == y) >= 0.99
    assert len(losses) == 200


def test_huge_weight_decay_shrinks_weights():
    X, y = gaussian_blobs(100, seed=1)
    model, _ = train(LinearModel.zeros(2, 2), X, y, TrainConfig(learning_rate=0.01, weight_decay=1e6))
    assert np.linalg.norm(model.W) <= 1e-2


def test_zero_epochs_unchanged():
    m0 = LinearModel(np.ones((2, 2)), np.zeros(2))
    m1, losses = train(m0, np.ones((3, 2)), np.array([0, 1, 0]), TrainConfig(epochs=0))
    assert losses == [] and np.array_equal(m1.W, m0.W) and np.array_equal(m1.bias, m0.bias)


def test_full_batch_loss_non_increasing():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((200, 5))
    y = rng.integers(0, 3, 200)
    _, losses = train(LinearModel.zeros(5, 3), X, y, TrainConfig(learning_rate=0.01, batch_size=5000, epochs=100))
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert all(np.isfinite(losses)) and min(losses) >= 0


def test_seed_determinism():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((300, 4))
    y = rng.integers(0, 3, 300)
    cfg = TrainConfig(learning_rate=0.05, batch_size=32, epochs=20, seed=9)
    a, _ = train(LinearModel.zeros(4, 3), X, y, cfg)
    b, _ = train(LinearModel.zeros(4, 3), X, y, cfg)
    assert a.W.tobytes() == b.W.tobytes() and a.bias.tobytes() == b.bias.tobytes()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_names_epoch():
    X = np.array([[1e300, -1e300], [-1e300, 1e300]])
    with pytest.raises(TrainingError) as exc:
        train(LinearModel.zeros(2, 2), X, np.array([0, 1]), TrainConfig(learning_rate=1e10, epochs=5))
    assert exc.value.epoch is not None and "epoch" in str(exc.value)


def test_labels_out_of_range():
    with pytest.raises(ValidationError):
        train(LinearModel.zeros(2, 2), np.ones((2, 2)), np.array([0, 2]), TrainConfig())


@pytest.mark.parametrize("kwargs", [{"learning_rate": 0.0}, {"batch_size": 0}, {"weight_decay": -1.0}])
def test_train_config_validation(kwargs):
    with pytest.raises(InputError):
        TrainConfig(**kwargs)


def test_early_stopping_restores_best():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((100, 3))
    y = rng.integers(0, 2, 100)
    Xv = rng.standard_normal((50, 3))
    yv = rng.integers(0, 2, 50)
    cfg = TrainConfig(learning_rate=0.1, epochs=500, patience=10)
    model, losses = train(LinearModel.zeros(3, 2), X, y, cfg, val=(Xv, yv))
    assert len(losses) < 500
    best = max(
        np.mean(predict(train(LinearModel.zeros(3, 2), X, y, TrainConfig(learning_rate=0.1, epochs=e))[0], Xv) == yv)
        for e in range(1, len(losses) + 1)
    )
    assert np.mean(predict(model, Xv) == yv) == best


def test_assemble_node_width():
    data = assemble_inputs(_agg(width=3), _split(TaskKind.NODE, [0, 2], [0, 1]))
    X, y = data["train"]
    assert X.shape == (2, 6) == (2, design_width(3, TaskKind.NODE))
    assert y.tolist() == [0, 1]


def test_assemble_link_width_and_swap():
    agg = _agg(width=3)
    data = assemble_inputs(agg, _split(TaskKind.DIRECTION, [[1, 4], [4, 1]], [0, 1]))
    X = data["train"][0]
    assert X.shape == (2, 12) == (2, design_width(3, TaskKind.DIRECTION))
    assert np.array_equal(X[0, :6], X[1, 6:]) and np.array_equal(X[0, 6:], X[1, :6])
    assert np.array_equal(X[0], np.r_[agg.real[1], agg.imag[1], agg.real[4], agg.imag[4]])


def test_assemble_out_of_range():
    with pytest.raises(ValidationError):
        assemble_inputs(_agg(n=5), _split(TaskKind.NODE, [0, 5], [0, 1]))


def test_evaluate_perfect():
    X, y = gaussian_blobs(100, seed=0)
    model, _ = train(LinearModel.zeros(2, 2), X, y, TrainConfig(learning_rate=0.1))
    rep = evaluate(model, X, y, TaskKind.EXISTENCE)
    assert rep.accuracy == rep.macro_f1 == rep.auc == 1.0


def test_evaluate_three_class_has_no_auc():
    rep = evaluate(LinearModel.zeros(2, 3), np.ones((3, 2)), np.array([0, 1, 2]), TaskKind.THREE_CLASS)
    assert rep.auc is None


def test_evaluate_empty():
    with pytest.raises(ValidationError):
        evaluate(LinearModel.zeros(2, 2), np.ones((0, 2)), np.array([], int))
