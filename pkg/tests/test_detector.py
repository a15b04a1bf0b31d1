import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidforensics.detector import (
    LOG_FLOOR,
    LogisticModel,
    ScoredSample,
    TrainConfig,
    band_swap_attack,
    extract_features,
    frame_logits,
    loss_and_grad,
    score_clip,
    sigmoid,
    train_logistic,
)
from vidforensics.errors import DimensionError, TrainingError
from vidforensics.videoio import Clip
from vidforensics.wavelet import fswt_forward
from vidforensics.waverep import diagonal_mask


def test_constant_frame_features_hit_the_floor():
    f = extract_features(np.full((16, 16), 0.7))
    assert f.shape == (16,)
    np.testing.assert_allclose(f, np.log(LOG_FLOOR))


def test_feature_length_follows_levels():
    x = np.random.default_rng(0).random((3, 16, 16))
    assert extract_features(x, levels=3).shape == (3, 16)
    assert extract_features(x, levels=2).shape == (3, 9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 2.0, 7.3]))
def test_features_are_scale_invariant(seed, alpha):
    x = np.random.default_rng(seed).random((16, 16))
    np.testing.assert_allclose(extract_features(alpha * x), extract_features(x), atol=1e-6)


def test_sigmoid_is_stable():
    np.testing.assert_allclose(sigmoid([-1000.0, 0.0, 1000.0]), [0.0, 0.5, 1.0])
    z = np.linspace(-30, 30, 101)
    assert np.all(np.diff(sigmoid(z)) >= 0)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(40, 5))
    y = (rng.random(40) < 0.5).astype(float)
    h = 1e-6
    for _ in range(10):
        w, b = rng.normal(size=5), float(rng.normal())
        _, gw, gb = loss_and_grad(w, b, x, y, l2=0.01)
        num = np.empty(5)
        for k in range(5):
            e = np.zeros(5)
            e[k] = h
            num[k] = (loss_and_grad(w + e, b, x, y, 0.01)[0] - loss_and_grad(w - e, b, x, y, 0.01)[0]) / (2 * h)
        num_b = (loss_and_grad(w, b + h, x, y, 0.01)[0] - loss_and_grad(w, b - h, x, y, 0.01)[0]) / (2 * h)
        np.testing.assert_allclose(gw, num, rtol=1e-4, atol=1e-8)
        assert gb == pytest.approx(num_b, rel=1e-4, abs=1e-8)


def test_separable_pair_is_learned():
    model = train_logistic([[0.0, 1.0], [1.0, 0.0]], [0, 1])
    pred = sigmoid(model.logits([[0.0, 1.0], [1.0, 0.0]])) >= 0.5
    np.testing.assert_array_equal(pred, [False, True])
    assert "train_loss" in model.meta


def test_duplicated_dataset_gives_same_model():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(30, 4))
    y = (x[:, 0] + 0.3 * rng.normal(size=30) > 0).astype(float)
    a = train_logistic(x, y, TrainConfig(epochs=100), seed=3)
    b = train_logistic(np.vstack([x, x]), np.concatenate([y, y]), TrainConfig(epochs=100), seed=3)
    np.testing.assert_allclose(a.weights, b.weights, rtol=1e-9)
    assert a.bias == pytest.approx(b.bias, rel=1e-9)


def test_training_is_deterministic_per_seed():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(20, 3))
    y = np.arange(20) % 2
    a = train_logistic(x, y, TrainConfig(epochs=5), seed=1)
    b = train_logistic(x, y, TrainConfig(epochs=5), seed=1)
    c = train_logistic(x, y, TrainConfig(epochs=5), seed=2)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert not np.array_equal(a.weights, c.weights)


def test_standardization_is_folded_into_weights():
    rng = np.random.default_rng(5)
    x = rng.normal(loc=10.0, scale=[1.0, 50.0], size=(50, 2))
    y = (x[:, 0] > 10).astype(float)
    model = train_logistic(x, y, seed=0)
    acc = np.mean((model.logits(x) > 0) == (y == 1))
    assert acc > 0.9


def test_training_errors():
    with pytest.raises(TrainingError):
        train_logistic([[0.0], [1.0]], [1, 1])
    with pytest.raises(DimensionError):
        train_logistic([[0.0], [1.0]], [0, 1, 1])


def test_model_json_roundtrip(tmp_path):
    m = LogisticModel(np.array([0.5, -1.25]), 0.75, TrainConfig(0.1, 3, 0.0), {"levels": 3})
    m.save(tmp_path / "m.json")
    back = LogisticModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.weights, m.weights)
    assert back.bias == 0.75 and back.config == m.config and back.meta == {"levels": 3}
    assert set(m.to_json()) >= {"weights", "bias", "config"}


def constant_logit_model(value, n=16):
    return LogisticModel(np.zeros(n), value)


def test_score_of_equal_logits():
    clip = Clip(np.random.default_rng(6).random((5, 16, 16)))
    s = score_clip(constant_logit_model(1.5), clip, "c", 1)
    assert s.score == pytest.approx(1.5) and s.prob == pytest.approx(sigmoid(1.5))
    assert (s.id, s.label) == ("c", 1)


def test_single_frame_score_is_its_logit():
    model = LogisticModel(np.linspace(-1, 1, 16), 0.2)
    clip = Clip(np.random.default_rng(7).random((1, 16, 16)))
    assert score_clip(model, clip).score == pytest.approx(float(frame_logits(model, clip)[0]))


def test_score_ignores_frame_order_and_tail():
    model = LogisticModel(np.linspace(-1, 1, 16), -0.1)
    data = np.random.default_rng(8).random((70, 16, 16)).astype(np.float32)
    perm = np.concatenate([np.random.default_rng(9).permutation(64), np.arange(64, 70)])
    a = score_clip(model, Clip(data)).score
    b = score_clip(model, Clip(data[perm])).score
    tail_changed = data.copy()
    tail_changed[64:] = 0.0
    c = score_clip(model, Clip(tail_changed)).score
    assert a == pytest.approx(b, rel=1e-12) and a == pytest.approx(c, rel=1e-12)


def test_scored_sample_prob_range():
    assert 0.0 < ScoredSample("x", 0, -20.0).prob < 0.5 < ScoredSample("y", 1, 20.0).prob < 1.0


def test_attack_identity_and_band_law():
    rng = np.random.default_rng(10)
    real, fake = Clip(rng.random((2, 16, 16))), Clip(rng.random((2, 16, 16)))
    np.testing.assert_allclose(band_swap_attack(real, real).data, real.data, atol=1e-5)
    out = fswt_forward(band_swap_attack(real, fake).data, 3)
    gr, gf = fswt_forward(real.data, 3), fswt_forward(fake.data, 3)
    diag = diagonal_mask(3)
    for i in range(4):
        for j in range(4):
            src = gf if diag[i, j] else gr
            np.testing.assert_allclose(out.band(i, j), src.band(i, j), atol=1e-5)


def test_attack_shape_mismatch():
    with pytest.raises(DimensionError):
        band_swap_attack(Clip(np.zeros((1, 16, 16))), Clip(np.zeros((2, 16, 16))))
