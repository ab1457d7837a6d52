import math

import numpy as np
import pytest

import svkit


def noise(n, seed, scale=0.1):
    return np.random.default_rng(seed).normal(0.0, scale, n).astype(np.float32)


def test_front_end_shapes():
    feats = svkit.extract_features(noise(32000, 1))
    assert feats.shape == (201, 64)
    assert np.abs(feats.mean(axis=0)).max() < 1e-5
    assert svkit.log_mel_spectrogram(noise(16000, 2)).shape == (101, 64)
    crop = svkit.crop_segment(noise(16000, 3), 2.0, seed=4)
    assert crop.shape == (32000,)


def test_preemphasis_example():
    y = svkit.preemphasize(np.array([1, 0, 0], dtype=np.float32), 0.97)
    np.testing.assert_allclose(y, [0.03, -0.97, 0.0], atol=1e-7)


def test_snr_mixing():
    clean, n = noise(16000, 5, 0.3), noise(16000, 6, 0.05)
    mixed = svkit.mix_at_snr(clean, n, 10.0)
    assert svkit.measure_snr_db(clean, mixed - clean) == pytest.approx(10.0, abs=1e-3)


def test_rir_identity():
    x = noise(8000, 7)
    delta = np.zeros(100, dtype=np.float32)
    delta[0] = 1.0
    assert np.array_equal(svkit.apply_rir(x, delta), x)


def test_model_round_trip_and_scoring(tmp_path):
    model = svkit.Model.init("q-sap", seed=3)
    assert model.variant == "q-sap"
    assert model.parameter_count == 1415728
    path = tmp_path / "q.svw1"
    model.save(path)
    loaded = svkit.Model.load(path)
    assert loaded.tensor_names() == model.tensor_names()
    np.testing.assert_array_equal(loaded.tensor("fc.weight"), model.tensor("fc.weight"))

    emb = model.forward(svkit.extract_features(noise(16000, 8)))
    assert emb.shape == (512,)
    a, b = noise(20000, 9), noise(18000, 10)
    ab = model.score_pair(a, b, n_crops=2, crop_seconds=1.0)
    assert ab == model.score_pair(b, a, n_crops=2, crop_seconds=1.0)
    assert -1.0 <= ab <= 1.0
    crops = model.embed_crops(a, n_crops=3, crop_seconds=1.0)
    assert crops.shape == (3, 512)


def test_losses_and_gradients():
    rng = np.random.default_rng(11)
    x, w = rng.normal(size=(4, 6)), rng.normal(size=(3, 6))
    labels = [0, 1, 2, 1]
    r = svkit.softmax_ce(x, labels, w)
    assert r["d_embeddings"].shape == x.shape
    step = 1e-6
    xp = x.copy()
    xp[1, 2] += step
    xm = x.copy()
    xm[1, 2] -= step
    fd = (svkit.softmax_ce(xp, labels, w)["value"] - svkit.softmax_ce(xm, labels, w)["value"]) / (2 * step)
    assert fd == pytest.approx(r["d_embeddings"][1, 2], rel=1e-5)
    assert svkit.angular_prototypical(x, 2, 2, w=0.0, b=0.0)["value"] == pytest.approx(math.log(2))
    assert svkit.aam_softmax(x, labels, w)["value"] > svkit.aam_softmax(x, labels, w, margin=0.0)["value"]
    with pytest.raises(svkit.SvkitError):
        svkit.softmax_ce(x, [0, 1, 5, 1], w)


def test_metrics_toy_set():
    report = svkit.evaluate([0.9, 0.8, 0.7], [0.75, 0.2, 0.1])
    assert report["eer_pct"] == pytest.approx(100 / 3)
    assert report["min_dcf"] == pytest.approx(1 / 3)
    eer, threshold = svkit.compute_eer([0.9, 0.8], [0.1, 0.2])
    assert eer == 0.0


def test_training_demo_reduces_loss():
    assert svkit.lr_at(4) == pytest.approx(0.0081)
    out = svkit.train_demo("ap+softmax", epochs=5, dim=64, seed=1)
    assert len(out["history"]) == 6
    assert out["history"][-1]["loss"] < out["history"][0]["loss"]
