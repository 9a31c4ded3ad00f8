import math

import numpy as np
import pytest

import qcseis


def test_single_qubit_expectation_is_cosine():
    c = qcseis.RandomCircuit(0, 0, 4, 0)
    for th in (0.1, 0.7, 2.0):
        assert qcseis.expectation(np.array([th, 0, 0, 0]), c) == pytest.approx(math.cos(th), abs=1e-12)


def test_parameter_shift_matches_finite_difference():
    c = qcseis.RandomCircuit(3, 2, 4, 11)
    x = np.array([0.3, -1.2, 0.8, 2.1])
    g = qcseis.expectation_grad(x, c)
    h = 1e-5
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (qcseis.expectation(x + e, c) - qcseis.expectation(x - e, c)) / (2 * h)
        assert g[j] == pytest.approx(fd, abs=1e-6)
    assert c.angles.shape == (2, 4)


def test_quantum_forward_shape_range_and_workers():
    rng = np.random.default_rng(0)
    x = rng.uniform(-2, 2, size=(2, 3, 4, 10)).astype(np.float32)
    y1 = qcseis.quantum_forward(x, seed=5, workers=1)
    y4 = qcseis.quantum_forward(x, seed=5, workers=4)
    assert y1.shape == (2, 4, 4, 10)
    assert np.all(np.abs(y1) <= 1.0)
    assert np.array_equal(y1, y4)
    with pytest.raises(ValueError):
        qcseis.quantum_forward(x[0])


def test_metrics():
    y = np.zeros(2, dtype=np.float32)
    p = np.array([0, 1], dtype=np.float32)
    assert qcseis.mae(y, p) == pytest.approx(0.5)
    assert qcseis.rmse(y, p) == pytest.approx(math.sqrt(0.5))
    assert math.isinf(qcseis.psnr(p, p))
    s = np.sin(np.arange(64) * 0.3).astype(np.float32)
    assert qcseis.ssim(s, s) == pytest.approx(1.0)
    f, mag = qcseis.amplitude_spectrum(np.sin(2 * np.pi * 10 * np.arange(256) * 0.004), 0.004)
    assert f[int(np.argmax(mag))] == pytest.approx(9.765625)


def test_gather_and_dataset(tmp_path):
    g = qcseis.synth_gather(32, 16, seed=3)
    assert g.shape == (32, 16)
    assert np.max(np.abs(g)) == pytest.approx(1.0)
    assert np.array_equal(g, qcseis.synth_gather(32, 16, seed=3))
    assert qcseis.build_dataset("denoise", tmp_path, n=20, height=16, width=16, seed=1) == (16, 2, 2)
    ds = qcseis.read_seis(tmp_path / "train.seis")
    assert ds["task"] == "denoise"
    assert ds["degraded"].shape == (16, 16, 16)
    assert not np.array_equal(ds["degraded"], ds["target"])


def test_config_validation():
    resolved = qcseis.resolve_config({"data": {"task": "lfe", "height": 64, "width": 32}})
    assert resolved["model"]["kind"] == "unet"
    with pytest.raises(qcseis.ConfigError):
        qcseis.resolve_config({"data": {"task": "denoise"}, "bogus": 1})


def test_train_and_predict(tmp_path):
    data = tmp_path / "data"
    qcseis.build_dataset("denoise", data, n=20, height=16, width=16, seed=2)
    cfg = {
        "data": {"task": "denoise", "n_patches": 20, "height": 16, "width": 16, "seed": 2, "dir": str(data)},
        "model": {"blocks": 1, "base_channels": 8},
        "train": {"epochs": 2, "batch_size": 4, "lr": 1e-3, "seed": 2},
        "out_dir": str(tmp_path / "run"),
    }
    summary = qcseis.train(cfg)
    assert summary["family"] == "gan"
    assert [r["split"] for r in summary["history"]] == ["train", "val", "train", "val"]
    model = qcseis.Model(tmp_path / "run" / "last.qckp")
    assert model.family == "gan"
    test = qcseis.read_seis(data / "test.seis")
    pred = model.predict(test["degraded"])
    assert pred.shape == test["degraded"].shape
    assert np.all(np.isfinite(pred))
    assert np.array_equal(pred, model.predict(test["degraded"]))
