"""Smoke tests for the python bindings: build a model, train a little,
check the invariants that define the architecture."""

import math
import os
import subprocess

import numpy as np
import pytest

import ecgnn


def make_model(task=ecgnn.Task.word, seed=3, d=16):
    cfg = ecgnn.ModelConfig()
    cfg.d_c = cfg.d_v = cfg.d_q = d
    cfg.d = d
    cfg.task = task
    cfg.n_classes = 3
    cfg.n_candidates = 5
    cfg.seed = seed
    return ecgnn.Model(cfg)


def test_generate_and_shapes():
    data = ecgnn.generate(ecgnn.Task.word, seed=1, n_samples=8, dim=16, n_classes=3)
    assert len(data) == 8
    s = data.sample(0)
    assert s.f_c.shape[1] == 16
    assert 0 <= s.answer < 3


def test_forward_deterministic_and_simplex():
    data = ecgnn.generate(ecgnn.Task.word, seed=2, n_samples=4, dim=16, n_classes=3)
    model = make_model()
    s = data.sample(0)
    a = model.predict(s)
    b = model.predict(s)
    assert a["loss"] == b["loss"]
    np.testing.assert_array_equal(a["probs"], b["probs"])
    assert abs(a["probs"].sum() - 1.0) < 1e-12

    diag = model.forward_diag(s)
    assert diag["s_a_width"] == 3 * 16
    for g in diag["adjacencies"]:
        np.testing.assert_allclose(g.sum(axis=1), 1.0, atol=1e-9)
        assert (g > 0).all()
    for w in diag["cam_weights"]:
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-9)
    assert len(diag["fusion"]) == 1
    steps = diag["fusion"][0]["steps"]
    assert len(steps) == 3  # N_r
    for step in steps:
        np.testing.assert_allclose(step["alpha"].sum(), 1.0, atol=1e-9)
        for key in ("att_caption", "att_video", "att_question"):
            np.testing.assert_allclose(step[key].sum(), 1.0, atol=1e-9)


def test_training_reduces_loss():
    data = ecgnn.generate(ecgnn.Task.word, seed=5, n_samples=64, dim=16, n_classes=3)
    model = make_model(seed=5)
    losses = ecgnn.train(model, data, epochs=5, lr=2e-3, batch_size=16)
    assert losses[-1] < losses[0]
    metrics = ecgnn.evaluate(model, data)
    assert metrics.is_accuracy
    assert 0.0 <= metrics.value <= 1.0


def test_gradcheck():
    out = ecgnn.gradcheck(seed=1, points=25)
    assert out["ok"], f"worst rel err {out['worst_rel_err']}"


def test_tensor_file_roundtrip(tmp_path):
    arr = np.random.default_rng(0).normal(size=(5, 7))
    path = str(tmp_path / "t.ecgf")
    ecgnn.write_tensor(path, arr)
    back = ecgnn.read_tensor(path)
    np.testing.assert_allclose(back, arr, rtol=2.0**-20)


def test_checkpoint_roundtrip(tmp_path):
    model = make_model(seed=9)
    data = ecgnn.generate(ecgnn.Task.word, seed=9, n_samples=4, dim=16, n_classes=3)
    before = model.loss(data.sample(0))
    path = str(tmp_path / "m.ecgc")
    ecgnn.save_checkpoint(path, model)
    loaded = ecgnn.load_checkpoint(path)
    assert loaded.loss(data.sample(0)) == before


def test_dataset_disk_roundtrip(tmp_path):
    data = ecgnn.generate(ecgnn.Task.choice, seed=11, n_samples=6, dim=16)
    ecgnn.write_dataset(str(tmp_path / "ds"), data)
    back = ecgnn.load_dataset(str(tmp_path / "ds"))
    assert len(back) == 6
    assert back.n_candidates == 5


def test_cli_available():
    cli = os.environ.get("ECGNN_CLI")
    if not cli:
        pytest.skip("ECGNN_CLI not set")
    out = subprocess.run([cli, "gradcheck", "--points", "10"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "gradcheck=pass" in out.stdout
