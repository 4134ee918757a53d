"""End-to-end sanity of the python surface on tiny inputs."""

import math

import numpy as np
import pytest

import graphevo as ge


def uniform_graph(n, w):
    g = np.full((n, n), w, dtype=float)
    np.fill_diagonal(g, 0.0)
    return g


def test_graph_ops():
    raw = np.array([[0.5, 2.0, -1.0], [0.0, 0.7, 0.4], [0.2, 0.8, 0.3]])
    g = ge.symmetrize_clamp(raw)
    ge.validate(g)
    assert g[0, 1] == pytest.approx(1.0)  # (2.0 + 0.0)/2 = 1.0, at the clamp edge
    assert g[0, 2] == pytest.approx(0.0)  # (-1.0 + 0.2)/2 < 0 clamps
    assert np.array_equal(g, g.T) and np.all(np.diag(g) == 0.0)

    mu, sigma = ge.node_weight_stats(uniform_graph(3, 0.4))
    assert mu == pytest.approx([0.4, 0.4, 0.4])
    assert all(s == ge.SIGMA_FLOOR for s in sigma)  # constant rows hit the floor

    assert ge.node_strength(uniform_graph(3, 0.5)) == pytest.approx([1.0, 1.0, 1.0])

    with pytest.raises(ValueError):
        ge.validate(np.array([[0.0, 2.0], [2.0, 0.0]]))  # out of range


def test_losses_and_metrics():
    a, b = uniform_graph(2, 0.2), uniform_graph(2, 0.5)
    assert ge.l1_loss(a, b) == pytest.approx(0.6)
    assert ge.mae(a, b) == pytest.approx(0.15)
    assert ge.topology_loss(a, b) == pytest.approx(math.sqrt(2 * 0.09))
    assert ge.kl_loss(a, a) == 0.0

    assert ge.kl_gaussian(0, 1, 0, 1) == 0.0
    closed = ge.kl_gaussian(0.3, 0.8, -0.1, 1.2)
    assert ge.kl_gaussian_integrated(0.3, 0.8, -0.1, 1.2) == pytest.approx(closed, abs=1e-6)

    with pytest.raises(ValueError):
        ge.l1_loss(a, uniform_graph(3, 0.5))


def test_dataset_roundtrip(tmp_path):
    subjects = ge.generate_synthetic(n_subjects=4, n_r=8, timepoints=3, seed=2)
    assert len(subjects) == 4
    for sid, graphs in subjects:
        assert len(graphs) == 3
        for g in graphs:
            ge.validate(g)

    manifest = ge.save_dataset(tmp_path / "ds", subjects)
    loaded = ge.load_dataset(manifest)
    assert [sid for sid, _ in loaded] == [sid for sid, _ in subjects]
    for (_, got), (_, want) in zip(loaded, subjects):
        for g, w in zip(got, want):
            assert np.allclose(g, w, atol=1e-12)

    splits = ge.kfold_split(10, 3, seed=1)
    assert len(splits) == 3
    seen = sorted(i for _, test in splits for i in test)
    assert seen == list(range(10))  # every subject held out exactly once


def test_train_predict_deterministic(tmp_path):
    subjects = ge.generate_synthetic(n_subjects=5, n_r=10, timepoints=3, seed=3)

    def fresh():
        return ge.Cascade(n_r=10, epochs=4, seed=11)

    cascade = fresh()
    history = cascade.train(subjects)
    assert len(history) == 4 * cascade.stages
    assert all(math.isfinite(r["g_total"]) for r in history)

    baseline = subjects[0][1][0]
    preds = cascade.predict(baseline)
    assert len(preds) == 2
    for p in preds:
        ge.validate(p)

    maes = ge.evaluate_fold(cascade, subjects)
    assert len(maes) == 2 and all(m >= 0 for m in maes)

    # identical seeds reproduce identical parameters, bit for bit
    twin = fresh()
    twin.train(subjects)
    for p, q in zip(preds, twin.predict(baseline)):
        assert np.array_equal(p, q)

    # checkpoints restore the exact predictions
    cascade.save(tmp_path, "smoke")
    restored = fresh()
    restored.load(tmp_path)
    for p, q in zip(preds, restored.predict(baseline)):
        assert np.array_equal(p, q)


def test_gradient_checks_fast():
    checks = ge.run_gradient_checks()
    assert len(checks) == 8
    assert all(c["pass"] for c in checks)
