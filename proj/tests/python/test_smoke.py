"""Smoke tests for the python bindings: pinned metric values and a tiny end-to-end run."""

import math

import numpy as np
import pytest

import egogaze as eg

QUAD = np.array([[0.9, 0.1], [0.2, 0.3]])
PEAK = np.array([[1.0, 0.0], [0.0, 0.0]])


def test_version():
    assert eg.__version__ == "0.1.0"


def test_auc_judd_pinned():
    value, degenerate = eg.auc_judd(QUAD, [(1.0, 1.0)])  # fixate the 0.3 cell
    assert value == pytest.approx(5.0 / 6.0, abs=1e-12)
    assert not degenerate

    value, degenerate = eg.auc_judd(np.full((2, 2), 0.5), [(0.0, 0.0)])
    assert value == pytest.approx(0.5)
    assert degenerate


def test_cc_pinned():
    gt = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert eg.cc(PEAK, gt) == pytest.approx(-1.0 / 3.0, abs=1e-12)
    with pytest.raises(ValueError, match="zero variance"):
        eg.cc(np.full((2, 2), 0.25), gt)


def test_kld_pinned():
    pred = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert eg.kld(pred, [(0.0, 0.0)]) == pytest.approx(math.log(2.0), abs=1e-5)
    with pytest.raises(ValueError, match="empty prediction"):
        eg.kld(np.zeros((2, 2)), [(0.0, 0.0)])


def test_sim_pinned():
    gt = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert eg.sim(PEAK, gt) == pytest.approx(0.5, abs=1e-12)


def test_nss_pinned():
    assert eg.nss(PEAK, [(0.0, 0.0)]) == pytest.approx(math.sqrt(3.0), abs=1e-12)
    assert eg.nss(PEAK, [(1.0, 1.0)]) == pytest.approx(-1.0 / math.sqrt(3.0), abs=1e-12)


def test_fixation_grid_is_binary():
    grid = eg.fixation_grid([(0.0, 0.0), (0.0, 0.0), (1.0, 1.0)], 2, 2)
    assert grid.tolist() == [[1.0, 0.0], [0.0, 1.0]]
    # duplicates survive in the coordinate list: both nss samples count
    doubled = eg.nss(PEAK, [(0.0, 0.0), (0.0, 0.0)])
    assert doubled == pytest.approx(math.sqrt(3.0), abs=1e-12)


def test_density_is_normalized():
    dens = eg.density_from_points([(10.0, 20.0), (40.0, 30.0)], 64, 64, 4.0)
    assert dens.shape == (64, 64)
    assert dens.min() >= 0.0
    assert dens.sum() == pytest.approx(1.0, abs=1e-9)


def test_blur_map_preserves_mass():
    rng = np.random.default_rng(3)
    m = rng.random((17, 13))
    blurred = eg.blur_map(m, 2.0)
    assert blurred.shape == m.shape
    assert blurred.sum() == pytest.approx(m.sum(), rel=1e-9)


def test_fit_center_prior_moments():
    points = [(10.0, 20.0), (30.0, 40.0), (50.0, 24.0)]
    prior = eg.fit_center_prior(points, 64, 64)
    assert prior["mean"] == pytest.approx((30.0, 28.0))
    assert prior["grid"].shape == (64, 64)
    assert prior["grid"].min() >= 0.0
    assert prior["grid"].sum() == pytest.approx(1.0, abs=1e-9)


def test_make_split_deterministic():
    ids = [f"p{i:02d}" for i in range(25)]
    train, test = eg.make_split(ids, 0.70, seed=7)
    assert len(train) == 16 and len(test) == 9
    assert sorted(train + test) == sorted(ids)
    assert set(train).isdisjoint(test)
    again = eg.make_split(ids, 0.70, seed=7)
    assert (train, test) == (again[0], again[1])


def test_evaluate_all_skips_constant_frames():
    rng = np.random.default_rng(11)
    preds = [rng.random((32, 32)), np.full((32, 32), 0.5)]
    fixations = [[(4.0, 6.0), (20.0, 10.0)], [(16.0, 16.0)]]
    report = eg.evaluate_all(preds, fixations)
    assert report["frames"] == 2
    assert report["skipped"] == (0, 1, 0, 0, 1)  # cc and nss skip the constant frame
    assert report["degenerate_auc"] == 1
    for key in ("auc_judd", "cc", "kld", "sim", "nss"):
        assert math.isfinite(report[key])


def test_param_count():
    mini = eg.param_count("miniature", "none", seed=17)
    assert mini["frozen"] == 0
    assert 0 < mini["trainable"] == mini["total"]
    desk = eg.param_count("desk", "x3d", seed=17)
    assert desk["frozen"] > 0 and desk["trainable"] > 0
    assert desk["total"] == desk["frozen"] + desk["trainable"]


def test_synth_predict_roundtrip(tmp_path):
    dirs = eg.generate_synthetic(tmp_path / "data", paths=1, seed=5, size=64, duration=2.0, fps=16.0)
    assert len(dirs) == 1
    gaze = eg.load_gaze(dirs[0])
    assert gaze.shape == (32, 3)
    assert np.all(np.isin(gaze[:, 2], (0.0, 1.0)))

    ckpt = tmp_path / "model.egck"
    eg.save_untrained_checkpoint(ckpt, preset="desk", backbone="none", seed=17)
    pred = eg.predict_map(ckpt, dirs[0], window=16, hop=16)
    assert pred.shape == (128, 128)
    assert pred.min() >= 0.0
    assert pred.sum() == pytest.approx(1.0, abs=1e-6)

    second = eg.predict_map(ckpt, dirs[0], window=16, hop=16, window_start=16)
    assert second.shape == pred.shape
    with pytest.raises(RuntimeError, match="window start"):
        eg.predict_map(ckpt, dirs[0], window=16, hop=16, window_start=999)
