import json
import math

import numpy as np
import pytest

import tube


def test_expit_logit():
    assert tube.expit(0.0) == 0.5
    assert tube.logit(tube.expit(1.7)) == pytest.approx(1.7)


def test_saturated_logistic():
    design = np.array([[1.0, 0.0], [1.0, 1.0]])
    beta = tube.fit_fractional_logistic(np.array([0.2, 0.8]), design)
    assert beta == pytest.approx([math.log(0.25), 2 * math.log(4)], abs=1e-6)


def test_score_auc_hand_value():
    auc = tube.score_auc(np.array([1.0, 2, 3, 4]), np.array([0.1, 0.2, 0.8, 0.9]))
    assert auc == pytest.approx(3.5 / 4)


def test_generate_is_deterministic():
    a = tube.generate_dataset("a", N=500, n=50, seed=3)
    b = tube.generate_dataset("a", N=500, n=50, seed=3)
    assert np.array_equal(a["x"], b["x"])
    assert np.isnan(a["y_star"][50:]).all()
    assert not np.isnan(a["y_star"][:50]).any()


def test_fit_end_to_end():
    d = tube.generate_dataset("a", N=1500, n=150, seed=11)
    cfg = json.dumps({"bases": {"default_df": 4}})
    r = tube.fit(d["x"], d["g"], d["y_star"], config=cfg, bootstrap=0)
    assert r["beta"].shape == (5,)
    assert r["beta"][1] > 0
    assert 0.5 < r["auc"] <= 1.0
    assert r["omega"] == pytest.approx([0.5] * 5)
    assert r["stage2_violations"] == 0
    assert json.loads(r["bundle"])["schema"] == "tube.bundle"


def test_errors_surface():
    with pytest.raises(tube.TubeError):
        tube.fit(np.zeros((3, 1)), np.zeros((3, 1)), np.array([1.3, np.nan, 0.0]))
    with pytest.raises(tube.TubeError):
        tube.fit(np.zeros((3, 1)), np.zeros((3, 1)), np.array([1.0, np.nan, 0.0]), config='{"nope": 1}')
