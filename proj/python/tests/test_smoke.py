import json

import numpy as np
import pytest

import bmilearn


def tiny(rule="sl_rflo"):
    cfg = json.loads(bmilearn.preset("main_sl"))
    cfg.update(rule=rule, n=20, pretrain_trials=60, train_trials=120, block_size=24, seeds=[0])
    return cfg


def test_presets_round_trip():
    names = bmilearn.preset_names()
    assert "main_sl" in names
    for name in names:
        cfg = json.loads(bmilearn.preset(name))
        assert json.loads(bmilearn.normalize_config(cfg)) == cfg


def test_bad_config_raises():
    cfg = tiny()
    cfg["rule"] = "hebbian"
    with pytest.raises(bmilearn.ConfigError):
        bmilearn.normalize_config(cfg)


def test_run_is_deterministic_and_matches_saved_analysis(tmp_path):
    a = bmilearn.run_experiment(tiny(), seed=3, out=str(tmp_path / "run"))
    b = bmilearn.run_experiment(tiny(), seed=3)
    assert a["late_loss"] == b["late_loss"]
    assert np.array_equal(a["w_bmi"], b["w_bmi"])
    assert a["w_bmi"].shape == (2, 20)
    hyps = {r["hypothesis"] for r in a["analysis"]}
    assert {"sl_true_m", "sl_random_m", "rl"} <= hyps
    again = bmilearn.analyze_run(str(tmp_path / "run"))
    assert [r["ffcc"] for r in again] == [r["ffcc"] for r in a["analysis"]]


def test_welch_matches_scipy():
    stats = pytest.importorskip("scipy.stats")
    x = [0.1, 0.4, 0.35, 0.2, 0.5]
    y = [0.05, 0.1, 0.0, 0.12]
    t, _, p, _ = bmilearn.welch_t(x, y)
    ref = stats.ttest_ind(x, y, equal_var=False)
    assert t == pytest.approx(ref.statistic, rel=1e-10)
    assert p == pytest.approx(ref.pvalue, rel=1e-8)


def test_feedforward_runs():
    r = bmilearn.feedforward("sl", seed=1)
    assert r["final_loss"] < r["initial_loss"]
    assert -1.0 <= r["corr_sl_pred"] <= 1.0
