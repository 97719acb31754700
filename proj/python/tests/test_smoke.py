import math
import os
from pathlib import Path

import pytest

import crowdsim

CONFIGS = Path(os.environ.get("CROWDSIM_CONFIGS", Path(__file__).resolve().parents[2] / "configs"))


def test_aggregate():
    assert crowdsim.aggregate([1, 2, 2, 5], "mean") == 2.5
    assert crowdsim.aggregate([1, 2, 2, 5], "median") == 2.0
    assert crowdsim.aggregate([3, 1, 1, 3], "majority") == 1.0
    with pytest.raises(crowdsim.ConfigError):
        crowdsim.aggregate([1], "mode")


def test_metrics():
    pred = [("a", 2.0, []), ("b", 0.0, [])]
    ref = [("a", 1.0, []), ("b", 1.0, [])]
    m = crowdsim.metrics(pred, ref)
    assert m.mae == pytest.approx(1.0)
    assert m.rmse == pytest.approx(1.0)
    assert m.problems == 2


def test_truth_inference():
    rows = [(w, f"t{t}", float(t % 2)) for w in ("x", "y", "z") for t in range(4)]
    ds = crowdsim.dawid_skene(rows, [0, 1])
    assert list(ds["labels"]) == [0, 1, 0, 1]
    assert crowdsim.glad(rows, [0, 1])["labels"] == ds["labels"]


def test_intervals():
    t = crowdsim.tolerance_interval(10, 0.1, 10.0, 0.0, 0.0)
    assert t.branch == "h1"
    assert t.half_width == pytest.approx(2.064, abs=1e-3)
    assert crowdsim.normal_quantile_two_sided(0.05) == pytest.approx(1.959964, abs=1e-6)
    c = crowdsim.confidence_interval([2, 4, 3], [0.5, 0.5, 0.5], [1, 1], 0.0, 0.05, 0.0)
    assert c.center == 3.0 and c.half_width == 0.0
    assert crowdsim.smoothing_w1_bound(0.1, 1.0) == pytest.approx(math.sqrt(2 / math.pi) * 0.1)


def test_zero_net_reproduces_reference():
    assert crowdsim.zero_net_crowd_mean([0.1, 0.2], [1.0], 3.25, 1, 5) == 3.25


def test_tiny_sweep():
    cfg = {
        "seed": 3,
        "n_workers": [2],
        "tasks_per_worker": [3],
        "response_error": [0.5],
        "belief_diversity": [0.0],
        "repetitions": 1,
        "test_virtual_workers": 3,
        "world": {"n_problems": 8, "feature_dim": 4},
        "train": {"epochs": 2, "batch_size": 4, "J": 1},
    }
    a = crowdsim.run_sweep(cfg)
    assert len(a["cells"]) == 1
    assert a == crowdsim.run_sweep(cfg)


def test_run_step_fixture(tmp_path):
    summary = crowdsim.run_step("evaluate", CONFIGS / "evaluate_fixture.json", tmp_path)
    assert summary
    assert (tmp_path / "reports" / "report.json").exists()
    with pytest.raises(crowdsim.DataError):
        crowdsim.run_step("evaluate", CONFIGS / "missing.json", tmp_path)
