import json
import math

import pytest

import nftindex


def test_adf_hand_example():
    assert nftindex.adf_statistic([1, 2, 4, 7, 11], 0, 4, lag_order=0) == pytest.approx(6.3246, abs=1e-4)


def test_degenerate_window_raises():
    with pytest.raises(nftindex.NumericalError):
        nftindex.adf_statistic([3.0] * 30, 0, 29)
    with pytest.raises(ValueError):
        nftindex.adf_statistic([1.0, 2.0], 0, 5)


def test_undersold_probability():
    assert nftindex.undersold_probability(0.0, 0.0, 0.3) == pytest.approx(0.5)
    assert nftindex.undersold_probability(-0.3, 0.0, 0.3) == pytest.approx(0.841345, abs=1e-6)


def test_detect_bubbles_crafted():
    signal = [0.0] * 100
    for t in range(50, 71):
        signal[t] = 2.0
    assert nftindex.detect_bubbles(signal, [1.0] * 100, 0, 5) == [(50, 71)]


def test_moving_average():
    assert nftindex.moving_average(list(range(1, 11)), 7)[-1] == pytest.approx(7.0)


def test_critical_values_reproducible():
    a = nftindex.critical_values(60, 20, n_paths=200, seed=3)
    b = nftindex.critical_values(60, 20, n_paths=200, seed=3)
    assert a == b
    assert len(a["curves"]) == 3


def test_simulate_fit_index_assess(tmp_path):
    spec = {"n_collections": 3, "assets_per_collection": 80, "n_periods": 15,
            "sales_per_collection_period": 40, "seed": 11}
    truth = nftindex.simulate(spec, tmp_path)
    assert (tmp_path / "sales.jsonl").exists()
    model = nftindex.fit(tmp_path / "assets.jsonl", tmp_path / "sales.jsonl")
    assert model["diagnostics"]["converged"]
    assert abs(model["params"]["sigma"] - 0.3) < 0.05

    idx = nftindex.build_index(model)
    assert idx["levels"][0] == 100.0
    assert len(idx["levels"]) == 15
    true_levels = [100.0 * math.exp(g) for g in truth["gamma"].values()]
    assert max(abs(math.log(a / b)) for a, b in zip(idx["levels"], true_levels)) < 0.15

    coll = sorted(model["params"]["alpha"])[0]
    a = nftindex.assess(model, coll, (0.2, 0.5, 0.9), 3, 1.0)
    assert a["p_under"] > 0.99
    assert a["gamma_source"] == "fitted"
    with pytest.raises(ValueError):
        nftindex.assess(model, "nope", (1, 1, 1), 3, 1.0)


def test_cli_round_trip(tmp_path):
    assert nftindex.run_cli("critvals", "--horizon", 60, "--min-window", 20, "--n-paths", 200,
                            "--out-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "critvals.json").read_text())
    assert doc["command"] == "critvals"
    assert nftindex.run_cli("fit", "--sales", "missing.jsonl") == 2
