import math

import numpy as np
import pytest

from cfmf.errors import ConfigError
from cfmf.evaluation import (
    ALGORITHMS, PUBLISHED_K_VALUES, SWEEP_CSV_HEADER, ExperimentConfig, SweepSpec, run_experiment,
    run_sweep, sweep_csv,
)
from cfmf.metrics import mae, relative_change
from cfmf.synthetic import generate_synthetic

FAST = ExperimentConfig(k=4, top_n=5, max_iter=10)


@pytest.fixture(scope="module")
def small():
    return generate_synthetic(60, 40, 3, 0.2, 0.5, "mixed", seed=1)


@pytest.mark.parametrize(
    "pairs, expected",
    [([(5, 5), (3, 3)], 0.0), ([(4, 6)], 2.0), ([(1, 2), (5, 3), (7, 7)], 1.0)],
)
def test_mae_examples(pairs, expected):
    assert mae(pairs) == expected


def test_mae_empty():
    with pytest.raises(ValueError):
        mae([])


def test_relative_change_edges():
    assert relative_change(9.0, 10.0) == pytest.approx(0.1)
    assert relative_change(0.0, 0.0) == 0.0
    assert math.isinf(relative_change(1.0, 0.0))


def test_baseline_report_on_three_ratings(three_ratings):
    rep = run_experiment(three_ratings, "baseline")
    assert rep.algorithm == "baseline"
    assert rep.mae == 1.0
    assert rep.coverage == 1.0
    assert rep.n_test == 1
    assert rep.per_epoch is None


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_every_algorithm_reports(small, algorithm):
    rep = run_experiment(small, algorithm, FAST)
    assert math.isfinite(rep.mae) and rep.mae >= 0
    assert 0 <= rep.coverage <= 1
    assert rep.params["k"] == 4
    if algorithm in ("mf_als", "cf_mf_v1", "cf_mf_v2"):
        assert rep.per_epoch and 1 <= rep.selected_epoch <= len(rep.per_epoch)
    if algorithm.startswith("cf_mf"):
        assert rep.params["lambda3"] == 1.0
    if algorithm == "baseline":
        assert rep.coverage == 1.0


def test_deterministic_mae(small):
    a = run_experiment(small, "cf_mf_v2", FAST)
    b = run_experiment(small, "cf_mf_v2", FAST)
    assert a.mae == b.mae
    assert a.to_dict(include_timing=False) == b.to_dict(include_timing=False)


def test_v2_reduction_gives_v1_mae(small):
    cfg = FAST.with_(lr4=0.0, lambda4=0.0, lr2=0.005)
    assert run_experiment(small, "cf_mf_v2", cfg).mae == run_experiment(small, "cf_mf_v1", cfg).mae


def test_clamp_never_hurts(small):
    plain = run_experiment(small, "cf_user", FAST)
    clamped = run_experiment(small, "cf_user", FAST.with_(clamp=True))
    assert clamped.mae <= plain.mae


def test_literal_baseline_flag_is_far_off(three_ratings):
    rep = run_experiment(three_ratings, "baseline", ExperimentConfig(baseline_literal_eq6=True))
    assert rep.mae == abs(4 + 6 + 4 - 5)


def test_unknown_algorithm(three_ratings):
    with pytest.raises(ValueError):
        run_experiment(three_ratings, "svd", FAST)


def test_empty_test_set_rejected():
    data = generate_synthetic(5, 5, 1, 1.0, 0.0, "pure-bias", seed=0, test_fraction=0.0)
    with pytest.raises(ConfigError):
        run_experiment(data, "baseline")


def test_config_dict_roundtrip():
    cfg = ExperimentConfig(k=7, lr2=0.5, clamp=True)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"kk": 3})


def test_sgd_config_resolution():
    assert ExperimentConfig().sgd("v1").lr2 == 0.005
    assert ExperimentConfig().sgd("v2").lr2 == 0.01
    assert ExperimentConfig(lr2=0.3).sgd("v2").lr2 == 0.3
    assert ExperimentConfig(literal_v2_updates=True).sgd("v2").blend_scaled_updates is False


def test_sweep_cardinality_and_csv(small):
    rows = run_sweep(small, SweepSpec("N", (5, 10), FAST), ["cf_item"])
    assert len(rows) == 2
    assert [r["value"] for r in rows] == [5, 10]
    text = sweep_csv(rows)
    lines = text.splitlines()
    assert lines[0] == ",".join(SWEEP_CSV_HEADER) == "algorithm,axis,value,mae,wall_time_s"
    assert len(lines) == 3
    assert lines[1].startswith("cf_item,N,5,")


def test_sweep_rows_match_single_runs(small):
    spec = SweepSpec("K", (2, 3), FAST)
    rows = run_sweep(small, spec, ["mf_als", "baseline"], n_jobs=3)
    assert [(r["algorithm"], r["value"]) for r in rows] == [
        ("mf_als", 2), ("mf_als", 3), ("baseline", 2), ("baseline", 3)
    ]
    for r in rows:
        assert r["mae"] == run_experiment(small, r["algorithm"], spec.config_for(r["value"])).mae


def test_published_k_grid_row_count():
    spec = SweepSpec("K", PUBLISHED_K_VALUES)
    assert len(spec.values) * 2 == 30


def test_sweep_validation(small):
    with pytest.raises(ValueError):
        run_sweep(small, SweepSpec("N", (5,)), [])
    for values in [(10, 5), (5, 5), (0, 5), ()]:
        with pytest.raises(ValueError):
            SweepSpec("N", values)
    with pytest.raises(ValueError):
        SweepSpec("lambda", (1,))


def test_global_mean_bounds_baseline_on_bias_data():
    data = generate_synthetic(200, 100, 2, 0.2, 0.5, "pure-bias", seed=3)
    rep = run_experiment(data, "baseline")
    const = float(np.mean(np.abs(data.test.ratings - data.train.ratings.mean())))
    assert rep.mae <= const
