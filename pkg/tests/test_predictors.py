import numpy as np
import pytest

from greencrete.dataset import BUCKETS, AgeBucket, Formula
from greencrete.predictors import (
    RegressionMetrics,
    TrainConfig,
    evaluate_impact_predictor,
    evaluate_strength_predictors,
    metrics,
    predict_impacts,
    predict_impacts_batch,
    predict_strength,
    predict_strength_batch,
    train_impact_predictor,
    train_strength_predictors,
)


def a_formula():
    return Formula(300, 100, 50, 180, 8, 1000, 750)


# --- metrics -------------------------------------------------------------------

def test_metrics_perfect_prediction():
    m = metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert (m.mae, m.rmse, m.r2) == (0.0, 0.0, 1.0)


def test_metrics_constant_mean_gives_zero_r2():
    targets = [1.0, 2.0, 3.0]
    m = metrics([2.0, 2.0, 2.0], targets)
    assert m.r2 == pytest.approx(0.0)


def test_metrics_zero_variance_targets_flagged():
    m = metrics([1.0, 2.0, 3.0], [2.0, 2.0, 2.0])
    assert m.mae == pytest.approx(2.0 / 3.0)
    assert m.rmse == pytest.approx(np.sqrt(2.0 / 3.0))
    assert m.r2 is None
    assert m.nrmse is None


def test_metrics_rmse_at_least_mae():
    rng = np.random.Generator(np.random.PCG64(1))
    for _ in range(50):
        p = rng.standard_normal(20)
        t = rng.standard_normal(20)
        m = metrics(p, t)
        assert m.rmse >= m.mae
        assert m.r2 <= 1.0


def test_metrics_r2_one_only_for_exact():
    m = metrics([1.0, 2.0, 3.001], [1.0, 2.0, 3.0])
    assert m.r2 < 1.0


def test_metrics_rejects_bad_lengths():
    with pytest.raises(ValueError):
        metrics([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        metrics([], [])


def test_metrics_invariant_enforced():
    with pytest.raises(ValueError):
        RegressionMetrics(mae=2.0, rmse=1.0, r2=None, nrmse=None)


def test_metrics_nrmse_is_range_scaled():
    m = metrics([1.0, 2.0, 4.0], [1.0, 2.0, 3.0])
    assert m.nrmse == pytest.approx(m.rmse / 2.0)


# --- impact predictor -------------------------------------------------------------

def test_impact_predictor_untrained_is_near_chance(small_dataset):
    predictor = train_impact_predictor(small_dataset, TrainConfig(epochs=0, seed=0))
    evaluated = evaluate_impact_predictor(predictor, small_dataset)
    assert all(m.r2 is None or m.r2 < 0.5 for m in evaluated.values())


def test_impact_predictor_learns_affine_labels(small_dataset):
    predictor = train_impact_predictor(small_dataset, TrainConfig(epochs=120, seed=1))
    evaluated = evaluate_impact_predictor(predictor, small_dataset)
    for m in evaluated.values():
        assert m.r2 is not None and m.r2 > 0.9


def test_impact_predictor_deterministic(small_dataset):
    a = train_impact_predictor(small_dataset, TrainConfig(epochs=4, seed=5))
    b = train_impact_predictor(small_dataset, TrainConfig(epochs=4, seed=5))
    for wa, wb in zip(a.network.weights, b.network.weights):
        assert np.array_equal(wa, wb)


def test_predict_impacts_repeatable(tiny_models):
    _, impacts, _ = tiny_models
    a = predict_impacts(impacts, a_formula())
    b = predict_impacts(impacts, a_formula())
    assert a == b
    assert a.gwp >= 0 and a.ap >= 0 and a.cbw >= 0


def test_predict_impacts_at_column_minima_finite(small_dataset, tiny_models):
    _, impacts, _ = tiny_models
    lows = [small_dataset.normalization.ranges[c][0]
            for c in ("cement", "blast_furnace_slag", "fly_ash", "water",
                      "superplasticizer", "coarse_aggregate", "fine_aggregate")]
    out = predict_impacts(impacts, Formula(*lows))
    assert np.all(np.isfinite(out.as_array()))


def test_predict_impacts_batch_matches_single(tiny_models):
    _, impacts, _ = tiny_models
    batch = predict_impacts_batch(impacts, a_formula().as_array()[None, :])[0]
    single = predict_impacts(impacts, a_formula()).as_array()
    assert batch == pytest.approx(single, rel=1e-12)


# --- strength predictors ------------------------------------------------------------

def test_strength_predictors_cover_buckets_and_repeatable(tiny_models):
    _, _, strengths = tiny_models
    assert set(strengths.models) == set(BUCKETS)
    a = predict_strength(strengths, a_formula(), AgeBucket.D28)
    b = predict_strength(strengths, a_formula(), AgeBucket.D28)
    assert a == b
    assert np.isfinite(a) and a > 0


def test_strength_unknown_bucket_rejected(tiny_models):
    _, _, strengths = tiny_models
    with pytest.raises(KeyError):
        predict_strength_batch(strengths, a_formula().as_array()[None, :], "D29")


def test_strength_provenance_stays_in_bucket(small_dataset, tiny_models):
    _, _, strengths = tiny_models
    train_ids = set(small_dataset.train_ids)
    for bucket, ids in strengths.provenance.items():
        assert set(ids) <= train_ids
        assert all(small_dataset.records[i].bucket == bucket for i in ids)


def test_strength_metrics_reported_per_bucket(small_dataset, tiny_models):
    _, _, strengths = tiny_models
    evaluated = evaluate_strength_predictors(strengths, small_dataset)
    for bucket, m in evaluated.items():
        assert np.isfinite(m.mae) and np.isfinite(m.rmse)
        assert m.rmse >= m.mae


def test_strength_training_missing_bucket_errors(small_dataset, fixture_factors):
    from greencrete.dataset import Dataset
    # drop every D14 record; retains a valid split over the remaining buckets
    keep = [r.raw for r in small_dataset.records if r.bucket != AgeBucket.D14]
    ds = Dataset.build(keep, fixture_factors, seed=1)
    with pytest.raises(ValueError, match="D14"):
        train_strength_predictors(ds, TrainConfig(epochs=1, seed=0))


def test_checkpoint_dir_roundtrip(tmp_path, tiny_models):
    _, _, strengths = tiny_models
    paths = strengths.save_dir(tmp_path)
    assert len(paths) == 6
    from greencrete.predictors import StrengthPredictorSet
    again = StrengthPredictorSet.load_dir(tmp_path)
    got = predict_strength(again, a_formula(), AgeBucket.D7)
    want = predict_strength(strengths, a_formula(), AgeBucket.D7)
    assert got == want


def test_impact_checkpoint_roundtrip(tmp_path, tiny_models):
    _, impacts, _ = tiny_models
    from greencrete.predictors import ImpactPredictor
    impacts.save(tmp_path / "imp.json")
    again = ImpactPredictor.load(tmp_path / "imp.json")
    assert predict_impacts(again, a_formula()) == predict_impacts(impacts, a_formula())
