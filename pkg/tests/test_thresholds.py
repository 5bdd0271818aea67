import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from seval._numeric import softmax
from seval.thresholds import (
    ClassThresholdSelector,
    ThresholdFitConfig,
    ThresholdFitReport,
    candidate_thresholds,
    fit_thresholds,
    inverse_frequency_weights,
    selected_accuracy,
)

from .conftest import brute_force_tau

NO_RULES = dict(pi_floor_rule=False)


def random_instance(rng, K=None, C=None, signal=None):
    C = C or int(rng.integers(2, 11))
    K = K or int(rng.integers(C, 201))
    y = rng.integers(0, C, K)
    signal = rng.uniform(0.5, 4.0) if signal is None else signal
    z = rng.normal(0, 1.5, size=(K, C))
    z[np.arange(K), y] += signal
    return softmax(z), y


def test_candidate_thresholds_examples():
    np.testing.assert_allclose(candidate_thresholds([0.2, 0.8]), [0.0, 0.5])
    np.testing.assert_allclose(candidate_thresholds([0.5, 0.5, 0.5]), [0.0])
    np.testing.assert_allclose(candidate_thresholds([]), [0.0])
    np.testing.assert_allclose(candidate_thresholds([0.9, 0.3, 0.6]), [0.0, 0.45, 0.75])


@pytest.mark.parametrize("seed", range(5))
def test_candidates_reach_grid_optimum(seed):
    rng = np.random.default_rng(seed)
    mp = rng.uniform(0.3, 1.0, 40)
    correct = rng.random(40) < 0.7
    t = 0.8

    def gap(tau):
        sel = mp > tau
        return abs(correct[sel].mean() - t) if sel.any() else np.inf

    best_cand = min(gap(c) for c in candidate_thresholds(mp))
    best_grid = min(gap(g) for g in np.arange(0, 1, 1e-4))
    assert np.isclose(best_cand, best_grid)


def test_selected_accuracy_hand_case():
    # class-0 predictions with max-probs 0.9, 0.8, 0.6 and truths 0, 1, 0; plus two class-1 rows
    probs = np.array([[0.9, 0.1], [0.8, 0.2], [0.6, 0.4], [0.3, 0.7], [0.1, 0.9]])
    labels = np.array([0, 1, 0, 1, 1])
    assert selected_accuracy(probs, labels, 0, 0.7) == 0.5
    assert selected_accuracy(probs, labels, 0, 0.0) == pytest.approx(2 / 3)
    assert selected_accuracy(probs, labels, 0, 1.0) is None


def test_selected_accuracy_at_zero_is_plain_precision(rng):
    probs, y = random_instance(rng, K=150, C=4)
    pred = probs.argmax(axis=1)
    for c in range(4):
        if np.any(pred == c):
            assert selected_accuracy(probs, y, c, 0.0) == pytest.approx(np.mean(y[pred == c] == c))


def test_selected_accuracy_rejects_non_probabilities():
    with pytest.raises(ValueError):
        selected_accuracy([[0.5, 0.6]], [0], 0, 0.1)


@pytest.mark.parametrize("seed", range(25))
def test_fit_thresholds_matches_brute_force(seed):
    rng = np.random.default_rng(1000 + seed)
    probs, y = random_instance(rng)
    t = float(rng.uniform(0.3, 0.9))
    report = fit_thresholds(probs, y, None, ThresholdFitConfig(target_t=t, **NO_RULES))
    expected = brute_force_tau(probs, y, np.ones(probs.shape[1]), t)
    np.testing.assert_array_equal(report.tau, expected)


@pytest.mark.parametrize("seed", range(10))
def test_weighted_fit_matches_brute_force(seed):
    rng = np.random.default_rng(2000 + seed)
    probs, y = random_instance(rng)
    w = inverse_frequency_weights(y, probs.shape[1])
    report = fit_thresholds(probs, y, w, ThresholdFitConfig(target_t=0.7, **NO_RULES))
    np.testing.assert_array_equal(report.tau, brute_force_tau(probs, y, w, 0.7))


def test_low_precision_class_falls_back_to_zero():
    # class 0 predicted 4 times, only 2 correct: precision 0.5 <= t
    probs = softmax(np.array([[3.0, 0], [2, 0], [1, 0], [2.5, 0], [0, 3], [0, 2]]))
    y = np.array([0, 1, 0, 1, 1, 1])
    report = fit_thresholds(probs, y, None, ThresholdFitConfig(target_t=0.75, **NO_RULES))
    assert report.tau[0] == 0.0
    assert 0 in report.fallback
    assert report.pi_floor == ()


def test_all_correct_predictions_give_zero_threshold(rng):
    probs, _ = random_instance(rng, K=120, C=5)
    y = probs.argmax(axis=1)
    report = fit_thresholds(probs, y, None, ThresholdFitConfig(target_t=0.8, **NO_RULES))
    predicted = np.unique(y)
    np.testing.assert_array_equal(report.tau[predicted], 0.0)
    assert not set(predicted) & set(report.fallback)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 100))
def test_uniform_weight_scaling_changes_nothing(seed, scale):
    rng = np.random.default_rng(seed)
    probs, y = random_instance(rng)
    w = inverse_frequency_weights(y, probs.shape[1])
    cfg = ThresholdFitConfig(target_t=0.6)
    a, b = fit_thresholds(probs, y, w, cfg), fit_thresholds(probs, y, scale * w, cfg)
    np.testing.assert_array_equal(a.tau, b.tau)
    assert a.fallback == b.fallback and a.pi_floor == b.pi_floor
    for c in range(probs.shape[1]):
        sa, sb = selected_accuracy(probs, y, c, 0.5, w), selected_accuracy(probs, y, c, 0.5, scale * w)
        assert (sa is None and sb is None) or sa == pytest.approx(sb, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_output_range_and_fallbacks(seed):
    rng = np.random.default_rng(seed)
    probs, y = random_instance(rng)
    report = fit_thresholds(probs, y, None, ThresholdFitConfig(target_t=float(rng.uniform(0.1, 0.95))))
    assert np.all((report.tau >= 0) & (report.tau <= 1))
    assert np.all(report.tau[list(report.fallback)] == 0)
    assert set(report.pi_floor) <= set(report.fallback)


def test_selected_mass_non_increasing_in_tau(rng):
    probs, y = random_instance(rng, K=200, C=3)
    pred, mp = probs.argmax(axis=1), probs.max(axis=1)
    for c in range(3):
        masses = [np.sum((pred == c) & (mp > t)) for t in np.linspace(0, 1, 101)]
        assert np.all(np.diff(masses) <= 0)


def _grouped_instance():
    # 4 classes ordered by count: 40, 30, 12, 12; near-perfect classifier
    counts = [40, 30, 12, 12]
    y = np.concatenate([np.full(n, c) for c, n in enumerate(counts)])
    z = np.full((len(y), 4), 0.0)
    z[np.arange(len(y)), y] = 4.0
    return softmax(z), y


def test_group_share_rule_floors_whole_group():
    probs, y = _grouped_instance()
    # class 3 is never predicted: every class-3 sample is pushed to class 0
    z = np.log(probs)
    z[y == 3, 0] = 6.0
    probs = softmax(z)
    cfg = ThresholdFitConfig(target_t=0.5, group_size=2, e1=10, e2=10)
    w = inverse_frequency_weights(y, 4)
    report = fit_thresholds(probs, y, w, cfg)
    # group {2, 3}: weighted predicted share 1/4 of total, threshold 2/(10*4) of total -> kept
    assert report.pi_floor == ()
    cfg_strict = ThresholdFitConfig(target_t=0.5, group_size=1, e1=10, e2=10)
    report = fit_thresholds(probs, y, w, cfg_strict)
    # class 3 alone: predicted share 0 < 1/(10*4)
    assert report.pi_floor == (3,)
    assert report.tau[3] == 0 and 3 in report.fallback


def test_group_count_rule():
    probs, y = _grouped_instance()
    cfg = ThresholdFitConfig(target_t=0.5, group_size=2, e1=10, e2=13)
    report = fit_thresholds(probs, y, inverse_frequency_weights(y, 4), cfg)
    assert report.pi_floor == (2, 3)
    np.testing.assert_array_equal(report.tau[[2, 3]], 0.0)


def test_group_shares_one_threshold_and_remainder_absorbed():
    rng = np.random.default_rng(3)
    probs, y = random_instance(rng, K=200, C=5, signal=3.0)
    cfg = ThresholdFitConfig(target_t=0.9, group_size=2, pi_floor_rule=False)
    order = [0, 1, 2, 3, 4]
    report = fit_thresholds(probs, y, None, cfg, class_order=order)
    assert report.tau[0] == report.tau[1]
    assert report.tau[2] == report.tau[3] == report.tau[4]


def test_group_size_one_equals_per_class(rng):
    probs, y = random_instance(rng, K=180, C=6)
    a = fit_thresholds(probs, y, None, ThresholdFitConfig(target_t=0.7, **NO_RULES))
    np.testing.assert_array_equal(a.tau, brute_force_tau(probs, y, np.ones(6), 0.7))


def test_empty_validation_rejected():
    with pytest.raises(ValueError):
        fit_thresholds(np.empty((0, 3)), np.empty(0, dtype=int))


def test_report_json_round_trip():
    report = ThresholdFitReport(tau=np.array([0.0, 0.42, 0.9]), fallback=(0,), pi_floor=(0,))
    back = ThresholdFitReport.from_json(report.to_json())
    np.testing.assert_array_equal(back.tau, report.tau)
    assert back.fallback == (0,) and back.pi_floor == (0,)
    assert set(report.to_dict()) == {"tau", "fallback", "pi_floor"}
    with pytest.raises(ValueError):
        ThresholdFitReport.from_dict({"tau": [1.5]})


def test_selector_estimator(rng):
    probs, y = random_instance(rng, K=200, C=3, signal=3.0)
    sel = ClassThresholdSelector(target_t=0.9, e2=1).fit(probs, y)
    mask = sel.select(probs)
    assert mask.shape == (200,)
    assert mask.sum() >= 1
    assert clone(sel).get_params()["target_t"] == 0.9
