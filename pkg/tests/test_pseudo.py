import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seval._numeric import softmax
from seval.pseudo import (
    PseudoBatch,
    make_pseudo_batch,
    pseudo_label,
    select_mask,
    unlabeled_risk,
    unlabeled_risk_from_logits,
)


def test_unit_offsets_keep_raw_argmax(rng):
    z = rng.normal(size=(50, 4))
    q, hard = pseudo_label(z, np.ones(4))
    np.testing.assert_array_equal(hard, z.argmax(axis=1))
    np.testing.assert_allclose(q, softmax(z))


def test_tie_goes_to_lowest_class():
    q, hard = pseudo_label([[0.0, 0.0]], [1.0, 1.0])
    np.testing.assert_allclose(q, [[0.5, 0.5]])
    assert hard[0] == 0


def test_offsets_move_pseudo_labels_towards_rare_class():
    q, hard = pseudo_label([[1.0, 0.5]], [np.e, 1.0])
    assert hard[0] == 1
    assert q[0, 1] > 0.5


def test_mask_extremes(rng):
    q = softmax(rng.normal(size=(30, 3)))
    pred = rng.integers(0, 3, 30)
    assert select_mask(q, pred, np.zeros(3)).all()
    assert not select_mask(q, pred, np.ones(3)).any()


def test_mask_is_indexed_by_training_prediction():
    q = np.array([[0.8, 0.2], [0.2, 0.8]])
    np.testing.assert_array_equal(select_mask(q, [0, 1], [0.9, 0.5]), [False, True])
    # same rows, swapped training predictions swap the thresholds used
    np.testing.assert_array_equal(select_mask(q, [1, 0], [0.9, 0.5]), [True, False])


def test_mask_threshold_is_inclusive():
    assert select_mask([[0.75, 0.25]], [0], [0.75, 0.75])[0]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), shift=st.floats(0.0, 0.5))
def test_raising_thresholds_never_adds_samples(seed, shift):
    rng = np.random.default_rng(seed)
    q = softmax(rng.normal(0, 2, size=(40, 4)))
    pred = rng.integers(0, 4, 40)
    tau = rng.uniform(0, 0.5, 4)
    lo, hi = select_mask(q, pred, tau), select_mask(q, pred, tau + shift)
    assert np.all(hi <= lo)


def test_risk_examples():
    p = np.array([[0.5, 0.5], [0.9, 0.1]])
    assert unlabeled_risk([0, 0], [True, False], p) == pytest.approx(-np.log(0.5) / 2)
    assert unlabeled_risk([0, 0], [True, False], p) == pytest.approx(0.3466, abs=1e-4)
    assert unlabeled_risk([0, 1], [False, False], p) == 0.0
    assert unlabeled_risk([0, 1], [True, True], np.eye(2)) == 0.0
    assert unlabeled_risk([], [], np.empty((0, 2))) == 0.0


def test_risk_from_logits_matches_probability_path(rng):
    z = rng.normal(size=(20, 3))
    y = rng.integers(0, 3, 20)
    mask = rng.random(20) < 0.5
    assert unlabeled_risk_from_logits(y, mask, z) == pytest.approx(unlabeled_risk(y, mask, softmax(z)))


def test_risk_rejects_mismatched_mask():
    with pytest.raises(ValueError):
        unlabeled_risk([0, 1], [True], np.eye(2))


def test_pseudo_batch(rng):
    z_hat, z_train = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
    batch = make_pseudo_batch(z_hat, z_train, np.ones(3), np.full(3, 0.5))
    np.testing.assert_array_equal(batch.pred_labels, z_train.argmax(axis=1))
    np.testing.assert_array_equal(batch.hard_labels, z_hat.argmax(axis=1))
    np.testing.assert_array_equal(batch.mask, batch.q.max(axis=1) >= 0.5)
    with pytest.raises(ValueError):
        PseudoBatch(batch.q, batch.hard_labels[:3], batch.pred_labels, batch.mask)
    with pytest.raises(ValueError):
        make_pseudo_batch(z_hat, z_train[:, :2], np.ones(3), np.full(3, 0.5))
