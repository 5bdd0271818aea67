"""Refined pseudo-labels, per-class confidence masks and the masked unlabelled risk."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._numeric import log_softmax, softmax
from ._validation import check_labels, check_logits, check_thresholds
from .offsets import apply_offsets


@dataclass(frozen=True)
class PseudoBatch:
    q: np.ndarray
    hard_labels: np.ndarray
    pred_labels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        n = self.q.shape[0]
        if not (len(self.hard_labels) == len(self.pred_labels) == len(self.mask) == n):
            raise ValueError("PseudoBatch fields must share the sample count")


def pseudo_label(unlabeled_logits, pi):
    """Return ``(q, hard_labels)`` with ``q = softmax(z - log pi)``.

    Ties in the argmax go to the lowest class index.
    """
    q = softmax(apply_offsets(unlabeled_logits, pi))
    return q, np.argmax(q, axis=1)


def select_mask(q, pred_labels, tau):
    """``mask_i = max_j q_ij >= tau[pred_labels_i]``.

    The threshold is indexed by the training-pathway prediction, not by the
    pseudo-label.
    """
    q = np.asarray(q, dtype=np.float64)
    tau = check_thresholds(tau, n_classes=q.shape[1])
    pred = check_labels(pred_labels, q.shape[0], q.shape[1], name="pred_labels")
    return q.max(axis=1) >= tau[pred]


def make_pseudo_batch(pseudo_logits, train_logits, pi, tau):
    q, hard = pseudo_label(pseudo_logits, pi)
    train_logits = check_logits(train_logits, n_classes=q.shape[1], name="train_logits")
    pred = np.argmax(train_logits, axis=1)
    return PseudoBatch(q=q, hard_labels=hard, pred_labels=pred, mask=select_mask(q, pred, tau))


def unlabeled_risk(hard_labels, mask, train_probs):
    """Masked cross-entropy averaged over all ``M`` samples (unselected rows add 0)."""
    p = np.asarray(train_probs, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    y = check_labels(hard_labels, p.shape[0], p.shape[1], name="hard_labels")
    if mask.shape != y.shape:
        raise ValueError("mask and hard_labels must have the same length")
    if p.shape[0] == 0:
        return 0.0
    picked = p[np.arange(len(y)), y][mask]
    return float(-np.sum(np.log(np.maximum(picked, 1e-12))) / p.shape[0])


def unlabeled_risk_from_logits(hard_labels, mask, train_logits):
    """Same as :func:`unlabeled_risk` but numerically safe on raw logits."""
    logp = log_softmax(train_logits)
    y = np.asarray(hard_labels)
    mask = np.asarray(mask, dtype=bool)
    return float(-np.sum(logp[np.arange(len(y)), y][mask]) / logp.shape[0])
