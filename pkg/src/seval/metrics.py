"""Pseudo-label diagnostics: Gain, Correctness, per-class precision/recall, case taxonomy.

Undefined ratios (0/0) are reported as ``nan``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ._validation import check_labels


@dataclass(frozen=True)
class OracleUnlabeled:
    """Hidden labels of the unlabelled pool; evaluation only."""

    true_labels: np.ndarray
    n_classes: int

    @property
    def class_counts(self):
        return np.bincount(self.true_labels, minlength=self.n_classes)


class Case(IntEnum):
    HIGH_RECALL_LOW_PRECISION = 1
    LOW_RECALL_HIGH_PRECISION = 2
    HIGH_RECALL_HIGH_PRECISION = 3
    LOW_RECALL_LOW_PRECISION = 4


def gain(old_labels, new_labels, true_labels, n_classes, class_counts=None):
    """Sample-wise plus class-wise accuracy gain of ``new_labels`` over ``old_labels``.

    Classes with zero oracle count are skipped in the class-wise term.
    """
    y = check_labels(true_labels, len(true_labels), n_classes, name="true_labels")
    old = check_labels(old_labels, len(y), n_classes, name="old_labels")
    new = check_labels(new_labels, len(y), n_classes, name="new_labels")
    m = len(y)
    if m == 0:
        return 0.0
    counts = np.bincount(y, minlength=n_classes) if class_counts is None else np.asarray(class_counts)
    new_hit = (new == y).astype(float)
    old_hit = (old == y).astype(float)
    sample_term = (new_hit.sum() - old_hit.sum()) / m
    new_per_class = np.bincount(new, weights=new_hit, minlength=n_classes)
    old_per_class = np.bincount(old, weights=old_hit, minlength=n_classes)
    seen = counts > 0
    class_term = np.sum((new_per_class[seen] - old_per_class[seen]) / (counts[seen] * n_classes))
    return float(sample_term + class_term)


def cumulative_gain(values):
    """Running mean ``sum_{j<=i} G(j) / i``."""
    g = np.asarray(values, dtype=np.float64)
    return np.cumsum(g) / np.arange(1, g.size + 1)


def correctness(hard_labels, mask, true_labels, n_classes, weights=None):
    """Return ``(quantity, quality, correctness)`` with class weights ``1 / m_c`` by default.

    When nothing is selected, quality and correctness are 0.
    """
    y = check_labels(true_labels, len(true_labels), n_classes, name="true_labels")
    hard = check_labels(hard_labels, len(y), n_classes, name="hard_labels")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != y.shape:
        raise ValueError("mask length must match labels")
    if weights is None:
        counts = np.bincount(y, minlength=n_classes).astype(float)
        weights = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
    w = np.asarray(weights, dtype=np.float64)[y]
    correct_mass = np.sum(w * (hard == y) * mask)
    total = w.sum()
    selected = np.sum(w * mask)
    quantity = correct_mass / total if total > 0 else 0.0
    quality = correct_mass / selected if selected > 0 else 0.0
    return float(quantity), float(quality), float(quantity * quality)


def pseudo_batch_correctness(pseudo, oracle, tau=None):
    """:func:`correctness` for a :class:`~seval.pseudo.PseudoBatch`; ``tau`` recomputes the mask."""
    mask = pseudo.mask
    if tau is not None:
        from .pseudo import select_mask

        mask = select_mask(pseudo.q, pseudo.pred_labels, tau)
    return correctness(pseudo.hard_labels, mask, oracle.true_labels, oracle.n_classes)


def confusion(pred_labels, true_labels, n_classes):
    y = check_labels(true_labels, len(true_labels), n_classes, name="true_labels")
    pred = check_labels(pred_labels, len(y), n_classes, name="pred_labels")
    return np.bincount(y * n_classes + pred, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def classwise_pr(pred_labels, true_labels, n_classes):
    """Per-class ``(precision, recall)`` arrays; ``nan`` where undefined."""
    cm = confusion(pred_labels, true_labels, n_classes)
    tp = np.diag(cm).astype(float)
    predicted = cm.sum(axis=0)
    actual = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, np.nan)
        recall = np.where(actual > 0, tp / actual, np.nan)
    return precision, recall


def balanced_accuracy(pred_labels, true_labels, n_classes):
    _, recall = classwise_pr(pred_labels, true_labels, n_classes)
    return float(np.nanmean(recall))


def case_taxonomy(precision, recall):
    """Tag each class by recall/precision relative to the cross-class mean.

    "High" means strictly above the mean over classes where the value is
    defined; undefined values count as low.
    """
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    if np.all(np.isnan(precision)):
        raise ValueError("at least one class needs a defined precision")
    high_p = np.nan_to_num(precision, nan=-np.inf) > np.nanmean(precision)
    high_r = np.nan_to_num(recall, nan=-np.inf) > np.nanmean(recall)
    tags = np.where(high_r & ~high_p, Case.HIGH_RECALL_LOW_PRECISION,
                    np.where(~high_r & high_p, Case.LOW_RECALL_HIGH_PRECISION,
                             np.where(high_r & high_p, Case.HIGH_RECALL_HIGH_PRECISION,
                                      Case.LOW_RECALL_LOW_PRECISION)))
    return [Case(int(t)) for t in tags]


def estimated_precision(train_probs, n_classes=None):
    """Confidence-based precision estimate ``sum_i 1[argmax=c] max p_i / sum_i p_ic``."""
    p = np.asarray(train_probs, dtype=np.float64)
    n_classes = p.shape[1] if n_classes is None else n_classes
    pred = p.argmax(axis=1)
    num = np.bincount(pred, weights=p.max(axis=1), minlength=n_classes)
    den = p.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, np.nan)


METRIC_COLUMNS = ["iter", "gain", "cum_gain", "quantity", "quality", "correctness",
                  "balanced_accuracy", "accuracy"]


def metric_header(n_classes):
    cols = list(METRIC_COLUMNS)
    for c in range(n_classes):
        cols += [f"precision_{c}", f"recall_{c}"]
    return cols


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if np.isnan(value):
        return ""
    return repr(value)


def format_metric_rows(rows, n_classes):
    """Render metric rows (dicts) as CSV text with a mandatory header."""
    header = metric_header(n_classes)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in header])
    return buf.getvalue()
