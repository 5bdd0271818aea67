"""Per-class confidence thresholds tuned to a target pseudo-label precision."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_class_weights, check_labels, check_probabilities, check_thresholds

TIE_ATOL = 1e-12


@dataclass(frozen=True)
class ThresholdFitConfig:
    """``target_t`` is the precision required of selected pseudo-labels.

    ``group_size`` pools consecutive classes (ordered by holdout count,
    descending) into one threshold. ``pi_floor_rule`` enables the small-group
    fallbacks driven by ``e1`` (predicted share) and ``e2`` (class count).
    """

    target_t: float = 0.75
    group_size: int = 1
    e1: float = 10
    e2: int = 10
    pi_floor_rule: bool = True

    def __post_init__(self):
        if not 0 < self.target_t < 1:
            raise ValueError("target_t must lie in (0, 1)")
        if self.group_size < 1:
            raise ValueError("group_size must be >= 1")
        if self.e1 < 1 or self.e2 < 1:
            raise ValueError("e1 and e2 must be >= 1")


@dataclass(frozen=True)
class ThresholdFitReport:
    tau: np.ndarray
    fallback: tuple[int, ...] = field(default_factory=tuple)
    pi_floor: tuple[int, ...] = field(default_factory=tuple)

    def to_dict(self):
        return {"tau": [float(v) for v in self.tau], "fallback": list(self.fallback),
                "pi_floor": list(self.pi_floor)}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        tau = check_thresholds(data["tau"])
        fallback = tuple(sorted(int(c) for c in data.get("fallback", [])))
        pi_floor = tuple(sorted(int(c) for c in data.get("pi_floor", [])))
        for c in fallback + pi_floor:
            if not 0 <= c < len(tau):
                raise ValueError(f"class index {c} out of range")
        return cls(tau=tau, fallback=fallback, pi_floor=pi_floor)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def inverse_frequency_weights(labels, n_classes):
    """Per-class weights ``1 / k_c``; classes absent from ``labels`` get weight 1."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes).astype(float)
    return np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 1.0)


def candidate_thresholds(maxprobs):
    """0 followed by midpoints between consecutive distinct sorted values.

    The selected-sample precision is piecewise constant in the threshold, so
    these points enumerate every non-empty selection.
    """
    values = np.unique(np.asarray(maxprobs, dtype=np.float64))
    if values.size and (values.min() < 0 or values.max() > 1):
        raise ValueError("max-probabilities must lie in [0, 1]")
    return np.concatenate([[0.0], (values[:-1] + values[1:]) / 2])


def selected_accuracy(probs, labels, class_c, tau_c, weights=None):
    """Weighted precision of class-``class_c`` predictions with confidence above ``tau_c``.

    Returns ``None`` when no sample is selected.
    """
    p = check_probabilities(probs)
    y = check_labels(labels, p.shape[0], p.shape[1])
    w = check_class_weights(weights, p.shape[1])[y]
    pred = p.argmax(axis=1)
    chosen = (pred == class_c) & (p.max(axis=1) > tau_c)
    s = np.sum(w * chosen)
    if s == 0:
        return None
    return float(np.sum(w * chosen * (y == class_c)) / s)


def _group_classes(order, group_size):
    n_classes = len(order)
    n_groups = max(n_classes // group_size, 1)
    groups = [list(order[g * group_size:(g + 1) * group_size]) for g in range(n_groups)]
    groups[-1].extend(order[n_groups * group_size:])
    return groups


def _best_threshold(maxprob, sample_w, correct, target_t):
    """Smallest candidate minimising ``|A - t|``; None when nothing is selectable."""
    cands = candidate_thresholds(maxprob)
    order = np.argsort(maxprob, kind="stable")
    mp = maxprob[order]
    # suffix sums: selection "maxprob > tau" keeps the tail of the sorted array
    w_suffix = np.concatenate([np.cumsum(sample_w[order][::-1])[::-1], [0.0]])
    hit_suffix = np.concatenate([np.cumsum((sample_w * correct)[order][::-1])[::-1], [0.0]])
    start = np.searchsorted(mp, cands, side="right")
    s = w_suffix[start]
    ok = s > 0
    if not np.any(ok):
        return None
    gap = np.abs(hit_suffix[start][ok] / s[ok] - target_t)
    best = np.flatnonzero(gap <= gap.min() + TIE_ATOL)[0]
    return float(cands[ok][best])


def fit_thresholds(probs, labels, weights=None, cfg=None, class_order=None):
    """Fit per-class thresholds so selected pseudo-labels reach precision ``cfg.target_t``.

    ``weights`` are per-class (indexed by true label), e.g. inverse holdout
    frequency. ``class_order`` fixes the grouping order; by default classes are
    sorted by holdout count, descending.
    """
    cfg = cfg or ThresholdFitConfig()
    p = check_probabilities(probs)
    n, n_classes = p.shape
    if n == 0:
        raise ValueError("validation set must be non-empty")
    y = check_labels(labels, n, n_classes)
    omega = check_class_weights(weights, n_classes)
    sample_w = omega[y]
    pred = p.argmax(axis=1)
    maxprob = p.max(axis=1)
    true_counts = np.bincount(y, minlength=n_classes)
    if class_order is None:
        class_order = np.argsort(-true_counts, kind="stable")
    class_order = [int(c) for c in class_order]
    if sorted(class_order) != list(range(n_classes)):
        raise ValueError("class_order must be a permutation of class indices")

    tau = np.zeros(n_classes)
    fallback, pi_floor = set(), set()
    total_w = sample_w.sum()
    for group in _group_classes(class_order, cfg.group_size):
        in_group = np.isin(pred, group)
        k_group = sample_w[in_group].sum()
        if cfg.pi_floor_rule:
            share_too_low = k_group < len(group) * total_w / (cfg.e1 * n_classes)
            too_few = any(true_counts[c] < cfg.e2 for c in group)
            if share_too_low or too_few:
                fallback.update(group)
                pi_floor.update(group)
                continue
        correct = (y == pred)[in_group]
        if k_group == 0 or np.sum(sample_w[in_group] * correct) / k_group <= cfg.target_t:
            fallback.update(group)
            continue
        best = _best_threshold(maxprob[in_group], sample_w[in_group], correct, cfg.target_t)
        if best is None:
            fallback.update(group)
            continue
        tau[group] = best
    return ThresholdFitReport(tau=tau, fallback=tuple(sorted(fallback)), pi_floor=tuple(sorted(pi_floor)))


class ClassThresholdSelector(BaseEstimator):
    """Estimator wrapper around :func:`fit_thresholds`.

    ``class_weight="balanced"`` uses ``1 / k_c`` from the fitted labels.
    """

    def __init__(self, target_t=0.75, group_size=1, e1=10, e2=10, pi_floor_rule=True,
                 class_weight="balanced"):
        self.target_t = target_t
        self.group_size = group_size
        self.e1 = e1
        self.e2 = e2
        self.pi_floor_rule = pi_floor_rule
        self.class_weight = class_weight

    def fit(self, X, y):
        p = check_probabilities(X)
        y = check_labels(y, p.shape[0], p.shape[1])
        if self.class_weight == "balanced":
            weights = inverse_frequency_weights(y, p.shape[1])
        elif self.class_weight is None:
            weights = None
        else:
            raise ValueError("class_weight must be None or 'balanced'")
        cfg = ThresholdFitConfig(self.target_t, self.group_size, self.e1, self.e2, self.pi_floor_rule)
        report = fit_thresholds(p, y, weights, cfg)
        self.tau_ = report.tau
        self.fallback_ = report.fallback
        self.pi_floor_ = report.pi_floor
        self.n_features_in_ = p.shape[1]
        return self

    def select(self, q, pred_labels=None):
        """Boolean mask ``max_j q_ij >= tau[pred_i]``; ``pred_labels`` default to ``argmax q``."""
        from .pseudo import select_mask

        check_is_fitted(self, "tau_")
        q = check_probabilities(q, n_classes=self.n_features_in_)
        if pred_labels is None:
            pred_labels = q.argmax(axis=1)
        return select_mask(q, pred_labels, self.tau_)
