"""Input validation helpers shared by the estimators and functional API."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_logits(logits, n_classes=None, name="logits"):
    """Return ``logits`` as a finite 2-D float array with at least two columns."""
    arr = check_array(logits, dtype=np.float64, ensure_all_finite=True, input_name=name)
    if arr.shape[1] < 2:
        raise ValueError(f"{name} must have at least 2 columns, got {arr.shape[1]}")
    if n_classes is not None and arr.shape[1] != n_classes:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {n_classes}")
    return arr


def check_labels(labels, n_samples, n_classes, name="labels"):
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if y.shape[0] != n_samples:
        raise ValueError(f"{name} has length {y.shape[0]}, expected {n_samples}")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError(f"{name} must be integer class indices")
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"{name} must lie in [0, {n_classes})")
    return y


def check_probabilities(probs, n_classes=None, atol=1e-6, name="probabilities"):
    p = check_logits(probs, n_classes=n_classes, name=name)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"{name} must lie in [0, 1]")
    if not np.allclose(p.sum(axis=1), 1.0, atol=atol):
        raise ValueError(f"rows of {name} must sum to 1")
    return p


def check_offsets(pi, n_classes=None):
    """Validate a positive, finite offset vector."""
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 1:
        raise ValueError("offsets must be a 1-D vector")
    if n_classes is not None and pi.shape[0] != n_classes:
        raise ValueError(f"offsets have length {pi.shape[0]}, expected {n_classes}")
    if not np.all(np.isfinite(pi)) or np.any(pi <= 0):
        raise ValueError("offsets must be positive and finite")
    return pi


def check_thresholds(tau, n_classes=None):
    tau = np.asarray(tau, dtype=np.float64)
    if tau.ndim != 1:
        raise ValueError("thresholds must be a 1-D vector")
    if n_classes is not None and tau.shape[0] != n_classes:
        raise ValueError(f"thresholds have length {tau.shape[0]}, expected {n_classes}")
    if not np.all(np.isfinite(tau)) or np.any(tau < 0) or np.any(tau > 1):
        raise ValueError("thresholds must lie in [0, 1]")
    return tau


def check_class_weights(weights, n_classes):
    if weights is None:
        return np.ones(n_classes)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n_classes,):
        raise ValueError(f"class weights must have shape ({n_classes},)")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("class weights must be positive and finite")
    return w
