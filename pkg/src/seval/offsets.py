"""Per-class logit offsets for pseudo-label refinement.

Offsets ``pi`` act on logits as ``z - log(pi)``. Softmax ignores a common
additive shift, so ``pi`` is only defined up to a positive scale; every vector
returned here is gauge-fixed to geometric mean 1.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from ._numeric import log_softmax, softmax
from ._validation import check_labels, check_logits, check_offsets
from .thresholds import inverse_frequency_weights

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class OffsetFitConfig:
    """Settings for the bound-constrained offset solver (works on ``log pi``)."""

    max_iters: int = 10_000
    step_size: float = 1.0
    tolerance: float = 1e-8
    bounds: tuple[float, float] = (-10.0, 10.0)

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError("bounds must satisfy lower < upper")


@dataclass(frozen=True)
class OffsetFit:
    pi: np.ndarray
    objective: float
    initial_objective: float
    n_iter: int
    converged: bool


def gauge_fix(pi):
    """Rescale ``pi`` so its geometric mean is 1."""
    pi = check_offsets(pi)
    log_pi = np.log(pi)
    return np.exp(log_pi - log_pi.mean())


def apply_offsets(logits, pi):
    """Return ``logits - log(pi)`` column-wise."""
    z = check_logits(logits)
    pi = check_offsets(pi, n_classes=z.shape[1])
    return z - np.log(pi)[None, :]


def offset_objective(logits, labels, log_pi, sample_weight=None):
    """Mean (optionally weighted) cross-entropy of ``softmax(z - log_pi)``."""
    value, _ = _objective_and_grad(np.asarray(logits, float), np.asarray(labels), np.asarray(log_pi, float),
                                   _normalised_weights(sample_weight, len(labels)))
    return value


def _normalised_weights(sample_weight, n):
    if sample_weight is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(sample_weight, dtype=np.float64)
    if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise ValueError("sample_weight must be non-negative, finite and not all zero")
    return w / w.sum()


def _objective_and_grad(z, y, theta, w):
    logp = log_softmax(z - theta[None, :])
    rows = np.arange(len(y))
    picked = logp[rows, y]
    floor = np.log(PROB_FLOOR)
    active = picked > floor
    value = -np.sum(w * np.maximum(picked, floor))
    # d/dtheta_c of -log p_y = 1[y = c] - p_c
    resid = -np.exp(logp)
    resid[rows, y] += 1.0
    grad = (w * active) @ resid
    return value, grad


def fit_offsets(logits, labels, cfg=None, sample_weight=None):
    """Fit offsets minimising holdout cross-entropy of ``softmax(z - log pi)``.

    Projected gradient descent on ``theta = log pi`` inside ``cfg.bounds`` with
    Barzilai-Borwein step proposals and Armijo backtracking. Classes with no
    holdout sample carry no gradient signal and are tied to the mean of the
    fitted coordinates, which maps to ``pi_c = 1`` after gauge fixing.

    Returns an :class:`OffsetFit`; a :class:`ConvergenceWarning` is emitted when
    ``max_iters`` is exhausted, in which case the best iterate is returned.
    """
    cfg = cfg or OffsetFitConfig()
    z = check_logits(logits)
    n, n_classes = z.shape
    if n == 0:
        raise ValueError("holdout must be non-empty")
    y = check_labels(labels, n, n_classes)
    w = _normalised_weights(sample_weight, n)

    present = np.bincount(y, weights=w, minlength=n_classes) > 0
    absent = ~present
    lo, hi = cfg.bounds

    def expand(free):
        theta = np.empty(n_classes)
        theta[present] = free
        theta[absent] = free.mean()
        return theta

    def evaluate(free):
        value, grad = _objective_and_grad(z, y, expand(free), w)
        reduced = grad[present] + grad[absent].sum() / present.sum()
        return value, reduced

    free = np.clip(np.zeros(present.sum()), lo, hi)
    value, grad = evaluate(free)
    initial = value
    step = cfg.step_size
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iters + 1):
        while True:
            candidate = np.clip(free - step * grad, lo, hi)
            delta = candidate - free
            cand_value, cand_grad = evaluate(candidate)
            if cand_value <= value - 1e-4 / step * (delta @ delta) or step < 1e-14:
                break
            step *= 0.5
        decrease = value - cand_value
        if not np.any(delta):
            converged = True
            break
        if cand_value <= value:
            grad_change = cand_grad - grad
            curvature = delta @ grad_change
            free, value, grad = candidate, cand_value, cand_grad
            step = (delta @ delta) / curvature if curvature > 0 else cfg.step_size
            step = float(np.clip(step, 1e-10, 1e10))
        if decrease < cfg.tolerance:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"offset solver stopped after {cfg.max_iters} iterations without meeting tolerance",
            ConvergenceWarning,
            stacklevel=2,
        )
    pi = gauge_fix(np.exp(expand(free)))
    return OffsetFit(pi=pi, objective=float(value), initial_objective=float(initial),
                     n_iter=n_iter, converged=converged)


def la_offsets(class_counts, lam=1.0):
    """Logit-adjustment baseline: ``pi_c = (n_c / sum n) ** lam``, gauge-fixed."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size < 2:
        raise ValueError("class_counts must be a vector with at least 2 entries")
    if np.any(counts <= 0):
        raise ValueError("all class counts must be positive")
    freq = counts / counts.sum()
    return gauge_fix(freq ** lam)


def offsets_to_json(pi):
    pi = check_offsets(pi)
    return json.dumps([float(v) for v in pi])


def offsets_from_json(text):
    data = json.loads(text)
    if not isinstance(data, list) or not data:
        raise ValueError("offset JSON must be a non-empty array")
    if any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in data):
        raise ValueError("offset JSON entries must be numbers")
    return check_offsets(np.array(data, dtype=np.float64))


class LogitOffsetAdjuster(TransformerMixin, BaseEstimator):
    """Learn per-class logit offsets on labelled holdout logits.

    Parameters
    ----------
    class_weight : {None, "balanced"}
        ``"balanced"`` weights each holdout sample by the inverse frequency of
        its class, targeting a uniform class prior.
    max_iters, step_size, tolerance, bounds
        Solver settings, see :class:`OffsetFitConfig`.

    Attributes
    ----------
    pi_ : ndarray of shape (n_classes,)
    objective_ : float
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, class_weight=None, max_iters=10_000, step_size=1.0, tolerance=1e-8,
                 bounds=(-10.0, 10.0)):
        self.class_weight = class_weight
        self.max_iters = max_iters
        self.step_size = step_size
        self.tolerance = tolerance
        self.bounds = bounds

    def fit(self, X, y, sample_weight=None):
        z = check_logits(X)
        y = check_labels(y, z.shape[0], z.shape[1])
        if self.class_weight == "balanced":
            if sample_weight is not None:
                raise ValueError("pass either class_weight='balanced' or sample_weight")
            sample_weight = inverse_frequency_weights(y, z.shape[1])[y]
        elif self.class_weight is not None:
            raise ValueError("class_weight must be None or 'balanced'")
        cfg = OffsetFitConfig(self.max_iters, self.step_size, self.tolerance, tuple(self.bounds))
        fit = fit_offsets(z, y, cfg, sample_weight=sample_weight)
        self.pi_ = fit.pi
        self.objective_ = fit.objective
        self.n_iter_ = fit.n_iter
        self.converged_ = fit.converged
        self.n_features_in_ = z.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "pi_")
        return apply_offsets(check_logits(X, n_classes=self.n_features_in_), self.pi_)

    def predict_proba(self, X):
        return softmax(self.transform(X))

    def predict(self, X):
        return np.argmax(self.transform(X), axis=1)

