"""Tiny softmax classifiers with hand-written backprop, plus an EMA copy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._numeric import log_softmax

MODEL_KINDS = ("linear_softmax", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "mlp"
    hidden_width: int = 64
    input_dim: int = 2
    n_classes: int = 2
    init_seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}")
        if self.hidden_width < 1 or self.input_dim < 1 or self.n_classes < 2:
            raise ValueError("invalid model dimensions")


def init_params(spec):
    rng = np.random.default_rng(spec.init_seed)
    d, C = spec.input_dim, spec.n_classes
    if spec.kind == "linear_softmax":
        return [rng.normal(0, 0.01, (d, C)), np.zeros(C)]
    h = spec.hidden_width
    return [
        rng.normal(0, np.sqrt(2.0 / d), (d, h)), np.zeros(h),
        rng.normal(0, np.sqrt(1.0 / h), (h, C)), np.zeros(C),
    ]


def forward(params, X):
    """Return ``(logits, cache)``."""
    if len(params) == 2:
        W, b = params
        return X @ W + b, (X,)
    W1, b1, W2, b2 = params
    pre = X @ W1 + b1
    hidden = np.maximum(pre, 0.0)
    return hidden @ W2 + b2, (X, pre, hidden)


def backward(params, cache, dlogits):
    """Gradients of a scalar loss w.r.t. ``params`` given ``d loss / d logits``."""
    if len(params) == 2:
        (X,) = cache
        return [X.T @ dlogits, dlogits.sum(axis=0)]
    _, _, W2, _ = params
    X, pre, hidden = cache
    dW2 = hidden.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dhidden = (dlogits @ W2.T) * (pre > 0)
    return [X.T @ dhidden, dhidden.sum(axis=0), dW2, db2]


def ssl_objective(params, X_lab, y_lab, X_strong, pseudo_labels, mask, unlabeled_weight):
    """Labelled cross-entropy plus weighted masked unlabelled risk, with its gradient.

    Pseudo-labels and the mask are constants (no gradient flows through them).
    The unlabelled term averages over all unlabelled rows, selected or not.
    """
    n_l = X_lab.shape[0]
    X = np.concatenate([X_lab, X_strong])
    logits, cache = forward(params, X)
    logp = log_softmax(logits)
    rows = np.arange(X.shape[0])
    targets = np.concatenate([y_lab, pseudo_labels])
    row_w = np.concatenate([np.full(n_l, 1.0 / n_l),
                            unlabeled_weight * np.asarray(mask, float) / max(X_strong.shape[0], 1)])
    loss = -np.sum(row_w * logp[rows, targets])
    dlogits = np.exp(logp)
    dlogits[rows, targets] -= 1.0
    dlogits *= row_w[:, None]
    return float(loss), backward(params, cache, dlogits), logits


class EMAParams:
    """Exponential moving average of a parameter list: ``s <- d * s + (1 - d) * p``."""

    def __init__(self, params, decay):
        if not 0 <= decay <= 1:
            raise ValueError("decay must lie in [0, 1]")
        self.decay = decay
        self.shadow = [p.copy() for p in params]

    def update(self, params):
        d = self.decay
        for s, p in zip(self.shadow, params):
            s *= d
            s += (1 - d) * p
