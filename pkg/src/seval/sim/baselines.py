"""Comparison refinements and thresholds used by the simulator's baseline methods."""

from __future__ import annotations

import numpy as np

from .._validation import check_logits
from ..offsets import apply_offsets

DA_MARGINAL_FLOOR = 1e-8


def da_refine(q, running_marginal, target_prior):
    """Distribution alignment: ``q_ic * target_c / marginal_c``, renormalised per row."""
    q = np.asarray(q, dtype=np.float64)
    ratio = np.asarray(target_prior, float) / np.maximum(np.asarray(running_marginal, float), DA_MARGINAL_FLOOR)
    out = q * ratio[None, :]
    return out / out.sum(axis=1, keepdims=True)


def update_marginal(running_marginal, q, decay=0.999):
    return decay * np.asarray(running_marginal) + (1 - decay) * np.asarray(q).mean(axis=0)


def flex_like_thresholds(confident_counts, tau_base):
    """``tau_c = tau_base * count_c / max_j count_j``; all ``tau_base`` when no class has counts."""
    counts = np.asarray(confident_counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    top = counts.max()
    if top == 0:
        return np.full(counts.shape, float(tau_base))
    return tau_base * counts / top


def post_hoc_adjust(test_logits, pi_final_raw):
    """Argmax of ``z - log pi`` on test logits."""
    z = check_logits(test_logits)
    return np.argmax(apply_offsets(z, pi_final_raw), axis=1)
