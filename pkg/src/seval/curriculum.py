"""Curriculum of (offsets, thresholds) learned on a holdout split of the labelled data."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._numeric import softmax
from ._validation import check_labels, check_logits, check_offsets, check_thresholds
from .offsets import OffsetFitConfig, apply_offsets, fit_offsets, gauge_fix
from .thresholds import ThresholdFitConfig, fit_thresholds, inverse_frequency_weights

INITIAL_TAU = 0.95


@dataclass(frozen=True)
class CurriculumConfig:
    length_L: int = 50
    eta_pi: float = 0.9
    eta_tau: float = 0.9
    total_iters_T: int = 20_000

    def __post_init__(self):
        if self.length_L < 1:
            raise ValueError("length_L must be >= 1")
        if self.total_iters_T < self.length_L:
            raise ValueError("total_iters_T must be >= length_L")
        for name in ("eta_pi", "eta_tau"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def interval(self):
        return self.total_iters_T // self.length_L


def partition(labels, seed, stratified=True):
    """Split labelled indices into two halves ``(train_idx, holdout_idx)``.

    Stratified mode halves every class. Leftover samples of odd-sized classes
    alternate between the holdout and the training half, singleton classes
    first, so the first singleton class always lands in the holdout and the
    halves differ by at most one sample.
    """
    y = np.asarray(labels, dtype=np.int64)
    if y.size == 0:
        raise ValueError("cannot partition an empty labelled set")
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(y.size)
        half = y.size // 2
        return np.sort(perm[:half]), np.sort(perm[half:])

    train, holdout, odd = [], [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        half = idx.size // 2
        train.extend(idx[:half])
        holdout.extend(idx[half:2 * half])
        if idx.size % 2:
            odd.append((idx.size != 1, int(c), idx[-1]))
    for k, (_, _, extra) in enumerate(sorted(odd)):
        (holdout if k % 2 == 0 else train).append(extra)
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(holdout, dtype=np.int64))


def ema_update(prev, new, eta):
    """Elementwise ``eta * prev + (1 - eta) * new``."""
    prev = np.asarray(prev, dtype=np.float64)
    new = np.asarray(new, dtype=np.float64)
    if prev.shape != new.shape:
        raise ValueError("EMA operands must have equal length")
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    return eta * prev + (1 - eta) * new


def step_index(iteration, cfg, phase):
    """Curriculum step for ``iteration`` (1-based).

    ``phase="replay"`` gives ``ceil(iter * L / T)``. ``phase="estimation"`` gives
    the step to estimate at this iteration, or ``None`` if no estimate is due:
    every ``T // L`` iterations for steps ``1..L-1`` and at ``iter == T`` for
    step ``L``.
    """
    T, L = cfg.total_iters_T, cfg.length_L
    if not 1 <= iteration <= T:
        raise ValueError(f"iteration must lie in [1, {T}]")
    if phase == "replay":
        return math.ceil(iteration * L / T)
    if phase == "estimation":
        if iteration == T:
            return L
        if iteration % cfg.interval == 0 and iteration // cfg.interval < L:
            return iteration // cfg.interval
        return None
    raise ValueError("phase must be 'estimation' or 'replay'")


def estimate_step(logits, labels, weights=None, offset_cfg=None, threshold_cfg=None,
                  refine_thresholds=True, offset_sample_weight=None):
    """One parameter estimate on holdout logits: offsets first, then thresholds.

    Thresholds are fitted on the offset-refined probabilities unless
    ``refine_thresholds`` is False. ``weights`` are per-class threshold weights
    (uniform when None). Classes flagged by the small-group rule
    get their offset lowered to the smallest fitted offset.

    Returns ``(pi, report)``.
    """
    z = check_logits(logits)
    y = check_labels(labels, z.shape[0], z.shape[1])
    fit = fit_offsets(z, y, offset_cfg or OffsetFitConfig(), sample_weight=offset_sample_weight)
    pi = fit.pi
    probs = softmax(apply_offsets(z, pi) if refine_thresholds else z)
    report = fit_thresholds(probs, y, weights, threshold_cfg or ThresholdFitConfig())
    if report.pi_floor:
        pi = pi.copy()
        pi[list(report.pi_floor)] = pi.min()
        pi = gauge_fix(pi)
    return pi, report


@dataclass
class CurriculumState:
    """EMA-smoothed curriculum; single writer (the training loop)."""

    n_classes: int
    cfg: CurriculumConfig = field(default_factory=CurriculumConfig)
    pi_ema: np.ndarray = None
    tau_ema: np.ndarray = None
    pi_raw_last: np.ndarray = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.pi_ema is None:
            self.pi_ema = np.ones(self.n_classes)
        if self.tau_ema is None:
            self.tau_ema = np.full(self.n_classes, INITIAL_TAU)
        if self.pi_raw_last is None:
            self.pi_raw_last = np.ones(self.n_classes)

    @property
    def step_l(self):
        return len(self.history)

    def update(self, pi_star, tau_star):
        pi_star = check_offsets(pi_star, self.n_classes)
        tau_star = check_thresholds(tau_star, self.n_classes)
        self.pi_ema = gauge_fix(ema_update(self.pi_ema, pi_star, self.cfg.eta_pi))
        self.tau_ema = np.clip(ema_update(self.tau_ema, tau_star, self.cfg.eta_tau), 0.0, 1.0)
        self.pi_raw_last = pi_star.copy()
        self.history.append((self.pi_ema.copy(), self.tau_ema.copy()))

    def params_at(self, l):
        """(pi, tau) for replay step ``l`` (1-based)."""
        if not 1 <= l <= len(self.history):
            raise IndexError(f"curriculum has no step {l}")
        return self.history[l - 1]

    def to_dict(self):
        return {
            "L": self.cfg.length_L,
            "steps": [{"l": i + 1, "pi": [float(v) for v in pi], "tau": [float(v) for v in tau]}
                      for i, (pi, tau) in enumerate(self.history)],
            "pi_final_raw": [float(v) for v in self.pi_raw_last],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data, cfg=None):
        steps = sorted(data["steps"], key=lambda s: s["l"])
        if [s["l"] for s in steps] != list(range(1, len(steps) + 1)):
            raise ValueError("curriculum steps must be numbered 1..n")
        pi_final = check_offsets(data["pi_final_raw"])
        n_classes = pi_final.size
        if cfg is None:
            cfg = CurriculumConfig(length_L=int(data["L"]), total_iters_T=max(int(data["L"]), 1))
        state = cls(n_classes=n_classes, cfg=cfg)
        for s in steps:
            state.history.append((check_offsets(s["pi"], n_classes), check_thresholds(s["tau"], n_classes)))
        if state.history:
            state.pi_ema, state.tau_ema = (v.copy() for v in state.history[-1])
        state.pi_raw_last = pi_final
        return state

    @classmethod
    def from_json(cls, text, cfg=None):
        return cls.from_dict(json.loads(text), cfg)


class SEVALParameterEstimator(BaseEstimator):
    """Estimate refinement offsets and thresholds from labelled holdout logits.

    ``class_weight="balanced"`` weights threshold fitting by ``1 / k_c``;
    ``offset_class_weight="balanced"`` does the same for the offset objective.
    """

    def __init__(self, target_t=0.75, group_size=1, e1=10, e2=10, pi_floor_rule=True,
                 class_weight="balanced", offset_class_weight=None, refine_thresholds=True):
        self.target_t = target_t
        self.group_size = group_size
        self.e1 = e1
        self.e2 = e2
        self.pi_floor_rule = pi_floor_rule
        self.class_weight = class_weight
        self.offset_class_weight = offset_class_weight
        self.refine_thresholds = refine_thresholds

    def fit(self, X, y):
        z = check_logits(X)
        y = check_labels(y, z.shape[0], z.shape[1])
        balanced = inverse_frequency_weights(y, z.shape[1])
        weights = balanced if self.class_weight == "balanced" else None
        offset_w = balanced[y] if self.offset_class_weight == "balanced" else None
        cfg = ThresholdFitConfig(self.target_t, self.group_size, self.e1, self.e2, self.pi_floor_rule)
        pi, report = estimate_step(z, y, weights, threshold_cfg=cfg, refine_thresholds=self.refine_thresholds,
                                   offset_sample_weight=offset_w)
        self.pi_ = pi
        self.tau_ = report.tau
        self.fallback_ = report.fallback
        self.pi_floor_ = report.pi_floor
        self.n_features_in_ = z.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "pi_")
        return apply_offsets(check_logits(X, n_classes=self.n_features_in_), self.pi_)
