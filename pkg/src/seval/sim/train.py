"""Desk-scale semi-supervised training loop with SEVAL and baseline pseudo-labelling."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .._numeric import softmax
from ..curriculum import CurriculumState, estimate_step, partition, step_index
from ..metrics import balanced_accuracy, classwise_pr, correctness, format_metric_rows, gain
from ..offsets import la_offsets
from ..synthdata import generate, strong_augment, weak_augment
from ..thresholds import inverse_frequency_weights
from .baselines import da_refine, flex_like_thresholds, post_hoc_adjust, update_marginal
from .model import EMAParams, ModelSpec, forward, init_params, ssl_objective

log = logging.getLogger(__name__)


@dataclass
class RunRecord:
    n_classes: int
    method: str
    rows: list = field(default_factory=list)
    test_accuracy: float = float("nan")
    test_balanced_accuracy: float = float("nan")
    test_accuracy_posthoc: float = float("nan")
    test_balanced_accuracy_posthoc: float = float("nan")
    test_precision: np.ndarray = None
    test_recall: np.ndarray = None
    final_pi: np.ndarray = None
    final_tau: np.ndarray = None
    curriculum: CurriculumState = None

    def metrics_csv(self):
        return format_metric_rows(self.rows, self.n_classes)

    def curriculum_json(self):
        return None if self.curriculum is None else self.curriculum.to_json()

    def summary(self):
        def floats(a):
            return None if a is None else [None if np.isnan(v) else float(v) for v in a]

        return {
            "method": self.method,
            "test_accuracy": self.test_accuracy,
            "test_balanced_accuracy": self.test_balanced_accuracy,
            "test_accuracy_posthoc": self.test_accuracy_posthoc,
            "test_balanced_accuracy_posthoc": self.test_balanced_accuracy_posthoc,
            "test_precision": floats(self.test_precision),
            "test_recall": floats(self.test_recall),
            "final_pi": floats(self.final_pi),
            "final_tau": floats(self.final_tau),
        }

    def summary_json(self):
        return json.dumps(self.summary(), indent=2)


class _Pseudo:
    """Per-method pseudo-label refinement and thresholds during one training phase."""

    def __init__(self, cfg, n_classes, y_lab, n_unlabeled, pi=None, tau=None):
        self.cfg = cfg
        self.C = n_classes
        self.pi = np.ones(n_classes) if pi is None else pi
        self.tau = np.full(n_classes, cfg.tau) if tau is None else tau
        if cfg.method == "la":
            self.pi = la_offsets(np.maximum(np.bincount(y_lab, minlength=n_classes), 1), cfg.la_lambda)
        if cfg.method == "da":
            self.marginal = np.full(n_classes, 1.0 / n_classes)
            self.target = np.bincount(y_lab, minlength=n_classes) / len(y_lab)
        if cfg.method == "flex_like":
            self.last_pred = np.full(n_unlabeled, -1)
            self.last_conf = np.zeros(n_unlabeled)

    def refine(self, z_hat, update=False, idx=None):
        if self.cfg.method == "da":
            raw = softmax(z_hat)
            if update:
                self.marginal = update_marginal(self.marginal, raw)
            return da_refine(raw, self.marginal, self.target)
        q = softmax(z_hat - np.log(self.pi)[None, :])
        if self.cfg.method == "flex_like" and update:
            self.last_pred[idx] = q.argmax(axis=1)
            self.last_conf[idx] = q.max(axis=1)
        return q

    def thresholds(self):
        if self.cfg.method == "flex_like":
            confident = self.last_pred[self.last_conf >= self.cfg.tau]
            return flex_like_thresholds(np.bincount(confident, minlength=self.C), self.cfg.tau)
        return self.tau


def _sgd_phase(cfg, spec, X_lab, y_lab, X_unl, seed_seq, pseudo, on_step):
    """Run ``cfg.total_iters`` SGD steps; returns (params, ema)."""
    rng_lab, rng_unl = (np.random.default_rng(s) for s in seed_seq.spawn(2))
    params = init_params(spec)
    ema = EMAParams(params, cfg.ema_decay)
    n_l, M = len(y_lab), X_unl.shape[0]
    use_unlabeled = M > 0 and cfg.unlabeled_weight > 0
    for it in range(1, cfg.total_iters + 1):
        li = rng_lab.integers(0, n_l, cfg.batch_labeled)
        if use_unlabeled:
            ui = rng_unl.integers(0, M, cfg.batch_unlabeled)
            xu = X_unl[ui]
            z_hat, _ = forward(ema.shadow, weak_augment(xu, rng_unl, cfg.weak_sd))
            q = pseudo.refine(z_hat, update=True, idx=ui)
            xs = strong_augment(xu, rng_unl, cfg.strong_sd, cfg.drop_prob)
            hard = q.argmax(axis=1)
            tau = pseudo.thresholds()
            strong_logits, _ = forward(params, xs)
            mask = q.max(axis=1) >= tau[strong_logits.argmax(axis=1)]
        else:
            xs = np.empty((0, X_lab.shape[1]))
            hard = np.empty(0, dtype=np.int64)
            mask = np.empty(0, dtype=bool)
        _, grads, _ = ssl_objective(params, X_lab[li], y_lab[li], xs, hard, mask, cfg.unlabeled_weight)
        for p, g in zip(params, grads):
            p -= cfg.lr * g
        ema.update(params)
        on_step(it, params, ema)
    return params, ema


def _evaluate(it, pseudo, params, ema, X_unl, oracle, X_test, y_test, C, gains):
    row = {"iter": it}
    if oracle is not None and X_unl.shape[0] > 0:
        z_hat, _ = forward(ema.shadow, X_unl)
        q = pseudo.refine(z_hat)
        old, new = z_hat.argmax(axis=1), q.argmax(axis=1)
        g = gain(old, new, oracle.true_labels, C)
        gains.append(g)
        live, _ = forward(params, X_unl)
        mask = q.max(axis=1) >= pseudo.thresholds()[live.argmax(axis=1)]
        quantity, quality, corr = correctness(new, mask, oracle.true_labels, C)
        row.update(gain=g, cum_gain=float(np.mean(gains)), quantity=quantity, quality=quality, correctness=corr)
    if X_test is not None:
        pred = forward(ema.shadow, X_test)[0].argmax(axis=1)
        precision, recall = classwise_pr(pred, y_test, C)
        row.update(accuracy=float(np.mean(pred == y_test)), balanced_accuracy=balanced_accuracy(pred, y_test, C))
        for c in range(C):
            row[f"precision_{c}"] = precision[c]
            row[f"recall_{c}"] = recall[c]
    return row


def train_arrays(X_lab, y_lab, X_unl, n_classes, cfg, oracle=None, X_test=None, y_test=None):
    """Train on arrays; returns ``(RunRecord, ema_params)``.

    SEVAL first learns a curriculum on a half split of the labelled data, then
    re-initialises and trains on all labelled data while replaying it. Baselines
    run a single phase with their fixed or heuristic refinement.
    """
    X_lab = np.asarray(X_lab, float)
    y_lab = np.asarray(y_lab, dtype=np.int64)
    X_unl = np.asarray(X_unl, float).reshape(-1, X_lab.shape[1])
    C = n_classes
    root = np.random.SeedSequence(cfg.seed)
    part_seq, est_seq, replay_seq = root.spawn(3)
    init_seeds = root.generate_state(2)
    record = RunRecord(n_classes=C, method=cfg.method)
    curriculum = None

    if cfg.method == "seval":
        ccfg = cfg.curriculum_cfg
        curriculum = CurriculumState(n_classes=C, cfg=ccfg)
        tr, va = partition(y_lab, int(part_seq.generate_state(1)[0]), cfg.stratified_partition)
        X_v, y_v = X_lab[va], y_lab[va]
        weights = inverse_frequency_weights(y_v, C)
        offset_w = weights[y_v] if cfg.offset_class_weight == "balanced" else None
        pseudo = _Pseudo(cfg, C, y_lab[tr], X_unl.shape[0])

        def estimation_hook(it, params, ema):
            l = step_index(it, ccfg, "estimation")
            if l is None:
                return
            z_v, _ = forward(ema.shadow, X_v)
            pi_star, report = estimate_step(z_v, y_v, weights, cfg.offset_cfg, cfg.threshold_cfg,
                                            cfg.refine_thresholds, offset_w)
            curriculum.update(pi_star, report.tau)
            pseudo.pi, pseudo.tau = curriculum.pi_ema, curriculum.tau_ema

        spec = ModelSpec(cfg.model_kind, cfg.hidden_width, X_lab.shape[1], C, int(init_seeds[0]))
        _sgd_phase(cfg, spec, X_lab[tr], y_lab[tr], X_unl, est_seq, pseudo, estimation_hook)
        log.info("curriculum estimated: %d steps", curriculum.step_l)
        pseudo = _Pseudo(cfg, C, y_lab, X_unl.shape[0], *curriculum.params_at(1))
    else:
        pseudo = _Pseudo(cfg, C, y_lab, X_unl.shape[0])

    gains = []

    def replay_hook(it, params, ema):
        if it % cfg.eval_interval == 0 or it == cfg.total_iters:
            record.rows.append(_evaluate(it, pseudo, params, ema, X_unl, oracle, X_test, y_test, C, gains))
        if curriculum is not None and it < cfg.total_iters:
            pseudo.pi, pseudo.tau = curriculum.params_at(step_index(it + 1, cfg.curriculum_cfg, "replay"))

    spec = ModelSpec(cfg.model_kind, cfg.hidden_width, X_lab.shape[1], C, int(init_seeds[1]))
    _, ema = _sgd_phase(cfg, spec, X_lab, y_lab, X_unl, replay_seq, pseudo, replay_hook)

    if curriculum is not None:
        posthoc_pi = curriculum.pi_raw_last
    elif cfg.method == "la":
        posthoc_pi = pseudo.pi
    else:
        posthoc_pi = np.ones(C)
    record.curriculum = curriculum
    record.final_pi = pseudo.pi.copy()
    record.final_tau = np.asarray(pseudo.thresholds(), float).copy()
    if X_test is not None:
        z_test, _ = forward(ema.shadow, X_test)
        pred = z_test.argmax(axis=1)
        adjusted = post_hoc_adjust(z_test, posthoc_pi)
        record.test_accuracy = float(np.mean(pred == y_test))
        record.test_balanced_accuracy = balanced_accuracy(pred, y_test, C)
        record.test_accuracy_posthoc = float(np.mean(adjusted == y_test))
        record.test_balanced_accuracy_posthoc = balanced_accuracy(adjusted, y_test, C)
        record.test_precision, record.test_recall = classwise_pr(pred, y_test, C)
    return record, ema.shadow


def train(spec, cfg):
    """Generate the dataset described by ``spec`` and train on it."""
    data = generate(spec)
    record, _ = train_arrays(data.X_labeled, data.y_labeled, data.X_unlabeled, data.n_classes, cfg,
                             oracle=data.oracle, X_test=data.X_test, y_test=data.y_test)
    return record
