"""Command-line entry point: ``seval {estimate,train,eval,sweep}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .curriculum import estimate_step
from .metrics import balanced_accuracy, classwise_pr, correctness, format_metric_rows, gain
from .pseudo import pseudo_label, select_mask
from .sim.config import METHODS, ConfigError, config_hash, load_config, resolved_dict
from .sim.train import train
from .thresholds import ThresholdFitConfig, inverse_frequency_weights

log = logging.getLogger("seval")

EXIT_OK, EXIT_BAD_INPUT, EXIT_NUMERIC = 0, 2, 3
OUTPUT_ROOT_ENV = "SEVAL_OUTPUT_ROOT"


class InputError(ValueError):
    pass


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def read_prediction_dump(path, need_logits=True):
    """Parse ``sample_id,label,logit_0..`` rows; returns ``(ids, labels, logits)``.

    Errors carry the 1-based line number of the offending row.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: line 1: missing header")
    header = [h.strip() for h in rows[0]]
    n_logits = len(header) - 2
    expected = ["sample_id", "label"] + [f"logit_{c}" for c in range(n_logits)]
    if header != expected:
        raise InputError(f"{path}: line 1: header must be sample_id,label,logit_0,...")
    if need_logits and n_logits < 2:
        raise InputError(f"{path}: line 1: need at least 2 logit columns")
    ids, labels, logits = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            label = int(row[1])
            values = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise InputError(f"{path}: line {lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in values):
            raise InputError(f"{path}: line {lineno}: non-finite logit")
        if label < -1 or (n_logits and label >= n_logits):
            raise InputError(f"{path}: line {lineno}: label {label} out of range")
        ids.append(row[0])
        labels.append(label)
        logits.append(values)
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate sample_id")
    return ids, np.array(labels, dtype=np.int64), np.array(logits, dtype=np.float64).reshape(len(ids), n_logits)


def _estimate(args):
    _, labels, logits = read_prediction_dump(args.dump)
    if labels.size == 0:
        raise InputError(f"{args.dump}: no rows")
    if np.any(labels < 0):
        line = int(np.flatnonzero(labels < 0)[0]) + 2
        raise InputError(f"{args.dump}: line {line}: estimation needs a label on every row")
    C = logits.shape[1]
    weights = inverse_frequency_weights(labels, C) if args.weights == "inverse-frequency" else None
    cfg = ThresholdFitConfig(args.target_t, args.group_size, args.e1, args.e2, not args.no_floor_rule)
    pi, report = estimate_step(logits, labels, weights, threshold_cfg=cfg)
    if not (np.all(np.isfinite(pi)) and np.all(np.isfinite(report.tau))):
        raise FloatingPointError("estimation produced non-finite parameters")
    payload = {"pi": [float(v) for v in pi], **report.to_dict()}
    text = json.dumps(payload, indent=2) + "\n"
    if args.output:
        atomic_write(args.output, text)
    sys.stdout.write(text)


def _overrides(args):
    out = {}
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects section.field=value, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    for flag, key in (("seed", "train.seed"), ("method", "train.method"), ("total_iters", "train.total_iters")):
        if getattr(args, flag, None) is not None:
            out[key] = getattr(args, flag)
    return out


def run_directory(root, spec, cfg):
    return Path(root) / f"{config_hash(spec, cfg)}-seed{cfg.seed}"


def _train(args):
    spec, cfg = load_config(args.config, _overrides(args))
    root = args.output_root or os.environ.get(OUTPUT_ROOT_ENV) or "runs"
    out = run_directory(root, spec, cfg)
    resolved = json.dumps(resolved_dict(spec, cfg), indent=2, sort_keys=True) + "\n"
    if args.dry_run:
        sys.stdout.write(resolved)
        sys.stdout.write(f"output directory: {out}\n")
        return
    record = train(spec, cfg)
    summary = record.summary()
    if not np.isfinite(record.test_balanced_accuracy):
        raise FloatingPointError("training diverged")
    atomic_write(out / "metrics.csv", record.metrics_csv())
    if record.curriculum is not None:
        atomic_write(out / "curriculum.json", record.curriculum_json() + "\n")
    atomic_write(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    atomic_write(out / "config.json", resolved)
    log.info("wrote %s", out)
    sys.stdout.write(f"{out}\n")


def _read_oracle(path):
    ids, labels, _ = read_prediction_dump(path, need_logits=False)
    if np.any(labels < 0):
        raise InputError(f"{path}: oracle rows need labels")
    return dict(zip(ids, labels))


def evaluate_dumps(pseudo_path, oracle_path, params_path):
    """Metric row for pseudo-labels in ``pseudo_path`` judged against ``oracle_path``.

    Rows are joined on ``sample_id`` and processed in sorted id order, so the
    result does not depend on row order. The mask uses each row's own refined
    prediction to index the thresholds.
    """
    ids, _, logits = read_prediction_dump(pseudo_path)
    oracle = _read_oracle(oracle_path)
    if set(ids) != set(oracle):
        raise InputError("sample_id sets of the pseudo and oracle dumps differ")
    try:
        params = json.loads(Path(params_path).read_text(encoding="utf-8"))
        tau = np.asarray(params["tau"], dtype=np.float64)
        pi = np.asarray(params.get("pi") or np.ones(logits.shape[1]), dtype=np.float64)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{params_path}: {exc}") from exc
    C = logits.shape[1]
    if tau.shape != (C,) or pi.shape != (C,):
        raise InputError(f"{params_path}: expected {C} values for tau and pi")
    order = np.argsort(np.array(ids, dtype=object), kind="stable")
    z = logits[order]
    y = np.array([oracle[ids[i]] for i in order], dtype=np.int64)
    old = z.argmax(axis=1)
    q, new = pseudo_label(z, pi)
    mask = select_mask(q, new, tau)
    g = gain(old, new, y, C)
    quantity, quality, corr = correctness(new, mask, y, C)
    precision, recall = classwise_pr(new, y, C)
    row = {"gain": g, "cum_gain": g, "quantity": quantity, "quality": quality, "correctness": corr,
           "balanced_accuracy": balanced_accuracy(new, y, C), "accuracy": float(np.mean(new == y))}
    for c in range(C):
        row[f"precision_{c}"] = precision[c]
        row[f"recall_{c}"] = recall[c]
    return format_metric_rows([row], C)


def _eval(args):
    sys.stdout.write(evaluate_dumps(args.pseudo_dump, args.oracle_dump, args.params))


def _sweep_cell(job):
    spec, cfg = job
    rec = train(spec, cfg)
    return rec.test_accuracy, rec.test_balanced_accuracy, rec.test_balanced_accuracy_posthoc


SWEEP_COLUMNS = ["gamma", "method", "n_seeds",
                 "accuracy_mean", "accuracy_sd",
                 "balanced_accuracy_mean", "balanced_accuracy_sd",
                 "balanced_accuracy_posthoc_mean", "balanced_accuracy_posthoc_sd"]


def sweep(spec, cfg, gammas, methods, seeds, jobs=1):
    """Summary CSV text with population mean and sd per (gamma, method), in grid order."""
    grid = [(g, m) for g in gammas for m in methods]
    work = [(replace(spec, gamma_l=g, gamma_u=g), replace(cfg, method=m, seed=s))
            for g, m in grid for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, work))
    else:
        results = [_sweep_cell(w) for w in work]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    n = len(seeds)
    for k, (g, m) in enumerate(grid):
        vals = np.array(results[k * n:(k + 1) * n])
        stats = []
        for j in range(vals.shape[1]):
            stats += [repr(float(vals[:, j].mean())), repr(float(vals[:, j].std()))]
        writer.writerow([repr(float(g)), m, n] + stats)
    return buf.getvalue()


def _number_list(text, kind):
    try:
        values = [kind(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad list {text!r}: {exc}") from exc
    if not values:
        raise InputError("empty list")
    return values


def _sweep(args):
    spec, cfg = load_config(args.config, _overrides(args))
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise InputError(f"unknown method {m!r}")
    text = sweep(spec, cfg, _number_list(args.gamma_list, float), methods,
                 _number_list(args.seeds, int), args.jobs)
    if args.output:
        atomic_write(args.output, text)
    sys.stdout.write(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="seval", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="fit offsets and thresholds on a labelled prediction dump")
    p.add_argument("dump")
    p.add_argument("--target-t", type=float, default=0.75)
    p.add_argument("--group-size", type=int, default=1)
    p.add_argument("--e1", type=float, default=10)
    p.add_argument("--e2", type=int, default=10)
    p.add_argument("--weights", choices=("uniform", "inverse-frequency"), default="inverse-frequency")
    p.add_argument("--no-floor-rule", action="store_true", help="disable the small-group fallback rules")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_estimate)

    def run_flags(p):
        p.add_argument("config")
        p.add_argument("--seed", type=int)
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--total-iters", type=int)
        p.add_argument("--set", action="append", metavar="SECTION.FIELD=VALUE")

    p = sub.add_parser("train", help="run one simulation from a JSON/TOML config")
    run_flags(p)
    p.add_argument("--output-root", help=f"defaults to ${OUTPUT_ROOT_ENV} or ./runs")
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=_train)

    p = sub.add_parser("eval", help="score pseudo-labels against oracle labels")
    p.add_argument("pseudo_dump")
    p.add_argument("oracle_dump")
    p.add_argument("params", help="JSON with 'tau' and optionally 'pi'")
    p.set_defaults(func=_eval)

    p = sub.add_parser("sweep", help="grid over imbalance ratios, methods and seeds")
    run_flags(p)
    p.add_argument("--gamma-list", required=True)
    p.add_argument("--seeds", default="0")
    p.add_argument("--methods", default="fixed_threshold,seval")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"seval: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"seval: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
