"""Seeded long-tailed toy datasets: Gaussian mixtures and imbalanced two-moons."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .metrics import OracleUnlabeled

GENERATORS = ("gaussian_mixture", "two_moons")


def class_counts(n1, gamma, n_classes):
    """Exponentially decaying per-class counts ``round(n1 * gamma ** (-(c-1)/(C-1)))``.

    Halves round up; every class keeps at least one sample.
    """
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if n1 < 1:
        raise ValueError("n1 must be >= 1")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    exponent = -np.arange(n_classes) / (n_classes - 1)
    counts = np.floor(n1 * np.power(float(gamma), exponent) + 0.5).astype(np.int64)
    return np.maximum(counts, 1)


def _counts_for(n1, gamma, n_classes):
    # gamma < 1 encodes a reversed distribution with the head at the last class
    if gamma < 1:
        return class_counts(n1, 1.0 / gamma, n_classes)[::-1].copy()
    return class_counts(n1, gamma, n_classes)


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 10
    n1: int = 500
    m1: int = 4000
    gamma_l: float = 100.0
    gamma_u: float = 100.0
    generator: str = "gaussian_mixture"
    dim: int = 8
    spacing: float = 3.0
    scale: float = 1.0
    scale_jitter: float = 0.5
    noise_sd: float = 0.15
    n_test_per_class: int = 200
    geometry_seed: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"generator must be one of {GENERATORS}")
        if self.generator == "two_moons" and self.n_classes != 2:
            raise ValueError("two_moons requires n_classes = 2")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.n1 < 1 or self.m1 < 0 or self.n_test_per_class < 1:
            raise ValueError("sample counts must be positive")
        if self.gamma_l < 1 or self.gamma_u <= 0:
            raise ValueError("gamma_l must be >= 1 and gamma_u > 0")
        if self.dim < 2 or self.scale <= 0 or self.spacing <= 0 or not 0 <= self.scale_jitter < 1:
            raise ValueError("invalid geometry parameters")

    @property
    def labeled_counts(self):
        return _counts_for(self.n1, self.gamma_l, self.n_classes)

    @property
    def unlabeled_counts(self):
        if self.m1 == 0:
            return np.zeros(self.n_classes, dtype=np.int64)
        return _counts_for(self.m1, self.gamma_u, self.n_classes)

    def to_dict(self):
        return asdict(self)


@dataclass
class SynthDataset:
    X_labeled: np.ndarray
    y_labeled: np.ndarray
    X_unlabeled: np.ndarray
    oracle: OracleUnlabeled
    X_test: np.ndarray
    y_test: np.ndarray

    @property
    def n_classes(self):
        return self.oracle.n_classes


class _Sampler:
    def __init__(self, spec):
        self.spec = spec
        geo = np.random.default_rng(spec.geometry_seed)
        C = spec.n_classes
        if spec.generator == "gaussian_mixture":
            angles = 2 * np.pi * np.arange(C) / C
            means = np.zeros((C, spec.dim))
            means[:, 0] = spec.spacing * np.cos(angles)
            means[:, 1] = spec.spacing * np.sin(angles)
            means[:, 2:] = geo.normal(0.0, spec.spacing / 4, size=(C, spec.dim - 2))
            self.means = means
            self.scales = spec.scale * (1 + spec.scale_jitter * geo.uniform(-1, 1, size=C))

    def draw(self, rng, c, n):
        if self.spec.generator == "gaussian_mixture":
            return self.means[c] + self.scales[c] * rng.standard_normal((n, self.spec.dim))
        t = rng.uniform(0, np.pi, n)
        if c == 0:
            pts = np.column_stack([np.cos(t), np.sin(t)])
        else:
            pts = np.column_stack([1 - np.cos(t), 0.5 - np.sin(t)])
        return pts + self.spec.noise_sd * rng.standard_normal((n, 2))

    def split(self, rng, counts):
        X = [self.draw(rng, c, int(n)) for c, n in enumerate(counts)]
        y = [np.full(int(n), c, dtype=np.int64) for c, n in enumerate(counts)]
        X, y = np.concatenate(X), np.concatenate(y)
        perm = rng.permutation(len(y))
        return X[perm], y[perm]


def generate(spec):
    """Draw labelled, unlabelled and balanced test splits from shared class conditionals."""
    sampler = _Sampler(spec)
    root = np.random.SeedSequence(spec.seed)
    rng_l, rng_u, rng_t = (np.random.default_rng(s) for s in root.spawn(3))
    X_l, y_l = sampler.split(rng_l, spec.labeled_counts)
    X_u, y_u = sampler.split(rng_u, spec.unlabeled_counts)
    X_t, y_t = sampler.split(rng_t, np.full(spec.n_classes, spec.n_test_per_class))
    return SynthDataset(X_l, y_l, X_u, OracleUnlabeled(y_u, spec.n_classes), X_t, y_t)


def weak_augment(X, rng, sd):
    return X + sd * rng.standard_normal(X.shape)


def strong_augment(X, rng, sd, drop_prob=0.2):
    noisy = X + sd * rng.standard_normal(X.shape)
    return noisy * (rng.random(X.shape) >= drop_prob)


def _write_rows(path, header, rows):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    tmp.replace(path)


def export_csv(dataset, directory):
    """Write ``train.csv`` (unlabelled rows have label -1), ``oracle.csv`` and ``test.csv``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    dim = dataset.X_labeled.shape[1]
    header = [f"x{j}" for j in range(dim)] + ["label"]
    train_rows = [[repr(float(v)) for v in x] + [int(t)] for x, t in zip(dataset.X_labeled, dataset.y_labeled)]
    train_rows += [[repr(float(v)) for v in x] + [-1] for x in dataset.X_unlabeled]
    _write_rows(directory / "train.csv", header, train_rows)
    n_l = len(dataset.y_labeled)
    _write_rows(directory / "oracle.csv", ["row", "label"],
                [[n_l + i, int(t)] for i, t in enumerate(dataset.oracle.true_labels)])
    _write_rows(directory / "test.csv", header,
                [[repr(float(v)) for v in x] + [int(t)] for x, t in zip(dataset.X_test, dataset.y_test)])


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def import_csv(directory, n_classes):
    directory = Path(directory)
    _, rows = _read_rows(directory / "train.csv")
    data = np.array([[float(v) for v in r] for r in rows])
    labels = data[:, -1].astype(np.int64)
    X, lab = data[:, :-1], labels >= 0
    _, oracle_rows = _read_rows(directory / "oracle.csv")
    oracle = np.array([int(r[1]) for r in sorted(oracle_rows, key=lambda r: int(r[0]))], dtype=np.int64)
    _, test_rows = _read_rows(directory / "test.csv")
    test = np.array([[float(v) for v in r] for r in test_rows])
    return SynthDataset(X[lab], labels[lab], X[~lab], OracleUnlabeled(oracle, n_classes),
                        test[:, :-1], test[:, -1].astype(np.int64))
