"""Tabular dataset ingestion, deterministic splits, and synthetic benchmarks.

Real CSV files are label-encoded in first-seen order with a reserved
missing-value token per categorical column.  The synthetic generators draw
11-dimensional standard-normal features and Bernoulli labels whose success
probability depends on a small, known feature subset, so mask faithfulness
can be scored against ground truth.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyInputError,
    ParseError,
    SchemaError,
)

SYNTHETIC_DIM = 11

# Relevant feature sets of the fixed-subset generators (0-indexed).
_RELEVANT = {
    "syn1": (0, 1),
    "syn2": (2, 3, 4, 5),
    "syn3": (6, 7, 8, 9),
}
# Switching generators pick one branch per sample based on the sign of
# feature 10, which is therefore always relevant itself.
_SWITCH = {
    "syn4": ("syn1", "syn2"),
    "syn5": ("syn1", "syn3"),
    "syn6": ("syn2", "syn3"),
}
SYNTHETIC_KINDS = tuple(sorted(_RELEVANT) + sorted(_SWITCH))


@dataclass
class Dataset:
    """Encoded feature matrix plus labels and per-feature metadata.

    ``X`` is (N, D) float64 with no undefined entries; ``y`` holds integer
    class labels in {0..C-1}.  ``categorical_maps`` records the raw-string
    to code mapping per categorical column and ``missing_token`` the code
    reserved for absent values in that column.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    categorical_maps: dict[str, dict[str, int]] = field(default_factory=dict)
    missing_token: dict[str, int] = field(default_factory=dict)
    task: str = "binary"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.validate()

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.y.max()) + 1 if self.y.size else 0

    def validate(self):
        if self.X.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {self.X.shape}")
        if len(self.y) != self.X.shape[0]:
            raise DataError(
                f"len(y)={len(self.y)} does not match N={self.X.shape[0]}"
            )
        if len(self.feature_names) != self.X.shape[1]:
            raise DataError("feature_names length does not match D")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("feature_names must be unique")
        if not np.isfinite(self.X).all():
            raise DataError("X contains undefined entries after encoding")
        if self.y.size and self.y.min() < 0:
            raise DataError("labels must be non-negative")
        if self.task not in ("binary", "multiclass"):
            raise DataError(f"unknown task {self.task!r}")

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(
            X=self.X[indices],
            y=self.y[indices],
            feature_names=list(self.feature_names),
            categorical_maps=self.categorical_maps,
            missing_token=self.missing_token,
            task=self.task,
        )

    def to_csv(self, path, target_column: str = "y"):
        """Write the encoded dataset back out as UTF-8, comma-delimited CSV."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(self.feature_names) + [target_column])
            for row, label in zip(self.X, self.y):
                writer.writerow([f"{float(v):.17g}" for v in row] + [int(label)])


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test fractions plus the shuffle seed."""

    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if not all(0.0 < f < 1.0 for f in fracs):
            raise ConfigError(f"split fractions must lie in (0,1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fracs)!r}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass(frozen=True)
class SyntheticSpec:
    """Which synthetic benchmark to draw and how many samples.

    ``feature_permutation``, when given, relabels columns so that output
    column j holds generator column ``feature_permutation[j]``; ground-truth
    indices are remapped accordingly.  It exists because published accounts
    of this benchmark family disagree on which indices the third generator
    uses, so the mapping is configuration rather than a hard-coded guess.
    """

    kind: str
    n_train: int = 10_000
    n_test: int = 10_000
    seed: int = 0
    dim: int = SYNTHETIC_DIM
    feature_permutation: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.lower())
        if self.kind not in SYNTHETIC_KINDS:
            raise ConfigError(
                f"unknown synthetic kind {self.kind!r}; expected one of {SYNTHETIC_KINDS}"
            )
        if self.dim != SYNTHETIC_DIM:
            raise ConfigError(f"dim is fixed at {SYNTHETIC_DIM}")
        if self.n_train <= 0 or self.n_test <= 0:
            raise ConfigError("n_train and n_test must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.feature_permutation is not None:
            perm = tuple(self.feature_permutation)
            if sorted(perm) != list(range(self.dim)):
                raise ConfigError("feature_permutation must permute 0..10")
            object.__setattr__(self, "feature_permutation", perm)


def load_csv(path, target_column: str, categorical_columns=()) -> Dataset:
    """Load a headered CSV into an encoded :class:`Dataset`.

    Categorical cells are label-encoded in first-seen order; empty cells in
    categorical columns map to a per-column missing token whose code is one
    past the largest observed code.  All other columns must parse as real
    numbers.  Labels are densified to {0..C-1}: numeric label values keep
    their ascending order, string labels are coded in first-seen order.
    """
    categorical_columns = list(categorical_columns)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise SchemaError(f"{path}: target column {target_column!r} not in header")
        for col in categorical_columns:
            if col not in header:
                raise SchemaError(f"{path}: categorical column {col!r} not in header")

        target_idx = header.index(target_column)
        feature_names = [h for i, h in enumerate(header) if i != target_idx]
        if len(set(feature_names)) != len(feature_names):
            raise SchemaError(f"{path}: duplicate feature names in header")
        cat_set = set(categorical_columns) - {target_column}

        cat_maps: dict[str, dict[str, int]] = {c: {} for c in cat_set}
        columns: list[list[float | None]] = [[] for _ in feature_names]
        raw_labels: list[str] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {line_no} has {len(row)} cells, expected {len(header)}"
                )
            feat_i = 0
            for col_i, cell in enumerate(row):
                if col_i == target_idx:
                    raw_labels.append(cell.strip())
                    continue
                name = header[col_i]
                cell = cell.strip()
                if name in cat_set:
                    if cell == "":
                        columns[feat_i].append(None)  # missing token, coded later
                    else:
                        code = cat_maps[name].setdefault(cell, len(cat_maps[name]))
                        columns[feat_i].append(float(code))
                else:
                    try:
                        columns[feat_i].append(float(cell))
                    except ValueError:
                        raise ParseError(
                            f"{path}: row {line_no}, column {name!r}: "
                            f"cannot parse {cell!r} as a number"
                        ) from None
                feat_i += 1

    if not raw_labels:
        raise EmptyInputError(f"{path}: no data rows")

    missing_token: dict[str, int] = {}
    for name in cat_set:
        missing_token[name] = len(cat_maps[name])
    for feat_i, name in enumerate(feature_names):
        if name in cat_set:
            code = float(missing_token[name])
            columns[feat_i] = [code if v is None else v for v in columns[feat_i]]

    X = np.array(columns, dtype=np.float64).T
    y = _densify_labels(raw_labels)
    task = "binary" if int(y.max()) + 1 == 2 else "multiclass"
    return Dataset(
        X=X,
        y=y,
        feature_names=feature_names,
        categorical_maps=cat_maps,
        missing_token=missing_token,
        task=task,
    )


def _densify_labels(raw_labels: list[str]) -> np.ndarray:
    try:
        numeric = [float(v) for v in raw_labels]
    except ValueError:
        numeric = None
    if numeric is not None and all(v == int(v) for v in numeric):
        values = sorted(set(int(v) for v in numeric))
        mapping = {v: i for i, v in enumerate(values)}
        return np.array([mapping[int(v)] for v in numeric], dtype=np.int64)
    mapping = {}
    codes = [mapping.setdefault(v, len(mapping)) for v in raw_labels]
    return np.array(codes, dtype=np.int64)


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint index partition via seeded shuffle.

    Split sizes are floor(frac * n); leftover rows go to the training split.
    """
    if n < 10:
        raise ConfigError(f"need at least 10 rows to split, got {n}")
    n_val = math.floor(spec.val_frac * n)
    n_test = math.floor(spec.test_frac * n)
    n_train = n - n_val - n_test
    perm = np.random.default_rng(spec.seed).permutation(n)
    return (
        perm[:n_train],
        perm[n_train : n_train + n_val],
        perm[n_train + n_val :],
    )


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Partition a dataset into (train, val, test) per the spec's fractions."""
    idx_train, idx_val, idx_test = split_indices(ds.n_samples, spec)
    return ds.subset(idx_train), ds.subset(idx_val), ds.subset(idx_test)


def _branch_score(kind: str, X: np.ndarray) -> np.ndarray:
    """Log-scale score whose exponential is the odds against class 1."""
    if kind == "syn1":
        return X[:, 0] * X[:, 1]
    if kind == "syn2":
        return np.sum(X[:, 2:6] ** 2, axis=1) - 4.0
    if kind == "syn3":
        return (
            -10.0 * np.sin(2.0 * X[:, 6])
            + 2.0 * np.abs(X[:, 7])
            + X[:, 8]
            + np.exp(-X[:, 9])
        )
    raise ConfigError(f"unknown branch kind {kind!r}")


def label_probability(kind: str, X: np.ndarray) -> np.ndarray:
    """P(Y=1 | X) for a synthetic generator, on generator-order columns.

    The class-1 probability is 1 / (1 + exp(score)); switching kinds pick
    the branch score by the sign of feature 10.
    """
    kind = kind.lower()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != SYNTHETIC_DIM:
        raise ConfigError(f"X must be (N, {SYNTHETIC_DIM}) for synthetic kinds")
    if kind in _RELEVANT:
        score = _branch_score(kind, X)
    elif kind in _SWITCH:
        low, high = _SWITCH[kind]
        score = np.where(
            X[:, 10] < 0, _branch_score(low, X), _branch_score(high, X)
        )
    else:
        raise ConfigError(f"unknown synthetic kind {kind!r}")
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(score))


def relevant_features(kind: str, X: np.ndarray) -> list[list[int]]:
    """Ground-truth relevant feature indices per sample (generator order)."""
    kind = kind.lower()
    if kind in _RELEVANT:
        base = list(_RELEVANT[kind])
        return [base for _ in range(len(X))]
    low, high = _SWITCH[kind]
    low_set = list(_RELEVANT[low]) + [10]
    high_set = list(_RELEVANT[high]) + [10]
    return [low_set if x10 < 0 else high_set for x10 in X[:, 10]]


def generate_synthetic(
    spec: SyntheticSpec,
) -> tuple[Dataset, Dataset, list[list[int]]]:
    """Draw a synthetic benchmark: (train, test, test ground-truth features).

    Features are i.i.d. standard normal; labels are Bernoulli with the
    kind-specific class-1 probability.  The returned ground-truth list gives,
    for every test row, the feature indices its label probability depends on.
    """
    rng = np.random.default_rng(spec.seed)
    n_total = spec.n_train + spec.n_test
    X = rng.standard_normal((n_total, spec.dim))
    p = label_probability(spec.kind, X)
    y = (rng.random(n_total) < p).astype(np.int64)
    truth = relevant_features(spec.kind, X[spec.n_train :])

    names = [f"f{i}" for i in range(spec.dim)]
    if spec.feature_permutation is not None:
        perm = list(spec.feature_permutation)
        inverse = {orig: out for out, orig in enumerate(perm)}
        X = X[:, perm]
        truth = [sorted(inverse[i] for i in row) for row in truth]

    def _make(lo, hi):
        return Dataset(
            X=X[lo:hi],
            y=y[lo:hi],
            feature_names=list(names),
            task="binary",
        )

    train_ds = _make(0, spec.n_train)
    test_ds = _make(spec.n_train, n_total)
    return train_ds, test_ds, truth
