"""Mask post-processing: salient features, overlap diagnostics, renderings.

Aggregated importance is the per-step mean of mask weight over samples,
renormalized to a distribution, so "what did step k attend to" has a single
(K, D) summary regardless of sample count.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .encoder import MaskTensor
from .errors import ConfigError, DataError, EmptyInputError
from .reg_search import aggregated_step_importance

_PNG_METADATA = {"Software": None}  # keep renders byte-identical across runs


@dataclass(frozen=True)
class SaliencePolicy:
    """How "salient" features are picked from aggregated importance."""

    kind: str  # "top_k" | "floor"
    value: float
    cap: int | None = None

    @classmethod
    def top_k(cls, k: int) -> "SaliencePolicy":
        return cls(kind="top_k", value=int(k))

    @classmethod
    def floor(cls, threshold: float, cap: int | None = None) -> "SaliencePolicy":
        return cls(kind="floor", value=float(threshold), cap=cap)

    def describe(self) -> str:
        if self.kind == "top_k":
            return f"top_k(k={int(self.value)})"
        cap = f", cap={self.cap}" if self.cap is not None else ""
        return f"floor(threshold={self.value}{cap})"


DEFAULT_POLICY = SaliencePolicy.floor(0.15, cap=4)


@dataclass
class SalientSummary:
    """Per step: (feature index, feature name, importance), sorted descending."""

    per_step: list[list[tuple[int, str, float]]]
    threshold_policy: str

    @property
    def n_steps(self) -> int:
        return len(self.per_step)

    def feature_indices(self, step: int) -> list[int]:
        return [i for i, _, _ in self.per_step[step]]


def salient_features(
    masks: MaskTensor | np.ndarray,
    feature_names,
    policy: SaliencePolicy = DEFAULT_POLICY,
) -> SalientSummary:
    """Pick each step's salient features from aggregated importance.

    ``top_k`` keeps the k largest (ties broken by lower index); ``floor``
    keeps those at or above the threshold, optionally capped at the largest
    ``cap`` features.
    """
    agg = aggregated_step_importance(masks)
    n_features = agg.shape[1]
    feature_names = list(feature_names)
    if len(feature_names) != n_features:
        raise ConfigError(
            f"got {len(feature_names)} feature names for {n_features} features"
        )
    if policy.kind == "top_k":
        if not 1 <= policy.value <= n_features:
            raise ConfigError(f"top_k k must lie in [1, {n_features}]")
    elif policy.kind == "floor":
        if not 0.0 < policy.value < 1.0:
            raise ConfigError("floor threshold must lie in (0, 1)")
    else:
        raise ConfigError(f"unknown salience policy {policy.kind!r}")

    per_step = []
    for imp in agg:
        ranked = sorted(range(n_features), key=lambda i: (-imp[i], i))
        if policy.kind == "top_k":
            chosen = ranked[: int(policy.value)]
        else:
            chosen = [i for i in ranked if imp[i] >= policy.value]
            if policy.cap is not None:
                chosen = chosen[: policy.cap]
        per_step.append([(i, feature_names[i], float(imp[i])) for i in chosen])
    return SalientSummary(per_step=per_step, threshold_policy=policy.describe())


def overlap_matrix(masks: MaskTensor | np.ndarray) -> np.ndarray:
    """(K, K) mean elementwise-min mass between step masks; diagonal is 1."""
    values = masks.numpy() if isinstance(masks, MaskTensor) else np.asarray(masks)
    if values.ndim != 3 or values.shape[1] == 0:
        raise EmptyInputError("mask tensor has no samples")
    k = values.shape[0]
    if k < 2:
        raise ConfigError("overlap matrix needs at least 2 steps")
    out = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            out[i, j] = np.minimum(values[i], values[j]).sum(axis=1).mean()
    return out


def mean_offdiag_overlap(masks: MaskTensor | np.ndarray) -> float:
    m = overlap_matrix(masks)
    k = m.shape[0]
    return float((m.sum() - np.trace(m)) / (k * (k - 1)))


def _imshow_mask(ax, values: np.ndarray, feature_names, title: str):
    ax.imshow(values, aspect="auto", vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_title(title)
    ax.set_xticks(range(len(feature_names)))
    ax.set_xticklabels(feature_names, rotation=90, fontsize=6)
    ax.set_ylabel("test sample")


def render_heatmap(
    masks: MaskTensor | np.ndarray, feature_names, out_dir
) -> list[Path]:
    """One PNG per step plus a cyclic-pair stack; color scale fixed to [0, 1]."""
    values = masks.numpy() if isinstance(masks, MaskTensor) else np.asarray(masks)
    if values.ndim != 3 or values.shape[1] == 0:
        raise EmptyInputError("mask tensor has no samples")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    feature_names = list(feature_names)
    n_steps = values.shape[0]
    paths = []
    for k in range(n_steps):
        fig, ax = plt.subplots(figsize=(max(4, len(feature_names) * 0.35), 4))
        _imshow_mask(ax, values[k], feature_names, f"mask {k}")
        fig.tight_layout()
        path = out_dir / f"mask_{k}.png"
        fig.savefig(path, metadata=_PNG_METADATA)
        plt.close(fig)
        paths.append(path)

    pairs = [(k, (k + 1) % n_steps) for k in range(n_steps)]
    fig, axes = plt.subplots(
        1, len(pairs), figsize=(max(3, len(feature_names) * 0.3) * len(pairs), 4)
    )
    axes = np.atleast_1d(axes)
    for ax, (i, j) in zip(axes, pairs):
        stacked = np.vstack([values[i], values[j]])
        _imshow_mask(ax, stacked, feature_names, f"Masks {i} & {j}")
        ax.axhline(values.shape[1] - 0.5, color="white", linewidth=1.0)
    fig.tight_layout()
    path = out_dir / "stacked_pairs.png"
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)
    paths.append(path)
    return paths


def export_mask_csvs(
    masks: MaskTensor | np.ndarray, feature_names, out_dir
) -> list[Path]:
    """One CSV per step (mask_<k>.csv): feature-name header, 6-decimal rows."""
    values = masks.numpy() if isinstance(masks, MaskTensor) else np.asarray(masks)
    if values.ndim != 3 or values.shape[1] == 0:
        raise EmptyInputError("mask tensor has no samples")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(values.shape[0]):
        path = out_dir / f"mask_{k}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(feature_names)
            for row in values[k]:
                writer.writerow([f"{v:.6f}" for v in row])
        paths.append(path)
    return paths


def load_mask_csvs(mask_dir) -> tuple[np.ndarray, list[str]]:
    """Read mask_<k>.csv files back into a (K, N, D) array plus names."""
    mask_dir = Path(mask_dir)
    found = {}
    for path in mask_dir.glob("mask_*.csv"):
        m = re.fullmatch(r"mask_(\d+)\.csv", path.name)
        if m:
            found[int(m.group(1))] = path
    if not found:
        raise EmptyInputError(f"no mask_<k>.csv files under {mask_dir}")
    steps = sorted(found)
    if steps != list(range(len(steps))):
        raise DataError(f"mask files are not contiguous: {steps}")
    names = None
    tensors = []
    for k in steps:
        with open(found[k], "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(c) for c in row] for row in reader if row]
        if names is None:
            names = header
        elif header != names:
            raise DataError(f"{found[k]}: feature header differs between steps")
        tensors.append(np.asarray(rows, dtype=np.float64))
    return np.stack(tensors), list(names)
