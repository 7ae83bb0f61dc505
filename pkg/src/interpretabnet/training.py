"""Seeded mini-batch training, evaluation metrics, and multi-seed runs."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .data import Dataset
from .encoder import InterpreTabNet, MaskTensor, ModelConfig, init_model
from .errors import ConfigError, DataError, TrainingDiverged
from .objective import PAIRWISE_MODES, LossBreakdown, loss_terms


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings.

    ``r_m_warmup_epochs`` linearly ramps the diversity weight from 0 to
    ``r_m`` over the first epochs, so the selection distributions accumulate
    likelihood evidence before the diversity pressure splits them; model
    selection starts once the ramp completes.
    """

    learning_rate: float = 0.02
    batch_size: int = 1024
    max_epochs: int = 200
    early_stop_patience: int = 15
    grad_clip_norm: float = 5.0
    r_m: float = 0.0
    r_m_warmup_epochs: int = 10
    seed: int = 0
    pairwise_mode: str = "all_pairs"
    prior_kl_weight: float = 1.0
    val_metric: str = "accuracy"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be non-negative")
        if self.early_stop_patience < 0:
            raise ConfigError("early_stop_patience must be non-negative")
        if self.grad_clip_norm <= 0:
            raise ConfigError("grad_clip_norm must be positive")
        if self.r_m < 0:
            raise ConfigError("r_m must be non-negative")
        if self.r_m_warmup_epochs < 0:
            raise ConfigError("r_m_warmup_epochs must be non-negative")
        if self.pairwise_mode not in PAIRWISE_MODES:
            raise ConfigError(f"pairwise_mode must be one of {PAIRWISE_MODES}")
        if self.val_metric not in ("accuracy", "auc"):
            raise ConfigError("val_metric must be 'accuracy' or 'auc'")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: LossBreakdown
    val_metric: float

    def to_dict(self) -> dict:
        row = {"epoch": self.epoch}
        row.update(self.train_loss.to_dict())
        row["accuracy"] = self.val_metric
        return row


@dataclass
class TrainResult:
    model: InterpreTabNet
    history: list[EpochRecord]
    best_epoch: int | None
    stop_reason: str  # "max_epochs" | "early_stop" | "untrained"

    @property
    def best_val_metric(self) -> float | None:
        if self.best_epoch is None:
            return None
        return self.history[self.best_epoch].val_metric


def _as_tensors(ds: Dataset, dtype=torch.float32):
    X = torch.as_tensor(ds.X, dtype=dtype)
    y = torch.as_tensor(ds.y, dtype=torch.long)
    return X, y


def roc_auc(scores, labels) -> float:
    """Rank-based area under the ROC curve; tied scores get average rank."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _predict_scores(model: InterpreTabNet, X: torch.Tensor, chunk: int = 8192):
    outs = []
    with torch.no_grad():
        for start in range(0, len(X), chunk):
            logits, _, _ = model(X[start : start + chunk], mode="expected")
            outs.append(logits)
    return torch.cat(outs) if outs else torch.zeros((0, model.cfg.n_classes))


def evaluate(model: InterpreTabNet, test_ds: Dataset, metric: str = "accuracy") -> float:
    """Noise-free test metric: argmax accuracy or rank-based AUC (binary only)."""
    if metric not in ("accuracy", "auc"):
        raise ConfigError(f"unknown metric {metric!r}")
    X, y = _as_tensors(test_ds)
    logits = _predict_scores(model, X)
    if metric == "accuracy":
        pred = logits.argmax(dim=1)
        return float((pred == y).double().mean())
    if model.cfg.n_classes != 2:
        raise ConfigError("AUC requires a binary task")
    scores = torch.softmax(logits, dim=1)[:, 1].numpy()
    return roc_auc(scores, y.numpy())


def masks_for(model: InterpreTabNet, ds: Dataset, chunk: int = 8192) -> MaskTensor:
    """Expected-mode masks for every row of a dataset."""
    X, _ = _as_tensors(ds)
    parts = []
    with torch.no_grad():
        for start in range(0, len(X), chunk):
            _, masks, _ = model(X[start : start + chunk], mode="expected")
            parts.append(masks.values)
    return MaskTensor(torch.cat(parts, dim=1))


def train(
    model: InterpreTabNet,
    train_ds: Dataset,
    val_ds: Dataset,
    cfg: TrainConfig,
) -> TrainResult:
    """Adam on the negative evidence bound with per-batch Gumbel reseeding.

    The validation metric selects the returned weights; training stops early
    after ``early_stop_patience`` epochs without improvement.  Fully
    deterministic given the config seed and a fixed torch thread count.
    """
    if train_ds.n_features != model.cfg.n_features:
        raise ConfigError("training data and model disagree on n_features")
    if cfg.val_metric == "auc" and model.cfg.n_classes != 2:
        raise ConfigError("AUC validation requires a binary task")
    if cfg.max_epochs == 0:
        return TrainResult(model=model, history=[], best_epoch=None, stop_reason="untrained")

    X, y = _as_tensors(train_ds)
    model.set_input_stats(X.mean(dim=0), X.std(dim=0, unbiased=False))
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    n = len(X)

    master = np.random.SeedSequence(cfg.seed)
    epoch_seqs = master.spawn(cfg.max_epochs)
    # Model selection starts once the ramp has finished (or immediately when
    # the run is too short to complete it).
    select_from = min(cfg.r_m_warmup_epochs, max(cfg.max_epochs - 1, 0))

    history: list[EpochRecord] = []
    best_metric = -np.inf
    best_epoch: int | None = None
    best_state = None
    stale = 0
    stop_reason = "max_epochs"

    for epoch in range(cfg.max_epochs):
        if cfg.r_m_warmup_epochs > 0:
            r_m_now = cfg.r_m * min(1.0, epoch / cfg.r_m_warmup_epochs)
        else:
            r_m_now = cfg.r_m
        rng = np.random.default_rng(epoch_seqs[epoch])
        order = rng.permutation(n)
        n_batches = (n + cfg.batch_size - 1) // cfg.batch_size
        noise_seeds = rng.integers(0, 2**62, size=n_batches)

        model.train()
        sums = {"nll": 0.0, "prior_kl": 0.0, "pairwise_kl": 0.0, "total": 0.0}
        for b in range(n_batches):
            idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            xb, yb = X[idx], y[idx]
            logits, _, dists = model(xb, mode="sampled", noise_seed=int(noise_seeds[b]))
            terms = loss_terms(
                logits, yb, dists, r_m_now, cfg.pairwise_mode, cfg.prior_kl_weight
            )
            total = terms["total"]
            if not torch.isfinite(total):
                partial = TrainResult(model, history, best_epoch, "aborted")
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {b}; "
                    f"last finite epoch: {epoch - 1}",
                    partial_result=partial,
                )
            optimizer.zero_grad()
            total.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip_norm)
            post = torch.nn.utils.get_total_norm(
                [p.grad for p in model.parameters() if p.grad is not None]
            )
            assert float(post) <= cfg.grad_clip_norm * (1 + 1e-4), "clip bound violated"
            optimizer.step()
            w = len(idx) / n
            for k in sums:
                sums[k] += float(terms[k].detach()) * w

        model.eval()
        val = evaluate(model, val_ds, cfg.val_metric)
        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=LossBreakdown(
                    nll=sums["nll"],
                    prior_kl=sums["prior_kl"],
                    pairwise_kl=sums["pairwise_kl"],
                    r_m=r_m_now,
                    total=sums["total"],
                ),
                val_metric=val,
            )
        )
        if epoch >= select_from:
            if val > best_metric:
                best_metric = val
                best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
                stale = 0
            else:
                stale += 1
                if stale > cfg.early_stop_patience:
                    stop_reason = "early_stop"
                    break

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return TrainResult(
        model=model, history=history, best_epoch=best_epoch, stop_reason=stop_reason
    )


@dataclass
class MultiSeedResult:
    mean: float
    std: float
    values: list[float]
    seeds: list[int]
    failures: list[tuple[int, str]] = field(default_factory=list)


def multi_seed_eval(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    data: tuple[Dataset, Dataset, Dataset],
    seeds,
    metric: str = "accuracy",
) -> MultiSeedResult:
    """Independently train and score one model per seed; report mean and
    sample standard deviation over the seeds that completed."""
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ConfigError("multi_seed_eval needs at least 2 seeds")
    train_ds, val_ds, test_ds = data
    values: list[float] = []
    kept: list[int] = []
    failures: list[tuple[int, str]] = []
    for seed in seeds:
        model = init_model(replace(model_cfg, seed=seed))
        cfg = replace(train_cfg, seed=seed)
        try:
            train(model, train_ds, val_ds, cfg)
        except TrainingDiverged as exc:
            failures.append((seed, str(exc)))
            continue
        values.append(evaluate(model, test_ds, metric))
        kept.append(seed)
    if values:
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    else:
        mean, std = float("nan"), float("nan")
    return MultiSeedResult(mean=mean, std=std, values=values, seeds=kept, failures=failures)
