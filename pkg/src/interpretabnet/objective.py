"""Training objective: label likelihood, prior KL, and mask-diversity KL.

The loss is the negated evidence bound
``nll + prior_kl - r_m * pairwise_kl``: mean label cross-entropy, plus the
mean KL from each step's mask distribution to a uniform prior over features,
minus an ``r_m``-weighted mean KL between the mask distributions of distinct
steps (maximized, which pushes steps toward disjoint feature choices).  All
three terms are means over samples so ``r_m`` is batch-size independent.
KL logs are clamped below at ``KL_EPS``, which caps any single directed term
and keeps the maximized part well-posed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .encoder import MaskDistributions
from .errors import ConfigError, DataError, NumericError, ShapeError

KL_EPS = 1e-8
PAIRWISE_MODES = ("all_pairs", "adjacent")


@dataclass(frozen=True)
class LossBreakdown:
    nll: float
    prior_kl: float
    pairwise_kl: float
    r_m: float
    total: float

    def to_dict(self) -> dict:
        return {
            "nll": self.nll,
            "prior_kl": self.prior_kl,
            "pairwise_kl": self.pairwise_kl,
            "r_m": self.r_m,
            "total": self.total,
        }


def _kl_rows(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    """Directed KL over the last axis with eps-clamped logs."""
    logp = torch.log(p.clamp_min(KL_EPS))
    logq = torch.log(q.clamp_min(KL_EPS))
    return (p * (logp - logq)).sum(dim=-1)


def categorical_kl(p_probs, q_probs) -> float:
    """KL(p || q) between two probability vectors, eps-clamped.

    Both inputs must be same-length simplex vectors (sum 1 within 1e-6).
    """
    p = torch.as_tensor(np.asarray(p_probs, dtype=np.float64))
    q = torch.as_tensor(np.asarray(q_probs, dtype=np.float64))
    if p.shape != q.shape:
        raise ShapeError(f"length mismatch: {tuple(p.shape)} vs {tuple(q.shape)}")
    if p.ndim != 1:
        raise ShapeError("categorical_kl expects 1-D probability vectors")
    for name, v in (("p", p), ("q", q)):
        if (v < 0).any():
            raise DataError(f"{name} has negative entries")
        if abs(float(v.sum()) - 1.0) > 1e-6:
            raise DataError(f"{name} does not sum to 1")
    return float(_kl_rows(p, q))


def prior_kl(dists: MaskDistributions) -> torch.Tensor:
    """Mean over samples of the summed per-step KL to the uniform prior."""
    probs = dists.probs
    d = probs.shape[-1]
    uniform = torch.full_like(probs, 1.0 / d)
    return _kl_rows(probs, uniform).sum(dim=0).mean()


def _step_pairs(n_steps: int, mode: str) -> list[tuple[int, int]]:
    if mode == "all_pairs":
        return [(i, j) for i in range(n_steps) for j in range(n_steps) if i != j]
    if mode == "adjacent":
        # Cyclic pairing: (0,1), (1,2), ..., (K-1,0).
        return [(k, (k + 1) % n_steps) for k in range(n_steps)]
    raise ConfigError(f"unknown pairwise mode {mode!r}")


def pairwise_mask_kl(dists: MaskDistributions, mode: str = "all_pairs") -> torch.Tensor:
    """Mean over samples of summed directed KL between distinct step distributions."""
    if dists.n_steps < 2:
        raise ConfigError("pairwise mask KL needs at least 2 steps")
    probs = dists.probs
    total = None
    for i, j in _step_pairs(dists.n_steps, mode):
        term = _kl_rows(probs[i], probs[j])
        total = term if total is None else total + term
    return total.mean()


def loss_terms(
    class_logits: torch.Tensor,
    y: torch.Tensor,
    dists: MaskDistributions,
    r_m: float,
    pairwise_mode: str = "all_pairs",
    prior_weight: float = 1.0,
) -> dict[str, torch.Tensor]:
    """Differentiable loss components; ``total`` is the training objective."""
    if r_m < 0:
        raise ConfigError("r_m must be non-negative")
    if not torch.isfinite(class_logits).all():
        raise NumericError("class logits contain non-finite values")
    n, c = class_logits.shape
    if y.shape != (n,):
        raise ShapeError(f"labels must be ({n},), got {tuple(y.shape)}")
    if dists.logits.shape[1] != n:
        raise ShapeError("mask distributions and class logits disagree on N")
    if y.numel() and (y.min() < 0 or y.max() >= c):
        raise DataError(f"labels must lie in [0, {c - 1}]")
    nll = F.cross_entropy(class_logits, y)
    p_kl = prior_kl(dists)
    pw_kl = pairwise_mask_kl(dists, pairwise_mode)
    total = nll + prior_weight * p_kl - r_m * pw_kl
    return {"nll": nll, "prior_kl": p_kl, "pairwise_kl": pw_kl, "total": total}


def loss(
    class_logits: torch.Tensor,
    y: torch.Tensor,
    dists: MaskDistributions,
    r_m: float,
    pairwise_mode: str = "all_pairs",
    prior_weight: float = 1.0,
) -> LossBreakdown:
    with torch.no_grad():
        terms = loss_terms(class_logits, y, dists, r_m, pairwise_mode, prior_weight)
    return LossBreakdown(
        nll=float(terms["nll"]),
        prior_kl=float(terms["prior_kl"]),
        pairwise_kl=float(terms["pairwise_kl"]),
        r_m=float(r_m),
        total=float(terms["total"]),
    )
