"""Sequential attention encoder with stochastic feature masks.

Each decision step runs a small attentive transformer that emits categorical
logits over the D input features.  A mask is drawn from the relaxed
categorical (Gumbel-Softmax) distribution those logits parameterize, the
masked features pass through a gated feature transformer, and the per-step
decision outputs are summed into a final MLP classifier.  Step k+1's
attentive transformer additionally conditions on the realized mask of step k.
"""

from __future__ import annotations

import io
import zipfile
from dataclasses import dataclass, replace

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, NumericError, SchemaError, ShapeError

_GUMBEL_EPS = 1e-20


@dataclass(frozen=True)
class ModelConfig:
    n_features: int
    n_classes: int
    n_d: int = 32
    n_a: int = 32
    n_steps: int = 4
    gamma_tabnet: float = 1.5
    use_prior_scale: bool = False
    tau: float = 1.0
    mask_draws: int = 4
    mlp_hidden: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.n_features <= 0 or self.n_classes <= 0:
            raise ConfigError("n_features and n_classes must be positive")
        if self.n_d <= 0 or self.n_a <= 0 or self.mlp_hidden <= 0:
            raise ConfigError("layer widths must be positive")
        if self.n_d != self.n_a:
            raise ConfigError(f"n_d ({self.n_d}) must equal n_a ({self.n_a})")
        if self.n_steps < 2:
            raise ConfigError("n_steps must be at least 2")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.mask_draws < 1:
            raise ConfigError("mask_draws must be at least 1")
        if self.gamma_tabnet < 1.0:
            raise ConfigError("gamma_tabnet must be >= 1.0")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass
class MaskDistributions:
    """Per-step, per-sample categorical logits over features, shape (K, N, D)."""

    logits: torch.Tensor

    @property
    def probs(self) -> torch.Tensor:
        return torch.softmax(self.logits, dim=-1)

    @property
    def n_steps(self) -> int:
        return self.logits.shape[0]


@dataclass
class MaskTensor:
    """Realized masks, shape (K, N, D); every row is a probability vector."""

    values: torch.Tensor

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    def numpy(self) -> np.ndarray:
        return self.values.detach().cpu().numpy()

    def validate(self, atol: float = 1e-5):
        v = self.values
        if v.ndim != 3:
            raise ShapeError(f"mask tensor must be (K, N, D), got {tuple(v.shape)}")
        if not torch.isfinite(v).all():
            raise NumericError("mask tensor contains non-finite entries")
        if (v < -atol).any() or (v > 1 + atol).any():
            raise ShapeError("mask entries must lie in [0, 1]")
        sums = v.sum(dim=-1)
        if (sums - 1).abs().max().item() > atol:
            raise ShapeError("mask rows must sum to 1")


def sample_gumbel(shape, generator=None, dtype=torch.float32) -> torch.Tensor:
    u = torch.rand(shape, generator=generator, dtype=dtype)
    return -torch.log(-torch.log(u.clamp_min(_GUMBEL_EPS)) + _GUMBEL_EPS)


def sample_mask(logits, tau: float, noise_seed: int | None = None):
    """Relaxed categorical sample: softmax((logits + g) / tau).

    ``noise_seed`` seeds the standard-Gumbel draw; ``None`` selects the
    deterministic mode g = 0 used for evaluation.  Accepts a torch tensor or
    numpy array of row logits and returns the same kind.
    """
    if tau <= 0:
        raise ConfigError("tau must be positive")
    was_numpy = isinstance(logits, np.ndarray)
    t = torch.as_tensor(logits, dtype=torch.float64 if was_numpy else None)
    if not torch.isfinite(t).all():
        raise NumericError("logits must be finite")
    if noise_seed is None:
        rows = torch.softmax(t / tau, dim=-1)
    else:
        gen = torch.Generator()
        gen.manual_seed(int(noise_seed))
        g = sample_gumbel(t.shape, generator=gen, dtype=t.dtype)
        rows = torch.softmax((t + g) / tau, dim=-1)
    return rows.numpy() if was_numpy else rows


class _GLUBlock(nn.Module):
    """Fully connected block with a gated linear activation."""

    def __init__(self, in_dim, out_dim):
        super().__init__()
        self.fc = nn.Linear(in_dim, 2 * out_dim)

    def forward(self, x):
        return F.glu(self.fc(x), dim=-1)


class _FeatureTransformer(nn.Module):
    """Two shared + two step-specific GLU blocks, residual after the first."""

    def __init__(self, shared: nn.ModuleList, width: int):
        super().__init__()
        self.shared = shared
        self.own = nn.ModuleList([_GLUBlock(width, width), _GLUBlock(width, width)])

    def forward(self, x):
        h = self.shared[0](x)
        for block in [self.shared[1], *self.own]:
            h = (h + block(h)) * (0.5**0.5)
        return h


class InterpreTabNet(nn.Module):
    """Mask-sampling tabular classifier (see module docstring)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d, width = cfg.n_features, cfg.n_d
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed)
            # Scalar re-embedding keeps the mask dimension exactly D.
            self.feature_scale = nn.Parameter(torch.ones(d))
            self.feature_bias = nn.Parameter(torch.zeros(d))
            self.attentives = nn.ModuleList()
            for k in range(cfg.n_steps):
                in_dim = d if k == 0 else 2 * d
                self.attentives.append(
                    nn.Sequential(
                        nn.Linear(in_dim, cfg.n_a),
                        nn.ReLU(),
                        nn.Linear(cfg.n_a, d),
                    )
                )
            shared = nn.ModuleList([_GLUBlock(d, width), _GLUBlock(width, width)])
            self.feature_transformers = nn.ModuleList(
                [_FeatureTransformer(shared, width) for _ in range(cfg.n_steps)]
            )
            self.final_mlp = nn.Sequential(
                nn.Linear(width, cfg.mlp_hidden),
                nn.ReLU(),
                nn.Linear(cfg.mlp_hidden, cfg.n_classes),
            )
        # Input standardization state, set from training data by the trainer.
        self.register_buffer("input_mean", torch.zeros(d))
        self.register_buffer("input_std", torch.ones(d))

    def set_input_stats(self, mean, std):
        mean = torch.as_tensor(mean, dtype=torch.get_default_dtype())
        std = torch.as_tensor(std, dtype=torch.get_default_dtype())
        self.input_mean.copy_(mean.to(self.input_mean.dtype))
        self.input_std.copy_(std.clamp_min(1e-8).to(self.input_std.dtype))

    def embed(self, X: torch.Tensor) -> torch.Tensor:
        z = (X - self.input_mean) / self.input_std
        return z * self.feature_scale + self.feature_bias

    def _sample_step_mask(self, logits: torch.Tensor, gen) -> torch.Tensor:
        """Mean of ``mask_draws`` hard categorical samples, straight-through.

        Each draw is one_hot(argmax(logits + gumbel)); averaging the draws
        keeps the per-sample selection hard (exact zeros off the drawn
        features) while reducing estimator variance.  Gradients flow through
        the soft relaxation.
        """
        soft = torch.softmax(logits / self.cfg.tau, dim=-1)
        hard_sum = None
        for _ in range(self.cfg.mask_draws):
            noisy = logits + sample_gumbel(logits.shape, generator=gen, dtype=logits.dtype)
            hard = F.one_hot(noisy.argmax(dim=-1), logits.shape[-1]).to(soft.dtype)
            hard_sum = hard if hard_sum is None else hard_sum + hard
        hard_mean = hard_sum / self.cfg.mask_draws
        return (hard_mean - soft).detach() + soft

    def forward(
        self,
        X: torch.Tensor,
        mode: str = "expected",
        noise_seed: int = 0,
    ) -> tuple[torch.Tensor, MaskTensor, MaskDistributions]:
        """Run the encoder; returns (class logits, masks, mask distributions).

        ``sampled`` realizes each step mask as an average of hard categorical
        draws seeded by ``noise_seed`` (training); ``expected`` uses the
        noise-free relaxation softmax(logits / tau), so repeated calls are
        identical.  In sampled mode the selection distributions see a
        gradient-detached copy of the embedding, keeping the diversity
        pressure on the variational (attention) parameters only.
        """
        if mode not in ("expected", "sampled"):
            raise ConfigError(f"unknown forward mode {mode!r}")
        if X.ndim != 2 or X.shape[1] != self.cfg.n_features:
            raise ShapeError(
                f"X must be (N, {self.cfg.n_features}), got {tuple(X.shape)}"
            )
        cfg = self.cfg
        gen = None
        if mode == "sampled":
            gen = torch.Generator()
            gen.manual_seed(int(noise_seed))

        x = self.embed(X)
        x_att = x.detach() if mode == "sampled" else x
        prior = torch.ones_like(x) if cfg.use_prior_scale else None
        mask_prev = None
        logits_per_step, masks_per_step, decision_sum = [], [], None
        for k in range(cfg.n_steps):
            att_in = x_att if k == 0 else torch.cat([x_att, mask_prev], dim=1)
            logits = self.attentives[k](att_in)
            if prior is not None:
                logits = logits * prior
            if not torch.isfinite(logits).all():
                raise NumericError(f"non-finite attention logits at step {k}")
            if gen is not None:
                mask = self._sample_step_mask(logits, gen)
            else:
                mask = torch.softmax(logits / cfg.tau, dim=-1)
            decision = self.feature_transformers[k](mask * x)
            if not torch.isfinite(decision).all():
                raise NumericError(f"non-finite decision output at step {k}")
            decision_sum = decision if decision_sum is None else decision_sum + decision
            if prior is not None:
                prior = prior * (cfg.gamma_tabnet - mask)
            logits_per_step.append(logits)
            masks_per_step.append(mask)
            mask_prev = mask

        class_logits = self.final_mlp(decision_sum)
        if not torch.isfinite(class_logits).all():
            raise NumericError("non-finite class logits")
        masks = MaskTensor(torch.stack(masks_per_step))
        dists = MaskDistributions(torch.stack(logits_per_step))
        return class_logits, masks, dists


def init_model(cfg: ModelConfig) -> InterpreTabNet:
    """Build a model with parameters drawn from the config seed."""
    return InterpreTabNet(cfg)


def permute_feature_axes(model: InterpreTabNet, perm) -> InterpreTabNet:
    """Copy of ``model`` whose feature-indexed parameter axes follow ``perm``.

    With ``X_new = X[:, perm]``, the permuted model's masks (and class
    logits) equal the original's with columns permuted the same way.  Used
    to check permutation equivariance at initialization.
    """
    perm = list(perm)
    d = model.cfg.n_features
    if sorted(perm) != list(range(d)):
        raise ConfigError("perm must be a permutation of 0..D-1")
    idx = torch.as_tensor(perm, dtype=torch.long)
    out = InterpreTabNet(model.cfg)
    out.load_state_dict(model.state_dict())
    with torch.no_grad():
        out.feature_scale.copy_(model.feature_scale[idx])
        out.feature_bias.copy_(model.feature_bias[idx])
        out.input_mean.copy_(model.input_mean[idx])
        out.input_std.copy_(model.input_std[idx])
        for k, att in enumerate(out.attentives):
            first, last = att[0], att[2]
            src_first, src_last = model.attentives[k][0], model.attentives[k][2]
            if k == 0:
                first.weight.copy_(src_first.weight[:, idx])
            else:
                first.weight[:, :d].copy_(src_first.weight[:, :d][:, idx])
                first.weight[:, d:].copy_(src_first.weight[:, d:][:, idx])
            last.weight.copy_(src_last.weight[idx, :])
            last.bias.copy_(src_last.bias[idx])
        shared_first = out.feature_transformers[0].shared[0]
        src_shared = model.feature_transformers[0].shared[0]
        shared_first.fc.weight.copy_(src_shared.fc.weight[:, idx])
    return out


def save_checkpoint(model: InterpreTabNet, path):
    """Write a single archive: config key-value text + named parameter tensors."""
    cfg = model.cfg
    lines = [f"{k}={getattr(cfg, k)}" for k in sorted(cfg.__dataclass_fields__)]
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("config.txt", "\n".join(lines) + "\n")
        state = model.state_dict()
        for name in sorted(state):
            buf = io.BytesIO()
            np.save(buf, state[name].detach().cpu().numpy())
            zf.writestr(f"params/{name}.npy", buf.getvalue())


def _parse_config_text(text: str) -> ModelConfig:
    fields = ModelConfig.__dataclass_fields__
    values = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in fields:
            raise SchemaError(f"unknown checkpoint config key {key!r}")
        ftype = fields[key].type
        if "bool" in str(ftype):
            values[key] = raw.strip() == "True"
        elif "float" in str(ftype):
            values[key] = float(raw)
        else:
            values[key] = int(raw)
    return ModelConfig(**values)


def load_checkpoint(path) -> InterpreTabNet:
    """Rebuild a model from an archive, validating shapes against its config."""
    with zipfile.ZipFile(path, "r") as zf:
        cfg = _parse_config_text(zf.read("config.txt").decode("utf-8"))
        model = InterpreTabNet(cfg)
        state = model.state_dict()
        stored = {
            n[len("params/") : -len(".npy")]
            for n in zf.namelist()
            if n.startswith("params/") and n.endswith(".npy")
        }
        if stored != set(state):
            missing = sorted(set(state) - stored)
            extra = sorted(stored - set(state))
            raise SchemaError(
                f"checkpoint parameter names mismatch (missing={missing}, extra={extra})"
            )
        new_state = {}
        for name in state:
            arr = np.load(io.BytesIO(zf.read(f"params/{name}.npy")))
            if tuple(arr.shape) != tuple(state[name].shape):
                raise ShapeError(
                    f"checkpoint tensor {name!r} has shape {arr.shape}, "
                    f"config implies {tuple(state[name].shape)}"
                )
            new_state[name] = torch.as_tensor(arr, dtype=state[name].dtype)
        model.load_state_dict(new_state)
    return model


def parameter_checksum(model: InterpreTabNet) -> float:
    """Cheap content fingerprint: sum of |parameters| and buffers."""
    total = 0.0
    for _, t in sorted(model.state_dict().items()):
        total += float(t.abs().sum())
    return total


def clone_config(cfg: ModelConfig, **overrides) -> ModelConfig:
    return replace(cfg, **overrides)
