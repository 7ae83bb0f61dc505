"""Mask-based interpretable tabular classification toolkit."""

from .data import (
    Dataset,
    SplitSpec,
    SyntheticSpec,
    generate_synthetic,
    label_probability,
    load_csv,
    relevant_features,
    split,
)
from .encoder import (
    InterpreTabNet,
    MaskDistributions,
    MaskTensor,
    ModelConfig,
    init_model,
    load_checkpoint,
    sample_mask,
    save_checkpoint,
)
from .interpret import (
    SaliencePolicy,
    SalientSummary,
    export_mask_csvs,
    overlap_matrix,
    render_heatmap,
    salient_features,
)
from .llm import LlmConfig, query_llm
from .objective import LossBreakdown, categorical_kl, loss, pairwise_mask_kl, prior_kl
from .prompts import DatasetMeta, PromptBundle, compile_prompt, load_corpus, select_examples
from .reg_search import CriteriaConfig, RegSearchLedger, criteria_check, search_rm
from .training import TrainConfig, TrainResult, evaluate, multi_seed_eval, roc_auc, train

__all__ = [
    "Dataset",
    "SplitSpec",
    "SyntheticSpec",
    "generate_synthetic",
    "label_probability",
    "load_csv",
    "relevant_features",
    "split",
    "InterpreTabNet",
    "MaskDistributions",
    "MaskTensor",
    "ModelConfig",
    "init_model",
    "load_checkpoint",
    "sample_mask",
    "save_checkpoint",
    "SaliencePolicy",
    "SalientSummary",
    "export_mask_csvs",
    "overlap_matrix",
    "render_heatmap",
    "salient_features",
    "LlmConfig",
    "query_llm",
    "LossBreakdown",
    "categorical_kl",
    "loss",
    "pairwise_mask_kl",
    "prior_kl",
    "DatasetMeta",
    "PromptBundle",
    "compile_prompt",
    "load_corpus",
    "select_examples",
    "CriteriaConfig",
    "RegSearchLedger",
    "criteria_check",
    "search_rm",
    "TrainConfig",
    "TrainResult",
    "evaluate",
    "multi_seed_eval",
    "roc_auc",
    "train",
]

__version__ = "0.1.0"
