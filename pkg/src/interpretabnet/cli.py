"""Command-line entry point.

Subcommands: synth, train, search-rm, evaluate, export-masks, render-masks,
explain.  Options can come from a flat key-value config file (sectioned keys
like ``model.n_steps=4``); command-line flags override file values.  All
outputs under ``--out-dir`` are byte-identical across reruns with the same
inputs and seeds; wall-clock numbers live only in ``timings.json``.

Exit codes: 0 ok, 2 config/usage, 3 training abort, 4 infeasible regularizer
search, 5 LLM reply not parseable.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from . import data as data_mod
from .encoder import ModelConfig, MaskTensor, init_model, load_checkpoint, save_checkpoint
from .errors import (
    ConfigError,
    DataError,
    EmptyInputError,
    LlmParseError,
    LlmSchemaMismatchError,
    NoFeasibleRegError,
    ParseError,
    SchemaError,
    ShapeError,
    TrainingDiverged,
)
from .interpret import (
    DEFAULT_POLICY,
    SaliencePolicy,
    export_mask_csvs,
    load_mask_csvs,
    render_heatmap,
    salient_features,
)
from .llm import DEFAULT_API_KEY_ENV, LlmConfig, query_llm
from .prompts import DatasetMeta, compile_prompt, load_corpus, select_examples
from .reg_search import CriteriaConfig, aggregated_step_importance, criteria_check, search_rm
from .training import TrainConfig, evaluate, masks_for, multi_seed_eval, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRAINING = 3
EXIT_SEARCH = 4
EXIT_LLM = 5

_CONFIG_ERRORS = (
    ConfigError,
    SchemaError,
    ParseError,
    EmptyInputError,
    DataError,
    ShapeError,
    FileNotFoundError,
    NotADirectoryError,
    PermissionError,
)


def read_config_file(path) -> dict[str, str]:
    values = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


class Settings:
    """Merged option lookup: flag value wins, then config file, then default."""

    def __init__(self, file_values: dict[str, str]):
        self.file_values = file_values

    def get(self, key, flag_value, default, cast=str):
        if flag_value is not None:
            return flag_value
        if key in self.file_values:
            raw = self.file_values[key]
            if cast is bool:
                return raw.lower() in ("1", "true", "yes")
            return cast(raw)
        return default


def _write_json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_timings(out_dir: Path, command: str, seconds: float):
    _write_json(out_dir / "timings.json", {"command": command, "seconds": seconds})


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _settings(args) -> Settings:
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    return Settings(file_values)


def _load_dataset(args, s: Settings):
    """Resolve (train, val, test, dataset label) from CSV or synthetic flags."""
    synthetic = s.get("data.synthetic", getattr(args, "synthetic", None), None)
    if synthetic:
        spec = data_mod.SyntheticSpec(
            kind=synthetic,
            n_train=s.get("data.n_train", getattr(args, "n_train", None), 10_000, int),
            n_test=s.get("data.n_test", getattr(args, "n_test", None), 10_000, int),
            seed=s.get("data.seed", getattr(args, "data_seed", None), 0, int),
        )
        train_full, test_ds, _ = data_mod.generate_synthetic(spec)
        val_frac = s.get("split.val_frac", getattr(args, "val_frac", None), 0.1, float)
        n_val = max(1, int(round(val_frac * train_full.n_samples)))
        rng = np.random.default_rng(spec.seed + 1)
        order = rng.permutation(train_full.n_samples)
        val_ds = train_full.subset(order[:n_val])
        train_ds = train_full.subset(order[n_val:])
        return train_ds, val_ds, test_ds, spec.kind
    csv_path = s.get("data.path", getattr(args, "data", None), None)
    if not csv_path:
        raise ConfigError("either --data or --synthetic is required")
    target = s.get("data.target", getattr(args, "target", None), None)
    if not target:
        raise ConfigError("--target is required with --data")
    cats = s.get("data.categorical", getattr(args, "categorical", None), "")
    cat_cols = [c.strip() for c in cats.split(",") if c.strip()] if cats else []
    ds = data_mod.load_csv(csv_path, target_column=target, categorical_columns=cat_cols)
    spec = data_mod.SplitSpec(
        train_frac=s.get("split.train_frac", getattr(args, "train_frac", None), 0.8, float),
        val_frac=s.get("split.val_frac", getattr(args, "val_frac", None), 0.1, float),
        test_frac=s.get("split.test_frac", getattr(args, "test_frac", None), 0.1, float),
        seed=s.get("split.seed", getattr(args, "split_seed", None), 0, int),
    )
    train_ds, val_ds, test_ds = data_mod.split(ds, spec)
    return train_ds, val_ds, test_ds, Path(csv_path).stem


def _model_config(args, s: Settings, n_features: int, n_classes: int) -> ModelConfig:
    width = s.get("model.n_d", getattr(args, "n_d", None), 32, int)
    return ModelConfig(
        n_features=n_features,
        n_classes=n_classes,
        n_d=width,
        n_a=s.get("model.n_a", getattr(args, "n_a", None), width, int),
        n_steps=s.get("model.n_steps", getattr(args, "n_steps", None), 4, int),
        gamma_tabnet=s.get("model.gamma", getattr(args, "gamma", None), 1.5, float),
        use_prior_scale=s.get(
            "model.use_prior_scale", getattr(args, "use_prior_scale", None) or None, False, bool
        ),
        tau=s.get("model.tau", getattr(args, "tau", None), 1.0, float),
        mask_draws=s.get("model.mask_draws", getattr(args, "mask_draws", None), 4, int),
        mlp_hidden=s.get("model.mlp_hidden", getattr(args, "mlp_hidden", None), 32, int),
        seed=s.get("model.seed", getattr(args, "seed", None), 0, int),
    )


def _train_config(args, s: Settings) -> TrainConfig:
    return TrainConfig(
        learning_rate=s.get("train.learning_rate", getattr(args, "lr", None), 0.02, float),
        batch_size=s.get("train.batch_size", getattr(args, "batch_size", None), 1024, int),
        max_epochs=s.get("train.max_epochs", getattr(args, "epochs", None), 60, int),
        early_stop_patience=s.get("train.patience", getattr(args, "patience", None), 15, int),
        grad_clip_norm=s.get("train.grad_clip", getattr(args, "grad_clip", None), 5.0, float),
        r_m=s.get("train.r_m", getattr(args, "r_m", None), 0.0, float),
        r_m_warmup_epochs=s.get(
            "train.r_m_warmup_epochs", getattr(args, "r_m_warmup", None), 10, int
        ),
        seed=s.get("model.seed", getattr(args, "seed", None), 0, int),
        pairwise_mode=s.get(
            "train.pairwise_mode", getattr(args, "pairwise_mode", None), "all_pairs"
        ),
        prior_kl_weight=s.get(
            "train.prior_kl_weight", getattr(args, "prior_kl_weight", None), 1.0, float
        ),
        val_metric=s.get("train.metric", getattr(args, "metric", None), "accuracy"),
    )


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    n = args.n if args.n is not None else 10_000
    spec = data_mod.SyntheticSpec(
        kind=args.kind,
        n_train=args.n_train if args.n_train is not None else n,
        n_test=args.n_test if args.n_test is not None else n,
        seed=args.seed,
    )
    train_ds, test_ds, truth = data_mod.generate_synthetic(spec)
    train_ds.to_csv(out / f"{spec.kind}_train.csv")
    test_ds.to_csv(out / f"{spec.kind}_test.csv")
    _write_json(
        out / f"{spec.kind}_ground_truth.json",
        {"kind": spec.kind, "seed": spec.seed, "test_ground_truth": truth},
    )
    _write_timings(out, "synth", time.perf_counter() - t0)
    print(f"wrote {spec.kind} train/test CSVs ({spec.n_train}/{spec.n_test} rows) to {out}")
    return EXIT_OK


def _train_once(model_cfg, train_cfg, train_ds, val_ds, test_ds, out, metric):
    model = init_model(model_cfg)
    result = train(model, train_ds, val_ds, train_cfg)
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for record in result.history:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    save_checkpoint(model, out / "checkpoint.itnet")
    test_metric = evaluate(model, test_ds, metric)
    masks = masks_for(model, test_ds)
    export_mask_csvs(masks, test_ds.feature_names, out)
    return result, test_metric


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    torch.set_num_threads(1)  # keeps reruns bit-identical
    s = _settings(args)
    out = _out_dir(args)
    train_ds, val_ds, test_ds, label = _load_dataset(args, s)
    model_cfg = _model_config(args, s, train_ds.n_features, max(2, int(train_ds.y.max()) + 1))
    train_cfg = _train_config(args, s)
    metric = train_cfg.val_metric

    summary = {
        "dataset": label,
        "metric": metric,
        "r_m": train_cfg.r_m,
        "model": {k: getattr(model_cfg, k) for k in model_cfg.__dataclass_fields__},
        "train": {k: getattr(train_cfg, k) for k in train_cfg.__dataclass_fields__},
        "n_train": train_ds.n_samples,
        "n_val": val_ds.n_samples,
        "n_test": test_ds.n_samples,
    }
    if args.seeds and args.seeds > 1:
        seeds = list(range(train_cfg.seed, train_cfg.seed + args.seeds))
        res = multi_seed_eval(model_cfg, train_cfg, (train_ds, val_ds, test_ds), seeds, metric)
        summary.update(
            {
                "seeds": res.seeds,
                "per_seed": res.values,
                "mean": res.mean,
                "std": res.std,
                "failures": res.failures,
            }
        )
    else:
        result, test_metric = _train_once(
            model_cfg, train_cfg, train_ds, val_ds, test_ds, out, metric
        )
        summary.update(
            {
                "test_metric": test_metric,
                "best_epoch": result.best_epoch,
                "best_val_metric": result.best_val_metric,
                "stop_reason": result.stop_reason,
                "epochs_run": len(result.history),
            }
        )
    _write_json(out / "summary.json", summary)
    _write_timings(out, "train", time.perf_counter() - t0)
    print(json.dumps({k: summary[k] for k in summary if k not in ("model", "train")}))
    return EXIT_OK


def _criteria_config(args, s: Settings) -> CriteriaConfig:
    rng = getattr(args, "range", None)
    band = getattr(args, "band", None)
    band_count = getattr(args, "band_count", None)
    return CriteriaConfig(
        importance_band=(
            tuple(band)
            if band
            else (
                s.get("criteria.band_lo", None, 0.20, float),
                s.get("criteria.band_hi", None, 0.25, float),
            )
        ),
        band_count=(
            tuple(band_count)
            if band_count
            else (
                s.get("criteria.count_lo", None, 2, int),
                s.get("criteria.count_hi", None, 3, int),
            )
        ),
        required_passes=s.get("criteria.passes", getattr(args, "passes", None), 3, int),
        range_start=(
            rng[0] if rng else s.get("criteria.range_start", None, 0.0, float)
        ),
        range_end=(
            rng[1] if rng else s.get("criteria.range_end", None, 1e7, float)
        ),
        salience_floor=s.get(
            "criteria.salience_floor", getattr(args, "salience_floor", None), 0.05, float
        ),
        linear_subdivisions=s.get(
            "criteria.subdivisions", getattr(args, "subdivisions", None), 8, int
        ),
    )


def _scripted_handle(script_path):
    """Trainer handle driven by a JSON fixture: r_m -> accuracy + importances."""
    raw = json.loads(Path(script_path).read_text(encoding="utf-8"))
    table = {float(k): v for k, v in raw["candidates"].items()}

    def handle(r_m: float, seed: int):
        if r_m not in table:
            raise ConfigError(f"dry-run script has no entry for candidate {r_m!r}")
        entry = table[r_m]
        imp = np.asarray(entry["step_importances"], dtype=np.float64)
        masks = MaskTensor(torch.as_tensor(imp[:, None, :]))
        return float(entry["accuracy"]), masks

    return handle


def cmd_search_rm(args) -> int:
    t0 = time.perf_counter()
    torch.set_num_threads(1)
    s = _settings(args)
    out = _out_dir(args)
    criteria = _criteria_config(args, s)

    if args.dry_run_script:
        handle = _scripted_handle(args.dry_run_script)
    else:
        train_ds, val_ds, _, _ = _load_dataset(args, s)
        model_cfg = _model_config(
            args, s, train_ds.n_features, max(2, int(train_ds.y.max()) + 1)
        )
        base_train_cfg = _train_config(args, s)

        def handle(r_m: float, seed: int):
            cfg = replace(base_train_cfg, r_m=r_m, seed=seed)
            model = init_model(replace(model_cfg, seed=seed))
            train(model, train_ds, val_ds, cfg)
            acc = evaluate(model, val_ds, base_train_cfg.val_metric)
            return acc, masks_for(model, val_ds)

    report_path = out / "search_report.json"
    search_seed = s.get("search.seed", getattr(args, "seed", None), 0, int)
    try:
        result = search_rm(handle, criteria, seed=search_seed)
    except NoFeasibleRegError as exc:
        report = exc.ledger.to_dict() if exc.ledger else {}
        report["chosen_r_m"] = None
        _write_json(report_path, report)
        _write_timings(out, "search-rm", time.perf_counter() - t0)
        print("no feasible regularizer weight found", file=sys.stderr)
        return EXIT_SEARCH
    report = result.ledger.to_dict()
    report["chosen_r_m"] = result.r_m_star
    _write_json(report_path, report)
    _write_timings(out, "search-rm", time.perf_counter() - t0)
    print(json.dumps({"chosen_r_m": result.r_m_star, "trainer_calls": result.ledger.trainer_calls}))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    t0 = time.perf_counter()
    torch.set_num_threads(1)
    s = _settings(args)
    out = _out_dir(args)
    model = load_checkpoint(args.checkpoint)
    train_ds, val_ds, test_ds, label = _load_dataset(args, s)
    split_ds = {"train": train_ds, "val": val_ds, "test": test_ds}[args.split]
    value = evaluate(model, split_ds, args.metric)
    _write_json(
        out / "summary.json",
        {"dataset": label, "split": args.split, "metric": args.metric, "value": value},
    )
    _write_timings(out, "evaluate", time.perf_counter() - t0)
    print(json.dumps({"metric": args.metric, "value": value}))
    return EXIT_OK


def _masks_from_args(args, s: Settings):
    if args.masks_dir:
        values, names = load_mask_csvs(args.masks_dir)
        return MaskTensor(torch.as_tensor(values)), names
    if not args.checkpoint:
        raise ConfigError("either --masks-dir or --checkpoint is required")
    model = load_checkpoint(args.checkpoint)
    train_ds, val_ds, test_ds, _ = _load_dataset(args, s)
    split_ds = {"train": train_ds, "val": val_ds, "test": test_ds}[args.split]
    return masks_for(model, split_ds), split_ds.feature_names


def cmd_export_masks(args) -> int:
    t0 = time.perf_counter()
    torch.set_num_threads(1)
    s = _settings(args)
    out = _out_dir(args)
    masks, names = _masks_from_args(args, s)
    paths = export_mask_csvs(masks, names, out)
    _write_timings(out, "export-masks", time.perf_counter() - t0)
    print(f"wrote {len(paths)} mask CSVs to {out}")
    return EXIT_OK


def cmd_render_masks(args) -> int:
    t0 = time.perf_counter()
    torch.set_num_threads(1)
    s = _settings(args)
    out = _out_dir(args)
    masks, names = _masks_from_args(args, s)
    paths = render_heatmap(masks, names, out)
    _write_timings(out, "render-masks", time.perf_counter() - t0)
    print(f"wrote {len(paths)} images to {out}")
    return EXIT_OK


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in name.lower()).strip("_")


def cmd_explain(args) -> int:
    t0 = time.perf_counter()
    s = _settings(args)
    out = _out_dir(args)
    values, names = load_mask_csvs(args.masks_dir)
    if args.policy == "top_k":
        policy = SaliencePolicy.top_k(int(args.policy_value or 3))
    elif args.policy == "floor":
        policy = SaliencePolicy.floor(
            float(args.policy_value or DEFAULT_POLICY.value), cap=args.policy_cap
        )
    else:
        policy = DEFAULT_POLICY
    summary = salient_features(values, names, policy)

    corpus = load_corpus()
    if args.examples is not None:
        keys = [k.strip() for k in args.examples.split(",") if k.strip()]
        unknown = [k for k in keys if k not in corpus]
        if unknown:
            raise ConfigError(f"unknown corpus examples {unknown}; have {sorted(corpus)}")
        examples = [corpus[k] for k in keys]
    else:
        examples = select_examples(corpus, exclude=_slug(args.dataset_name), rotation=args.rotation)

    meta = DatasetMeta(
        name=args.dataset_name,
        description=args.dataset_description or "",
        n_test=values.shape[1],
        n_features=values.shape[2],
    )
    bundle = compile_prompt(meta, summary, examples, persona=args.persona)
    (out / "prompt.txt").write_text(bundle.text + "\n", encoding="utf-8")
    print(f"wrote prompt.txt ({len(bundle.text)} chars) to {out}")

    if args.send:
        cfg = LlmConfig(
            endpoint=args.endpoint,
            model=args.model,
            api_key_env=args.api_key_env,
            timeout=args.timeout,
            max_retries=args.max_retries,
        )
        try:
            interpretation = query_llm(bundle, cfg)
        except LlmSchemaMismatchError as exc:
            _write_json(out / "interpretation_partial.json", exc.parsed)
            _write_timings(out, "explain", time.perf_counter() - t0)
            print(f"schema mismatch: missing keys {list(exc.missing_keys)}", file=sys.stderr)
            return EXIT_LLM
        except LlmParseError as exc:
            (out / "reply_raw.txt").write_text(exc.raw_text, encoding="utf-8")
            _write_timings(out, "explain", time.perf_counter() - t0)
            print("could not parse model reply; raw reply saved", file=sys.stderr)
            return EXIT_LLM
        _write_json(out / "interpretation.json", interpretation)
        print(f"wrote interpretation.json with {len(interpretation)} keys")
    _write_timings(out, "explain", time.perf_counter() - t0)
    return EXIT_OK


def _add_data_flags(p: argparse.ArgumentParser):
    p.add_argument("--data", help="CSV dataset path")
    p.add_argument("--target", help="target column name")
    p.add_argument("--categorical", help="comma-separated categorical column names")
    p.add_argument("--synthetic", choices=data_mod.SYNTHETIC_KINDS, help="generate a synthetic benchmark instead of reading a CSV")
    p.add_argument("--n-train", type=int, help="synthetic training rows")
    p.add_argument("--n-test", type=int, help="synthetic test rows")
    p.add_argument("--data-seed", type=int, help="synthetic generator seed")
    p.add_argument("--split-seed", type=int, help="split shuffle seed")
    p.add_argument("--train-frac", type=float)
    p.add_argument("--val-frac", type=float)
    p.add_argument("--test-frac", type=float)


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--n-steps", type=int, help="decision steps K")
    p.add_argument("--n-d", type=int, help="decision/attention width")
    p.add_argument("--n-a", type=int)
    p.add_argument("--tau", type=float, help="relaxation temperature")
    p.add_argument("--gamma", type=float, help="prior-scale relaxation factor")
    p.add_argument("--use-prior-scale", action="store_true", default=None)
    p.add_argument("--mask-draws", type=int, help="hard draws averaged per sampled mask")
    p.add_argument("--mlp-hidden", type=int)
    p.add_argument("--seed", type=int, help="model/training seed")


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--r-m", type=float, help="mask-diversity regularizer weight")
    p.add_argument("--r-m-warmup", type=int, help="epochs to ramp the regularizer in")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--grad-clip", type=float)
    p.add_argument("--pairwise-mode", choices=("all_pairs", "adjacent"))
    p.add_argument("--prior-kl-weight", type=float)
    p.add_argument("--metric", choices=("accuracy", "auc"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interpretabnet",
        description="Train, search, and interpret mask-based tabular classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark as CSV")
    p.add_argument("--kind", required=True, choices=data_mod.SYNTHETIC_KINDS)
    p.add_argument("--n", type=int, help="rows for both train and test")
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and export masks")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seeds", type=int, help="train this many seeds and report mean/std")
    _add_data_flags(p)
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("search-rm", help="adaptive regularizer-weight search")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--dry-run-script", help="JSON fixture driving a scripted trainer")
    p.add_argument("--range", nargs=2, type=float, metavar=("START", "END"))
    p.add_argument("--band", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--band-count", nargs=2, type=int, metavar=("LO", "HI"))
    p.add_argument("--passes", type=int)
    p.add_argument("--salience-floor", type=float)
    p.add_argument("--subdivisions", type=int)
    _add_data_flags(p)
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_search_rm)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset split")
    p.add_argument("--config")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--metric", choices=("accuracy", "auc"), default="accuracy")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out-dir", default=".")
    _add_data_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-masks", help="write per-step mask CSVs")
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--masks-dir", help="copy masks from existing CSVs")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out-dir", default=".")
    _add_data_flags(p)
    p.set_defaults(func=cmd_export_masks)

    p = sub.add_parser("render-masks", help="render mask heatmap PNGs")
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--masks-dir")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--out-dir", default=".")
    _add_data_flags(p)
    p.set_defaults(func=cmd_render_masks)

    p = sub.add_parser("explain", help="compile the interpretation prompt, optionally send it")
    p.add_argument("--config")
    p.add_argument("--masks-dir", required=True)
    p.add_argument("--dataset-name", required=True)
    p.add_argument("--dataset-description", help='e.g. "which predicts whether ..."')
    p.add_argument("--policy", choices=("floor", "top_k"))
    p.add_argument("--policy-value", type=float)
    p.add_argument("--policy-cap", type=int)
    p.add_argument("--examples", help="comma-separated corpus keys for in-context examples")
    p.add_argument("--rotation", type=int, default=0, help="rotate which corpus examples lead")
    p.add_argument("--persona", help="persona sentence prepended to the prompt")
    p.add_argument("--send", action="store_true")
    p.add_argument("--endpoint", default=LlmConfig.endpoint)
    p.add_argument("--model", default=LlmConfig.model)
    p.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except NoFeasibleRegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEARCH
    except (LlmParseError, LlmSchemaMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LLM


if __name__ == "__main__":
    sys.exit(main())
