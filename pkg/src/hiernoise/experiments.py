"""Config-driven experiment runner.

A single JSON config describes dataset, noise, hierarchy source, the
alpha/seed grid, and training overrides; the runner executes seed-paired
FLAT/HC comparisons, alpha ablations, or the breakdown study and writes
all artifacts (per-run CSVs, correctness bitmaps, comparison tables,
summary JSON) under the output directory.  Every artifact is a
deterministic function of the config file.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import LabeledDataset, SyntheticSpec, generate_synthetic, load_mnist_idx
from .evaluation import (ComparisonReport, WindowSummary, aggregate_runs,
                         mean_stderr, window_accuracy)
from .hierarchy import Hierarchy, builtin_hierarchy, learn_hierarchy
from .mlp import init_model
from .noise import (NoiseModel, breakdown_experiment, class_dependent_noise,
                    corrupt_labels, proxy_confusion, save_breakdown_csv,
                    uniform_noise)
from .rng import derive_seed
from .trainer import RunRecord, TrainConfig, train

THREADS_ENV = "HIERNOISE_THREADS"


class ConfigError(ValueError):
    """Invalid experiment config; message carries the offending field path."""


def _expect(obj: dict, path: str, key: str, types, default=None, required=False):
    if key not in obj:
        if required:
            raise ConfigError(f"{path}.{key}: required field is missing")
        return default
    value = obj[key]
    if types is not None and not isinstance(value, types):
        raise ConfigError(
            f"{path}.{key}: expected {getattr(types, '__name__', types)}, "
            f"got {type(value).__name__}"
        )
    return value


@dataclass
class ExperimentConfig:
    name: str
    dataset: dict
    noise: dict
    hierarchy: dict
    alpha: float
    alphas: list[float]
    noise_ratios: list[float]
    seeds: list[int]
    train_overrides: dict
    early_window: tuple[int, int]
    out_dir: str
    threads: int = 1
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, obj: dict, base_dir: str = ".") -> "ExperimentConfig":
        name = _expect(obj, "$", "name", str, default="experiment")
        dataset = _expect(obj, "$", "dataset", dict, default={"type": "synthetic"})
        dtype = _expect(dataset, "$.dataset", "type", str, required=True)
        if dtype not in ("synthetic", "mnist"):
            raise ConfigError(f"$.dataset.type: unknown dataset type {dtype!r}")
        noise = _expect(obj, "$", "noise", dict, default={"type": "none"})
        ntype = _expect(noise, "$.noise", "type", str, required=True)
        if ntype not in ("none", "uniform", "class_dependent"):
            raise ConfigError(f"$.noise.type: unknown noise type {ntype!r}")
        if ntype != "none":
            p = _expect(noise, "$.noise", "p", (int, float), required=True)
            if not 0.0 <= float(p) < 1.0:
                raise ConfigError(f"$.noise.p: must be in [0, 1), got {p}")
        hierarchy = _expect(obj, "$", "hierarchy", dict, default={"type": "dataset"})
        htype = _expect(hierarchy, "$.hierarchy", "type", str, required=True)
        if htype not in ("dataset", "builtin", "learned", "file", "identity"):
            raise ConfigError(f"$.hierarchy.type: unknown hierarchy source {htype!r}")

        alpha = float(_expect(obj, "$", "alpha", (int, float), default=0.5))
        alphas = _expect(obj, "$", "alphas", list, default=[0.25, 0.5, 0.75, 1.0])
        alphas = [float(a) for a in alphas]
        for a in [alpha, *alphas]:
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"$.alpha: values must be in [0, 1], got {a}")
        ratios = _expect(obj, "$", "noise_ratios", list, default=[0.0, 0.2, 0.5])
        ratios = [float(r) for r in ratios]
        for r in ratios:
            if not 0.0 <= r < 1.0:
                raise ConfigError(f"$.noise_ratios: values must be in [0, 1), got {r}")
        seeds = _expect(obj, "$", "seeds", list, default=[1, 2, 3, 4, 5])
        if not seeds:
            raise ConfigError("$.seeds: must be non-empty")
        seeds = [int(s) for s in seeds]
        train_overrides = _expect(obj, "$", "train", dict, default={})
        window = _expect(obj, "$", "early_window", list, default=[21, 30])
        if len(window) != 2 or window[0] > window[1] or window[0] < 1:
            raise ConfigError(f"$.early_window: need [lo, hi] with 1 <= lo <= hi, got {window}")
        out_dir = _expect(obj, "$", "out_dir", str, default=os.path.join("out", name))
        if not os.path.isabs(out_dir):
            out_dir = os.path.join(base_dir, out_dir)
        threads = int(_expect(obj, "$", "threads", int, default=1))
        return cls(name=name, dataset=dataset, noise=noise, hierarchy=hierarchy,
                   alpha=alpha, alphas=alphas, noise_ratios=ratios, seeds=seeds,
                   train_overrides=train_overrides,
                   early_window=(int(window[0]), int(window[1])),
                   out_dir=out_dir, threads=threads, raw=obj)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(obj, base_dir=str(path.parent))


def build_dataset(config: ExperimentConfig) -> tuple[LabeledDataset, Hierarchy | None]:
    ds = config.dataset
    if ds["type"] == "synthetic":
        spec_kwargs = {k: v for k, v in ds.items() if k != "type"}
        try:
            spec = SyntheticSpec(**spec_kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"$.dataset: {exc}") from exc
        return generate_synthetic(spec)
    for key in ("train_images", "train_labels", "test_images", "test_labels"):
        if key not in ds:
            raise ConfigError(f"$.dataset.{key}: required for mnist datasets")
    dataset = load_mnist_idx(ds["train_images"], ds["train_labels"],
                             ds["test_images"], ds["test_labels"])
    return dataset, None


def resolve_hierarchy(config: ExperimentConfig, dataset: LabeledDataset,
                      planted: Hierarchy | None) -> Hierarchy:
    h = config.hierarchy
    htype = h["type"]
    if htype == "dataset":
        if planted is None:
            raise ConfigError(
                "$.hierarchy.type: 'dataset' needs a synthetic dataset with a "
                "planted hierarchy; pick builtin/learned/file instead"
            )
        return planted
    if htype == "builtin":
        name = _expect(h, "$.hierarchy", "name", str, required=True)
        return builtin_hierarchy(name)
    if htype == "identity":
        return builtin_hierarchy(f"identity({dataset.num_classes})")
    if htype == "file":
        path = _expect(h, "$.hierarchy", "path", str, required=True)
        return Hierarchy.load(path)
    num_coarse = int(_expect(h, "$.hierarchy", "num_coarse", int, required=True))
    proxy = TrainConfig(**{**_train_kwargs(config), "alpha": 1.0,
                           "hierarchy": None, "epochs": 30,
                           "seed": derive_seed(0, "hierarchy-proxy")})
    confusion = proxy_confusion(dataset, proxy)
    return learn_hierarchy(confusion, num_coarse)


def build_noise_model(config: ExperimentConfig, dataset: LabeledDataset,
                      ratio: float | None = None) -> NoiseModel | None:
    ntype = config.noise["type"]
    p = float(config.noise.get("p", 0.0)) if ratio is None else float(ratio)
    if ntype == "none" or p == 0.0:
        return None
    if ntype == "uniform":
        return uniform_noise(dataset.num_classes, p)
    return class_dependent_noise(dataset, p)


def _train_kwargs(config: ExperimentConfig) -> dict:
    allowed = {"epochs", "batch_size", "learning_rate", "lr_decay_factor",
               "lr_decay_every", "adam_beta1", "adam_beta2", "adam_eps",
               "hidden_dims"}
    out = {}
    for key, value in config.train_overrides.items():
        if key not in allowed:
            raise ConfigError(f"$.train.{key}: unknown training field")
        out[key] = tuple(value) if key == "hidden_dims" else value
    return out


def _sha256_arrays(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def _thread_budget(requested: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    budget = max(1, int(requested))
    if cap is not None:
        budget = min(budget, max(1, int(cap)))
    return budget


@dataclass
class _Cell:
    """One training run of the grid, fully self-describing."""

    label: str
    dataset: LabeledDataset
    config: TrainConfig
    init_dims: tuple[int, ...]
    init_seed: int


def _run_cell(cell: _Cell) -> tuple[str, RunRecord, str]:
    model = init_model(cell.init_dims, cell.init_seed)
    init_hash = _sha256_arrays(*model.weights, *model.biases)
    record = train(cell.dataset, cell.config, model=model)
    return cell.label, record, init_hash


def _execute(cells: list[_Cell], threads: int) -> dict[str, tuple[RunRecord, str]]:
    budget = _thread_budget(threads)
    results: dict[str, tuple[RunRecord, str]] = {}
    if budget <= 1 or len(cells) <= 1:
        for cell in cells:
            label, record, init_hash = _run_cell(cell)
            results[label] = (record, init_hash)
        return results
    with ProcessPoolExecutor(max_workers=budget) as pool:
        for label, record, init_hash in pool.map(_run_cell, cells):
            results[label] = (record, init_hash)
    return results


def _write_run(out_dir: Path, label: str, record: RunRecord) -> None:
    record.save_csv(out_dir / "runs" / f"{label}.csv")
    record.save_bitmaps(out_dir / "bitmaps" / f"{label}.csv")
    record.save_config(out_dir / "runs" / f"{label}.config.json")


def _prepare_out_dir(out_dir: str) -> Path:
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "bitmaps").mkdir(parents=True, exist_ok=True)
    return out


def run_compare(config: ExperimentConfig) -> ComparisonReport:
    """Seed-paired FLAT (alpha=1) vs HC (config alpha) comparison.

    Within each seed both methods train from the same initial weights on
    the same corrupted labels; only alpha differs.  The pairing is
    asserted by hashing both. Artifacts: runs/<method>_seed<s>.csv,
    bitmaps/<method>_seed<s>.csv, comparison.csv, summary.json.
    """
    out = _prepare_out_dir(config.out_dir)
    dataset, planted = build_dataset(config)
    base_train = _train_kwargs(config)
    probe = TrainConfig(**{**base_train, "alpha": 1.0, "hierarchy": None})
    hierarchy = resolve_hierarchy(config, dataset, planted)
    noise_model = build_noise_model(config, dataset)

    cells: list[_Cell] = []
    label_hashes: dict[int, str] = {}
    for seed in config.seeds:
        corrupted = (dataset if noise_model is None
                     else corrupt_labels(dataset, noise_model, seed))
        label_hashes[seed] = _sha256_arrays(corrupted.noisy_labels)
        dims = (dataset.dim, *probe.hidden_dims, dataset.num_classes)
        init_seed = derive_seed(seed, "init")
        for method, alpha in (("flat", 1.0), ("hc", config.alpha)):
            cfg = TrainConfig(**{**base_train, "alpha": alpha,
                                 "hierarchy": hierarchy, "seed": seed})
            cells.append(_Cell(f"{method}_seed{seed}", corrupted, cfg, dims, init_seed))

    results = _execute(cells, config.threads)

    pairing = []
    for seed in config.seeds:
        flat_hash = results[f"flat_seed{seed}"][1]
        hc_hash = results[f"hc_seed{seed}"][1]
        if flat_hash != hc_hash:
            raise AssertionError(
                f"seed {seed}: FLAT and HC started from different weights"
            )
        pairing.append({"seed": seed, "labels_sha256": label_hashes[seed],
                        "init_sha256": flat_hash})

    flat_records, hc_records = [], []
    for seed in config.seeds:
        for method, bucket in (("flat", flat_records), ("hc", hc_records)):
            label = f"{method}_seed{seed}"
            record = results[label][0]
            _write_run(out, label, record)
            bucket.append(record)

    report = aggregate_runs(flat_records, hc_records, config.early_window)
    report.save_csv(out / "comparison.csv")

    lo, hi = 10, min(50, report.epochs)
    mid = report.p_median[lo - 1:hi]
    summary = {
        "name": config.name,
        "kind": "compare",
        "alpha": config.alpha,
        "seeds": config.seeds,
        "noise": config.noise,
        "windows": report.windows_json(),
        "pairing": pairing,
        "mcnemar": {
            "epoch_range": [lo, hi],
            "frac_significant": float(np.mean(mid < 0.05)) if len(mid) else 0.0,
        },
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return report


def run_ablation(config: ExperimentConfig) -> list[dict]:
    """Alpha-by-noise-ratio grid of 30-epoch runs.

    Returns (and writes to ablation.csv) one row per (noise_ratio, alpha)
    with the early-window accuracy mean and stderr across seeds.
    """
    if len(config.alphas) < 2:
        raise ConfigError("$.alphas: ablation needs at least 2 alpha values")
    out = _prepare_out_dir(config.out_dir)
    dataset, planted = build_dataset(config)
    base_train = dict(_train_kwargs(config))
    base_train.setdefault("epochs", 30)
    probe = TrainConfig(**{**base_train, "alpha": 1.0, "hierarchy": None})
    hierarchy = resolve_hierarchy(config, dataset, planted)

    cells: list[_Cell] = []
    for ratio in config.noise_ratios:
        noise_model = build_noise_model(config, dataset, ratio)
        for seed in config.seeds:
            corrupted = (dataset if noise_model is None
                         else corrupt_labels(dataset, noise_model, seed))
            dims = (dataset.dim, *probe.hidden_dims, dataset.num_classes)
            init_seed = derive_seed(seed, "init")
            for alpha in config.alphas:
                cfg = TrainConfig(**{**base_train, "alpha": alpha,
                                     "hierarchy": hierarchy, "seed": seed})
                label = f"alpha{alpha:g}_p{ratio:g}_seed{seed}"
                cells.append(_Cell(label, corrupted, cfg, dims, init_seed))

    results = _execute(cells, config.threads)
    lo, hi = config.early_window
    rows = []
    for ratio in config.noise_ratios:
        for alpha in config.alphas:
            accs = []
            per_seed = {}
            for seed in config.seeds:
                label = f"alpha{alpha:g}_p{ratio:g}_seed{seed}"
                record = results[label][0]
                _write_run(out, label, record)
                hi_eff = min(hi, record.epochs)
                lo_eff = min(lo, hi_eff)
                acc = window_accuracy(record, lo_eff, hi_eff)
                accs.append(acc)
                per_seed[str(seed)] = acc
            mean, stderr = mean_stderr(accs)
            rows.append({"noise_ratio": ratio, "alpha": alpha,
                         "mean": mean, "stderr": stderr, "per_seed": per_seed})

    with open(out / "ablation.csv", "w") as fh:
        fh.write("noise_ratio,alpha,mean,stderr\n")
        for row in rows:
            fh.write(f"{row['noise_ratio']:g},{row['alpha']:g},"
                     f"{row['mean']!r},{row['stderr']!r}\n")
    summary = {
        "name": config.name,
        "kind": "ablation",
        "alphas": config.alphas,
        "noise_ratios": config.noise_ratios,
        "seeds": config.seeds,
        "early_window": [lo, hi],
        "rows": rows,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return rows


def run_breakdown(p_grid, out_dir, problem=None) -> list:
    """Breakdown study over the p grid; writes breakdown.csv."""
    rows = breakdown_experiment(p_grid, problem)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_breakdown_csv(rows, out / "breakdown.csv")
    return rows
