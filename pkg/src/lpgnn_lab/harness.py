"""Seeded end-to-end experiments and parameter sweeps.

One experiment repeat runs, in order: the pre-LDP attack (inject, flip or
poison), client-side encoding of features and randomized response on
labels, the optional client-side domain check, server-side rectification,
KProp on features, DROP pseudo-labels, training and evaluation. Inference
and poisoning attacks read the captured reports instead of training.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import attacks
from .gnn import ModelConfig, PrivatizedInputs, TrainConfig, evaluate, train
from .graph import Dataset, SyntheticConfig, generate_synthetic, load_dataset, top_k_by_degree
from .ldp import (EncodeStats, MbmParams, RrParams, multibit_encode_batch, multibit_rectify, randomized_response,
                  validate_feature_domain)
from .rng import stream

CSV_COLUMNS = (
    "dataset", "arch", "eps_x", "eps_y", "m", "k_x", "k_y", "attack", "attack_param", "defense",
    "seed", "repeat", "test_accuracy", "cosine", "mean_fd", "success_rate", "num_inferences", "wall_time_s",
)
ATTACKS = ("none", "inject", "flip", "infer", "poison")
SWEEPABLE = {"rate": "attack_param", "attack_param": "attack_param", "eps_x": "eps_x",
             "eps_y": "eps_y", "k_x": "k_x", "k_y": "k_y", "m": "m"}
METRICS = {
    "none": ("test_accuracy",),
    "inject": ("test_accuracy",),
    "flip": ("test_accuracy",),
    "infer": ("cosine", "mean_fd"),
    "poison": ("success_rate", "num_inferences"),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to rerun one experiment.

    ``dataset`` is a directory path or ``"synthetic"``; in the latter case
    ``synthetic`` holds the generator settings and the graph is drawn from
    ``seed``. ``m = 0`` means ``m = d`` (every coordinate reported).
    """

    dataset: str = "synthetic"
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    arch: str = "gcn"
    eps_x: float = 8.0
    eps_y: float = 4.0
    m: int = 0
    k_x: int = 4
    k_y: int = 4
    attack: str = "none"
    attack_param: float = 0.0
    defense: bool = False
    seed: int = 0
    repeats: int = 5
    hidden_dim: int = 16
    dropout: float = 0.0
    learning_rate: float = 0.05
    weight_decay: float = 5e-4
    max_epochs: int = 300
    patience: int = 50
    optimizer: str = "gd"

    def validate(self) -> None:
        if not self.eps_x > 0 or not self.eps_y > 0:
            raise ConfigError("eps_x and eps_y must be positive")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if self.attack not in ATTACKS:
            raise ConfigError(f"attack must be one of {ATTACKS}")
        if self.attack in ("inject", "flip", "poison") and not 0 < self.attack_param <= 1:
            raise ConfigError(f"{self.attack} needs attack_param in (0, 1]")
        if self.attack == "infer" and not (self.attack_param >= 1 and float(self.attack_param).is_integer()):
            raise ConfigError("infer needs attack_param = number of target nodes (integer >= 1)")
        if self.m < 0:
            raise ConfigError("m must be >= 0 (0 means m = d)")
        if self.k_x < 0 or self.k_y < 0:
            raise ConfigError("k_x and k_y must be non-negative")
        try:
            ModelConfig(self.arch, self.hidden_dim, 2, self.dropout, self.k_x, self.k_y)
            TrainConfig(self.learning_rate, self.weight_decay, self.max_epochs, self.patience, 0, self.optimizer)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.dataset == "synthetic":
            try:
                self.synthetic.validate()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["synthetic"]["split_fractions"] = list(self.synthetic.split_fractions)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        syn = data.get("synthetic")
        if isinstance(syn, dict):
            syn = dict(syn)
            if "split_fractions" in syn:
                syn["split_fractions"] = tuple(syn["split_fractions"])
            try:
                data["synthetic"] = SyntheticConfig(**syn)
            except TypeError as exc:
                raise ConfigError(f"bad synthetic config: {exc}") from None
        return cls(**data)


@dataclass
class ResultRow:
    config: ExperimentConfig
    repeat: int
    metrics: dict
    wall_time_s: float
    detected: int = 0
    num_poisoned: int = 0

    def csv_record(self) -> dict:
        c = self.config
        rec = {
            "dataset": c.dataset,
            "arch": c.arch,
            "eps_x": c.eps_x,
            "eps_y": c.eps_y,
            "m": c.m,
            "k_x": c.k_x,
            "k_y": c.k_y,
            "attack": c.attack,
            "attack_param": c.attack_param,
            "defense": int(c.defense),
            "seed": c.seed,
            "repeat": self.repeat,
            "wall_time_s": f"{self.wall_time_s:.3f}",
        }
        for key in ("test_accuracy", "cosine", "mean_fd", "success_rate", "num_inferences"):
            value = self.metrics.get(key)
            if value is None or (isinstance(value, float) and math.isnan(value)):
                rec[key] = ""
            elif isinstance(value, float):
                rec[key] = repr(value)
            else:
                rec[key] = value
        return rec

    def to_json(self) -> dict:
        metrics = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in self.metrics.items()}
        return {
            "config": self.config.to_dict(),
            "repeat": self.repeat,
            "metrics": metrics,
            "detected": self.detected,
            "num_poisoned": self.num_poisoned,
            "wall_time_s": self.wall_time_s,
        }


def _load(config: ExperimentConfig) -> Dataset:
    if config.dataset == "synthetic":
        return generate_synthetic(config.synthetic, config.seed)
    return load_dataset(config.dataset)


def _train_seed(seed, repeat):
    return int(stream(seed, "repeat", repeat, "train").integers(0, 2**63 - 1))


def run_repeat(config: ExperimentConfig, repeat: int, dataset: Dataset | None = None) -> ResultRow:
    start = time.perf_counter()
    clean = dataset if dataset is not None else _load(config)
    s = (config.seed, "repeat", repeat)
    ds = clean
    poisoned = np.zeros(0, dtype=np.int64)

    if config.attack == "inject":
        ds = attacks.inject_nodes(ds, attacks.NodeInjectionConfig(config.attack_param), stream(*s, "attack"))
    elif config.attack == "flip":
        ds = attacks.flip_labels(ds, attacks.LabelFlipConfig(config.attack_param), stream(*s, "attack"))

    m = config.m or ds.d
    params = MbmParams(config.eps_x, ds.alpha, ds.beta, ds.d, m)
    features = ds.features
    if config.attack == "poison":
        n_t = attacks.attack_count(config.attack_param, ds.num_nodes)
        poisoned = np.sort(stream(*s, "attack").choice(ds.num_nodes, size=n_t, replace=False))
        features = attacks.apply_poison(features, poisoned, attacks.compute_poison(params))

    # client side
    flagged = np.zeros(ds.num_nodes, dtype=bool)
    if config.defense:
        flagged = np.array([not validate_feature_domain(row, ds.alpha, ds.beta) for row in features], dtype=bool)
    enc = multibit_encode_batch(features, params, stream(*s, "ldp", "features"), EncodeStats())
    # a node that detects tampering withholds its report; the server sees zeros
    enc[flagged] = 0
    noisy_labels = randomized_response(ds.labels, RrParams(config.eps_y, ds.num_classes), stream(*s, "ldp", "labels"))

    # server side
    rectified = multibit_rectify(enc, params)
    metrics = {}
    if config.attack == "infer":
        targets = top_k_by_degree(ds.graph, min(int(config.attack_param), ds.num_nodes))
        res = attacks.infer_features_mean(rectified, ds.graph, targets, clean.features)
        metrics["cosine"] = res.mean_cosine
        metrics["mean_fd"] = res.mean_fd_avg
    elif config.attack == "poison":
        domain = "binary" if attacks.is_binary_domain(clean) else "general"
        res = attacks.poison_inference(enc[poisoned], poisoned, params, domain, clean.features[poisoned])
        metrics["success_rate"] = res.success_rate
        metrics["num_inferences"] = res.num_inferences
        metrics["num_exact"] = res.num_exact
    else:
        model_config = ModelConfig(config.arch, config.hidden_dim, 2, config.dropout, config.k_x, config.k_y)
        train_config = TrainConfig(config.learning_rate, config.weight_decay, config.max_epochs, config.patience,
                                   _train_seed(config.seed, repeat), config.optimizer)
        inputs = PrivatizedInputs(rectified, noisy_labels, ds.train_mask | ds.val_mask)
        model = train(ds, model_config, train_config, inputs)
        # score against the labels nodes held before any attack
        true_labels = np.concatenate([clean.labels, ds.labels[clean.num_nodes:]])
        metrics["test_accuracy"] = evaluate(model, ds.replace(labels=true_labels), ds.test_mask)

    return ResultRow(config, repeat, metrics, time.perf_counter() - start,
                     detected=int(flagged[poisoned].sum()) if len(poisoned) else int(flagged.sum()),
                     num_poisoned=len(poisoned))


def run_experiment(config: ExperimentConfig) -> list:
    """One :class:`ResultRow` per repeat; deterministic in ``(config, seed)``."""
    config.validate()
    dataset = _load(config)
    return [run_repeat(config, r, dataset) for r in range(config.repeats)]


def sweep_configs(base: ExperimentConfig, axis: str, values) -> list:
    if axis not in SWEEPABLE:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEPABLE)}")
    name = SWEEPABLE[axis]
    out = []
    for v in values:
        if name in ("k_x", "k_y", "m"):
            v = int(v)
        else:
            v = float(v)
        cfg = replace(base, **{name: v})
        cfg.validate()
        out.append(cfg)
    return out


def run_sweep_rows(base: ExperimentConfig, axis: str, values) -> list:
    rows = []
    for cfg in sweep_configs(base, axis, values):
        rows.extend(run_experiment(cfg))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.csv_record())
    return buf.getvalue()


def run_sweep(base: ExperimentConfig, axis: str, values) -> str:
    """Run ``base`` at each value of ``axis`` and return the CSV document."""
    return rows_to_csv(run_sweep_rows(base, axis, values))


def strip_wall_time(csv_text: str) -> str:
    """CSV with the wall-time column removed, for determinism comparisons."""
    reader = csv.DictReader(io.StringIO(csv_text))
    cols = [c for c in reader.fieldnames if c != "wall_time_s"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for rec in reader:
        writer.writerow(rec)
    return buf.getvalue()


REPORT_KEYS = ("dataset", "arch", "eps_x", "eps_y", "m", "k_x", "k_y", "attack", "attack_param", "defense")
REPORT_METRICS = ("test_accuracy", "cosine", "mean_fd", "success_rate", "num_inferences")


def summarize(csv_text: str) -> list:
    """Group rows by configuration; mean and sample std of every metric present."""
    reader = csv.DictReader(io.StringIO(csv_text))
    missing = set(REPORT_KEYS) - set(reader.fieldnames or ())
    if missing:
        raise ConfigError(f"CSV lacks columns {sorted(missing)}")
    groups = {}
    for rec in reader:
        key = tuple(rec[k] for k in REPORT_KEYS)
        groups.setdefault(key, []).append(rec)
    out = []
    for key, recs in groups.items():
        entry = dict(zip(REPORT_KEYS, key))
        entry["n"] = len(recs)
        for metric in REPORT_METRICS:
            vals = [float(r[metric]) for r in recs if r.get(metric, "") != ""]
            if vals:
                entry[metric] = (float(np.mean(vals)), float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)
        out.append(entry)
    return out


def format_report(summary) -> str:
    lines = []
    header = ["attack", "param", "arch", "eps_x", "eps_y", "k_x", "k_y", "defense", "n", "metric", "mean", "std"]
    lines.append("\t".join(header))
    for entry in summary:
        for metric in REPORT_METRICS:
            if metric in entry:
                mean, std = entry[metric]
                lines.append("\t".join([
                    entry["attack"], entry["attack_param"], entry["arch"], entry["eps_x"], entry["eps_y"],
                    entry["k_x"], entry["k_y"], entry["defense"], str(entry["n"]), metric,
                    f"{mean:.4f}", f"{std:.4f}",
                ]))
    return "\n".join(lines) + "\n"


def rows_to_json(rows) -> str:
    return json.dumps([r.to_json() for r in rows], indent=2)
