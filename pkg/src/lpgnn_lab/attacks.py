"""Attacks on locally private GNN training and their metrics.

* node injection: black-box nodes with random features/labels hung off the
  highest-degree nodes;
* label flipping: highest-degree nodes relabelled to a wrong class before
  any LDP step;
* mean inference: a curious server averages rectified reports over a
  target's closed neighbourhood;
* poisoning: every feature of a target is shifted by
  ``p = (alpha - beta) / (e^(eps/m) - 1)``, which drives the encoder's
  Bernoulli parameter to exactly 0 wherever the original value was alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .graph import Dataset, Graph, add_nodes_with_edges, top_k_by_degree
from .ldp import MbmParams, bernoulli_param

EXACT = "exact"
EXCLUDED_ALPHA = "excluded-alpha"
NO_INFORMATION = "no-information"


@dataclass(frozen=True)
class NodeInjectionConfig:
    rate: float
    feature_mode: str = "random"
    label_mode: str = "uniform"

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError("injection rate must lie in (0, 1]")


@dataclass(frozen=True)
class LabelFlipConfig:
    rate: float
    targeting: str = "degree"

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError("flip rate must lie in (0, 1]")
        if self.targeting != "degree":
            raise ValueError("only highest-degree targeting is supported")


def attack_count(rate: float, num_nodes: int) -> int:
    # guard against 0.1 * 100 = 10.000000000000002 style ceilings
    return max(1, math.ceil(round(rate * num_nodes, 9)))


def _random_rows(n, d, alpha, beta, binary, rng):
    if binary:
        return np.where(rng.random((n, d)) < 0.5, alpha, beta)
    return rng.uniform(alpha, beta, size=(n, d))


def plan_injection(graph: Graph, d: int, num_classes: int, alpha: float, beta: float,
                   config: NodeInjectionConfig, rng, binary: bool = False) -> list:
    """Plan a black-box injection: one ``(row, label, [anchor])`` per new node.

    Only the graph structure and dataset dimensions are consulted, never
    existing features or labels. Anchors are the top-degree nodes in order
    and cycle if more nodes are injected than exist.
    """
    n_new = attack_count(config.rate, graph.num_nodes)
    ranked = top_k_by_degree(graph, min(n_new, graph.num_nodes))
    rows = _random_rows(n_new, d, alpha, beta, binary, rng)
    labels = rng.integers(0, num_classes, size=n_new)
    return [(rows[j], int(labels[j]), [ranked[j % len(ranked)]]) for j in range(n_new)]


def is_binary_domain(dataset: Dataset) -> bool:
    return bool(np.all((dataset.features == dataset.alpha) | (dataset.features == dataset.beta)))


def inject_nodes(dataset: Dataset, config: NodeInjectionConfig, rng, binary: bool | None = None,
                 include_in_train: bool = True) -> Dataset:
    """Inject ``ceil(rate * N)`` random nodes, each tied to one top-degree anchor.

    ``binary`` says whether features are stored as {alpha, beta}; by default
    it is read off the dataset, the one piece of storage metadata the
    attacker is assumed to know.
    """
    if binary is None:
        binary = is_binary_domain(dataset)
    specs = plan_injection(dataset.graph, dataset.d, dataset.num_classes, dataset.alpha, dataset.beta,
                          config, rng, binary=binary)
    return add_nodes_with_edges(dataset, specs, include_in_train=include_in_train)


def flip_labels(dataset: Dataset, config: LabelFlipConfig, rng) -> Dataset:
    """Relabel the top-degree nodes to a uniformly chosen different class."""
    C = dataset.num_classes
    if C < 2:
        raise ValueError("label flipping needs at least two classes")
    targets = np.asarray(top_k_by_degree(dataset.graph, attack_count(config.rate, dataset.num_nodes)))
    labels = dataset.labels.copy()
    shift = rng.integers(1, C, size=len(targets))
    labels[targets] = (labels[targets] + shift) % C
    return dataset.replace(labels=labels)


# --------------------------------------------------------------------------
# similarity metrics

def cosine_similarity(a, b) -> tuple[float, bool]:
    """Cosine of the angle between ``a`` and ``b``.

    Returns ``(value, degenerate)``; a zero-norm input gives ``(0.0, True)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors must have equal length")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0, True
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0)), False


def mean_feature_difference(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("vectors must have equal length")
    return float(np.mean(np.abs(a - b)))


@dataclass
class InferenceResult:
    targets: np.ndarray
    predicted_features: np.ndarray
    cosine: np.ndarray
    mean_fd: np.ndarray
    degenerate: np.ndarray

    @property
    def mean_cosine(self) -> float:
        return float(np.mean(self.cosine))

    @property
    def mean_abs_cosine(self) -> float:
        return float(np.mean(np.abs(self.cosine)))

    @property
    def mean_fd_avg(self) -> float:
        return float(np.mean(self.mean_fd))


def infer_features_mean(rectified, graph: Graph, targets, true_features, reported=None) -> InferenceResult:
    """Predict each target's features as the mean report over its closed neighbourhood.

    ``rectified`` is an ``(n, d)`` matrix of rectified reports. ``reported``
    optionally marks which nodes actually sent a report; a target whose whole
    closed neighbourhood is unreported raises ``ValueError``.
    """
    targets = np.asarray(targets, dtype=np.int64)
    rectified = np.asarray(rectified, dtype=np.float64)
    if reported is not None:
        reported = np.asarray(reported, dtype=bool)
        for t in targets:
            if not reported[t] and not reported[graph.neighbors(t)].any():
                raise ValueError(f"target {t} has no rectified responses")
    pred = kernels.closed_neighborhood_mean(graph.indptr, graph.indices, rectified, targets)
    truth = np.asarray(true_features, dtype=np.float64)[targets]
    cos = np.empty(len(targets))
    fd = np.empty(len(targets))
    flag = np.zeros(len(targets), dtype=bool)
    for i in range(len(targets)):
        cos[i], flag[i] = cosine_similarity(pred[i], truth[i])
        fd[i] = mean_feature_difference(pred[i], truth[i])
    return InferenceResult(targets, pred, cos, fd, flag)


# --------------------------------------------------------------------------
# poisoning

def compute_poison(params: MbmParams) -> float:
    """Shift that zeroes the encoder's Bernoulli parameter at x = alpha."""
    return (params.alpha - params.beta) / math.expm1(params.eps_x / params.m)


@dataclass(frozen=True)
class PoisonConfig:
    targets: tuple
    params: MbmParams
    p: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "p", compute_poison(self.params))


def apply_poison(features, targets, p: float):
    out = np.array(features, dtype=np.float64, copy=True)
    targets = np.asarray(list(targets), dtype=np.int64)
    if targets.size:
        out[targets] += p
    return out


def poison_collapse_probability(params: MbmParams) -> float:
    """Raw Bernoulli parameter for a poisoned alpha entry (0 up to rounding)."""
    return bernoulli_param(params.alpha + compute_poison(params), params)


@dataclass
class PoisonInferenceResult:
    targets: np.ndarray
    verdicts: np.ndarray  # object array (targets x d) of verdict strings
    num_inferences: int
    num_correct: int

    @property
    def success_rate(self) -> float:
        """Fraction of correct verdicts; ``nan`` when nothing was inferred."""
        if self.num_inferences == 0:
            return float("nan")
        return self.num_correct / self.num_inferences

    @property
    def num_exact(self) -> int:
        return int(np.sum(self.verdicts == EXACT))


def poison_inference(encoded, targets, params: MbmParams, value_domain: str = "binary",
                     original_features=None) -> PoisonInferenceResult:
    """Server-side reading of encoded reports from poisoned targets.

    ``encoded`` has one row per target (or per trial of a target, with
    ``targets`` repeated accordingly). A +1 entry certifies the original value
    was not alpha: under a binary domain that means it was beta. Entries that
    are -1 or 0 carry no certain information.

    ``original_features`` (one row per row of ``encoded``) is used only to
    score the verdicts.
    """
    if value_domain not in ("binary", "general"):
        raise ValueError("value_domain must be 'binary' or 'general'")
    encoded = np.atleast_2d(np.asarray(encoded))
    targets = np.asarray(targets, dtype=np.int64)
    if len(targets) != encoded.shape[0]:
        raise ValueError("need one target id per encoded row")
    plus = encoded == 1
    verdicts = np.full(encoded.shape, NO_INFORMATION, dtype=object)
    verdicts[plus] = EXACT if value_domain == "binary" else EXCLUDED_ALPHA

    n_inf = int(plus.sum())
    n_correct = 0
    if original_features is not None and n_inf:
        orig = np.atleast_2d(np.asarray(original_features, dtype=np.float64))
        if value_domain == "binary":
            n_correct = int(np.sum(orig[plus] == params.beta))
        else:
            n_correct = int(np.sum(orig[plus] != params.alpha))
    return PoisonInferenceResult(targets, verdicts, n_inf, n_correct)
