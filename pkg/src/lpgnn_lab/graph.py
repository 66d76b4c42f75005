"""Graph and dataset containers, dataset IO and a planted-partition generator.

A dataset on disk is a directory holding::

    meta.json     {"num_nodes", "d", "num_classes", "alpha", "beta"}
    edges.csv     header ``u,v``; one undirected edge per row with u < v
    features.csv  no header; num_nodes rows of d comma separated decimals
    labels.csv    no header; one integer class id per row
    splits.json   {"train": [...], "val": [...], "test": [...]}
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class DatasetFormatError(ValueError):
    """Raised when a dataset directory does not follow the documented format."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph in CSR form.

    ``indices[indptr[v]:indptr[v + 1]]`` are the neighbours of ``v`` in
    strictly increasing order.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, num_nodes: int, edges) -> "Graph":
        """Build from an iterable/array of (u, v) pairs.

        Duplicates and both orientations are merged; self-loops are rejected.
        """
        num_nodes = int(num_nodes)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if e.min() < 0 or e.max() >= num_nodes:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
        both = np.concatenate([e, e[:, ::-1]])
        keys = np.unique(both[:, 0] * num_nodes + both[:, 1])
        src, dst = np.divmod(keys, num_nodes) if num_nodes else (keys, keys)
        counts = np.bincount(src, minlength=num_nodes)
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(num_nodes, indptr, dst.astype(np.int32))

    @classmethod
    def complete(cls, num_nodes: int) -> "Graph":
        n = int(num_nodes)
        indptr = np.arange(n + 1, dtype=np.int64) * (n - 1)
        cols = np.arange(n, dtype=np.int32)
        indices = np.empty(n * (n - 1), dtype=np.int32)
        for v in range(n):
            row = indices[v * (n - 1):(v + 1) * (n - 1)]
            row[:v] = cols[:v]
            row[v:] = cols[v + 1:]
        return cls(n, indptr, indices)

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an (E, 2) array with u < v, lexicographically sorted."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), np.diff(self.indptr))
        dst = self.indices.astype(np.int64)
        keep = src < dst
        return np.stack([src[keep], dst[keep]], axis=1)

    def validate(self) -> None:
        """Check symmetry, ordering and the absence of self-loops."""
        n = self.num_nodes
        if len(self.indptr) != n + 1 or self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise ValueError("malformed indptr")
        src = np.repeat(np.arange(n, dtype=np.int64), np.diff(self.indptr))
        dst = self.indices.astype(np.int64)
        if np.any(src == dst):
            raise ValueError("self-loop present")
        if len(dst):
            same_row = src[1:] == src[:-1]
            if np.any(same_row & (dst[1:] <= dst[:-1])):
                raise ValueError("neighbour lists must be strictly increasing")
        fwd = np.sort(src * n + dst)
        rev = np.sort(dst * n + src)
        if not np.array_equal(fwd, rev):
            raise ValueError("adjacency is not symmetric")

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int
    alpha: float = 0.0
    beta: float = 1.0
    name: str = field(default="dataset", compare=False)

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def validate(self, check_range: bool = True) -> None:
        self.graph.validate()
        n = self.num_nodes
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError("feature matrix must have one row per node")
        if self.labels.shape != (n,):
            raise ValueError("label vector must have one entry per node")
        if self.alpha >= self.beta:
            raise ValueError("alpha must be smaller than beta")
        if check_range and self.features.size and (
            self.features.min() < self.alpha or self.features.max() > self.beta
        ):
            raise ValueError("feature outside [alpha, beta]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("label outside [0, num_classes)")
        masks = [self.train_mask, self.val_mask, self.test_mask]
        for mask in masks:
            if mask.shape != (n,) or mask.dtype != bool:
                raise ValueError("masks must be boolean vectors over nodes")
            if not mask.any():
                raise ValueError("masks must be non-empty")
        if np.any(masks[0] & masks[1]) or np.any(masks[0] & masks[2]) or np.any(masks[1] & masks[2]):
            raise ValueError("train/val/test masks overlap")

    def replace(self, **changes) -> "Dataset":
        fields = {
            "graph": self.graph,
            "features": self.features,
            "labels": self.labels,
            "train_mask": self.train_mask,
            "val_mask": self.val_mask,
            "test_mask": self.test_mask,
            "num_classes": self.num_classes,
            "alpha": self.alpha,
            "beta": self.beta,
            "name": self.name,
        }
        fields.update(changes)
        return Dataset(**fields)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.graph == other.graph
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.train_mask, other.train_mask)
            and np.array_equal(self.val_mask, other.val_mask)
            and np.array_equal(self.test_mask, other.test_mask)
            and self.num_classes == other.num_classes
            and self.alpha == other.alpha
            and self.beta == other.beta
        )

    __hash__ = None


@dataclass(frozen=True)
class SyntheticConfig:
    num_nodes: int = 1000
    num_classes: int = 4
    d: int = 128
    intra_edge_prob: float = 0.05
    inter_edge_prob: float = 0.005
    feature_signal: float = 0.9
    split_fractions: tuple = (0.5, 0.25, 0.25)

    def validate(self) -> None:
        if self.num_nodes < 3:
            raise ValueError("need at least 3 nodes to populate train/val/test")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        for name in ("intra_edge_prob", "inter_edge_prob", "feature_signal"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.intra_edge_prob > self.inter_edge_prob:
            raise ValueError("intra_edge_prob must exceed inter_edge_prob")
        if len(self.split_fractions) != 3 or min(self.split_fractions) < 0:
            raise ValueError("split_fractions must be three non-negative numbers")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split_fractions must sum to 1")
        if self.d % self.num_classes:
            raise ValueError(
                f"d={self.d} is not divisible by num_classes={self.num_classes}; "
                "each class owns an equal block of d / num_classes features"
            )


def degrees(graph: Graph) -> np.ndarray:
    return np.diff(graph.indptr)


def top_k_by_degree(graph: Graph, k: int) -> list[int]:
    """The ``k`` highest-degree nodes, ties broken by ascending id."""
    if k > graph.num_nodes:
        raise ValueError(f"k={k} exceeds num_nodes={graph.num_nodes}")
    if k < 0:
        raise ValueError("k must be non-negative")
    deg = degrees(graph)
    order = np.lexsort((np.arange(graph.num_nodes), -deg))
    return [int(v) for v in order[:k]]


def random_splits(num_nodes: int, fractions: Sequence[float], rng) -> tuple:
    perm = rng.permutation(num_nodes)
    n_train = int(round(fractions[0] * num_nodes))
    n_val = int(round(fractions[1] * num_nodes))
    masks = []
    for ids in (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]):
        mask = np.zeros(num_nodes, dtype=bool)
        mask[ids] = True
        masks.append(mask)
    return tuple(masks)


def generate_synthetic(config: SyntheticConfig, seed: int) -> Dataset:
    """Planted-partition graph with class-block binary features.

    Deterministic in ``(config, seed)``.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    n, C, d = config.num_nodes, config.num_classes, config.d
    labels = rng.integers(0, C, size=n)

    edges = []
    for u in range(n - 1):
        others = np.arange(u + 1, n)
        prob = np.where(labels[others] == labels[u], config.intra_edge_prob, config.inter_edge_prob)
        hit = rng.random(n - u - 1) < prob
        if hit.any():
            nbrs = others[hit]
            edges.append(np.stack([np.full(len(nbrs), u), nbrs], axis=1))
    edge_arr = np.concatenate(edges) if edges else np.empty((0, 2), dtype=np.int64)
    graph = Graph.from_edges(n, edge_arr)

    block = d // C
    own_block = (np.arange(d)[None, :] // block) == labels[:, None]
    on_prob = np.where(own_block, config.feature_signal, 1.0 - config.feature_signal)
    features = (rng.random((n, d)) < on_prob).astype(np.float64)

    train, val, test = random_splits(n, config.split_fractions, rng)
    return Dataset(graph, features, labels.astype(np.int64), train, val, test, C, 0.0, 1.0, name="synthetic")


def add_nodes_with_edges(dataset: Dataset, specs: Iterable, include_in_train: bool = True) -> Dataset:
    """Append nodes given as ``(feature_row, label, neighbour_ids)`` triples.

    Neighbour ids must refer to nodes of the original dataset. New nodes join
    the train mask unless ``include_in_train`` is False; they never join
    val/test.
    """
    specs = list(specs)
    if not specs:
        return dataset
    n, d = dataset.num_nodes, dataset.d
    rows, labels, new_edges = [], [], []
    for offset, (row, label, nbrs) in enumerate(specs):
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (d,):
            raise ValueError(f"injected node {offset}: feature row has length {row.size}, expected {d}")
        nbrs = np.asarray(list(nbrs), dtype=np.int64)
        if nbrs.size and (nbrs.min() < 0 or nbrs.max() >= n):
            raise ValueError(f"injected node {offset}: neighbour id outside the original {n} nodes")
        rows.append(row)
        labels.append(int(label))
        new_edges.extend((int(u), n + offset) for u in nbrs)

    total = n + len(specs)
    graph = Graph.from_edges(total, np.concatenate([dataset.graph.edge_list(), np.asarray(new_edges).reshape(-1, 2)]))
    pad = np.zeros(len(specs), dtype=bool)
    return dataset.replace(
        graph=graph,
        features=np.vstack([dataset.features, np.asarray(rows)]),
        labels=np.concatenate([dataset.labels, np.asarray(labels, dtype=np.int64)]),
        train_mask=np.concatenate([dataset.train_mask, np.full(len(specs), include_in_train)]),
        val_mask=np.concatenate([dataset.val_mask, pad]),
        test_mask=np.concatenate([dataset.test_mask, pad]),
    )


def save_dataset(dataset: Dataset, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "num_nodes": dataset.num_nodes,
        "d": dataset.d,
        "num_classes": dataset.num_classes,
        "alpha": dataset.alpha,
        "beta": dataset.beta,
    }
    with open(path / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    with open(path / "edges.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v"])
        writer.writerows(dataset.graph.edge_list().tolist())
    with open(path / "features.csv", "w", newline="") as fh:
        for row in dataset.features:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(path / "labels.csv", "w") as fh:
        fh.writelines(f"{int(y)}\n" for y in dataset.labels)
    splits = {
        name: np.flatnonzero(mask).tolist()
        for name, mask in (("train", dataset.train_mask), ("val", dataset.val_mask), ("test", dataset.test_mask))
    }
    with open(path / "splits.json", "w") as fh:
        json.dump(splits, fh)


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DatasetFormatError(path, None, "missing file") from None
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None


def _read_lines(path):
    try:
        with open(path, newline="") as fh:
            return fh.read().splitlines()
    except FileNotFoundError:
        raise DatasetFormatError(path, None, "missing file") from None


def load_dataset(path) -> Dataset:
    path = Path(path)
    meta_path = path / "meta.json"
    meta = _read_json(meta_path)
    try:
        n = int(meta["num_nodes"])
        d = int(meta["d"])
        C = int(meta["num_classes"])
        alpha = float(meta["alpha"])
        beta = float(meta["beta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetFormatError(meta_path, None, f"bad or missing field: {exc}") from None
    if alpha >= beta:
        raise DatasetFormatError(meta_path, None, "alpha must be smaller than beta")

    edges_path = path / "edges.csv"
    lines = _read_lines(edges_path)
    if not lines or lines[0].replace(" ", "") != "u,v":
        raise DatasetFormatError(edges_path, 1, "expected header 'u,v'")
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            u, v = (int(x) for x in parts)
        except ValueError:
            raise DatasetFormatError(edges_path, lineno, f"malformed edge row {line!r}") from None
        if not (0 <= u < n and 0 <= v < n):
            raise DatasetFormatError(edges_path, lineno, f"node id out of range [0, {n})")
        if u == v:
            raise DatasetFormatError(edges_path, lineno, "self-loop")
        edges.append((u, v))

    feat_path = path / "features.csv"
    lines = [ln for ln in _read_lines(feat_path) if ln.strip()]
    if len(lines) != n:
        raise DatasetFormatError(feat_path, None, f"expected {n} rows, found {len(lines)}")
    features = np.empty((n, d))
    for lineno, line in enumerate(lines, start=1):
        parts = line.split(",")
        if len(parts) != d:
            raise DatasetFormatError(feat_path, lineno, f"expected {d} values, found {len(parts)}")
        try:
            row = [float(x) for x in parts]
        except ValueError:
            raise DatasetFormatError(feat_path, lineno, "non-numeric feature value") from None
        for col, value in enumerate(row):
            if not alpha <= value <= beta:
                raise DatasetFormatError(
                    feat_path, lineno, f"row {lineno - 1} column {col}: value {value} outside [{alpha}, {beta}]"
                )
        features[lineno - 1] = row

    label_path = path / "labels.csv"
    lines = [ln for ln in _read_lines(label_path) if ln.strip()]
    if len(lines) != n:
        raise DatasetFormatError(label_path, None, f"expected {n} rows, found {len(lines)}")
    labels = np.empty(n, dtype=np.int64)
    for lineno, line in enumerate(lines, start=1):
        try:
            y = int(line)
        except ValueError:
            raise DatasetFormatError(label_path, lineno, f"malformed label {line!r}") from None
        if not 0 <= y < C:
            raise DatasetFormatError(label_path, lineno, f"label {y} outside [0, {C})")
        labels[lineno - 1] = y

    split_path = path / "splits.json"
    splits = _read_json(split_path)
    masks = {}
    for name in ("train", "val", "test"):
        if name not in splits:
            raise DatasetFormatError(split_path, None, f"missing split {name!r}")
        mask = np.zeros(n, dtype=bool)
        ids = np.asarray(splits[name], dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= n):
            raise DatasetFormatError(split_path, None, f"split {name!r} has node id out of range")
        mask[ids] = True
        masks[name] = mask

    dataset = Dataset(
        Graph.from_edges(n, edges),
        features,
        labels,
        masks["train"],
        masks["val"],
        masks["test"],
        C,
        alpha,
        beta,
        name=os.path.basename(os.path.normpath(path)),
    )
    try:
        dataset.validate()
    except ValueError as exc:
        raise DatasetFormatError(path, None, str(exc)) from None
    return dataset
