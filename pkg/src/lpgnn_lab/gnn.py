"""Small dense/sparse GNN stack: propagation, GCN and GraphSAGE, training.

Everything is full-batch and float64. Gradients are written out by hand for
the two supported two-layer architectures.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .graph import Dataset, Graph
from .rng import stream

log = logging.getLogger(__name__)

ARCHITECTURES = ("gcn", "sage")


class TrainingError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# propagation

def _adjacency(graph: Graph) -> sp.csr_matrix:
    n = graph.num_nodes
    return sp.csr_matrix(
        (np.ones(len(graph.indices)), graph.indices, graph.indptr), shape=(n, n)
    )


def normalize_adjacency(graph: Graph) -> sp.csr_matrix:
    """Symmetric GCN normalisation D^-1/2 (A + I) D^-1/2."""
    a_hat = _adjacency(graph) + sp.identity(graph.num_nodes, format="csr")
    inv_sqrt = 1.0 / np.sqrt(np.asarray(a_hat.sum(axis=1)).ravel())
    d = sp.diags(inv_sqrt)
    return sp.csr_matrix(d @ a_hat @ d)


def mean_operator(graph: Graph, include_self: bool = True) -> sp.csr_matrix:
    """Row-stochastic averaging operator.

    With ``include_self`` this is D^-1 (A + I); otherwise D^-1 A with the
    rows of isolated nodes left at zero.
    """
    a = _adjacency(graph)
    if include_self:
        a = a + sp.identity(graph.num_nodes, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return sp.csr_matrix(sp.diags(inv) @ a)


def kprop(features, graph: Graph, k: int):
    """``k`` rounds of self-inclusive neighbourhood averaging."""
    if k < 0:
        raise ValueError("k must be non-negative")
    x = np.asarray(features, dtype=np.float64)
    if x.shape[0] != graph.num_nodes:
        raise ValueError("feature rows must match num_nodes")
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    for _ in range(k):
        x = kernels.mean_aggregate(graph.indptr, graph.indices, x)
    return x[:, 0] if squeeze else x


def one_hot(labels, num_classes: int):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def drop_pseudo_labels(noisy_labels, graph: Graph, k_y: int, num_classes: int, mask=None):
    """Denoise labels by propagating their one-hot encodings ``k_y`` hops.

    Only nodes in ``mask`` (default: all) contribute a label; the others
    start from a zero row. Returns the per-node argmax, ties going to the
    smallest class id. With ``k_y == 0`` the input labels come back unchanged.
    """
    noisy_labels = np.asarray(noisy_labels, dtype=np.int64)
    if noisy_labels.size and (noisy_labels.min() < 0 or noisy_labels.max() >= num_classes):
        raise ValueError("label outside [0, num_classes)")
    if k_y == 0:
        return noisy_labels.copy()
    y = one_hot(noisy_labels, num_classes)
    if mask is not None:
        y[~np.asarray(mask, dtype=bool)] = 0.0
    y = kprop(y, graph, k_y)
    return np.argmax(y, axis=1).astype(np.int64)


# --------------------------------------------------------------------------
# configuration and model

@dataclass(frozen=True)
class ModelConfig:
    architecture: str = "gcn"
    hidden_dim: int = 16
    num_layers: int = 2
    dropout: float = 0.0
    k_x: int = 0
    k_y: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be at least 1")
        if self.num_layers != 2:
            raise ValueError("only two-layer models are supported")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.k_x < 0 or self.k_y < 0:
            raise ValueError("k_x and k_y must be non-negative")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    weight_decay: float = 5e-4
    max_epochs: int = 300
    patience: int = 50
    seed: int = 0
    optimizer: str = "gd"

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError("optimizer must be 'adam' or 'gd'")


@dataclass
class PrivatizedInputs:
    """What the server holds after the LDP step: features and labels."""

    features: np.ndarray
    labels: np.ndarray
    label_mask: np.ndarray | None = None


def _weight_shapes(arch, d, hidden, C):
    if arch == "gcn":
        return {"W1": (d, hidden), "b1": (hidden,), "W2": (hidden, C), "b2": (C,)}
    return {
        "W1_self": (d, hidden), "W1_neigh": (d, hidden), "b1": (hidden,),
        "W2_self": (hidden, C), "W2_neigh": (hidden, C), "b2": (C,),
    }


def init_weights(config: ModelConfig, d: int, num_classes: int, seed: int) -> dict:
    """Glorot-uniform weights, zero biases."""
    rng = stream(seed, "init")
    weights = {}
    for name, shape in _weight_shapes(config.architecture, d, config.hidden_dim, num_classes).items():
        if len(shape) == 1:
            weights[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            weights[name] = rng.uniform(-limit, limit, size=shape)
    return weights


class _Propagator:
    """Caches the sparse operators a model needs for one graph."""

    def __init__(self, graph: Graph, arch: str):
        self.arch = arch
        if arch == "gcn":
            self.op = normalize_adjacency(graph)
        else:
            self.op = mean_operator(graph, include_self=False)
        self.op_t = sp.csr_matrix(self.op.T)


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(weights, x, prop: _Propagator, drop_masks=None):
    cache = {}
    x_in = x if drop_masks is None else x * drop_masks[0]
    cache["x_in"] = x_in
    if prop.arch == "gcn":
        xw = x_in @ weights["W1"]
        z1 = prop.op @ xw + weights["b1"]
    else:
        agg = prop.op @ x_in
        cache["agg1"] = agg
        z1 = x_in @ weights["W1_self"] + agg @ weights["W1_neigh"] + weights["b1"]
    h1 = np.maximum(z1, 0.0)
    cache["z1"] = z1
    h_in = h1 if drop_masks is None else h1 * drop_masks[1]
    cache["h_in"] = h_in
    if prop.arch == "gcn":
        z2 = prop.op @ (h_in @ weights["W2"]) + weights["b2"]
    else:
        agg2 = prop.op @ h_in
        cache["agg2"] = agg2
        z2 = h_in @ weights["W2_self"] + agg2 @ weights["W2_neigh"] + weights["b2"]
    return z2, cache


def _loss_and_grads(weights, x, labels, train_idx, prop, weight_decay, drop_masks=None, need_grad=True):
    logits, cache = _forward(weights, x, prop, drop_masks)
    probs = softmax(logits)
    n_train = len(train_idx)
    picked = probs[train_idx, labels[train_idx]]
    data_loss = -np.mean(np.log(np.maximum(picked, 1e-300)))
    reg = 0.5 * weight_decay * sum(float(np.sum(w * w)) for k, w in weights.items() if k.startswith("W"))
    loss = data_loss + reg
    if not need_grad:
        return loss, None, probs

    dz2 = np.zeros_like(probs)
    dz2[train_idx] = probs[train_idx]
    dz2[train_idx, labels[train_idx]] -= 1.0
    dz2 /= n_train

    grads = {}
    h_in = cache["h_in"]
    if prop.arch == "gcn":
        g = prop.op_t @ dz2
        grads["W2"] = h_in.T @ g
        grads["b2"] = dz2.sum(axis=0)
        dh = g @ weights["W2"].T
    else:
        grads["W2_self"] = h_in.T @ dz2
        grads["W2_neigh"] = cache["agg2"].T @ dz2
        grads["b2"] = dz2.sum(axis=0)
        dh = dz2 @ weights["W2_self"].T + prop.op_t @ (dz2 @ weights["W2_neigh"].T)
    if drop_masks is not None:
        dh = dh * drop_masks[1]
    dz1 = dh * (cache["z1"] > 0)

    x_in = cache["x_in"]
    if prop.arch == "gcn":
        grads["W1"] = x_in.T @ (prop.op_t @ dz1)
        grads["b1"] = dz1.sum(axis=0)
    else:
        grads["W1_self"] = x_in.T @ dz1
        grads["W1_neigh"] = cache["agg1"].T @ dz1
        grads["b1"] = dz1.sum(axis=0)

    for k, w in weights.items():
        if k.startswith("W"):
            grads[k] = grads[k] + weight_decay * w
    return loss, grads, probs


def _accuracy(probs, labels, idx):
    if len(idx) == 0:
        return float("nan")
    return float(np.mean(np.argmax(probs[idx], axis=1) == labels[idx]))


@dataclass
class TrainedModel:
    model_config: ModelConfig
    train_config: TrainConfig
    weights: dict
    history: list = field(default_factory=list)
    best_epoch: int = 0
    input_features: np.ndarray | None = field(default=None, repr=False)
    train_labels: np.ndarray | None = field(default=None, repr=False)

    def predict_proba(self, graph: Graph, features=None):
        x = self.input_features if features is None else np.asarray(features, dtype=np.float64)
        prop = _Propagator(graph, self.model_config.architecture)
        logits, _ = _forward(self.weights, x, prop)
        return softmax(logits)

    def predict(self, graph: Graph, features=None):
        return np.argmax(self.predict_proba(graph, features), axis=1)

    def to_json(self) -> str:
        payload = {
            "model_config": asdict(self.model_config),
            "train_config": asdict(self.train_config),
            "best_epoch": self.best_epoch,
            "weights": {
                k: {"shape": list(w.shape), "data": w.ravel().tolist()} for k, w in self.weights.items()
            },
            "history": self.history,
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        payload = json.loads(text)
        weights = {
            k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in payload["weights"].items()
        }
        return cls(
            ModelConfig(**payload["model_config"]),
            TrainConfig(**payload["train_config"]),
            weights,
            payload.get("history", []),
            payload.get("best_epoch", 0),
        )


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, weights, grads):
        self.t += 1
        for k, g in grads.items():
            m = self.m.get(k, 0.0) * self.beta1 + (1 - self.beta1) * g
            v = self.v.get(k, 0.0) * self.beta2 + (1 - self.beta2) * g * g
            self.m[k], self.v[k] = m, v
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            weights[k] = weights[k] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _GradientDescent:
    def __init__(self, lr):
        self.lr = lr

    def step(self, weights, grads):
        for k, g in grads.items():
            weights[k] = weights[k] - self.lr * g


def prepare_inputs(dataset: Dataset, model_config: ModelConfig, inputs: PrivatizedInputs | None):
    """Apply KProp to features and DROP to labels; returns (features, labels)."""
    if inputs is None:
        feats, labels, label_mask = dataset.features, dataset.labels, None
    else:
        feats, labels, label_mask = inputs.features, inputs.labels, inputs.label_mask
    feats = np.asarray(feats, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if feats.shape[0] != dataset.num_nodes or labels.shape != (dataset.num_nodes,):
        raise ValueError("privatized inputs do not match the dataset shape")
    feats = kprop(feats, dataset.graph, model_config.k_x)
    if label_mask is None:
        label_mask = dataset.train_mask | dataset.val_mask
    pseudo = drop_pseudo_labels(labels, dataset.graph, model_config.k_y, dataset.num_classes, mask=label_mask)
    # nodes that report a label keep seeing their own report at k_y = 0
    return feats, pseudo


def train(dataset: Dataset, model_config: ModelConfig, train_config: TrainConfig,
          privatized_inputs: PrivatizedInputs | None = None) -> TrainedModel:
    """Full-batch training on the train mask; keeps the best-validation weights.

    Validation accuracy is measured against the (pseudo) labels the trainer
    sees, never the true labels.
    """
    x, labels = prepare_inputs(dataset, model_config, privatized_inputs)
    prop = _Propagator(dataset.graph, model_config.architecture)
    weights = init_weights(model_config, x.shape[1], dataset.num_classes, train_config.seed)
    train_idx = np.flatnonzero(dataset.train_mask)
    val_idx = np.flatnonzero(dataset.val_mask)
    if train_config.optimizer == "adam":
        opt = _Adam(train_config.learning_rate)
    else:
        opt = _GradientDescent(train_config.learning_rate)

    best = {k: w.copy() for k, w in weights.items()}
    best_val, best_epoch, waited = -1.0, 0, 0
    history = []
    p = model_config.dropout
    drop_rng = stream(train_config.seed, "dropout")
    for epoch in range(1, train_config.max_epochs + 1):
        masks = None
        if p > 0:
            masks = (
                (drop_rng.random(x.shape) >= p) / (1.0 - p),
                (drop_rng.random((x.shape[0], model_config.hidden_dim)) >= p) / (1.0 - p),
            )
        loss, grads, _ = _loss_and_grads(weights, x, labels, train_idx, prop, train_config.weight_decay, masks)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss {loss} at epoch {epoch}")
        opt.step(weights, grads)

        _, _, probs = _loss_and_grads(weights, x, labels, train_idx, prop, train_config.weight_decay, need_grad=False)
        train_acc = _accuracy(probs, labels, train_idx)
        val_acc = _accuracy(probs, labels, val_idx)
        history.append({"epoch": epoch, "loss": float(loss), "train_acc": train_acc, "val_acc": val_acc})
        if val_acc > best_val:
            best_val, best_epoch, waited = val_acc, epoch, 0
            best = {k: w.copy() for k, w in weights.items()}
        else:
            waited += 1
            if waited >= train_config.patience:
                break
    log.debug("trained %s: best epoch %d val %.3f", model_config.architecture, best_epoch, best_val)
    return TrainedModel(model_config, train_config, best, history, best_epoch, x, labels)


def evaluate(model: TrainedModel, dataset: Dataset, mask, features=None) -> float:
    """Accuracy of ``model`` against the true labels of ``dataset`` on ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("evaluation mask is empty")
    pred = model.predict(dataset.graph, features)
    return float(np.mean(pred[mask] == dataset.labels[mask]))


def grad_check(model_config: ModelConfig, tiny_dataset: Dataset, seed: int = 0, step: float = 1e-5,
               weight_decay: float = 5e-4, weights: dict | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-6)``; the floor keeps
    gradients that are numerically zero from dominating.
    """
    ds = tiny_dataset
    x = np.asarray(ds.features, dtype=np.float64)
    labels = np.asarray(ds.labels, dtype=np.int64)
    prop = _Propagator(ds.graph, model_config.architecture)
    if weights is None:
        weights = init_weights(model_config, x.shape[1], ds.num_classes, seed)
    weights = {k: w.astype(np.float64).copy() for k, w in weights.items()}
    train_idx = np.flatnonzero(ds.train_mask)
    _, grads, _ = _loss_and_grads(weights, x, labels, train_idx, prop, weight_decay)

    worst = 0.0
    for name, w in weights.items():
        flat = w.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, _, _ = _loss_and_grads(weights, x, labels, train_idx, prop, weight_decay, need_grad=False)
            flat[i] = orig - step
            down, _, _ = _loss_and_grads(weights, x, labels, train_idx, prop, weight_decay, need_grad=False)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            analytic = grads[name].reshape(-1)[i]
            if not (np.isfinite(numeric) and np.isfinite(analytic)):
                return float("nan")
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
            worst = max(worst, err)
    return worst
