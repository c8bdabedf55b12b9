"""A small message-passing network written directly in numpy.

Layer ``l`` computes ``m_i = AGG({h_j : j in N(i)})`` and
``h_i <- act([m_i, h_i] @ W_l + b_l)``; a permutation-invariant pooling and an
MLP head turn node states into class logits. Gradients are hand-derived
reverse mode, checked against finite differences in the tests.

Sparse aggregation uses CSR adjacency with sorted column indices, so every
node sums its neighbours in ascending index order.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .embed import mean_frobenius, select_sign, sign_variants, tinv_embed
from .exceptions import ConfigurationError, TrainingDivergenceError
from .geometry import (
    Graph,
    PointCloud,
    Rotation,
    knn_graph,
    pairwise_distances,
    uniform_rotation_matrix,
    z_rotation,
)

CHECKPOINT_VERSION = "tinv-model-v1"
AGGREGATIONS = ("sum", "mean", "max")
EMBED_MODES = ("tinv", "raw_coords")
AUGMENTATIONS = ("none", "sign_enumeration", "z_rotations", "so3_rotations")


def _act(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    raise ConfigurationError(f"unknown activation {kind!r}")


def _act_grad(kind, z, a):
    if kind == "relu":
        return (z > 0).astype(z.dtype)
    return 1.0 - a * a


# --------------------------------------------------------------------------
# parameters


@dataclass(eq=False)
class MpnnParams:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    aggregations: Tuple[str, ...]
    activation: str = "relu"

    def __post_init__(self):
        self.aggregations = tuple(self.aggregations)
        if not (len(self.weights) == len(self.biases) == len(self.aggregations)):
            raise ConfigurationError("weights, biases and aggregations must have one entry per layer")
        for agg in self.aggregations:
            if agg not in AGGREGATIONS:
                raise ConfigurationError(f"unknown aggregation {agg!r}")
        _act(self.activation, np.zeros(1))
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or W.shape[0] % 2 or b.shape != (W.shape[1],):
                raise ConfigurationError(f"layer {l}: bad weight/bias shapes {W.shape}, {b.shape}")
            if l and W.shape[0] != 2 * self.weights[l - 1].shape[1]:
                raise ConfigurationError(f"layer {l}: input width does not chain from layer {l - 1}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ConfigurationError(f"layer {l}: non-finite parameters")

    @property
    def in_width(self):
        return self.weights[0].shape[0] // 2

    @property
    def out_width(self):
        return self.weights[-1].shape[1]


@dataclass(eq=False)
class Model:
    """MPNN + pooling + MLP head, plus the preprocessing it was trained with."""

    mpnn: MpnnParams
    head_weights: List[np.ndarray]
    head_biases: List[np.ndarray]
    pool: str = "mean"
    embed_mode: str = "tinv"
    feature_scale: float = 1.0
    k_neighbors: int = 8

    def __post_init__(self):
        if self.pool not in ("mean", "sum"):
            raise ConfigurationError(f"unknown pooling {self.pool!r}")
        if self.head_weights[0].shape[0] != self.mpnn.out_width:
            raise ConfigurationError("head input width must equal the final MPNN width")
        for l in range(1, len(self.head_weights)):
            if self.head_weights[l].shape[0] != self.head_weights[l - 1].shape[1]:
                raise ConfigurationError(f"head layer {l} does not chain")

    @property
    def output_dim(self):
        return self.head_weights[-1].shape[1]

    def parameters(self) -> Dict[str, np.ndarray]:
        """Named views of every trainable array (mutating them mutates the model)."""
        out = {}
        for l, (W, b) in enumerate(zip(self.mpnn.weights, self.mpnn.biases)):
            out[f"mpnn.{l}.W"] = W
            out[f"mpnn.{l}.b"] = b
        for l, (W, b) in enumerate(zip(self.head_weights, self.head_biases)):
            out[f"head.{l}.W"] = W
            out[f"head.{l}.b"] = b
        return out

    def copy(self):
        return copy.deepcopy(self)

    def to_dict(self):
        def arr(a):
            return {"shape": list(a.shape), "data": a.ravel(order="C").tolist()}

        return {
            "version": CHECKPOINT_VERSION,
            "activation": self.mpnn.activation,
            "aggregations": list(self.mpnn.aggregations),
            "pool": self.pool,
            "embed_mode": self.embed_mode,
            "feature_scale": self.feature_scale,
            "k_neighbors": self.k_neighbors,
            "mpnn": [{"W": arr(W), "b": arr(b)} for W, b in zip(self.mpnn.weights, self.mpnn.biases)],
            "head": [{"W": arr(W), "b": arr(b)} for W, b in zip(self.head_weights, self.head_biases)],
        }

    @classmethod
    def from_dict(cls, obj):
        if obj.get("version") != CHECKPOINT_VERSION:
            raise ConfigurationError(f"unsupported checkpoint version {obj.get('version')!r}")

        def arr(o):
            return np.array(o["data"], dtype=np.float64).reshape(o["shape"])

        mpnn = MpnnParams(
            [arr(l["W"]) for l in obj["mpnn"]],
            [arr(l["b"]) for l in obj["mpnn"]],
            tuple(obj["aggregations"]),
            obj["activation"],
        )
        return cls(
            mpnn,
            [arr(l["W"]) for l in obj["head"]],
            [arr(l["b"]) for l in obj["head"]],
            pool=obj["pool"],
            embed_mode=obj["embed_mode"],
            feature_scale=float(obj["feature_scale"]),
            k_neighbors=int(obj["k_neighbors"]),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(in_dim, n_classes, widths=(32, 32), head=(16,), aggregation="mean", activation="relu",
               pool="mean", rng_seed=0, **meta):
    rng = np.random.default_rng(rng_seed)
    aggs = (aggregation,) * len(widths) if isinstance(aggregation, str) else tuple(aggregation)
    Ws, bs, w_in = [], [], in_dim
    for w in widths:
        Ws.append(_glorot(rng, 2 * w_in, w))
        bs.append(np.zeros(w))
        w_in = w
    HW, Hb = [], []
    for w in tuple(head) + (n_classes,):
        HW.append(_glorot(rng, w_in, w))
        Hb.append(np.zeros(w))
        w_in = w
    return Model(MpnnParams(Ws, bs, aggs, activation), HW, Hb, pool=pool, **meta)


# --------------------------------------------------------------------------
# graph batches and aggregation


def _as_csr(A):
    if isinstance(A, Graph):
        A = A.adjacency
    M = sp.csr_matrix(A, dtype=np.float64)
    M.sort_indices()
    return M


@dataclass(eq=False)
class GraphBatch:
    """Disjoint union of graphs: stacked node features and block-diagonal adjacency."""

    X: np.ndarray
    adj: sp.csr_matrix
    graph_index: np.ndarray
    n_graphs: int
    _scatter: Optional[sp.csr_matrix] = field(default=None, repr=False)

    @classmethod
    def from_graphs(cls, items):
        Xs, As, idx = [], [], []
        for g, (X, A) in enumerate(items):
            X = np.asarray(X, dtype=np.float64)
            Xs.append(X)
            As.append(_as_csr(A))
            idx.append(np.full(X.shape[0], g))
        adj = sp.block_diag(As, format="csr")
        adj.sort_indices()
        return cls(np.vstack(Xs), adj, np.concatenate(idx), len(Xs))

    @property
    def degree(self):
        return np.diff(self.adj.indptr)

    def scatter(self):
        """``(n_nodes, nnz)`` matrix sending each edge slot back to its source node."""
        if self._scatter is None:
            nnz = self.adj.indices.shape[0]
            self._scatter = sp.csr_matrix(
                (np.ones(nnz), (self.adj.indices, np.arange(nnz))), shape=(self.X.shape[0], nnz)
            )
        return self._scatter


def _aggregate(kind, batch, h):
    adj = batch.adj
    deg = batch.degree
    if kind == "sum":
        return adj @ h, None
    if kind == "mean":
        inv = np.zeros(deg.shape[0])
        inv[deg > 0] = 1.0 / deg[deg > 0]
        return (adj @ h) * inv[:, None], inv
    G = h[adj.indices]
    m = np.zeros((h.shape[0], h.shape[1]))
    nonempty = deg > 0
    if G.shape[0]:
        m[nonempty] = np.maximum.reduceat(G, adj.indptr[:-1][nonempty], axis=0)
    return m, (G, m, nonempty)


def _aggregate_backward(kind, batch, dm, cache):
    if kind == "sum":
        return batch.adj.T @ dm
    if kind == "mean":
        return batch.adj.T @ (dm * cache[:, None])
    G, m, nonempty = cache
    nnz = G.shape[0]
    if nnz == 0:
        return np.zeros_like(dm)
    rows = np.repeat(np.arange(m.shape[0]), batch.degree)
    # route each (node, channel) gradient to its first maximiser only, so ties are not double counted
    pos = np.where(G == m[rows], np.arange(nnz)[:, None], nnz)
    first = np.minimum.reduceat(pos, batch.adj.indptr[:-1][nonempty], axis=0)
    dG = np.zeros_like(G)
    np.put_along_axis(dG, first, dm[nonempty], axis=0)
    return batch.scatter() @ dG


def _pool(kind, H, graph_index, n_graphs):
    counts = np.bincount(graph_index, minlength=n_graphs).astype(np.float64)
    P = sp.csr_matrix((np.ones(H.shape[0]), (graph_index, np.arange(H.shape[0]))), shape=(n_graphs, H.shape[0]))
    out = P @ H
    if kind == "mean":
        out = out / counts[:, None]
    return out, (P, counts)


def pool(H, kind="mean"):
    """Mean or sum over rows of one graph's node states."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] < 1:
        raise ConfigurationError("pool expects a non-empty (N, w) matrix")
    if kind == "mean":
        return H.mean(axis=0)
    if kind == "sum":
        return H.sum(axis=0)
    raise ConfigurationError(f"unknown pooling {kind!r}")


# --------------------------------------------------------------------------
# forward / backward


def _mpnn(params, batch, h, caches=None):
    if h.shape[1] != params.in_width:
        raise ConfigurationError(f"features have width {h.shape[1]}, first layer expects {params.in_width}")
    for W, b, agg in zip(params.weights, params.biases, params.aggregations):
        m, acache = _aggregate(agg, batch, h)
        x = np.hstack([m, h])
        z = x @ W + b
        a = _act(params.activation, z)
        if caches is not None:
            caches.append((x, z, a, acache, agg))
        h = a
    return h


def mpnn_forward(H0, A, params):
    """Run the message-passing layers on one graph; returns ``(N, out_width)`` node states."""
    H0 = np.asarray(H0, dtype=np.float64)
    adj = _as_csr(A)
    if adj.shape[0] != H0.shape[0]:
        raise ConfigurationError("feature rows and adjacency size differ")
    batch = GraphBatch(H0, adj, np.zeros(H0.shape[0], dtype=int), 1)
    return _mpnn(params, batch, H0)


def _forward(model, batch, caches=None):
    h = _mpnn(model.mpnn, batch, batch.X, caches)
    g, pcache = _pool(model.pool, h, batch.graph_index, batch.n_graphs)
    head = []
    n = len(model.head_weights)
    for l, (W, b) in enumerate(zip(model.head_weights, model.head_biases)):
        x = g
        z = x @ W + b
        g = z if l == n - 1 else _act(model.mpnn.activation, z)
        head.append((x, z, g))
    if caches is not None:
        caches.append((pcache, head))
    return g


def _softmax_xent(logits, labels):
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def loss_and_grads(model, batch, labels):
    """Mean softmax cross-entropy over the batch and its gradient for every parameter."""
    labels = np.asarray(labels, dtype=np.int64)
    caches = []
    logits = _forward(model, batch, caches)
    loss, dg = _softmax_xent(logits, labels)
    (P, counts), head = caches.pop()
    grads = {}
    act = model.mpnn.activation
    n = len(head)
    for l in reversed(range(n)):
        x, z, a = head[l]
        dz = dg if l == n - 1 else dg * _act_grad(act, z, a)
        grads[f"head.{l}.W"] = x.T @ dz
        grads[f"head.{l}.b"] = dz.sum(axis=0)
        dg = dz @ model.head_weights[l].T
    if model.pool == "mean":
        dg = dg / counts[:, None]
    dh = P.T @ dg
    for l in reversed(range(len(caches))):
        x, z, a, acache, agg = caches[l]
        dz = dh * _act_grad(act, z, a)
        W = model.mpnn.weights[l]
        grads[f"mpnn.{l}.W"] = x.T @ dz
        grads[f"mpnn.{l}.b"] = dz.sum(axis=0)
        dx = dz @ W.T
        w_in = W.shape[0] // 2
        dm, dh = dx[:, :w_in], dx[:, w_in:]
        dh = dh + _aggregate_backward(agg, batch, dm, acache)
    return float(loss), grads, logits


# --------------------------------------------------------------------------
# optimisation


@dataclass
class TrainConfig:
    learning_rate: float = 0.005
    epochs: int = 50
    batch_size: int = 32
    rng_seed: int = 0
    optimizer: str = "adam"
    augmentation: str = "none"
    embed_mode: str = "tinv"
    widths: Tuple[int, ...] = (32, 32)
    head: Tuple[int, ...] = (16,)
    aggregation: str = "mean"
    activation: str = "relu"
    pool: str = "mean"
    k_neighbors: int = 8

    def __post_init__(self):
        if not (self.learning_rate >= 0 and np.isfinite(self.learning_rate)):
            raise ConfigurationError("learning_rate must be finite and >= 0")
        if int(self.epochs) < 1:
            raise ConfigurationError("epochs must be >= 1")
        if int(self.batch_size) < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.augmentation not in AUGMENTATIONS:
            raise ConfigurationError(f"unknown augmentation {self.augmentation!r}")
        if self.embed_mode not in EMBED_MODES:
            raise ConfigurationError(f"unknown embed mode {self.embed_mode!r}")
        self.widths = tuple(self.widths)
        self.head = tuple(self.head)


class Optimizer:
    """Plain SGD or Adam (beta1 0.9, beta2 0.999, eps 1e-8) over a named parameter dict."""

    def __init__(self, kind="adam", learning_rate=0.005):
        self.kind = kind
        self.lr = learning_rate
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        self.t += 1
        for name, p in params.items():
            g = grads[name]
            if self.kind == "sgd":
                p -= self.lr * g
                continue
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= 0.9
            m += 0.1 * g
            v *= 0.999
            v += 0.001 * g * g
            mhat = m / (1 - 0.9**self.t)
            vhat = v / (1 - 0.999**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + 1e-8)


def backward_and_step(model, batch, labels, config, optimizer=None):
    """One gradient step on a copy of ``model``; returns ``(loss, updated_model)``.

    Pass the same ``optimizer`` across calls to keep Adam's moment estimates.
    """
    loss, grads, _ = loss_and_grads(model, batch, labels)
    if not np.isfinite(loss):
        raise TrainingDivergenceError(f"loss became {loss}")
    new = model.copy()
    if optimizer is None:
        optimizer = Optimizer(config.optimizer, config.learning_rate)
    optimizer.step(new.parameters(), grads)
    return loss, new


# --------------------------------------------------------------------------
# cloud -> features


def cloud_graph(cloud, k_neighbors=8):
    X = check_points(cloud)
    k = min(k_neighbors, X.shape[0] - 1)
    return knn_graph(pairwise_distances(X), k)


def cloud_features(cloud, embed_mode="tinv", sign="canonical"):
    """Input node features: the canonical invariant embedding, or raw coordinates."""
    if embed_mode == "tinv":
        return select_sign(tinv_embed(cloud), sign).H
    if embed_mode == "raw_coords":
        return check_points(cloud).copy()
    raise ConfigurationError(f"unknown embed mode {embed_mode!r}")


def forward_full(cloud, model, embed_mode=None, return_nodes=False):
    """Class logits for one cloud (and node states if ``return_nodes``)."""
    mode = model.embed_mode if embed_mode is None else embed_mode
    X = cloud_features(cloud, mode)
    if mode == "tinv":
        X = X / model.feature_scale
    A = cloud_graph(cloud, model.k_neighbors)
    batch = GraphBatch.from_graphs([(X, A)])
    caches = [] if return_nodes else None
    logits = _forward(model, batch, caches)[0]
    if return_nodes:
        nodes = caches[len(model.mpnn.weights) - 1][2]
        return logits, nodes
    return logits


# --------------------------------------------------------------------------
# training


@dataclass
class TrainingLog:
    epoch: List[int] = field(default_factory=list)
    loss: List[float] = field(default_factory=list)
    train_acc: List[float] = field(default_factory=list)
    test_acc: List[float] = field(default_factory=list)

    def rows(self):
        return list(zip(self.epoch, self.loss, self.train_acc, self.test_acc))

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss,train_acc,test_acc\n")
            for e, l, a, t in self.rows():
                fh.write(f"{e},{l:.17g},{a:.17g},{t:.17g}\n")


@dataclass
class CloudDataset:
    """Labelled clouds split into train and test; labels come from ``cloud_label``."""

    train: Sequence[PointCloud]
    test: Sequence[PointCloud] = ()

    @property
    def n_classes(self):
        labels = [c.cloud_label for c in list(self.train) + list(self.test)]
        return int(max(labels)) + 1


def _labels(clouds):
    out = []
    for c in clouds:
        if c.cloud_label is None:
            raise ConfigurationError("every cloud needs a cloud_label")
        out.append(c.cloud_label)
    return np.array(out, dtype=np.int64)


def _rotate_training(clouds, kind, rng):
    out = []
    for c in clouds:
        R = z_rotation(rng.uniform(0, 2 * np.pi)) if kind == "z_rotations" else uniform_rotation_matrix(3, rng)
        out.append(Rotation(R).apply(c))
    return out


def prepare_samples(clouds, embed_mode, augmentation="none", k_neighbors=8, rng=None):
    """Feature/graph pairs (and the index of the source cloud) for a list of clouds."""
    if augmentation in ("z_rotations", "so3_rotations"):
        clouds = _rotate_training(clouds, augmentation, np.random.default_rng(rng))
    samples, source = [], []
    for i, c in enumerate(clouds):
        A = _as_csr(cloud_graph(c, k_neighbors))
        if embed_mode == "tinv" and augmentation == "sign_enumeration":
            for V in sign_variants(select_sign(tinv_embed(c), "canonical")):
                samples.append((V.H, A))
                source.append(i)
        else:
            samples.append((cloud_features(c, embed_mode), A))
            source.append(i)
    return samples, np.array(source, dtype=np.int64)


def _scaled(samples, scale):
    return [(X / scale, A) for X, A in samples]


def predict_logits(model, samples, batch_size=256):
    out = []
    for s in range(0, len(samples), batch_size):
        out.append(_forward(model, GraphBatch.from_graphs(samples[s:s + batch_size])))
    return np.vstack(out) if out else np.zeros((0, model.output_dim))


def train_classifier(dataset, config):
    """Train an MPNN classifier; returns ``(model, TrainingLog)``.

    Training features follow ``config.augmentation``: rotations are applied
    once per training cloud, and sign enumeration turns each cloud into its
    ``2**k`` sign variants as independent samples. For invariant features the
    mean Frobenius norm of the training inputs becomes ``model.feature_scale``.
    """
    if not isinstance(config, TrainConfig):
        config = TrainConfig(**config)
    if len(dataset.train) == 0:
        raise ConfigurationError("training set is empty")
    if config.augmentation == "sign_enumeration" and config.embed_mode != "tinv":
        raise ConfigurationError("sign enumeration needs invariant features")
    root = np.random.SeedSequence(config.rng_seed)
    aug_seed, init_seed, shuffle_seed = root.spawn(3)
    y_clouds = _labels(dataset.train)
    samples, source = prepare_samples(dataset.train, config.embed_mode, config.augmentation,
                                      config.k_neighbors, aug_seed)
    y = y_clouds[source]
    scale = mean_frobenius([X for X, _ in samples]) if config.embed_mode == "tinv" else 1.0
    samples = _scaled(samples, scale)
    test_samples, y_test = [], np.zeros(0, dtype=np.int64)
    if len(dataset.test):
        test_samples, _ = prepare_samples(dataset.test, config.embed_mode, "none", config.k_neighbors)
        test_samples = _scaled(test_samples, scale)
        y_test = _labels(dataset.test)

    model = init_model(
        samples[0][0].shape[1], dataset.n_classes, config.widths, config.head, config.aggregation,
        config.activation, config.pool, init_seed, embed_mode=config.embed_mode, feature_scale=scale,
        k_neighbors=config.k_neighbors,
    )
    opt = Optimizer(config.optimizer, config.learning_rate)
    rng = np.random.default_rng(shuffle_seed)
    log = TrainingLog()
    params = model.parameters()
    for epoch in range(1, int(config.epochs) + 1):
        order = rng.permutation(len(samples))
        total, seen = 0.0, 0
        for s in range(0, len(order), config.batch_size):
            idx = order[s:s + config.batch_size]
            batch = GraphBatch.from_graphs([samples[i] for i in idx])
            loss, grads, _ = loss_and_grads(model, batch, y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergenceError(f"loss became {loss} in epoch {epoch}")
            opt.step(params, grads)
            total += loss * len(idx)
            seen += len(idx)
        train_acc = float(np.mean(predict_logits(model, samples).argmax(axis=1) == y))
        test_acc = float(np.mean(predict_logits(model, test_samples).argmax(axis=1) == y_test)) if len(
            test_samples) else float("nan")
        log.epoch.append(epoch)
        log.loss.append(total / seen)
        log.train_acc.append(train_acc)
        log.test_acc.append(test_acc)
    return model, log


def predict(model, clouds):
    """Predicted class per cloud, using the model's own preprocessing."""
    samples, _ = prepare_samples(list(clouds), model.embed_mode, "none", model.k_neighbors)
    if model.embed_mode == "tinv":
        samples = _scaled(samples, model.feature_scale)
    return predict_logits(model, samples).argmax(axis=1)


class MPNNClassifier(ClassifierMixin, BaseEstimator):
    """scikit-learn wrapper: ``X`` is a list of ``(N_i, d)`` clouds, ``y`` their labels."""

    def __init__(self, embed_mode="tinv", widths=(32, 32), head=(16,), aggregation="mean", activation="relu",
                 pool="mean", k_neighbors=8, learning_rate=0.005, epochs=50, batch_size=32, optimizer="adam",
                 augmentation="none", random_state=0):
        self.embed_mode = embed_mode
        self.widths = widths
        self.head = head
        self.aggregation = aggregation
        self.activation = activation
        self.pool = pool
        self.k_neighbors = k_neighbors
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.augmentation = augmentation
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            learning_rate=self.learning_rate, epochs=self.epochs, batch_size=self.batch_size,
            rng_seed=self.random_state, optimizer=self.optimizer, augmentation=self.augmentation,
            embed_mode=self.embed_mode, widths=self.widths, head=self.head, aggregation=self.aggregation,
            activation=self.activation, pool=self.pool, k_neighbors=self.k_neighbors,
        )

    def fit(self, X, y):
        self.classes_, encoded = np.unique(np.asarray(y), return_inverse=True)
        clouds = [PointCloud(check_points(c), cloud_label=int(e)) for c, e in zip(X, encoded)]
        ds = CloudDataset(clouds)
        # force the class count even if the largest label is absent from a subset
        model, log = train_classifier(_FixedClasses(ds, len(self.classes_)), self._config())
        self.model_ = model
        self.log_ = log
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        samples, _ = prepare_samples([check_points(c) for c in X], self.model_.embed_mode, "none",
                                     self.model_.k_neighbors)
        if self.model_.embed_mode == "tinv":
            samples = _scaled(samples, self.model_.feature_scale)
        return predict_logits(self.model_, samples)

    def predict_proba(self, X):
        z = self.decision_function(X)
        z = np.exp(z - z.max(axis=1, keepdims=True))
        return z / z.sum(axis=1, keepdims=True)

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.classes_[self.decision_function(X).argmax(axis=1)]


@dataclass
class _FixedClasses:
    inner: CloudDataset
    n: int

    @property
    def train(self):
        return self.inner.train

    @property
    def test(self):
        return self.inner.test

    @property
    def n_classes(self):
        return self.n
