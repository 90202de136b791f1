"""Graph-convolution stack with hand-derived gradients.

Layer rule: Z = P(H) W + b, where P multiplies by the symmetrically
normalized adjacency (self-loops added) when the layer aggregates and is
the identity otherwise. ReLU sits between layers. Two heads:

* "node": per-node softmax over the last layer's outputs,
* "graph": feature-wise max-pool concatenated with the mean-pool over
  nodes, then a linear readout and a softmax.

Everything runs in float64. The backward pass is exact; ``gradcheck``
compares it against central finite differences. Adjacency is dense up to
``DENSE_LIMIT`` nodes and CSR above.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataError, NumericError
from .graph import Graph, InducedSubgraph
from .seeding import derive_rng, derive_seed

DENSE_LIMIT = 5000


def normalized_adjacency(g: Graph, dense_limit: int = DENSE_LIMIT):
    """D^-1/2 (A + I) D^-1/2 with degrees taken after adding self-loops."""
    n = g.num_nodes
    if n <= dense_limit:
        adj = np.zeros((n, n), dtype=np.float64)
        if g.edges.size:
            adj[g.edges[:, 0], g.edges[:, 1]] = 1.0
            adj[g.edges[:, 1], g.edges[:, 0]] = 1.0
        adj[np.arange(n), np.arange(n)] += 1.0
        inv_sqrt = 1.0 / np.sqrt(adj.sum(axis=1))
        return adj * inv_sqrt[:, None] * inv_sqrt[None, :]
    rows = np.concatenate([g.edges[:, 0], g.edges[:, 1], np.arange(n)])
    cols = np.concatenate([g.edges[:, 1], g.edges[:, 0], np.arange(n)])
    vals = np.ones(rows.size, dtype=np.float64)
    adj = sp.csr_array((vals, (rows, cols)), shape=(n, n))
    inv_sqrt = 1.0 / np.sqrt(np.asarray(adj.sum(axis=1)).reshape(-1))
    scale = sp.diags_array(inv_sqrt)
    return (scale @ adj @ scale).tocsr()


@dataclass
class GcnLayer:
    weight: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray  # (out_dim,)


@dataclass
class GcnModel:
    """Convolution stack plus head. ``aggregate[l]`` switches layer l
    between graph convolution and a plain per-node linear map."""

    layers: list[GcnLayer]
    aggregate: tuple[bool, ...]
    head: str  # "node" | "graph"
    readout: GcnLayer | None = None
    seed: int = 0

    @property
    def num_classes(self) -> int:
        if self.head == "graph":
            return int(self.readout.bias.size)
        return int(self.layers[-1].bias.size)

    @property
    def feature_dim(self) -> int:
        return int(self.layers[0].weight.shape[0])


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _init_layer(rng: np.random.Generator, fan_in: int, fan_out: int) -> GcnLayer:
    # wide random biases: with constant features and zero biases every
    # embedding stays proportional to one shared vector through ReLU
    # layers, and training cannot leave that subspace; a spread comparable
    # to the propagated feature scale puts ReLU cutoffs inside the active
    # range so channels differentiate from the first step
    return GcnLayer(glorot(rng, fan_in, fan_out), rng.uniform(-1.0, 1.0, size=fan_out))


def init_gcn(
    feature_dim: int,
    hidden_dim: int,
    num_classes: int,
    *,
    num_layers: int = 3,
    head: str = "node",
    aggregate: tuple[bool, ...] | None = None,
    seed: int = 0,
) -> GcnModel:
    """Glorot-uniform weights, wide uniform biases (see ``_init_layer``)."""
    if head not in ("node", "graph"):
        raise ValueError(f"unknown head {head!r}")
    if num_layers < 1:
        raise ValueError("need at least one layer")
    rng = derive_rng(seed, "gcn-init")
    widths = [feature_dim] + [hidden_dim] * (num_layers - 1)
    widths.append(hidden_dim if head == "graph" else num_classes)
    layers = [_init_layer(rng, widths[l], widths[l + 1]) for l in range(num_layers)]
    readout = None
    if head == "graph":
        readout = _init_layer(rng, 2 * hidden_dim, num_classes)
    if aggregate is None:
        aggregate = (True,) * num_layers
    if len(aggregate) != num_layers:
        raise ValueError("aggregate flags must match the layer count")
    return GcnModel(layers=layers, aggregate=tuple(aggregate), head=head, readout=readout, seed=seed)


def _as_graph(data: Graph | InducedSubgraph) -> Graph:
    return data.graph if isinstance(data, InducedSubgraph) else data


def softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Shared stack forward/backward (also used by the explainer backbone)


def stack_forward(layers, aggregate, relu_after, adj, x):
    """Returns (per-layer inputs, pre-activations, propagated inputs).

    inputs[l] is the input to layer l, inputs[-1] the final output.
    propagated[l] caches P(inputs[l]) for the weight gradient.
    """
    inputs = [x]
    preacts = []
    propagated = []
    h = x
    for layer, agg, act in zip(layers, aggregate, relu_after):
        p = adj @ h if agg else h
        z = p @ layer.weight + layer.bias
        propagated.append(p)
        preacts.append(z)
        h = np.maximum(z, 0.0) if act else z
        inputs.append(h)
    return inputs, preacts, propagated


def stack_backward(layers, aggregate, relu_after, adj, preacts, propagated, d_out):
    """Gradient of a scalar loss wrt every layer's parameters and the input.

    ``d_out`` is the loss gradient at the stack output. The normalized
    adjacency is symmetric, so the transpose propagation reuses ``adj``.
    """
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore
    dh = d_out
    for l in range(len(layers) - 1, -1, -1):
        dz = np.where(preacts[l] > 0, dh, 0.0) if relu_after[l] else dh
        dw = propagated[l].T @ dz
        db = dz.sum(axis=0)
        dp = dz @ layers[l].weight.T
        dh = adj @ dp if aggregate[l] else dp
        grads[l] = (dw, db)
    return grads, dh


def _relu_flags(model: GcnModel) -> list[bool]:
    # no activation after the last convolution for either head: the graph
    # head pools signed values, otherwise max-pool + ReLU has an all-dead
    # attractor that training cannot leave
    n = len(model.layers)
    return [True] * (n - 1) + [False]


def _forward_full(model: GcnModel, adj, x):
    want = model.layers[0].weight.shape[0]
    if x.shape[1] != want:
        raise DataError(f"feature width {x.shape[1]} does not match model input width {want}")
    inputs, preacts, propagated = stack_forward(
        model.layers, model.aggregate, _relu_flags(model), adj, x
    )
    final = inputs[-1]
    if model.head == "node":
        return inputs, preacts, propagated, final, None
    # max alone starves middle-activation nodes of gradient when features
    # are constant; the mean half keeps every node on the backward path
    pooled = np.concatenate([final.max(axis=0), final.mean(axis=0)])
    pool_rows = final.argmax(axis=0)
    logits = pooled @ model.readout.weight + model.readout.bias
    return inputs, preacts, propagated, logits, (pooled, pool_rows)


def gcn_forward(model: GcnModel, data: Graph | InducedSubgraph) -> np.ndarray:
    """Class probabilities: (n, C) for node head, (C,) for graph head."""
    g = _as_graph(data)
    adj = normalized_adjacency(g)
    *_, logits, _ = _forward_full(model, adj, g.features)
    if model.head == "node":
        return softmax_rows(logits)
    return softmax_rows(logits[None, :])[0]


def predict_scalar(model: GcnModel, data: Graph | InducedSubgraph, target, class_id: int) -> float:
    """Probability of ``class_id`` at ``target`` (parent ids for subgraphs).

    Graph-head models ignore ``target``; the whole-graph probability is
    returned.
    """
    probs = gcn_forward(model, data)
    if class_id < 0 or class_id >= model.num_classes:
        raise ValueError(f"class {class_id} out of range")
    if model.head == "graph":
        return float(probs[class_id])
    if isinstance(data, InducedSubgraph):
        local = int(data.to_local([target])[0])
    else:
        g = _as_graph(data)
        if not 0 <= int(target) < g.num_nodes:
            raise ValueError(f"target {target} not present")
        local = int(target)
    return float(probs[local, class_id])


# ---------------------------------------------------------------------------
# Losses and gradients


@dataclass
class LossSpec:
    """MSE is taken over raw final outputs, cross-entropy over softmax.

    ``node_ids`` restricts a node-head loss to a row subset (local ids);
    None means every node. Graph-head losses ignore it.
    """

    kind: str  # "mse" | "cross_entropy"
    targets: np.ndarray
    node_ids: np.ndarray | None = None


def param_arrays(model: GcnModel) -> list[np.ndarray]:
    """Flat parameter list in a stable order (weights interleaved with biases)."""
    out: list[np.ndarray] = []
    for layer in model.layers:
        out.extend((layer.weight, layer.bias))
    if model.readout is not None:
        out.extend((model.readout.weight, model.readout.bias))
    return out


def _loss_and_dlogits(model: GcnModel, logits: np.ndarray, loss: LossSpec):
    if model.head == "node":
        sel = np.arange(logits.shape[0]) if loss.node_ids is None else np.asarray(loss.node_ids)
        rows = logits[sel]
        if loss.kind == "mse":
            targets = np.asarray(loss.targets, dtype=np.float64).reshape(rows.shape)
            diff = rows - targets
            value = float(np.mean(diff**2))
            d_rows = 2.0 * diff / diff.size
        elif loss.kind == "cross_entropy":
            labels = np.asarray(loss.targets, dtype=np.int64).reshape(-1)
            probs = softmax_rows(rows)
            value = float(-np.mean(np.log(probs[np.arange(sel.size), labels])))
            d_rows = probs.copy()
            d_rows[np.arange(sel.size), labels] -= 1.0
            d_rows /= sel.size
        else:
            raise ValueError(f"unknown loss kind {loss.kind!r}")
        d_logits = np.zeros_like(logits)
        d_logits[sel] = d_rows
        return value, d_logits

    if loss.kind == "mse":
        targets = np.asarray(loss.targets, dtype=np.float64).reshape(logits.shape)
        diff = logits - targets
        return float(np.mean(diff**2)), 2.0 * diff / diff.size
    if loss.kind == "cross_entropy":
        label = int(np.asarray(loss.targets).reshape(-1)[0])
        probs = softmax_rows(logits[None, :])[0]
        d_logits = probs.copy()
        d_logits[label] -= 1.0
        return float(-np.log(probs[label])), d_logits
    raise ValueError(f"unknown loss kind {loss.kind!r}")


def _loss_and_gradients_pre(model: GcnModel, adj, x, loss: LossSpec):
    inputs, preacts, propagated, logits, pool = _forward_full(model, adj, x)
    value, d_logits = _loss_and_dlogits(model, logits, loss)
    if model.head == "node":
        d_final = d_logits
        readout_grads: list[np.ndarray] = []
    else:
        pooled, pool_rows = pool
        dw_read = np.outer(pooled, d_logits)
        db_read = d_logits
        d_pooled = model.readout.weight @ d_logits
        h = pool_rows.size
        n = inputs[-1].shape[0]
        d_final = np.tile(d_pooled[h:] / n, (n, 1))
        d_final[pool_rows, np.arange(h)] += d_pooled[:h]
        readout_grads = [dw_read, db_read]
    layer_grads, _ = stack_backward(
        model.layers, model.aggregate, _relu_flags(model), adj, preacts, propagated, d_final
    )
    flat: list[np.ndarray] = []
    for dw, db in layer_grads:
        flat.extend((dw, db))
    flat.extend(readout_grads)
    return value, flat


def backward(model: GcnModel, data: Graph | InducedSubgraph, loss: LossSpec):
    """(loss value, gradients) with gradients ordered like ``param_arrays``."""
    g = _as_graph(data)
    adj = normalized_adjacency(g)
    return _loss_and_gradients_pre(model, adj, g.features, loss)


def gradcheck(
    model: GcnModel,
    data: Graph | InducedSubgraph,
    loss: LossSpec,
    step: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Entries where both sides are below ``floor`` are skipped: they sit
    under the resolution of the finite difference itself. No parameters
    at all yields 0.
    """
    g = _as_graph(data)
    adj = normalized_adjacency(g)
    _, grads = _loss_and_gradients_pre(model, adj, g.features, loss)
    worst = 0.0
    for arr, grad in zip(param_arrays(model), grads):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up, _ = _loss_and_dlogits(model, _forward_full(model, adj, g.features)[3], loss)
            flat[idx] = orig - step
            down, _ = _loss_and_dlogits(model, _forward_full(model, adj, g.features)[3], loss)
            flat[idx] = orig
            fd = (up - down) / (2.0 * step)
            denom = max(abs(gflat[idx]), abs(fd))
            if denom < floor:
                continue
            worst = max(worst, abs(gflat[idx] - fd) / denom)
    return worst


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    weight_decay: float = 0.0
    seed: int = 0
    restarts: int = 1  # best-validation selection over derived init seeds

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.restarts < 1:
            raise ValueError("epochs, batch_size, and restarts must be at least 1")


class Adam:
    """Standard Adam with optional decoupled-free L2 (decay added to grads)."""

    def __init__(self, learning_rate: float, weight_decay: float = 0.0):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.t = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            if self.weight_decay:
                g = g + self.weight_decay * p
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def split_indices(count: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Seeded 80/10/10 shuffle split over 0..count-1."""
    order = rng.permutation(count)
    n_train = int(round(count * 0.8))
    n_valid = int(round(count * 0.1))
    return {
        "train": np.sort(order[:n_train]),
        "valid": np.sort(order[n_train : n_train + n_valid]),
        "test": np.sort(order[n_train + n_valid :]),
    }


def _accuracy(pred: np.ndarray, labels: np.ndarray, ids: np.ndarray) -> float:
    if ids.size == 0:
        return float("nan")
    return float(np.mean(pred[ids] == labels[ids]))


def train_target(
    data: Graph | list[Graph],
    cfg: TrainConfig,
    *,
    num_layers: int = 3,
    hidden_dim: int = 20,
    splits: dict[str, np.ndarray] | None = None,
) -> tuple[GcnModel, dict]:
    """Train a classification target model.

    A single Graph with node labels and masks trains the node head with
    full-batch cross-entropy; a list of labeled graphs trains the graph
    head with minibatches. With restarts > 1 the run with the best
    validation accuracy wins; constant-feature benchmarks occasionally
    start in a basin the optimizer never leaves. Identical seeds and
    inputs give bit-identical parameters (single-threaded).
    """
    if not isinstance(data, Graph):
        data = list(data)
        if splits is None:
            if not data:
                raise DataError("empty graph list")
            splits = split_indices(len(data), derive_rng(cfg.seed, "target-split"))
    best: tuple[GcnModel, dict] | None = None
    for restart in range(cfg.restarts):
        seed = cfg.seed if cfg.restarts == 1 else derive_seed(cfg.seed, "restart", restart)
        run_cfg = replace(cfg, seed=seed, restarts=1)
        if isinstance(data, Graph):
            model, report = _train_node_target(data, run_cfg, num_layers, hidden_dim)
        else:
            model, report = _train_graph_target(data, run_cfg, num_layers, hidden_dim, splits)
        report["init_seed"] = seed
        score = report["accuracy"].get("valid")
        if score is None or np.isnan(score):
            score = report["accuracy"].get("train", 0.0)
        report["selection_score"] = score
        if best is None or score > best[1]["selection_score"]:
            best = (model, report)
    return best


def _train_node_target(g: Graph, cfg: TrainConfig, num_layers: int, hidden_dim: int):
    if g.node_labels is None:
        raise DataError("node-classification training requires node_labels")
    if not g.masks or "train" not in g.masks:
        raise DataError("node-classification training requires a train mask")
    labels = g.node_labels
    train_ids = g.masks["train"]
    classes = int(labels.max()) + 1
    model = init_gcn(
        g.feature_dim, hidden_dim, classes, num_layers=num_layers, head="node", seed=cfg.seed
    )
    adj = normalized_adjacency(g)
    loss = LossSpec("cross_entropy", targets=labels[train_ids], node_ids=train_ids)
    opt = Adam(cfg.learning_rate, cfg.weight_decay)
    params = param_arrays(model)
    value = float("nan")
    for _ in range(cfg.epochs):
        value, grads = _loss_and_gradients_pre(model, adj, g.features, loss)
        if not np.isfinite(value):
            raise NumericError(f"training loss became non-finite ({value})")
        opt.step(params, grads)
    probs = softmax_rows(_forward_full(model, adj, g.features)[3])
    pred = probs.argmax(axis=1)
    report = {
        "task": "node",
        "final_train_loss": value,
        "accuracy": {key: _accuracy(pred, labels, ids) for key, ids in g.masks.items()},
    }
    return model, report


def _train_graph_target(graphs, cfg, num_layers, hidden_dim, splits):
    if not graphs:
        raise DataError("empty graph list")
    if any(g.graph_label is None for g in graphs):
        raise DataError("graph-classification training requires graph_label on every graph")
    labels = np.array([g.graph_label for g in graphs], dtype=np.int64)
    rng = derive_rng(cfg.seed, "target-train")
    classes = int(labels.max()) + 1
    model = init_gcn(
        graphs[0].feature_dim, hidden_dim, classes, num_layers=num_layers, head="graph", seed=cfg.seed
    )
    adjs = [normalized_adjacency(g) for g in graphs]
    opt = Adam(cfg.learning_rate, cfg.weight_decay)
    params = param_arrays(model)
    train_idx = splits["train"]
    value = float("nan")
    for _ in range(cfg.epochs):
        order = rng.permutation(train_idx)
        for start in range(0, order.size, cfg.batch_size):
            chunk = order[start : start + cfg.batch_size]
            total: list[np.ndarray] | None = None
            batch_value = 0.0
            for gi in chunk:
                loss = LossSpec("cross_entropy", targets=np.array([labels[gi]]))
                v, grads = _loss_and_gradients_pre(model, adjs[gi], graphs[gi].features, loss)
                batch_value += v
                if total is None:
                    total = grads
                else:
                    for acc, grad in zip(total, grads):
                        acc += grad
            value = batch_value / chunk.size
            if not np.isfinite(value):
                raise NumericError(f"training loss became non-finite ({value})")
            opt.step(params, [t / chunk.size for t in total])
    pred = np.array(
        [
            int(np.argmax(softmax_rows(_forward_full(model, adjs[k], graphs[k].features)[3][None])[0]))
            for k in range(len(graphs))
        ]
    )
    report = {
        "task": "graph",
        "final_train_loss": value,
        "accuracy": {key: _accuracy(pred, labels, ids) for key, ids in splits.items()},
        "splits": {key: ids.tolist() for key, ids in splits.items()},
    }
    return model, report


# ---------------------------------------------------------------------------
# Checkpoints


def model_to_payload(model: GcnModel, config: dict | None = None) -> dict:
    payload = {
        "format": "gcn-checkpoint",
        "head": model.head,
        "seed": model.seed,
        "aggregate": list(model.aggregate),
        "layer_dims": [[int(l.weight.shape[0]), int(l.weight.shape[1])] for l in model.layers],
        "layers": [
            {"weight": l.weight.reshape(-1).tolist(), "bias": l.bias.tolist()}
            for l in model.layers
        ],
        "readout_dims": None
        if model.readout is None
        else [int(model.readout.weight.shape[0]), int(model.readout.weight.shape[1])],
        "readout": None
        if model.readout is None
        else {
            "weight": model.readout.weight.reshape(-1).tolist(),
            "bias": model.readout.bias.tolist(),
        },
        "config": config or {},
    }
    return payload


def _layer_from_payload(dims, blob, where: str) -> GcnLayer:
    weight = np.asarray(blob["weight"], dtype=np.float64)
    if weight.size != dims[0] * dims[1]:
        raise DataError(f"{where}: weight size does not match dims {dims}")
    return GcnLayer(weight.reshape(dims[0], dims[1]), np.asarray(blob["bias"], dtype=np.float64))


def model_from_payload(payload: dict, where: str = "checkpoint") -> GcnModel:
    try:
        if payload.get("format") != "gcn-checkpoint":
            raise DataError(f"{where}: not a model checkpoint")
        layers = [
            _layer_from_payload(dims, blob, where)
            for dims, blob in zip(payload["layer_dims"], payload["layers"])
        ]
        readout = None
        if payload["readout"] is not None:
            readout = _layer_from_payload(payload["readout_dims"], payload["readout"], where)
        return GcnModel(
            layers=layers,
            aggregate=tuple(bool(a) for a in payload["aggregate"]),
            head=payload["head"],
            readout=readout,
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError) as err:
        raise DataError(f"{where}: malformed checkpoint ({err})") from None


def save_model(path, model: GcnModel, config: dict | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_payload(model, config), sort_keys=True))


def load_model(path) -> GcnModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    return model_from_payload(json.loads(path.read_text()), where=str(path))
