"""Amortized removal-attribution explainer.

A small GCN backbone emits per-node source and target embeddings whose
inner products estimate removal attributions, trained by regression on a
table of running Monte-Carlo means that advances one shared sample per
explained instance per epoch. Once trained, explaining a batch costs one
forward pass over the union of the batch's 2K-hop neighborhoods.

The supervision table is keyed per (target, source) pair with its own
sample counter, so pairs outside the current batch simply keep their
current mean instead of decaying toward stale global weights.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .attribution import AttributionEstimate, DeltaSample, PROB_FLOOR, TargetContext, kept_value, mc_update, target_context
from .errors import DataError, NumericError
from .gcn import (
    Adam,
    GcnModel,
    _relu_flags,
    gcn_forward,
    init_gcn,
    model_from_payload,
    model_to_payload,
    normalized_adjacency,
    param_arrays,
    split_indices,
    stack_backward,
    stack_forward,
)
from .graph import Graph, InducedSubgraph, NodeSet, as_node_set, induce, khop_neighbors
from .seeding import derive_rng, derive_seed

MODES = ("bidirectional", "single")
SUPERVISIONS = ("removal", "mi")


@dataclass(frozen=True)
class ExplainerModel:
    """Embedding backbone plus the scoring convention.

    The backbone's final layer emits 2n values per node split into a
    source embedding p and a target embedding t (bidirectional mode), or
    n values used as both (single mode, symmetric scores by construction).
    ``max_hop`` is the neighborhood radius the explainer was trained for.
    """

    backbone: GcnModel
    embedding_dim: int
    mode: str
    max_hop: int


@dataclass
class ExplainerConfig:
    embedding_dim: int = 20
    mode: str = "bidirectional"
    supervision: str = "removal"
    agg_layers: int | None = None  # None: match the probed max hop
    max_hop: int | None = None  # None: probe the target model
    learning_rate: float | None = None  # None: 1e-3 node head, 1e-4 graph head
    epochs: int = 200
    batch_size: int = 64
    opt_steps: int = 1  # Adam steps per epoch on that epoch's pair batch
    patience: int = 10
    min_improvement: float = 1e-5
    weight_decay: float = 0.0
    seed: int = 0
    probe_count: int = 8
    k_max: int = 6
    validation_cap: int = 32  # targets used for the early-stop loss

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.supervision not in SUPERVISIONS:
            raise ValueError(f"supervision must be one of {SUPERVISIONS}")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be at least 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if self.opt_steps < 1:
            raise ValueError("opt_steps must be at least 1")


@dataclass(frozen=True)
class Explanation:
    """Ranked sources for one explained instance.

    ``sources``/``scores`` are parallel arrays already ordered by score
    descending with ascending-id tie-break; ``target`` is a node id for
    node tasks and a graph index for graph tasks.
    """

    target: int
    sources: np.ndarray
    scores: np.ndarray
    tie_break: str = "score desc, id asc"


def init_explainer(feature_dim: int, cfg: ExplainerConfig, max_hop: int) -> ExplainerModel:
    agg_layers = cfg.agg_layers if cfg.agg_layers is not None else max_hop
    out_dim = 2 * cfg.embedding_dim if cfg.mode == "bidirectional" else cfg.embedding_dim
    if agg_layers < 1:
        # no aggregation: a single per-node projection
        backbone = init_gcn(
            feature_dim, cfg.embedding_dim, out_dim,
            num_layers=1, head="node", aggregate=(False,),
            seed=derive_seed(cfg.seed, "explainer-init"),
        )
    else:
        backbone = init_gcn(
            feature_dim, cfg.embedding_dim, out_dim,
            num_layers=agg_layers, head="node",
            seed=derive_seed(cfg.seed, "explainer-init"),
        )
    return ExplainerModel(backbone=backbone, embedding_dim=cfg.embedding_dim, mode=cfg.mode, max_hop=max_hop)


# ---------------------------------------------------------------------------
# Embedding and scoring


def _as_graph(data: Graph | InducedSubgraph) -> Graph:
    return data.graph if isinstance(data, InducedSubgraph) else data


def _embed_forward(e: ExplainerModel, adj, x):
    return stack_forward(e.backbone.layers, e.backbone.aggregate, _relu_flags(e.backbone), adj, x)


def embed(e: ExplainerModel, data: Graph | InducedSubgraph) -> tuple[np.ndarray, np.ndarray]:
    """Per-node (source, target) embedding matrices, each (n_nodes, n)."""
    g = _as_graph(data)
    if g.feature_dim != int(e.backbone.layers[0].weight.shape[0]):
        raise DataError("feature dimension does not match the explainer backbone")
    out = _embed_forward(e, normalized_adjacency(g), g.features)[0][-1]
    if e.mode == "bidirectional":
        return out[:, : e.embedding_dim], out[:, e.embedding_dim :]
    return out, out


def score_node(p_j: np.ndarray, t_i: np.ndarray) -> float:
    """Attribution estimate of source j to node target i: <p_j, t_i>."""
    p_j = np.asarray(p_j, dtype=np.float64).reshape(-1)
    t_i = np.asarray(t_i, dtype=np.float64).reshape(-1)
    if p_j.shape != t_i.shape:
        raise DataError("embedding dimensions differ")
    return float(p_j @ t_i)


def score_graph(p_j: np.ndarray, t_all: np.ndarray) -> float:
    """Attribution of source j to the whole graph: <p_j, max-pool of t>."""
    t_all = np.asarray(t_all, dtype=np.float64)
    if t_all.ndim != 2 or t_all.shape[0] == 0:
        raise DataError("graph scoring needs a non-empty (nodes, dim) embedding matrix")
    return score_node(p_j, t_all.max(axis=0))


# ---------------------------------------------------------------------------
# Max-hop probing and neighborhood sampling


def estimate_max_hop(
    model: GcnModel,
    g: Graph,
    probes,
    k_max: int = 6,
    tol: float = 1e-9,
) -> int:
    """Smallest k where every probe's prediction is stable from k to k+1.

    Stability means the full prediction vector on the (k+1)-hop ball
    matches the k-hop one within ``tol``. Falls back to ``k_max`` with a
    warning when no radius in 1..k_max stabilizes.
    """
    if model.head != "node":
        raise DataError("max-hop probing is defined for node-classification targets")
    probes = as_node_set(probes)
    if probes.size == 0:
        raise DataError("probes must not be empty")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")

    def probe_pred(v: int, k: int) -> np.ndarray:
        sub = induce(g, khop_neighbors(g, v, k))
        return gcn_forward(model, sub)[int(sub.to_local([v])[0])]

    preds = {int(v): probe_pred(int(v), 1) for v in probes}
    for k in range(1, k_max + 1):
        stable = True
        nxt = {}
        for v, at_k in preds.items():
            at_next = probe_pred(v, k + 1)
            nxt[v] = at_next
            if np.max(np.abs(at_next - at_k)) > tol:
                stable = False
        if stable:
            return k
        preds = nxt
    warnings.warn(f"predictions never stabilized up to k_max={k_max}; using k_max")
    return k_max


def _ball_union(g: Graph, batch, hops: int) -> NodeSet:
    batch = as_node_set(batch)
    if batch.size == 0:
        raise DataError("batch must not be empty")
    balls = [khop_neighbors(g, int(v), hops) for v in batch]
    return as_node_set(np.concatenate(balls))


def sample_attr_subgraph(g: Graph, batch, hops: int) -> InducedSubgraph:
    """Union of the batch targets' K-hop balls, induced."""
    return induce(g, _ball_union(g, batch, hops))


def sample_param_subgraph(g: Graph, batch, hops: int) -> InducedSubgraph:
    """Union of 2K-hop balls: every edge the batch embeddings depend on."""
    return induce(g, _ball_union(g, batch, 2 * hops))


# ---------------------------------------------------------------------------
# Pair regression loss


def _split_embeddings(e: ExplainerModel, out: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if e.mode == "bidirectional":
        return out[:, : e.embedding_dim], out[:, e.embedding_dim :]
    return out, out


def _pair_loss_and_grads(e: ExplainerModel, g: Graph, pairs: np.ndarray, values: np.ndarray):
    """MSE between pair scores and table values on one subgraph.

    ``pairs`` holds local (target_row, source_row) index pairs. Returns
    the loss and flat parameter gradients matching param_arrays order.
    """
    adj = normalized_adjacency(g)
    flags = _relu_flags(e.backbone)
    inputs, preacts, propagated = stack_forward(
        e.backbone.layers, e.backbone.aggregate, flags, adj, g.features
    )
    out = inputs[-1]
    p, t = _split_embeddings(e, out)
    ti, sj = pairs[:, 0], pairs[:, 1]
    scores = np.einsum("ij,ij->i", p[sj], t[ti])
    resid = scores - values
    value = float(np.mean(resid**2))
    coef = (2.0 / resid.size) * resid
    dp = np.zeros_like(p)
    dt = np.zeros_like(t)
    np.add.at(dp, sj, coef[:, None] * t[ti])
    np.add.at(dt, ti, coef[:, None] * p[sj])
    dout = np.concatenate([dp, dt], axis=1) if e.mode == "bidirectional" else dp + dt
    grads, _ = stack_backward(
        e.backbone.layers, e.backbone.aggregate, flags, adj, preacts, propagated, dout
    )
    return value, [arr for pair in grads for arr in pair]


def _graph_pair_loss_and_grads(e: ExplainerModel, graphs, source_lists, value_lists):
    """Pooled-target variant across a batch of graphs."""
    flags = _relu_flags(e.backbone)
    total_pairs = sum(len(s) for s in source_lists)
    shapes = param_arrays(e.backbone)
    grads_total = [np.zeros_like(a) for a in shapes]
    value = 0.0
    for g, sources, values in zip(graphs, source_lists, value_lists):
        adj = normalized_adjacency(g)
        inputs, preacts, propagated = stack_forward(
            e.backbone.layers, e.backbone.aggregate, flags, adj, g.features
        )
        out = inputs[-1]
        p, t = _split_embeddings(e, out)
        pooled = t.max(axis=0)
        rows = t.argmax(axis=0)
        sj = np.asarray(sources, dtype=np.int64)
        resid = p[sj] @ pooled - np.asarray(values)
        value += float(np.sum(resid**2))
        coef = (2.0 / total_pairs) * resid
        dp = np.zeros_like(p)
        dt = np.zeros_like(t)
        np.add.at(dp, sj, coef[:, None] * pooled)
        d_pooled = coef @ p[sj]
        np.add.at(dt, (rows, np.arange(t.shape[1])), d_pooled)
        dout = np.concatenate([dp, dt], axis=1) if e.mode == "bidirectional" else dp + dt
        grads, _ = stack_backward(
            e.backbone.layers, e.backbone.aggregate, flags, adj, preacts, propagated, dout
        )
        for acc, d in zip(grads_total, (arr for pair in grads for arr in pair)):
            acc += d
    return value / total_pairs, grads_total


def explainer_gradcheck(
    e: ExplainerModel,
    data: Graph | InducedSubgraph,
    pairs: np.ndarray,
    values: np.ndarray,
    step: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Finite-difference check of the composed pair-regression loss."""
    g = _as_graph(data)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    _, grads = _pair_loss_and_grads(e, g, pairs, values)
    worst = 0.0
    for arr, grad in zip(param_arrays(e.backbone), grads):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up, _ = _pair_loss_and_grads(e, g, pairs, values)
            flat[idx] = orig - step
            down, _ = _pair_loss_and_grads(e, g, pairs, values)
            flat[idx] = orig
            fd = (up - down) / (2.0 * step)
            denom = max(abs(gflat[idx]), abs(fd))
            if denom < floor:
                continue
            worst = max(worst, abs(gflat[idx] - fd) / denom)
    return worst


# ---------------------------------------------------------------------------
# Training


def _mi_side_values(ctx: TargetContext, subset: NodeSet, rest: NodeSet) -> tuple[float, float]:
    """Sampled mutual-information integrand for a subset and its complement."""
    p_full = np.clip(_ctx_probs(ctx, ctx.nodes), PROB_FLOOR, 1.0)
    log_full = np.log(p_full)

    def side(kept: NodeSet) -> float:
        p_s = np.clip(_ctx_probs(ctx, kept), PROB_FLOOR, 1.0)
        return float(-np.sum(p_full * (log_full - np.log(p_s))))

    return side(subset), side(rest)


def _ctx_probs(ctx: TargetContext, kept) -> np.ndarray:
    kept = as_node_set(kept)
    if ctx.target is not None:
        kept = np.union1d(kept, [ctx.target])
    if kept.size == 0:
        return np.full(ctx.model.num_classes, 1.0 / ctx.model.num_classes)
    probs = gcn_forward(ctx.model, induce(ctx.graph, kept))
    if ctx.model.head == "graph":
        return probs
    return probs[int(np.searchsorted(kept, ctx.target))]


def _update_pair_table(
    table: dict,
    ctx: TargetContext,
    key,
    rng: np.random.Generator,
    supervision: str,
) -> None:
    """Advance every (target, source) running mean by one shared sample."""
    pool = ctx.pool
    subset = pool[rng.random(pool.size) < 0.5]
    rest = np.setdiff1d(pool, subset, assume_unique=True)
    if supervision == "removal":
        d_subset = kept_value(ctx, subset) - kept_value(ctx, rest)
        d_rest = -d_subset
    else:
        d_subset, d_rest = _mi_side_values(ctx, subset, rest)
    in_subset = np.isin(ctx.nodes, subset, assume_unique=True)
    for node, hit in zip(ctx.nodes, in_subset):
        node = int(node)
        delta = d_subset if (hit or node == ctx.target) else d_rest
        pair = (key, node)
        est = table.get(pair)
        if est is None:
            est = AttributionEstimate(target=ctx.target, source=node)
        table[pair] = mc_update(est, DeltaSample(subset=subset, delta=delta))


def _snapshot(model: GcnModel) -> list[np.ndarray]:
    return [arr.copy() for arr in param_arrays(model)]


def _restore(model: GcnModel, saved: list[np.ndarray]) -> None:
    for arr, kept in zip(param_arrays(model), saved):
        arr[:] = kept


def train_explainer(target_model: GcnModel, data, cfg: ExplainerConfig, splits=None):
    """Fit the amortized explainer against the Monte-Carlo table.

    ``data`` is one Graph for node-classification targets or a list of
    graphs for graph-classification ones. Per epoch: one shared
    attribution sample per explained instance updates the pair table,
    then one Adam step regresses pair scores onto the table over the
    batch's parameter subgraph. Early stopping watches the same loss on
    held-aside validation instances; the best snapshot wins.

    Returns (ExplainerModel, report dict).
    """
    if target_model.head == "graph":
        if isinstance(data, Graph):
            raise DataError("graph-classification targets need a list of graphs")
        return _train_graph(target_model, list(data), cfg, splits)
    if not isinstance(data, Graph):
        raise DataError("node-classification targets explain a single graph")
    return _train_node(target_model, data, cfg)


def _resolve_lr(cfg: ExplainerConfig, head: str) -> float:
    if cfg.learning_rate is not None:
        return cfg.learning_rate
    return 1e-3 if head == "node" else 1e-4


def _train_node(target_model: GcnModel, g: Graph, cfg: ExplainerConfig):
    if cfg.max_hop is not None:
        max_hop = cfg.max_hop
    else:
        probe_rng = derive_rng(cfg.seed, "probes")
        probes = probe_rng.choice(g.num_nodes, size=min(cfg.probe_count, g.num_nodes), replace=False)
        max_hop = estimate_max_hop(target_model, g, probes, k_max=cfg.k_max)

    if g.masks is not None and "train" in g.masks:
        train_nodes = g.masks["train"]
        valid_nodes = g.masks.get("valid", train_nodes)
    else:
        auto = split_indices(g.num_nodes, derive_rng(cfg.seed, "explainer-split"))
        train_nodes, valid_nodes = auto["train"], auto["valid"]
    if valid_nodes.size > cfg.validation_cap:
        pick = derive_rng(cfg.seed, "val-cap").choice(valid_nodes.size, size=cfg.validation_cap, replace=False)
        valid_nodes = np.sort(valid_nodes[pick])

    e = init_explainer(g.feature_dim, cfg, max_hop)
    opt = Adam(_resolve_lr(cfg, "node"), cfg.weight_decay)
    params = param_arrays(e.backbone)
    rng = derive_rng(cfg.seed, "train")
    val_rng = derive_rng(cfg.seed, "validation")

    contexts: dict[int, TargetContext] = {}

    def ctx_for(node: int) -> TargetContext:
        got = contexts.get(node)
        if got is None:
            got = target_context(target_model, g, target=node, hops=max_hop)
            contexts[node] = got
        return got

    # validation machinery is fixed across epochs: same targets, same
    # parameter subgraph, table refreshed by one shared sample per epoch
    val_table: dict = {}
    val_sub = sample_param_subgraph(g, valid_nodes, max_hop)
    val_pairs = []
    for v in valid_nodes:
        rows = ctx_for(int(v)).nodes
        local_t = int(val_sub.to_local([v])[0])
        for row, node in zip(val_sub.to_local(rows), rows):
            val_pairs.append((local_t, int(row), int(v), int(node)))
    val_pairs = np.asarray(val_pairs, dtype=np.int64)

    def val_loss() -> float:
        for v in valid_nodes:
            _update_pair_table(val_table, ctx_for(int(v)), int(v), val_rng, cfg.supervision)
        values = np.array([val_table[(i, j)].value for _, _, i, j in val_pairs])
        out = _embed_forward(e, normalized_adjacency(val_sub.graph), val_sub.graph.features)[0][-1]
        p, t = _split_embeddings(e, out)
        scores = np.einsum("ij,ij->i", p[val_pairs[:, 1]], t[val_pairs[:, 0]])
        return float(np.mean((scores - values) ** 2))

    table: dict = {}
    initial = val_loss()
    best = initial
    best_params = _snapshot(e.backbone)
    best_epoch = 0
    history = [initial]
    stall = 0
    epochs_run = 0

    for epoch in range(cfg.epochs):
        epochs_run = epoch + 1
        batch = rng.choice(train_nodes, size=min(cfg.batch_size, train_nodes.size), replace=False)
        batch = np.sort(batch)
        for v in batch:
            _update_pair_table(table, ctx_for(int(v)), int(v), rng, cfg.supervision)
        sub = sample_param_subgraph(g, batch, max_hop)
        pairs = []
        values = []
        for v in batch:
            rows = ctx_for(int(v)).nodes
            local_t = int(sub.to_local([v])[0])
            for row, node in zip(sub.to_local(rows), rows):
                pairs.append((local_t, int(row)))
                values.append(table[(int(v), int(node))].value)
        pairs = np.asarray(pairs, dtype=np.int64)
        values = np.asarray(values)
        # a single step per epoch barely moves a fresh model; several steps
        # against the same refreshed table converge where one cannot
        for _ in range(cfg.opt_steps):
            loss, grads = _pair_loss_and_grads(e, sub.graph, pairs, values)
            if not np.isfinite(loss):
                raise NumericError("explainer training loss is not finite")
            opt.step(params, grads)

        current = val_loss()
        history.append(current)
        if current < best - cfg.min_improvement:
            best = current
            best_params = _snapshot(e.backbone)
            best_epoch = epochs_run
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break

    _restore(e.backbone, best_params)
    report = {
        "max_hop": max_hop,
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
        "initial_val_loss": initial,
        "best_val_loss": best,
        "val_losses": history,
    }
    return e, report


def _train_graph(target_model: GcnModel, graphs: list[Graph], cfg: ExplainerConfig, splits=None):
    if not graphs:
        raise DataError("empty graph list")
    max_hop = cfg.max_hop if cfg.max_hop is not None else len(target_model.layers)
    if splits is None:
        splits = split_indices(len(graphs), derive_rng(cfg.seed, "explainer-split"))
    train_ids, valid_ids = splits["train"], splits["valid"]
    if valid_ids.size > cfg.validation_cap:
        pick = derive_rng(cfg.seed, "val-cap").choice(valid_ids.size, size=cfg.validation_cap, replace=False)
        valid_ids = np.sort(valid_ids[pick])

    e = init_explainer(graphs[0].feature_dim, cfg, max_hop)
    opt = Adam(_resolve_lr(cfg, "graph"), cfg.weight_decay)
    params = param_arrays(e.backbone)
    rng = derive_rng(cfg.seed, "train")
    val_rng = derive_rng(cfg.seed, "validation")

    contexts: dict[int, TargetContext] = {}

    def ctx_for(idx: int) -> TargetContext:
        got = contexts.get(idx)
        if got is None:
            got = target_context(target_model, graphs[idx])
            contexts[idx] = got
        return got

    val_table: dict = {}

    def batch_loss_grads(ids, table):
        batch_graphs = [graphs[i] for i in ids]
        sources = [ctx_for(int(i)).nodes.tolist() for i in ids]
        values = [
            [table[(int(i), int(j))].value for j in ctx_for(int(i)).nodes] for i in ids
        ]
        return _graph_pair_loss_and_grads(e, batch_graphs, sources, values)

    def val_loss() -> float:
        for i in valid_ids:
            _update_pair_table(val_table, ctx_for(int(i)), int(i), val_rng, cfg.supervision)
        loss, _ = batch_loss_grads(valid_ids, val_table)
        return loss

    table: dict = {}
    initial = val_loss()
    best = initial
    best_params = _snapshot(e.backbone)
    best_epoch = 0
    history = [initial]
    stall = 0
    epochs_run = 0

    for epoch in range(cfg.epochs):
        epochs_run = epoch + 1
        batch = rng.choice(train_ids, size=min(cfg.batch_size, train_ids.size), replace=False)
        batch = np.sort(batch)
        for i in batch:
            _update_pair_table(table, ctx_for(int(i)), int(i), rng, cfg.supervision)
        for _ in range(cfg.opt_steps):
            loss, grads = batch_loss_grads(batch, table)
            if not np.isfinite(loss):
                raise NumericError("explainer training loss is not finite")
            opt.step(params, grads)

        current = val_loss()
        history.append(current)
        if current < best - cfg.min_improvement:
            best = current
            best_params = _snapshot(e.backbone)
            best_epoch = epochs_run
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break

    _restore(e.backbone, best_params)
    report = {
        "max_hop": max_hop,
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
        "initial_val_loss": initial,
        "best_val_loss": best,
        "val_losses": history,
    }
    return e, report


def train_mi_baseline(target_model: GcnModel, data, cfg: ExplainerConfig, splits=None):
    """Same architecture and loop, mutual-information regression targets."""
    return train_explainer(target_model, data, replace(cfg, supervision="mi"), splits)


def single_embedding_ablation(target_model: GcnModel, data, cfg: ExplainerConfig, splits=None):
    """One shared embedding per node: scores are symmetric by construction."""
    return train_explainer(target_model, data, replace(cfg, mode="single"), splits)


# ---------------------------------------------------------------------------
# Inference


def _ranked(sources: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((sources, -scores))
    return sources[order], scores[order]


def explain(
    e: ExplainerModel,
    target_model: GcnModel,
    data,
    targets,
    batch_size: int = 64,
) -> list[Explanation]:
    """Score and rank every candidate source for each requested target.

    Node targets are explained in batches: one embedding forward on the
    union of their 2K-hop neighborhoods covers the full receptive field
    of every scored pair, so results match per-target evaluation while
    the cost stays independent of total graph size. Graph targets are
    indices into ``data`` (a list of graphs).
    """
    targets = [int(v) for v in np.asarray(targets, dtype=np.int64).reshape(-1)]
    if target_model.head == "graph":
        if isinstance(data, Graph):
            raise DataError("graph-classification explanations need a list of graphs")
        out: list[Explanation] = []
        for idx in targets:
            if idx < 0 or idx >= len(data):
                raise DataError(f"graph index {idx} out of range")
            p, t = embed(e, data[idx])
            scores = p @ t.max(axis=0)
            sources, scores = _ranked(np.arange(data[idx].num_nodes, dtype=np.int64), scores)
            out.append(Explanation(target=idx, sources=sources, scores=scores))
        return out

    if not isinstance(data, Graph):
        raise DataError("node-classification explanations run on a single graph")
    out = []
    for start in range(0, len(targets), batch_size):
        chunk = np.asarray(targets[start : start + batch_size], dtype=np.int64)
        sub = sample_param_subgraph(data, chunk, e.max_hop)
        p, t = embed(e, sub)
        for v in chunk:
            sources = khop_neighbors(data, int(v), e.max_hop)
            rows = sub.to_local(sources)
            scores = p[rows] @ t[int(sub.to_local([v])[0])]
            ranked_ids, ranked_scores = _ranked(sources, scores)
            out.append(Explanation(target=int(v), sources=ranked_ids, scores=ranked_scores))
    return out


# ---------------------------------------------------------------------------
# Checkpoints


def explainer_to_payload(e: ExplainerModel, config: dict | None = None) -> dict:
    payload = model_to_payload(e.backbone, config)
    payload["format"] = "explainer-checkpoint"
    payload["embedding_dim"] = e.embedding_dim
    payload["mode"] = e.mode
    payload["max_hop"] = e.max_hop
    return payload


def explainer_from_payload(payload: dict, where: str = "checkpoint") -> ExplainerModel:
    if payload.get("format") != "explainer-checkpoint":
        raise DataError(f"{where}: not an explainer checkpoint")
    if payload.get("mode") not in MODES:
        raise DataError(f"{where}: unknown embedding mode {payload.get('mode')!r}")
    inner = dict(payload)
    inner["format"] = "gcn-checkpoint"
    backbone = model_from_payload(inner, where)
    return ExplainerModel(
        backbone=backbone,
        embedding_dim=int(payload["embedding_dim"]),
        mode=payload["mode"],
        max_hop=int(payload["max_hop"]),
    )


def save_explainer(path, e: ExplainerModel, config: dict | None = None) -> None:
    Path(path).write_text(json.dumps(explainer_to_payload(e, config), sort_keys=True))


def load_explainer(path) -> ExplainerModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"explainer file not found: {path}")
    return explainer_from_payload(json.loads(path.read_text()), where=str(path))
