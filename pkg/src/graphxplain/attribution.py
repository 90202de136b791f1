"""Ground-truth attribution oracles built on node removal.

The scalar under study is always the model probability of the class
predicted on the untouched node set, evaluated on induced subgraphs with
the explained node force-kept. Exact attribution enumerates every subset
of the removable pool once and reuses the value table for all sources;
the Monte-Carlo estimator reproduces it through a running-mean recursion
so partial estimates are usable at any point. The mutual-information
score mirrors the baseline its comparisons are made against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError
from .gcn import GcnModel, gcn_forward
from .graph import (
    Graph,
    NodeSet,
    as_node_set,
    induce,
    khop_neighbors,
    sample_subset_with_anchor,
)

ENUMERATION_CAP = 14
PROB_FLOOR = 1e-12
METHODS = ("exact", "mc", "mi", "explainer")


@dataclass(frozen=True)
class TargetContext:
    """Everything held fixed while attributing one prediction.

    For node heads ``nodes`` is the K-hop ball around ``target`` (target
    included); for graph heads it is every node and ``target`` is None.
    ``class_id`` is the class predicted on the untouched node set and
    ``full_value`` the model probability there, so every delta downstream
    is a difference of probabilities of one fixed class.
    """

    model: GcnModel
    graph: Graph
    target: int | None
    hops: int
    nodes: NodeSet
    class_id: int
    full_value: float

    @property
    def pool(self) -> NodeSet:
        """Removable nodes: the neighborhood minus the protected target."""
        if self.target is None:
            return self.nodes
        return self.nodes[self.nodes != self.target]


def target_context(model: GcnModel, graph: Graph, target: int | None = None, hops: int = 1) -> TargetContext:
    if model.head == "graph":
        probs = gcn_forward(model, graph)
        class_id = int(np.argmax(probs))
        nodes = np.arange(graph.num_nodes, dtype=np.int64)
        return TargetContext(model, graph, None, hops, nodes, class_id, float(probs[class_id]))
    if target is None:
        raise DataError("node-head models need an explicit target node")
    target = int(target)
    nodes = khop_neighbors(graph, target, hops)
    sub = induce(graph, nodes)
    row = gcn_forward(model, sub)[int(sub.to_local([target])[0])]
    class_id = int(np.argmax(row))
    return TargetContext(model, graph, target, hops, nodes, class_id, float(row[class_id]))


def kept_value(ctx: TargetContext, kept) -> float:
    """f on the subgraph induced by ``kept``.

    The target is force-added for node heads. An empty kept set can only
    arise for graph heads and reads as the uninformative uniform
    prediction.
    """
    kept = as_node_set(kept)
    if ctx.target is not None:
        kept = np.union1d(kept, [ctx.target])
    if kept.size == 0:
        return 1.0 / ctx.model.num_classes
    probs = gcn_forward(ctx.model, induce(ctx.graph, kept))
    if ctx.model.head == "graph":
        return float(probs[ctx.class_id])
    local = int(np.searchsorted(kept, ctx.target))
    return float(probs[local, ctx.class_id])


def _checked_subset(ctx: TargetContext, subset) -> NodeSet:
    subset = as_node_set(subset)
    if subset.size and not np.isin(subset, ctx.nodes, assume_unique=True).all():
        raise DataError("subset reaches outside the target neighborhood")
    return subset


def subset_delta(ctx: TargetContext, subset) -> float:
    """f(G_S) - f(G_{N\\S}) for one kept subset, target kept on both sides."""
    subset = _checked_subset(ctx, subset)
    rest = np.setdiff1d(ctx.nodes, subset, assume_unique=True)
    return kept_value(ctx, subset) - kept_value(ctx, rest)


def delta_fidelity(ctx: TargetContext, subset) -> float:
    """Fidelity+ minus Fidelity- of treating ``subset`` as the explanation.

    Algebraically this equals subset_delta (the full-neighborhood terms
    cancel); it is computed the long way round, through both fidelities,
    so the identity can be checked rather than assumed.
    """
    subset = _checked_subset(ctx, subset)
    rest = np.setdiff1d(ctx.nodes, subset, assume_unique=True)
    fid_plus = ctx.full_value - kept_value(ctx, rest)
    fid_minus = ctx.full_value - kept_value(ctx, subset)
    return fid_plus - fid_minus


# ---------------------------------------------------------------------------
# Exact enumeration


def _value_table(ctx: TargetContext, pool: NodeSet) -> np.ndarray:
    """kept_value over every subset of ``pool``, indexed by bitmask."""
    m = int(pool.size)
    bits = np.arange(m)
    table = np.empty(1 << m)
    for mask in range(1 << m):
        table[mask] = kept_value(ctx, pool[(mask >> bits) & 1 == 1])
    return table


def exact_attribution_all(ctx: TargetContext, cap: int = ENUMERATION_CAP) -> dict[int, float]:
    """phi for every source in the neighborhood by full enumeration.

    phi of a source is the mean removal delta over all neighborhood
    subsets containing it. One model evaluation per subset of the
    removable pool is shared across sources; summation runs in ascending
    bitmask order for reproducibility.
    """
    if ctx.nodes.size > cap:
        raise DataError(
            f"neighborhood of {ctx.nodes.size} nodes exceeds the enumeration cap {cap}"
        )
    pool = ctx.pool
    m = int(pool.size)
    table = _value_table(ctx, pool)
    full = (1 << m) - 1
    masks = np.arange(1 << m)
    deltas = table - table[full ^ masks]
    out: dict[int, float] = {}
    for bit, source in enumerate(pool):
        hit = (masks >> bit) & 1 == 1
        out[int(source)] = float(np.sum(deltas[hit])) / float(1 << max(m - 1, 0))
    if ctx.target is not None:
        # subsets containing the target pair off with their complements,
        # so the protected node's own attribution sums to zero
        out[ctx.target] = float(np.sum(deltas)) / float(1 << m)
    return out


def exact_attribution(ctx: TargetContext, source: int, cap: int = ENUMERATION_CAP) -> float:
    phi = exact_attribution_all(ctx, cap=cap)
    source = int(source)
    if source not in phi:
        raise DataError(f"source {source} is not in the target neighborhood")
    return phi[source]


# ---------------------------------------------------------------------------
# Monte-Carlo estimation


@dataclass(frozen=True)
class AttributionEstimate:
    """Running Monte-Carlo mean of removal deltas for one (source, target)."""

    target: int | None
    source: int
    value: float = 0.0
    samples_seen: int = 0


@dataclass(frozen=True)
class DeltaSample:
    """One sampled kept subset and its removal delta."""

    subset: NodeSet
    delta: float


def mc_update(est: AttributionEstimate, sample: DeltaSample) -> AttributionEstimate:
    """Fold one sample into the running mean; the t-th update has weight 1/t."""
    t = est.samples_seen + 1
    value = (1.0 - 1.0 / t) * est.value + sample.delta / t
    return replace(est, value=value, samples_seen=t)


def draw_delta(ctx: TargetContext, source: int, rng: np.random.Generator) -> DeltaSample:
    """Uniform subset of the pool containing ``source``, with its delta.

    For the protected target itself every pool subset is admissible (the
    target is force-kept regardless), so the draw is unanchored.
    """
    source = int(source)
    pool = ctx.pool
    if ctx.target is not None and source == ctx.target:
        subset = pool[rng.random(pool.size) < 0.5]
    else:
        subset = sample_subset_with_anchor(rng, pool, source)
    return DeltaSample(subset=subset, delta=subset_delta(ctx, subset))


def mc_estimate(
    ctx: TargetContext, source: int, n_samples: int, rng: np.random.Generator
) -> AttributionEstimate:
    """Monte-Carlo phi via the running-mean recursion."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    est = AttributionEstimate(target=ctx.target, source=int(source))
    for _ in range(n_samples):
        est = mc_update(est, draw_delta(ctx, source, rng))
    return est


# ---------------------------------------------------------------------------
# Mutual-information baseline


def _kept_probs(ctx: TargetContext, kept) -> np.ndarray:
    kept = as_node_set(kept)
    if ctx.target is not None:
        kept = np.union1d(kept, [ctx.target])
    if kept.size == 0:
        return np.full(ctx.model.num_classes, 1.0 / ctx.model.num_classes)
    probs = gcn_forward(ctx.model, induce(ctx.graph, kept))
    if ctx.model.head == "graph":
        return probs
    return probs[int(np.searchsorted(kept, ctx.target))]


def mi_value(
    ctx: TargetContext,
    kept,
    n_samples: int = 0,
    rng: np.random.Generator | None = None,
) -> float:
    """Mutual-information style importance of keeping ``kept``.

    The deterministic form scores the kept set as given: the cross
    entropy of its prediction against the full-neighborhood one. With
    n_samples > 0 the sampled form averages -sum_y p_full(y) *
    log(p_full(y)/p_S(y)) over random supersets S of ``kept`` drawn from
    the pool; flipping the ratio would flip the sign. Probabilities are
    clamped to [1e-12, 1] before logs.
    """
    kept = _checked_subset(ctx, kept)
    if kept.size == 0:
        raise DataError("kept set must not be empty")
    p_full = np.clip(_kept_probs(ctx, ctx.nodes), PROB_FLOOR, 1.0)
    if n_samples == 0:
        p_kept = np.clip(_kept_probs(ctx, kept), PROB_FLOOR, 1.0)
        return float(-np.sum(p_full * np.log(p_kept)))
    if rng is None:
        raise ValueError("the sampled form needs an rng")
    rest = np.setdiff1d(ctx.pool, kept, assume_unique=True)
    log_full = np.log(p_full)
    total = 0.0
    for _ in range(n_samples):
        sampled = np.union1d(kept, rest[rng.random(rest.size) < 0.5])
        p_s = np.clip(_kept_probs(ctx, sampled), PROB_FLOOR, 1.0)
        total += float(-np.sum(p_full * (log_full - np.log(p_s))))
    return total / n_samples


# ---------------------------------------------------------------------------
# Attribution dump format (JSON lines)


def attribution_record(target, source: int, phi: float, method: str, samples: int) -> dict:
    if method not in METHODS:
        raise DataError(f"unknown attribution method {method!r}")
    return {
        "target": int(target),
        "source": int(source),
        "phi": float(phi),
        "method": method,
        "samples": int(samples),
    }


def save_attributions(path, rows: list[dict]) -> None:
    lines = []
    for row in rows:
        rec = attribution_record(
            row["target"], row["source"], row["phi"], row["method"], row["samples"]
        )
        lines.append(json.dumps(rec, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_attributions(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"attribution file not found: {path}")
    rows = []
    for k, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise DataError(f"{path}:{k + 1}: not valid JSON ({err})") from None
        for key in ("target", "source", "phi", "method", "samples"):
            if key not in obj:
                raise DataError(f"{path}:{k + 1}: missing field {key!r}")
        if obj["method"] not in METHODS:
            raise DataError(f"{path}:{k + 1}: unknown method {obj['method']!r}")
        rows.append(obj)
    return rows
