"""Immutable attributed graphs and node-removal machinery.

Everything downstream evaluates a black-box model on induced subgraphs of
small neighborhoods, so the graph type is deliberately plain: a frozen
record of canonical undirected edges plus per-node features, with cached
adjacency for BFS work. Induced subgraphs keep an explicit id remap so
results are always reported in parent-graph ids.

Node sets are canonical everywhere: sorted, duplicate-free int64 arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DataError

MASK_KEYS = ("train", "valid", "test")

NodeSet = np.ndarray


def as_node_set(nodes: Iterable[int] | np.ndarray) -> NodeSet:
    """Normalize node ids to the canonical sorted duplicate-free form."""
    arr = np.asarray(nodes, dtype=np.int64).reshape(-1)
    return np.unique(arr)


def _frozen_copy(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected attributed graph.

    edges are stored once per undirected pair, endpoint-sorted and
    lexicographically ordered; self-loops and duplicates are rejected.
    ``masks`` optionally holds train/valid/test node-id sets.
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    node_labels: np.ndarray | None = None
    graph_label: int | None = None
    masks: dict[str, np.ndarray] | None = None

    def __post_init__(self) -> None:
        n = int(self.num_nodes)
        if n <= 0:
            raise DataError("num_nodes must be positive")

        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise DataError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise DataError("self-loop in edge list")
            edges = np.sort(edges, axis=1)
            edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
            if np.any(np.all(edges[1:] == edges[:-1], axis=1)):
                raise DataError("duplicate edge (undirected pairs are stored once)")

        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != n or features.shape[1] < 1:
            raise DataError(f"features must have shape ({n}, d) with d >= 1")

        labels = self.node_labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).reshape(-1)
            if labels.shape[0] != n:
                raise DataError("node_labels length does not match num_nodes")
            labels = _frozen_copy(labels)

        masks = self.masks
        if masks is not None:
            clean: dict[str, np.ndarray] = {}
            for key, ids in masks.items():
                if key not in MASK_KEYS:
                    raise DataError(f"unknown split name {key!r}")
                ids = as_node_set(ids)
                if ids.size and (ids[0] < 0 or ids[-1] >= n):
                    raise DataError(f"split {key!r} contains out-of-range node ids")
                clean[key] = _frozen_copy(ids)
            masks = clean

        object.__setattr__(self, "num_nodes", n)
        object.__setattr__(self, "edges", _frozen_copy(edges))
        object.__setattr__(self, "features", _frozen_copy(features))
        object.__setattr__(self, "node_labels", labels)
        object.__setattr__(self, "masks", masks)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @cached_property
    def _adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        # CSR-style (indptr, flat neighbor ids), neighbors sorted per node.
        if self.edges.size:
            both = np.concatenate([self.edges, self.edges[:, ::-1]])
        else:
            both = np.empty((0, 2), dtype=np.int64)
        both = both[np.lexsort((both[:, 1], both[:, 0]))]
        counts = np.bincount(both[:, 0], minlength=self.num_nodes)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return indptr, both[:, 1].copy()

    def neighbors_of(self, node: int) -> np.ndarray:
        indptr, flat = self._adjacency
        return flat[indptr[node]:indptr[node + 1]]

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        if self.edges.size:
            deg += np.bincount(self.edges[:, 0], minlength=self.num_nodes)
            deg += np.bincount(self.edges[:, 1], minlength=self.num_nodes)
        return deg


@dataclass(frozen=True, eq=False)
class InducedSubgraph:
    """Subgraph induced on a kept node set, with the parent-id remap.

    ``graph`` is a standalone Graph in local ids 0..len(kept)-1 whose
    node k corresponds to parent node ``kept[k]``.
    """

    parent: Graph
    kept: NodeSet
    graph: Graph

    @property
    def num_nodes(self) -> int:
        return int(self.kept.size)

    def to_local(self, parent_ids) -> np.ndarray:
        ids = np.asarray(parent_ids, dtype=np.int64).reshape(-1)
        pos = np.searchsorted(self.kept, ids)
        ok = (pos < self.kept.size) & (self.kept[np.minimum(pos, self.kept.size - 1)] == ids)
        if not ok.all():
            missing = ids[~ok]
            raise ValueError(f"nodes not present in subgraph: {missing.tolist()}")
        return pos

    def to_parent(self, local_ids) -> np.ndarray:
        ids = np.asarray(local_ids, dtype=np.int64)
        return self.kept[ids]


def _check_node(g: Graph, node: int) -> int:
    node = int(node)
    if node < 0 or node >= g.num_nodes:
        raise ValueError(f"node {node} out of range for graph with {g.num_nodes} nodes")
    return node


def khop_neighbors(g: Graph, node: int, hops: int) -> NodeSet:
    """Nodes within ``hops`` edges of ``node``, including the node itself.

    hops = 0 returns just the node. Results are nested in ``hops``:
    each ball contains every smaller one.
    """
    node = _check_node(g, node)
    if hops < 0:
        raise ValueError("hops must be non-negative")
    visited = np.zeros(g.num_nodes, dtype=bool)
    visited[node] = True
    indptr, flat = g._adjacency
    frontier = np.array([node], dtype=np.int64)
    for _ in range(hops):
        if frontier.size == 0:
            break
        chunks = [flat[indptr[u]:indptr[u + 1]] for u in frontier]
        candidates = np.unique(np.concatenate(chunks)) if chunks else frontier[:0]
        fresh = candidates[~visited[candidates]]
        visited[fresh] = True
        frontier = fresh
    return np.flatnonzero(visited).astype(np.int64)


def induce(g: Graph, keep) -> InducedSubgraph:
    """Subgraph on ``keep`` retaining every edge with both endpoints kept."""
    keep = as_node_set(keep)
    if keep.size == 0:
        raise ValueError("cannot induce a subgraph on an empty node set")
    if keep[0] < 0 or keep[-1] >= g.num_nodes:
        raise ValueError("keep set contains out-of-range node ids")
    in_keep = np.zeros(g.num_nodes, dtype=bool)
    in_keep[keep] = True
    if g.edges.size:
        sel = g.edges[in_keep[g.edges[:, 0]] & in_keep[g.edges[:, 1]]]
        local_edges = np.searchsorted(keep, sel)
    else:
        local_edges = np.empty((0, 2), dtype=np.int64)
    local = Graph(
        num_nodes=int(keep.size),
        edges=local_edges,
        features=g.features[keep],
        node_labels=None if g.node_labels is None else g.node_labels[keep],
        graph_label=g.graph_label,
    )
    return InducedSubgraph(parent=g, kept=keep, graph=local)


def remove_nodes(g: Graph, scope, removed, forced=()) -> InducedSubgraph:
    """Induce on (scope minus removed) union forced.

    ``forced`` protects nodes (typically the node being explained) from
    deletion. Removing everything without a forced set is an error.
    """
    scope = as_node_set(scope)
    removed = as_node_set(removed)
    forced = as_node_set(forced)
    if removed.size and not np.isin(removed, scope, assume_unique=True).all():
        raise ValueError("removed nodes must lie within the scope")
    if forced.size and not np.isin(forced, scope, assume_unique=True).all():
        raise ValueError("forced nodes must lie within the scope")
    keep = np.union1d(np.setdiff1d(scope, removed, assume_unique=True), forced)
    if keep.size == 0:
        raise ValueError("removal left no nodes; pass a forced set to keep")
    return induce(g, keep)


def sample_subset_with_anchor(rng: np.random.Generator, pool, anchor: int) -> NodeSet:
    """Random subset of ``pool`` that always contains ``anchor``.

    Every other pool member is included independently with probability
    one half, so the draw is uniform over the 2^(len(pool)-1) subsets
    containing the anchor.
    """
    pool = as_node_set(pool)
    pos = int(np.searchsorted(pool, anchor))
    if pos >= pool.size or pool[pos] != anchor:
        raise ValueError(f"anchor {anchor} not in pool")
    take = rng.random(pool.size) < 0.5
    take[pos] = True
    return pool[take]


# ---------------------------------------------------------------------------
# JSON schema


def graph_to_payload(g: Graph) -> dict:
    payload: dict = {
        "num_nodes": g.num_nodes,
        "edges": g.edges.tolist(),
        "features": g.features.tolist(),
        "node_labels": None if g.node_labels is None else g.node_labels.tolist(),
        "graph_label": g.graph_label,
        "masks": None
        if g.masks is None
        else {key: ids.tolist() for key, ids in g.masks.items()},
    }
    return payload


def _require(condition: bool, where: str, message: str) -> None:
    if not condition:
        raise DataError(f"{where}: {message}")


def graph_from_payload(obj, where: str = "graph") -> Graph:
    _require(isinstance(obj, dict), where, "expected a JSON object")
    for key in ("num_nodes", "edges", "features"):
        _require(key in obj, where, f"missing required field {key!r}")
    _require(isinstance(obj["num_nodes"], int), where, "num_nodes must be an integer")
    _require(isinstance(obj["edges"], list), where, "edges must be a list of pairs")
    for k, e in enumerate(obj["edges"]):
        _require(
            isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e),
            where,
            f"edges[{k}] must be a pair of integer node ids",
        )
    _require(isinstance(obj["features"], list), where, "features must be a list of rows")
    labels = obj.get("node_labels")
    _require(labels is None or isinstance(labels, list), where, "node_labels must be a list or null")
    graph_label = obj.get("graph_label")
    _require(
        graph_label is None or isinstance(graph_label, int),
        where,
        "graph_label must be an integer or null",
    )
    masks = obj.get("masks")
    if masks is not None:
        _require(isinstance(masks, dict), where, "masks must be an object or null")
        for key, ids in masks.items():
            _require(key in MASK_KEYS, where, f"unknown split name {key!r}")
            _require(isinstance(ids, list), where, f"masks[{key!r}] must be a list of node ids")
    try:
        return Graph(
            num_nodes=obj["num_nodes"],
            edges=np.asarray(obj["edges"], dtype=np.int64).reshape(-1, 2),
            features=obj["features"],
            node_labels=labels,
            graph_label=graph_label,
            masks=masks,
        )
    except DataError as err:
        raise DataError(f"{where}: {err}") from None


def save_graphs(path, graphs: Graph | list[Graph]) -> None:
    """Write a graph (object) or list of graphs (array) as JSON."""
    if isinstance(graphs, Graph):
        payload = graph_to_payload(graphs)
    else:
        payload = [graph_to_payload(g) for g in graphs]
    Path(path).write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")))


def load_graphs(path) -> Graph | list[Graph]:
    """Load the JSON graph schema; a top-level array means several graphs."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"graph file not found: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise DataError(f"{path}: not valid JSON ({err})") from None
    if isinstance(obj, list):
        return [graph_from_payload(item, where=f"{path}:graphs[{k}]") for k, item in enumerate(obj)]
    return graph_from_payload(obj, where=str(path))
