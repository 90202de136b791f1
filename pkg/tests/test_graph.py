import json

import numpy as np
import pytest

from graphxplain.errors import DataError
from graphxplain.graph import (
    Graph,
    as_node_set,
    induce,
    khop_neighbors,
    load_graphs,
    remove_nodes,
    sample_subset_with_anchor,
    save_graphs,
)


def bfs_ball(g: Graph, start: int, hops: int) -> set[int]:
    # independent oracle: plain BFS over an adjacency dict
    adj: dict[int, set[int]] = {v: set() for v in range(g.num_nodes)}
    for u, v in g.edges:
        adj[int(u)].add(int(v))
        adj[int(v)].add(int(u))
    seen = {start}
    frontier = {start}
    for _ in range(hops):
        frontier = {w for v in frontier for w in adj[v]} - seen
        seen |= frontier
    return seen


def test_khop_matches_bfs(ba_graph):
    for start in (0, 7, 31, 59):
        for hops in range(4):
            got = set(khop_neighbors(ba_graph, start, hops).tolist())
            assert got == bfs_ball(ba_graph, start, hops)


def test_khop_zero_is_self(tiny_graph):
    assert khop_neighbors(tiny_graph, 5, 0).tolist() == [5]


def test_khop_validates():
    g = Graph(num_nodes=2, edges=np.array([(0, 1)]), features=np.ones((2, 1)))
    with pytest.raises(ValueError):
        khop_neighbors(g, 9, 1)
    with pytest.raises(ValueError):
        khop_neighbors(g, 0, -1)


def test_as_node_set_sorts_and_dedupes():
    assert as_node_set([3, 1, 3, 2]).tolist() == [1, 2, 3]
    assert as_node_set([]).size == 0


def test_induce_keeps_internal_edges(tiny_graph):
    sub = induce(tiny_graph, [0, 1, 3, 4])
    got = {tuple(sorted(e)) for e in sub.graph.edges.tolist()}
    # oracle: edges of the parent with both endpoints kept, relabeled
    kept = [0, 1, 3, 4]
    relabel = {p: i for i, p in enumerate(kept)}
    want = set()
    for u, v in tiny_graph.edges.tolist():
        if u in relabel and v in relabel:
            want.add(tuple(sorted((relabel[u], relabel[v]))))
    assert got == want


def test_induce_round_trips_ids(tiny_graph):
    sub = induce(tiny_graph, [2, 5, 7])
    local = sub.to_local([5, 7, 2])
    assert sub.to_parent(local).tolist() == [5, 7, 2]
    with pytest.raises(ValueError):
        sub.to_local([4])


def test_induce_carries_features_and_labels(tiny_graph):
    sub = induce(tiny_graph, [1, 6])
    assert np.array_equal(sub.graph.features, tiny_graph.features[[1, 6]])
    assert sub.graph.node_labels.tolist() == [0, 1]


def test_induce_rejects_bad_sets(tiny_graph):
    with pytest.raises(ValueError):
        induce(tiny_graph, [])
    with pytest.raises(ValueError):
        induce(tiny_graph, [99])


def test_remove_nodes_is_complement_induce(tiny_graph):
    scope = np.arange(8)
    sub = remove_nodes(tiny_graph, scope, removed=[0, 4, 7])
    direct = induce(tiny_graph, [1, 2, 3, 5, 6])
    assert sub.kept.tolist() == direct.kept.tolist()
    assert np.array_equal(np.sort(sub.graph.edges, axis=1), np.sort(direct.graph.edges, axis=1))


def test_remove_nodes_forced_survives(tiny_graph):
    sub = remove_nodes(tiny_graph, np.arange(8), removed=np.arange(8), forced=[3])
    assert sub.kept.tolist() == [3]
    with pytest.raises(ValueError):
        remove_nodes(tiny_graph, np.arange(8), removed=np.arange(8))


def test_anchor_sampling_contract(rng):
    pool = np.arange(10)
    seen_sizes = []
    for _ in range(200):
        sub = sample_subset_with_anchor(rng, pool, anchor=4)
        assert 4 in sub
        assert set(sub.tolist()) <= set(pool.tolist())
        seen_sizes.append(sub.size)
    # non-anchor nodes join with p=1/2
    assert 4.5 < np.mean(seen_sizes) < 6.5
    with pytest.raises(ValueError):
        sample_subset_with_anchor(rng, pool, anchor=77)


def test_graph_validation():
    with pytest.raises(DataError):
        Graph(num_nodes=0, edges=np.zeros((0, 2), dtype=int), features=np.ones((0, 1)))
    with pytest.raises(DataError):
        Graph(num_nodes=3, edges=np.array([(0, 3)]), features=np.ones((3, 1)))
    with pytest.raises(DataError):
        Graph(num_nodes=3, edges=np.array([(1, 1)]), features=np.ones((3, 1)))
    with pytest.raises(DataError):
        Graph(num_nodes=3, edges=np.array([(0, 1), (1, 0)]), features=np.ones((3, 1)))
    with pytest.raises(DataError):
        Graph(num_nodes=3, edges=np.array([(0, 1)]), features=np.ones((4, 1)))


def test_save_load_round_trip(tmp_path, tiny_graph):
    path = tmp_path / "g.json"
    save_graphs(path, tiny_graph)
    back = load_graphs(path)
    assert back.num_nodes == tiny_graph.num_nodes
    assert np.array_equal(back.edges, tiny_graph.edges)
    assert np.allclose(back.features, tiny_graph.features)
    assert back.node_labels.tolist() == tiny_graph.node_labels.tolist()
    # second save is byte-identical
    twice = tmp_path / "g2.json"
    save_graphs(twice, back)
    assert path.read_bytes() == twice.read_bytes()


def test_save_load_graph_lists(tmp_path, tiny_graph, ba_graph):
    path = tmp_path / "many.json"
    save_graphs(path, [tiny_graph, ba_graph])
    back = load_graphs(path)
    assert isinstance(back, list) and len(back) == 2
    assert back[1].num_nodes == ba_graph.num_nodes


def test_load_diagnostics_name_the_field(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"num_nodes": 2, "edges": [[0, 1]]}))
    with pytest.raises(DataError) as err:
        load_graphs(path)
    assert "features" in str(err.value)
    path.write_text("{nope")
    with pytest.raises(DataError):
        load_graphs(path)
    with pytest.raises(DataError):
        load_graphs(tmp_path / "missing.json")
