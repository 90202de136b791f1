import numpy as np
import pytest
from scipy import sparse

from graphxplain.errors import DataError
from graphxplain.gcn import (
    Adam,
    LossSpec,
    TrainConfig,
    backward,
    gcn_forward,
    gradcheck,
    init_gcn,
    load_model,
    model_from_payload,
    model_to_payload,
    normalized_adjacency,
    param_arrays,
    predict_scalar,
    save_model,
    split_indices,
    train_target,
)
from graphxplain.graph import Graph, induce
from graphxplain.seeding import derive_rng


def dense_norm_adj(g: Graph) -> np.ndarray:
    # oracle: D^-1/2 (A + I) D^-1/2 built by hand
    a = np.eye(g.num_nodes)
    for u, v in g.edges:
        a[u, v] = a[v, u] = 1.0
    d = a.sum(axis=1)
    inv = 1.0 / np.sqrt(d)
    return a * inv[:, None] * inv[None, :]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return np.exp(z) / np.exp(z).sum(axis=-1, keepdims=True)


def test_normalized_adjacency_matches_oracle(tiny_graph, ba_graph):
    for g in (tiny_graph, ba_graph):
        got = normalized_adjacency(g)
        if sparse.issparse(got):
            got = got.toarray()
        assert np.allclose(got, dense_norm_adj(g), atol=1e-12)


def test_sparse_and_dense_paths_agree(ba_graph):
    dense = normalized_adjacency(ba_graph, dense_limit=10**6)
    csr = normalized_adjacency(ba_graph, dense_limit=1)
    assert sparse.issparse(csr) and not sparse.issparse(dense)
    assert np.allclose(csr.toarray(), dense, atol=1e-12)


def test_forward_matches_hand_math(tiny_graph):
    # one conv layer, node head: that layer is the classifier
    model = init_gcn(2, 3, 2, num_layers=1, head="node", seed=11)
    probs = gcn_forward(model, tiny_graph)
    a = dense_norm_adj(tiny_graph)
    z = a @ tiny_graph.features @ model.layers[0].weight + model.layers[0].bias
    assert np.allclose(probs, softmax(z), atol=1e-12)
    assert probs.dtype == np.float64
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_relu_applied_between_but_not_after(tiny_graph):
    model = init_gcn(2, 3, 2, num_layers=2, head="node", seed=12)
    a = dense_norm_adj(tiny_graph)
    h = np.maximum(a @ tiny_graph.features @ model.layers[0].weight + model.layers[0].bias, 0.0)
    z = a @ h @ model.layers[1].weight + model.layers[1].bias  # no relu after the last conv
    assert np.allclose(gcn_forward(model, tiny_graph), softmax(z), atol=1e-12)


def test_graph_head_pooled_readout(tiny_graph):
    model = init_gcn(2, 4, 2, num_layers=2, head="graph", seed=13)
    probs = gcn_forward(model, tiny_graph)
    assert probs.shape == (2,)
    a = dense_norm_adj(tiny_graph)
    h = np.maximum(a @ tiny_graph.features @ model.layers[0].weight + model.layers[0].bias, 0.0)
    h = a @ h @ model.layers[1].weight + model.layers[1].bias
    pooled = np.concatenate([h.max(axis=0), h.mean(axis=0)])
    z = pooled @ model.readout.weight + model.readout.bias
    assert np.allclose(probs, softmax(z), atol=1e-12)


def test_forward_on_induced_subgraph(node_model, ba_graph):
    sub = induce(ba_graph, [0, 1, 2, 5, 9])
    direct = gcn_forward(node_model, sub.graph)
    assert np.array_equal(gcn_forward(node_model, sub), direct)


def test_feature_dim_mismatch(node_model, tiny_graph):
    with pytest.raises(DataError):
        gcn_forward(node_model, tiny_graph)  # fixture model expects wider features


def test_predict_scalar_consistency(node_model, ba_graph):
    probs = gcn_forward(node_model, ba_graph)
    assert predict_scalar(node_model, ba_graph, target=4, class_id=1) == probs[4, 1]


def test_gradcheck_random_instances(ba_graph, tiny_graph):
    for k in range(4):
        rng = derive_rng(k, "test", "gradcheck")
        model = init_gcn(ba_graph.feature_dim, 4, 3, num_layers=2, head="node", seed=100 + k)
        labels = rng.integers(3, size=ba_graph.num_nodes)
        ids = np.arange(0, 60, 5)
        err = gradcheck(model, ba_graph, LossSpec("cross_entropy", targets=labels[ids], node_ids=ids))
        assert err < 1e-4
    gm = init_gcn(2, 4, 2, num_layers=2, head="graph", seed=109)
    assert gradcheck(gm, tiny_graph, LossSpec("cross_entropy", targets=np.array([1]))) < 1e-4
    mse_targets = derive_rng(7, "test", "gradcheck-mse").standard_normal((8, 2))
    model = init_gcn(2, 4, 2, num_layers=2, head="node", seed=110)
    assert gradcheck(model, tiny_graph, LossSpec("mse", targets=mse_targets)) < 1e-4


def test_adam_first_step_oracle():
    # bias correction cancels on step one: update is -lr * g / (|g| + eps)
    params = [np.array([1.0, -2.0])]
    grads = [np.array([0.5, -0.25])]
    opt = Adam(learning_rate=0.1)
    opt.step(params, grads)
    want = np.array([1.0, -2.0]) - 0.1 * grads[0] / (np.abs(grads[0]) + 1e-8)
    assert np.allclose(params[0], want, atol=1e-10)


def test_split_indices_partition():
    rng = derive_rng(0, "test", "split")
    parts = split_indices(103, rng)
    every = np.concatenate([parts["train"], parts["valid"], parts["test"]])
    assert np.array_equal(np.sort(every), np.arange(103))
    assert len(parts["train"]) == 82 and len(parts["valid"]) == 10


def test_training_is_deterministic(trained_tiny):
    g, model, report = trained_tiny
    again, report2 = train_target(g, TrainConfig(seed=0, epochs=150))
    for a, b in zip(param_arrays(model), param_arrays(again)):
        assert np.array_equal(a, b)
    assert report["accuracy"] == report2["accuracy"]


def test_training_learns_separable_labels(trained_tiny):
    _, _, report = trained_tiny
    assert report["accuracy"]["train"] >= 0.9


def test_backward_returns_param_shaped_grads(node_model, ba_graph):
    ids = np.arange(10)
    spec = LossSpec("cross_entropy", targets=np.zeros(10, dtype=np.int64), node_ids=ids)
    loss, grads = backward(node_model, ba_graph, spec)
    params = param_arrays(node_model)
    assert len(grads) == len(params)
    for p, gr in zip(params, grads):
        assert p.shape == gr.shape
    assert np.isfinite(loss)


def test_checkpoint_round_trip(tmp_path, node_model):
    path = tmp_path / "model.json"
    save_model(path, node_model, config={"note": 1})
    back = load_model(path)
    assert back.head == node_model.head
    for a, b in zip(param_arrays(node_model), param_arrays(back)):
        assert np.array_equal(a, b)


def test_checkpoint_rejects_corruption(node_model):
    payload = model_to_payload(node_model)
    del payload["layers"]
    with pytest.raises(DataError):
        model_from_payload(payload)
    payload = model_to_payload(node_model)
    payload["format"] = "other"
    with pytest.raises(DataError):
        model_from_payload(payload)
    payload = model_to_payload(node_model)
    payload["layers"][0]["weight"] = payload["layers"][0]["weight"][:-1]
    with pytest.raises(DataError):
        model_from_payload(payload)


def test_restarts_select_best_validation(tiny_graph):
    g = Graph(
        num_nodes=8,
        edges=tiny_graph.edges,
        features=tiny_graph.features,
        node_labels=tiny_graph.node_labels,
        masks={"train": np.arange(6), "valid": np.arange(6, 8), "test": np.arange(6, 8)},
    )
    _, single = train_target(g, TrainConfig(seed=5, epochs=40, restarts=1))
    _, multi = train_target(g, TrainConfig(seed=5, epochs=40, restarts=3))
    assert multi["selection_score"] >= single["selection_score"] - 1e-12
