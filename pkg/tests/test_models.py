import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourierkan_gcf import grad as G
from fourierkan_gcf.grad import ContractError, Parameter, Tensor
from fourierkan_gcf.graph import InteractionGraph, build_normalized_adjacency
from fourierkan_gcf.kan import FourierKan, Linear, SplineKan
from fourierkan_gcf.models import (
    GCFModel,
    LayerTransforms,
    ModelConfig,
    Variant,
    message_masks,
    propagate_layer,
    readout_concat,
    readout_mean,
    score,
)

from conftest import random_graph
from oracles import dense_layer, fourier_phi


def lin(W):
    return Linear(Parameter(np.asarray(W, float)))


def random_embeddings(rng, graph, d):
    return Tensor(rng.normal(size=(graph.num_users, d))), Tensor(rng.normal(size=(graph.num_items, d)))


def test_variant_parse():
    assert Variant.parse("FourierKAN_GCF") is Variant.FOURIERKAN_GCF
    assert Variant.parse("ngcf-f1") is Variant.NGCF_F1
    with pytest.raises(ContractError):
        Variant.parse("mf")


def test_lightgcn_single_edge_swaps_embeddings():
    g = InteractionGraph.from_edges(1, 1, [0], [0])
    adj = build_normalized_adjacency(g)
    eu, ei = Tensor([[1.0, 2.0]]), Tensor([[3.0, -4.0]])
    nu, ni = propagate_layer("lightgcn", adj, eu, ei, LayerTransforms())
    assert nu.data.tolist() == ei.data.tolist()
    assert ni.data.tolist() == eu.data.tolist()


def test_fourier_zero_identity_is_self_loop_plus_lightgcn(tiny_graph, rng):
    adj = build_normalized_adjacency(tiny_graph)
    eu, ei = random_embeddings(rng, tiny_graph, 3)
    zero = FourierKan(Parameter(np.zeros((3, 3, 2))), Parameter(np.zeros((3, 3, 2))))
    nu, ni = propagate_layer(
        "fourierkan-gcf", adj, eu, ei, LayerTransforms(kan=zero), activation="identity"
    )
    lu, li = propagate_layer("lightgcn", adj, eu, ei, LayerTransforms())
    np.testing.assert_allclose(nu.data, eu.data + lu.data, atol=1e-12, rtol=0)
    np.testing.assert_allclose(ni.data, ei.data + li.data, atol=1e-12, rtol=0)


def test_ngcf_family_bitwise_equivalences(tiny_graph, rng):
    adj = build_normalized_adjacency(tiny_graph)
    d = 4
    eu, ei = random_embeddings(rng, tiny_graph, d)
    W1, W2 = rng.normal(size=(2, d, d))
    eye = np.eye(d)

    def run(variant, **t):
        return propagate_layer(variant, adj, eu, ei, LayerTransforms(**t), activation="leaky_relu")

    ref = run("ngcf", w1=lin(eye), w2=lin(W2))
    f1 = run("ngcf-f1", w2=lin(W2))
    assert all(np.array_equal(a.data, b.data) for a, b in zip(ref, f1))

    ref = run("ngcf", w1=lin(W1), w2=lin(eye))
    f2 = run("ngcf-f2", w1=lin(W1))
    assert all(np.array_equal(a.data, b.data) for a, b in zip(ref, f2))

    ref = propagate_layer(
        "ngcf", adj, eu, ei, LayerTransforms(w1=lin(W1), w2=lin(W2)), activation="identity"
    )
    n = run("ngcf-n", w1=lin(W1), w2=lin(W2))
    assert all(np.array_equal(a.data, b.data) for a, b in zip(ref, n))


def test_ngcf_i_drops_interaction_term(tiny_graph, rng):
    adj = build_normalized_adjacency(tiny_graph)
    eu, ei = random_embeddings(rng, tiny_graph, 3)
    W1 = rng.normal(size=(3, 3))
    nu, ni = propagate_layer("ngcf-i", adj, eu, ei, LayerTransforms(w1=lin(W1)), activation="identity")
    ou, oi = dense_layer("ngcf", tiny_graph, eu.data, ei.data, W1, np.zeros((3, 3)), act=lambda x: x)
    np.testing.assert_allclose(nu.data, ou, atol=1e-12)
    np.testing.assert_allclose(ni.data, oi, atol=1e-12)


@pytest.mark.parametrize(
    "variant,transforms",
    [
        ("lightgcn", dict(w1=None)),
        ("ngcf", dict()),
        ("ngcf-f1", dict(w1="W", w2="W")),
        ("ngcf-i", dict(w1="W", w2="W")),
        ("fourierkan-gcf", dict(kan="spline")),
        ("kan-gcf", dict(kan="fourier")),
        ("lightgcn", dict(kan="fourier")),
    ],
)
def test_transform_mismatch_rejected(tiny_graph, variant, transforms):
    adj = build_normalized_adjacency(tiny_graph)
    rng = np.random.default_rng(0)
    eu, ei = random_embeddings(rng, tiny_graph, 2)
    built = {}
    for key, val in transforms.items():
        if val == "W":
            built[key] = lin(np.eye(2))
        elif val == "fourier":
            built[key] = FourierKan.init(2, 2, 1, rng)
        elif val == "spline":
            built[key] = SplineKan.init(2, 2, rng)
    if variant == "lightgcn" and not built:
        built = dict(w1=lin(np.eye(2)))
    with pytest.raises(ContractError):
        propagate_layer(variant, adj, eu, ei, LayerTransforms(**built))


@given(st.integers(0, 2**31))
def test_dense_oracle_all_kinds(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 3, 3)
    adj = build_normalized_adjacency(g)
    d = 3
    eu, ei = random_embeddings(rng, g, d)
    W1, W2 = rng.normal(size=(2, d, d))
    out = propagate_layer("ngcf", adj, eu, ei, LayerTransforms(w1=lin(W1), w2=lin(W2)))
    ref = dense_layer("ngcf", g, eu.data, ei.data, W1, W2)
    for a, b in zip(out, ref):
        np.testing.assert_allclose(a.data, b, atol=1e-10, rtol=0)

    kan = FourierKan.init(d, d, 2, rng)
    out = propagate_layer("fourierkan-gcf", adj, eu, ei, LayerTransforms(kan=kan))
    phi = lambda x: fourier_phi(kan.coeff_a.data, kan.coeff_b.data, x)
    ref = dense_layer("kan", g, eu.data, ei.data, phi=phi)
    for a, b in zip(out, ref):
        np.testing.assert_allclose(a.data, b, atol=1e-10, rtol=0)


def test_message_dropout_masks():
    assert message_masks(5, 0.0, None) is None
    a = message_masks(1000, 0.3, [1, 2])
    b = message_masks(1000, 0.3, [1, 2])
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert set(np.unique(a[0])) <= {0.0, 1 / 0.7}
    assert 0.25 < np.mean(a[0] == 0) < 0.35
    with pytest.raises(ContractError):
        message_masks(5, 0.2, None)
    with pytest.raises(ContractError):
        message_masks(5, 1.0, 0)


def test_message_dropout_zero_is_identity(tiny_graph, rng):
    adj = build_normalized_adjacency(tiny_graph)
    eu, ei = random_embeddings(rng, tiny_graph, 3)
    kan = FourierKan.init(3, 3, 2, rng)
    a = propagate_layer("fourierkan-gcf", adj, eu, ei, LayerTransforms(kan=kan), 0.0, 5)
    b = propagate_layer("fourierkan-gcf", adj, eu, ei, LayerTransforms(kan=kan))
    assert all(np.array_equal(x.data, y.data) for x, y in zip(a, b))


def test_message_dropout_drops_whole_edge_messages():
    # one user with two items; a dropped edge removes both its neighbor and interaction parts
    g = InteractionGraph.from_edges(1, 2, [0, 0], [0, 1])
    adj = build_normalized_adjacency(g)
    eu = Tensor([[0.5, -1.0]])
    ei = Tensor([[1.0, 2.0], [3.0, -1.0]])
    kan = FourierKan.init(2, 2, 2, np.random.default_rng(0))
    for seed in range(20):
        mask_u, _ = message_masks(2, 0.5, seed)
        nu, _ = propagate_layer("fourierkan-gcf", adj, eu, ei, LayerTransforms(kan=kan), 0.5, seed, "identity")
        expected = eu.data[0].copy()
        for e in range(2):
            msg = ei.data[e] + fourier_phi(kan.coeff_a.data, kan.coeff_b.data, ei.data[e] * eu.data[0])
            expected += mask_u[e] * adj.edge_weights[e] * msg
        np.testing.assert_allclose(nu.data[0], expected, atol=1e-12)


def test_readouts():
    l0 = (Tensor([[2.0]]), Tensor([[1.0]]))
    l1 = (Tensor([[4.0]]), Tensor([[5.0]]))
    l2 = (Tensor([[6.0]]), Tensor([[7.0]]))
    assert readout_mean([l0])[0].data.tolist() == [[2.0]]
    assert readout_mean([l0, l1])[0].data.tolist() == [[3.0]]
    assert readout_mean([l1, l0])[0].data.tolist() == readout_mean([l0, l1])[0].data.tolist()
    assert readout_concat([l0, l1])[0].data.tolist() == [[4.0]]
    u, i = readout_concat([l0, l1, l2])
    assert u.data.tolist() == [[4.0, 6.0]] and i.data.tolist() == [[5.0, 7.0]]
    with pytest.raises(ContractError):
        readout_concat([l0])


def test_concat_round_trip_and_score_identity(rng):
    layers = [(Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(5, 3)))) for _ in range(4)]
    fu, fi = readout_concat(layers)
    for k in range(1, 4):
        np.testing.assert_array_equal(fu.data[:, 3 * (k - 1) : 3 * k], layers[k][0].data)
    per_layer = sum(layers[k][0].data[2] @ layers[k][1].data[4] for k in range(1, 4))
    assert score(fu, fi, 2, 4) == pytest.approx(per_layer, abs=1e-12)


def test_score_examples():
    assert score(Tensor([[1.0, 0.0]]), Tensor([[0.0, 1.0]]), 0, 0) == 0.0
    assert score(Tensor([[1.0, 1.0]]), Tensor([[1.0, 1.0]]), 0, 0) == 2.0
    with pytest.raises(ContractError):
        score(Tensor([[1.0, 1.0]]), Tensor([[1.0]]), 0, 0)


@pytest.mark.parametrize("variant", list(Variant))
@pytest.mark.parametrize("layers", [1, 4])
def test_model_forward_shapes_and_finiteness(tiny_graph, variant, layers):
    cfg = ModelConfig(variant=variant, dim=4, layers=layers, grid_size=2, spline_intervals=2)
    model = GCFModel.init(cfg, 5, 5, seed=3)
    adj = build_normalized_adjacency(tiny_graph)
    out = model.forward(adj, p_m=0.2, rng_seed=[1])
    width = 4 if variant is Variant.LIGHTGCN else 4 * layers
    assert out.final_user.shape == (5, width) and out.final_item.shape == (5, width)
    assert len(out.layers) == layers + 1
    assert np.isfinite(out.final_user.data).all() and np.isfinite(out.final_item.data).all()


def test_model_parameters_per_variant():
    def names(v, **kw):
        cfg = ModelConfig(variant=v, dim=2, layers=2, **kw)
        return [p.name for p in GCFModel.init(cfg, 3, 3).parameters()]

    assert names("lightgcn") == ["user_emb", "item_emb"]
    assert names("ngcf") == ["user_emb", "item_emb", "layer0.W1", "layer0.W2", "layer1.W1", "layer1.W2"]
    assert names("ngcf-f1")[2:] == ["layer0.W2", "layer1.W2"]
    assert names("fourierkan-gcf")[2:] == ["layer0.fkan.a", "layer0.fkan.b", "layer1.fkan.a", "layer1.fkan.b"]
    assert names("ngcf", shared_weights=True)[2:] == ["layer0.W1", "layer0.W2"]


def test_state_dict_round_trip(tiny_graph):
    model = GCFModel.init(ModelConfig(variant="fourierkan-gcf", dim=3, layers=2), 5, 5, seed=0)
    saved = model.state_dict()
    for p in model.parameters():
        p.data += 1.0
    model.load_state_dict(saved)
    assert all(np.array_equal(p.data, saved[p.name]) for p in model.parameters())
