#!/usr/bin/env python3
"""
Tests for neighbor sampling, SAGE/GCN layers and the graph LSTM cells
"""

import numpy as np
import pytest
import torch

from core.matrix import make_rng
from errors import InvalidGraphError, InvalidInputError, ShapeError
from geo.haversine import TraceCoordinates, build_edge_weights
from geo.layer_graph import FULL_MASK, N_FEATURES, LayerGraph
from gnn.cells import (
    GATES,
    GcnLstmCell,
    SageLstmCell,
    gcn_lstm_step,
    sage_lstm_step,
    unroll,
    unroll_backward,
)
from gnn.gcn import GcnLayer, gcn_forward, normalized_adjacency
from gnn.sage import SageLayer, sage_forward
from gnn.sampling import NeighborSampler
from model import gradcheck_suite


def make_graph(n=6, features=None, seed=0, year=2010, weights=None):
    rng = make_rng(seed)
    if weights is None:
        coords = TraceCoordinates(70 + rng.uniform(-1, 1, n), -40 + rng.uniform(-1, 1, n))
        weights = build_edge_weights(coords, "sqrt")
    if features is None:
        features = rng.standard_normal((n, N_FEATURES))
    return LayerGraph(year, np.asarray(features, dtype=np.float64), weights, FULL_MASK)


def zero_parameters(cell):
    for p in cell.parameters():
        p.value[...] = 0.0


def test_sampler_excludes_self():
    lists = NeighborSampler("all").neighbor_lists(5)
    for i, lst in enumerate(lists):
        assert i not in lst and len(lst) == 4
    sampled = NeighborSampler(2, make_rng(0)).neighbor_lists(6)
    for i, lst in enumerate(sampled):
        assert i not in lst and len(lst) == 2 and list(lst) == sorted(lst)


def test_sampler_rejects_single_node_and_bad_fanout():
    with pytest.raises(InvalidGraphError):
        NeighborSampler("all").neighbor_lists(1)
    with pytest.raises(InvalidInputError):
        NeighborSampler(0)


def test_sampled_fanout_is_seeded():
    a = NeighborSampler(3, make_rng(4)).neighbor_lists(10)
    b = NeighborSampler(3, make_rng(4)).neighbor_lists(10)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_sage_hand_example():
    layer = SageLayer("s", 1, 1, make_rng(0), bias=False)
    layer.W1.value[...] = 2.0
    layer.W2.value[...] = 1.0
    g = make_graph(2, features=[[1.0], [3.0]], weights=np.ones((2, 2)))
    out = sage_forward(layer, g.node_features, g, NeighborSampler("all"))
    np.testing.assert_array_equal(out, [[5.0], [7.0]])


def test_sage_identity_configuration():
    layer = SageLayer("s", 4, 4, make_rng(0), bias=False)
    layer.W1.value[...] = np.eye(4)
    layer.W2.value[...] = 0.0
    X = make_rng(1).standard_normal((5, 4))
    g = make_graph(5, features=X)
    np.testing.assert_array_equal(sage_forward(layer, X, g, NeighborSampler("all")), X)


def test_sage_constant_rows():
    layer = SageLayer("s", 3, 2, make_rng(2), bias=False)
    x = np.array([0.5, -1.0, 2.0])
    X = np.tile(x, (4, 1))
    out = sage_forward(layer, X, make_graph(4, features=X), NeighborSampler("all"))
    expected = x @ (layer.W1.value + layer.W2.value)
    np.testing.assert_allclose(out, np.tile(expected, (4, 1)), atol=1e-12)


def test_gcn_single_node():
    layer = GcnLayer("g", 3, 2, make_rng(0))
    layer.bias.value[...] = [[0.5, -0.5]]
    X = np.array([[1.0, 2.0, 3.0]])
    out = gcn_forward(layer, X, make_graph(1, features=X, weights=np.array([[1e9]])))
    np.testing.assert_allclose(out, X @ layer.W.value + layer.bias.value, atol=1e-12)


def test_gcn_equal_weights_constant_features():
    layer = GcnLayer("g", 3, 2, make_rng(1))
    X = np.tile([1.0, -2.0, 0.5], (5, 1))
    out = gcn_forward(layer, X, make_graph(5, features=X, weights=np.full((5, 5), 2.0)))
    np.testing.assert_allclose(out, np.tile(out[0], (5, 1)), atol=1e-12)


def test_gcn_matches_dense_oracle():
    rng = make_rng(3)
    for seed in range(100):
        n = int(rng.integers(2, 10))
        g = make_graph(n, seed=seed)
        layer = GcnLayer("g", N_FEATURES, 4, make_rng(seed))
        A = g.edge_weights.copy()
        for i in range(n):
            A[i, i] = 1.0
        d = A.sum(axis=1)
        a_hat = np.array([[A[i, j] / np.sqrt(d[i] * d[j]) for j in range(n)] for i in range(n)])
        np.testing.assert_allclose(normalized_adjacency(g.edge_weights), a_hat, rtol=1e-12)
        expected = a_hat @ g.node_features @ layer.W.value + layer.bias.value
        np.testing.assert_allclose(gcn_forward(layer, g.node_features, g), expected, rtol=1e-9, atol=1e-12)


def test_layers_permutation_equivariant():
    g = make_graph(8, seed=5)
    order = make_rng(5).permutation(8)
    pg = g.permuted(order)
    sage = SageLayer("s", N_FEATURES, 4, make_rng(6))
    gcn = GcnLayer("g", N_FEATURES, 4, make_rng(7))
    sampler = NeighborSampler("all")
    np.testing.assert_allclose(
        sage_forward(sage, pg.node_features, pg, sampler),
        sage_forward(sage, g.node_features, g, sampler)[order],
        atol=1e-12,
    )
    np.testing.assert_allclose(
        gcn_forward(gcn, pg.node_features, pg), gcn_forward(gcn, g.node_features, g)[order], atol=1e-12
    )


@pytest.mark.parametrize("kind", ["sage", "gcn"])
def test_zero_parameter_closed_form(kind):
    rng = make_rng(0)
    cell = SageLstmCell(N_FEATURES, 3, rng, NeighborSampler("all")) if kind == "sage" else GcnLstmCell(N_FEATURES, 3, rng)
    zero_parameters(cell)
    g = make_graph(5)
    c_prev = make_rng(1).standard_normal((5, 3))
    h_prev = make_rng(2).standard_normal((5, 3))
    if kind == "sage":
        h, c = sage_lstm_step(cell, g.node_features, h_prev, c_prev, g)
    else:
        h, c = gcn_lstm_step(cell, g.node_features, h_prev, c_prev, g)
    np.testing.assert_allclose(c, 0.5 * c_prev, atol=1e-15)
    np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * c_prev), atol=1e-15)

    zeros = np.zeros((5, 3))
    h, c = (sage_lstm_step if kind == "sage" else gcn_lstm_step)(cell, g.node_features, zeros, zeros, g)
    assert np.all(h == 0) and np.all(c == 0)


def test_zero_parameter_unroll_iterates_to_zero_state():
    cell = SageLstmCell(N_FEATURES, 3, make_rng(0), NeighborSampler("all"))
    zero_parameters(cell)
    graphs = [make_graph(4, seed=s, year=2007 + s) for s in range(5)]
    h, _ = unroll(cell, graphs)
    # c stays 0 from the zero initial state, so h_T = 0.5 * tanh(0)
    assert np.all(h == 0)


def test_unroll_single_graph_equals_step():
    cell = GcnLstmCell(N_FEATURES, 4, make_rng(1))
    g = make_graph(5)
    h, _ = unroll(cell, [g])
    zeros = np.zeros((5, 4))
    h_step, _ = gcn_lstm_step(cell, g.node_features, zeros, zeros, g)
    np.testing.assert_array_equal(h, h_step)
    with pytest.raises(InvalidInputError):
        unroll(cell, [])


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def test_sage_step_matches_scalar_oracle():
    rng = make_rng(3)
    H, n = 3, 4
    cell = SageLstmCell(N_FEATURES, H, rng, NeighborSampler("all"))
    for p in cell.parameters():
        p.value[...] = 0.3 * rng.standard_normal(p.shape)
    g = make_graph(n, seed=3)
    x = g.node_features
    h_prev = rng.standard_normal((n, H))
    c_prev = rng.standard_normal((n, H))
    h, c = sage_lstm_step(cell, x, h_prev, c_prev, g)

    for node in range(n):
        others = [j for j in range(n) if j != node]
        mx = sum(x[j] for j in others) / len(others)
        mh = sum(h_prev[j] for j in others) / len(others)
        pre = {}
        for gate in GATES:
            xl, hl = cell.x_layers[gate], cell.h_layers[gate]
            pre[gate] = np.array([
                sum(x[node, a] * xl.W1.value[a, k] + mx[a] * xl.W2.value[a, k] for a in range(N_FEATURES))
                + sum(h_prev[node, a] * hl.W1.value[a, k] + mh[a] * hl.W2.value[a, k] for a in range(H))
                + cell.bias[gate].value[0, k]
                for k in range(H)
            ])
        c_ref = _sigmoid(pre["f"]) * c_prev[node] + _sigmoid(pre["i"]) * np.tanh(pre["c"])
        h_ref = _sigmoid(pre["o"]) * np.tanh(c_ref)
        np.testing.assert_allclose(c[node], c_ref, atol=1e-12)
        np.testing.assert_allclose(h[node], h_ref, atol=1e-12)


def test_single_node_gcn_step_is_plain_lstm():
    rng = make_rng(4)
    H = 5
    cell = GcnLstmCell(N_FEATURES, H, rng)
    for gate in GATES:
        cell.bias[gate].value[...] = rng.standard_normal((1, H))
    g = make_graph(1, weights=np.array([[1e9]]), seed=4)
    h_prev = rng.standard_normal((1, H))
    c_prev = rng.standard_normal((1, H))
    h, c = gcn_lstm_step(cell, g.node_features, h_prev, c_prev, g)

    lstm = torch.nn.LSTMCell(N_FEATURES, H).double()
    with torch.no_grad():
        lstm.weight_ih.copy_(torch.tensor(np.vstack([cell.x_layers[k].W.value.T for k in GATES])))
        lstm.weight_hh.copy_(torch.tensor(np.vstack([cell.h_layers[k].W.value.T for k in GATES])))
        lstm.bias_ih.copy_(torch.tensor(np.concatenate([cell.bias[k].value[0] for k in GATES])))
        lstm.bias_hh.zero_()
        th, tc = lstm(torch.tensor(g.node_features), (torch.tensor(h_prev), torch.tensor(c_prev)))
    np.testing.assert_allclose(h, th.numpy(), atol=1e-12)
    np.testing.assert_allclose(c, tc.numpy(), atol=1e-12)


def test_sage_unroll_backward_matches_torch():
    rng = make_rng(6)
    H, n = 3, 5
    cell = SageLstmCell(N_FEATURES, H, rng, NeighborSampler("all"))
    for gate in GATES:
        cell.bias[gate].value[...] = 0.1 * rng.standard_normal((1, H))
    graphs = [make_graph(n, seed=10 + t, year=2007 + t, weights=np.ones((n, n))) for t in range(3)]
    R = rng.standard_normal((n, H))

    h, caches = unroll(cell, graphs)
    unroll_backward(cell, R, caches)

    params = {p.name: torch.tensor(p.value, requires_grad=True) for p in cell.parameters()}
    agg = torch.tensor(NeighborSampler("all").aggregation(graphs[0]))
    th = torch.zeros((n, H), dtype=torch.float64)
    tc = torch.zeros((n, H), dtype=torch.float64)
    for graph in graphs:
        x = torch.tensor(graph.node_features)
        pre = {
            k: x @ params[f"cell.x_{k}.W1"] + (agg @ x) @ params[f"cell.x_{k}.W2"]
            + th @ params[f"cell.h_{k}.W1"] + (agg @ th) @ params[f"cell.h_{k}.W2"] + params[f"cell.b_{k}"]
            for k in GATES
        }
        tc = torch.sigmoid(pre["f"]) * tc + torch.sigmoid(pre["i"]) * torch.tanh(pre["c"])
        th = torch.sigmoid(pre["o"]) * torch.tanh(tc)
    (th * torch.tensor(R)).sum().backward()

    np.testing.assert_allclose(h, th.detach().numpy(), atol=1e-12)
    for p in cell.parameters():
        np.testing.assert_allclose(p.grad, params[p.name].grad.numpy(), atol=1e-10, err_msg=p.name)


def test_unroll_permutation_equivariant():
    cell = SageLstmCell(N_FEATURES, 4, make_rng(8), NeighborSampler("all"))
    graphs = [make_graph(7, seed=20 + t, year=2007 + t) for t in range(5)]
    order = make_rng(9).permutation(7)
    h, _ = unroll(cell, graphs)
    h_perm, _ = unroll(cell, [g.permuted(order) for g in graphs])
    np.testing.assert_allclose(h_perm, h[order], atol=1e-12)


def test_step_rejects_mismatched_shapes():
    cell = GcnLstmCell(N_FEATURES, 4, make_rng(0))
    g = make_graph(5)
    with pytest.raises(ShapeError):
        gcn_lstm_step(cell, g.node_features[:, :3], np.zeros((5, 4)), np.zeros((5, 4)), g)
    with pytest.raises(ShapeError):
        gcn_lstm_step(cell, g.node_features, np.zeros((5, 3)), np.zeros((5, 3)), g)


def test_cell_parameter_names():
    cell = SageLstmCell(N_FEATURES, 4, make_rng(0), NeighborSampler("all"))
    names = {p.name for p in cell.parameters()}
    assert "cell.x_i.W1" in names and "cell.h_o.W2" in names and "cell.b_f" in names
    assert len(names) == 4 * 4 + 4
    no_bias = GcnLstmCell(N_FEATURES, 4, make_rng(0), bias=False)
    assert len(no_bias.parameters()) == 8


@pytest.mark.parametrize("check", [gradcheck_suite.check_sage_layer, gradcheck_suite.check_gcn_layer])
def test_single_layer_gradients(check):
    result = check(seed=0)
    assert result.max_rel_error <= 1e-6, result


@pytest.mark.parametrize("check", [gradcheck_suite.check_sage_lstm_step, gradcheck_suite.check_gcn_lstm_step])
def test_cell_step_gradients(check):
    result = check(seed=1)
    assert result.max_rel_error <= 1e-5, result


@pytest.mark.parametrize("kind", ["sage", "gcn"])
def test_gate_activations_stay_in_range(kind):
    rng = make_rng(30)
    cell = (SageLstmCell(N_FEATURES, 5, rng, NeighborSampler("all")) if kind == "sage"
            else GcnLstmCell(N_FEATURES, 5, rng))
    for gate in GATES:
        cell.bias[gate].value[...] = rng.standard_normal((1, 5))
    for t in range(10):
        g = make_graph(7, seed=40 + t)
        h0, c0 = rng.standard_normal((7, 5)), rng.standard_normal((7, 5))
        _, _, (_, _, i, f, gg, o, _) = cell.step(g.node_features, h0, c0, g)
        for gate in (i, f, o):
            assert np.all((gate > 0) & (gate < 1))
        assert np.all((gg > -1) & (gg < 1))


def test_unroll_backward_accumulates():
    rng = make_rng(31)
    cell = GcnLstmCell(N_FEATURES, 4, rng)
    graphs = [make_graph(6, seed=50 + t, year=2007 + t) for t in range(5)]
    R = rng.standard_normal((6, 4))
    _, caches = unroll(cell, graphs)
    unroll_backward(cell, R, caches)
    once = [p.grad.copy() for p in cell.parameters()]
    unroll_backward(cell, R, caches)
    for p, g in zip(cell.parameters(), once):
        np.testing.assert_allclose(p.grad, 2.0 * g, rtol=1e-12, atol=1e-15)
