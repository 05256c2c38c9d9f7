#!/usr/bin/env python3
"""
Finite-difference gradient suite over every differentiable block on 8-node toy graphs
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.functional import hardswish, hardswish_grad
from core.gradcheck import grad_check
from core.linear import Linear
from core.matrix import make_rng
from geo.haversine import TraceCoordinates, build_edge_weights
from geo.layer_graph import FULL_MASK, N_FEATURES, LayerGraph
from gnn.cells import GcnLstmCell, SageLstmCell
from gnn.gcn import GcnLayer, normalized_adjacency
from gnn.sage import SageLayer
from gnn.sampling import NeighborSampler
from model.network import LayerThicknessModel, ModelConfig, NormStats

logger = logging.getLogger(__name__)

SINGLE_LAYER_TOL = 1e-6
COMPOSITE_TOL = 1e-5


@dataclass(frozen=True)
class GradCheckResult:
    name: str
    max_rel_error: float
    tolerance: float

    @property
    def passed(self):
        return self.max_rel_error <= self.tolerance


def toy_graphs(n_nodes=8, n_graphs=5, seed=0, edge_mode="sqrt"):
    """Small random graph sequence for gradient checks"""
    rng = make_rng(seed)
    coords = TraceCoordinates(70.0 + rng.uniform(-1, 1, n_nodes), -40.0 + rng.uniform(-1, 1, n_nodes))
    weights = build_edge_weights(coords, edge_mode)
    return [
        LayerGraph(2007 + t, rng.standard_normal((n_nodes, N_FEATURES)), weights, FULL_MASK)
        for t in range(n_graphs)
    ]


def _projection_closure(params, forward, backward, R):
    """Loss sum(out * R): every output coordinate gets its own cotangent"""

    def closure(do_backward):
        out, cache = forward()
        if do_backward:
            backward(R, cache)
        return float(np.sum(out * R))

    return closure


def check_sage_layer(seed=0):
    """SAGE layer against central differences"""
    rng = make_rng(seed)
    graph = toy_graphs(seed=seed)[0]
    layer = SageLayer("sage", N_FEATURES, 5, rng)
    agg = NeighborSampler("all").aggregation(graph)
    X = graph.node_features
    R = rng.standard_normal((graph.n_nodes, 5))
    closure = _projection_closure(layer.parameters(), lambda: layer.forward(X, agg), layer.backward, R)
    return GradCheckResult("sage_layer", grad_check(closure, layer.parameters(), seed=seed), SINGLE_LAYER_TOL)


def check_gcn_layer(seed=0):
    """GCN layer against central differences"""
    rng = make_rng(seed)
    graph = toy_graphs(seed=seed)[0]
    layer = GcnLayer("gcn", N_FEATURES, 5, rng)
    a_hat = normalized_adjacency(graph.edge_weights)
    X = graph.node_features
    R = rng.standard_normal((graph.n_nodes, 5))
    closure = _projection_closure(layer.parameters(), lambda: layer.forward(X, a_hat), layer.backward, R)
    return GradCheckResult("gcn_layer", grad_check(closure, layer.parameters(), seed=seed), SINGLE_LAYER_TOL)


def _check_cell(name, cell, seed):
    rng = make_rng(seed + 1)
    graph = toy_graphs(seed=seed)[0]
    n, H = graph.n_nodes, cell.hidden
    x = graph.node_features
    h0 = 0.5 * rng.standard_normal((n, H))
    c0 = 0.5 * rng.standard_normal((n, H))
    Rh = rng.standard_normal((n, H))
    Rc = rng.standard_normal((n, H))

    def closure(do_backward):
        h, c, cache = cell.step(x, h0, c0, graph)
        if do_backward:
            cell.step_backward(Rh, Rc, cache)
        return float(np.sum(h * Rh) + np.sum(c * Rc))

    return GradCheckResult(name, grad_check(closure, cell.parameters(), seed=seed), COMPOSITE_TOL)


def check_sage_lstm_step(seed=0, hidden=6):
    """One SAGE-LSTM step, gradients through h and c"""
    cell = SageLstmCell(N_FEATURES, hidden, make_rng(seed), NeighborSampler("all"))
    return _check_cell("sage_lstm_step", cell, seed)


def check_gcn_lstm_step(seed=0, hidden=6):
    """One GCN-LSTM step, gradients through h and c"""
    cell = GcnLstmCell(N_FEATURES, hidden, make_rng(seed))
    return _check_cell("gcn_lstm_step", cell, seed)


def check_head(seed=0):
    """Hardswish MLP head against central differences"""
    rng = make_rng(seed)
    layers = [Linear("head.0", 6, 5, rng), Linear("head.1", 5, 4, rng), Linear("head.2", 4, 3, rng)]
    params = [p for layer in layers for p in layer.parameters()]
    x0 = rng.standard_normal((8, 6))
    R = rng.standard_normal((8, 3))

    def forward():
        x, caches = x0, []
        for layer in layers:
            act_in = x
            x, lin_cache = layer.forward(hardswish(x))
            caches.append((act_in, lin_cache))
        return x, caches

    def backward(grad, caches):
        for layer, (act_in, lin_cache) in zip(reversed(layers), reversed(caches)):
            grad = layer.backward(grad, lin_cache) * hardswish_grad(act_in)

    closure = _projection_closure(params, forward, backward, R)
    return GradCheckResult("head_mlp", grad_check(closure, params, seed=seed), COMPOSITE_TOL)


def check_full_model(seed=0, cell_kind="sage", hidden=6):
    """Cell plus head over a five-graph sequence, dropout off"""
    config = ModelConfig(cell_kind=cell_kind, hidden=hidden, head=(8, 6), dropout_p=0.2)
    model = LayerThicknessModel(config, seed=seed, norm_stats=NormStats.identity())
    graphs = toy_graphs(seed=seed)
    R = make_rng(seed + 2).standard_normal((graphs[0].n_nodes, config.out_channels))
    closure = _projection_closure(
        model.parameters(), lambda: model.forward(graphs, training=False), model.backward, R
    )
    return GradCheckResult(f"full_model_{cell_kind}", grad_check(closure, model.parameters(), seed=seed), COMPOSITE_TOL)


def run_suite(seed=0):
    """Run every check and log one line per result"""
    results = [
        check_sage_layer(seed),
        check_gcn_layer(seed),
        check_sage_lstm_step(seed),
        check_gcn_lstm_step(seed),
        check_head(seed),
        check_full_model(seed, "sage"),
        check_full_model(seed, "gcn"),
    ]
    for r in results:
        status = "✓" if r.passed else "✗"
        logger.info(f"{status} {r.name}: max relative error {r.max_rel_error:.2e} (tolerance {r.tolerance:.0e})")
    return results
