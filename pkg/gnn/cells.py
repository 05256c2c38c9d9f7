#!/usr/bin/env python3
"""
Graph LSTM cells: every weight-times-input product of an LSTM is replaced by a graph layer

    i = sigma(S_xi(x) + S_hi(h) + b_i)      f = sigma(S_xf(x) + S_hf(h) + b_f)
    g = tanh(S_xc(x) + S_hc(h) + b_c)       o = sigma(S_xo(x) + S_ho(h) + b_o)
    c' = f * c + i * g                      h' = o * tanh(c')

S is a GraphSAGE layer in SageLstmCell and a GCN layer in GcnLstmCell. No peephole terms.
"""

import numpy as np

from core.functional import sigmoid, sigmoid_grad, tanh, tanh_grad
from core.matrix import Parameter, matmul
from errors import InvalidInputError, ShapeError
from gnn.gcn import GcnLayer, normalized_adjacency
from gnn.sage import SageLayer

GATES = ("i", "f", "c", "o")


class GraphLstmCell:
    """Gate algebra shared by both cells; subclasses supply the graph products"""

    kind = None

    def __init__(self, in_features, hidden, bias=True, name="cell"):
        self.in_features = in_features
        self.hidden = hidden
        self.name = name
        self.bias = {g: Parameter(f"{name}.b_{g}", np.zeros((1, hidden))) for g in GATES} if bias else None

    def parameters(self):
        """Every learnable matrix of the cell"""
        raise NotImplementedError

    def _bias_parameters(self):
        return [self.bias[g] for g in GATES] if self.bias is not None else []

    def context(self, graph):
        """Per-graph propagation matrix shared by all eight products of a step"""
        raise NotImplementedError

    def _preactivations(self, x, h, ctx):
        raise NotImplementedError

    def _preactivations_backward(self, dpre, cache):
        raise NotImplementedError

    def step(self, x, h_prev, c_prev, graph, ctx=None):
        """One time step; returns h, c and the backward cache"""
        if x.shape != (graph.n_nodes, self.in_features):
            raise ShapeError(f"{self.name}: input {x.shape} does not match ({graph.n_nodes}, {self.in_features})")
        if h_prev.shape != (graph.n_nodes, self.hidden) or c_prev.shape != h_prev.shape:
            raise ShapeError(f"{self.name}: state shapes {h_prev.shape}/{c_prev.shape} do not match hidden {self.hidden}")
        ctx = self.context(graph) if ctx is None else ctx

        pre, pre_cache = self._preactivations(x, h_prev, ctx)
        if self.bias is not None:
            pre = {g: pre[g] + self.bias[g].value for g in GATES}
        i = sigmoid(pre["i"])
        f = sigmoid(pre["f"])
        g = tanh(pre["c"])
        o = sigmoid(pre["o"])
        c = f * c_prev + i * g
        tc = tanh(c)
        h = o * tc
        return h, c, (pre_cache, c_prev, i, f, g, o, tc)

    def step_backward(self, dh, dc, cache):
        """Accumulate parameter grads; return cotangents of h_prev and c_prev"""
        pre_cache, c_prev, i, f, g, o, tc = cache
        do = dh * tc
        dc = dc + dh * o * tanh_grad(tc)
        dpre = {
            "i": dc * g * sigmoid_grad(i),
            "f": dc * c_prev * sigmoid_grad(f),
            "c": dc * i * tanh_grad(g),
            "o": do * sigmoid_grad(o),
        }
        if self.bias is not None:
            for gate in GATES:
                self.bias[gate].grad += dpre[gate].sum(axis=0, keepdims=True)
        dh_prev = self._preactivations_backward(dpre, pre_cache)
        return dh_prev, dc * f


class SageLstmCell(GraphLstmCell):
    kind = "sage"

    def __init__(self, in_features, hidden, rng, sampler, bias=True, name="cell"):
        super().__init__(in_features, hidden, bias, name)
        self.sampler = sampler
        self.x_layers = {g: SageLayer(f"{name}.x_{g}", in_features, hidden, rng, bias=False) for g in GATES}
        self.h_layers = {g: SageLayer(f"{name}.h_{g}", hidden, hidden, rng, bias=False) for g in GATES}

    def parameters(self):
        """Every learnable matrix of the cell"""
        params = []
        for g in GATES:
            params += self.x_layers[g].parameters() + self.h_layers[g].parameters()
        return params + self._bias_parameters()

    def context(self, graph):
        """Aggregation matrix of the graph under this cell's sampler"""
        return self.sampler.aggregation(graph)

    def _preactivations(self, x, h, agg):
        Mx = matmul(agg, x)
        Mh = matmul(agg, h)
        pre = {
            g: self.x_layers[g].forward_with_mean(x, Mx) + self.h_layers[g].forward_with_mean(h, Mh)
            for g in GATES
        }
        return pre, (x, h, Mx, Mh, agg)

    def _preactivations_backward(self, dpre, cache):
        x, h, Mx, Mh, agg = cache
        dh = np.zeros_like(h)
        dMh = np.zeros_like(Mh)
        for g in GATES:
            self.x_layers[g].backward_with_mean(dpre[g], x, Mx)
            dh_root, dMh_g = self.h_layers[g].backward_with_mean(dpre[g], h, Mh)
            dh += dh_root
            dMh += dMh_g
        return dh + agg.T @ dMh


class GcnLstmCell(GraphLstmCell):
    kind = "gcn"

    def __init__(self, in_features, hidden, rng, bias=True, name="cell"):
        super().__init__(in_features, hidden, bias, name)
        self.x_layers = {g: GcnLayer(f"{name}.x_{g}", in_features, hidden, rng, bias=False) for g in GATES}
        self.h_layers = {g: GcnLayer(f"{name}.h_{g}", hidden, hidden, rng, bias=False) for g in GATES}

    def parameters(self):
        """Every learnable matrix of the cell"""
        params = []
        for g in GATES:
            params += self.x_layers[g].parameters() + self.h_layers[g].parameters()
        return params + self._bias_parameters()

    def context(self, graph):
        """Symmetric normalized adjacency of the graph"""
        return normalized_adjacency(graph.edge_weights)

    def _preactivations(self, x, h, a_hat):
        Px = matmul(a_hat, x)
        Ph = matmul(a_hat, h)
        pre = {
            g: self.x_layers[g].forward_propagated(Px) + self.h_layers[g].forward_propagated(Ph)
            for g in GATES
        }
        return pre, (Px, Ph, a_hat)

    def _preactivations_backward(self, dpre, cache):
        Px, Ph, a_hat = cache
        dPh = np.zeros_like(Ph)
        for g in GATES:
            self.x_layers[g].backward_propagated(dpre[g], Px)
            dPh += self.h_layers[g].backward_propagated(dpre[g], Ph)
        return a_hat.T @ dPh


def sage_lstm_step(cell, x_t, h_prev, c_prev, graph, sampler=None):
    """One SAGE-LSTM step; returns (h, c)"""
    if sampler is not None:
        cell.sampler = sampler
    h, c, _ = cell.step(x_t, h_prev, c_prev, graph)
    return h, c


def gcn_lstm_step(cell, x_t, h_prev, c_prev, graph):
    """One GCN-LSTM step; returns (h, c)"""
    h, c, _ = cell.step(x_t, h_prev, c_prev, graph)
    return h, c


def unroll(cell, graphs, features=None):
    """Run the cell over graphs oldest first from zero state; returns h_T and the step caches"""
    if len(graphs) == 0:
        raise InvalidInputError("cannot unroll over an empty graph sequence")
    features = [g.node_features for g in graphs] if features is None else features
    n = graphs[0].n_nodes
    h = np.zeros((n, cell.hidden))
    c = np.zeros((n, cell.hidden))
    caches = []
    for graph, x in zip(graphs, features):
        h, c, cache = cell.step(x, h, c, graph)
        caches.append(cache)
    return h, caches


def unroll_backward(cell, dh, caches):
    """Backpropagate through every step; returns the cotangents of the initial state"""
    dc = np.zeros_like(dh)
    for cache in reversed(caches):
        dh, dc = cell.step_backward(dh, dc, cache)
    return dh, dc
