#!/usr/bin/env python3
"""
Graph convolution over haversine edge weights:
    out = D^-1/2 (A + I) D^-1/2 X W + b
where A is the edge-weight matrix with its diagonal removed and D the row sums of A + I.
"""

import numpy as np

from core.matrix import Parameter, init_uniform, matmul, matmul_backward


def normalized_adjacency(edge_weights):
    """D^-1/2 (A + I) D^-1/2 with the diagonal of A zeroed first"""
    A = np.array(edge_weights, dtype=np.float64, copy=True)
    np.fill_diagonal(A, 0.0)
    A += np.eye(A.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(A.sum(axis=1))
    return d_inv_sqrt[:, None] * A * d_inv_sqrt[None, :]


class GcnLayer:
    def __init__(self, name, in_features, out_features, rng, bias=True):
        self.in_features = in_features
        self.out_features = out_features
        self.W = Parameter(f"{name}.W", init_uniform(in_features, out_features, rng))
        self.bias = Parameter(f"{name}.bias", np.zeros((1, out_features))) if bias else None

    def parameters(self):
        """Weight, then bias when present"""
        return [self.W] + ([self.bias] if self.bias is not None else [])

    def forward_propagated(self, P):
        """P = A_hat @ X already computed"""
        out = matmul(P, self.W.value)
        if self.bias is not None:
            out = out + self.bias.value
        return out

    def backward_propagated(self, grad, P):
        """Accumulate parameter grads; return the cotangent of P"""
        dP, dW = matmul_backward(grad, P, self.W.value)
        self.W.grad += dW
        if self.bias is not None:
            self.bias.grad += grad.sum(axis=0, keepdims=True)
        return dP

    def forward(self, X, a_hat):
        """Propagate with a_hat, then project; returns the output and the backward cache"""
        P = matmul(a_hat, X)
        return self.forward_propagated(P), (P, a_hat)

    def backward(self, grad, cache):
        """Accumulate parameter grads and return the cotangent of X"""
        P, a_hat = cache
        return a_hat.T @ self.backward_propagated(grad, P)


def gcn_forward(layer, X, graph):
    """GCN layer output for the graph's node features X"""
    out, _ = layer.forward(X, normalized_adjacency(graph.edge_weights))
    return out
