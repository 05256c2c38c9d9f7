#!/usr/bin/env python3
"""
GraphSAGE layer with mean aggregation:
    x'_i = W1 x_i + W2 * mean_{j in N(i)} x_j  (+ b)
"""

import numpy as np

from core.matrix import Parameter, init_uniform, matmul, matmul_backward, mean_aggregate_backward


class SageLayer:
    """Root weight W1, neighbor weight W2 and an optional bias on the root path"""

    def __init__(self, name, in_features, out_features, rng, bias=True):
        self.in_features = in_features
        self.out_features = out_features
        self.W1 = Parameter(f"{name}.W1", init_uniform(in_features, out_features, rng))
        self.W2 = Parameter(f"{name}.W2", init_uniform(in_features, out_features, rng))
        self.bias = Parameter(f"{name}.bias", np.zeros((1, out_features))) if bias else None

    def parameters(self):
        """Self weight, neighbor weight, then bias when present"""
        return [self.W1, self.W2] + ([self.bias] if self.bias is not None else [])

    def forward_with_mean(self, X, M):
        """Layer output given the neighbor mean M = agg @ X"""
        out = matmul(X, self.W1.value) + matmul(M, self.W2.value)
        if self.bias is not None:
            out = out + self.bias.value
        return out

    def backward_with_mean(self, grad, X, M):
        """Accumulate parameter grads; return cotangents of X (root path) and M"""
        dX, dW1 = matmul_backward(grad, X, self.W1.value)
        dM, dW2 = matmul_backward(grad, M, self.W2.value)
        self.W1.grad += dW1
        self.W2.grad += dW2
        if self.bias is not None:
            self.bias.grad += grad.sum(axis=0, keepdims=True)
        return dX, dM

    def forward(self, X, agg):
        """SAGE output for aggregation matrix agg; returns the output and the backward cache"""
        M = matmul(agg, X)
        return self.forward_with_mean(X, M), (X, M, agg)

    def backward(self, grad, cache):
        """Accumulate parameter grads and return the cotangent of X"""
        X, M, agg = cache
        dX, dM = self.backward_with_mean(grad, X, M)
        return dX + mean_aggregate_backward(dM, agg)


def sage_forward(layer, X, graph, sampler):
    """SAGE layer output for the graph's node features X"""
    out, _ = layer.forward(X, sampler.aggregation(graph))
    return out
