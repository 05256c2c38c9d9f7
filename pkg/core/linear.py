#!/usr/bin/env python3
"""
Fully connected layer used by the regression head
"""

import numpy as np

from core.matrix import Parameter, init_uniform, matmul, matmul_backward


class Linear:
    """y = x W + b, every input connected to every output"""

    def __init__(self, name, in_features, out_features, rng, bias=True):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(f"{name}.weight", init_uniform(in_features, out_features, rng))
        self.bias = Parameter(f"{name}.bias", np.zeros((1, out_features))) if bias else None

    def parameters(self):
        """Weight, then bias when present"""
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def forward(self, x):
        """x @ W + b; returns the output and the backward cache"""
        out = matmul(x, self.weight.value)
        if self.bias is not None:
            out = out + self.bias.value
        return out, x

    def backward(self, grad, x):
        """Accumulate parameter grads and return the input cotangent"""
        dx, dW = matmul_backward(grad, x, self.weight.value)
        self.weight.grad += dW
        if self.bias is not None:
            self.bias.grad += grad.sum(axis=0, keepdims=True)
        return dx
