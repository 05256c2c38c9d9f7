#!/usr/bin/env python3
"""
Elementwise activations, dropout and the MSE loss with their derivative rules
"""

import numpy as np
from scipy.special import expit

from errors import InvalidInputError, ShapeError


def sigmoid(x):
    """Logistic function, computed stably for large |x|"""
    return expit(x)


def sigmoid_grad(y):
    """Derivative expressed through the output y = sigmoid(x)"""
    return y * (1.0 - y)


def tanh(x):
    """Hyperbolic tangent"""
    return np.tanh(x)


def tanh_grad(y):
    """Derivative expressed through the output y = tanh(x)"""
    return 1.0 - y * y


def hardswish(x):
    """x * relu6(x + 3) / 6"""
    return x * np.clip(x + 3.0, 0.0, 6.0) / 6.0


def hardswish_grad(x):
    """0 for x <= -3, 1 for x >= 3, (2x + 3) / 6 in between"""
    return np.where(x <= -3.0, 0.0, np.where(x >= 3.0, 1.0, (2.0 * x + 3.0) / 6.0))


def dropout(X, p, training, rng):
    """Inverted dropout; returns the output and the scaled keep-mask (None when inactive)"""
    if not 0.0 <= p < 1.0:
        raise InvalidInputError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return X, None
    mask = (rng.random(X.shape) >= p) / (1.0 - p)
    return X * mask, mask


def dropout_backward(grad, mask):
    """Route the upstream gradient through the kept, rescaled entries"""
    return grad if mask is None else grad * mask


def mse_loss(pred, target):
    """Mean squared error over every entry"""
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def mse_loss_backward(pred, target):
    """Gradient of mse_loss with respect to pred"""
    return 2.0 * (pred - target) / pred.size
