#!/usr/bin/env python3
"""
Adam with L2 weight decay and a step learning-rate schedule
"""

import numpy as np

from errors import InvalidInputError, NumericFailureError


class StepSchedule:
    """lr0 * gamma ** floor(epoch / period)"""

    def __init__(self, lr0=0.01, period=75, gamma=0.5):
        if period < 1:
            raise InvalidInputError(f"schedule period must be >= 1, got {period}")
        self.lr0 = lr0
        self.period = period
        self.gamma = gamma

    def lr_at(self, epoch):
        """Learning rate of `epoch` for a step schedule"""
        if epoch < 0:
            raise InvalidInputError(f"epoch must be >= 0, got {epoch}")
        return self.lr0 * self.gamma ** (epoch // self.period)


def lr_at(epoch, lr0=0.01, period=75, gamma=0.5):
    """Learning rate of `epoch` for a step schedule"""
    return StepSchedule(lr0, period, gamma).lr_at(epoch)


class Adam:
    """Classic Adam; weight decay is added to the gradient unless `decoupled`"""

    def __init__(self, params, lr=0.01, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0001, decoupled=False):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.decoupled = decoupled
        self.t = 0
        self.m = {p.name: np.zeros_like(p.value) for p in self.params}
        self.v = {p.name: np.zeros_like(p.value) for p in self.params}

    def zero_grad(self):
        """Reset the gradients of every managed parameter"""
        for p in self.params:
            p.zero_grad()

    def step(self):
        """One update of every parameter, then zero the gradients

        A NaN/Inf gradient aborts before any parameter is touched.
        """
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise NumericFailureError(f"non-finite gradient in {p.name}; step aborted")

        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p in self.params:
            g = p.grad
            if self.weight_decay and not self.decoupled:
                g = g + self.weight_decay * p.value
            m = self.m[p.name]
            v = self.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g

            if self.weight_decay and self.decoupled:
                p.value -= self.lr * self.weight_decay * p.value
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        self.zero_grad()
