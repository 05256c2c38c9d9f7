#!/usr/bin/env python3
"""
Dense matrix primitives with explicit reverse-mode rules
Matrices are 2-D float64 numpy arrays; Parameters pair a value with its gradient
"""

from dataclasses import dataclass, field

import numpy as np

from errors import InvalidGraphError, ShapeError

DTYPE = np.float64


def as_matrix(values, name="matrix"):
    """Coerce to a 2-D float64 array"""
    arr = np.asarray(values, dtype=DTYPE)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {arr.ndim}-D")
    return arr


@dataclass
class Parameter:
    """Learnable matrix and its accumulated gradient"""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.value = as_matrix(self.value, self.name)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        elif self.grad.shape != self.value.shape:
            raise ShapeError(f"{self.name}: grad shape {self.grad.shape} != value shape {self.value.shape}")

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size

    def zero_grad(self):
        """Reset the accumulated gradient"""
        self.grad.fill(0.0)


def make_rng(seed):
    """Counter-based generator; same seed and call sequence give the same stream"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def spawn_rngs(seed, n):
    """n independent counter-based streams derived from one seed"""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def init_uniform(rows, cols, rng):
    """uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) with fan_in = rows"""
    bound = np.sqrt(1.0 / rows)
    return rng.uniform(-bound, bound, size=(rows, cols)).astype(DTYPE)


def matmul(A, B):
    """Shape-checked matrix product"""
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {A.shape} by {B.shape}")
    return A @ B


def matmul_backward(grad, A, B):
    """Cotangents of C = A @ B: (grad @ B.T, A.T @ grad)"""
    return grad @ B.T, A.T @ grad


def aggregation_matrix(neighbor_lists, n_nodes, weights=None):
    """Row-stochastic N x N matrix realising a (weighted) neighbor mean"""
    agg = np.zeros((n_nodes, n_nodes), dtype=DTYPE)
    for i, neighbors in enumerate(neighbor_lists):
        neighbors = np.asarray(neighbors, dtype=np.int64)
        if neighbors.size == 0:
            raise InvalidGraphError(f"node {i} has an empty neighbor list")
        if weights is None:
            agg[i, neighbors] = 1.0 / neighbors.size
        else:
            w = weights[i, neighbors]
            total = w.sum()
            if not np.isfinite(total) or total <= 0:
                raise InvalidGraphError(f"node {i} has non-positive total neighbor weight")
            agg[i, neighbors] = w / total
    return agg


def mean_aggregate(X, neighbor_lists, weights=None):
    """Row i = mean (or weighted mean) of X over node i's neighbors

    Returns the output and the aggregation matrix needed by the backward rule.
    """
    if len(neighbor_lists) != X.shape[0]:
        raise ShapeError(f"mean_aggregate: {len(neighbor_lists)} neighbor lists for {X.shape[0]} nodes")
    agg = aggregation_matrix(neighbor_lists, X.shape[0], weights)
    return agg @ X, agg


def mean_aggregate_backward(grad, agg):
    """Cotangent of X for M = agg @ X"""
    return agg.T @ grad
