#!/usr/bin/env python3
"""
Neighbor sampling for GraphSAGE aggregation
"""

import numpy as np

from core.matrix import aggregation_matrix, make_rng
from errors import InvalidGraphError, InvalidInputError


class NeighborSampler:
    """Chooses N(i) for every node: all other nodes, or a uniform sample of `fanout`

    Self is never part of N(i). With `weighted=True` the mean is weighted by
    the graph's haversine edge weights.
    """

    def __init__(self, fanout="all", rng=None, weighted=False):
        if fanout != "all":
            fanout = int(fanout)
            if fanout < 1:
                raise InvalidInputError(f"sampler fanout must be >= 1 or 'all', got {fanout}")
        self.fanout = fanout
        self.rng = rng if rng is not None else make_rng(0)
        self.weighted = weighted
        self._full_cache = {}

    @property
    def deterministic(self):
        return self.fanout == "all"

    def neighbor_lists(self, n_nodes):
        """Neighbor indices of every node, self excluded"""
        if n_nodes < 2:
            raise InvalidGraphError(f"a graph with {n_nodes} node(s) has no neighbors to aggregate")
        everyone = np.arange(n_nodes)
        lists = []
        for i in range(n_nodes):
            others = np.delete(everyone, i)
            if self.fanout != "all" and self.fanout < others.size:
                others = np.sort(self.rng.choice(others, size=self.fanout, replace=False))
            lists.append(others)
        return lists

    def aggregation(self, graph):
        """Row-stochastic N x N matrix M with (M @ X)[i] = mean over N(i)"""
        n = graph.n_nodes
        if self.weighted:
            return aggregation_matrix(self.neighbor_lists(n), n, graph.edge_weights)
        if self.fanout == "all":
            if n not in self._full_cache:
                self._full_cache[n] = aggregation_matrix(self.neighbor_lists(n), n)
            return self._full_cache[n]
        return aggregation_matrix(self.neighbor_lists(n), n)
