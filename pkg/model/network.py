#!/usr/bin/env python3
"""
Spatio-temporal network predicting deep ice-layer thickness from five shallow layers

    graph LSTM over 5 graphs -> hardswish -> Linear(H, 128) -> hardswish -> dropout
    -> Linear(128, 64) -> hardswish -> dropout -> Linear(64, 15)

cell_kind "sage" with physical features enabled is PSAGE-LSTM; "sage" with the
base mask is GraphSAGE-LSTM; "gcn" is the GCN-LSTM baseline.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from core.functional import dropout, dropout_backward, hardswish, hardswish_grad
from core.linear import Linear
from core.matrix import spawn_rngs
from errors import ContractError, InvalidInputError, ShapeError
from geo.layer_graph import N_FEATURES, format_feature_mask, parse_feature_mask
from gnn.cells import GcnLstmCell, SageLstmCell, unroll, unroll_backward
from gnn.sampling import NeighborSampler

OUT_CHANNELS = 15
CELL_KINDS = ("sage", "gcn")


@dataclass
class ModelConfig:
    cell_kind: str = "sage"
    in_channels: int = N_FEATURES
    hidden: int = 256
    head: tuple = (128, 64)
    out_channels: int = OUT_CHANNELS
    dropout_p: float = 0.2
    feature_mask: str = "11111111"
    edge_mode: str = "as-written"
    edge_cap: float = 1e9
    fanout: object = "all"
    weighted_mean: bool = False
    bias: bool = True

    def __post_init__(self):
        if self.cell_kind not in CELL_KINDS:
            raise InvalidInputError(f"cell_kind must be one of {CELL_KINDS}, got '{self.cell_kind}'")
        if self.in_channels != N_FEATURES:
            raise InvalidInputError(f"in_channels is fixed at {N_FEATURES}")
        if self.out_channels != OUT_CHANNELS:
            raise InvalidInputError(f"out_channels is fixed at {OUT_CHANNELS}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidInputError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")
        self.head = tuple(int(v) for v in self.head)
        self.feature_mask = format_feature_mask(parse_feature_mask(self.feature_mask))
        if self.fanout != "all":
            self.fanout = int(self.fanout)

    @classmethod
    def from_dict(cls, data):
        """Build from a plain dict, ignoring unknown keys"""
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self):
        """Plain-dict form for manifests and reports"""
        data = asdict(self)
        data["head"] = list(self.head)
        return data


@dataclass
class NormStats:
    """z-score statistics from the training split; degenerate columns get std 1"""

    feature_mean: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    feature_std: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES))
    target_mean: np.ndarray = field(default_factory=lambda: np.zeros(OUT_CHANNELS))
    target_std: np.ndarray = field(default_factory=lambda: np.ones(OUT_CHANNELS))

    ARRAYS = ("feature_mean", "feature_std", "target_mean", "target_std")

    @classmethod
    def identity(cls):
        """Zero means and unit deviations"""
        return cls()

    @classmethod
    def from_samples(cls, samples):
        """Per-column statistics of the training features and targets"""
        if not samples:
            raise InvalidInputError("cannot compute normalization statistics from an empty split")
        features = np.vstack([g.node_features for s in samples for g in s.inputs])
        targets = np.vstack([s.targets for s in samples])
        return cls(
            feature_mean=features.mean(axis=0),
            feature_std=_safe_std(features),
            target_mean=targets.mean(axis=0),
            target_std=_safe_std(targets),
        )

    def normalize_features(self, features):
        """Z-score node features column by column"""
        return (features - self.feature_mean) / self.feature_std

    def normalize_targets(self, targets):
        """Z-score targets per target year"""
        return (targets - self.target_mean) / self.target_std

    def denormalize_targets(self, values):
        """Map normalized predictions back to pixels"""
        return values * self.target_std + self.target_mean


def _safe_std(values):
    std = values.std(axis=0)
    return np.where(std > 1e-12, std, 1.0)


def model_label(config):
    """Name used in comparison tables"""
    physical = any(c == "1" for c in config.feature_mask[3:])
    if config.cell_kind == "sage":
        return "PSAGE-LSTM" if physical else "GraphSAGE-LSTM"
    return "PGCN-LSTM" if physical else "GCN-LSTM"


def count_parameters(config):
    """Trainable scalar count as a function of ModelConfig"""
    F, H = config.in_channels, config.hidden
    per_gate = 2 * (F * H + H * H) if config.cell_kind == "sage" else F * H + H * H
    total = 4 * per_gate + (4 * H if config.bias else 0)
    sizes = (H,) + config.head + (config.out_channels,)
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        total += fan_in * fan_out + fan_out
    return total


class LayerThicknessModel:
    """Graph LSTM encoder plus MLP regression head with explicit backward"""

    def __init__(self, config, seed=0, norm_stats=None):
        self.config = config
        self.seed = int(seed)
        self.norm_stats = norm_stats
        self.trained_epochs = 0
        self.logger = logging.getLogger(__name__)

        init_rng, sampler_rng, self.dropout_rng = spawn_rngs(self.seed, 3)
        if config.cell_kind == "sage":
            sampler = NeighborSampler(config.fanout, sampler_rng, weighted=config.weighted_mean)
            self.cell = SageLstmCell(N_FEATURES, config.hidden, init_rng, sampler, bias=config.bias)
        else:
            self.cell = GcnLstmCell(N_FEATURES, config.hidden, init_rng, bias=config.bias)

        sizes = (config.hidden,) + config.head + (config.out_channels,)
        self.head = [
            Linear(f"head.{k}", fan_in, fan_out, init_rng)
            for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]

    def parameters(self):
        """Cell parameters followed by head parameters"""
        params = self.cell.parameters()
        for layer in self.head:
            params += layer.parameters()
        return params

    def named_parameters(self):
        """Parameters keyed by name"""
        return {p.name: p for p in self.parameters()}

    def zero_grad(self):
        """Reset every accumulated gradient"""
        for p in self.parameters():
            p.zero_grad()

    def state(self):
        """Copy of every parameter value, keyed by name"""
        return {p.name: p.value.copy() for p in self.parameters()}

    def load_state(self, state):
        """Overwrite parameter values from a state dict"""
        for name, p in self.named_parameters().items():
            if state[name].shape != p.shape:
                raise ShapeError(f"{name}: stored shape {state[name].shape} != {p.shape}")
            p.value[...] = state[name]

    def _normalized_features(self, graphs):
        if self.norm_stats is None:
            raise ContractError("model has no normalization statistics; fit or load them first")
        return [self.norm_stats.normalize_features(g.node_features) for g in graphs]

    def forward(self, graphs, training=False, rng=None):
        """Normalized-space predictions (N x 15) for graphs given oldest year first"""
        if len(graphs) == 0:
            raise InvalidInputError("forward needs at least one input graph")
        n = graphs[0].n_nodes
        for g in graphs:
            if g.node_features.shape != (n, N_FEATURES):
                raise ShapeError(f"graph {g.year}: features {g.node_features.shape}, expected ({n}, {N_FEATURES})")
        rng = rng if rng is not None else self.dropout_rng
        p = self.config.dropout_p

        h, cell_caches = unroll(self.cell, graphs, self._normalized_features(graphs))
        x = h
        head_caches = []
        for k, layer in enumerate(self.head):
            act_in = x
            x = hardswish(x)
            mask = None
            # dropout sits between linear layers, not in front of the first one
            if k > 0:
                x, mask = dropout(x, p, training, rng)
            x, lin_cache = layer.forward(x)
            head_caches.append((act_in, mask, lin_cache))
        return x, (cell_caches, head_caches)

    def backward(self, grad, cache):
        """Accumulate gradients for upstream cotangent `grad`"""
        cell_caches, head_caches = cache
        for layer, (act_in, mask, lin_cache) in zip(reversed(self.head), reversed(head_caches)):
            grad = layer.backward(grad, lin_cache)
            grad = dropout_backward(grad, mask)
            grad = grad * hardswish_grad(act_in)
        unroll_backward(self.cell, grad, cell_caches)

    def predict(self, graphs):
        """Normalized predictions with dropout off"""
        out, _ = self.forward(graphs, training=False)
        return out

    def predict_denormalized(self, graphs):
        """Thickness in pixels, clamped at zero"""
        return np.maximum(self.norm_stats.denormalize_targets(self.predict(graphs)), 0.0)
