#!/usr/bin/env python3
"""
One year's ice layer as a fully connected graph over the radar traces
"""

import itertools
from dataclasses import dataclass

import numpy as np

from errors import IncompleteLayerError, InvalidInputError
from geo.haversine import DEFAULT_CAP, build_edge_weights

# Column order of node_features is a public contract
FEATURE_NAMES = ("lat", "lon", "thickness", "smb", "surface_temp", "refreeze", "melt_height", "snowpack")
BASE_FEATURES = FEATURE_NAMES[:3]
PHYSICAL_FEATURES = FEATURE_NAMES[3:]
N_FEATURES = len(FEATURE_NAMES)

BASE_MASK = (True, True, True, False, False, False, False, False)
FULL_MASK = (True,) * N_FEATURES


def validate_mask(mask):
    """Normalize to an 8-tuple of bools with the base features on"""
    mask = tuple(bool(bit) for bit in mask)
    if len(mask) != N_FEATURES:
        raise InvalidInputError(f"feature mask needs {N_FEATURES} bits, got {len(mask)}")
    if not all(mask[:3]):
        raise InvalidInputError("feature mask must keep the base features lat, lon, thickness")
    return mask


def parse_feature_mask(text):
    """Accepts an 8-character bit string, 'base', 'all' or comma-separated feature names"""
    if isinstance(text, (list, tuple)):
        return validate_mask(text)
    text = str(text).strip()
    if text == "base":
        return BASE_MASK
    if text == "all":
        return FULL_MASK
    if len(text) == N_FEATURES and set(text) <= {"0", "1"}:
        return validate_mask(c == "1" for c in text)

    names = {name.strip() for name in text.split(",") if name.strip()}
    unknown = names - set(FEATURE_NAMES) - {"base"}
    if unknown:
        raise InvalidInputError(f"unknown feature name(s) in mask: {', '.join(sorted(unknown))}")
    return validate_mask(name in BASE_FEATURES or name in names for name in FEATURE_NAMES)


def format_feature_mask(mask):
    """8-character bit string, e.g. 11100000"""
    return "".join("1" if bit else "0" for bit in mask)


def enumerate_physical_masks():
    """All 32 masks: base features always on, every subset of the physical ones"""
    for bits in itertools.product((False, True), repeat=len(PHYSICAL_FEATURES)):
        yield BASE_MASK[:3] + bits


def apply_mask(features, mask):
    """Zero the columns whose mask bit is off; idempotent"""
    out = np.array(features, dtype=np.float64, copy=True)
    out[:, ~np.asarray(mask, dtype=bool)] = 0.0
    return out


@dataclass(frozen=True)
class LayerGraph:
    """Node features (N x 8, FEATURE_NAMES order) and symmetric edge weights"""

    year: int
    node_features: np.ndarray
    edge_weights: np.ndarray
    feature_mask: tuple

    @property
    def n_nodes(self):
        return self.node_features.shape[0]

    @property
    def thickness(self):
        return self.node_features[:, 2]

    def with_features(self, features):
        """Same graph with replaced node features"""
        return LayerGraph(self.year, features, self.edge_weights, self.feature_mask)

    def permuted(self, order):
        """Relabel nodes: rows of the features and rows/columns of the weights"""
        order = np.asarray(order)
        return LayerGraph(
            self.year,
            self.node_features[order],
            self.edge_weights[np.ix_(order, order)],
            self.feature_mask,
        )


def build_layer_graph(coords, thickness, physical, mask, year, edge_weights=None, edge_mode="as-written", cap=DEFAULT_CAP):
    """Assemble a LayerGraph

    `physical` is a 5 x N matrix (PHYSICAL_FEATURES order) or None; absent
    physical data is treated as masked off. Pass `edge_weights` to share one
    matrix across the years of a record, otherwise it is built from `coords`.
    """
    mask = validate_mask(mask)
    n = len(coords)
    thickness = np.asarray(thickness, dtype=np.float64).reshape(-1)
    if thickness.size != n:
        raise IncompleteLayerError(f"thickness has {thickness.size} entries for {n} traces")
    if not np.all(np.isfinite(thickness)):
        raise IncompleteLayerError(f"layer {year} has missing thickness values")
    if np.any(thickness < 0):
        raise IncompleteLayerError(f"layer {year} has negative thickness")
    if edge_weights is None:
        edge_weights = build_edge_weights(coords, edge_mode, cap)
    if edge_weights.shape != (n, n):
        raise InvalidInputError(f"edge weights {edge_weights.shape} do not match {n} traces")

    features = np.zeros((n, N_FEATURES), dtype=np.float64)
    features[:, 0] = coords.lat
    features[:, 1] = coords.lon
    features[:, 2] = thickness
    if physical is None:
        mask = mask[:3] + (False,) * len(PHYSICAL_FEATURES)
    else:
        physical = np.asarray(physical, dtype=np.float64)
        if physical.shape != (len(PHYSICAL_FEATURES), n):
            raise InvalidInputError(f"physical features must be {len(PHYSICAL_FEATURES)} x {n}, got {physical.shape}")
        if not np.all(np.isfinite(physical)):
            raise InvalidInputError(f"physical features for {year} contain non-finite values")
        features[:, 3:] = physical.T

    return LayerGraph(int(year), apply_mask(features, mask), edge_weights, mask)
