#!/usr/bin/env python3
"""
Temporal samples: five shallow-layer graphs in, fifteen deep-layer thicknesses out
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dataset.records import count_complete_layers
from errors import IncompleteLayerError, InvalidInputError
from geo.haversine import DEFAULT_CAP, TraceCoordinates, build_edge_weights
from geo.layer_graph import LayerGraph, build_layer_graph, format_feature_mask, parse_feature_mask

logger = logging.getLogger(__name__)

N_INPUT_LAYERS = 5
N_TARGET_LAYERS = 15


@dataclass(frozen=True)
class TemporalSample:
    """inputs ordered newest first (acq-1 ... acq-5); targets N x 15 ordered acq-6 ... acq-20"""

    id: str
    inputs: tuple
    targets: np.ndarray
    coords: TraceCoordinates

    @property
    def input_years(self):
        return tuple(g.year for g in self.inputs)

    @property
    def target_years(self):
        newest = self.inputs[-1].year - 1
        return tuple(range(newest, newest - self.targets.shape[1], -1))

    def chronological(self):
        """Input graphs oldest year first, the order the recurrent cell consumes them"""
        return sorted(self.inputs, key=lambda g: g.year)


def build_sample(record, mar, mask, edge_mode="as-written", cap=DEFAULT_CAP):
    """Five input graphs and the deep-layer targets of one record"""
    thickness = record.thickness()
    needed = N_INPUT_LAYERS + N_TARGET_LAYERS
    if count_complete_layers(thickness) < needed:
        raise IncompleteLayerError(f"record {record.id}: fewer than {needed} complete layers")

    weights = build_edge_weights(record.coords, edge_mode, cap)
    use_physical = mar is not None and any(mask[3:])
    inputs = []
    for k in range(N_INPUT_LAYERS):
        year = record.acquisition_year - 1 - k
        physical = mar.interpolate(year, record.coords) if use_physical else None
        inputs.append(build_layer_graph(record.coords, thickness[k], physical, mask, year, edge_weights=weights))

    targets = np.ascontiguousarray(thickness[N_INPUT_LAYERS:needed].T)
    return TemporalSample(record.id, tuple(inputs), targets, record.coords)


def build_samples(records, mar=None, mask=None, edge_mode="as-written", cap=DEFAULT_CAP):
    """One TemporalSample per record, ordered by record id"""
    mask = parse_feature_mask(mask if mask is not None else "base")
    samples = [build_sample(r, mar, mask, edge_mode, cap) for r in sorted(records, key=lambda r: r.id)]
    logger.info(f"Built {len(samples)} temporal samples (mask {format_feature_mask(mask)}, edges {edge_mode})")
    return samples


def sample_to_dict(sample, edge_mode, cap):
    """JSON-ready dict; edge weights are rebuilt from coordinates on read"""
    return {
        "id": sample.id,
        "lat": sample.coords.lat.tolist(),
        "lon": sample.coords.lon.tolist(),
        "edge_mode": edge_mode,
        "edge_cap": float(cap),
        "mask": format_feature_mask(sample.inputs[0].feature_mask),
        "inputs": [{"year": g.year, "features": g.node_features.tolist()} for g in sample.inputs],
        "targets": sample.targets.tolist(),
    }


def sample_from_dict(data):
    """Inverse of sample_to_dict"""
    coords = TraceCoordinates(data["lat"], data["lon"])
    weights = build_edge_weights(coords, data["edge_mode"], data["edge_cap"])
    mask = parse_feature_mask(data["mask"])
    inputs = tuple(
        LayerGraph(int(g["year"]), np.asarray(g["features"], dtype=np.float64), weights, mask)
        for g in data["inputs"]
    )
    targets = np.asarray(data["targets"], dtype=np.float64)
    if len(inputs) != N_INPUT_LAYERS or targets.shape != (len(coords), N_TARGET_LAYERS):
        raise InvalidInputError(f"sample {data['id']}: unexpected input/target shapes")
    return TemporalSample(str(data["id"]), inputs, targets, coords)


def write_samples(samples, path, edge_mode="as-written", cap=DEFAULT_CAP):
    """One JSON object per line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for sample in samples:
            f.write(json.dumps(sample_to_dict(sample, edge_mode, cap), separators=(",", ":")) + "\n")
    logger.info(f"✓ Wrote {len(samples)} samples to {path}")


def read_samples(path):
    """Parse a samples file written by write_samples"""
    path = Path(path)
    samples = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                samples.append(sample_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as e:
                raise InvalidInputError(f"{path}:{line_no}: malformed sample ({e})") from e
    logger.info(f"Read {len(samples)} samples from {path}")
    return samples

