#!/usr/bin/env python3
"""
Labeled ice-layer records: boundary parsing, thickness, filtering and splitting
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.matrix import make_rng
from errors import InvalidInputError, MalformedRecordError
from geo.haversine import TraceCoordinates

logger = logging.getLogger(__name__)

MIN_COMPLETE_LAYERS = 20
SPLIT_RATIOS = (3, 1, 1)


@dataclass(frozen=True)
class LabeledImageRecord:
    """One flight image: trace coordinates and L boundary rows (NaN = missing)"""

    id: str
    coords: TraceCoordinates
    boundaries: np.ndarray
    acquisition_year: int = 2012

    def __post_init__(self):
        boundaries = np.asarray(self.boundaries, dtype=np.float64)
        if boundaries.ndim != 2 or boundaries.shape[0] < 1:
            raise InvalidInputError(f"record {self.id}: boundaries must be an L x N matrix with L >= 1")
        if boundaries.shape[1] != len(self.coords):
            raise InvalidInputError(
                f"record {self.id}: {boundaries.shape[1]} boundary columns for {len(self.coords)} traces"
            )
        object.__setattr__(self, "boundaries", boundaries)

    @property
    def n_layers(self):
        return self.boundaries.shape[0] - 1

    def thickness(self):
        return thickness_from_boundaries(self.boundaries, self.id)


@dataclass(frozen=True)
class SplitSpec:
    seed: int = 0
    ratios: tuple = SPLIT_RATIOS


def thickness_from_boundaries(boundaries, record_id="?"):
    """(L-1) x N layer thickness; entries next to a missing boundary are NaN"""
    boundaries = np.asarray(boundaries, dtype=np.float64)
    if boundaries.shape[0] < 2:
        raise InvalidInputError(f"record {record_id}: need at least two boundaries, got {boundaries.shape[0]}")
    thickness = np.diff(boundaries, axis=0)
    complete = np.isfinite(thickness)
    if np.any(thickness[complete] < 0):
        rows, cols = np.nonzero(complete & (np.nan_to_num(thickness) < 0))
        raise MalformedRecordError(
            f"record {record_id}: boundary {rows[0] + 1} lies above boundary {rows[0]} at trace {cols[0]}"
        )
    return thickness


def count_complete_layers(thickness):
    """Number of leading thickness rows with no missing entries"""
    complete_rows = np.all(np.isfinite(thickness), axis=1)
    if complete_rows.all():
        return complete_rows.size
    return int(np.argmin(complete_rows))


def filter_valid(records, min_layers=MIN_COMPLETE_LAYERS):
    """Keep records whose top `min_layers` layers are complete across every trace"""
    kept = []
    for record in records:
        try:
            thickness = record.thickness()
        except (InvalidInputError, MalformedRecordError) as e:
            logger.warning(f"Dropping record {record.id}: {e}")
            continue
        if count_complete_layers(thickness) >= min_layers:
            kept.append(record)
        else:
            logger.debug(f"Dropping record {record.id}: fewer than {min_layers} complete layers")
    logger.info(f"{len(kept)} of {len(records)} records have at least {min_layers} complete layers")
    return kept


def split_sizes(n, ratios=SPLIT_RATIOS):
    """floor(3N/5), floor(N/5), remainder"""
    total = sum(ratios)
    n_train = (ratios[0] * n) // total
    n_val = (ratios[1] * n) // total
    return n_train, n_val, n - n_train - n_val


def split(records, spec):
    """Seeded permutation (over records ordered by id) cut into train/val/test"""
    records = sorted(records, key=lambda r: r.id)
    if len(records) < sum(spec.ratios):
        raise InvalidInputError(f"need at least {sum(spec.ratios)} records to split, got {len(records)}")
    order = make_rng(spec.seed).permutation(len(records))
    shuffled = [records[i] for i in order]
    n_train, n_val, _ = split_sizes(len(records), spec.ratios)
    return shuffled[:n_train], shuffled[n_train:n_train + n_val], shuffled[n_train + n_val:]


def _boundaries_to_json(boundaries):
    return [[None if not np.isfinite(v) else float(v) for v in row] for row in boundaries]


def _boundaries_from_json(rows):
    return np.array([[np.nan if v is None else float(v) for v in row] for row in rows], dtype=np.float64)


def record_to_dict(record):
    """JSON-ready dict; missing boundaries become null"""
    return {
        "id": record.id,
        "year": int(record.acquisition_year),
        "lat": [float(v) for v in record.coords.lat],
        "lon": [float(v) for v in record.coords.lon],
        "boundaries": _boundaries_to_json(record.boundaries),
    }


def record_from_dict(data):
    """Inverse of record_to_dict"""
    try:
        return LabeledImageRecord(
            id=str(data["id"]),
            coords=TraceCoordinates(data["lat"], data["lon"]),
            boundaries=_boundaries_from_json(data["boundaries"]),
            acquisition_year=int(data.get("year", 2012)),
        )
    except KeyError as e:
        raise InvalidInputError(f"record is missing field {e}") from e


def write_records(records, path):
    """One JSON object per line; floats keep full round-trip precision"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record_to_dict(record), separators=(",", ":")) + "\n")
    logger.info(f"✓ Wrote {len(records)} records to {path}")


def read_records(path, n_traces=None):
    """Parse a JSON-lines records file; optionally require `n_traces` per record"""
    path = Path(path)
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = record_from_dict(json.loads(line))
            except json.JSONDecodeError as e:
                raise InvalidInputError(f"{path}:{line_no}: not a JSON object ({e.msg})") from e
            except InvalidInputError as e:
                raise InvalidInputError(f"{path}:{line_no}: {e}") from e
            if n_traces is not None and len(record.coords) != n_traces:
                raise InvalidInputError(f"{path}:{line_no}: expected {n_traces} traces, got {len(record.coords)}")
            records.append(record)
    logger.info(f"Read {len(records)} records from {path}")
    return records
