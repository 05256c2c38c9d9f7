#!/usr/bin/env python3
"""
Checkpoint files: versioned JSON manifest followed by packed little-endian float64 values

    magic (8 bytes) | version (uint32 LE) | manifest length (uint64 LE) | manifest | payload
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np

from errors import CorruptManifestError, ShapeError, VersionMismatchError
from model.network import LayerThicknessModel, ModelConfig, NormStats

logger = logging.getLogger(__name__)

MAGIC = b"ICEGNNCK"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIQ")
_F64 = np.dtype("<f8")


def _entries(model):
    """(name, array) pairs in payload order: parameters, then normalization stats"""
    entries = [(p.name, p.value) for p in model.parameters()]
    if model.norm_stats is not None:
        for name in NormStats.ARRAYS:
            entries.append((f"norm.{name}", np.asarray(getattr(model.norm_stats, name)).reshape(1, -1)))
    return entries


def to_bytes(model):
    """Serialize model config, parameters and normalization stats"""
    entries = _entries(model)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "seed": model.seed,
        "epoch": model.trained_epochs,
        "has_norm_stats": model.norm_stats is not None,
        "tensors": [{"name": name, "rows": int(a.shape[0]), "cols": int(a.shape[1])} for name, a in entries],
    }
    manifest_bytes = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(a, dtype=_F64).tobytes() for _, a in entries)
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(manifest_bytes)) + manifest_bytes + payload


def _tensor_layout(entries):
    """(name, rows, cols) for every manifest tensor entry"""
    try:
        layout = [(str(t["name"]), int(t["rows"]), int(t["cols"])) for t in entries]
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptManifestError(f"checkpoint tensor entry is malformed: {e!r}") from e
    if any(rows < 0 or cols < 0 for _, rows, cols in layout):
        raise CorruptManifestError("checkpoint tensor entry has a negative dimension")
    return layout


def from_bytes(blob):
    """Rebuild a model from checkpoint bytes; malformed input raises CheckpointError"""
    if len(blob) < _HEADER.size:
        raise CorruptManifestError("checkpoint is shorter than its header")
    magic, version, manifest_len = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CorruptManifestError("not a checkpoint file (bad magic)")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint format version {version}, this build reads {FORMAT_VERSION}")
    start = _HEADER.size
    if len(blob) < start + manifest_len:
        raise CorruptManifestError("checkpoint manifest is truncated")
    try:
        manifest = json.loads(blob[start:start + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptManifestError(f"checkpoint manifest is unreadable: {e}") from e
    if not isinstance(manifest, dict):
        raise CorruptManifestError("checkpoint manifest is not a JSON object")
    missing = {"config", "seed", "epoch", "has_norm_stats", "tensors"} - set(manifest)
    if missing:
        raise CorruptManifestError(f"checkpoint manifest lacks {', '.join(sorted(missing))}")

    tensors = _tensor_layout(manifest["tensors"])
    payload = blob[start + manifest_len:]
    expected = sum(rows * cols for _, rows, cols in tensors) * _F64.itemsize
    if len(payload) != expected:
        raise CorruptManifestError(f"checkpoint payload has {len(payload)} bytes, manifest describes {expected}")

    arrays, offset = {}, 0
    for name, rows, cols in tensors:
        count = rows * cols
        arrays[name] = np.frombuffer(payload, dtype=_F64, count=count, offset=offset).reshape(rows, cols)
        offset += count * _F64.itemsize

    norm = None
    if manifest["has_norm_stats"]:
        missing = [name for name in NormStats.ARRAYS if f"norm.{name}" not in arrays]
        if missing:
            raise CorruptManifestError(f"checkpoint lacks normalization tensor(s) {', '.join(missing)}")
        norm = NormStats(**{name: arrays.pop(f"norm.{name}").reshape(-1).astype(np.float64) for name in NormStats.ARRAYS})

    try:
        config = ModelConfig.from_dict(manifest["config"])
    except (AttributeError, TypeError) as e:
        raise CorruptManifestError(f"checkpoint model config is malformed: {e}") from e
    model = LayerThicknessModel(config, seed=manifest["seed"], norm_stats=norm)
    model.trained_epochs = manifest["epoch"]
    expected_names = set(model.named_parameters())
    if set(arrays) != expected_names:
        raise CorruptManifestError("checkpoint parameter names do not match the configured model")
    try:
        model.load_state(arrays)
    except ShapeError as e:
        raise CorruptManifestError(f"checkpoint parameter shapes disagree with the config: {e}") from e
    return model


def save(model, path):
    """Write the checkpoint for `model` to `path`"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(model))
    logger.info(f"✓ Checkpoint written to {path}")
    return path


def load(path):
    """Read a checkpoint written by save"""
    return from_bytes(Path(path).read_bytes())
