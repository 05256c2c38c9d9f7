#!/usr/bin/env python3
"""
Haversine edge weights between radar traces

The weight is the reciprocal of a central angle:
    h = hav(dlat) + cos(lat_a) cos(lat_b) hav(dlon),   hav(t) = sin^2(t / 2)
    as-written:  w = 1 / (2 asin(clamp(h, eps, 1)))
    sqrt:        w = 1 / (2 asin(clamp(sqrt(h), eps, 1)))
capped at `cap` so coincident traces stay finite.
"""

import math
from dataclasses import dataclass

import numpy as np

from errors import InvalidInputError

EDGE_MODES = ("as-written", "sqrt")
ARCSIN_EPS = 1e-12
DEFAULT_CAP = 1e9


@dataclass(frozen=True)
class TraceCoordinates:
    """Latitude/longitude in degrees for each trace of a flight image"""

    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self):
        lat = np.asarray(self.lat, dtype=np.float64).reshape(-1)
        lon = np.asarray(self.lon, dtype=np.float64).reshape(-1)
        if lat.shape != lon.shape:
            raise InvalidInputError(f"latitude has {lat.size} entries but longitude has {lon.size}")
        if lat.size == 0:
            raise InvalidInputError("trace coordinates are empty")
        _check_coordinates(lat, lon)
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)

    def __len__(self):
        return self.lat.size

    def permuted(self, order):
        """Coordinates reordered by `order`"""
        return TraceCoordinates(self.lat[order], self.lon[order])


def _check_coordinates(lat, lon):
    if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
        raise InvalidInputError("coordinates must be finite")
    if np.any(np.abs(lat) > 90.0):
        raise InvalidInputError("latitude outside [-90, 90]")
    if np.any(np.abs(lon) > 180.0):
        raise InvalidInputError("longitude outside [-180, 180]")


def _check_mode(mode, cap):
    if mode not in EDGE_MODES:
        raise InvalidInputError(f"edge mode must be one of {EDGE_MODES}, got '{mode}'")
    if not (cap > 0 and math.isfinite(cap)):
        raise InvalidInputError(f"edge weight cap must be positive and finite, got {cap}")


def haversine_edge_weight(a, b, mode="as-written", cap=DEFAULT_CAP):
    """Edge weight between two (lat, lon) points given in degrees"""
    _check_mode(mode, cap)
    # canonical argument order keeps w(a, b) == w(b, a) bit for bit
    a, b = sorted([(float(a[0]), float(a[1])), (float(b[0]), float(b[1]))])
    _check_coordinates(np.array([a[0], b[0]]), np.array([a[1], b[1]]))

    phi_a, lam_a = math.radians(a[0]), math.radians(a[1])
    phi_b, lam_b = math.radians(b[0]), math.radians(b[1])
    h = math.sin((phi_b - phi_a) / 2) ** 2 + math.cos(phi_a) * math.cos(phi_b) * math.sin((lam_b - lam_a) / 2) ** 2
    s = math.sqrt(h) if mode == "sqrt" else h
    s = min(max(s, ARCSIN_EPS), 1.0)
    return min(1.0 / (2.0 * math.asin(s)), cap)


def build_edge_weights(coords, mode="as-written", cap=DEFAULT_CAP):
    """Dense symmetric N x N weight matrix over every trace pair, diagonal = cap"""
    _check_mode(mode, cap)
    phi = np.radians(coords.lat)
    lam = np.radians(coords.lon)

    dphi = phi[None, :] - phi[:, None]
    dlam = lam[None, :] - lam[:, None]
    h = np.sin(dphi / 2) ** 2 + np.cos(phi)[:, None] * np.cos(phi)[None, :] * np.sin(dlam / 2) ** 2
    s = np.sqrt(h) if mode == "sqrt" else h
    s = np.clip(s, ARCSIN_EPS, 1.0)
    w = np.minimum(1.0 / (2.0 * np.arcsin(s)), cap)

    # mirror the upper triangle so symmetry is exact
    w = np.triu(w, 1)
    w = w + w.T
    np.fill_diagonal(w, cap)
    return w
