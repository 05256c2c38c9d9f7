#!/usr/bin/env python3
"""
Climate-model (MAR) samples synchronized to radar traces
by planar Delaunay triangulation and barycentric interpolation
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.spatial import Delaunay, QhullError, cKDTree

from errors import DegenerateGeometryError, InvalidInputError
from geo.layer_graph import PHYSICAL_FEATURES

logger = logging.getLogger(__name__)

MAR_COLUMNS = ("year", "lat", "lon") + PHYSICAL_FEATURES
COLLINEAR_TOL = 1e-12


@dataclass(frozen=True)
class MarSampleSet:
    """One year of scattered climate samples: (lat, lon) points and 5 values each"""

    year: int
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1, len(PHYSICAL_FEATURES))
        if points.shape[0] != values.shape[0]:
            raise InvalidInputError(f"MAR {self.year}: {points.shape[0]} points but {values.shape[0]} value rows")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)


class DelaunayInterpolator:
    """Barycentric interpolation over a Delaunay triangulation of (lon, lat)

    Queries outside the convex hull take the value of the nearest sample.
    """

    def __init__(self, points_latlon):
        points = np.asarray(points_latlon, dtype=np.float64)
        self.planar = points[:, ::-1].copy()  # (lon, lat) embedding
        if self.planar.shape[0] < 3:
            raise DegenerateGeometryError(f"need at least 3 sample points, got {self.planar.shape[0]}")
        centered = self.planar - self.planar.mean(axis=0)
        scale = max(np.abs(centered).max(), 1.0)
        if np.linalg.matrix_rank(centered / scale, tol=COLLINEAR_TOL) < 2:
            raise DegenerateGeometryError("sample points are collinear; cannot triangulate")
        try:
            self.tri = Delaunay(self.planar)
        except QhullError as e:
            raise DegenerateGeometryError(f"Delaunay triangulation failed: {e}") from e
        self.tree = cKDTree(self.planar)

    def weights(self, queries_latlon):
        """Vertex indices (Q x 3) and barycentric weights (Q x 3) per query"""
        q = np.asarray(queries_latlon, dtype=np.float64)[:, ::-1]
        simplex = self.tri.find_simplex(q)
        inside = simplex >= 0

        verts = np.zeros((q.shape[0], 3), dtype=np.int64)
        weights = np.zeros((q.shape[0], 3), dtype=np.float64)

        s = simplex[inside]
        T = self.tri.transform[s, :2]
        b = np.einsum("ijk,ik->ij", T, q[inside] - self.tri.transform[s, 2])
        weights[inside] = np.c_[b, 1.0 - b.sum(axis=1)]
        verts[inside] = self.tri.simplices[s]

        if not inside.all():
            _, nearest = self.tree.query(q[~inside])
            verts[~inside, 0] = nearest
            weights[~inside, 0] = 1.0
            logger.debug(f"{int((~inside).sum())} queries outside the hull use the nearest sample")
        return verts, weights

    def __call__(self, values, queries_latlon):
        verts, weights = self.weights(queries_latlon)
        values = np.asarray(values, dtype=np.float64)
        return np.einsum("qk,qkc->qc", weights, values[verts])


def delaunay_interpolate(samples, queries, interpolator=None):
    """5 x N physical features at the trace coordinates `queries`"""
    interpolator = interpolator or DelaunayInterpolator(samples.points)
    latlon = np.column_stack([queries.lat, queries.lon])
    return interpolator(samples.values, latlon).T


class MarArchive:
    """Per-year sample sets with cached triangulations

    A single supplied year is reused for every requested year.
    """

    def __init__(self, sets):
        self.sets = {s.year: s for s in sets}
        if not self.sets:
            raise InvalidInputError("MAR archive is empty")
        self._interpolators = {}

    @property
    def years(self):
        return sorted(self.sets)

    def for_year(self, year):
        """Sample set of `year`; a single-year archive serves every year"""
        if len(self.sets) == 1:
            return next(iter(self.sets.values()))
        if year not in self.sets:
            raise InvalidInputError(f"MAR data has no samples for {year} (available: {self.years})")
        return self.sets[year]

    def interpolate(self, year, coords):
        """5 x N physical features for the traces of one year"""
        samples = self.for_year(year)
        if samples.year not in self._interpolators:
            self._interpolators[samples.year] = DelaunayInterpolator(samples.points)
        return delaunay_interpolate(samples, coords, self._interpolators[samples.year])


def read_mar(path):
    """Delimited text with header year,lat,lon,smb,surface_temp,refreeze,melt_height,snowpack"""
    path = Path(path)
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in MAR_COLUMNS if c not in df.columns]
    if missing:
        raise InvalidInputError(f"{path}: missing MAR column(s) {', '.join(missing)}")
    if df[list(MAR_COLUMNS)].isna().any().any():
        raise InvalidInputError(f"{path}: MAR file has empty cells")

    sets = []
    for year, group in df.groupby("year", sort=True):
        sets.append(MarSampleSet(
            year=int(year),
            points=group[["lat", "lon"]].to_numpy(dtype=np.float64),
            values=group[list(PHYSICAL_FEATURES)].to_numpy(dtype=np.float64),
        ))
    logger.info(f"Read {len(df)} MAR samples over {len(sets)} year(s) from {path}")
    return MarArchive(sets)


def write_mar(archive, path):
    """One CSV row per (year, sample point)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = []
    for year in archive.years:
        s = archive.sets[year]
        frame = pd.DataFrame(s.values, columns=list(PHYSICAL_FEATURES))
        frame.insert(0, "lon", s.points[:, 1])
        frame.insert(0, "lat", s.points[:, 0])
        frame.insert(0, "year", year)
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format="%.17g")
    logger.info(f"✓ Wrote MAR samples for {len(frames)} year(s) to {path}")
