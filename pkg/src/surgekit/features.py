"""Point-based feature engineering: landfall, temporal/spatial statistics,
distances, tidal amplitudes, and correlation-threshold feature reduction.

Feature naming
--------------
* ``{tstat}_{var}``                    temporal statistic of a forcing variable,
  interpolated at the point (e.g. ``max_pressure`` is the temporal maximum of
  pressure at the location).
* ``{tstat}_{var}_{sstat}_{box}``      spatial statistic of that temporal field
  over a ``box``-degree neighborhood centered on the point, e.g.
  ``min_magnitude_mean_0.1``.
* ``bathy_{sstat}_{box}``              spatial statistic of bathymetry over the
  mesh points inside the box.
* ``depth``                            raw bathymetry at the point.
* ``coastal_dist`` / ``landfall_dist`` great-circle km to the coastline /
  landfall location.
* ``amplitude_{constituent}``          tidal constituent amplitude at the point.

Wind magnitude is computed per time step (before any reduction). Latitude and
longitude are never emitted as features. Statistic means are sequential
left-to-right sums, so they agree bit-for-bit with a naive loop oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tides
from .errors import (
    EmptyNeighborhood,
    EmptyWindow,
    LengthMismatch,
    MissingFile,
    NoData,
    NoLandfall,
    NonFinite,
    ParseError,
    UnknownVariable,
)
from .ingest import CoastPolyline, ForcingGrid, MaxSurgeField, PointSet, StormTrack, fmt

EARTH_RADIUS_KM = 6371.0

TEMPORAL_STATS = ("mean", "max", "min")
SPATIAL_STATS = ("mean", "max", "min")
BASE_VARIABLES = ("windx", "windy", "magnitude", "pressure")


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class FeatureConfig:
    """Feature-set layout. ``track`` localizes around landfall; ``trackless``
    uses the full forcing series and no landfall distance."""

    mode: str = "track"
    window_before_hours: float = 6.0
    window_after_hours: float = 6.0
    forcing_boxes: tuple = (0.1, 0.2, 0.4)
    bathy_boxes: tuple = (0.05, 0.1, 0.4, 1.0)
    include_ice: bool = False
    include_tides: bool = False

    def __post_init__(self):
        if self.mode not in ("track", "trackless"):
            raise ParseError(f"unknown feature mode {self.mode!r}")
        for name in ("forcing_boxes", "bathy_boxes"):
            boxes = tuple(float(b) for b in getattr(self, name))
            if any(b <= 0 for b in boxes) or any(b1 <= b0 for b0, b1 in zip(boxes, boxes[1:])):
                raise ParseError(f"{name} must be strictly increasing and positive")
            object.__setattr__(self, name, boxes)

    @classmethod
    def for_mode(cls, mode: str) -> "FeatureConfig":
        """Mode defaults: trackless turns on ice and tides, track leaves them off."""
        trackless = mode == "trackless"
        return cls(mode=mode, include_ice=trackless, include_tides=trackless)

    def variables(self) -> tuple:
        return BASE_VARIABLES + (("iceaf",) if self.include_ice else ())


def column_names(config: FeatureConfig) -> list:
    """Deterministic feature schema for a configuration.

    Per forcing variable and temporal statistic: the point value plus
    {mean,max,min} over each forcing box. Then bathymetry box statistics,
    scalar distances, and (when enabled) the eight constituent amplitudes.
    """
    names = []
    for var in config.variables():
        for tstat in TEMPORAL_STATS:
            names.append(f"{tstat}_{var}")
            for box in config.forcing_boxes:
                for sstat in SPATIAL_STATS:
                    names.append(f"{tstat}_{var}_{sstat}_{fmt(box)}")
    for box in config.bathy_boxes:
        for sstat in SPATIAL_STATS:
            names.append(f"bathy_{sstat}_{fmt(box)}")
    names.append("depth")
    names.append("coastal_dist")
    if config.mode == "track":
        names.append("landfall_dist")
    if config.include_tides:
        names.extend(f"amplitude_{c}" for c in tides.CONSTITUENTS)
    return names


# ---------------------------------------------------------------------------
# Sequential statistics (bitwise-reproducible against a naive loop)


def _seq_sum(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Left-to-right sequential sum; identical rounding to a plain loop."""
    if a.shape[axis] == 0:
        raise ValueError("empty reduction")
    return np.add.accumulate(a, axis=axis)[(slice(None),) * axis + (-1,)]


def _seq_mean(a: np.ndarray, axis: int = 0) -> np.ndarray:
    return _seq_sum(a, axis=axis) / a.shape[axis]


# ---------------------------------------------------------------------------
# Landfall


def _segment_intersection(p0, p1, q0, q1):
    """Fraction along p0->p1 of its crossing with q0->q1, or None."""
    rx, ry = p1[0] - p0[0], p1[1] - p0[1]
    sx, sy = q1[0] - q0[0], q1[1] - q0[1]
    denom = rx * sy - ry * sx
    if denom == 0.0:
        return None
    ux, uy = q0[0] - p0[0], q0[1] - p0[1]
    tau = (ux * sy - uy * sx) / denom
    upsilon = (ux * ry - uy * rx) / denom
    if 0.0 <= tau <= 1.0 and 0.0 <= upsilon <= 1.0:
        return tau
    return None


def _is_landward(lon: float, lat: float, coast: CoastPolyline) -> bool:
    """True when the point lies left of the nearest coast segment's direction.

    Coastlines are oriented with land on the left; this convention is what the
    synthetic generator emits and what real inputs must follow.
    """
    best, side = math.inf, 0.0
    for poly in coast.polylines:
        for a, b in zip(poly[:-1], poly[1:]):
            d = _point_segment_distance_km(lon, lat, a, b)
            if d < best:
                best = d
                side = (b[0] - a[0]) * (lat - a[1]) - (b[1] - a[1]) * (lon - a[0])
    return side >= 0.0


def find_landfall(track: StormTrack, coast: CoastPolyline):
    """First crossing of the eye track over the coastline.

    Returns ``(time, lon, lat)`` with the crossing linearly interpolated
    between track samples. If the first sample is already landward it is
    returned as-is. Raises :class:`NoLandfall` when the track never crosses.
    """
    if _is_landward(float(track.lon[0]), float(track.lat[0]), coast):
        return float(track.times[0]), float(track.lon[0]), float(track.lat[0])
    for i in range(len(track) - 1):
        p0 = (float(track.lon[i]), float(track.lat[i]))
        p1 = (float(track.lon[i + 1]), float(track.lat[i + 1]))
        best = None
        for poly in coast.polylines:
            for a, b in zip(poly[:-1], poly[1:]):
                tau = _segment_intersection(p0, p1, a, b)
                if tau is not None and (best is None or tau < best):
                    best = tau
        if best is not None:
            t = float(track.times[i]) + best * float(track.times[i + 1] - track.times[i])
            return t, p0[0] + best * (p1[0] - p0[0]), p0[1] + best * (p1[1] - p0[1])
    raise NoLandfall("track never crosses the coastline")


# ---------------------------------------------------------------------------
# Temporal statistics


def temporal_stats(grid: ForcingGrid, window=None, include_ice: bool = False) -> dict:
    """Per-cell {mean,max,min} of windx, windy, magnitude, pressure (+iceaf).

    ``window`` is a closed ``(t_start, t_end)`` interval in epoch seconds;
    ``None`` reduces over the full series. Magnitude is computed per time step
    before reduction. Returns ``{f"{tstat}_{var}": 2-D field}``.
    """
    t = grid.times()
    if window is None:
        mask = np.ones(len(t), dtype=bool)
    else:
        t_start, t_end = window
        mask = (t >= t_start) & (t <= t_end)
    if not mask.any():
        raise EmptyWindow(f"window {window} contains no forcing samples")

    names = list(BASE_VARIABLES) + (["iceaf"] if include_ice else [])
    fields = {}
    for var in names:
        if var == "magnitude":
            frames = np.sqrt(grid.variables["windx"][mask] ** 2 + grid.variables["windy"][mask] ** 2)
        else:
            if var not in grid.variables:
                raise UnknownVariable(var)
            frames = grid.variables[var][mask]
        fields[f"mean_{var}"] = _seq_mean(frames, axis=0)
        fields[f"max_{var}"] = frames.max(axis=0)
        fields[f"min_{var}"] = frames.min(axis=0)
    return fields


# ---------------------------------------------------------------------------
# Spatial statistics

DOMAIN = None  # sentinel: statistics over the whole domain


def _box_mask(lons: np.ndarray, lats: np.ndarray, lon: float, lat: float, box) -> np.ndarray:
    if box is DOMAIN:
        return np.ones(len(lons), dtype=bool)
    half = box / 2.0
    return (lons >= lon - half) & (lons <= lon + half) & (lats >= lat - half) & (lats <= lat + half)


def spatial_stats(values, lons, lats, lon: float, lat: float, box=DOMAIN) -> dict:
    """{mean,max,min} of ``values`` over cells/points whose centers fall in the
    closed box ``[lon +/- box/2] x [lat +/- box/2]`` (``DOMAIN`` uses all).

    Inputs are flat, parallel arrays (flatten grids in row-major order).
    Raises :class:`EmptyNeighborhood` when the clipped box contains nothing.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    lons = np.asarray(lons, dtype=np.float64).ravel()
    lats = np.asarray(lats, dtype=np.float64).ravel()
    if not (len(values) == len(lons) == len(lats)):
        raise LengthMismatch("values/lons/lats differ in length")
    picked = values[_box_mask(lons, lats, lon, lat, box)]
    if len(picked) == 0:
        raise EmptyNeighborhood(f"no cells within {box} deg of ({lon}, {lat})")
    return {
        "mean": float(_seq_mean(picked)),
        "max": float(picked.max()),
        "min": float(picked.min()),
    }


# ---------------------------------------------------------------------------
# Distances


def haversine_km(lon1, lat1, lon2, lat2):
    """Great-circle distance in km (spherical Earth, R = 6371 km)."""
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(x, dtype=np.float64)) for x in (lon1, lat1, lon2, lat2))
    a = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return EARTH_RADIUS_KM * 2.0 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _bearing(lon1, lat1, lon2, lat2):
    lon1, lat1, lon2, lat2 = map(math.radians, (lon1, lat1, lon2, lat2))
    y = math.sin(lon2 - lon1) * math.cos(lat2)
    x = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(lon2 - lon1)
    return math.atan2(y, x)


def _point_segment_distance_km(lon: float, lat: float, a, b) -> float:
    """Great-circle distance from a point to the arc between vertices a and b."""
    d_pa = float(haversine_km(lon, lat, a[0], a[1]))
    d_pb = float(haversine_km(lon, lat, b[0], b[1]))
    d_ab = float(haversine_km(a[0], a[1], b[0], b[1]))
    if d_ab == 0.0:
        return d_pa
    theta_ab = _bearing(a[0], a[1], b[0], b[1])
    theta_ap = _bearing(a[0], a[1], lon, lat)
    delta_ap = d_pa / EARTH_RADIUS_KM
    if math.cos(theta_ap - theta_ab) < 0.0:  # foot of perpendicular behind a
        return d_pa
    xt = math.asin(max(-1.0, min(1.0, math.sin(delta_ap) * math.sin(theta_ap - theta_ab))))
    cos_xt = math.cos(xt)
    if abs(cos_xt) < 1e-15:
        return abs(xt) * EARTH_RADIUS_KM
    at = math.acos(max(-1.0, min(1.0, math.cos(delta_ap) / cos_xt)))
    if at > d_ab / EARTH_RADIUS_KM:  # foot beyond b
        return d_pb
    return abs(xt) * EARTH_RADIUS_KM


def coastal_distance_km(lon: float, lat: float, coast: CoastPolyline) -> float:
    """Minimum great-circle distance to any coast segment (km)."""
    best = math.inf
    for poly in coast.polylines:
        if len(poly) == 1:  # degenerate: a single vertex
            best = min(best, float(haversine_km(lon, lat, poly[0, 0], poly[0, 1])))
            continue
        for a, b in zip(poly[:-1], poly[1:]):
            best = min(best, _point_segment_distance_km(lon, lat, a, b))
    return best


def distances(lon: float, lat: float, landfall, coast: CoastPolyline):
    """(landfall_dist, coastal_dist) in km; landfall_dist is None without a landfall."""
    coastal = coastal_distance_km(lon, lat, coast)
    if landfall is None:
        return None, coastal
    _, llon, llat = landfall
    return float(haversine_km(lon, lat, llon, llat)), coastal


# ---------------------------------------------------------------------------
# Feature matrix


@dataclass
class FeatureMatrix:
    """Named feature columns over (storm, point) rows, plus optional labels.

    ``labels`` holds peak surge in meters with NaN for DRY; ``None`` means the
    matrix carries no labels at all (prediction-only input).
    """

    feature_names: list
    storm_ids: list
    point_ids: np.ndarray
    X: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.point_ids = np.asarray(self.point_ids, dtype=np.int64)
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape != (len(self.storm_ids), len(self.feature_names)):
            raise LengthMismatch(
                f"X shape {self.X.shape} does not match {len(self.storm_ids)} rows x "
                f"{len(self.feature_names)} columns")
        if len(self.point_ids) != len(self.storm_ids):
            raise LengthMismatch("storm_ids and point_ids differ in length")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ParseError("duplicate feature names")
        if not np.all(np.isfinite(self.X)):
            i, j = np.argwhere(~np.isfinite(self.X))[0]
            raise NonFinite(f"feature {self.feature_names[j]!r} in row {i}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.float64)
            if len(self.labels) != len(self.storm_ids):
                raise LengthMismatch("labels length does not match row count")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]

    def select_columns(self, names) -> "FeatureMatrix":
        idx = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(list(names), list(self.storm_ids), self.point_ids,
                             self.X[:, idx], self.labels)

    def select_rows(self, mask) -> "FeatureMatrix":
        mask = np.asarray(mask)
        rows = np.nonzero(mask)[0] if mask.dtype == bool else mask
        return FeatureMatrix(list(self.feature_names),
                             [self.storm_ids[i] for i in rows],
                             self.point_ids[rows], self.X[rows],
                             None if self.labels is None else self.labels[rows])


def write_feature_matrix(m: FeatureMatrix, path) -> None:
    out = ["storm_id,point_id," + ",".join(m.feature_names) + ",label"]
    for i in range(m.n_rows):
        row = ",".join(fmt(v) for v in m.X[i])
        if m.labels is None:
            label = ""
        else:
            label = "DRY" if math.isnan(m.labels[i]) else fmt(m.labels[i])
        out.append(f"{m.storm_ids[i]},{int(m.point_ids[i])},{row},{label}")
    Path(path).write_text("\n".join(out) + "\n")


def load_feature_matrix(path) -> FeatureMatrix:
    p = Path(path)
    if not p.exists():
        raise MissingFile(p)
    lines = p.read_text().splitlines()
    if not lines:
        raise ParseError("empty feature file", 1)
    header = lines[0].split(",")
    if len(header) < 3 or header[0] != "storm_id" or header[1] != "point_id" or header[-1] != "label":
        raise ParseError("expected header 'storm_id,point_id,<features...>,label'", 1)
    names = header[2:-1]
    storm_ids, point_ids, rows, labels = [], [], [], []
    any_label = False
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(parts)}", k)
        storm_ids.append(parts[0])
        try:
            point_ids.append(int(parts[1]))
            rows.append([float(v) for v in parts[2:-1]])
        except ValueError as e:
            raise ParseError(str(e), k) from None
        tok = parts[-1].strip()
        if tok == "":
            labels.append(math.nan)
        else:
            any_label = True
            labels.append(math.nan if tok == "DRY" else float(tok))
    X = np.array(rows, dtype=np.float64).reshape(len(storm_ids), len(names))
    lab = np.array(labels) if any_label else None
    return FeatureMatrix(names, storm_ids, np.array(point_ids, dtype=np.int64), X, lab)


# ---------------------------------------------------------------------------
# Assembly


@dataclass
class StormInput:
    """One storm's inputs for feature assembly."""

    storm_id: str
    forcing: ForcingGrid
    track: StormTrack | None = None
    surge: MaxSurgeField | None = None
    point_ids: list = field(default_factory=list)
    landfall: tuple | None = None  # (time, lon, lat), computed when absent


def _interp_field(field2d: np.ndarray, grid: ForcingGrid, lon: float, lat: float) -> float:
    """Bilinear interpolation of a per-cell field at a location (no extrapolation)."""
    lat_hi = grid.lat0 + grid.dlat * (grid.nlat - 1)
    lon_hi = grid.lon0 + grid.dlon * (grid.nlon - 1)
    if not (grid.lat0 <= lat <= lat_hi and grid.lon0 <= lon <= lon_hi):
        from .errors import OutOfBounds

        raise OutOfBounds(f"point ({lon}, {lat}) outside forcing grid")
    if grid.nlat == 1:
        i, wlat = 0, 0.0
    else:
        pos = (lat - grid.lat0) / grid.dlat
        i = min(int(math.floor(pos)), grid.nlat - 2)
        wlat = pos - i
    if grid.nlon == 1:
        j, wlon = 0, 0.0
    else:
        pos = (lon - grid.lon0) / grid.dlon
        j = min(int(math.floor(pos)), grid.nlon - 2)
        wlon = pos - j
    i1, j1 = min(i + 1, grid.nlat - 1), min(j + 1, grid.nlon - 1)
    return float((1 - wlat) * (1 - wlon) * field2d[i, j] + (1 - wlat) * wlon * field2d[i, j1]
                 + wlat * (1 - wlon) * field2d[i1, j] + wlat * wlon * field2d[i1, j1])


def assemble(config: FeatureConfig, storms, points: PointSet, coast: CoastPolyline,
             harmonics: dict | None = None) -> FeatureMatrix:
    """Build the (storm, point) feature matrix for a list of :class:`StormInput`.

    Deterministic: identical inputs produce identical matrices. Labels are
    taken from each storm's surge field when present (all storms must agree).
    """
    names = column_names(config)
    if config.include_tides and harmonics is None:
        harmonics = {}
    storm_col, point_col, rows, labels = [], [], [], []
    want_labels = any(s.surge is not None for s in storms)

    for storm in storms:
        grid = storm.forcing
        if config.mode == "track":
            landfall = storm.landfall
            if landfall is None:
                if storm.track is None:
                    raise NoLandfall(f"storm {storm.storm_id}: track required in track mode")
                landfall = find_landfall(storm.track, coast)
            window = (landfall[0] - config.window_before_hours * 3600.0,
                      landfall[0] + config.window_after_hours * 3600.0)
        else:
            landfall = None
            window = None
        fields = temporal_stats(grid, window=window, include_ice=config.include_ice)
        glats, glons = grid.lats(), grid.lons()
        flat_lons = np.tile(glons, grid.nlat)
        flat_lats = np.repeat(glats, grid.nlon)
        if want_labels and storm.surge is None:
            raise NoData(f"storm {storm.storm_id} has no surge labels")

        for pid in storm.point_ids:
            prow = points.row_of(pid)
            lon, lat = float(points.lon[prow]), float(points.lat[prow])
            values = []
            for var in config.variables():
                for tstat in TEMPORAL_STATS:
                    f2d = fields[f"{tstat}_{var}"]
                    values.append(_interp_field(f2d, grid, lon, lat))
                    flat = f2d.ravel()
                    for box in config.forcing_boxes:
                        stats = spatial_stats(flat, flat_lons, flat_lats, lon, lat, box)
                        values.extend(stats[s] for s in SPATIAL_STATS)
            for box in config.bathy_boxes:
                stats = spatial_stats(points.depth, points.lon, points.lat, lon, lat, box)
                values.extend(stats[s] for s in SPATIAL_STATS)
            values.append(float(points.depth[prow]))
            lf_dist, coast_dist = distances(lon, lat, landfall, coast)
            values.append(coast_dist)
            if config.mode == "track":
                values.append(lf_dist)
            if config.include_tides:
                h = harmonics.get(pid)
                amps = h.amplitude_vector() if h is not None else np.zeros(len(tides.CONSTITUENTS))
                values.extend(float(a) for a in amps)
            storm_col.append(storm.storm_id)
            point_col.append(pid)
            rows.append(values)
            if want_labels:
                labels.append(storm.surge.value_for(pid))

    X = np.array(rows, dtype=np.float64).reshape(len(storm_col), len(names))
    return FeatureMatrix(names, storm_col, np.array(point_col, dtype=np.int64), X,
                         np.array(labels) if want_labels else None)


# ---------------------------------------------------------------------------
# Correlation-threshold reduction


def correlation_reduce(matrix: FeatureMatrix, tau: float) -> list:
    """Drop features until no pair has |Pearson correlation| above ``tau``.

    Greedy and deterministic: repeatedly take the worst pair and drop the
    member with the larger mean absolute correlation to the remaining
    features, breaking ties toward the lexicographically later name.
    Zero-variance columns are dropped first with a warning. Returns retained
    names in original column order.
    """
    if not 0 < tau <= 1:
        raise ParseError("correlation threshold must be in (0, 1]")
    if matrix.n_rows < 2:
        raise ParseError("correlation reduction needs at least 2 rows")
    names = list(matrix.feature_names)
    X = matrix.X
    keep = []
    for j, name in enumerate(names):
        if np.std(X[:, j]) == 0.0:
            warnings.warn(f"dropping zero-variance column {name!r}", stacklevel=2)
        else:
            keep.append(j)
    active = list(keep)
    if len(active) < 2:
        return [names[j] for j in active]
    corr = np.abs(np.corrcoef(X[:, active].T))
    np.fill_diagonal(corr, 0.0)
    alive = list(range(len(active)))

    while len(alive) > 1:
        sub = corr[np.ix_(alive, alive)]
        worst = float(sub.max())
        if worst <= tau:
            break
        a_i, b_i = np.argwhere(sub == worst)[0]
        a, b = alive[a_i], alive[b_i]
        mean_a = float(_seq_mean(np.delete(sub[a_i], a_i)))
        mean_b = float(_seq_mean(np.delete(sub[b_i], b_i)))
        if mean_a > mean_b:
            drop = a
        elif mean_b > mean_a:
            drop = b
        else:
            drop = max(a, b, key=lambda k: names[active[k]])
        alive.remove(drop)

    return [names[active[k]] for k in sorted(alive)]
