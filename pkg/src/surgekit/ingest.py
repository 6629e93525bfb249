"""On-disk data model: meshes, forcing grids, storm tracks, gauges, surge fields.

All loaders are pure functions returning immutable objects (numpy arrays are
marked read-only), so they are safe to share across parallel workers. Writers
emit a canonical text form: floats are rendered with ``repr`` (shortest
round-tripping decimal), lines end with ``\\n``, and ``load(write(x)) == x``
holds exactly.

File formats
------------
PointSet CSV        header ``id,lon,lat,depth,is_coastal``; is_coastal in {0,1}.
ForcingGrid         text header of ``key=value`` lines (lat0, lon0, dlat, dlon,
                    nlat, nlon, t0, dt, nt, variables=comma-list), then per
                    variable, nt frames of nlat rows x nlon values. Rows run
                    north to south; lat0/lon0 is the south-west cell center.
StormTrack CSV      header ``time,lon,lat``; time is ISO-8601 or epoch seconds.
GaugeSeries CSV     ``# key=value`` header lines (station_id, lon, lat, dt),
                    then header ``time,observed,predicted``.
MaxSurgeField CSV   header ``id,eta``; eta is decimal meters or ``DRY``
                    (numeric -99999 on input is also mapped to DRY).
CoastPolyline CSV   header ``polyline_id,vertex_index,lon,lat``.

Depth is positive-down bathymetry (water depth positive, land elevation
negative). Surge values are free-surface elevation, positive up. All times
are UTC epoch seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateId,
    LengthMismatch,
    MissingFile,
    NonFinite,
    NonUniformSampling,
    OutOfBounds,
    ParseError,
    ShapeMismatch,
    UnknownVariable,
)

FORCING_VARIABLES = ("windx", "windy", "pressure", "iceaf")
DRY_TOKEN = "DRY"
DRY_NUMERIC = -99999.0


def fmt(x: float) -> str:
    """Canonical decimal rendering of a float (round-trips exactly)."""
    return repr(float(x))


def parse_time(token: str, line: int | None = None) -> float:
    """Parse an epoch-seconds number or an ISO-8601 timestamp to epoch seconds."""
    token = token.strip()
    try:
        return float(token)
    except ValueError:
        pass
    try:
        iso = token.replace("Z", "+00:00")
        stamp = datetime.fromisoformat(iso)
    except ValueError:
        raise ParseError(f"unparseable time {token!r}", line) from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def _read_text(path) -> str:
    p = Path(path)
    if not p.exists():
        raise MissingFile(p)
    return p.read_text()


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# PointSet


@dataclass(frozen=True)
class PointSet:
    """Prediction locations: mesh nodes with bathymetry and a coastal flag."""

    ids: np.ndarray        # int64, unique, ascending
    lon: np.ndarray        # degrees in [-180, 180]
    lat: np.ndarray        # degrees in [-90, 90]
    depth: np.ndarray      # meters, positive-down bathymetry
    is_coastal: np.ndarray # bool

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        object.__setattr__(self, "ids", _freeze(ids))
        for name in ("lon", "lat", "depth"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=np.float64)))
        object.__setattr__(self, "is_coastal", _freeze(np.asarray(self.is_coastal, dtype=bool)))
        n = len(self.ids)
        if not all(len(getattr(self, f)) == n for f in ("lon", "lat", "depth", "is_coastal")):
            raise LengthMismatch("point attribute arrays differ in length")
        if n > 1:
            d = np.diff(self.ids)
            if np.any(d == 0):
                raise DuplicateId(int(self.ids[1:][d == 0][0]))
            if np.any(d < 0):
                raise ParseError("point ids must be sorted ascending")
        if np.any(self.lon < -180.0) or np.any(self.lon > 180.0):
            raise ParseError("longitude outside [-180, 180]")
        if np.any(self.lat < -90.0) or np.any(self.lat > 90.0):
            raise ParseError("latitude outside [-90, 90]")
        if not (np.all(np.isfinite(self.lon)) and np.all(np.isfinite(self.lat)) and np.all(np.isfinite(self.depth))):
            raise NonFinite("point set coordinates/depth")

    def __len__(self) -> int:
        return len(self.ids)

    def row_of(self, point_id: int) -> int:
        i = int(np.searchsorted(self.ids, point_id))
        if i >= len(self.ids) or self.ids[i] != point_id:
            raise KeyError(point_id)
        return i

    def subset(self, ids) -> "PointSet":
        rows = [self.row_of(i) for i in ids]
        return PointSet(self.ids[rows], self.lon[rows], self.lat[rows],
                        self.depth[rows], self.is_coastal[rows])


def load_point_set(path) -> PointSet:
    text = _read_text(path)
    lines = text.splitlines()
    if not lines or lines[0].strip() != "id,lon,lat,depth,is_coastal":
        raise ParseError("expected header 'id,lon,lat,depth,is_coastal'", 1)
    rows = []
    seen = set()
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", k)
        try:
            pid = int(parts[0])
            lon, lat, depth = (float(p) for p in parts[1:4])
        except ValueError as e:
            raise ParseError(str(e), k) from None
        if parts[4].strip() not in ("0", "1"):
            raise ParseError(f"is_coastal must be 0 or 1, got {parts[4]!r}", k)
        if pid in seen:
            raise DuplicateId(pid)
        seen.add(pid)
        rows.append((pid, lon, lat, depth, parts[4].strip() == "1"))
    rows.sort(key=lambda r: r[0])
    arr = list(zip(*rows)) if rows else [[], [], [], [], []]
    return PointSet(np.array(arr[0], dtype=np.int64), np.array(arr[1]), np.array(arr[2]),
                    np.array(arr[3]), np.array(arr[4], dtype=bool))


def write_point_set(points: PointSet, path) -> None:
    out = ["id,lon,lat,depth,is_coastal"]
    for i in range(len(points)):
        out.append(f"{int(points.ids[i])},{fmt(points.lon[i])},{fmt(points.lat[i])},"
                   f"{fmt(points.depth[i])},{1 if points.is_coastal[i] else 0}")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# ForcingGrid


@dataclass(frozen=True)
class ForcingGrid:
    """Regular lat-lon gridded time series of meteorological forcing.

    ``variables[name]`` has shape (nt, nlat, nlon); latitude index 0 is the
    southernmost row (lat0), longitude index 0 the westernmost column (lon0).
    """

    lat0: float
    lon0: float
    dlat: float
    dlon: float
    nlat: int
    nlon: int
    t0: float
    dt: float
    nt: int
    variables: dict

    def __post_init__(self):
        if not (self.dlat > 0 and self.dlon > 0 and self.dt > 0):
            raise ParseError("dlat, dlon, dt must all be positive")
        if not (self.nlat >= 1 and self.nlon >= 1 and self.nt >= 1):
            raise ParseError("nlat, nlon, nt must all be >= 1")
        frozen = {}
        for name, frames in self.variables.items():
            if name not in FORCING_VARIABLES:
                raise UnknownVariable(name)
            arr = np.asarray(frames, dtype=np.float64)
            if arr.shape != (self.nt, self.nlat, self.nlon):
                raise ShapeMismatch(
                    f"variable {name!r} has shape {arr.shape}, expected {(self.nt, self.nlat, self.nlon)}")
            if not np.all(np.isfinite(arr)):
                t, i, j = np.argwhere(~np.isfinite(arr))[0]
                raise NonFinite(f"{name}[t={t},lat={i},lon={j}]")
            if name == "iceaf" and (arr.min() < 0.0 or arr.max() > 1.0):
                bad = np.argwhere((arr < 0.0) | (arr > 1.0))[0]
                raise NonFinite(f"iceaf[t={bad[0]},lat={bad[1]},lon={bad[2]}] outside [0,1]")
            frozen[name] = _freeze(arr)
        object.__setattr__(self, "variables", frozen)

    def lats(self) -> np.ndarray:
        return self.lat0 + self.dlat * np.arange(self.nlat)

    def lons(self) -> np.ndarray:
        return self.lon0 + self.dlon * np.arange(self.nlon)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)


_FORCING_HEADER_KEYS = ("lat0", "lon0", "dlat", "dlon", "nlat", "nlon", "t0", "dt", "nt", "variables")


def load_forcing(path) -> ForcingGrid:
    text = _read_text(path)
    lines = text.splitlines()
    header = {}
    body_start = 0
    for k, line in enumerate(lines):
        line = line.strip()
        if "=" not in line:
            raise ParseError("expected key=value header line", k + 1)
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()
        if key.strip() == "variables":
            body_start = k + 1
            break
    missing = [k for k in _FORCING_HEADER_KEYS if k not in header]
    if missing:
        raise ParseError(f"forcing header missing keys: {', '.join(missing)}")
    try:
        lat0, lon0 = float(header["lat0"]), float(header["lon0"])
        dlat, dlon = float(header["dlat"]), float(header["dlon"])
        nlat, nlon, nt = int(header["nlat"]), int(header["nlon"]), int(header["nt"])
        t0, dt = float(header["t0"]), float(header["dt"])
    except ValueError as e:
        raise ParseError(f"bad forcing header value: {e}") from None
    names = [v.strip() for v in header["variables"].split(",") if v.strip()]
    for name in names:
        if name not in FORCING_VARIABLES:
            raise UnknownVariable(name)
    tokens = "\n".join(lines[body_start:]).split()
    per_var = nt * nlat * nlon
    if len(tokens) != per_var * len(names):
        raise ShapeMismatch(
            f"payload has {len(tokens)} values, expected {per_var * len(names)} "
            f"({len(names)} variables x {nt}x{nlat}x{nlon})")
    try:
        flat = np.array(tokens, dtype=np.float64)
    except ValueError as e:
        raise ParseError(f"bad numeric value in forcing payload: {e}") from None
    variables = {}
    for v, name in enumerate(names):
        arr = flat[v * per_var:(v + 1) * per_var].reshape(nt, nlat, nlon)
        variables[name] = arr[:, ::-1, :]  # file rows run north->south
    return ForcingGrid(lat0, lon0, dlat, dlon, nlat, nlon, t0, dt, nt, variables)


def write_forcing(grid: ForcingGrid, path) -> None:
    out = [
        f"lat0={fmt(grid.lat0)}",
        f"lon0={fmt(grid.lon0)}",
        f"dlat={fmt(grid.dlat)}",
        f"dlon={fmt(grid.dlon)}",
        f"nlat={grid.nlat}",
        f"nlon={grid.nlon}",
        f"t0={fmt(grid.t0)}",
        f"dt={fmt(grid.dt)}",
        f"nt={grid.nt}",
        "variables=" + ",".join(grid.variables),
    ]
    for name in grid.variables:
        frames = grid.variables[name][:, ::-1, :]  # north->south on disk
        for t in range(grid.nt):
            for i in range(grid.nlat):
                out.append(" ".join(fmt(v) for v in frames[t, i]))
    Path(path).write_text("\n".join(out) + "\n")


def sample_forcing(grid: ForcingGrid, var: str, lon: float, lat: float, t: float) -> float:
    """Point value of a gridded variable: bilinear in space, linear in time.

    No extrapolation: queries outside the grid's spatial or temporal extent
    raise :class:`OutOfBounds`.
    """
    if var not in grid.variables:
        raise UnknownVariable(var)
    frames = grid.variables[var]

    def axis_locate(x, x0, step, n, label):
        hi = x0 + step * (n - 1)
        if x < x0 or x > hi:
            raise OutOfBounds(f"{label}={x!r} outside [{x0!r}, {hi!r}]")
        if n == 1:
            return 0, 0.0
        pos = (x - x0) / step
        i = min(int(math.floor(pos)), n - 2)
        return i, pos - i

    it, wt = axis_locate(t, grid.t0, grid.dt, grid.nt, "t")
    ilat, wlat = axis_locate(lat, grid.lat0, grid.dlat, grid.nlat, "lat")
    ilon, wlon = axis_locate(lon, grid.lon0, grid.dlon, grid.nlon, "lon")

    def bilinear(frame):
        i1 = min(ilat + 1, grid.nlat - 1)
        j1 = min(ilon + 1, grid.nlon - 1)
        return ((1 - wlat) * (1 - wlon) * frame[ilat, ilon]
                + (1 - wlat) * wlon * frame[ilat, j1]
                + wlat * (1 - wlon) * frame[i1, ilon]
                + wlat * wlon * frame[i1, j1])

    v0 = bilinear(frames[it])
    if wt == 0.0:
        return float(v0)
    v1 = bilinear(frames[min(it + 1, grid.nt - 1)])
    return float((1 - wt) * v0 + wt * v1)


# ---------------------------------------------------------------------------
# StormTrack


@dataclass(frozen=True)
class StormTrack:
    """Best-track eye positions, strictly increasing in time."""

    times: np.ndarray
    lon: np.ndarray
    lat: np.ndarray

    def __post_init__(self):
        for name in ("times", "lon", "lat"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=np.float64)))
        if not (len(self.times) == len(self.lon) == len(self.lat)):
            raise LengthMismatch("track arrays differ in length")
        if len(self.times) < 2:
            raise ParseError("storm track needs at least 2 samples")
        if np.any(np.diff(self.times) <= 0):
            raise ParseError("track times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


def load_storm_track(path) -> StormTrack:
    lines = _read_text(path).splitlines()
    if not lines or lines[0].strip() != "time,lon,lat":
        raise ParseError("expected header 'time,lon,lat'", 1)
    times, lon, lat = [], [], []
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"expected 3 fields, got {len(parts)}", k)
        times.append(parse_time(parts[0], k))
        try:
            lon.append(float(parts[1]))
            lat.append(float(parts[2]))
        except ValueError as e:
            raise ParseError(str(e), k) from None
    return StormTrack(np.array(times), np.array(lon), np.array(lat))


def write_storm_track(track: StormTrack, path) -> None:
    out = ["time,lon,lat"]
    for i in range(len(track)):
        out.append(f"{fmt(track.times[i])},{fmt(track.lon[i])},{fmt(track.lat[i])}")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# GaugeSeries


@dataclass(frozen=True)
class GaugeSeries:
    """Observed and tide-predicted water levels at one station."""

    station_id: str
    lon: float
    lat: float
    times: np.ndarray
    observed: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        for name in ("times", "observed", "predicted"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=np.float64)))
        if not (len(self.times) == len(self.observed) == len(self.predicted)):
            raise LengthMismatch("gauge series arrays differ in length")
        if len(self.times) >= 2:
            steps = np.diff(self.times)
            if steps[0] <= 0 or np.any(np.abs(steps - steps[0]) > 1e-6 * abs(steps[0])):
                raise NonUniformSampling(f"gauge {self.station_id}: times are not uniformly spaced")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return float(self.times[1] - self.times[0])


def load_gauge_series(path) -> GaugeSeries:
    lines = _read_text(path).splitlines()
    meta = {}
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        body = lines[k][1:].strip()
        if "=" in body:
            key, value = body.split("=", 1)
            meta[key.strip()] = value.strip()
        k += 1
    for key in ("station_id", "lon", "lat", "dt"):
        if key not in meta:
            raise ParseError(f"gauge header missing '# {key}=...' line")
    if k >= len(lines) or lines[k].strip() != "time,observed,predicted":
        raise ParseError("expected header 'time,observed,predicted'", k + 1)
    times, obs, pred = [], [], []
    for j, line in enumerate(lines[k + 1:], start=k + 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"expected 3 fields, got {len(parts)}", j)
        times.append(parse_time(parts[0], j))
        try:
            obs.append(float(parts[1]))
            pred.append(float(parts[2]))
        except ValueError as e:
            raise ParseError(str(e), j) from None
    return GaugeSeries(meta["station_id"], float(meta["lon"]), float(meta["lat"]),
                       np.array(times), np.array(obs), np.array(pred))


def write_gauge_series(g: GaugeSeries, path) -> None:
    out = [
        f"# station_id={g.station_id}",
        f"# lon={fmt(g.lon)}",
        f"# lat={fmt(g.lat)}",
        f"# dt={fmt(g.dt)}",
        "time,observed,predicted",
    ]
    for i in range(len(g)):
        out.append(f"{fmt(g.times[i])},{fmt(g.observed[i])},{fmt(g.predicted[i])}")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# MaxSurgeField


@dataclass(frozen=True)
class MaxSurgeField:
    """Peak surge per point id; NaN encodes the DRY sentinel."""

    ids: np.ndarray  # int64, unique ascending
    eta: np.ndarray  # float64, NaN where dry

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        eta = np.asarray(self.eta, dtype=np.float64)
        if len(ids) != len(eta):
            raise LengthMismatch("surge field arrays differ in length")
        if len(ids) > 1:
            d = np.diff(ids)
            if np.any(d == 0):
                raise DuplicateId(int(ids[1:][d == 0][0]))
            if np.any(d < 0):
                order = np.argsort(ids, kind="stable")
                ids, eta = ids[order], eta[order]
        if np.any(np.isinf(eta)):
            raise NonFinite("surge field eta")
        object.__setattr__(self, "ids", _freeze(ids))
        object.__setattr__(self, "eta", _freeze(eta))

    def __len__(self) -> int:
        return len(self.ids)

    def value_for(self, point_id: int) -> float:
        """Surge at a point; NaN means DRY. KeyError when the id is absent."""
        i = int(np.searchsorted(self.ids, point_id))
        if i >= len(self.ids) or self.ids[i] != point_id:
            raise KeyError(point_id)
        return float(self.eta[i])

    def check_covers(self, points: PointSet) -> None:
        missing = np.setdiff1d(points.ids, self.ids)
        if len(missing):
            raise ParseError(f"surge field missing point ids {missing[:5].tolist()}")


def load_max_surge(path) -> MaxSurgeField:
    lines = _read_text(path).splitlines()
    if not lines or lines[0].strip() != "id,eta":
        raise ParseError("expected header 'id,eta'", 1)
    ids, eta = [], []
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", k)
        try:
            ids.append(int(parts[0]))
        except ValueError as e:
            raise ParseError(str(e), k) from None
        tok = parts[1].strip()
        if tok == DRY_TOKEN:
            eta.append(math.nan)
        else:
            try:
                v = float(tok)
            except ValueError as e:
                raise ParseError(str(e), k) from None
            eta.append(math.nan if v == DRY_NUMERIC else v)
    return MaxSurgeField(np.array(ids, dtype=np.int64), np.array(eta))


def write_max_surge(f: MaxSurgeField, path) -> None:
    out = ["id,eta"]
    for i in range(len(f)):
        v = f.eta[i]
        out.append(f"{int(f.ids[i])},{DRY_TOKEN if math.isnan(v) else fmt(v)}")
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# CoastPolyline


@dataclass(frozen=True)
class CoastPolyline:
    """One or more open polylines approximating the coastline."""

    polylines: tuple = field(default_factory=tuple)  # tuple of (k, 2) lon/lat arrays

    def __post_init__(self):
        frozen = tuple(_freeze(np.asarray(p, dtype=np.float64).reshape(-1, 2)) for p in self.polylines)
        object.__setattr__(self, "polylines", frozen)

    def __len__(self) -> int:
        return len(self.polylines)


def load_coast(path) -> CoastPolyline:
    lines = _read_text(path).splitlines()
    if not lines or lines[0].strip() != "polyline_id,vertex_index,lon,lat":
        raise ParseError("expected header 'polyline_id,vertex_index,lon,lat'", 1)
    verts = {}
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", k)
        try:
            pid, vidx = int(parts[0]), int(parts[1])
            lon, lat = float(parts[2]), float(parts[3])
        except ValueError as e:
            raise ParseError(str(e), k) from None
        verts.setdefault(pid, []).append((vidx, lon, lat))
    polys = []
    for pid in sorted(verts):
        rows = sorted(verts[pid])
        if len(rows) < 2:
            raise ParseError(f"polyline {pid} has fewer than 2 vertices")
        polys.append(np.array([(lon, lat) for _, lon, lat in rows]))
    return CoastPolyline(tuple(polys))


def write_coast(coast: CoastPolyline, path) -> None:
    out = ["polyline_id,vertex_index,lon,lat"]
    for pid, poly in enumerate(coast.polylines):
        for vidx, (lon, lat) in enumerate(poly):
            out.append(f"{pid},{vidx},{fmt(lon)},{fmt(lat)}")
    Path(path).write_text("\n".join(out) + "\n")
