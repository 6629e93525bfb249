"""Desk-scale synthetic corpora with an analytic surge oracle.

Storms are translating parametric vortices (radially decaying rotational wind
and a Gaussian pressure deficit) crossing a straight meridian coast with land
to the east. The truth label at point x is

    eta(x) = max(0, a * W(x) * exp(-d_coast(x) / lambda) - b * depth(x))

where ``W(x)`` is the temporal-max wind magnitude at x computed through the
same temporal-statistics and interpolation code the feature pipeline uses,
``d_coast`` the great-circle coastal distance, and ``depth`` the bathymetry.
Points where the max() clamps at the dry cutoff are marked DRY. Because the
truth depends only on quantities the feature pipeline reconstructs, held-out
accuracy of a trained surrogate is a correctness probe for the whole chain.

Gauge records place one tide-plus-surge bump per storm on a shared timeline,
so event detection and the temporal split can run against the corpus. Tidal
amplitudes are random per point and have no effect on the truth labels (they
exist to exercise the feature-reduction path).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import features as ft
from .errors import ParseError
from .ingest import (
    CoastPolyline,
    ForcingGrid,
    GaugeSeries,
    MaxSurgeField,
    PointSet,
    StormTrack,
    write_coast,
    write_forcing,
    write_gauge_series,
    write_max_surge,
    write_point_set,
    write_storm_track,
)
from .tides import CONSTITUENTS, HarmonicSet, predict_tide, write_harmonics

KM_PER_DEGREE = 111.0  # planar approximation used only inside the generator
STORM_SPACING_S = 4 * 86400.0


@dataclass(frozen=True)
class SynthSpec:
    n_storms: int = 20
    n_points: int = 300
    seed: int = 0
    # forcing grid layout; cell spacing must not exceed the smallest forcing
    # box (0.1 deg) or small-box neighborhoods could come up empty
    nlat: int = 24
    nlon: int = 32
    nt: int = 30
    dlat: float = 0.1
    dlon: float = 0.1
    dt: float = 3600.0
    lat0: float = 27.0
    lon0: float = -95.0
    coast_lon: float = -92.3
    # surge oracle
    wind_to_surge: float = 0.1  # a, meters of surge per m/s of peak wind
    decay_km: float = 60.0      # lambda, e-folding distance from the coast
    depth_coeff: float = 0.05   # b, meters of surge lost per meter of depth
    dry_cutoff: float = 0.0

    def __post_init__(self):
        if self.n_storms < 1 or self.n_points < 1:
            raise ParseError("n_storms and n_points must be positive")
        if self.decay_km <= 0:
            raise ParseError("decay_km must be positive")
        if min(self.nlat, self.nlon, self.nt) < 2:
            raise ParseError("grid dims must be at least 2")


@dataclass
class SynthStorm:
    storm_id: str
    forcing: ForcingGrid
    track: StormTrack
    surge: MaxSurgeField
    t_start: float


@dataclass
class SynthCorpus:
    spec: SynthSpec
    points: PointSet
    coast: CoastPolyline
    harmonics: dict
    storms: list = field(default_factory=list)
    gauges: list = field(default_factory=list)


def oracle_surge(spec: SynthSpec, peak_wind: float, coastal_dist_km: float, depth: float) -> float:
    """The analytic truth formula for one point (NaN means DRY)."""
    eta = max(0.0, spec.wind_to_surge * peak_wind * math.exp(-coastal_dist_km / spec.decay_km)
              - spec.depth_coeff * depth)
    return math.nan if eta <= spec.dry_cutoff else eta


def _make_coast(spec: SynthSpec) -> CoastPolyline:
    # North-to-south meridian; land lies left of the direction of travel (east).
    lat_hi = spec.lat0 + spec.dlat * (spec.nlat - 1)
    lats = np.linspace(lat_hi, spec.lat0, 5)
    return CoastPolyline((np.column_stack([np.full(5, spec.coast_lon), lats]),))


def _make_points(spec: SynthSpec, rng: np.random.Generator, coast: CoastPolyline) -> PointSet:
    lat_hi = spec.lat0 + spec.dlat * (spec.nlat - 1)
    lon_hi = spec.lon0 + spec.dlon * (spec.nlon - 1)
    lon = rng.uniform(spec.coast_lon - 2.0, spec.coast_lon + 0.25, spec.n_points)
    lon = np.clip(lon, spec.lon0 + 0.05, lon_hi - 0.05)
    lat = rng.uniform(spec.lat0 + 0.4, lat_hi - 0.4, spec.n_points)
    west = spec.coast_lon - lon  # positive offshore
    depth = np.where(
        west >= 0,
        np.maximum(0.3, west * KM_PER_DEGREE * 0.15 * (1.0 + 0.1 * np.sin(5.0 * lat))),
        west * KM_PER_DEGREE * 0.05 * (1.0 + 0.1 * np.cos(4.0 * lat)),
    )
    coastal_dist = np.array([ft.coastal_distance_km(lo, la, coast) for lo, la in zip(lon, lat)])
    ids = np.arange(1, spec.n_points + 1, dtype=np.int64)
    return PointSet(ids, np.round(lon, 6), np.round(lat, 6), np.round(depth, 6),
                    coastal_dist <= 120.0)


def _make_storm(spec: SynthSpec, k: int, rng: np.random.Generator) -> tuple:
    """Forcing grid and track for storm k on the shared timeline."""
    t0 = k * STORM_SPACING_S
    lat_hi = spec.lat0 + spec.dlat * (spec.nlat - 1)
    vmax = float(rng.uniform(15.0, 45.0))
    rmax_km = float(rng.uniform(50.0, 110.0))
    lat_s = float(rng.uniform(spec.lat0 + 0.9, lat_hi - 0.9))
    lat_e = float(np.clip(lat_s + rng.uniform(-0.5, 0.5), spec.lat0 + 0.9, lat_hi - 0.9))
    lon_s, lon_e = spec.coast_lon - 3.0, spec.coast_lon + 1.2

    duration = (spec.nt - 1) * spec.dt
    track_t = t0 + np.linspace(0.0, duration, 13)
    frac = np.linspace(0.0, 1.0, 13)
    track = StormTrack(track_t, np.round(lon_s + frac * (lon_e - lon_s), 6),
                       np.round(lat_s + frac * (lat_e - lat_s), 6))

    lats = spec.lat0 + spec.dlat * np.arange(spec.nlat)
    lons = spec.lon0 + spec.dlon * np.arange(spec.nlon)
    lon_m, lat_m = np.meshgrid(lons, lats)
    coslat = np.cos(np.radians(lat_m))

    windx = np.empty((spec.nt, spec.nlat, spec.nlon))
    windy = np.empty_like(windx)
    pressure = np.empty_like(windx)
    for it in range(spec.nt):
        f = it / (spec.nt - 1)
        c_lon = lon_s + f * (lon_e - lon_s)
        c_lat = lat_s + f * (lat_e - lat_s)
        dx = (lon_m - c_lon) * KM_PER_DEGREE * coslat
        dy = (lat_m - c_lat) * KM_PER_DEGREE
        r = np.hypot(dx, dy)
        speed = np.where(r > 0, vmax * (r / rmax_km) * np.exp(1.0 - r / rmax_km), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            tx = np.where(r > 0, -dy / r, 0.0)
            ty = np.where(r > 0, dx / r, 0.0)
        windx[it] = speed * tx
        windy[it] = speed * ty
        pressure[it] = 1013.0 - vmax * np.exp(-((r / (2.0 * rmax_km)) ** 2))

    ice = 0.6 / (1.0 + np.exp(-(lat_m - (spec.lat0 + 0.75 * (lat_hi - spec.lat0))) / 0.3))
    iceaf = np.repeat(np.clip(np.round(ice, 6), 0.0, 1.0)[None, :, :], spec.nt, axis=0)

    grid = ForcingGrid(spec.lat0, spec.lon0, spec.dlat, spec.dlon, spec.nlat, spec.nlon,
                       t0, spec.dt, spec.nt,
                       {"windx": np.round(windx, 6), "windy": np.round(windy, 6),
                        "pressure": np.round(pressure, 6), "iceaf": iceaf})
    return grid, track, vmax


def _labels_for(spec: SynthSpec, grid: ForcingGrid, points: PointSet,
                coastal_dist: np.ndarray) -> MaxSurgeField:
    # Truth uses the feature pipeline's own temporal-max + interpolation code,
    # so recomputing labels from the emitted files reproduces them exactly.
    max_mag = ft.temporal_stats(grid)["max_magnitude"]
    eta = np.empty(len(points))
    for i in range(len(points)):
        w = ft._interp_field(max_mag, grid, float(points.lon[i]), float(points.lat[i]))
        eta[i] = oracle_surge(spec, w, float(coastal_dist[i]), float(points.depth[i]))
    return MaxSurgeField(points.ids, eta)


def _make_gauges(spec: SynthSpec, rng: np.random.Generator, storms: list) -> list:
    lat_hi = spec.lat0 + spec.dlat * (spec.nlat - 1)
    span = lat_hi - spec.lat0
    gauges = []
    horizon = spec.n_storms * STORM_SPACING_S
    t = np.arange(0.0, horizon, 3600.0)
    for s, lat_frac in enumerate((1.0 / 3.0, 2.0 / 3.0)):
        amps = {"M2": 0.3 + 0.1 * s, "K1": 0.15, "O1": 0.08}
        phases = {name: float(rng.uniform(0.0, 360.0)) for name in amps}
        h = HarmonicSet(amps, phases)
        tide = predict_tide(h, t, t_ref=0.0)
        bumps = np.zeros_like(t)
        for k, (storm, vmax) in enumerate(storms):
            center = k * STORM_SPACING_S + 0.714 * (spec.nt - 1) * spec.dt
            amp = 0.35 + 0.5 * (vmax - 15.0) / 30.0
            bumps += amp * np.exp(-((t - center) / (5.0 * 3600.0)) ** 2 / 2.0)
        gauges.append(GaugeSeries(f"station_{s:02d}", spec.coast_lon - 0.05,
                                  spec.lat0 + lat_frac * span, t,
                                  np.round(tide + bumps, 6), np.round(tide, 6)))
    return gauges


def generate(spec: SynthSpec) -> SynthCorpus:
    """Build a full corpus (points, coast, harmonics, storms, gauges) from a seed."""
    seeds = np.random.SeedSequence(spec.seed).spawn(3 + spec.n_storms)
    coast = _make_coast(spec)
    points = _make_points(spec, np.random.default_rng(seeds[0]), coast)
    coastal_dist = np.array([ft.coastal_distance_km(float(lo), float(la), coast)
                             for lo, la in zip(points.lon, points.lat)])

    rng_h = np.random.default_rng(seeds[1])
    harmonics = {}
    for pid in points.ids:
        amps = {c: float(np.round(rng_h.uniform(0.0, 0.5), 6)) for c in CONSTITUENTS}
        phs = {c: float(np.round(rng_h.uniform(0.0, 360.0), 6)) for c in CONSTITUENTS}
        harmonics[int(pid)] = HarmonicSet(amps, phs)

    storms = []
    raw = []
    for k in range(spec.n_storms):
        grid, track, vmax = _make_storm(spec, k, np.random.default_rng(seeds[3 + k]))
        surge = _labels_for(spec, grid, points, coastal_dist)
        storms.append(SynthStorm(f"storm_{k:04d}", grid, track, surge, grid.t0))
        raw.append((grid, vmax))

    gauges = _make_gauges(spec, np.random.default_rng(seeds[2]), raw)
    return SynthCorpus(spec, points, coast, harmonics, storms, gauges)


def write_corpus(corpus: SynthCorpus, out_dir) -> None:
    """Write a corpus in the pipeline's on-disk layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_point_set(corpus.points, out / "points.csv")
    write_coast(corpus.coast, out / "coast.csv")
    write_harmonics(corpus.harmonics, out / "harmonics.csv")
    gauges_dir = out / "gauges"
    gauges_dir.mkdir(exist_ok=True)
    for g in corpus.gauges:
        write_gauge_series(g, gauges_dir / f"{g.station_id}.csv")
    storms_dir = out / "storms"
    storms_dir.mkdir(exist_ok=True)
    for storm in corpus.storms:
        d = storms_dir / storm.storm_id
        d.mkdir(exist_ok=True)
        write_forcing(storm.forcing, d / "forcing.txt")
        write_storm_track(storm.track, d / "track.csv")
        write_max_surge(storm.surge, d / "maxsurge.csv")
    manifest = {
        "kind": "surgekit-synth-corpus",
        "n_storms": corpus.spec.n_storms,
        "n_points": corpus.spec.n_points,
        "seed": corpus.spec.seed,
        "oracle": {
            "wind_to_surge": corpus.spec.wind_to_surge,
            "decay_km": corpus.spec.decay_km,
            "depth_coeff": corpus.spec.depth_coeff,
            "dry_cutoff": corpus.spec.dry_cutoff,
        },
        "storms": [{"storm_id": s.storm_id, "t_start": s.t_start} for s in corpus.storms],
    }
    (out / "corpus.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
