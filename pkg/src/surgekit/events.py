"""Surge-event extraction from gauge residuals and cross-station merging.

An event starts as a maximal run of residual samples at or above the trigger
threshold T. Gaps between neighboring runs are bridged when the residual
stays at or above c*T throughout the gap, or when the gap is shorter than the
lull period L. Each resulting event is then padded by the shoulder period S
on both sides (clipped to the series), and a final pass re-merges any events
that came to overlap or touch, so the output is always disjoint and sorted.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, MissingFile, NonUniformSampling, ParseError


@dataclass(frozen=True)
class EventParams:
    """Detection parameters: trigger T (m), continuity c, lull L and shoulder S (h)."""

    trigger: float = 0.3
    continuity: float = 0.5
    lull_hours: float = 6.0
    shoulder_hours: float = 12.0

    def __post_init__(self):
        if not self.trigger > 0:
            raise ParseError("trigger threshold must be positive")
        if not 0 < self.continuity <= 1:
            raise ParseError("continuity factor must be in (0, 1]")
        if self.lull_hours < 0 or self.shoulder_hours < 0:
            raise ParseError("lull and shoulder periods must be non-negative")


@dataclass(frozen=True)
class SurgeEvent:
    start: float            # epoch seconds, inclusive
    end: float              # epoch seconds, inclusive
    peak_residual: float    # meters
    stations: frozenset = frozenset()

    def overlaps(self, other: "SurgeEvent") -> bool:
        return self.start <= other.end and other.start <= self.end


def _exceedance_runs(mask: np.ndarray):
    """Maximal runs of True as (first, last) inclusive index pairs."""
    runs = []
    i = 0
    n = len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def get_surge_events(residuals, times, p: EventParams, station: str | None = None):
    """Extract positive surge events from a residual series.

    ``times`` must be uniformly spaced and aligned with ``residuals``. Returns
    disjoint events sorted by start time; every sample with residual >= T lies
    inside some returned event.
    """
    r = np.asarray(residuals, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64)
    if r.shape != t.shape:
        raise LengthMismatch("residuals and times differ in length")
    if len(t) >= 2:
        steps = np.diff(t)
        if steps[0] <= 0 or np.any(np.abs(steps - steps[0]) > 1e-6 * abs(steps[0])):
            raise NonUniformSampling("times are not uniformly spaced")
    if len(t) == 0:
        return []
    dt = float(t[1] - t[0]) if len(t) > 1 else 3600.0

    runs = _exceedance_runs(r >= p.trigger)
    if not runs:
        return []

    # Bridge gaps: residual held at >= c*T throughout, or gap shorter than L.
    # A leading gap has no preceding event and is skipped by construction.
    merged = [runs[0]]
    c_level = p.continuity * p.trigger
    for i0, i1 in runs[1:]:
        g0, g1 = merged[-1][1] + 1, i0 - 1
        gap_hours = (g1 - g0 + 1) * dt / 3600.0
        if np.min(r[g0:g1 + 1]) >= c_level or gap_hours < p.lull_hours:
            merged[-1] = (merged[-1][0], i1)
        else:
            merged.append((i0, i1))

    # Shoulder padding (closed interval, clipped to the series), then a final
    # disjointness pass in case shoulders bridged neighboring events.
    pad = p.shoulder_hours * 3600.0
    tol = 1e-6 * dt
    intervals = []
    for i0, i1 in merged:
        j0 = int(np.searchsorted(t, t[i0] - pad - tol, side="left"))
        j1 = int(np.searchsorted(t, t[i1] + pad + tol, side="right")) - 1
        intervals.append((j0, j1))
    disjoint = [intervals[0]]
    for j0, j1 in intervals[1:]:
        if j0 <= disjoint[-1][1] + 1:
            disjoint[-1] = (disjoint[-1][0], max(disjoint[-1][1], j1))
        else:
            disjoint.append((j0, j1))

    stations = frozenset() if station is None else frozenset([station])
    return [
        SurgeEvent(float(t[j0]), float(t[j1]), float(np.max(r[j0:j1 + 1])), stations)
        for j0, j1 in disjoint
    ]


def get_setdown_events(residuals, times, p: EventParams, station: str | None = None):
    """Negative surge (set-down) events, detected on the negated residual.

    ``peak_residual`` of a returned event is the set-down magnitude (positive).
    These are reported separately and excluded from catalogs by default.
    """
    return get_surge_events(-np.asarray(residuals, dtype=np.float64), times, p, station)


def merge_station_events(per_station: dict):
    """Union per-station event lists; overlapping or touching intervals merge.

    A merged event's station set is the union of its constituents and its peak
    is their maximum. Output is disjoint and sorted by start.
    """
    tagged = []
    for station, evs in per_station.items():
        for e in evs:
            stations = e.stations | {station} if station is not None else e.stations
            tagged.append(SurgeEvent(e.start, e.end, e.peak_residual, frozenset(stations)))
    tagged.sort(key=lambda e: (e.start, e.end))
    if not tagged:
        return []
    out = [tagged[0]]
    for e in tagged[1:]:
        last = out[-1]
        if e.start <= last.end:  # touching counts as overlap
            out[-1] = SurgeEvent(last.start, max(last.end, e.end),
                                 max(last.peak_residual, e.peak_residual),
                                 last.stations | e.stations)
        else:
            out.append(e)
    return out


# ---------------------------------------------------------------------------
# Event catalog CSV: event_id,start,end,peak_residual,stations


def write_event_catalog(events, path) -> None:
    from .ingest import fmt

    out = ["event_id,start,end,peak_residual,stations"]
    for k, e in enumerate(sorted(events, key=lambda e: (e.start, e.end))):
        stations = ";".join(sorted(e.stations))
        out.append(f"event_{k:04d},{fmt(e.start)},{fmt(e.end)},{fmt(e.peak_residual)},{stations}")
    Path(path).write_text("\n".join(out) + "\n")


def load_event_catalog(path):
    p = Path(path)
    if not p.exists():
        raise MissingFile(p)
    lines = p.read_text().splitlines()
    if not lines or lines[0].strip() != "event_id,start,end,peak_residual,stations":
        raise ParseError("expected header 'event_id,start,end,peak_residual,stations'", 1)
    events = []
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", k)
        try:
            start, end, peak = float(parts[1]), float(parts[2]), float(parts[3])
        except ValueError as e:
            raise ParseError(str(e), k) from None
        stations = frozenset(s for s in parts[4].split(";") if s)
        events.append(SurgeEvent(start, end, peak, stations))
    return events
