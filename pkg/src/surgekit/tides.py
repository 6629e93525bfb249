"""Harmonic tide synthesis and residual computation.

Only synthesis is provided: given per-location constituent amplitudes and
phases, predict the astronomical tide as a sum of sinusoids. Fitting
constituents from data is out of scope. Nodal corrections and equilibrium
arguments are omitted; phases are relative to a caller-supplied reference
epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, MissingFile, NonFinite, ParseError

# Angular speeds in degrees per mean solar hour. These are fixed astronomical
# constants; tests/test_tides.py re-derives them from the fundamental solar,
# lunar, and perigee rates.
SPEEDS_DEG_PER_HOUR = {
    "M2": 28.9841042,
    "S2": 30.0,
    "N2": 28.4397295,
    "K2": 30.0821373,
    "O1": 13.9430356,
    "K1": 15.0410686,
    "P1": 14.9589314,
    "Q1": 13.3986609,
}

CONSTITUENTS = tuple(SPEEDS_DEG_PER_HOUR)


@dataclass(frozen=True)
class HarmonicSet:
    """Constituent amplitudes (m) and phases (deg) at one location."""

    amplitude: dict
    phase: dict

    def __post_init__(self):
        amp, ph = {}, {}
        for name, a in self.amplitude.items():
            if name not in SPEEDS_DEG_PER_HOUR:
                raise ParseError(f"unknown tidal constituent {name!r}")
            a = float(a)
            if not math.isfinite(a) or a < 0:
                raise NonFinite(f"amplitude[{name}]")
            amp[name] = a
            ph[name] = float(self.phase.get(name, 0.0)) % 360.0
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "phase", ph)

    def amplitude_vector(self) -> np.ndarray:
        """Amplitudes in canonical constituent order; 0 where absent."""
        return np.array([self.amplitude.get(c, 0.0) for c in CONSTITUENTS])


def predict_tide(h: HarmonicSet, times, t_ref: float) -> np.ndarray:
    """Tide elevation sum_k A_k cos(w_k (t - t_ref) - phi_k) in meters.

    ``times`` are epoch seconds; ``t_ref`` is the epoch the phases refer to.
    """
    t = np.asarray(times, dtype=np.float64)
    eta = np.zeros_like(t)
    for name, amp in h.amplitude.items():
        omega = SPEEDS_DEG_PER_HOUR[name] * math.pi / (180.0 * 3600.0)  # rad/s
        phi = math.radians(h.phase[name])
        eta = eta + amp * np.cos(omega * (t - t_ref) - phi)
    return eta


def residual(gauge) -> np.ndarray:
    """Observed minus tide-predicted water level, elementwise."""
    obs = np.asarray(gauge.observed, dtype=np.float64)
    pred = np.asarray(gauge.predicted, dtype=np.float64)
    if obs.shape != pred.shape:
        raise LengthMismatch("observed and predicted lengths differ")
    return obs - pred


# ---------------------------------------------------------------------------
# Harmonics file: one row per (point, constituent).


def load_harmonics(path) -> dict:
    """Read a 'point_id,constituent,amplitude,phase' CSV into {id: HarmonicSet}."""
    p = Path(path)
    if not p.exists():
        raise MissingFile(p)
    lines = p.read_text().splitlines()
    if not lines or lines[0].strip() != "point_id,constituent,amplitude,phase":
        raise ParseError("expected header 'point_id,constituent,amplitude,phase'", 1)
    amp, ph = {}, {}
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", k)
        try:
            pid = int(parts[0])
            a, g = float(parts[2]), float(parts[3])
        except ValueError as e:
            raise ParseError(str(e), k) from None
        name = parts[1].strip()
        if name not in SPEEDS_DEG_PER_HOUR:
            raise ParseError(f"unknown tidal constituent {name!r}", k)
        amp.setdefault(pid, {})[name] = a
        ph.setdefault(pid, {})[name] = g
    return {pid: HarmonicSet(amp[pid], ph[pid]) for pid in sorted(amp)}


def write_harmonics(sets: dict, path) -> None:
    from .ingest import fmt

    out = ["point_id,constituent,amplitude,phase"]
    for pid in sorted(sets):
        h = sets[pid]
        for name in CONSTITUENTS:
            if name in h.amplitude:
                out.append(f"{pid},{name},{fmt(h.amplitude[name])},{fmt(h.phase[name])}")
    Path(path).write_text("\n".join(out) + "\n")
