import math

import numpy as np
import pytest

from surgekit import tides
from surgekit.errors import LengthMismatch, NonFinite, ParseError
from surgekit.ingest import GaugeSeries


def test_speeds_match_astronomical_derivation():
    """Re-derive each constituent speed from the fundamental rates.

    T: rotation of the mean sun (15 deg/hr exactly), s: moon's mean longitude,
    h: sun's mean longitude, p: lunar perigee. Published values in deg/hr.
    """
    T, s, h, p = 15.0, 0.54901653, 0.04106864, 0.00464183
    derived = {
        "M2": 2 * T - 2 * s + 2 * h,
        "S2": 2 * T,
        "N2": 2 * T - 3 * s + 2 * h + p,
        "K2": 2 * T + 2 * h,
        "O1": T - 2 * s + h,
        "K1": T + h,
        "P1": T - h,
        "Q1": T - 3 * s + h + p,
    }
    for name, speed in tides.SPEEDS_DEG_PER_HOUR.items():
        assert derived[name] == pytest.approx(speed, abs=5e-7), name


def test_single_constituent_at_reference_epoch():
    h = tides.HarmonicSet({"M2": 1.0}, {"M2": 0.0})
    assert tides.predict_tide(h, [1000.0], t_ref=1000.0)[0] == 1.0


def test_quarter_period_of_30_deg_per_hour():
    h = tides.HarmonicSet({"S2": 1.0}, {"S2": 0.0})  # S2 is exactly 30 deg/hr
    t_ref = 5000.0
    out = tides.predict_tide(h, [t_ref + 3 * 3600.0], t_ref=t_ref)
    assert out[0] == pytest.approx(0.0, abs=1e-12)


def test_eight_constituents_match_summation_oracle(rng):
    amps = {c: float(rng.uniform(0, 2)) for c in tides.CONSTITUENTS}
    phases = {c: float(rng.uniform(0, 360)) for c in tides.CONSTITUENTS}
    h = tides.HarmonicSet(amps, phases)
    t_ref = 1.6e9
    times = t_ref + rng.uniform(-1e7, 1e7, 100)
    got = tides.predict_tide(h, times, t_ref)
    for t, value in zip(times, got):
        # independent term-by-term summation
        total = 0.0
        for c in tides.CONSTITUENTS:
            omega = tides.SPEEDS_DEG_PER_HOUR[c] * math.pi / (180 * 3600)
            total += amps[c] * math.cos(omega * (t - t_ref) - math.radians(phases[c]))
        assert value == pytest.approx(total, abs=1e-12)


def test_linearity_in_amplitudes(rng):
    amps = {c: float(rng.uniform(0, 1)) for c in tides.CONSTITUENTS}
    phases = {c: float(rng.uniform(0, 360)) for c in tides.CONSTITUENTS}
    times = rng.uniform(0, 1e6, 50)
    one = tides.predict_tide(tides.HarmonicSet(amps, phases), times, 0.0)
    scaled = tides.predict_tide(
        tides.HarmonicSet({c: 3.0 * a for c, a in amps.items()}, phases), times, 0.0)
    assert np.allclose(scaled, 3.0 * one, atol=1e-12)


def test_single_constituent_periodicity():
    for name, speed in tides.SPEEDS_DEG_PER_HOUR.items():
        h = tides.HarmonicSet({name: 1.3}, {name: 77.0})
        period_s = 360.0 / speed * 3600.0
        a = tides.predict_tide(h, [123.0], 0.0)[0]
        b = tides.predict_tide(h, [123.0 + period_s], 0.0)[0]
        assert a == pytest.approx(b, abs=1e-9)


def test_residual_cases(rng):
    times = np.arange(10) * 3600.0
    pred = rng.normal(0, 0.5, 10)
    g_equal = GaugeSeries("a", 0.0, 0.0, times, pred.copy(), pred.copy())
    assert np.all(tides.residual(g_equal) == 0.0)

    g_offset = GaugeSeries("a", 0.0, 0.0, times, pred + 0.5, pred.copy())
    assert np.allclose(tides.residual(g_offset), 0.5, atol=1e-15)

    obs = rng.normal(0, 1, 10)
    g_random = GaugeSeries("a", 0.0, 0.0, times, obs, pred)
    expect = [obs[i] - pred[i] for i in range(10)]  # elementwise oracle
    assert tides.residual(g_random).tolist() == expect


def test_residual_of_predicted_tide_is_zero(rng):
    h = tides.HarmonicSet({"M2": 0.9, "K1": 0.4}, {"M2": 10.0, "K1": 200.0})
    times = np.arange(48) * 3600.0
    eta = tides.predict_tide(h, times, 0.0)
    g = GaugeSeries("a", 0.0, 0.0, times, eta, eta)
    assert np.all(tides.residual(g) == 0.0)


def test_residual_length_mismatch():
    class Fake:
        observed = np.zeros(3)
        predicted = np.zeros(4)

    with pytest.raises(LengthMismatch):
        tides.residual(Fake())


def test_harmonic_set_validation():
    with pytest.raises(ParseError):
        tides.HarmonicSet({"XX": 1.0}, {})
    with pytest.raises(NonFinite):
        tides.HarmonicSet({"M2": -0.2}, {"M2": 0.0})
    h = tides.HarmonicSet({"M2": 1.0}, {"M2": 400.0})
    assert h.phase["M2"] == pytest.approx(40.0)  # normalized into [0, 360)


def test_harmonics_file_round_trip(tmp_path, rng):
    sets = {}
    for pid in (3, 7, 11):
        amps = {c: round(float(rng.uniform(0, 1)), 6) for c in tides.CONSTITUENTS}
        phases = {c: round(float(rng.uniform(0, 360)), 6) for c in tides.CONSTITUENTS}
        sets[pid] = tides.HarmonicSet(amps, phases)
    path = tmp_path / "h.csv"
    tides.write_harmonics(sets, path)
    back = tides.load_harmonics(path)
    assert sorted(back) == [3, 7, 11]
    for pid in sets:
        assert back[pid].amplitude == sets[pid].amplitude
        assert back[pid].phase == sets[pid].phase
