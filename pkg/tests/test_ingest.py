import numpy as np
import pytest

from surgekit import ingest
from surgekit.errors import (
    DuplicateId,
    NonFinite,
    NonUniformSampling,
    OutOfBounds,
    ParseError,
    ShapeMismatch,
    SurgeError,
    UnknownVariable,
)


def test_point_set_two_row_parse(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("id,lon,lat,depth,is_coastal\n1,-94.5,29.3,5.2,1\n2,-94.6,29.4,0.8,1\n")
    ps = ingest.load_point_set(p)
    assert len(ps) == 2
    assert ps.ids.tolist() == [1, 2]
    assert ps.lon.tolist() == [-94.5, -94.6]
    assert ps.is_coastal.all()


def test_point_set_duplicate_id(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("id,lon,lat,depth,is_coastal\n7,-94.5,29.3,5.2,1\n7,-94.6,29.4,0.8,0\n")
    with pytest.raises(DuplicateId) as e:
        ingest.load_point_set(p)
    assert e.value.point_id == 7


def test_point_set_round_trip_random(tmp_path, rng):
    n = 100
    ids = np.sort(rng.choice(10000, size=n, replace=False)).astype(np.int64)
    ps = ingest.PointSet(ids, rng.uniform(-180, 180, n), rng.uniform(-90, 90, n),
                         rng.normal(10, 20, n), rng.integers(0, 2, n).astype(bool))
    path = tmp_path / "pts.csv"
    ingest.write_point_set(ps, path)
    back = ingest.load_point_set(path)
    # field-by-field oracle comparison
    assert back.ids.tolist() == ps.ids.tolist()
    assert back.lon.tolist() == ps.lon.tolist()
    assert back.lat.tolist() == ps.lat.tolist()
    assert back.depth.tolist() == ps.depth.tolist()
    assert back.is_coastal.tolist() == ps.is_coastal.tolist()
    # canonical files re-serialize byte-identically
    first = path.read_bytes()
    ingest.write_point_set(back, path)
    assert path.read_bytes() == first


def test_point_set_rejects_malformed(tmp_path):
    cases = [
        "id,lon,lat,depth,is_coastal\n1,-94.5,29.3,5.2\n",      # missing field
        "id,lon,lat,depth,is_coastal\n1,abc,29.3,5.2,1\n",       # bad float
        "id,lon,lat,depth,is_coastal\n1,-94.5,29.3,5.2,2\n",     # bad flag
        "id,lon,lat,depth,is_coastal\n1,-194.5,29.3,5.2,1\n",    # lon range
        "wrong,header\n",
    ]
    for text in cases:
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(SurgeError):
            ingest.load_point_set(p)


def test_point_set_missing_file(tmp_path):
    with pytest.raises(ingest.MissingFile):
        ingest.load_point_set(tmp_path / "nope.csv")


# ---------------------------------------------------------------------------
# ForcingGrid


def test_forcing_single_cell(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("lat0=29.0\nlon0=-95.0\ndlat=0.5\ndlon=0.5\nnlat=1\nnlon=1\n"
                 "t0=0.0\ndt=900.0\nnt=1\nvariables=windx\n3.0\n")
    g = ingest.load_forcing(p)
    assert g.variables["windx"][0, 0, 0] == 3.0
    assert ingest.sample_forcing(g, "windx", -95.0, 29.0, 0.0) == 3.0


def test_forcing_shape_mismatch(tmp_path):
    p = tmp_path / "f.txt"
    # header says nt=4 but only 3 frames of payload
    frames = "\n".join("1.0" for _ in range(3))
    p.write_text("lat0=29.0\nlon0=-95.0\ndlat=0.5\ndlon=0.5\nnlat=1\nnlon=1\n"
                 f"t0=0.0\ndt=900.0\nnt=4\nvariables=windx\n{frames}\n")
    with pytest.raises(ShapeMismatch):
        ingest.load_forcing(p)


def test_forcing_iceaf_range(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("lat0=29.0\nlon0=-95.0\ndlat=0.5\ndlon=0.5\nnlat=1\nnlon=1\n"
                 "t0=0.0\ndt=900.0\nnt=1\nvariables=iceaf\n1.5\n")
    with pytest.raises(NonFinite):
        ingest.load_forcing(p)


def test_forcing_unknown_variable(tmp_path):
    p = tmp_path / "f.txt"
    p.write_text("lat0=29.0\nlon0=-95.0\ndlat=0.5\ndlon=0.5\nnlat=1\nnlon=1\n"
                 "t0=0.0\ndt=900.0\nnt=1\nvariables=gusts\n3.0\n")
    with pytest.raises(UnknownVariable):
        ingest.load_forcing(p)


def test_forcing_nonfinite_payload(small_grid):
    bad = np.array(small_grid.variables["windx"])
    bad[0, 0, 0] = np.nan
    with pytest.raises(NonFinite):
        ingest.ForcingGrid(small_grid.lat0, small_grid.lon0, small_grid.dlat, small_grid.dlon,
                           small_grid.nlat, small_grid.nlon, small_grid.t0, small_grid.dt,
                           small_grid.nt, {"windx": bad})


def test_forcing_round_trip(tmp_path, small_grid):
    path = tmp_path / "f.txt"
    ingest.write_forcing(small_grid, path)
    back = ingest.load_forcing(path)
    for name, arr in small_grid.variables.items():
        assert np.array_equal(back.variables[name], arr)
    assert (back.lat0, back.lon0, back.nt) == (small_grid.lat0, small_grid.lon0, small_grid.nt)
    first = path.read_bytes()
    ingest.write_forcing(back, path)
    assert path.read_bytes() == first


def test_forcing_rows_written_north_to_south(tmp_path):
    # two latitude rows: memory index 0 is south; the file must lead with north
    arr = np.array([[[1.0, 2.0], [3.0, 4.0]]])  # south row (1,2), north row (3,4)
    g = ingest.ForcingGrid(29.0, -95.0, 0.5, 0.5, 2, 2, 0.0, 900.0, 1, {"windx": arr})
    path = tmp_path / "f.txt"
    ingest.write_forcing(g, path)
    rows = path.read_text().splitlines()[-2:]
    assert rows == ["3.0 4.0", "1.0 2.0"]


def test_sample_forcing_exact_on_nodes(small_grid):
    for (it, i, j) in [(0, 0, 0), (2, 1, 3), (4, 2, 2)]:
        lon = small_grid.lon0 + j * small_grid.dlon
        lat = small_grid.lat0 + i * small_grid.dlat
        t = small_grid.t0 + it * small_grid.dt
        assert ingest.sample_forcing(small_grid, "windx", lon, lat, t) == \
            small_grid.variables["windx"][it, i, j]


def test_sample_forcing_axis_midpoint_linearity(small_grid):
    v = small_grid.variables["windy"]
    # midpoint of two lon-neighbors at a fixed node time
    lat = small_grid.lat0 + 1 * small_grid.dlat
    t = small_grid.t0 + 2 * small_grid.dt
    lon_mid = small_grid.lon0 + 0.5 * small_grid.dlon
    assert ingest.sample_forcing(small_grid, "windy", lon_mid, lat, t) == \
        pytest.approx((v[2, 1, 0] + v[2, 1, 1]) / 2, abs=1e-12)
    # midpoint in time at a grid node
    lon = small_grid.lon0
    t_mid = small_grid.t0 + 2.5 * small_grid.dt
    assert ingest.sample_forcing(small_grid, "windy", lon, lat, t_mid) == \
        pytest.approx((v[2, 1, 0] + v[3, 1, 0]) / 2, abs=1e-12)


def test_sample_forcing_matches_weight_sum_oracle(small_grid, rng):
    """Random in-cell queries against the closed-form trilinear weight sum."""
    v = small_grid.variables["pressure"]
    for _ in range(200):
        wlat, wlon, wt = rng.uniform(0, 1, 3)
        i = int(rng.integers(0, small_grid.nlat - 1))
        j = int(rng.integers(0, small_grid.nlon - 1))
        k = int(rng.integers(0, small_grid.nt - 1))
        lon = small_grid.lon0 + (j + wlon) * small_grid.dlon
        lat = small_grid.lat0 + (i + wlat) * small_grid.dlat
        t = small_grid.t0 + (k + wt) * small_grid.dt
        # independent oracle: explicit 8-corner weight sum
        expect = 0.0
        for di, wi in ((0, 1 - wlat), (1, wlat)):
            for dj, wj in ((0, 1 - wlon), (1, wlon)):
                for dk, wk in ((0, 1 - wt), (1, wt)):
                    expect += wi * wj * wk * v[k + dk, i + di, j + dj]
        got = ingest.sample_forcing(small_grid, "pressure", lon, lat, t)
        assert got == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_sample_forcing_out_of_bounds(small_grid):
    with pytest.raises(OutOfBounds):
        ingest.sample_forcing(small_grid, "windx", -200.0, 29.0, 0.0)
    with pytest.raises(OutOfBounds):
        ingest.sample_forcing(small_grid, "windx", -95.0, 29.0, -1.0)
    with pytest.raises(UnknownVariable):
        ingest.sample_forcing(small_grid, "gusts", -95.0, 29.0, 0.0)


# ---------------------------------------------------------------------------
# StormTrack / GaugeSeries / MaxSurgeField / CoastPolyline


def test_track_iso_and_epoch_times(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("time,lon,lat\n2022-09-16T00:00:00Z,-95.0,28.0\n2022-09-16T06:00:00Z,-94.0,28.5\n")
    tr = ingest.load_storm_track(p)
    assert tr.times[1] - tr.times[0] == 6 * 3600
    p2 = tmp_path / "t2.csv"
    ingest.write_storm_track(tr, p2)
    back = ingest.load_storm_track(p2)
    assert np.array_equal(back.times, tr.times)
    assert np.array_equal(back.lon, tr.lon)


def test_track_requires_increasing_times():
    with pytest.raises(ParseError):
        ingest.StormTrack([0.0, 0.0], [-95.0, -94.0], [28.0, 28.5])
    with pytest.raises(ParseError):
        ingest.StormTrack([0.0], [-95.0], [28.0])


def test_gauge_round_trip_and_header(tmp_path, rng):
    times = np.arange(0, 20) * 360.0
    g = ingest.GaugeSeries("9468756", -165.4, 64.5, times,
                           rng.normal(0, 1, 20), rng.normal(0, 1, 20))
    path = tmp_path / "g.csv"
    ingest.write_gauge_series(g, path)
    text = path.read_text()
    assert text.startswith("# station_id=9468756\n")
    back = ingest.load_gauge_series(path)
    assert back.station_id == g.station_id
    assert back.lon == g.lon and back.lat == g.lat
    assert np.array_equal(back.observed, g.observed)
    assert np.array_equal(back.predicted, g.predicted)
    first = path.read_bytes()
    ingest.write_gauge_series(back, path)
    assert path.read_bytes() == first


def test_gauge_rejects_nonuniform_times():
    with pytest.raises(NonUniformSampling):
        ingest.GaugeSeries("x", 0.0, 0.0, [0.0, 100.0, 300.0], [0, 0, 0], [0, 0, 0])


def test_max_surge_dry_tokens(tmp_path):
    p = tmp_path / "eta.csv"
    p.write_text("id,eta\n1,0.52\n2,DRY\n3,-99999\n")
    f = ingest.load_max_surge(p)
    assert f.value_for(1) == 0.52
    assert np.isnan(f.value_for(2))
    assert np.isnan(f.value_for(3))  # numeric sentinel maps to DRY
    out = tmp_path / "eta2.csv"
    ingest.write_max_surge(f, out)
    assert out.read_text() == "id,eta\n1,0.52\n2,DRY\n3,DRY\n"


def test_max_surge_coverage_check(square_points):
    f = ingest.MaxSurgeField(np.array([1, 2, 3]), np.array([0.1, np.nan, 0.3]))
    with pytest.raises(ParseError):
        f.check_covers(square_points)


def test_coast_round_trip(tmp_path):
    coast = ingest.CoastPolyline((np.array([[-94.0, 28.0], [-94.0, 30.0]]),
                                  np.array([[-93.0, 28.0], [-92.5, 29.0], [-93.0, 30.0]])))
    path = tmp_path / "coast.csv"
    ingest.write_coast(coast, path)
    back = ingest.load_coast(path)
    assert len(back) == 2
    assert np.array_equal(back.polylines[1], coast.polylines[1])
    first = path.read_bytes()
    ingest.write_coast(back, path)
    assert path.read_bytes() == first


def test_coast_rejects_single_vertex(tmp_path):
    p = tmp_path / "coast.csv"
    p.write_text("polyline_id,vertex_index,lon,lat\n0,0,-94.0,28.0\n")
    with pytest.raises(ParseError):
        ingest.load_coast(p)


def test_loaders_never_return_corrupt_objects(tmp_path, rng):
    """Fuzz: byte-mangled files either load to valid objects or raise SurgeError."""
    path = tmp_path / "pts.csv"
    base = "id,lon,lat,depth,is_coastal\n1,-94.5,29.3,5.2,1\n2,-94.6,29.4,0.8,1\n"
    for _ in range(100):
        chars = list(base)
        for _ in range(int(rng.integers(1, 4))):
            pos = int(rng.integers(0, len(chars)))
            chars[pos] = chr(int(rng.integers(32, 126)))
        path.write_text("".join(chars))
        try:
            ps = ingest.load_point_set(path)
        except SurgeError:
            continue
        assert len(np.unique(ps.ids)) == len(ps.ids)
        assert np.all(np.diff(ps.ids) > 0) or len(ps) <= 1
        assert np.all(np.abs(ps.lon) <= 180) and np.all(np.abs(ps.lat) <= 90)
