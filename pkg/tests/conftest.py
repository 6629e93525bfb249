import numpy as np
import pytest

from surgekit.ingest import ForcingGrid, PointSet


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid():
    """3 lats x 4 lons x 5 times with distinct, hand-checkable values."""
    nt, nlat, nlon = 5, 3, 4
    base = np.arange(nt * nlat * nlon, dtype=float).reshape(nt, nlat, nlon)
    return ForcingGrid(
        lat0=29.0, lon0=-95.0, dlat=0.5, dlon=0.5, nlat=nlat, nlon=nlon,
        t0=0.0, dt=3600.0, nt=nt,
        variables={
            "windx": base,
            "windy": 2.0 * base + 1.0,
            "pressure": 1013.0 - 0.1 * base,
            "iceaf": np.clip(base / base.max(), 0.0, 1.0),
        },
    )


@pytest.fixture
def square_points():
    ids = np.arange(1, 10)
    lon = np.array([-95.0, -94.5, -94.0] * 3)
    lat = np.repeat([29.0, 29.5, 30.0], 3)
    depth = np.linspace(1.0, 9.0, 9)
    coastal = np.ones(9, dtype=bool)
    return PointSet(ids, lon, lat, depth, coastal)
