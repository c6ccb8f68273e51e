import numpy as np
import pytest

from runout.raster import GridGeo, RasterField
from runout.synthetic import flat_dem, inclined_plane, valley_dem


@pytest.fixture
def small_flat():
    return flat_dem(32, 32)


@pytest.fixture
def plane10():
    return inclined_plane(64, 64, 10.0)


@pytest.fixture
def small_valley():
    return valley_dem(64, 64)


@pytest.fixture
def random_field():
    rng = np.random.default_rng(7)
    geo = GridGeo(rows=12, cols=9, cell_size=30.0, origin_x=1000.0, origin_y=2000.0)
    return RasterField(geo, rng.random((12, 9)) * 50.0)
