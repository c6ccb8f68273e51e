"""Synthetic terrain builders used by the demos and the test suite."""

from __future__ import annotations

import math

import numpy as np

from .raster import DEFAULT_CELL_SIZE, GridGeo, RasterField


def flat_dem(rows: int, cols: int, elevation: float = 1000.0,
             cell_size: float = DEFAULT_CELL_SIZE) -> RasterField:
    geo = GridGeo(rows=rows, cols=cols, cell_size=cell_size)
    return RasterField(geo, np.full((rows, cols), elevation))


def inclined_plane(rows: int, cols: int, angle_deg: float,
                   cell_size: float = DEFAULT_CELL_SIZE) -> RasterField:
    """Plane dipping toward +x (increasing column index) at ``angle_deg``."""
    geo = GridGeo(rows=rows, cols=cols, cell_size=cell_size)
    drop = math.tan(math.radians(angle_deg)) * cell_size
    x = np.arange(cols, dtype=np.float64)
    z = (cols - 1 - x) * drop
    return RasterField(geo, np.tile(z, (rows, 1)) + 1000.0)


def valley_dem(rows: int, cols: int, channel_slope_deg: float = 12.0,
               wall_slope_deg: float = 20.0,
               cell_size: float = DEFAULT_CELL_SIZE) -> RasterField:
    """V-shaped valley descending toward +x with side walls rising in y.

    A simple channelized terrain: the thalweg runs along the central row,
    dropping at ``channel_slope_deg``; cross-valley walls rise at
    ``wall_slope_deg`` away from it.
    """
    geo = GridGeo(rows=rows, cols=cols, cell_size=cell_size)
    down = math.tan(math.radians(channel_slope_deg)) * cell_size
    up = math.tan(math.radians(wall_slope_deg)) * cell_size
    x = np.arange(cols, dtype=np.float64)
    y = np.arange(rows, dtype=np.float64)
    thalweg = (cols - 1 - x) * down
    wall = np.abs(y - (rows - 1) / 2.0) * up
    return RasterField(geo, thalweg[None, :] + wall[:, None] + 1000.0)


def bumpy_dem(rows: int, cols: int, angle_deg: float = 10.0,
              roughness: float = 3.0, seed: int = 0,
              cell_size: float = DEFAULT_CELL_SIZE) -> RasterField:
    """Inclined plane plus smooth random undulations (for property tests)."""
    base = inclined_plane(rows, cols, angle_deg, cell_size)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((rows, cols))
    # Cheap smoothing with a separable box filter keeps this self-contained.
    for axis in (0, 1):
        kernel = np.ones(5) / 5.0
        noise = np.apply_along_axis(lambda m: np.convolve(m, kernel, mode="same"), axis, noise)
    return base.with_values(base.values + roughness * noise)
