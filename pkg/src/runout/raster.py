"""Raster data model, file I/O, and terrain derivative computation.

Grids are row-major from the north-west corner: row index grows southward,
column index grows eastward. The x axis follows columns and the y axis
follows rows, so all finite differences below are taken in grid coordinates
scaled by the cell size.

The native container is the ``rfg`` format: an ASCII magic line ``RFG1``,
one compact JSON header line, then rows*cols IEEE-754 binary32 little-endian
values. Writing is canonical (fixed key order, no whitespace), so a file
written by :func:`write_raster` round-trips bit-exactly through
:func:`read_raster`. ESRI ASCII grids are accepted for import only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import GeometryError, ParameterError, RasterFormatError, TruncationError

_RFG_MAGIC = b"RFG1\n"
_HEADER_KEYS = ("rows", "cols", "cell_size", "origin_x", "origin_y", "nodata")

DEFAULT_CELL_SIZE = 30.0
DEFAULT_NODATA = -9999.0


@dataclass(frozen=True)
class GridGeo:
    """Geometry of a regular grid anchored at its north-west corner."""

    rows: int
    cols: int
    cell_size: float = DEFAULT_CELL_SIZE
    origin_x: float = 0.0
    origin_y: float = 0.0
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise GeometryError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if not self.cell_size > 0:
            raise ParameterError(f"cell_size must be > 0, got {self.cell_size}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size


@dataclass
class RasterField:
    """A 2-D float field bound to a grid geometry.

    ``values`` has shape ``(rows, cols)`` and must hold no NaN/Inf; the
    nodata sentinel is an ordinary finite value.
    """

    geo: GridGeo
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.geo.shape:
            raise GeometryError(
                f"values shape {self.values.shape} does not match geometry {self.geo.shape}"
            )
        if not np.isfinite(self.values).all():
            raise RasterFormatError("raster values contain NaN or Inf")

    def with_values(self, values: np.ndarray) -> "RasterField":
        """Same geometry, new values."""
        return RasterField(self.geo, values)

    def total_volume(self) -> float:
        """Sum of values times cell area (m^3 for thickness fields)."""
        return float(self.values.sum() * self.geo.cell_area)


@dataclass
class TerrainDerivatives:
    """First- and second-order terrain fields derived from a DEM.

    ``grad_x``/``grad_y`` are dimensionless elevation gradients along the
    column/row axes. ``sin_alpha_x``, ``sin_alpha_y`` and ``cos_alpha`` come
    from the surface-normal decomposition

        sin a_x = -grad_x / n,  sin a_y = -grad_y / n,  cos a = 1 / n,

    with n = sqrt(1 + grad_x^2 + grad_y^2), so the signed sines point
    downslope. ``aspect_sin``/``aspect_cos`` are the direction cosines of the
    downslope unit vector (zero on flat cells). Curvatures are in 1/m.
    """

    grad_x: np.ndarray
    grad_y: np.ndarray
    slope_deg: np.ndarray
    aspect_sin: np.ndarray
    aspect_cos: np.ndarray
    curv_profile: np.ndarray
    curv_plan: np.ndarray
    sin_alpha_x: np.ndarray
    sin_alpha_y: np.ndarray
    cos_alpha: np.ndarray


# ---------------------------------------------------------------------------
# rfg container
# ---------------------------------------------------------------------------


def _encode_header(geo: GridGeo) -> bytes:
    header = {
        "rows": geo.rows,
        "cols": geo.cols,
        "cell_size": geo.cell_size,
        "origin_x": geo.origin_x,
        "origin_y": geo.origin_y,
        "nodata": geo.nodata,
    }
    return json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n"


def write_raster(fld: RasterField, path) -> None:
    """Write a field as an rfg file (values quantized to binary32)."""
    payload = fld.values.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_RFG_MAGIC)
        fh.write(_encode_header(fld.geo))
        fh.write(payload)


def _read_rfg(path) -> RasterField:
    with open(path, "rb") as fh:
        magic = fh.read(len(_RFG_MAGIC))
        if magic != _RFG_MAGIC:
            raise RasterFormatError(f"{path}: bad magic {magic!r}, expected {_RFG_MAGIC!r}")
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise RasterFormatError(f"{path}: malformed header: {exc}") from exc
        missing = [k for k in _HEADER_KEYS if k not in header]
        if missing:
            raise RasterFormatError(f"{path}: header missing keys {missing}")
        try:
            geo = GridGeo(
                rows=int(header["rows"]),
                cols=int(header["cols"]),
                cell_size=float(header["cell_size"]),
                origin_x=float(header["origin_x"]),
                origin_y=float(header["origin_y"]),
                nodata=float(header["nodata"]),
            )
        except (TypeError, ValueError) as exc:
            raise RasterFormatError(f"{path}: bad header values: {exc}") from exc
        payload = fh.read()
    expected = geo.rows * geo.cols * 4
    if len(payload) != expected:
        raise TruncationError(
            f"{path}: expected {expected} payload bytes for "
            f"{geo.rows}x{geo.cols}, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(geo.shape)
    return RasterField(geo, values)


# ---------------------------------------------------------------------------
# ESRI ASCII import
# ---------------------------------------------------------------------------


def _read_esri_ascii(path) -> RasterField:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    tokens = text.split()
    header: dict[str, float] = {}
    i = 0
    # Header is key/value pairs until the first token that parses as a number.
    while i + 1 < len(tokens):
        key = tokens[i].lower()
        if key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"):
            try:
                header[key] = float(tokens[i + 1])
            except ValueError as exc:
                raise RasterFormatError(f"{path}: bad header value for {key}") from exc
            i += 2
        else:
            break
    for req in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if req not in header:
            raise RasterFormatError(f"{path}: ESRI ASCII header missing {req}")
    rows, cols = int(header["nrows"]), int(header["ncols"])
    cell = header["cellsize"]
    geo = GridGeo(
        rows=rows,
        cols=cols,
        cell_size=cell,
        origin_x=header["xllcorner"],
        # yllcorner is the south-west corner; our origin is the north-west one.
        origin_y=header["yllcorner"] + rows * cell,
        nodata=header.get("nodata_value", DEFAULT_NODATA),
    )
    data = tokens[i:]
    if len(data) != rows * cols:
        raise TruncationError(
            f"{path}: expected {rows * cols} values for {rows}x{cols}, found {len(data)}"
        )
    try:
        values = np.array(data, dtype=np.float64).reshape(rows, cols)
    except ValueError as exc:
        raise RasterFormatError(f"{path}: non-numeric grid values") from exc
    return RasterField(geo, values)


def read_raster(path, format: str | None = None) -> RasterField:
    """Read a raster file.

    ``format`` is ``"rfg"`` or ``"esri-ascii"``; when omitted it is inferred
    from the extension (.rfg binary, .asc/.txt ESRI ASCII).
    """
    if format is None:
        name = str(path).lower()
        format = "esri-ascii" if name.endswith((".asc", ".txt")) else "rfg"
    if format == "rfg":
        return _read_rfg(path)
    if format == "esri-ascii":
        return _read_esri_ascii(path)
    raise ParameterError(f"unknown raster format {format!r}")


# ---------------------------------------------------------------------------
# Smoothing and derivatives
# ---------------------------------------------------------------------------


def gaussian_smooth(fld: RasterField, sigma: float) -> RasterField:
    """Gaussian smoothing with a 3-sigma truncated, renormalized kernel.

    Edges are handled by reflection, which keeps the field mean exact and
    maps constant fields to themselves.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    smoothed = gaussian_filter(fld.values, sigma=sigma, mode="reflect", truncate=3.0)
    return fld.with_values(smoothed)


def terrain_derivatives(dem: RasterField) -> TerrainDerivatives:
    """Slope, aspect, curvature, and the signed slope decomposition of a DEM.

    Gradients use central differences in the interior and one-sided
    differences at the boundary. Adding a constant to the DEM leaves every
    output unchanged.
    """
    rows, cols = dem.geo.shape
    if rows < 3 or cols < 3:
        raise GeometryError(f"need at least a 3x3 grid for derivatives, got {rows}x{cols}")
    dx = dem.geo.cell_size
    z = dem.values
    grad_y, grad_x = np.gradient(z, dx)

    norm = np.sqrt(1.0 + grad_x**2 + grad_y**2)
    sin_ax = -grad_x / norm
    sin_ay = -grad_y / norm
    cos_a = 1.0 / norm

    grad_mag = np.hypot(grad_x, grad_y)
    slope_deg = np.degrees(np.arctan(grad_mag))
    flat = grad_mag == 0.0
    safe = np.where(flat, 1.0, grad_mag)
    aspect_cos = np.where(flat, 0.0, -grad_x / safe)
    aspect_sin = np.where(flat, 0.0, -grad_y / safe)

    # Second derivatives for curvature (p, q, r, s, t notation).
    p, q = grad_x, grad_y
    r = np.gradient(grad_x, dx, axis=1)
    s = np.gradient(grad_x, dx, axis=0)
    t = np.gradient(grad_y, dx, axis=0)
    g2 = p**2 + q**2
    tiny = g2 < 1e-12
    g2_safe = np.where(tiny, 1.0, g2)
    curv_profile = np.where(
        tiny, 0.0, -(r * p**2 + 2.0 * s * p * q + t * q**2) / (g2_safe * (1.0 + g2) ** 1.5)
    )
    curv_plan = np.where(tiny, 0.0, -(t * p**2 - 2.0 * s * p * q + r * q**2) / g2_safe**1.5)

    return TerrainDerivatives(
        grad_x=grad_x,
        grad_y=grad_y,
        slope_deg=slope_deg,
        aspect_sin=aspect_sin,
        aspect_cos=aspect_cos,
        curv_profile=curv_profile,
        curv_plan=curv_plan,
        sin_alpha_x=sin_ax,
        sin_alpha_y=sin_ay,
        cos_alpha=cos_a,
    )


def extract_tiles(
    dem: RasterField,
    tile_px: int = 256,
    min_mean_slope_deg: float = 5.0,
    center_window_px: int = 11,
) -> list[RasterField]:
    """Cut a DEM into non-overlapping tiles and keep the sloped ones.

    Tiles are taken in scan order (left to right, top to bottom); a tile is
    retained iff the mean slope over its central window strictly exceeds
    ``min_mean_slope_deg``. Trailing cells that do not fill a tile are
    dropped.
    """
    rows, cols = dem.geo.shape
    if tile_px < 1 or center_window_px < 1 or center_window_px > tile_px:
        raise ParameterError(
            f"bad tile/window sizes: tile_px={tile_px}, center_window_px={center_window_px}"
        )
    if rows < tile_px or cols < tile_px:
        raise GeometryError(f"DEM {rows}x{cols} smaller than one {tile_px}px tile")

    slope = terrain_derivatives(dem).slope_deg
    off = (tile_px - center_window_px) // 2
    tiles = []
    for r0 in range(0, rows - tile_px + 1, tile_px):
        for c0 in range(0, cols - tile_px + 1, tile_px):
            win = slope[r0 + off : r0 + off + center_window_px,
                        c0 + off : c0 + off + center_window_px]
            if win.mean() > min_mean_slope_deg:
                geo = GridGeo(
                    rows=tile_px,
                    cols=tile_px,
                    cell_size=dem.geo.cell_size,
                    origin_x=dem.geo.origin_x + c0 * dem.geo.cell_size,
                    origin_y=dem.geo.origin_y - r0 * dem.geo.cell_size,
                    nodata=dem.geo.nodata,
                )
                tiles.append(RasterField(geo, dem.values[r0 : r0 + tile_px, c0 : c0 + tile_px].copy()))
    return tiles
