"""Depth-averaged finite-volume integrator for granular free-surface flow.

State lives at cell centres (thickness h and momenta hu, hv); fluxes are
evaluated at cell faces with donor-cell upwinding on the face velocity,
which is the arithmetic mean of the adjacent cell-centre velocities.
Momentum sources are gravity driving along the slope decomposition,
the free-surface pressure gradient, and a resistance half-step combining
a cohesion-controlled yield deceleration, Coulomb friction, and a
velocity-squared turbulent drag.

Two discretization choices matter for behaviour near rest:

* The resistance half-step applies the speed-independent decelerations
  (yield + Coulomb) explicitly with a hard stop - a cell whose velocity
  would reverse within the step is set to exactly zero - while the
  quadratic drag is integrated implicitly in the speed magnitude. The
  implicit form is unconditionally stable for the very small turbulence
  coefficients used here and leaves the analytic onset condition
  g sin(theta) > c/(rho h) exact.
* Face pressures take the wet cell's value across wet/dry faces and domain
  edges, so a resting body of material exerts no spurious thrust on its
  margins; spreading into dry cells happens through advection once the
  interior actually moves.

Boundaries are open: mass crossing a domain edge is removed from the grid
and accumulated into ``outflow_volume``; nothing enters.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GeometryError, NumericalBlowupError, ParameterError
from .raster import RasterField, TerrainDerivatives, terrain_derivatives, write_raster
from .source import PileField

STANDARD_GRAVITY = 9.81


@dataclass(frozen=True)
class MaterialParams:
    """Bulk material properties conditioning a simulation."""

    density_rho: float
    cohesion_c: float
    voellmy_mu: float = 0.0
    voellmy_xi: float = 0.02
    gravity_g: float = STANDARD_GRAVITY

    def __post_init__(self):
        if not self.density_rho > 0:
            raise ParameterError(f"density must be > 0, got {self.density_rho}")
        if self.cohesion_c < 0:
            raise ParameterError(f"cohesion must be >= 0, got {self.cohesion_c}")
        if not self.voellmy_xi > 0:
            raise ParameterError(f"xi must be > 0, got {self.voellmy_xi}")
        if self.voellmy_mu < 0:
            raise ParameterError(f"mu must be >= 0, got {self.voellmy_mu}")


@dataclass(frozen=True)
class SolverConfig:
    """Numerical controls for the explicit integrator."""

    dt_init: float = 0.25
    dt_min: float = 0.05
    cfl_number: float = 0.5
    h_min: float = 5e-4
    v_stop: float = 0.5
    t_max: float = 3600.0
    footprint_threshold: float = 0.05

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init:
            raise ParameterError(f"need 0 < dt_min <= dt_init, got {self.dt_min}, {self.dt_init}")
        if not 0 < self.cfl_number <= 1:
            raise ParameterError(f"cfl_number must be in (0, 1], got {self.cfl_number}")
        if not self.h_min > 0:
            raise ParameterError("h_min must be > 0")
        if not self.v_stop > 0:
            raise ParameterError("v_stop must be > 0")


@dataclass
class FlowState:
    """Conserved fields at cell centres plus clock and outflow ledger."""

    h: np.ndarray
    hu: np.ndarray
    hv: np.ndarray
    t: float = 0.0
    outflow_volume: float = 0.0


@dataclass
class SimResult:
    final_h: RasterField
    footprint: np.ndarray
    displaced_px: int
    stop_time: float
    stop_reason: str  # "velocity" or "t_max"
    outflow_volume: float
    params: MaterialParams
    volume: float
    wall_time_s: float = 0.0


def voellmy_basal_stress(speed, h, p: MaterialParams, cos_alpha=1.0):
    """Basal shear stress: Coulomb part plus velocity-squared turbulent part.

    Returns mu*sigma_z + rho*g*speed^2/xi with sigma_z = rho*g*h*cos_alpha,
    in Pa. The stress acts against the direction of motion.
    """
    sigma_z = p.density_rho * p.gravity_g * h * cos_alpha
    return p.voellmy_mu * sigma_z + p.density_rho * p.gravity_g * speed**2 / p.voellmy_xi


def yield_deceleration(u_vec, h, p: MaterialParams):
    """Yield-stress deceleration vector c/(rho h) opposing motion.

    Returns the zero vector at rest (the direction is undefined there and
    the resisting force is suppressed).
    """
    u, v = u_vec
    speed = np.hypot(u, v)
    if np.isscalar(speed) or speed.ndim == 0:
        if speed == 0.0:
            return (0.0, 0.0)
        mag = p.cohesion_c / (p.density_rho * h)
        return (-mag * u / speed, -mag * v / speed)
    mag = p.cohesion_c / (p.density_rho * np.asarray(h, dtype=float))
    safe = np.where(speed > 0, speed, 1.0)
    scale = np.where(speed > 0, mag / safe, 0.0)
    return (-scale * u, -scale * v)


def adapt_dt(state: FlowState, cfg: SolverConfig, geo, g: float = STANDARD_GRAVITY) -> float:
    """CFL-limited step size, clamped into [dt_min, dt_init]."""
    h = state.h
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_h = np.where(h >= cfg.h_min, h, 1.0)
        u = np.where(h >= cfg.h_min, state.hu / inv_h, 0.0)
        v = np.where(h >= cfg.h_min, state.hv / inv_h, 0.0)
    wave = np.hypot(u, v) + np.sqrt(g * np.maximum(h, 0.0))
    w_max = float(wave.max(initial=0.0))
    if w_max <= 0.0:
        return cfg.dt_init
    return float(min(max(cfg.cfl_number * geo.cell_size / w_max, cfg.dt_min), cfg.dt_init))


def _velocities(h, hu, hv, h_min):
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(h >= h_min, h, 1.0)
        u = np.where(h >= h_min, hu / safe, 0.0)
        v = np.where(h >= h_min, hv / safe, 0.0)
    return u, v


def max_speed(state: FlowState, cfg: SolverConfig) -> float:
    u, v = _velocities(state.h, state.hu, state.hv, cfg.h_min)
    return float(np.hypot(u, v).max(initial=0.0))


def _face_pressure(P, wet, axis):
    """Face pressures: mean across wet-wet faces, wet value at wet/dry faces.

    Returns an array with one extra entry along ``axis`` (domain-edge faces
    carry the edge cell's own pressure, i.e. zero gradient).
    """
    if axis == 1:
        pl, pr = P[:, :-1], P[:, 1:]
        wl, wr = wet[:, :-1], wet[:, 1:]
    else:
        pl, pr = P[:-1, :], P[1:, :]
        wl, wr = wet[:-1, :], wet[1:, :]
    interior = np.where(
        wl & wr, 0.5 * (pl + pr), np.where(wl, pl, np.where(wr, pr, 0.0))
    )
    if axis == 1:
        return np.concatenate([P[:, :1], interior, P[:, -1:]], axis=1)
    return np.concatenate([P[:1, :], interior, P[-1:, :]], axis=0)


def step(
    state: FlowState,
    terrain: TerrainDerivatives,
    geo,
    p: MaterialParams,
    cfg: SolverConfig,
    dt: float,
) -> FlowState:
    """Advance the state by one explicit step of size ``dt``.

    Raises :class:`NumericalBlowupError` if any updated field is non-finite.
    """
    # Non-finite intermediates are tolerated and trapped at the end of the
    # update, so float warnings stay silent here.
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        return _step_core(state, terrain, geo, p, cfg, dt)


def _step_core(state, terrain, geo, p, cfg, dt):
    dx = geo.cell_size
    g = p.gravity_g
    h, hu, hv = state.h, state.hu, state.hv
    wet = h >= cfg.h_min
    u, v = _velocities(h, hu, hv, cfg.h_min)

    # --- upwind fluxes on faces (one extra face per axis for the open edges)
    rows, cols = h.shape
    Fh_x = np.zeros((rows, cols + 1))
    Fhu_x = np.zeros((rows, cols + 1))
    Fhv_x = np.zeros((rows, cols + 1))
    uf = 0.5 * (u[:, :-1] + u[:, 1:])
    left = uf > 0.0
    Fh_x[:, 1:-1] = np.where(left, h[:, :-1], h[:, 1:]) * uf
    Fhu_x[:, 1:-1] = np.where(left, hu[:, :-1], hu[:, 1:]) * uf
    Fhv_x[:, 1:-1] = np.where(left, hv[:, :-1], hv[:, 1:]) * uf
    # Open edges: outgoing only, donor is the edge cell.
    out_l = np.minimum(u[:, 0], 0.0)
    out_r = np.maximum(u[:, -1], 0.0)
    Fh_x[:, 0] = out_l * h[:, 0]
    Fhu_x[:, 0] = out_l * hu[:, 0]
    Fhv_x[:, 0] = out_l * hv[:, 0]
    Fh_x[:, -1] = out_r * h[:, -1]
    Fhu_x[:, -1] = out_r * hu[:, -1]
    Fhv_x[:, -1] = out_r * hv[:, -1]

    Fh_y = np.zeros((rows + 1, cols))
    Fhu_y = np.zeros((rows + 1, cols))
    Fhv_y = np.zeros((rows + 1, cols))
    vf = 0.5 * (v[:-1, :] + v[1:, :])
    top = vf > 0.0
    Fh_y[1:-1, :] = np.where(top, h[:-1, :], h[1:, :]) * vf
    Fhu_y[1:-1, :] = np.where(top, hu[:-1, :], hu[1:, :]) * vf
    Fhv_y[1:-1, :] = np.where(top, hv[:-1, :], hv[1:, :]) * vf
    out_t = np.minimum(v[0, :], 0.0)
    out_b = np.maximum(v[-1, :], 0.0)
    Fh_y[0, :] = out_t * h[0, :]
    Fhu_y[0, :] = out_t * hu[0, :]
    Fhv_y[0, :] = out_t * hv[0, :]
    Fh_y[-1, :] = out_b * h[-1, :]
    Fhu_y[-1, :] = out_b * hu[-1, :]
    Fhv_y[-1, :] = out_b * hv[-1, :]

    # --- limit outgoing mass so no cell exports more than it holds
    out_total = (
        np.maximum(Fh_x[:, 1:], 0.0)
        + np.maximum(-Fh_x[:, :-1], 0.0)
        + np.maximum(Fh_y[1:, :], 0.0)
        + np.maximum(-Fh_y[:-1, :], 0.0)
    ) * (dt / dx)
    needs_limit = out_total > h
    if needs_limit.any():
        scale = np.where(needs_limit, h / np.where(out_total > 0, out_total, 1.0), 1.0)
        ones_col = np.ones((rows, 1))
        ones_row = np.ones((1, cols))
        sx_l = np.concatenate([ones_col, scale], axis=1)  # scale of the left cell per x-face
        sx_r = np.concatenate([scale, ones_col], axis=1)
        fx_scale = np.where(Fh_x > 0, sx_l, np.where(Fh_x < 0, sx_r, 1.0))
        # Edge faces always donate from the edge cell.
        fx_scale[:, 0] = scale[:, 0]
        fx_scale[:, -1] = scale[:, -1]
        Fh_x *= fx_scale
        Fhu_x *= fx_scale
        Fhv_x *= fx_scale
        sy_t = np.concatenate([ones_row, scale], axis=0)
        sy_b = np.concatenate([scale, ones_row], axis=0)
        fy_scale = np.where(Fh_y > 0, sy_t, np.where(Fh_y < 0, sy_b, 1.0))
        fy_scale[0, :] = scale[0, :]
        fy_scale[-1, :] = scale[-1, :]
        Fh_y *= fy_scale
        Fhu_y *= fy_scale
        Fhv_y *= fy_scale

    # --- conservative update plus momentum sources
    r = dt / dx
    h_new = h - r * (Fh_x[:, 1:] - Fh_x[:, :-1]) - r * (Fh_y[1:, :] - Fh_y[:-1, :])
    np.maximum(h_new, 0.0, out=h_new)

    P = 0.5 * g * h * h * terrain.cos_alpha
    Pf_x = _face_pressure(P, wet, axis=1)
    Pf_y = _face_pressure(P, wet, axis=0)
    src_hu = g * h * terrain.sin_alpha_x - (Pf_x[:, 1:] - Pf_x[:, :-1]) / dx
    src_hv = g * h * terrain.sin_alpha_y - (Pf_y[1:, :] - Pf_y[:-1, :]) / dx

    hu_new = hu - r * (Fhu_x[:, 1:] - Fhu_x[:, :-1]) - r * (Fhu_y[1:, :] - Fhu_y[:-1, :]) \
        + dt * src_hu
    hv_new = hv - r * (Fhv_x[:, 1:] - Fhv_x[:, :-1]) - r * (Fhv_y[1:, :] - Fhv_y[:-1, :]) \
        + dt * src_hv

    # --- dry cells keep their mass but carry no momentum
    wet_new = h_new >= cfg.h_min
    hu_new = np.where(wet_new, hu_new, 0.0)
    hv_new = np.where(wet_new, hv_new, 0.0)

    # --- resistance half-step on wet cells
    h_safe = np.where(wet_new, h_new, 1.0)
    us = np.where(wet_new, hu_new / h_safe, 0.0)
    vs = np.where(wet_new, hv_new / h_safe, 0.0)
    speed = np.hypot(us, vs)
    decel_flat = p.cohesion_c / (p.density_rho * h_safe) \
        + p.voellmy_mu * g * terrain.cos_alpha
    reduced = np.maximum(0.0, speed - dt * decel_flat)
    drag = g / (p.voellmy_xi * h_safe)
    # Implicit magnitude update for the quadratic drag, cancellation-free form.
    speed_new = 2.0 * reduced / (1.0 + np.sqrt(1.0 + 4.0 * dt * drag * reduced))
    factor = np.where(speed > 0.0, speed_new / np.where(speed > 0.0, speed, 1.0), 0.0)
    factor = np.where(wet_new, factor, 0.0)
    hu_new *= factor
    hv_new *= factor

    if not (np.isfinite(h_new).all() and np.isfinite(hu_new).all()
            and np.isfinite(hv_new).all()):
        raise NumericalBlowupError(
            t=state.t, dt=dt, max_h=float(np.nanmax(h)), max_speed=float(np.hypot(u, v).max())
        )

    outflow = state.outflow_volume + dt * dx * float(
        Fh_x[:, -1].sum() - Fh_x[:, 0].sum() + Fh_y[-1, :].sum() - Fh_y[0, :].sum()
    )
    return FlowState(h=h_new, hu=hu_new, hv=hv_new, t=state.t + dt, outflow_volume=outflow)


def run(
    dem: RasterField,
    pile: PileField,
    p: MaterialParams,
    cfg: SolverConfig = SolverConfig(),
) -> SimResult:
    """Run a pile released at rest to deposition.

    The run terminates with ``stop_reason="velocity"`` once the grid is in
    exact rest, or once the maximum speed drops below ``v_stop`` after having
    exceeded it; otherwise it terminates at ``t_max``. Identical inputs give
    bit-identical outputs.
    """
    if dem.geo.shape != pile.thickness.geo.shape or dem.geo.cell_size != pile.thickness.geo.cell_size:
        raise GeometryError("DEM and pile geometries differ")
    t0 = time.perf_counter()
    terrain = terrain_derivatives(dem)
    state = FlowState(
        h=pile.thickness.values.copy(),
        hu=np.zeros(dem.geo.shape),
        hv=np.zeros(dem.geo.shape),
    )
    volume = pile.volume
    armed = False
    stop_reason = "t_max"
    while True:
        dt = adapt_dt(state, cfg, dem.geo, g=p.gravity_g)
        state = step(state, terrain, dem.geo, p, cfg, dt)
        v_max = max_speed(state, cfg)
        if v_max > cfg.v_stop:
            armed = True
        if v_max == 0.0 or (armed and v_max < cfg.v_stop):
            stop_reason = "velocity"
            break
        if state.t >= cfg.t_max:
            stop_reason = "t_max"
            break

    footprint = state.h > cfg.footprint_threshold
    displaced = int(np.count_nonzero(footprint & ~pile.support_mask))
    return SimResult(
        final_h=RasterField(dem.geo, state.h),
        footprint=footprint,
        displaced_px=displaced,
        stop_time=state.t,
        stop_reason=stop_reason,
        outflow_volume=state.outflow_volume,
        params=p,
        volume=volume,
        wall_time_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Result serialization
# ---------------------------------------------------------------------------


def result_manifest(result: SimResult, run_id: str, dem_id: str,
                    cfg: SolverConfig) -> dict:
    return {
        "run_id": run_id,
        "dem_id": dem_id,
        "volume_m3": result.volume,
        "density_kg_m3": result.params.density_rho,
        "cohesion_pa": result.params.cohesion_c,
        "mu": result.params.voellmy_mu,
        "xi": result.params.voellmy_xi,
        "stop_time_s": result.stop_time,
        "stop_reason": result.stop_reason,
        "displaced_px": result.displaced_px,
        "outflow_m3": result.outflow_volume,
        "wall_time_s": result.wall_time_s,
        "solver_config": {
            "dt_init": cfg.dt_init,
            "dt_min": cfg.dt_min,
            "cfl_number": cfg.cfl_number,
            "h_min": cfg.h_min,
            "v_stop": cfg.v_stop,
            "t_max": cfg.t_max,
            "footprint_threshold": cfg.footprint_threshold,
        },
    }


def save_result(result: SimResult, out_dir, run_id: str, dem_id: str,
                cfg: SolverConfig, extra: dict | None = None) -> dict:
    """Write h.rfg, footprint.rfg and manifest.json into ``out_dir``.

    The manifest is written last so its presence marks a complete run.
    Returns the manifest dict.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_raster(result.final_h, out / "h.rfg")
    write_raster(
        result.final_h.with_values(result.footprint.astype(np.float64)),
        out / "footprint.rfg",
    )
    manifest = result_manifest(result, run_id, dem_id, cfg)
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
