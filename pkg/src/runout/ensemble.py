"""Sobol/LHS ensembles on a single tile, reduced to pixelwise hazard maps.

Each member draws (volume, density, cohesion), rebuilds the source pile for
its volume, and runs the flow solver. The reduction produces the reach
probability (fraction of members whose footprint covers a cell) and
deposit-thickness quantile maps. A member's thickness contributes to the
per-cell quantiles only where its footprint covers the cell; elsewhere it
contributes zero, which keeps the quantile maps nested inside the reach map.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EnsembleError, NumericalBlowupError, ParameterError
from .raster import RasterField, write_raster
from .sampling import ParamRanges, lhs_sample, sobol_sample
from .solver import MaterialParams, SolverConfig, run
from .source import SourceSpec, build_pile

DEFAULT_MEMBERS = 1024


@dataclass(frozen=True)
class EnsembleConfig:
    n_members: int = DEFAULT_MEMBERS
    ranges: ParamRanges = ParamRanges()
    sampler: str = "sobol"  # or "lhs"
    seed: int = 0  # used by the lhs sampler only
    source: SourceSpec = field(default_factory=lambda: SourceSpec(volume=1.0))
    solver: SolverConfig = SolverConfig()
    worker_count: int = 1
    max_failure_fraction: float = 0.1

    def __post_init__(self):
        if self.n_members < 2:
            raise ParameterError(f"need >= 2 members, got {self.n_members}")
        if self.sampler not in ("sobol", "lhs"):
            raise ParameterError(f"unknown sampler {self.sampler!r}")


@dataclass
class EnsembleProduct:
    p_reach: RasterField
    q50: RasterField
    q90: RasterField
    n_members: int
    member_manifest: list[dict]
    n_failed: int = 0
    wall_time_s: float = 0.0


def quantile(values, q: float) -> float:
    """Lower-interpolated order statistic: sorted[floor(q*(m-1))]."""
    vals = sorted(values)
    if not vals:
        raise ParameterError("quantile of an empty list")
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"q must be in [0, 1], got {q}")
    return vals[math.floor(q * (len(vals) - 1))]


def _member_job(args):
    dem_geo, dem_values, sample, source, solver_cfg = args
    dem = RasterField(dem_geo, dem_values)
    pile = build_pile(dem_geo, SourceSpec(
        volume=sample.volume,
        target_mean_thickness=source.target_mean_thickness,
        kernel_halfwidth_min=source.kernel_halfwidth_min,
        kernel_halfwidth_max=source.kernel_halfwidth_max,
    ))
    params = MaterialParams(density_rho=sample.density, cohesion_c=sample.cohesion)
    result = run(dem, pile, params, solver_cfg)
    return result.final_h.values.astype(np.float32)


def reduce_members(member_h: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reach probability and q50/q90 maps from stacked member thickness.

    ``member_h`` has shape (members, rows, cols).
    """
    covered = member_h > threshold
    p_reach = covered.mean(axis=0)
    masked = np.where(covered, member_h, 0.0)
    masked.sort(axis=0)
    m = masked.shape[0]
    q50 = masked[math.floor(0.5 * (m - 1))]
    q90 = masked[math.floor(0.9 * (m - 1))]
    return p_reach, q50, q90


def run_ensemble(dem: RasterField, cfg: EnsembleConfig) -> EnsembleProduct:
    """Run all members and reduce to an :class:`EnsembleProduct`.

    Members that blow up numerically are recorded and excluded; the run
    fails with :class:`EnsembleError` if more than ``max_failure_fraction``
    of members fail.
    """
    t0 = time.perf_counter()
    if cfg.sampler == "sobol":
        samples = sobol_sample(cfg.n_members, cfg.ranges)
    else:
        samples = lhs_sample(cfg.n_members, cfg.ranges, seed=cfg.seed)

    jobs = [(dem.geo, dem.values, s, cfg.source, cfg.solver) for s in samples]
    fields: list[np.ndarray | None] = [None] * len(jobs)
    errors: dict[int, str] = {}
    if cfg.worker_count > 1:
        with ProcessPoolExecutor(max_workers=cfg.worker_count) as pool:
            futures = {i: pool.submit(_member_job, job) for i, job in enumerate(jobs)}
            for i, fut in futures.items():
                try:
                    fields[i] = fut.result()
                except NumericalBlowupError as exc:
                    errors[i] = str(exc)
    else:
        for i, job in enumerate(jobs):
            try:
                fields[i] = _member_job(job)
            except NumericalBlowupError as exc:
                errors[i] = str(exc)

    ok = [f for f in fields if f is not None]
    if len(errors) > cfg.max_failure_fraction * cfg.n_members:
        raise EnsembleError(
            f"{len(errors)}/{cfg.n_members} members failed "
            f"(> {cfg.max_failure_fraction:.0%} allowed)"
        )
    if not ok:
        raise EnsembleError("all ensemble members failed")

    stack = np.stack(ok).astype(np.float64)
    p_reach, q50, q90 = reduce_members(stack, cfg.solver.footprint_threshold)

    manifest = []
    for i, sample in enumerate(samples):
        entry = {
            "member": i,
            "volume_m3": sample.volume,
            "density_kg_m3": sample.density,
            "cohesion_pa": sample.cohesion,
            "unit_point": list(sample.unit_point),
            "status": "failed" if i in errors else "ok",
        }
        if i in errors:
            entry["error"] = errors[i]
        manifest.append(entry)

    return EnsembleProduct(
        p_reach=RasterField(dem.geo, p_reach),
        q50=RasterField(dem.geo, q50),
        q90=RasterField(dem.geo, q90),
        n_members=len(ok),
        member_manifest=manifest,
        n_failed=len(errors),
        wall_time_s=time.perf_counter() - t0,
    )


def save_product(product: EnsembleProduct, out_dir, cfg: EnsembleConfig | None = None) -> None:
    """Serialize p_reach.rfg, q50.rfg, q90.rfg and ensemble.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_raster(product.p_reach, out / "p_reach.rfg")
    write_raster(product.q50, out / "q50.rfg")
    write_raster(product.q90, out / "q90.rfg")
    meta = {
        "n_members": product.n_members,
        "n_failed": product.n_failed,
        "wall_time_s": product.wall_time_s,
        "members": product.member_manifest,
    }
    if cfg is not None:
        meta["config"] = {
            "n_members": cfg.n_members,
            "sampler": cfg.sampler,
            "seed": cfg.seed,
            "ranges": {
                "volume_log10": list(cfg.ranges.volume_log10),
                "density": list(cfg.ranges.density),
                "cohesion": list(cfg.ranges.cohesion),
            },
            "solver": {
                "dt_init": cfg.solver.dt_init,
                "dt_min": cfg.solver.dt_min,
                "cfl_number": cfg.solver.cfl_number,
                "h_min": cfg.solver.h_min,
                "v_stop": cfg.solver.v_stop,
                "t_max": cfg.solver.t_max,
                "footprint_threshold": cfg.solver.footprint_threshold,
            },
        }
    with open(out / "ensemble.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
