"""Dataset production: per-tile parameter draws, simulation, mobility
filtering, and DEM-disjoint train/val/test splitting.

Every run gets a deterministic ``run_id`` derived from its tile, unit-cube
parameter point, and solver configuration, which makes campaigns resumable:
a run directory containing ``manifest.json`` is considered complete and is
never re-simulated. Runs failing the mobility filter keep their manifest
(``retained: false``) so a restart performs no new work, but are excluded
from the dataset. ``dataset.jsonl`` is ordered by run_id, so manifests are
identical regardless of worker count or interruption history.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import GeometryError, ParameterError, RunoutError, SplitError
from .raster import read_raster
from .sampling import ParameterSample, ParamRanges, lhs_sample
from .solver import MaterialParams, SimResult, SolverConfig, run, save_result
from .source import PileField, SourceSpec, build_pile

logger = logging.getLogger(__name__)

DEFAULT_RUNS_PER_TILE = 10
DEFAULT_MIN_DISPLACED_PX = 15
DEFAULT_SPLIT_FRACTIONS = (0.8, 0.1, 0.1)
_SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class CampaignConfig:
    tiles_dir: str
    output_dir: str
    runs_per_tile: int = DEFAULT_RUNS_PER_TILE
    ranges: ParamRanges = ParamRanges()
    seed: int = 0
    min_displaced_px: int = DEFAULT_MIN_DISPLACED_PX
    worker_count: int = 1
    source: SourceSpec = field(default_factory=lambda: SourceSpec(volume=1.0))
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if self.runs_per_tile < 1:
            raise ParameterError(f"runs_per_tile must be >= 1, got {self.runs_per_tile}")
        if self.min_displaced_px < 0:
            raise ParameterError("min_displaced_px must be >= 0")


@dataclass
class ManifestEntry:
    run_id: str
    tile_id: str
    split: str | None
    params: dict
    unit_point: list[float]
    h_path: str
    footprint_path: str
    dem_path: str
    displaced_px: int

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "tile_id": self.tile_id,
            "split": self.split,
            "params": self.params,
            "unit_point": self.unit_point,
            "h_path": self.h_path,
            "footprint_path": self.footprint_path,
            "dem_path": self.dem_path,
            "displaced_px": self.displaced_px,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        return cls(**d)


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    split_fractions: tuple[float, float, float] | None = None

    def tile_ids(self) -> list[str]:
        return sorted({e.tile_id for e in self.entries})


def compute_displaced_px(result: SimResult, pile: PileField) -> int:
    """Footprint cells whose centres lie outside the initial pile support."""
    if result.footprint.shape != pile.support_mask.shape:
        raise GeometryError(
            f"footprint {result.footprint.shape} vs pile "
            f"{pile.support_mask.shape} geometry mismatch"
        )
    return int(np.count_nonzero(result.footprint & ~pile.support_mask))


def make_run_id(tile_id: str, unit_point, solver: SolverConfig) -> str:
    key = json.dumps(
        {
            "tile_id": tile_id,
            "unit_point": [float(u) for u in unit_point],
            "solver": [
                solver.dt_init, solver.dt_min, solver.cfl_number, solver.h_min,
                solver.v_stop, solver.t_max, solver.footprint_threshold,
            ],
        },
        separators=(",", ":"),
        sort_keys=True,
    )
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


def _tile_seed(seed: int, tile_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{tile_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def simulate_tile_run(tile_path: str, sample: ParameterSample,
                      source: SourceSpec, solver: SolverConfig) -> SimResult:
    """One campaign simulation: read tile, build pile, run."""
    dem = read_raster(tile_path)
    pile = build_pile(dem.geo, replace(source, volume=sample.volume))
    params = MaterialParams(density_rho=sample.density, cohesion_c=sample.cohesion)
    return run(dem, pile, params, solver)


def _run_job(args) -> dict:
    """Worker: simulate one run and write its directory; returns the manifest."""
    (tile_path, tile_id, sample, run_id, out_dir,
     source, solver, min_displaced) = args
    run_dir = Path(out_dir) / run_id
    extra = {
        "tile_id": tile_id,
        "dem_path": str(Path(tile_path).resolve()),
        "unit_point": list(sample.unit_point),
    }
    try:
        result = simulate_tile_run(tile_path, sample, source, solver)
    except RunoutError as exc:
        run_dir.mkdir(parents=True, exist_ok=True)
        manifest = {
            "run_id": run_id,
            "retained": False,
            "error": str(exc),
            "volume_m3": sample.volume,
            "density_kg_m3": sample.density,
            "cohesion_pa": sample.cohesion,
            **extra,
        }
        with open(run_dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest

    retained = result.displaced_px >= min_displaced
    extra["retained"] = retained
    if retained:
        manifest = save_result(result, run_dir, run_id, tile_id, solver, extra=extra)
    else:
        run_dir.mkdir(parents=True, exist_ok=True)
        manifest = {
            "run_id": run_id,
            "displaced_px": result.displaced_px,
            "volume_m3": result.volume,
            "density_kg_m3": result.params.density_rho,
            "cohesion_pa": result.params.cohesion_c,
            "mu": result.params.voellmy_mu,
            "xi": result.params.voellmy_xi,
            "stop_time_s": result.stop_time,
            "stop_reason": result.stop_reason,
            "outflow_m3": result.outflow_volume,
            **extra,
        }
        with open(run_dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return manifest


def _manifest_to_entry(manifest: dict, run_id: str) -> ManifestEntry | None:
    if not manifest.get("retained", False):
        return None
    return ManifestEntry(
        run_id=run_id,
        tile_id=manifest["tile_id"],
        split=None,
        params={
            "volume_m3": manifest["volume_m3"],
            "density_kg_m3": manifest["density_kg_m3"],
            "cohesion_pa": manifest["cohesion_pa"],
            "mu": manifest.get("mu", 0.0),
            "xi": manifest.get("xi", 0.02),
        },
        unit_point=manifest["unit_point"],
        h_path=f"{run_id}/h.rfg",
        footprint_path=f"{run_id}/footprint.rfg",
        dem_path=manifest["dem_path"],
        displaced_px=manifest["displaced_px"],
    )


def run_campaign(cfg: CampaignConfig) -> DatasetManifest:
    """Simulate every (tile, sample) job that is not already on disk.

    Returns the manifest of retained runs (unsplit) and writes
    ``dataset.jsonl`` under the output directory. Unreadable tiles are
    logged and skipped; an empty result set is reported with a warning.
    """
    tiles_dir = Path(cfg.tiles_dir)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tile_paths = sorted(tiles_dir.glob("*.rfg"))
    if not tile_paths:
        raise ParameterError(f"no .rfg tiles found in {tiles_dir}")

    jobs = []
    manifests: dict[str, dict] = {}
    for tile_path in tile_paths:
        tile_id = tile_path.stem
        try:
            read_raster(tile_path)
        except RunoutError as exc:
            logger.warning("skipping unreadable tile %s: %s", tile_path, exc)
            continue
        samples = lhs_sample(cfg.runs_per_tile, cfg.ranges, seed=_tile_seed(cfg.seed, tile_id))
        for sample in samples:
            run_id = make_run_id(tile_id, sample.unit_point, cfg.solver)
            manifest_path = out_dir / run_id / "manifest.json"
            if manifest_path.exists():
                with open(manifest_path, "r", encoding="utf-8") as fh:
                    manifests[run_id] = json.load(fh)
                continue
            jobs.append((str(tile_path), tile_id, sample, run_id, str(out_dir),
                         cfg.source, cfg.solver, cfg.min_displaced_px))

    if jobs:
        if cfg.worker_count > 1:
            with ProcessPoolExecutor(max_workers=cfg.worker_count) as pool:
                for manifest in pool.map(_run_job, jobs):
                    manifests[manifest["run_id"]] = manifest
        else:
            for job in jobs:
                manifest = _run_job(job)
                manifests[manifest["run_id"]] = manifest

    entries = []
    for run_id in sorted(manifests):
        entry = _manifest_to_entry(manifests[run_id], run_id)
        if entry is not None:
            entries.append(entry)
    if not entries:
        logger.warning("campaign produced an empty dataset (no run passed the "
                       "mobility filter)")
    manifest = DatasetManifest(entries=entries)
    save_manifest(manifest, out_dir / "dataset.jsonl")
    return manifest


def split_dataset(
    manifest: DatasetManifest,
    fractions: tuple[float, float, float] = DEFAULT_SPLIT_FRACTIONS,
    seed: int = 0,
) -> DatasetManifest:
    """Assign train/val/test at tile level by seeded shuffle.

    Tile-count fractions match the targets within one tile; all runs of a
    tile share its split, so splits never share terrain.
    """
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ParameterError(f"fractions must be 3 values summing to 1, got {fractions}")
    tiles = manifest.tile_ids()
    if len(tiles) < 3:
        raise SplitError(f"need >= 3 distinct tiles to split, got {len(tiles)}")
    rng = np.random.default_rng(seed)
    order = [tiles[i] for i in rng.permutation(len(tiles))]
    n = len(tiles)
    n_val = max(1, round(fractions[1] * n))
    n_test = max(1, round(fractions[2] * n))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise SplitError(f"fractions {fractions} leave no training tiles for n={n}")
    assignment = {}
    for i, tile_id in enumerate(order):
        if i < n_train:
            assignment[tile_id] = "train"
        elif i < n_train + n_val:
            assignment[tile_id] = "val"
        else:
            assignment[tile_id] = "test"
    entries = [replace(e, split=assignment[e.tile_id]) for e in manifest.entries]
    return DatasetManifest(entries=entries, split_fractions=tuple(fractions))


# ---------------------------------------------------------------------------
# Manifest serialization
# ---------------------------------------------------------------------------


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in manifest.entries:
            fh.write(json.dumps(entry.to_dict(), separators=(",", ":"), sort_keys=True))
            fh.write("\n")


def load_manifest(path) -> DatasetManifest:
    entries = []
    splits = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entry = ManifestEntry.from_dict(json.loads(line))
                entries.append(entry)
                splits.add(entry.split)
    fractions = DEFAULT_SPLIT_FRACTIONS if splits - {None} else None
    return DatasetManifest(entries=entries, split_fractions=fractions)


def save_splits(manifest: DatasetManifest, path) -> None:
    """Write the tile_id -> split mapping."""
    mapping = {}
    for entry in manifest.entries:
        mapping[entry.tile_id] = entry.split
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mapping, fh, indent=2, sort_keys=True)
        fh.write("\n")
