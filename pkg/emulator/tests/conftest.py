"""Shared fixtures: a toy simulation campaign generated once per session.

The emulator consumes campaign output through its on-disk interface
(dataset.jsonl plus rfg rasters), produced here by the simulation package
on small synthetic valley tiles.
"""

import pytest

from runout.campaign import CampaignConfig, run_campaign, split_dataset, save_manifest
from runout.raster import write_raster
from runout.sampling import ParamRanges
from runout.solver import SolverConfig
from runout.synthetic import valley_dem

from emulator.data import load_dataset

TILE_PX = 48  # divisible by 16, large enough for the widest source kernel


@pytest.fixture(scope="session")
def campaign_dir(tmp_path_factory):
    """A 8-tile, 24-run toy campaign with train/val/test splits."""
    root = tmp_path_factory.mktemp("campaign")
    tiles = root / "tiles"
    tiles.mkdir()
    for i in range(8):
        dem = valley_dem(TILE_PX, TILE_PX, channel_slope_deg=9.0 + 0.8 * i,
                         wall_slope_deg=16.0 + (i % 3))
        write_raster(dem, tiles / f"tile_{i:03d}.rfg")
    cfg = CampaignConfig(
        tiles_dir=str(tiles),
        output_dir=str(root / "runs"),
        runs_per_tile=3,
        ranges=ParamRanges(volume_log10=(6.0, 7.0), cohesion=(5_000.0, 20_000.0)),
        seed=11,
        solver=SolverConfig(t_max=120.0),
    )
    manifest = run_campaign(cfg)
    assert len(manifest.entries) >= 20, "toy campaign produced too few mobile runs"
    split = split_dataset(manifest, (0.8, 0.1, 0.1), seed=11)
    save_manifest(split, root / "runs" / "dataset.jsonl")
    return root / "runs"


@pytest.fixture(scope="session")
def dataset_groups(campaign_dir):
    return load_dataset(campaign_dir / "dataset.jsonl")


@pytest.fixture(scope="session")
def all_samples(dataset_groups):
    samples = [s for group in dataset_groups.values() for s in group]
    return sorted(samples, key=lambda s: s.run_id)
