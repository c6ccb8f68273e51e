"""
A miniature simulation campaign
===============================

Produce a labelled dataset the way the full pipeline does: write a few
terrain tiles, draw stratified parameter samples per tile, simulate each
draw, drop immobile runs, and split the survivors into train/val/test with
no tile shared between splits. Campaigns are resumable: re-running skips
everything already on disk.
"""

import json
import tempfile
from pathlib import Path

from runout.campaign import CampaignConfig, run_campaign, split_dataset, save_splits
from runout.raster import write_raster
from runout.sampling import ParamRanges
from runout.solver import SolverConfig
from runout.synthetic import valley_dem

workdir = Path(tempfile.mkdtemp(prefix="runout_demo_"))
tiles_dir = workdir / "tiles"
tiles_dir.mkdir()
for i in range(4):
    dem = valley_dem(48, 48, channel_slope_deg=10.0 + i)
    write_raster(dem, tiles_dir / f"tile_{i:03d}.rfg")

cfg = CampaignConfig(
    tiles_dir=str(tiles_dir),
    output_dir=str(workdir / "runs"),
    runs_per_tile=3,
    ranges=ParamRanges(volume_log10=(6.0, 7.0), cohesion=(5_000.0, 20_000.0)),
    seed=42,
    solver=SolverConfig(t_max=120.0),
)
manifest = run_campaign(cfg)
print(f"retained {len(manifest.entries)} of {4 * 3} runs "
      f"(mobility filter at {cfg.min_displaced_px} displaced pixels)")

split = split_dataset(manifest, (0.5, 0.25, 0.25), seed=42)
save_splits(split, workdir / "runs" / "splits.json")
counts = {}
for entry in split.entries:
    counts[entry.split] = counts.get(entry.split, 0) + 1
print(f"split sizes (runs): {counts}")
print("tile assignment:",
      json.loads((workdir / "runs" / "splits.json").read_text()))

# Resuming performs no new work: every run id is already on disk.
again = run_campaign(cfg)
print(f"resume: {len(again.entries)} entries, identical manifest: "
      f"{[e.to_dict() for e in again.entries] == [e.to_dict() for e in manifest.entries]}")
print(f"campaign output in {workdir}")
