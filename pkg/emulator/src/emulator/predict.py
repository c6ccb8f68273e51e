"""Inference: emulate runs and write them in the solver's output layout,
so the same batch scorer consumes simulated and emulated runs alike."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from runout.raster import RasterField, read_raster, write_raster
from runout.source import SourceSpec, build_pile

from .data import NormStats, make_channel_stack, scale_params
from .training import load_checkpoint


def predict_fields(model, stats: NormStats, dem, pile, volume, density, cohesion,
                   device: str = "cpu"):
    """Run one forward pass; returns (footprint bool array, thickness array)."""
    stack = stats.apply(make_channel_stack(dem, pile))
    params = scale_params(volume, density, cohesion)
    model.eval()
    with torch.no_grad():
        logits, thickness = model(
            torch.as_tensor(stack[None], dtype=torch.float32, device=device),
            torch.as_tensor(params[None], dtype=torch.float32, device=device),
        )
        probs = torch.sigmoid(logits)[0, 0].cpu().numpy()
        h = thickness[0, 0].cpu().numpy().astype(np.float64)
    footprint = probs > model.config.mask_threshold
    return footprint, h


def predict(dem, volume, density, cohesion, checkpoint, device: str = "cpu"):
    """Emulate a run from a DEM tile and flow parameters."""
    model, stats, _ = load_checkpoint(checkpoint, device)
    pile = build_pile(dem.geo, SourceSpec(volume=volume))
    return predict_fields(model, stats, dem, pile, volume, density, cohesion, device)


def write_prediction(out_dir, dem, footprint, thickness, run_id: str, dem_id: str,
                     volume: float, density: float, cohesion: float,
                     displaced_px: int | None = None) -> dict:
    """Write h.rfg, footprint.rfg and manifest.json exactly like the solver."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_raster(RasterField(dem.geo, thickness), out / "h.rfg")
    write_raster(RasterField(dem.geo, footprint.astype(np.float64)),
                 out / "footprint.rfg")
    manifest = {
        "run_id": run_id,
        "dem_id": dem_id,
        "volume_m3": volume,
        "density_kg_m3": density,
        "cohesion_pa": cohesion,
        "mu": 0.0,
        "xi": 0.02,
        "stop_time_s": 0.0,
        "stop_reason": "emulated",
        "displaced_px": displaced_px if displaced_px is not None else int(footprint.sum()),
        "outflow_m3": 0.0,
        "solver_config": None,
        "engine": "emulator",
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def predict_manifest(dataset_jsonl, checkpoint, out_dir, split: str | None = None,
                     device: str = "cpu") -> list[str]:
    """Emulate every run of a campaign manifest (optionally one split).

    Output directories are named by run_id, mirroring the campaign layout,
    so predictions pair one-to-one with the reference runs.
    """
    model, stats, _ = load_checkpoint(checkpoint, device)
    out = Path(out_dir)
    done = []
    with open(dataset_jsonl, "r", encoding="utf-8") as fh:
        entries = [json.loads(line) for line in fh if line.strip()]
    for entry in entries:
        if split is not None and entry.get("split") != split:
            continue
        params = entry["params"]
        dem = read_raster(entry["dem_path"])
        pile = build_pile(dem.geo, SourceSpec(volume=params["volume_m3"]))
        footprint, h = predict_fields(
            model, stats, dem, pile,
            params["volume_m3"], params["density_kg_m3"], params["cohesion_pa"],
            device,
        )
        displaced = int(np.count_nonzero(footprint & ~pile.support_mask))
        write_prediction(out / entry["run_id"], dem, footprint, h,
                         entry["run_id"], entry["tile_id"],
                         params["volume_m3"], params["density_kg_m3"],
                         params["cohesion_pa"], displaced_px=displaced)
        done.append(entry["run_id"])
    return done
