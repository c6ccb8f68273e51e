"""Channel-stack construction and campaign-dataset loading.

The network input is an 8-channel raster stack per run:

  1. elevation above the tile minimum (m)
  2. slope (deg)
  3. aspect sine (downslope unit-vector row component)
  4. aspect cosine (downslope unit-vector column component)
  5. profile curvature (1/m)
  6. plan curvature (1/m)
  7. initial pile thickness (m)
  8. distance from the tile centre, normalized by the half-diagonal

plus the parameter vector p = (log10 V, rho, c), each min-max scaled to
[0, 1] over the campaign sampling ranges. Channel normalization statistics
are computed on the training split only and travel with the checkpoint.

Training data comes straight from a campaign output directory: the
``dataset.jsonl`` manifest points at the DEM tile and the target h and
footprint rasters of every retained run; source piles are rebuilt from the
recorded volume exactly as the simulations built them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from runout.raster import RasterField, read_raster, terrain_derivatives
from runout.source import PileField, SourceSpec, build_pile

N_CHANNELS = 8

# Canonical campaign sampling ranges used for parameter scaling.
PARAM_SCALE = {
    "volume_log10": (4.0, 7.0),
    "density": (917.0, 2650.0),
    "cohesion": (5000.0, 50000.0),
}


def make_channel_stack(dem: RasterField, pile: PileField) -> np.ndarray:
    """Stack the 8 input channels for one run: shape (8, rows, cols)."""
    if dem.geo.shape != pile.thickness.geo.shape:
        raise ValueError(
            f"DEM {dem.geo.shape} and pile {pile.thickness.geo.shape} differ"
        )
    d = terrain_derivatives(dem)
    rows, cols = dem.geo.shape
    rr = np.arange(rows, dtype=np.float64)[:, None] - (rows - 1) / 2.0
    cc = np.arange(cols, dtype=np.float64)[None, :] - (cols - 1) / 2.0
    half_diag = math.hypot((rows - 1) / 2.0, (cols - 1) / 2.0)
    dist = np.hypot(rr, cc) / half_diag
    stack = np.stack(
        [
            dem.values - dem.values.min(),
            d.slope_deg,
            d.aspect_sin,
            d.aspect_cos,
            d.curv_profile,
            d.curv_plan,
            pile.thickness.values,
            np.broadcast_to(dist, (rows, cols)),
        ]
    ).astype(np.float32)
    if not np.isfinite(stack).all():
        raise ValueError("channel stack contains non-finite values")
    return stack


def scale_params(volume: float, density: float, cohesion: float) -> np.ndarray:
    lo_v, hi_v = PARAM_SCALE["volume_log10"]
    lo_r, hi_r = PARAM_SCALE["density"]
    lo_c, hi_c = PARAM_SCALE["cohesion"]
    return np.array(
        [
            (math.log10(volume) - lo_v) / (hi_v - lo_v),
            (density - lo_r) / (hi_r - lo_r),
            (cohesion - lo_c) / (hi_c - lo_c),
        ],
        dtype=np.float32,
    )


@dataclass
class NormStats:
    """Per-channel mean/std computed on the training split."""

    mean: np.ndarray  # (8,)
    std: np.ndarray  # (8,)

    def apply(self, stack: np.ndarray) -> np.ndarray:
        return (stack - self.mean[:, None, None]) / self.std[:, None, None]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(mean=np.asarray(d["mean"], dtype=np.float32),
                   std=np.asarray(d["std"], dtype=np.float32))


@dataclass
class RunSample:
    run_id: str
    tile_id: str
    split: str | None
    stack: np.ndarray  # (8, H, W) raw, unnormalized
    params: np.ndarray  # (3,) scaled to [0, 1]
    target_h: np.ndarray  # (H, W)
    target_mask: np.ndarray  # (H, W) bool
    raw_params: dict


def load_run(entry: dict, dataset_root: Path) -> RunSample:
    dem = read_raster(entry["dem_path"])
    pile = build_pile(dem.geo, SourceSpec(volume=entry["params"]["volume_m3"]))
    h = read_raster(dataset_root / entry["h_path"])
    footprint = read_raster(dataset_root / entry["footprint_path"])
    return RunSample(
        run_id=entry["run_id"],
        tile_id=entry["tile_id"],
        split=entry.get("split"),
        stack=make_channel_stack(dem, pile),
        params=scale_params(entry["params"]["volume_m3"],
                            entry["params"]["density_kg_m3"],
                            entry["params"]["cohesion_pa"]),
        target_h=h.values.astype(np.float32),
        target_mask=footprint.values > 0.5,
        raw_params=dict(entry["params"]),
    )


def load_dataset(dataset_jsonl) -> dict[str, list[RunSample]]:
    """Load every manifest entry, grouped by split (None -> "train")."""
    path = Path(dataset_jsonl)
    root = path.parent
    groups: dict[str, list[RunSample]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            entry = json.loads(line)
            sample = load_run(entry, root)
            groups.setdefault(sample.split or "train", []).append(sample)
    return groups


def compute_norm_stats(samples: list[RunSample]) -> NormStats:
    stacked = np.stack([s.stack for s in samples])  # (n, 8, H, W)
    mean = stacked.mean(axis=(0, 2, 3))
    std = stacked.std(axis=(0, 2, 3))
    std = np.maximum(std, 1e-6)
    return NormStats(mean=mean.astype(np.float32), std=std.astype(np.float32))


def augment(stack: np.ndarray, target_h: np.ndarray, target_mask: np.ndarray,
            rng: np.random.Generator):
    """Random flips and 90-degree rotations, applied identically to the
    input stack and both targets."""
    k = int(rng.integers(0, 4))
    flip = bool(rng.integers(0, 2))
    if k:
        stack = np.rot90(stack, k, axes=(1, 2))
        target_h = np.rot90(target_h, k)
        target_mask = np.rot90(target_mask, k)
    if flip:
        stack = stack[:, :, ::-1]
        target_h = target_h[:, ::-1]
        target_mask = target_mask[:, ::-1]
    return np.ascontiguousarray(stack), np.ascontiguousarray(target_h), \
        np.ascontiguousarray(target_mask)


def to_tensors(samples: list[RunSample], stats: NormStats, device="cpu",
               augment_rng: np.random.Generator | None = None):
    """Batch samples into (stack, params, mask, h) tensors."""
    stacks, params, masks, hs = [], [], [], []
    for s in samples:
        stack, th, tm = s.stack, s.target_h, s.target_mask
        if augment_rng is not None:
            stack, th, tm = augment(stack, th, tm, augment_rng)
        stacks.append(stats.apply(stack))
        params.append(s.params)
        masks.append(tm)
        hs.append(th)
    return (
        torch.as_tensor(np.stack(stacks), dtype=torch.float32, device=device),
        torch.as_tensor(np.stack(params), dtype=torch.float32, device=device),
        torch.as_tensor(np.stack(masks), dtype=torch.float32, device=device)[:, None],
        torch.as_tensor(np.stack(hs), dtype=torch.float32, device=device)[:, None],
    )
