"""Footprint and deposit-thickness scoring.

All scorers are pure functions over same-geometry rasters. The batch scorer
pairs prediction and reference run directories (or an explicit jsonl of path
pairs) and aggregates per-run metrics into a report.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GeometryError, ParameterError
from .raster import read_raster


@dataclass(frozen=True)
class FootprintScore:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    iou: float


@dataclass(frozen=True)
class ThicknessScore:
    rmse_in: float | None
    rmse_out: float | None
    bias_in: float | None


def _as_mask(raster) -> np.ndarray:
    values = raster.values if hasattr(raster, "values") else np.asarray(raster)
    if values.dtype == bool:
        return values
    return values > 0.5


def _safe_ratio(num: int, den: int, both_empty: bool) -> float:
    if den > 0:
        return num / den
    return 1.0 if both_empty else 0.0


def score_footprint(pred, ref) -> FootprintScore:
    """Confusion counts and derived scores over all cells.

    Metrics with a zero denominator report 1 when both masks are empty
    (a trivially correct null prediction) and 0 otherwise.
    """
    pm, rm = _as_mask(pred), _as_mask(ref)
    if pm.shape != rm.shape:
        raise GeometryError(f"mask shapes differ: {pm.shape} vs {rm.shape}")
    tp = int(np.count_nonzero(pm & rm))
    fp = int(np.count_nonzero(pm & ~rm))
    fn = int(np.count_nonzero(~pm & rm))
    tn = int(np.count_nonzero(~pm & ~rm))
    both_empty = not pm.any() and not rm.any()
    return FootprintScore(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        precision=_safe_ratio(tp, tp + fp, both_empty),
        recall=_safe_ratio(tp, tp + fn, both_empty),
        f1=_safe_ratio(2 * tp, 2 * tp + fp + fn, both_empty),
        iou=_safe_ratio(tp, tp + fp + fn, both_empty),
    )


def score_thickness(pred_h, ref_h, ref_mask) -> ThicknessScore:
    """RMSE inside/outside the reference mask plus in-mask bias.

    When the mask (or its complement) is empty the corresponding statistic
    is reported as None rather than zero.
    """
    pv = pred_h.values if hasattr(pred_h, "values") else np.asarray(pred_h, dtype=float)
    rv = ref_h.values if hasattr(ref_h, "values") else np.asarray(ref_h, dtype=float)
    mask = _as_mask(ref_mask)
    if pv.shape != rv.shape or pv.shape != mask.shape:
        raise GeometryError(
            f"field shapes differ: {pv.shape}, {rv.shape}, mask {mask.shape}"
        )
    diff = pv - rv
    n_in = int(np.count_nonzero(mask))
    n_out = mask.size - n_in
    rmse_in = float(np.sqrt(np.mean(diff[mask] ** 2))) if n_in else None
    rmse_out = float(np.sqrt(np.mean(diff[~mask] ** 2))) if n_out else None
    bias_in = float(np.mean(diff[mask])) if n_in else None
    return ThicknessScore(rmse_in=rmse_in, rmse_out=rmse_out, bias_in=bias_in)


def max_runout_distance(footprint, source_centroid: tuple[float, float]) -> float:
    """Greatest Euclidean distance, in pixels, from the source centroid to
    any footprint cell centre; 0 for an empty footprint."""
    mask = _as_mask(footprint)
    cr, cc = source_centroid
    if not (0 <= cr <= mask.shape[0] - 1 and 0 <= cc <= mask.shape[1] - 1):
        raise ParameterError(f"centroid {source_centroid} outside grid {mask.shape}")
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return 0.0
    return float(np.hypot(rows - cr, cols - cc).max())


# ---------------------------------------------------------------------------
# Batch scoring
# ---------------------------------------------------------------------------


def score_run_pair(pred_h_path, pred_fp_path, ref_h_path, ref_fp_path) -> dict:
    pred_h = read_raster(pred_h_path)
    pred_fp = read_raster(pred_fp_path)
    ref_h = read_raster(ref_h_path)
    ref_fp = read_raster(ref_fp_path)
    fs = score_footprint(pred_fp, ref_fp)
    ts = score_thickness(pred_h, ref_h, ref_fp)
    # Piles are always centred on the tile, so the source centroid is the
    # grid centre.
    centroid = ((ref_h.geo.rows - 1) / 2.0, (ref_h.geo.cols - 1) / 2.0)
    runout_pred = max_runout_distance(pred_fp, centroid)
    runout_ref = max_runout_distance(ref_fp, centroid)
    return {
        "precision": fs.precision,
        "recall": fs.recall,
        "f1": fs.f1,
        "iou": fs.iou,
        "rmse_in_m": ts.rmse_in,
        "rmse_out_m": ts.rmse_out,
        "bias_in_m": ts.bias_in,
        "runout_pred_px": runout_pred,
        "runout_ref_px": runout_ref,
        "runout_abs_err_px": abs(runout_pred - runout_ref),
    }


def _aggregate(per_run: dict[str, dict]) -> dict:
    agg: dict[str, dict] = {}
    keys = set()
    for metrics in per_run.values():
        keys.update(k for k, v in metrics.items() if isinstance(v, (int, float)))
    for key in sorted(keys):
        vals = [m[key] for m in per_run.values() if m.get(key) is not None]
        if not vals:
            agg[key] = {"mean": None, "std": None, "n": 0}
            continue
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        agg[key] = {"mean": mean, "std": math.sqrt(var), "n": len(vals)}
    return agg


def pairs_from_dirs(pred_dir, ref_dir) -> list[dict]:
    """Pair run subdirectories of two dataset trees by run id."""
    pred_dir, ref_dir = Path(pred_dir), Path(ref_dir)
    pred_runs = {p.name for p in pred_dir.iterdir() if (p / "h.rfg").exists()}
    ref_runs = {p.name for p in ref_dir.iterdir() if (p / "h.rfg").exists()}
    pairs = []
    for run_id in sorted(pred_runs & ref_runs):
        pairs.append(
            {
                "run_id": run_id,
                "pred_h": str(pred_dir / run_id / "h.rfg"),
                "pred_footprint": str(pred_dir / run_id / "footprint.rfg"),
                "ref_h": str(ref_dir / run_id / "h.rfg"),
                "ref_footprint": str(ref_dir / run_id / "footprint.rfg"),
            }
        )
    return pairs


def load_pairs(path) -> list[dict]:
    """Read (pred, ref) path pairs from a jsonl file."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                pairs.append(json.loads(line))
    return pairs


def score_batch(pairs: list[dict]) -> dict:
    """Score path pairs and aggregate; returns the report dict."""
    per_run = {}
    for pair in pairs:
        per_run[pair["run_id"]] = score_run_pair(
            pair["pred_h"], pair["pred_footprint"], pair["ref_h"], pair["ref_footprint"]
        )
    return {
        "n_runs": len(per_run),
        "per_run": per_run,
        "aggregate": _aggregate(per_run),
    }


def write_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
