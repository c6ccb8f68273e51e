"""Command-line entry point.

Exit codes: 0 on success, 1 on usage errors (unknown flags, bad values),
2 on operational failures. Progress goes to stderr; machine-readable
results are written to files only.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import campaign as campaign_mod
from . import ensemble as ensemble_mod
from . import metrics as metrics_mod
from .errors import RunoutError
from .raster import extract_tiles, gaussian_smooth, read_raster, write_raster
from .sampling import ParamRanges
from .solver import MaterialParams, SolverConfig, run, save_result
from .source import SourceSpec, build_pile


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _positive(kind=float, name="value"):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} {text!r} is not a number")
        if not value > 0:
            raise argparse.ArgumentTypeError(f"{name} must be > 0, got {value}")
        return value

    return parse


def _non_negative(kind=float, name="value"):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} {text!r} is not a number")
        if value < 0:
            raise argparse.ArgumentTypeError(f"{name} must be >= 0, got {value}")
        return value

    return parse


def _range_pair(name):
    def parse(text):
        parts = text.split(":")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"{name} must be LO:HI, got {text!r}")
        try:
            lo, hi = float(parts[0]), float(parts[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} bounds must be numbers, got {text!r}")
        if not lo < hi:
            raise argparse.ArgumentTypeError(f"{name}: need LO < HI, got {text!r}")
        return (lo, hi)

    return parse


def _fractions(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"fractions must be A:B:C, got {text!r}")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"fractions must be numbers, got {text!r}")
    if abs(sum(vals) - 1.0) > 1e-9:
        raise argparse.ArgumentTypeError(f"fractions must sum to 1, got {text!r}")
    return vals


def _add_solver_flags(parser):
    grp = parser.add_argument_group("solver")
    grp.add_argument("--mu", type=_non_negative(name="--mu"), default=0.0,
                     help="Coulomb friction coefficient, dimensionless (default 0)")
    grp.add_argument("--xi", type=_positive(name="--xi"), default=0.02,
                     help="turbulent friction coefficient, m/s^2 (default 0.02)")
    grp.add_argument("--dt-init", type=_positive(name="--dt-init"), default=0.25,
                     help="initial/maximum time step, s (default 0.25)")
    grp.add_argument("--dt-min", type=_positive(name="--dt-min"), default=0.05,
                     help="minimum time step, s (default 0.05)")
    grp.add_argument("--cfl", type=_positive(name="--cfl"), default=0.5,
                     help="Courant number, dimensionless in (0, 1] (default 0.5)")
    grp.add_argument("--h-min", type=_positive(name="--h-min"), default=5e-4,
                     help="minimum flow thickness, m (default 5e-4)")
    grp.add_argument("--v-stop", type=_positive(name="--v-stop"), default=0.5,
                     help="stop-velocity threshold, m/s (default 0.5)")
    grp.add_argument("--t-max", type=_positive(name="--t-max"), default=3600.0,
                     help="simulated-time cap, s (default 3600)")
    grp.add_argument("--footprint-threshold", type=_positive(name="--footprint-threshold"),
                     default=0.05, help="footprint thickness threshold, m (default 0.05)")


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        dt_init=args.dt_init,
        dt_min=args.dt_min,
        cfl_number=args.cfl,
        h_min=args.h_min,
        v_stop=args.v_stop,
        t_max=args.t_max,
        footprint_threshold=args.footprint_threshold,
    )


def _ranges(args) -> ParamRanges:
    defaults = ParamRanges()
    volume_log10 = defaults.volume_log10
    if args.volume is not None:
        volume_log10 = (math.log10(args.volume[0]), math.log10(args.volume[1]))
    return ParamRanges(
        volume_log10=volume_log10,
        density=args.density if args.density is not None else defaults.density,
        cohesion=args.cohesion if args.cohesion is not None else defaults.cohesion,
    )


def _add_range_flags(parser):
    grp = parser.add_argument_group("parameter ranges")
    grp.add_argument("--volume", type=_range_pair("--volume"), default=None,
                     help="source volume range LO:HI, m^3, sampled log-uniformly "
                          "(default 1e4:1e7)")
    grp.add_argument("--density", type=_range_pair("--density"), default=None,
                     help="bulk density range LO:HI, kg/m^3 (default 917:2650)")
    grp.add_argument("--cohesion", type=_range_pair("--cohesion"), default=None,
                     help="cohesion range LO:HI, Pa (default 5000:50000)")


def build_parser() -> _Parser:
    parser = _Parser(prog="runout",
                     description="Granular-flow runout simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", parents=[], help="smooth a DEM and extract sloped tiles")
    p.add_argument("--dem", required=True, help="input DEM (.rfg or ESRI ASCII .asc)")
    p.add_argument("--out", required=True, help="output directory for tile rasters")
    p.add_argument("--tile", type=_positive(int, "--tile"), default=256,
                   help="tile edge length, pixels (default 256)")
    p.add_argument("--min-slope", type=_non_negative(name="--min-slope"), default=5.0,
                   help="minimum mean slope over the central window, degrees (default 5)")
    p.add_argument("--sigma", type=_positive(name="--sigma"), default=1.0,
                   help="smoothing standard deviation, cells (default 1)")
    p.add_argument("--window", type=_positive(int, "--window"), default=11,
                   help="central slope-window edge length, pixels (default 11)")

    p = sub.add_parser("simulate", help="run one simulation and write its results")
    p.add_argument("--dem", required=True, help="DEM tile (.rfg or .asc)")
    p.add_argument("--volume", required=True, type=_positive(name="--volume"),
                   help="source volume, m^3")
    p.add_argument("--density", required=True, type=_positive(name="--density"),
                   help="bulk density, kg/m^3")
    p.add_argument("--cohesion", required=True, type=_non_negative(name="--cohesion"),
                   help="cohesion, Pa")
    p.add_argument("--out", required=True, help="output run directory")
    p.add_argument("--seed", type=int, default=0,
                   help="identifier salt recorded in the manifest (no sampling here)")
    p.add_argument("--target-mean-thickness", type=_positive(name="--target-mean-thickness"),
                   default=25.0, help="pile target mean thickness, m (default 25)")
    _add_solver_flags(p)

    p = sub.add_parser("campaign", help="simulate sampled runs over a tile set and split")
    p.add_argument("--tiles", required=True, help="directory of .rfg tiles")
    p.add_argument("--out", required=True, help="campaign output directory")
    p.add_argument("--runs-per-tile", type=_positive(int, "--runs-per-tile"), default=10,
                   help="sampled runs per tile (default 10)")
    p.add_argument("--seed", type=int, default=0, help="sampling and split seed")
    p.add_argument("--workers", type=_positive(int, "--workers"),
                   default=os.cpu_count() or 1,
                   help="parallel simulation workers (default: available cores)")
    p.add_argument("--min-displaced", type=_non_negative(int, "--min-displaced"), default=15,
                   help="mobility filter: minimum displaced pixels (default 15)")
    p.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1),
                   help="train:val:test tile fractions (default 0.8:0.1:0.1)")
    _add_range_flags(p)
    _add_solver_flags(p)

    p = sub.add_parser("ensemble", help="run a sampled ensemble and write hazard maps")
    p.add_argument("--dem", required=True, help="DEM tile (.rfg or .asc)")
    p.add_argument("--n", type=_positive(int, "--n"), default=1024,
                   help="ensemble members (default 1024)")
    p.add_argument("--sampler", choices=("sobol", "lhs"), default="sobol",
                   help="parameter sampler (default sobol)")
    p.add_argument("--seed", type=int, default=0, help="seed for the lhs sampler")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=_positive(int, "--workers"),
                   default=os.cpu_count() or 1,
                   help="parallel member workers (default: available cores)")
    _add_range_flags(p)
    _add_solver_flags(p)

    p = sub.add_parser("metrics", help="score predicted runs against references")
    p.add_argument("--pred", help="directory of predicted run subdirectories")
    p.add_argument("--ref", help="directory of reference run subdirectories")
    p.add_argument("--pairs", help="jsonl of explicit (pred, ref) path pairs")
    p.add_argument("--out", required=True, help="report JSON path")

    p = sub.add_parser("split", help="re-split an existing dataset manifest")
    p.add_argument("--dataset", required=True, help="dataset.jsonl path")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1),
                   help="train:val:test tile fractions (default 0.8:0.1:0.1)")

    return parser


def _cmd_prep(args) -> int:
    dem = read_raster(args.dem)
    smoothed = gaussian_smooth(dem, args.sigma)
    tiles = extract_tiles(smoothed, tile_px=args.tile,
                          min_mean_slope_deg=args.min_slope,
                          center_window_px=args.window)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, tile in enumerate(tiles):
        write_raster(tile, out / f"tile_{i:04d}.rfg")
    print(f"retained {len(tiles)} tile(s) -> {out}", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    dem = read_raster(args.dem)
    cfg = _solver_config(args)
    pile = build_pile(dem.geo, SourceSpec(
        volume=args.volume, target_mean_thickness=args.target_mean_thickness))
    params = MaterialParams(density_rho=args.density, cohesion_c=args.cohesion,
                            voellmy_mu=args.mu, voellmy_xi=args.xi)
    result = run(dem, pile, params, cfg)
    dem_id = Path(args.dem).stem
    run_id = campaign_mod.make_run_id(f"{dem_id}:{args.seed}",
                                      (args.volume, args.density, args.cohesion), cfg)
    save_result(result, args.out, run_id, dem_id, cfg)
    print(f"stop_reason={result.stop_reason} t={result.stop_time:.2f}s "
          f"displaced_px={result.displaced_px} -> {args.out}", file=sys.stderr)
    return 0


def _cmd_campaign(args) -> int:
    cfg = campaign_mod.CampaignConfig(
        tiles_dir=args.tiles,
        output_dir=args.out,
        runs_per_tile=args.runs_per_tile,
        ranges=_ranges(args),
        seed=args.seed,
        min_displaced_px=args.min_displaced,
        worker_count=args.workers,
        solver=_solver_config(args),
    )
    manifest = campaign_mod.run_campaign(cfg)
    if not manifest.entries:
        print("warning: empty dataset (no run passed the mobility filter)",
              file=sys.stderr)
        return 0
    split = campaign_mod.split_dataset(manifest, args.fractions, seed=args.seed)
    out = Path(args.out)
    campaign_mod.save_manifest(split, out / "dataset.jsonl")
    campaign_mod.save_splits(split, out / "splits.json")
    print(f"{len(split.entries)} retained run(s) over {len(split.tile_ids())} tile(s) "
          f"-> {out}", file=sys.stderr)
    return 0


def _cmd_ensemble(args) -> int:
    dem = read_raster(args.dem)
    cfg = ensemble_mod.EnsembleConfig(
        n_members=args.n,
        ranges=_ranges(args),
        sampler=args.sampler,
        seed=args.seed,
        solver=_solver_config(args),
        worker_count=args.workers,
    )
    product = ensemble_mod.run_ensemble(dem, cfg)
    ensemble_mod.save_product(product, args.out, cfg)
    print(f"{product.n_members} member(s), {product.n_failed} failed, "
          f"{product.wall_time_s:.1f}s -> {args.out}", file=sys.stderr)
    return 0


def _cmd_metrics(args) -> int:
    if args.pairs:
        pairs = metrics_mod.load_pairs(args.pairs)
    elif args.pred and args.ref:
        pairs = metrics_mod.pairs_from_dirs(args.pred, args.ref)
    else:
        raise _UsageError("metrics needs either --pairs or both --pred and --ref")
    report = metrics_mod.score_batch(pairs)
    metrics_mod.write_report(report, args.out)
    print(f"scored {report['n_runs']} run(s) -> {args.out}", file=sys.stderr)
    return 0


def _cmd_split(args) -> int:
    path = Path(args.dataset)
    manifest = campaign_mod.load_manifest(path)
    split = campaign_mod.split_dataset(manifest, args.fractions, seed=args.seed)
    campaign_mod.save_manifest(split, path)
    campaign_mod.save_splits(split, path.parent / "splits.json")
    print(f"re-split {len(split.entries)} run(s) over {len(split.tile_ids())} tile(s)",
          file=sys.stderr)
    return 0


_COMMANDS = {
    "prep": _cmd_prep,
    "simulate": _cmd_simulate,
    "campaign": _cmd_campaign,
    "ensemble": _cmd_ensemble,
    "metrics": _cmd_metrics,
    "split": _cmd_split,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RunoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
