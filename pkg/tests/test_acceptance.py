"""Acceptance suite.

One test per acceptance criterion, each printing a PASS line with its
measured numbers once its assertions hold (run with ``-s`` to see them).
The heavy criteria run full 256x256 simulations and take a few minutes
in total on one core.
"""

import json
import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from runout import campaign as campaign_mod
from runout.campaign import CampaignConfig, run_campaign, split_dataset
from runout.ensemble import EnsembleConfig, reduce_members, run_ensemble, save_product
from runout.metrics import max_runout_distance, score_footprint
from runout.raster import GridGeo, RasterField, read_raster, write_raster
from runout.sampling import ParamRanges, lhs_sample, lhs_unit, sobol_unit
from runout.solver import (
    FlowState,
    MaterialParams,
    SolverConfig,
    adapt_dt,
    run,
    step,
)
from runout.source import PileField, SourceSpec, build_pile
from runout.synthetic import flat_dem, inclined_plane, valley_dem
from runout.raster import terrain_derivatives


def report(name, detail):
    print(f"\n[PASS] {name}: {detail}")


def uniform_patch(dem, thickness, half):
    rows, cols = dem.geo.shape
    h = np.zeros((rows, cols))
    r0, c0 = rows // 2 - half, cols // 2 - half
    h[r0 : r0 + 2 * half, c0 : c0 + 2 * half] = thickness
    return PileField(thickness=RasterField(dem.geo, h), support_mask=h > 0, kernel_px=7)


def test_criterion_01_mass_conservation():
    """256x256 plane at 10 deg, V=5e6 m^3, rho=2000, c=20 kPa."""
    dem = inclined_plane(256, 256, 10.0)
    pile = build_pile(dem.geo, SourceSpec(volume=5e6))
    params = MaterialParams(density_rho=2000.0, cohesion_c=20_000.0)
    result = run(dem, pile, params, SolverConfig())
    total = result.final_h.total_volume() + result.outflow_volume
    rel_err = abs(total - pile.volume) / pile.volume
    assert rel_err <= 1e-6, f"mass conservation violated: rel err {rel_err:.3e}"
    report("mass conservation",
           f"rel err {rel_err:.3e} <= 1e-6, stop t {result.stop_time:.1f} s, "
           f"runtime {result.wall_time_s:.2f} s")


def test_criterion_02_rest_state_preservation():
    """Flat DEM with a uniform 10 m layer stays bit-identical over 1000 steps."""
    dem = flat_dem(64, 64)
    terrain = terrain_derivatives(dem)
    cfg = SolverConfig()
    params = MaterialParams(density_rho=2000.0, cohesion_c=0.0)
    state = FlowState(h=np.full((64, 64), 10.0), hu=np.zeros((64, 64)),
                      hv=np.zeros((64, 64)))
    h0_bytes = state.h.tobytes()
    for _ in range(1000):
        dt = adapt_dt(state, cfg, dem.geo)
        state = step(state, terrain, dem.geo, params, cfg, dt)
    speed_max = float(np.hypot(state.hu, state.hv).max())
    assert speed_max == 0.0, f"rest state developed motion: max |hu| {speed_max}"
    assert state.h.tobytes() == h0_bytes, "thickness changed bit-for-bit"
    report("rest-state preservation", "1000 steps, max speed 0.0, h bit-identical")


def test_criterion_03_yield_onset():
    """First mobilized angle in a 0.5 deg sweep within 2 deg of asin(c/(rho g h))."""
    rho, h, c = 2000.0, 10.0, 50_000.0
    theta_star = math.degrees(math.asin(c / (rho * 9.81 * h)))
    cfg = SolverConfig(t_max=600.0)
    params = MaterialParams(density_rho=rho, cohesion_c=c)
    onset = None
    for angle in np.arange(10.0, 20.01, 0.5):
        dem = inclined_plane(48, 48, float(angle))
        pile = uniform_patch(dem, thickness=h, half=10)
        result = run(dem, pile, params, cfg)
        if result.displaced_px > 0:
            onset = float(angle)
            break
    assert onset is not None, "no angle in the sweep mobilized the slab"
    assert abs(onset - theta_star) <= 2.0, (
        f"onset {onset} deg vs analytic {theta_star:.2f} deg"
    )
    report("yield onset", f"simulated {onset:.1f} deg vs analytic {theta_star:.2f} deg")


def test_criterion_04_cohesion_monotonicity():
    """Max runout on a fixed valley tile is non-increasing in cohesion."""
    dem = valley_dem(256, 256)
    centroid = ((dem.geo.rows - 1) / 2.0, (dem.geo.cols - 1) / 2.0)
    runouts = []
    for c in (5_000.0, 25_000.0, 50_000.0):
        pile = build_pile(dem.geo, SourceSpec(volume=5e6))
        result = run(dem, pile, MaterialParams(density_rho=1700.0, cohesion_c=c),
                     SolverConfig())
        runouts.append(max_runout_distance(result.footprint, centroid))
    assert runouts[0] >= runouts[1] >= runouts[2], f"runouts not monotone: {runouts}"
    report("cohesion monotonicity",
           "runout px " + " >= ".join(f"{r:.1f}" for r in runouts)
           + " for c = 5, 25, 50 kPa")


def test_criterion_05_single_simulation_wall_time():
    """A mid-range 256x256 simulation on one core lands in 10-300 s.

    Mid-range means the arithmetic midpoint of each campaign range.
    """
    dem = valley_dem(256, 256)
    pile = build_pile(dem.geo, SourceSpec(volume=(1e4 + 1e7) / 2.0))
    params = MaterialParams(density_rho=(917.0 + 2650.0) / 2.0,
                            cohesion_c=(5_000.0 + 50_000.0) / 2.0)
    result = run(dem, pile, params, SolverConfig())
    assert 10.0 <= result.wall_time_s <= 300.0, (
        f"wall time {result.wall_time_s:.1f} s outside [10, 300]"
    )
    report("single-simulation wall time",
           f"{result.wall_time_s:.1f} s (sim stop at {result.stop_time:.0f} s, "
           f"reason {result.stop_reason})")


def test_criterion_06_mobility_filter_boundary(tmp_path, monkeypatch):
    """displaced_px = 14 is excluded, 15 is included."""
    tiles = tmp_path / "tiles"
    tiles.mkdir()
    write_raster(valley_dem(48, 48), tiles / "tile_000.rfg")
    geo = GridGeo(rows=48, cols=48, cell_size=30.0)

    outcomes = {}
    for displaced in (14, 15):
        h = np.zeros(geo.shape)
        h[0, 0] = 1.0
        final = h.copy()
        final.ravel()[1 : 1 + displaced] = 1.0
        from runout.solver import SimResult

        fake = SimResult(
            final_h=RasterField(geo, final),
            footprint=final > 0.05,
            displaced_px=displaced,
            stop_time=1.0,
            stop_reason="velocity",
            outflow_volume=0.0,
            params=MaterialParams(density_rho=2000.0, cohesion_c=1e4),
            volume=1.0,
        )
        monkeypatch.setattr(campaign_mod, "simulate_tile_run",
                            lambda *a, **k: fake)
        cfg = CampaignConfig(tiles_dir=str(tiles),
                             output_dir=str(tmp_path / f"out_{displaced}"),
                             runs_per_tile=1, seed=0)
        manifest = run_campaign(cfg)
        outcomes[displaced] = len(manifest.entries)
    assert outcomes[14] == 0, "displaced_px = 14 must be filtered out"
    assert outcomes[15] == 1, "displaced_px = 15 must be retained"
    report("mobility filter boundary", "14 px excluded, 15 px included")


def test_criterion_07_footprint_threshold_boundary():
    """Cells at 0.049 m stay outside the footprint, 0.051 m inside."""
    dem = flat_dem(32, 32)
    h = np.zeros((32, 32))
    h[10, 10] = 0.049
    h[20, 20] = 0.051
    pile = PileField(thickness=RasterField(dem.geo, h), support_mask=h > 0, kernel_px=7)
    # Enormous cohesion keeps the sheet static so the final field is the
    # initial one.
    result = run(dem, pile, MaterialParams(density_rho=2000.0, cohesion_c=1e9),
                 SolverConfig())
    assert not result.footprint[10, 10], "0.049 m cell must be excluded"
    assert result.footprint[20, 20], "0.051 m cell must be included"
    assert result.footprint.sum() == 1
    report("footprint threshold boundary", "0.049 m out, 0.051 m in (h > 0.05 m)")


def test_criterion_08_lhs_stratification():
    """Every dimension has one sample per stratum; seeds reproduce exactly."""
    for n in (4, 16, 100):
        unit = lhs_unit(n, seed=2024)
        for d in range(3):
            strata = np.sort(np.floor(unit[:, d] * n).astype(int))
            assert np.array_equal(strata, np.arange(n)), (
                f"n={n} dim={d}: strata not exactly covered"
            )
    assert lhs_sample(64, ParamRanges(), seed=9) == lhs_sample(64, ParamRanges(), seed=9)
    report("LHS stratification", "exact strata for n in {4, 16, 100}; seeded reruns identical")


def test_criterion_09_sobol_correctness():
    """First 8 points match an independent oracle; discrepancy beats random."""
    from scipy.stats import qmc

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        oracle = qmc.Sobol(d=3, scramble=False).random(9)[1:]
    mine = sobol_unit(8)
    assert np.array_equal(mine, oracle), "Sobol points differ from direction-number oracle"

    from tests.test_sampling import star_discrepancy_estimate

    sob = star_discrepancy_estimate(sobol_unit(256))
    wins = sum(
        sob < star_discrepancy_estimate(np.random.default_rng(seed).random((256, 3)))
        for seed in range(10)
    )
    assert wins == 10, f"Sobol beat random in only {wins}/10 trials"
    report("Sobol correctness",
           f"first 8 points exact; 256-pt discrepancy {sob:.4f} beats random 10/10")


def test_criterion_10_metrics_oracle():
    """Hand-built confusion gives IoU 0.6 / F1 0.75; identity holds exactly."""
    pred = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 0]], dtype=bool)
    ref = np.array([[1, 1, 0], [1, 0, 1], [0, 0, 0]], dtype=bool)
    s = score_footprint(pred, ref)
    assert (s.tp, s.fp, s.fn) == (3, 1, 1)
    assert s.iou == 0.6 and s.f1 == 0.75

    rng = np.random.default_rng(77)
    for _ in range(1000):
        a = rng.random((5, 5)) > rng.random()
        b = rng.random((5, 5)) > rng.random()
        sc = score_footprint(a, b)
        if sc.tp + sc.fp + sc.fn == 0:
            continue
        iou = Fraction(sc.tp, sc.tp + sc.fp + sc.fn)
        f1 = Fraction(2 * sc.tp, 2 * sc.tp + sc.fp + sc.fn)
        assert f1 == 2 * iou / (1 + iou), "f1 = 2*iou/(1+iou) violated"
    report("metrics oracle", "IoU 0.6, F1 0.75 exact; identity over 1000 random pairs")


def test_criterion_11_ensemble_reduction(tmp_path):
    """Hand-counted reduction; quantile ordering; 32-member end-to-end run."""
    member_h = np.array([0.0, 1.0, 2.0, 4.0]).reshape(4, 1, 1)
    p, q50, q90 = reduce_members(member_h, 0.05)
    assert p[0, 0] == 0.75 and q50[0, 0] == 1.0 and q90[0, 0] == 2.0

    rng = np.random.default_rng(5)
    for _ in range(100):
        m = rng.integers(2, 10)
        stack = np.where(rng.random((m, 6, 6)) > 0.5, rng.random((m, 6, 6)) * 4, 0.0)
        _, a, b = reduce_members(stack, 0.05)
        assert np.all(a <= b)

    dem = valley_dem(128, 128)
    cfg = EnsembleConfig(n_members=32, sampler="sobol",
                         solver=SolverConfig(t_max=240.0))
    product = run_ensemble(dem, cfg)
    assert product.n_members == 32 and product.n_failed == 0
    save_product(product, tmp_path, cfg)
    for name in ("p_reach.rfg", "q50.rfg", "q90.rfg"):
        fld = read_raster(tmp_path / name)
        assert fld.geo.shape == (128, 128)
        assert np.isfinite(fld.values).all()
    p = read_raster(tmp_path / "p_reach.rfg").values
    assert p.min() >= 0.0 and p.max() <= 1.0
    meta = json.loads((tmp_path / "ensemble.json").read_text())
    assert len(meta["members"]) == 32
    report("ensemble reduction",
           f"hand counts exact; 32-member Sobol ensemble in {product.wall_time_s:.1f} s")


def test_criterion_12_split_disjointness_and_resume(tmp_path, monkeypatch):
    """10-tile campaign splits 8/1/1 disjointly; resume matches uninterrupted."""
    tiles = tmp_path / "tiles"
    tiles.mkdir()
    for i in range(10):
        write_raster(valley_dem(48, 48, channel_slope_deg=9.0 + 0.7 * i),
                     tiles / f"tile_{i:03d}.rfg")
    ranges = ParamRanges(volume_log10=(6.0, 7.0), cohesion=(5_000.0, 20_000.0))
    solver = SolverConfig(t_max=120.0)

    def config(out):
        return CampaignConfig(tiles_dir=str(tiles), output_dir=str(out),
                              runs_per_tile=1, ranges=ranges, seed=4, solver=solver)

    reference = run_campaign(config(tmp_path / "ref"))
    assert len(reference.tile_ids()) == 10, "a tile produced no mobile run"

    split = split_dataset(reference, (0.8, 0.1, 0.1), seed=4)
    groups = {"train": set(), "val": set(), "test": set()}
    for e in split.entries:
        groups[e.split].add(e.tile_id)
    assert (len(groups["train"]), len(groups["val"]), len(groups["test"])) == (8, 1, 1)
    assert not groups["train"] & groups["val"]
    assert not groups["train"] & groups["test"]
    assert not groups["val"] & groups["test"]

    # Interrupt after 4 simulations, then resume.
    real = campaign_mod.simulate_tile_run
    budget = {"left": 4}

    def flaky(*args, **kw):
        if budget["left"] == 0:
            raise KeyboardInterrupt
        budget["left"] -= 1
        return real(*args, **kw)

    monkeypatch.setattr(campaign_mod, "simulate_tile_run", flaky)
    with pytest.raises(KeyboardInterrupt):
        run_campaign(config(tmp_path / "out"))
    monkeypatch.setattr(campaign_mod, "simulate_tile_run", real)
    resumed = run_campaign(config(tmp_path / "out"))
    assert [e.to_dict() for e in resumed.entries] == [e.to_dict() for e in reference.entries]
    report("split disjointness and resume",
           "8/1/1 tiles, empty pairwise intersections, resumed manifest identical")
