import json
from pathlib import Path

import numpy as np
import pytest

from runout import campaign as campaign_mod
from runout.campaign import (
    CampaignConfig,
    DatasetManifest,
    compute_displaced_px,
    load_manifest,
    run_campaign,
    save_manifest,
    split_dataset,
)
from runout.errors import GeometryError, SplitError
from runout.raster import GridGeo, RasterField, read_raster, write_raster
from runout.sampling import ParamRanges
from runout.solver import MaterialParams, SimResult, SolverConfig
from runout.source import PileField
from runout.synthetic import valley_dem

FAST_SOLVER = SolverConfig(t_max=120.0)
MOBILE_RANGES = ParamRanges(volume_log10=(6.0, 7.0), cohesion=(5000.0, 20000.0))


def make_tiles(tiles_dir: Path, n: int, size: int = 48) -> list[str]:
    tiles_dir.mkdir(parents=True, exist_ok=True)
    ids = []
    for i in range(n):
        dem = valley_dem(size, size, channel_slope_deg=10.0 + i, wall_slope_deg=18.0)
        tile_id = f"tile_{i:03d}"
        write_raster(dem, tiles_dir / f"{tile_id}.rfg")
        ids.append(tile_id)
    return ids


def campaign_config(tiles_dir, out_dir, **kw) -> CampaignConfig:
    defaults = dict(
        tiles_dir=str(tiles_dir),
        output_dir=str(out_dir),
        runs_per_tile=2,
        ranges=MOBILE_RANGES,
        seed=7,
        solver=FAST_SOLVER,
    )
    defaults.update(kw)
    return CampaignConfig(**defaults)


def fake_result(geo: GridGeo, displaced: int) -> tuple[SimResult, PileField]:
    """A synthetic run whose footprint extends `displaced` cells beyond a
    one-cell support."""
    h = np.zeros(geo.shape)
    h[0, 0] = 1.0
    support = h > 0
    final = h.copy()
    final.ravel()[1 : 1 + displaced] = 1.0
    footprint = final > 0.05
    pile = PileField(thickness=RasterField(geo, h), support_mask=support, kernel_px=7)
    result = SimResult(
        final_h=RasterField(geo, final),
        footprint=footprint,
        displaced_px=int(np.count_nonzero(footprint & ~support)),
        stop_time=1.0,
        stop_reason="velocity",
        outflow_volume=0.0,
        params=MaterialParams(density_rho=2000.0, cohesion_c=10_000.0),
        volume=float(final.sum() * geo.cell_area),
    )
    return result, pile


class TestDisplacedPixels:
    def test_footprint_equals_support(self):
        geo = GridGeo(rows=6, cols=6)
        result, pile = fake_result(geo, 0)
        assert compute_displaced_px(result, pile) == 0

    def test_twenty_downslope_cells(self):
        geo = GridGeo(rows=6, cols=6)
        result, pile = fake_result(geo, 20)
        assert compute_displaced_px(result, pile) == 20

    def test_empty_footprint(self):
        geo = GridGeo(rows=6, cols=6)
        result, pile = fake_result(geo, 0)
        result.footprint[:] = False
        assert compute_displaced_px(result, pile) == 0

    def test_geometry_mismatch(self):
        result, _ = fake_result(GridGeo(rows=6, cols=6), 0)
        _, pile = fake_result(GridGeo(rows=5, cols=5), 0)
        with pytest.raises(GeometryError):
            compute_displaced_px(result, pile)


class TestMobilityFilter:
    @pytest.mark.parametrize("displaced,retained", [(14, False), (15, True)])
    def test_boundary(self, tmp_path, monkeypatch, displaced, retained):
        tiles = tmp_path / "tiles"
        make_tiles(tiles, 1)
        geo = read_raster(tiles / "tile_000.rfg").geo

        def fake_sim(tile_path, sample, source, solver):
            return fake_result(geo, displaced)[0]

        monkeypatch.setattr(campaign_mod, "simulate_tile_run", fake_sim)
        cfg = campaign_config(tiles, tmp_path / "out", runs_per_tile=1)
        manifest = run_campaign(cfg)
        assert bool(manifest.entries) is retained
        if retained:
            assert manifest.entries[0].displaced_px == 15


class TestRunCampaign:
    def test_three_tiles_two_runs_each(self, tmp_path):
        tiles = tmp_path / "tiles"
        make_tiles(tiles, 3)
        out = tmp_path / "out"
        manifest = run_campaign(campaign_config(tiles, out))
        assert len(manifest.entries) == 6  # all mobile at these volumes
        for entry in manifest.entries:
            assert (out / entry.h_path).exists()
            assert (out / entry.footprint_path).exists()
            fld = read_raster(out / entry.h_path)
            assert fld.geo.shape == (48, 48)
            assert entry.displaced_px >= 15
        assert (out / "dataset.jsonl").exists()

    def test_run_ids_unique_and_sorted(self, tmp_path):
        tiles = tmp_path / "tiles"
        make_tiles(tiles, 2)
        manifest = run_campaign(campaign_config(tiles, tmp_path / "out"))
        ids = [e.run_id for e in manifest.entries]
        assert ids == sorted(ids)
        assert len(set(ids)) == len(ids)

    def test_resume_skips_completed_runs(self, tmp_path, monkeypatch):
        tiles = tmp_path / "tiles"
        make_tiles(tiles, 2)
        out = tmp_path / "out"
        cfg = campaign_config(tiles, out)
        first = run_campaign(cfg)

        calls = []
        real = campaign_mod.simulate_tile_run

        def counting(*args, **kw):
            calls.append(1)
            return real(*args, **kw)

        monkeypatch.setattr(campaign_mod, "simulate_tile_run", counting)
        second = run_campaign(cfg)
        assert calls == []  # nothing re-simulated
        assert [e.to_dict() for e in second.entries] == [e.to_dict() for e in first.entries]

    def test_interrupted_campaign_resumes_identically(self, tmp_path, monkeypatch):
        tiles = tmp_path / "tiles"
        make_tiles(tiles, 3)
        reference = run_campaign(campaign_config(tiles, tmp_path / "ref"))

        real = campaign_mod.simulate_tile_run
        state = {"left": 3}

        def flaky(*args, **kw):
            if state["left"] == 0:
                raise KeyboardInterrupt
            state["left"] -= 1
            return real(*args, **kw)

        monkeypatch.setattr(campaign_mod, "simulate_tile_run", flaky)
        out = tmp_path / "out"
        with pytest.raises(KeyboardInterrupt):
            run_campaign(campaign_config(tiles, out))
        monkeypatch.setattr(campaign_mod, "simulate_tile_run", real)
        resumed = run_campaign(campaign_config(tiles, out))

        ref_entries = [e.to_dict() for e in reference.entries]
        res_entries = [e.to_dict() for e in resumed.entries]
        # Paths inside the dataset are relative, so manifests from different
        # output directories must agree except for the tile source path.
        for a, b in zip(ref_entries, res_entries):
            assert a == b

    def test_worker_count_does_not_change_manifest(self, tmp_path):
        tiles = tmp_path / "tiles"
        make_tiles(tiles, 2)
        serial = run_campaign(campaign_config(tiles, tmp_path / "out1", worker_count=1))
        parallel = run_campaign(campaign_config(tiles, tmp_path / "out2", worker_count=2))
        assert [e.to_dict() for e in serial.entries] == [e.to_dict() for e in parallel.entries]

    def test_unreadable_tile_skipped(self, tmp_path):
        tiles = tmp_path / "tiles"
        make_tiles(tiles, 2)
        (tiles / "broken.rfg").write_bytes(b"RFG1\nnot json\n")
        manifest = run_campaign(campaign_config(tiles, tmp_path / "out"))
        assert {e.tile_id for e in manifest.entries} == {"tile_000", "tile_001"}

    def test_empty_dataset_warns(self, tmp_path, caplog):
        tiles = tmp_path / "tiles"
        make_tiles(tiles, 1)
        cfg = campaign_config(tiles, tmp_path / "out", min_displaced_px=10_000)
        with caplog.at_level("WARNING", logger="runout.campaign"):
            manifest = run_campaign(cfg)
        assert manifest.entries == []
        assert any("empty dataset" in r.message for r in caplog.records)


def synthetic_manifest(n_tiles: int, runs_per_tile: int = 3) -> DatasetManifest:
    entries = []
    for t in range(n_tiles):
        for r in range(runs_per_tile):
            result, pile = fake_result(GridGeo(rows=6, cols=6), 20)
            entries.append(
                campaign_mod.ManifestEntry(
                    run_id=f"{t:02d}{r:02d}",
                    tile_id=f"tile_{t:03d}",
                    split=None,
                    params={"volume_m3": 1e6, "density_kg_m3": 2000.0,
                            "cohesion_pa": 1e4, "mu": 0.0, "xi": 0.02},
                    unit_point=[0.1, 0.2, 0.3],
                    h_path=f"{t:02d}{r:02d}/h.rfg",
                    footprint_path=f"{t:02d}{r:02d}/footprint.rfg",
                    dem_path=f"/tiles/tile_{t:03d}.rfg",
                    displaced_px=20,
                )
            )
    return DatasetManifest(entries=entries)


class TestSplitDataset:
    def test_ten_tiles_split_8_1_1(self):
        split = split_dataset(synthetic_manifest(10), seed=1)
        by_split = {}
        for e in split.entries:
            by_split.setdefault(e.split, set()).add(e.tile_id)
        assert len(by_split["train"]) == 8
        assert len(by_split["val"]) == 1
        assert len(by_split["test"]) == 1

    def test_tile_sets_disjoint(self):
        split = split_dataset(synthetic_manifest(17), seed=3)
        groups = {"train": set(), "val": set(), "test": set()}
        for e in split.entries:
            groups[e.split].add(e.tile_id)
        assert not groups["train"] & groups["val"]
        assert not groups["train"] & groups["test"]
        assert not groups["val"] & groups["test"]

    def test_runs_follow_their_tile(self):
        split = split_dataset(synthetic_manifest(5), seed=2)
        per_tile = {}
        for e in split.entries:
            per_tile.setdefault(e.tile_id, set()).add(e.split)
        assert all(len(s) == 1 for s in per_tile.values())

    def test_deterministic(self):
        a = split_dataset(synthetic_manifest(9), seed=11)
        b = split_dataset(synthetic_manifest(9), seed=11)
        assert [e.to_dict() for e in a.entries] == [e.to_dict() for e in b.entries]

    def test_too_few_tiles(self):
        with pytest.raises(SplitError):
            split_dataset(synthetic_manifest(2), seed=0)

    def test_manifest_round_trip(self, tmp_path):
        split = split_dataset(synthetic_manifest(4), seed=0)
        path = tmp_path / "dataset.jsonl"
        save_manifest(split, path)
        back = load_manifest(path)
        assert [e.to_dict() for e in back.entries] == [e.to_dict() for e in split.entries]

    def test_splits_json(self, tmp_path):
        split = split_dataset(synthetic_manifest(4), seed=0)
        campaign_mod.save_splits(split, tmp_path / "splits.json")
        mapping = json.loads((tmp_path / "splits.json").read_text())
        assert set(mapping.values()) <= {"train", "val", "test"}
        assert len(mapping) == 4
