import math

import numpy as np
import pytest
import torch

from emulator import training as train_mod
from emulator.data import RunSample
from emulator.training import TrainConfig, load_checkpoint, train


def dummy_samples(n, size=16, seed=0):
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        h = np.where(rng.random((size, size)) > 0.6,
                     rng.random((size, size)).astype(np.float32) * 3, 0.0)
        samples.append(
            RunSample(
                run_id=f"r{i:03d}",
                tile_id=f"t{i % 3}",
                split="train",
                stack=rng.random((8, size, size)).astype(np.float32),
                params=rng.random(3).astype(np.float32),
                target_h=h.astype(np.float32),
                target_mask=h > 0.05,
                raw_params={"volume_m3": 1e6, "density_kg_m3": 2e3, "cohesion_pa": 1e4},
            )
        )
    return samples


class TestEarlyStopAndGuards:
    def test_constant_loss_stub_stops_at_epoch_11(self, monkeypatch):
        monkeypatch.setattr(train_mod, "_train_epoch", lambda *a, **k: 1.0)
        monkeypatch.setattr(train_mod, "_eval_loss", lambda *a, **k: 1.0)
        groups = {"train": dummy_samples(2), "val": dummy_samples(2, seed=1)}
        ckpt = train(groups, tconf=TrainConfig(max_epochs=500))
        assert ckpt["stopped_epoch"] == 11
        assert ckpt["best_epoch"] == 1

    def test_nan_loss_aborts(self, monkeypatch):
        monkeypatch.setattr(train_mod, "_train_epoch", lambda *a, **k: math.nan)
        monkeypatch.setattr(train_mod, "_eval_loss", lambda *a, **k: 1.0)
        groups = {"train": dummy_samples(2), "val": dummy_samples(2, seed=1)}
        with pytest.raises(RuntimeError, match="diverged"):
            train(groups)

    def test_missing_split_rejected(self):
        with pytest.raises(ValueError):
            train({"train": dummy_samples(2)})

    def test_improving_loss_runs_to_max_epochs(self, monkeypatch):
        losses = iter(float(x) for x in range(100, 0, -1))
        monkeypatch.setattr(train_mod, "_train_epoch", lambda *a, **k: 1.0)
        monkeypatch.setattr(train_mod, "_eval_loss", lambda *a, **k: next(losses))
        groups = {"train": dummy_samples(2), "val": dummy_samples(2, seed=1)}
        ckpt = train(groups, tconf=TrainConfig(max_epochs=20))
        assert ckpt["stopped_epoch"] == 20
        assert ckpt["best_epoch"] == 20


class TestRealTraining:
    def test_loss_decreases_first_epochs_three_seeds(self, dataset_groups):
        samples = dataset_groups["train"][:12]
        for seed in (0, 1, 2):
            ckpt = train(
                {"train": samples, "val": samples},
                tconf=TrainConfig(max_epochs=5, augment=False, seed=seed),
            )
            losses = [h["train_loss"] for h in ckpt["history"]]
            assert len(losses) == 5
            assert all(b < a for a, b in zip(losses, losses[1:])), (
                f"seed {seed}: loss not strictly decreasing: {losses}"
            )

    def test_checkpoint_round_trip(self, tmp_path, dataset_groups):
        samples = dataset_groups["train"][:6]
        path = tmp_path / "ckpt.pt"
        ckpt = train({"train": samples, "val": samples},
                     tconf=TrainConfig(max_epochs=2, augment=False),
                     checkpoint_path=path, log_path=tmp_path / "log.json")
        assert path.exists() and (tmp_path / "log.json").exists()

        model_a, stats_a, _ = load_checkpoint(ckpt)
        model_b, stats_b, _ = load_checkpoint(path)
        x = torch.randn(1, 8, 48, 48)
        p = torch.rand(1, 3)
        with torch.no_grad():
            la, ha = model_a(x, p)
            lb, hb = model_b(x, p)
        assert torch.equal(la, lb) and torch.equal(ha, hb)
        assert np.array_equal(stats_a.mean, stats_b.mean)

    def test_batch_matches_loop_inference(self):
        torch.manual_seed(7)
        from emulator.model import RunoutEmulator

        model = RunoutEmulator().eval()
        x = torch.randn(6, 8, 32, 32)
        p = torch.rand(6, 3)
        with torch.no_grad():
            batch_logits, batch_h = model(x, p)
            for i in range(6):
                li, hi = model(x[i : i + 1], p[i : i + 1])
                assert torch.allclose(batch_logits[i], li[0], atol=1e-5)
                assert torch.allclose(batch_h[i], hi[0], atol=1e-5)
