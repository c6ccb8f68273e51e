"""Training loop: Adam with plateau-halving schedule, early stopping, and
min-validation-loss checkpointing."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import torch

from .data import NormStats, RunSample, compute_norm_stats, load_dataset, to_tensors
from .model import EmulatorConfig, RunoutEmulator, composite_loss


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    early_stop_patience: int = 10
    max_epochs: int = 500
    batch_size: int = 8
    augment: bool = True
    seed: int = 0


def _batches(samples: list[RunSample], batch_size: int,
             rng: np.random.Generator | None):
    order = np.arange(len(samples))
    if rng is not None:
        order = rng.permutation(len(samples))
    for i in range(0, len(samples), batch_size):
        yield [samples[j] for j in order[i : i + batch_size]]


def _train_epoch(model, samples, stats, optimizer, econf, tconf, rng, device):
    model.train()
    total, seen = 0.0, 0
    aug_rng = rng if tconf.augment else None
    for batch in _batches(samples, tconf.batch_size, rng):
        stack, params, mask, h = to_tensors(batch, stats, device, augment_rng=aug_rng)
        optimizer.zero_grad()
        logits, thickness = model(stack, params)
        loss = composite_loss(logits, thickness, mask, h,
                              alpha=econf.loss_alpha, beta=econf.loss_beta)
        loss.backward()
        optimizer.step()
        total += float(loss.detach()) * len(batch)
        seen += len(batch)
    return total / seen


def _eval_loss(model, samples, stats, econf, tconf, device):
    model.eval()
    total, seen = 0.0, 0
    with torch.no_grad():
        for batch in _batches(samples, tconf.batch_size, rng=None):
            stack, params, mask, h = to_tensors(batch, stats, device)
            logits, thickness = model(stack, params)
            loss = composite_loss(logits, thickness, mask, h,
                                  alpha=econf.loss_alpha, beta=econf.loss_beta)
            total += float(loss) * len(batch)
            seen += len(batch)
    return total / seen


def train(
    dataset,
    econf: EmulatorConfig = EmulatorConfig(),
    tconf: TrainConfig = TrainConfig(),
    checkpoint_path=None,
    device: str = "cpu",
    log_path=None,
):
    """Train on a campaign dataset and return the checkpoint dict.

    ``dataset`` is either a dataset.jsonl path or a pre-loaded dict of
    split -> samples; non-empty "train" and "val" splits are required.
    The returned checkpoint holds the minimum-validation-loss weights, the
    model configuration, and the normalization statistics (computed on the
    training split only).
    """
    groups = load_dataset(dataset) if not isinstance(dataset, dict) else dataset
    train_samples = groups.get("train", [])
    val_samples = groups.get("val", [])
    if not train_samples or not val_samples:
        raise ValueError(
            f"need non-empty train and val splits, got "
            f"{ {k: len(v) for k, v in groups.items()} }"
        )

    torch.manual_seed(tconf.seed)
    rng = np.random.default_rng(tconf.seed)
    stats = compute_norm_stats(train_samples)
    model = RunoutEmulator(econf).to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=tconf.learning_rate,
                                 weight_decay=tconf.weight_decay)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=tconf.plateau_factor, patience=tconf.plateau_patience
    )

    history = []
    best_val = math.inf
    best_state = None
    best_epoch = 0
    epochs_since_best = 0
    for epoch in range(1, tconf.max_epochs + 1):
        train_loss = _train_epoch(model, train_samples, stats, optimizer,
                                  econf, tconf, rng, device)
        val_loss = _eval_loss(model, val_samples, stats, econf, tconf, device)
        if math.isnan(train_loss) or math.isnan(val_loss):
            raise RuntimeError(
                f"training diverged at epoch {epoch}: "
                f"train {train_loss}, val {val_loss}"
            )
        scheduler.step(val_loss)
        history.append({
            "epoch": epoch,
            "train_loss": train_loss,
            "val_loss": val_loss,
            "lr": optimizer.param_groups[0]["lr"],
        })
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if epochs_since_best >= tconf.early_stop_patience:
            break

    checkpoint = {
        "model_state": best_state if best_state is not None else model.state_dict(),
        "config": econf.to_dict(),
        "norm_stats": stats.to_dict(),
        "history": history,
        "best_epoch": best_epoch,
        "best_val_loss": best_val,
        "stopped_epoch": history[-1]["epoch"] if history else 0,
    }
    if checkpoint_path is not None:
        torch.save(checkpoint, checkpoint_path)
    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            json.dump(history, fh, indent=2)
            fh.write("\n")
    return checkpoint


def load_checkpoint(source, device: str = "cpu"):
    """Rebuild (model, norm stats, config) from a checkpoint dict or file."""
    ckpt = source if isinstance(source, dict) else torch.load(
        source, map_location=device, weights_only=False)
    econf = EmulatorConfig(**ckpt["config"])
    model = RunoutEmulator(econf).to(device)
    model.load_state_dict(ckpt["model_state"])
    model.eval()
    stats = NormStats.from_dict(ckpt["norm_stats"])
    return model, stats, econf
