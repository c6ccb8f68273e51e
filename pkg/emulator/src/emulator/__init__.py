"""Conditioned encoder-decoder emulator for granular-flow runout."""

from .data import (
    NormStats,
    RunSample,
    augment,
    compute_norm_stats,
    load_dataset,
    make_channel_stack,
    scale_params,
)
from .model import (
    AttentionGate,
    EmulatorConfig,
    FiLMLayer,
    ResidualBlock,
    RunoutEmulator,
    composite_loss,
)
from .predict import predict, predict_fields, predict_manifest, write_prediction
from .training import TrainConfig, load_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "EmulatorConfig",
    "TrainConfig",
    "RunoutEmulator",
    "FiLMLayer",
    "AttentionGate",
    "ResidualBlock",
    "composite_loss",
    "NormStats",
    "RunSample",
    "make_channel_stack",
    "scale_params",
    "load_dataset",
    "compute_norm_stats",
    "augment",
    "train",
    "load_checkpoint",
    "predict",
    "predict_fields",
    "predict_manifest",
    "write_prediction",
]
