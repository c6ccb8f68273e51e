"""Conditioned encoder-decoder network for runout prediction.

A U-Net-style architecture over an 8-channel terrain/source stack, with the
3-vector of flow parameters (volume, density, cohesion) injected by
feature-wise linear modulation after every encoder stage. Skip connections
pass through additive attention gates. Two heads share the decoder: one
produces footprint logits, the other predicts non-negative deposit
thickness from the decoder features concatenated with the hard-thresholded
mask, which keeps deposits inside the predicted footprint.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class EmulatorConfig:
    c_in: int = 8
    param_dim: int = 3
    base_width: int = 32
    encoder_stages: int = 4
    dropout: float = 0.2
    groupnorm_groups: int = 8
    mask_threshold: float = 0.5
    loss_alpha: float = 1.0
    loss_beta: float = 0.1

    @property
    def stage_widths(self) -> list[int]:
        return [self.base_width * 2**i for i in range(self.encoder_stages)]

    @property
    def bottleneck_width(self) -> int:
        return self.base_width * 2**self.encoder_stages

    def to_dict(self) -> dict:
        return {
            "c_in": self.c_in,
            "param_dim": self.param_dim,
            "base_width": self.base_width,
            "encoder_stages": self.encoder_stages,
            "dropout": self.dropout,
            "groupnorm_groups": self.groupnorm_groups,
            "mask_threshold": self.mask_threshold,
            "loss_alpha": self.loss_alpha,
            "loss_beta": self.loss_beta,
        }


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions with GroupNorm, ReLU and dropout; the skip path
    gets a 1x1 projection whenever the channel count changes."""

    def __init__(self, c_in: int, c_out: int, groups: int, dropout: float):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.norm1 = nn.GroupNorm(groups, c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.norm2 = nn.GroupNorm(groups, c_out)
        self.drop = nn.Dropout2d(dropout)
        self.proj = nn.Conv2d(c_in, c_out, 1) if c_in != c_out else nn.Identity()
        self.act = nn.ReLU(inplace=True)

    def forward(self, x):
        residual = self.proj(x)
        out = self.act(self.norm1(self.conv1(x)))
        out = self.drop(out)
        out = self.norm2(self.conv2(out))
        return self.act(out + residual)


class FiLMLayer(nn.Module):
    """Per-channel scale and shift predicted from the parameter vector by
    two small perceptrons; the scale head starts at identity."""

    def __init__(self, param_dim: int, channels: int, hidden: int = 32):
        super().__init__()
        self.scale_mlp = nn.Sequential(
            nn.Linear(param_dim, hidden), nn.ReLU(), nn.Linear(hidden, channels)
        )
        self.shift_mlp = nn.Sequential(
            nn.Linear(param_dim, hidden), nn.ReLU(), nn.Linear(hidden, channels)
        )
        nn.init.zeros_(self.scale_mlp[-1].weight)
        nn.init.ones_(self.scale_mlp[-1].bias)
        nn.init.zeros_(self.shift_mlp[-1].weight)
        nn.init.zeros_(self.shift_mlp[-1].bias)

    def forward(self, features, params):
        gamma = self.scale_mlp(params)[:, :, None, None]
        beta = self.shift_mlp(params)[:, :, None, None]
        return gamma * features + beta


class AttentionGate(nn.Module):
    """Additive attention producing a spatial mask in [0, 1] that modulates
    the skip connection."""

    def __init__(self, skip_channels: int, gate_channels: int):
        super().__init__()
        inter = max(skip_channels // 2, 1)
        self.w_skip = nn.Conv2d(skip_channels, inter, 1)
        self.w_gate = nn.Conv2d(gate_channels, inter, 1)
        self.psi = nn.Conv2d(inter, 1, 1)
        self.act = nn.ReLU(inplace=True)

    def mask(self, skip, gate):
        if gate.shape[-2:] != skip.shape[-2:]:
            gate = nn.functional.interpolate(gate, size=skip.shape[-2:], mode="bilinear",
                                             align_corners=False)
        return torch.sigmoid(self.psi(self.act(self.w_skip(skip) + self.w_gate(gate))))

    def forward(self, skip, gate):
        return self.mask(skip, gate) * skip


class RunoutEmulator(nn.Module):
    """Dual-head conditioned U-Net; see the module docstring."""

    def __init__(self, config: EmulatorConfig = EmulatorConfig()):
        super().__init__()
        self.config = config
        widths = config.stage_widths
        g, p = config.groupnorm_groups, config.dropout

        self.encoder = nn.ModuleList()
        self.films = nn.ModuleList()
        c_prev = config.c_in
        for w in widths:
            self.encoder.append(ResidualBlock(c_prev, w, g, p))
            self.films.append(FiLMLayer(config.param_dim, w))
            c_prev = w
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = ResidualBlock(widths[-1], config.bottleneck_width, g, p)

        self.ups = nn.ModuleList()
        self.gates = nn.ModuleList()
        self.decoder = nn.ModuleList()
        c_prev = config.bottleneck_width
        for w in reversed(widths):
            self.ups.append(nn.ConvTranspose2d(c_prev, w, 2, stride=2))
            self.gates.append(AttentionGate(skip_channels=w, gate_channels=w))
            self.decoder.append(ResidualBlock(2 * w, w, g, p))
            c_prev = w

        self.mask_head = nn.Conv2d(widths[0], 1, 1)
        self.thickness_head = nn.Conv2d(widths[0] + 1, 1, 1)

    def forward(self, stack, params):
        """Returns (mask_logits, thickness), each (N, 1, H, W); H and W must
        be divisible by 2**encoder_stages."""
        down = 2**self.config.encoder_stages
        if stack.shape[-1] % down or stack.shape[-2] % down:
            raise ValueError(
                f"tile size {tuple(stack.shape[-2:])} not divisible by {down}"
            )
        skips = []
        x = stack
        for block, film in zip(self.encoder, self.films):
            x = film(block(x), params)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, gate, block, skip in zip(self.ups, self.gates, self.decoder,
                                         reversed(skips)):
            x = up(x)
            x = block(torch.cat([x, gate(skip, x)], dim=1))

        logits = self.mask_head(x)
        hard_mask = (torch.sigmoid(logits) > self.config.mask_threshold).to(x.dtype)
        thickness = torch.relu(self.thickness_head(torch.cat([x, hard_mask], dim=1)))
        return logits, thickness


def composite_loss(logits, thickness, target_mask, target_h,
                   alpha: float = 1.0, beta: float = 0.1):
    """Segmentation (BCE + Dice) plus masked thickness regression.

    The thickness term is mean-squared error over the true mask plus a
    beta-weighted penalty over its complement, which pushes deposits to
    zero outside the footprint.
    """
    target_mask = target_mask.to(logits.dtype)
    bce = nn.functional.binary_cross_entropy_with_logits(logits, target_mask)
    probs = torch.sigmoid(logits)
    eps = 1e-7
    dice = 1.0 - (2.0 * (probs * target_mask).sum() + eps) / (
        probs.sum() + target_mask.sum() + eps
    )
    sq_err = (thickness - target_h) ** 2
    n_in = target_mask.sum()
    n_out = (1.0 - target_mask).sum()
    mse_in = (sq_err * target_mask).sum() / torch.clamp(n_in, min=1.0)
    mse_out = (sq_err * (1.0 - target_mask)).sum() / torch.clamp(n_out, min=1.0)
    return bce + dice + alpha * (mse_in + beta * mse_out)
