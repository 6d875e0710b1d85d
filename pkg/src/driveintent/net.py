"""The four-branch anticipation network.

Appearance branches: per-frame conv backbone -> DropBlock (train only) ->
global average pooling -> LSTM -> global attention. Flow branches: fixed
patch-mean reduction -> two stacked LSTMs, final hidden state. Fusion:
concatenate active branch features -> dense -> dropout -> linear classifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .labels import N_CLASSES


class Scenario(str, Enum):
    INSIDE_ONLY = "inside_only"
    OUTSIDE_ONLY = "outside_only"
    BOTH = "both"

    def active_branches(self) -> tuple[str, ...]:
        if self is Scenario.INSIDE_ONLY:
            return ("inside_appearance", "inside_flow")
        if self is Scenario.OUTSIDE_ONLY:
            return ("outside_appearance", "outside_flow")
        return ("inside_appearance", "outside_appearance", "inside_flow", "outside_flow")


@dataclass(frozen=True)
class DropBlockParams:
    block_size: int = 5
    keep_prob: float = 0.9

    def __post_init__(self) -> None:
        if self.block_size % 2 != 1 or self.block_size < 1:
            raise ValueError("block_size must be odd and positive")
        if not 0 < self.keep_prob <= 1:
            raise ValueError("keep_prob must be in (0, 1]")


@dataclass
class NetConfig:
    scenario: Scenario = Scenario.BOTH
    appearance_shape: tuple[int, int] = (128, 128)
    flow_shape: tuple[int, int] = (128, 384)
    backbone_channels: tuple[int, ...] = (16, 32, 64, 128)
    appearance_lstm_units: int = 512
    flow_lstm_units: int = 128
    attention_dim: int = 128
    fusion_dense_units: int = 512
    fusion_dropout: float = 0.45
    flow_patch: int = 16
    dropblock: DropBlockParams = field(default_factory=DropBlockParams)
    dropblock_enabled: bool = True
    n_classes: int = N_CLASSES

    @property
    def flow_feature_dim(self) -> int:
        gh = self.flow_shape[0] // self.flow_patch
        gw = self.flow_shape[1] // self.flow_patch
        return 3 * gh * gw

    @property
    def fusion_input_dim(self) -> int:
        dim = 0
        for b in self.scenario.active_branches():
            dim += self.appearance_lstm_units if b.endswith("appearance") else self.flow_lstm_units
        return dim


def dropblock(
    feature_map: torch.Tensor,
    p: DropBlockParams,
    training: bool = True,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Structured dropout zeroing contiguous square blocks.

    `feature_map` is (..., C, h, w). Identity in eval mode or when
    keep_prob == 1.
    """
    h, w = feature_map.shape[-2:]
    b = p.block_size
    if b > min(h, w):
        raise ValueError("block_size exceeds feature map size")
    if not training or p.keep_prob >= 1.0:
        return feature_map

    gamma = (
        (1.0 - p.keep_prob) / (b * b) * (h * w) / ((h - b + 1) * (w - b + 1))
    )
    valid_shape = feature_map.shape[:-2] + (h - b + 1, w - b + 1)
    seeds = torch.rand(valid_shape, generator=generator, device=feature_map.device)
    seed_mask = (seeds < gamma).float()
    padded = F.pad(seed_mask, (b - 1, b - 1, b - 1, b - 1))
    block_mask = 1.0 - (
        F.max_pool2d(padded.reshape(-1, 1, *padded.shape[-2:]), b, stride=1)
        .reshape(feature_map.shape[:-2] + (h, w))
    )
    kept = block_mask.sum()
    if kept == 0:
        return feature_map * 0.0
    return feature_map * block_mask * (block_mask.numel() / kept)


class DropBlock2d(nn.Module):
    def __init__(self, params: DropBlockParams):
        super().__init__()
        self.params = params

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return dropblock(x, self.params, training=self.training)


class TinyConvBackbone(nn.Module):
    """Small stride-2 conv stack; output spatial size is input / 2^stages."""

    def __init__(self, channels: tuple[int, ...] = (16, 32, 64, 128)):
        super().__init__()
        layers = []
        c_in = 3
        for c_out in channels:
            layers += [nn.Conv2d(c_in, c_out, 3, stride=2, padding=1), nn.ReLU(inplace=True)]
            c_in = c_out
        self.body = nn.Sequential(*layers)
        self.out_channels = c_in

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)


class GlobalAttention(nn.Module):
    """Additive attention over hidden states, queried by the final state."""

    def __init__(self, hidden_dim: int, attention_dim: int):
        super().__init__()
        self.query_proj = nn.Linear(hidden_dim, attention_dim, bias=False)
        self.key_proj = nn.Linear(hidden_dim, attention_dim, bias=False)
        self.score = nn.Linear(attention_dim, 1, bias=False)

    def forward(self, states: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        # states: (B, n, H); query is the final hidden state
        query = states[:, -1:, :]
        e = self.score(torch.tanh(self.query_proj(query) + self.key_proj(states)))
        alpha = torch.softmax(e.squeeze(-1), dim=1)
        context = torch.sum(alpha.unsqueeze(-1) * states, dim=1)
        return context, alpha


class AppearanceBranch(nn.Module):
    def __init__(self, cfg: NetConfig, backbone: nn.Module | None = None):
        super().__init__()
        self.backbone = backbone or TinyConvBackbone(cfg.backbone_channels)
        self.dropblock = DropBlock2d(cfg.dropblock) if cfg.dropblock_enabled else None
        self.lstm = nn.LSTM(
            self.backbone.out_channels, cfg.appearance_lstm_units, batch_first=True
        )
        self.attention = GlobalAttention(cfg.appearance_lstm_units, cfg.attention_dim)

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        # frames: (B, n, 3, H, W), n in [3, 15]
        b, n = frames.shape[:2]
        feat = self.backbone(frames.reshape(b * n, *frames.shape[2:]))
        if self.dropblock is not None:
            feat = self.dropblock(feat)
        pooled = feat.mean(dim=(-2, -1)).reshape(b, n, -1)
        states, _ = self.lstm(pooled)
        context, _ = self.attention(states)
        return context


def patch_reduce(frames: torch.Tensor, patch: int) -> torch.Tensor:
    """Mean over non-overlapping patch x patch squares, per channel.

    (B, n, 3, H, W) -> (B, n, 3 * (H/patch) * (W/patch))
    """
    b, n = frames.shape[:2]
    pooled = F.avg_pool2d(frames.reshape(b * n, *frames.shape[2:]), patch, stride=patch)
    return pooled.reshape(b, n, -1)


class FlowBranch(nn.Module):
    def __init__(self, cfg: NetConfig):
        super().__init__()
        self.patch = cfg.flow_patch
        self.lstm = nn.LSTM(
            cfg.flow_feature_dim, cfg.flow_lstm_units, num_layers=2, batch_first=True
        )

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        reduced = patch_reduce(frames, self.patch)
        _, (h_n, _) = self.lstm(reduced)
        return h_n[-1]


class ManeuverNet(nn.Module):
    """Four-branch network; inactive branches per scenario are absent."""

    def __init__(self, cfg: NetConfig, backbones: dict[str, nn.Module] | None = None):
        super().__init__()
        self.cfg = cfg
        backbones = backbones or {}
        self.branches = nn.ModuleDict()
        for kind in cfg.scenario.active_branches():
            if kind.endswith("appearance"):
                self.branches[kind] = AppearanceBranch(cfg, backbones.get(kind))
            else:
                self.branches[kind] = FlowBranch(cfg)
        self.fusion = nn.Linear(cfg.fusion_input_dim, cfg.fusion_dense_units)
        self.dropout = nn.Dropout(cfg.fusion_dropout)
        self.classifier = nn.Linear(cfg.fusion_dense_units, cfg.n_classes)

    def features(self, batch: dict[str, torch.Tensor]) -> torch.Tensor:
        parts = []
        for kind in self.cfg.scenario.active_branches():
            if kind not in batch:
                raise ValueError(f"missing branch {kind!r} for scenario {self.cfg.scenario.value}")
            parts.append(self.branches[kind](batch[kind]))
        fused = torch.cat(parts, dim=1)
        return self.dropout(F.relu(self.fusion(fused)))

    def forward(self, batch: dict[str, torch.Tensor]) -> torch.Tensor:
        return self.classifier(self.features(batch))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
