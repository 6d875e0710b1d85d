"""In-memory clip store and tensor assembly shared by training and eval."""

from __future__ import annotations

import numpy as np
import torch
from PIL import Image

from .dataio import Clip, DatasetManifest, load_clip
from .net import NetConfig

APPEARANCE = ("inside_appearance", "outside_appearance")


def _resize_frames(frames: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    if frames.shape[1:3] == (h, w):
        return frames
    return np.stack(
        [
            np.asarray(Image.fromarray(f).resize((w, h), Image.BILINEAR))
            for f in frames
        ]
    ).astype(np.uint8)


class ClipStore:
    """All clips of a manifest held in memory, resized to the model shapes."""

    def __init__(self, manifest: DatasetManifest, net_cfg: NetConfig):
        self.net_cfg = net_cfg
        self.clips: list[Clip] = []
        active = set(net_cfg.scenario.active_branches())
        for record in manifest.records:
            missing = active - set(record.branch_dirs)
            if missing:
                raise FileNotFoundError(
                    f"clip {record.clip_id}: missing branches {sorted(missing)}"
                )
            clip = load_clip(record, manifest.root)
            branches = {}
            for kind in active:
                shape = (
                    net_cfg.appearance_shape
                    if kind in APPEARANCE
                    else net_cfg.flow_shape
                )
                branches[kind] = _resize_frames(clip.branches[kind], shape)
            self.clips.append(
                Clip(
                    id=clip.id,
                    label=clip.label,
                    driver_id=clip.driver_id,
                    branches=branches,
                )
            )

    def __len__(self) -> int:
        return len(self.clips)


def compute_norm_stats(
    clips: list[Clip], max_clips: int = 50
) -> dict[str, tuple[list[float], list[float]]]:
    """Per-branch per-channel mean/std of pixel intensities scaled to [0, 1]."""
    stats = {}
    sample = clips[:max_clips]
    for kind in sample[0].branches:
        stacked = np.concatenate([c.branches[kind] for c in sample]).astype(np.float64) / 255.0
        mean = stacked.mean(axis=(0, 1, 2))
        std = np.maximum(stacked.std(axis=(0, 1, 2)), 1e-4)
        stats[kind] = (mean.tolist(), std.tolist())
    return stats


def clips_to_batch(
    clips: list[Clip],
    norm_stats: dict[str, tuple[list[float], list[float]]],
    branches: tuple[str, ...],
) -> dict[str, torch.Tensor]:
    """Stack same-length clips into normalized (B, n, 3, H, W) tensors."""
    batch = {}
    for kind in branches:
        arr = np.stack([c.branches[kind] for c in clips]).astype(np.float32) / 255.0
        mean, std = norm_stats[kind]
        arr = (arr - np.asarray(mean, dtype=np.float32)) / np.asarray(std, dtype=np.float32)
        batch[kind] = torch.from_numpy(arr).permute(0, 1, 4, 2, 3).contiguous()
    return batch


def batch_labels(clips: list[Clip]) -> torch.Tensor:
    return torch.tensor([c.label.index for c in clips], dtype=torch.long)
