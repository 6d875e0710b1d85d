"""Deterministic synthetic clip generator for desk-scale verification.

Each clip encodes its class in geometry: the inside view shows a bright
gaze marker drifting horizontally toward the maneuver side (partial drift
for lane changes, full drift for turns), the outside view shows a vertical
lane line translating the opposite way. The drift ramps up over the final
two seconds, so late frames carry most of the class signal and horizon
truncation genuinely degrades accuracy. Flow branches are color-coded
differences of consecutive appearance frames.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataio import (
    BRANCH_KINDS,
    FRAMES_PER_CLIP,
    Clip,
    DatasetManifest,
    ManifestRecord,
    compute_flow_standin,
    save_frames,
)
from .labels import CLASS_ORDER, ManeuverLabel

# horizontal drift direction and relative magnitude per class
_DRIFT = {
    ManeuverLabel.GO_STRAIGHT: 0.0,
    ManeuverLabel.LEFT_LANE_CHANGE: -0.45,
    ManeuverLabel.LEFT_TURN: -1.0,
    ManeuverLabel.RIGHT_LANE_CHANGE: 0.45,
    ManeuverLabel.RIGHT_TURN: 1.0,
}

_RAMP_START = 9  # drift begins in the final 2 s (frames 9..14 at 3 fps)


def _ramp(t: int) -> float:
    if t < _RAMP_START:
        return 0.0
    return (t - _RAMP_START + 1) / (FRAMES_PER_CLIP - _RAMP_START)


def _marker_column(label: ManeuverLabel, t: int, width: int) -> int:
    offset = _DRIFT[label] * _ramp(t) * 0.35 * width
    return int(round(width / 2 + offset))


def _inside_frames(
    label: ManeuverLabel, size: tuple[int, int], rng: np.random.Generator
) -> np.ndarray:
    h, w = size
    frames = rng.integers(20, 60, size=(FRAMES_PER_CLIP, h, w, 3)).astype(np.uint8)
    half = max(2, h // 16)
    row = h // 2
    for t in range(FRAMES_PER_CLIP):
        col = _marker_column(label, t, w)
        col = min(max(col, half), w - half - 1)
        frames[t, row - half : row + half, col - half : col + half] = 230
    return frames


def _outside_frames(
    label: ManeuverLabel, size: tuple[int, int], rng: np.random.Generator
) -> np.ndarray:
    h, w = size
    frames = rng.integers(20, 60, size=(FRAMES_PER_CLIP, h, w, 3)).astype(np.uint8)
    for t in range(FRAMES_PER_CLIP):
        # lane line translates opposite to the gaze marker
        offset = -_DRIFT[label] * _ramp(t) * 0.35 * w
        col = int(round(w / 2 + offset))
        col = min(max(col, 1), w - 2)
        frames[t, :, col - 1 : col + 2] = 230
    return frames


def make_clip(
    clip_id: str,
    label: ManeuverLabel,
    driver_id: str,
    rng: np.random.Generator,
    appearance_size: tuple[int, int] = (64, 64),
) -> Clip:
    inside = _inside_frames(label, appearance_size, rng)
    outside = _outside_frames(label, appearance_size, rng)
    return Clip(
        id=clip_id,
        label=label,
        driver_id=driver_id,
        branches={
            "inside_appearance": inside,
            "outside_appearance": outside,
            "inside_flow": compute_flow_standin(inside),
            "outside_flow": compute_flow_standin(outside),
        },
    )


def generate_synthetic(
    n_clips: int,
    seed: int,
    out_dir: str | Path,
    appearance_size: tuple[int, int] = (64, 64),
    n_drivers: int = 10,
) -> DatasetManifest:
    """Write a balanced synthetic dataset and its manifest to `out_dir`."""
    if n_clips < 5 or n_clips % 5 != 0:
        raise ValueError("n_clips must be >= 5 and divisible by 5")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_clips):
        label = CLASS_ORDER[i % 5]
        clip_id = f"c{i:04d}"
        driver_id = f"d{i % n_drivers:02d}"
        clip = make_clip(clip_id, label, driver_id, rng, appearance_size)
        branch_dirs = {}
        for kind in BRANCH_KINDS:
            rel = f"{clip_id}/{kind}"
            save_frames(clip.branches[kind], out_dir / rel)
            branch_dirs[kind] = rel
        records.append(
            ManifestRecord(
                clip_id=clip_id, label=label, driver_id=driver_id, branch_dirs=branch_dirs
            )
        )

    manifest = DatasetManifest(records=records, root=out_dir)
    manifest.save(out_dir / "manifest.csv")
    return manifest
