"""Dataset manifest model, frame sampling, horizon truncation and splits.

On disk a dataset is one directory per clip with one subdirectory per
branch holding 15 zero-padded PNG frames, plus a single ``manifest.csv``
with one record per clip.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .labels import ManeuverLabel

FRAMES_PER_CLIP = 15
FRAMES_PER_SECOND = 3
CLIP_SECONDS = 5

BRANCH_KINDS = (
    "inside_appearance",
    "outside_appearance",
    "inside_flow",
    "outside_flow",
)

MANIFEST_HEADER = [
    "clip_id",
    "label",
    "driver_id",
    "inside_dir",
    "outside_dir",
    "inside_flow_dir",
    "outside_flow_dir",
]

_BRANCH_COLUMNS = dict(zip(BRANCH_KINDS, MANIFEST_HEADER[3:]))


class ClipTooShortError(ValueError):
    pass


class StratificationError(ValueError):
    pass


@dataclass
class Clip:
    """Per-branch frame arrays (n, H, W, 3) uint8 plus label and provenance."""

    id: str
    label: ManeuverLabel
    driver_id: str
    branches: dict[str, np.ndarray]

    def validate(self, expect_frames: int | None = FRAMES_PER_CLIP) -> None:
        for kind, frames in self.branches.items():
            if kind not in BRANCH_KINDS:
                raise ValueError(f"unknown branch kind {kind!r}")
            if frames.ndim != 4 or frames.shape[-1] != 3:
                raise ValueError(f"branch {kind}: expected (n, H, W, 3), got {frames.shape}")
            if expect_frames is not None and frames.shape[0] != expect_frames:
                raise ValueError(
                    f"branch {kind}: expected {expect_frames} frames, got {frames.shape[0]}"
                )
            if frames.dtype != np.uint8:
                raise ValueError(f"branch {kind}: expected uint8 frames")

    def copy(self) -> "Clip":
        return Clip(
            id=self.id,
            label=self.label,
            driver_id=self.driver_id,
            branches={k: v.copy() for k, v in self.branches.items()},
        )


@dataclass
class ManifestRecord:
    clip_id: str
    label: ManeuverLabel
    driver_id: str
    branch_dirs: dict[str, str]


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    root: Path | None = None

    def __post_init__(self) -> None:
        ids = [r.clip_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate clip ids in manifest")

    def __len__(self) -> int:
        return len(self.records)

    def class_counts(self) -> dict[ManeuverLabel, int]:
        counts = {label: 0 for label in ManeuverLabel}
        for r in self.records:
            counts[r.label] += 1
        return counts

    def subset(self, clip_ids: set[str]) -> "DatasetManifest":
        return DatasetManifest(
            records=[r for r in self.records if r.clip_id in clip_ids], root=self.root
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(MANIFEST_HEADER)
            for r in self.records:
                writer.writerow(
                    [r.clip_id, r.label.value, r.driver_id]
                    + [r.branch_dirs.get(k, "") for k in BRANCH_KINDS]
                )

    @staticmethod
    def load(path: str | Path) -> "DatasetManifest":
        path = Path(path)
        records = []
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != MANIFEST_HEADER:
                raise ValueError(f"bad manifest header: {header}")
            for row in reader:
                clip_id, label, driver_id, *dirs = row
                records.append(
                    ManifestRecord(
                        clip_id=clip_id,
                        label=ManeuverLabel(label),
                        driver_id=driver_id,
                        branch_dirs={k: d for k, d in zip(BRANCH_KINDS, dirs) if d},
                    )
                )
        return DatasetManifest(records=records, root=path.parent)


def load_frames(directory: str | Path) -> np.ndarray:
    directory = Path(directory)
    files = sorted(directory.glob("f*.png"))
    if not files:
        raise FileNotFoundError(f"no frames in {directory}")
    frames = np.stack([np.asarray(Image.open(f).convert("RGB")) for f in files])
    return frames.astype(np.uint8)


def save_frames(frames: np.ndarray, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        Image.fromarray(frame).save(directory / f"f{i:03d}.png")


def load_clip(record: ManifestRecord, root: str | Path | None = None) -> Clip:
    root = Path(root) if root is not None else Path(".")
    branches = {
        kind: load_frames(root / d) for kind, d in record.branch_dirs.items()
    }
    return Clip(
        id=record.clip_id,
        label=record.label,
        driver_id=record.driver_id,
        branches=branches,
    )


def sample_indices(length: int, n: int = FRAMES_PER_CLIP) -> list[int]:
    """Uniform index grid over [0, length-1], endpoints always included."""
    if length < n:
        raise ClipTooShortError("clip too short")
    if n < 2:
        raise ValueError("need at least 2 samples")
    # round half up: floor(x + 0.5)
    return [math.floor(i * (length - 1) / (n - 1) + 0.5) for i in range(n)]


def sample_frames(raw: np.ndarray, n: int = FRAMES_PER_CLIP) -> np.ndarray:
    return raw[sample_indices(len(raw), n)]


@dataclass(frozen=True)
class HorizonSpec:
    """Seconds before the maneuver at which the prediction is made."""

    T: int

    def __post_init__(self) -> None:
        if self.T not in (-4, -3, -2, -1, 0):
            raise ValueError(f"horizon T must be in -4..0, got {self.T}")

    @property
    def observed_frames(self) -> int:
        return FRAMES_PER_SECOND * (CLIP_SECONDS + self.T)


def truncate_to_horizon(clip: Clip, h: HorizonSpec) -> Clip:
    n = h.observed_frames
    return Clip(
        id=clip.id,
        label=clip.label,
        driver_id=clip.driver_id,
        branches={k: v[:n].copy() for k, v in clip.branches.items()},
    )


def _by_class(manifest: DatasetManifest) -> dict[ManeuverLabel, list[ManifestRecord]]:
    groups: dict[ManeuverLabel, list[ManifestRecord]] = {}
    for r in manifest.records:
        groups.setdefault(r.label, []).append(r)
    return groups


def _shuffled_ids(records: list[ManifestRecord], rng: np.random.Generator) -> list[str]:
    ids = sorted(r.clip_id for r in records)
    rng.shuffle(ids)
    return ids


def holdout_split(
    manifest: DatasetManifest, ratio: float, seed: int
) -> tuple[DatasetManifest, DatasetManifest]:
    """Stratified train/test split; `ratio` is the training fraction."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    groups = _by_class(manifest)
    for label, recs in groups.items():
        if len(recs) < 2:
            raise StratificationError("class too small to stratify")

    target_train = round(ratio * len(manifest))
    # floor per class, then hand out the remainder by largest fractional part
    labels = sorted(groups, key=lambda l: l.value)
    exact = {l: ratio * len(groups[l]) for l in labels}
    take = {l: math.floor(exact[l]) for l in labels}
    remainder = target_train - sum(take.values())
    by_frac = sorted(labels, key=lambda l: (-(exact[l] - take[l]), l.value))
    for l in by_frac[:remainder]:
        take[l] += 1

    rng = np.random.default_rng(seed)
    train_ids: set[str] = set()
    for l in labels:
        ids = _shuffled_ids(groups[l], rng)
        train_ids.update(ids[: take[l]])

    test_ids = {r.clip_id for r in manifest.records} - train_ids
    return manifest.subset(train_ids), manifest.subset(test_ids)


@dataclass
class FoldPlan:
    k: int
    assignment: dict[str, int]

    def fold_ids(self, fold: int) -> set[str]:
        return {cid for cid, f in self.assignment.items() if f == fold}

    def fold_sizes(self) -> list[int]:
        return [len(self.fold_ids(i)) for i in range(self.k)]


def stratified_kfold(manifest: DatasetManifest, k: int, seed: int) -> FoldPlan:
    if k < 2:
        raise ValueError("k must be >= 2")
    groups = _by_class(manifest)
    for label, recs in groups.items():
        if len(recs) < k:
            raise StratificationError("insufficient clips for stratification")

    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    for offset, label in enumerate(sorted(groups, key=lambda l: l.value)):
        ids = _shuffled_ids(groups[label], rng)
        # stagger the starting fold per class so remainders spread evenly
        for i, cid in enumerate(ids):
            assignment[cid] = (i + offset) % k
    return FoldPlan(k=k, assignment=assignment)


def compute_flow_standin(frames: np.ndarray) -> np.ndarray:
    """Color-coded frame differences standing in for real optical flow.

    Positive intensity change maps to the red channel, negative to blue,
    absolute magnitude to green. Frame 0 duplicates frame 1's flow.
    """
    if len(frames) < 2:
        raise ValueError("need at least 2 frames for flow")
    gray = frames.astype(np.int16).mean(axis=-1)
    out = np.zeros(frames.shape, dtype=np.uint8)
    for i in range(1, len(frames)):
        d = gray[i] - gray[i - 1]
        out[i, ..., 0] = np.clip(d, 0, 255)
        out[i, ..., 2] = np.clip(-d, 0, 255)
        out[i, ..., 1] = np.clip(np.abs(d), 0, 255)
    out[0] = out[1]
    return out
