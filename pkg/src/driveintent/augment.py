"""Image-space augmentations, the OTC test-time variants and the A-E presets.

All operations work on uint8 frame stacks of shape (n, H, W, 3), take an
explicit numpy Generator when randomized, and preserve shape and the
[0, 255] range. One flip decision governs all branches of a clip, and
appearance-only ops (cutout, augmix) never touch the flow branches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import Clip
from .labels import ManeuverLabel

APPEARANCE_BRANCHES = ("inside_appearance", "outside_appearance")
FLOW_BRANCHES = ("inside_flow", "outside_flow")

TRANSLATE_MAX = 4


@dataclass(frozen=True)
class TranslateParams:
    dx: int = 0
    dy: int = 0

    def __post_init__(self) -> None:
        if abs(self.dx) > TRANSLATE_MAX or abs(self.dy) > TRANSLATE_MAX:
            raise ValueError(f"translation limited to +/-{TRANSLATE_MAX} pixels")


@dataclass(frozen=True)
class CutoutParams:
    side: int = 16
    fill: int = 0


@dataclass(frozen=True)
class AugmixParams:
    width: int = 3
    max_depth: int = 3
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.width < 1 or self.max_depth < 1 or self.alpha <= 0:
            raise ValueError("invalid augmix parameters")


def translate(frames: np.ndarray, p: TranslateParams) -> np.ndarray:
    """Shift all frames by (dx, dy), vacated pixels zero-filled."""
    out = np.zeros_like(frames)
    n, h, w = frames.shape[:3]
    dy, dx = p.dy, p.dx
    ys = slice(max(dy, 0), h + min(dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    ys_src = slice(max(-dy, 0), h + min(-dy, 0))
    xs_src = slice(max(-dx, 0), w + min(-dx, 0))
    out[:, ys, xs] = frames[:, ys_src, xs_src]
    return out


def flip_lr(frames: np.ndarray, label: ManeuverLabel) -> tuple[np.ndarray, ManeuverLabel]:
    return np.ascontiguousarray(frames[:, :, ::-1]), label.mirror()


def cutout(frames: np.ndarray, p: CutoutParams, rng: np.random.Generator) -> np.ndarray:
    h, w = frames.shape[1:3]
    if not 0 < p.side <= min(h, w):
        raise ValueError("cutout side exceeds frame size")
    y = int(rng.integers(0, h - p.side + 1))
    x = int(rng.integers(0, w - p.side + 1))
    out = frames.copy()
    out[:, y : y + p.side, x : x + p.side] = p.fill
    return out


def autocontrast(frame: np.ndarray) -> np.ndarray:
    out = np.empty_like(frame)
    for c in range(frame.shape[-1]):
        ch = frame[..., c]
        lo, hi = int(ch.min()), int(ch.max())
        if lo == hi:
            out[..., c] = ch
        else:
            scaled = (ch.astype(np.float64) - lo) * (255.0 / (hi - lo))
            out[..., c] = np.clip(np.round(scaled), 0, 255).astype(np.uint8)
    return out


def equalize(frame: np.ndarray) -> np.ndarray:
    out = np.empty_like(frame)
    for c in range(frame.shape[-1]):
        ch = frame[..., c]
        hist = np.bincount(ch.ravel(), minlength=256)
        cdf = hist.cumsum()
        nonzero = cdf[hist > 0]
        if len(nonzero) <= 1:
            out[..., c] = ch
            continue
        cdf_min = nonzero[0]
        lut = np.round((cdf - cdf_min) * 255.0 / (cdf[-1] - cdf_min))
        out[..., c] = np.clip(lut, 0, 255).astype(np.uint8)[ch]
    return out


def posterize(frame: np.ndarray, bits: int) -> np.ndarray:
    if not 1 <= bits <= 8:
        raise ValueError("bits must be in [1, 8]")
    mask = np.uint8(0xFF << (8 - bits) & 0xFF)
    return frame & mask


def solarize(frame: np.ndarray, threshold: int) -> np.ndarray:
    if not 0 <= threshold <= 255:
        raise ValueError("threshold must be in [0, 255]")
    return np.where(frame >= threshold, 255 - frame, frame)


def _random_op(frame: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    op = rng.integers(0, 4)
    if op == 0:
        return autocontrast(frame)
    if op == 1:
        return equalize(frame)
    if op == 2:
        return posterize(frame, int(rng.integers(3, 8)))
    return solarize(frame, int(rng.integers(0, 256)))


def augmix(frame: np.ndarray, p: AugmixParams, rng: np.random.Generator) -> np.ndarray:
    """Mix the frame with a Dirichlet-weighted blend of short op chains."""
    w = rng.dirichlet([p.alpha] * p.width)
    m = rng.beta(p.alpha, p.alpha)
    mixed = np.zeros(frame.shape, dtype=np.float64)
    for i in range(p.width):
        chain = frame
        for _ in range(int(rng.integers(1, p.max_depth + 1))):
            chain = _random_op(chain, rng)
        mixed += w[i] * chain.astype(np.float64)
    out = m * frame.astype(np.float64) + (1.0 - m) * mixed
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


@dataclass
class AugPipelineConfig:
    """Which augmentations are enabled, with their parameters.

    Presets (ablation ladder): A=none, B=fliplr, C=B+cutout, D=C+augmix,
    E=D+translate (label smoothing for E lives in the training config).
    """

    enabled: set[str] = field(default_factory=set)
    flip_prob: float = 0.5
    translate_max: int = TRANSLATE_MAX
    cutout: CutoutParams = field(default_factory=CutoutParams)
    augmix: AugmixParams = field(default_factory=AugmixParams)

    _OPS = ("fliplr", "translate", "cutout", "augmix")

    def __post_init__(self) -> None:
        unknown = self.enabled - set(self._OPS)
        if unknown:
            raise ValueError(f"unknown augmentation ops: {sorted(unknown)}")


PRESETS: dict[str, set[str]] = {
    "A": set(),
    "B": {"fliplr"},
    "C": {"fliplr", "cutout"},
    "D": {"fliplr", "cutout", "augmix"},
    "E": {"fliplr", "cutout", "augmix", "translate"},
}

# preset E additionally enables label smoothing in the training config
PRESET_LABEL_SMOOTHING = {"A": 0.0, "B": 0.0, "C": 0.0, "D": 0.0, "E": 0.1}


def preset_config(letter: str, **kwargs) -> AugPipelineConfig:
    if letter not in PRESETS:
        raise ValueError(f"unknown preset {letter!r}, expected one of A-E")
    return AugPipelineConfig(enabled=set(PRESETS[letter]), **kwargs)


def build_pipeline(cfg: AugPipelineConfig):
    """Return an augmentor (clip, rng) -> clip applying the enabled ops.

    Application order: translate -> fliplr -> cutout -> augmix. Flow
    branches receive only translate and fliplr; the flip label swap is
    applied exactly once per clip across all branches.
    """

    def apply(clip: Clip, rng: np.random.Generator) -> Clip:
        branches = dict(clip.branches)
        label = clip.label

        if "translate" in cfg.enabled:
            dx = int(rng.integers(-cfg.translate_max, cfg.translate_max + 1))
            dy = int(rng.integers(-cfg.translate_max, cfg.translate_max + 1))
            p = TranslateParams(dx=dx, dy=dy)
            branches = {k: translate(v, p) for k, v in branches.items()}

        if "fliplr" in cfg.enabled and rng.random() < cfg.flip_prob:
            flipped = {}
            for k, v in branches.items():
                flipped[k], _ = flip_lr(v, label)
            branches = flipped
            label = label.mirror()

        if "cutout" in cfg.enabled:
            for k in APPEARANCE_BRANCHES:
                if k in branches:
                    branches[k] = cutout(branches[k], cfg.cutout, rng)

        if "augmix" in cfg.enabled:
            for k in APPEARANCE_BRANCHES:
                if k in branches:
                    branches[k] = np.stack(
                        [augmix(f, cfg.augmix, rng) for f in branches[k]]
                    )

        return Clip(id=clip.id, label=label, driver_id=clip.driver_id, branches=branches)

    return apply


OTC_TRANSLATE = TranslateParams(dx=4, dy=4)


def otc_variants(
    clip: Clip, rng: np.random.Generator, cutout_params: CutoutParams | None = None
) -> list[Clip]:
    """Test-time variants: [original, translated, cutout], labels unchanged."""
    translated = Clip(
        id=clip.id,
        label=clip.label,
        driver_id=clip.driver_id,
        branches={k: translate(v, OTC_TRANSLATE) for k, v in clip.branches.items()},
    )
    cp = cutout_params or CutoutParams()
    cut_branches = dict(clip.branches)
    for k in APPEARANCE_BRANCHES:
        if k in cut_branches:
            cut_branches[k] = cutout(cut_branches[k], cp, rng)
    cut = Clip(
        id=clip.id, label=clip.label, driver_id=clip.driver_id, branches=cut_branches
    )
    return [clip.copy(), translated, cut]
