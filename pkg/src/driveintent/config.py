"""Experiment configuration: profiles, file loading, overrides, resolution.

Precedence (lowest first): profile defaults < DRIVEINTENT_* environment
variables < config file < command-line key=value overrides < dedicated
flags. Every run writes a `resolved_config.yaml` capturing the effective
values.
"""

from __future__ import annotations

import copy
import os
from pathlib import Path

import yaml

from .augment import AugmixParams, AugPipelineConfig, CutoutParams, PRESETS
from .net import DropBlockParams, NetConfig, Scenario
from .train import TrainConfig

ENV_PREFIX = "DRIVEINTENT_"

_DESK = {
    "profile": "desk",
    "data": {
        "root": "data",
        "n_clips": 500,
        "seed": 7,
        "holdout_ratio": 0.8,
        "val_fraction": 0.0,
        "appearance_size": [64, 64],
        "flow_size": [64, 192],
    },
    "augment": {
        "preset": "B",
        "flip_prob": 0.5,
        "translate_max": 4,
        "cutout_side": 16,
        "augmix": {"width": 3, "max_depth": 3, "alpha": 1.0},
    },
    "model": {
        "scenario": "both",
        "backbone": "tiny_conv",
        "backbone_channels": [16, 32, 64],
        "appearance_lstm_units": 256,
        "flow_lstm_units": 128,
        "attention_dim": 64,
        "fusion_dense_units": 256,
        "fusion_dropout": 0.45,
        "flow_patch": 16,
        "dropblock": {"enabled": True, "block_size": 5, "keep_prob": 0.9},
    },
    "train": {
        "epochs": 12,
        "batch_size": 5,
        "learning_rate": 0.0003,
        "loss": "cross_entropy",
        "label_smoothing": 0.0,
        "isda_lambda0": 0.5,
        "seed": 7,
    },
    "eval": {
        "horizons": [0, -1, -2, -3, -4],
        "otc": False,
        "kfold_k": 5,
    },
}

# full-scale settings as published: 320 epochs, 128x128 appearance frames,
# 128x384 flow frames, LSTM(512), dense 512, all augmentations
_PAPER_OVERRIDES = {
    "profile": "paper",
    "data": {"appearance_size": [128, 128], "flow_size": [128, 384]},
    "augment": {"preset": "E", "cutout_side": 32},
    "model": {
        "backbone_channels": [16, 32, 64, 128],
        "appearance_lstm_units": 512,
        "attention_dim": 128,
        "fusion_dense_units": 512,
    },
    "train": {"epochs": 320, "label_smoothing": 0.1},
}

PROFILES = ("desk", "paper")


class ConfigError(ValueError):
    pass


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def profile_defaults(profile: str) -> dict:
    if profile == "desk":
        return copy.deepcopy(_DESK)
    if profile == "paper":
        return _deep_merge(_DESK, _PAPER_OVERRIDES)
    raise ConfigError(f"unknown profile {profile!r}")


def _env_overrides(environ) -> dict:
    out: dict = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        rest = key[len(ENV_PREFIX) :].lower()
        if "__" not in rest:
            continue
        section, field = rest.split("__", 1)
        out.setdefault(section, {})[field] = yaml.safe_load(raw)
    return out


def apply_dotted(cfg: dict, dotted: str, raw_value: str) -> None:
    """Apply one `section.key=value` override; value is YAML-parsed."""
    parts = dotted.split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown config section {dotted!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[parts[-1]] = yaml.safe_load(raw_value)


def load_config(
    path: str | Path | None = None,
    profile: str | None = None,
    overrides: list[str] | None = None,
    environ=None,
) -> dict:
    file_cfg: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        try:
            file_cfg = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"config parse error in {path}: {e}") from e
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"config {path} must be a mapping of sections")

    effective_profile = profile or file_cfg.get("profile", "desk")
    cfg = profile_defaults(effective_profile)
    cfg = _deep_merge(cfg, _env_overrides(environ if environ is not None else os.environ))
    cfg = _deep_merge(cfg, file_cfg)
    cfg["profile"] = effective_profile
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        apply_dotted(cfg, dotted, raw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    for section in ("data", "augment", "model", "train", "eval"):
        if section not in cfg or not isinstance(cfg[section], dict):
            raise ConfigError(f"missing config section {section!r}")
    preset = cfg["augment"]["preset"]
    if preset not in PRESETS:
        raise ConfigError(f"augment.preset must be one of A-E, got {preset!r}")
    if cfg["model"]["scenario"] not in [s.value for s in Scenario]:
        raise ConfigError(f"bad model.scenario {cfg['model']['scenario']!r}")
    for T in cfg["eval"]["horizons"]:
        if T not in (-4, -3, -2, -1, 0):
            raise ConfigError(f"eval.horizons entries must be in -4..0, got {T}")


def dump_resolved(cfg: dict, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg, sort_keys=True))


def net_config_from(cfg: dict) -> NetConfig:
    m = cfg["model"]
    d = cfg["data"]
    return NetConfig(
        scenario=Scenario(m["scenario"]),
        appearance_shape=tuple(d["appearance_size"]),
        flow_shape=tuple(d["flow_size"]),
        backbone_channels=tuple(m["backbone_channels"]),
        appearance_lstm_units=m["appearance_lstm_units"],
        flow_lstm_units=m["flow_lstm_units"],
        attention_dim=m["attention_dim"],
        fusion_dense_units=m["fusion_dense_units"],
        fusion_dropout=m["fusion_dropout"],
        flow_patch=m["flow_patch"],
        dropblock=DropBlockParams(
            block_size=m["dropblock"]["block_size"],
            keep_prob=m["dropblock"]["keep_prob"],
        ),
        dropblock_enabled=m["dropblock"]["enabled"],
    )


def train_config_from(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        learning_rate=t["learning_rate"],
        loss=t["loss"],
        label_smoothing=t["label_smoothing"],
        isda_lambda0=t["isda_lambda0"],
        seed=t["seed"],
    )


def aug_config_from(cfg: dict, preset: str | None = None) -> AugPipelineConfig:
    a = cfg["augment"]
    letter = preset or a["preset"]
    return AugPipelineConfig(
        enabled=set(PRESETS[letter]),
        flip_prob=a["flip_prob"],
        translate_max=a["translate_max"],
        cutout=CutoutParams(side=a["cutout_side"]),
        augmix=AugmixParams(**a["augmix"]),
    )
