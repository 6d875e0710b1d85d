import pytest
import yaml

from driveintent.config import (
    ConfigError,
    aug_config_from,
    dump_resolved,
    load_config,
    net_config_from,
    profile_defaults,
    train_config_from,
)
from driveintent.net import Scenario


class TestProfiles:
    def test_desk_defaults(self):
        cfg = profile_defaults("desk")
        assert cfg["train"]["batch_size"] == 5
        assert cfg["train"]["learning_rate"] == pytest.approx(3e-4)
        assert cfg["data"]["appearance_size"] == [64, 64]

    def test_paper_profile_echoes_published_hyperparameters(self):
        cfg = profile_defaults("paper")
        assert cfg["train"]["epochs"] == 320
        assert cfg["train"]["batch_size"] == 5
        assert cfg["train"]["learning_rate"] == pytest.approx(3e-4)
        assert cfg["data"]["appearance_size"] == [128, 128]
        assert cfg["data"]["flow_size"] == [128, 384]
        assert cfg["model"]["appearance_lstm_units"] == 512
        assert cfg["model"]["fusion_dense_units"] == 512
        assert cfg["model"]["fusion_dropout"] == pytest.approx(0.45)
        assert cfg["model"]["dropblock"]["block_size"] == 5

    def test_unknown_profile(self):
        with pytest.raises(ConfigError):
            profile_defaults("cloud")


class TestLoading:
    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(yaml.safe_dump({"train": {"epochs": 3}}))
        cfg = load_config(path)
        assert cfg["train"]["epochs"] == 3
        assert cfg["train"]["batch_size"] == 5  # untouched default

    def test_cli_override_beats_file(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(yaml.safe_dump({"train": {"epochs": 3}}))
        cfg = load_config(path, overrides=["train.epochs=9"])
        assert cfg["train"]["epochs"] == 9

    def test_env_below_file(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(yaml.safe_dump({"train": {"epochs": 3}}))
        env = {"DRIVEINTENT_TRAIN__EPOCHS": "77", "DRIVEINTENT_TRAIN__SEED": "123"}
        cfg = load_config(path, environ=env)
        assert cfg["train"]["epochs"] == 3  # file wins
        assert cfg["train"]["seed"] == 123  # env fills the rest

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(overrides=["train.warmup=1"])

    def test_bad_override_format(self):
        with pytest.raises(ConfigError):
            load_config(overrides=["train.epochs"])

    def test_bad_preset_rejected(self):
        with pytest.raises(ConfigError, match="preset"):
            load_config(overrides=["augment.preset=Z"])

    def test_bad_horizon_rejected(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(yaml.safe_dump({"eval": {"horizons": [0, -7]}}))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")

    def test_resolved_roundtrip(self, tmp_path):
        cfg = load_config(overrides=["train.epochs=2"])
        dump_resolved(cfg, tmp_path / "resolved.yaml")
        reloaded = load_config(tmp_path / "resolved.yaml")
        assert reloaded == cfg


class TestTypedViews:
    def test_net_config(self):
        cfg = load_config()
        net_cfg = net_config_from(cfg)
        assert net_cfg.scenario == Scenario.BOTH
        assert net_cfg.appearance_shape == (64, 64)
        assert net_cfg.flow_shape == (64, 192)
        assert net_cfg.dropblock.block_size == 5

    def test_train_config(self):
        tc = train_config_from(load_config())
        tc.validate()
        assert tc.loss == "cross_entropy"

    def test_aug_config_presets(self):
        cfg = load_config()
        assert aug_config_from(cfg, "A").enabled == set()
        e = aug_config_from(cfg, "E")
        assert e.enabled == {"fliplr", "cutout", "augmix", "translate"}
