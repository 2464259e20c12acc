"""Configuration validation and config-file parsing."""

import json

import pytest

from actune.config import ConfigError, ExperimentConfig, TrainingParams, load_config


class TestValidation:
    def test_defaults_are_valid(self):
        cfg = ExperimentConfig()
        assert cfg.B * cfg.T == cfg.b
        assert cfg.M <= cfg.K

    def test_default_budget_split(self):
        """10 rounds over a 1000-label budget query 100 per round, starting
        from 100 initial labels."""
        cfg = ExperimentConfig()
        assert (cfg.T, cfg.b, cfg.B, cfg.init_labeled) == (10, 1000, 100, 100)

    def test_budget_mismatch(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(T=10, b=999, B=100)

    def test_m_bounded_by_k(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(K=5, M=6)

    def test_momentum_order(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(m_low=0.9, m_high=0.8)
        with pytest.raises(ConfigError):
            ExperimentConfig(m_low=0.0, m_high=0.8)

    def test_gamma_open_interval(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(gamma=1.0)
        with pytest.raises(ConfigError):
            ExperimentConfig(gamma=0.0)

    def test_negative_weights(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(beta=-0.1)
        with pytest.raises(ConfigError):
            ExperimentConfig(lambda_=-1.0)

    def test_unknown_measure(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(uncertainty_measure="magic")

    def test_bank_mode_pairing(self):
        assert ExperimentConfig(uncertainty_measure="entropy").resolved_bank_mode() == "prediction"
        assert ExperimentConfig(uncertainty_measure="cal").resolved_bank_mode() == "value"
        assert ExperimentConfig(uncertainty_measure="cal", bank_mode="prediction").resolved_bank_mode() == "prediction"

    def test_training_params(self):
        with pytest.raises(ConfigError):
            TrainingParams(lr=0.0).validate()


class TestFromDict:
    def test_lambda_key_maps(self):
        cfg = ExperimentConfig.from_dict({"lambda": 2.5})
        assert cfg.lambda_ == 2.5
        assert cfg.to_dict()["lambda"] == 2.5

    def test_b_derived_from_big_b(self):
        cfg = ExperimentConfig.from_dict({"T": 5, "B": 20})
        assert cfg.b == 100

    def test_big_b_derived_from_b(self):
        cfg = ExperimentConfig.from_dict({"T": 5, "b": 100})
        assert cfg.B == 20

    def test_indivisible_budget_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"T": 3, "b": 100})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"rounds": 10})

    def test_round_trip(self):
        cfg = ExperimentConfig(T=4, b=40, B=10, K=8, M=3, seed=9)
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg


class TestConfigFile:
    def test_load_with_sections(self, tmp_path):
        data = {
            "T": 2,
            "B": 5,
            "init_labeled": 10,
            "K": 4,
            "M": 2,
            "k_st": 5,
            "pool": {"embeddings": "x.afv", "class_count": 3, "oracle": True, "labels": "y.csv"},
            "service": {"bind": "0.0.0.0:9000", "token": "secret"},
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(data))
        fc = load_config(path)
        assert fc.experiment.b == 10
        assert fc.pool.class_count == 3
        assert fc.service.token == "secret"
        assert fc.resolve("x.afv") == tmp_path / "x.afv"

    def test_bad_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)
