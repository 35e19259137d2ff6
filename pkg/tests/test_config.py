"""
Tests for settings resolution and experiment configuration validation
"""
import logging
import os

import pytest

from src.models.chain_data import ProposalKind
from src.models.errors import ConfigError
from src.models.experiment_data import ExperimentConfig, ExperimentMode, Settings, validate_settings
from src.utils.config_loader import DEFAULT_CONFIG_PATH, environment_overrides, load_settings, merge
from src.utils.logging_setup import setup_logging


def write_config(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return str(path)


class TestLoadSettings:
    def test_shipped_defaults(self):
        settings = load_settings(str(DEFAULT_CONFIG_PATH), environ={})
        assert settings.model.delta == 0.5
        assert settings.model.sigma is None
        assert settings.sampler.iters == 8000
        assert settings.sampler.burnin == 5000
        assert [phi.label for phi in settings.divergence.phis] == ["tv", "hellinger", "kl", "renyi:2"]
        assert settings.baselines.k == [1, 10]

    def test_precedence(self, tmp_path):
        path = write_config(tmp_path, "sampler:\n  iters: 100\n  burnin: 10\nruntime:\n  seed: 1\n")
        settings = load_settings(path, flags={"runtime": {"seed": 3}, "sampler": {"iters": None}},
                                 environ={"COBPM_SEED": "2", "COBPM_BURNIN": "20"})
        assert settings.runtime.seed == 3
        assert settings.sampler.burnin == 20
        assert settings.sampler.iters == 100

    def test_environment_values_are_typed(self):
        overrides = environment_overrides({"COBPM_DELTA": "0.7", "COBPM_PROPOSAL": "uniform", "COBPM_OUT": ""})
        assert overrides == {"model": {"delta": 0.7}, "sampler": {"proposal": "uniform"}}

    def test_env_file(self, tmp_path, monkeypatch):
        monkeypatch.delenv("COBPM_ITERS", raising=False)
        env_file = tmp_path / ".env"
        env_file.write_text("COBPM_ITERS=120\n")
        try:
            settings = load_settings(write_config(tmp_path, "sampler:\n  burnin: 10\n"), env_file=str(env_file))
        finally:
            os.environ.pop("COBPM_ITERS", None)
        assert settings.sampler.iters == 120

    def test_missing_explicit_config(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(str(tmp_path / "absent.yaml"), environ={})

    def test_malformed_yaml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(write_config(tmp_path, "model: [1, 2\n"), environ={})

    @pytest.mark.parametrize("text", [
        "sampler:\n  iters: 10\n  burnin: 10\n",
        "sampler:\n  thin: 0\n",
        "model:\n  sequence_prior: poisson\n",
        "divergence:\n  phi: jsd\n",
        "divergence:\n  level: 1.5\n",
        "runtime:\n  threads: 0\n",
    ])
    def test_invalid_values(self, tmp_path, text):
        with pytest.raises(ConfigError):
            load_settings(write_config(tmp_path, text), environ={})

    def test_merge_skips_unset(self):
        merged = merge({"model": {"delta": 0.5}}, {"model": {"delta": None, "sigma": 3.0}})
        assert merged == {"model": {"delta": 0.5, "sigma": 3.0}}


class TestSettingsModels:
    def test_hyperparams_default_sigma(self):
        assert Settings().model.hyperparams(4).sigma == 5.0
        assert validate_settings({"model": {"sigma": 2.0}}).model.hyperparams(4).sigma == 2.0

    def test_chain_config(self):
        settings = validate_settings({"sampler": {"iters": 50, "burnin": 10, "proposal": "uniform"}})
        config = settings.sampler.chain_config(settings.model.hyperparams(2), seed=7)
        assert config.proposal == ProposalKind.UNIFORM
        assert config.retained_count == 40
        assert config.seed == 7


class TestExperimentConfig:
    def test_files(self, tmp_path):
        x = tmp_path / "x.csv"
        y = tmp_path / "y.csv"
        x.write_text("0.1\n")
        y.write_text("0.2\n")
        config = ExperimentConfig.build(mode="estimate", x_path=str(x), y_path=str(y))
        assert config.mode == ExperimentMode.ESTIMATE
        assert config.to_dict()["x_path"] == str(x)

    @pytest.mark.parametrize("values", [
        {"mode": "estimate"},
        {"mode": "estimate", "p": "beta:6,5", "q": "beta:5,6"},
        {"mode": "estimate", "p": "beta:6,5"},
        {"mode": "estimate", "x_path": "/nonexistent/x.csv", "y_path": "/nonexistent/y.csv"},
        {"mode": "estimate", "setup": "beta-1d", "p": "beta:6,5", "q": "beta:5,6", "n": 10},
        {"mode": "sweep", "setup": "beta-1d"},
        {"mode": "sanity", "p": "uniform:2", "q": "uniform:2"},
        {"mode": "sweep", "setup": "beta-1d", "sizes": [50], "estimators": ["nwj"]},
        {"mode": "estimate", "setup": "beta-1d", "n": 50, "augment": 1.0},
        {"mode": "sweep", "setup": "beta-1d", "sizes": [50], "replicas": 0},
        {"mode": "calibrate", "setup": "beta-1d"},
    ])
    def test_rejected(self, values):
        with pytest.raises(ConfigError):
            ExperimentConfig.build(**values)

    def test_oracle_from_setup(self):
        config = ExperimentConfig.build(mode="oracle", setup="beta-1d")
        assert config.settings.oracle.mc_draws == 10_000_000


class TestLoggingSetup:
    def test_file_handler(self, tmp_path):
        settings = validate_settings({"logging": {"level": "DEBUG", "file": str(tmp_path / "logs" / "run.log")}})
        setup_logging(settings.logging)
        logging.getLogger("src.test").debug("hello")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "hello" in (tmp_path / "logs" / "run.log").read_text()
        setup_logging(level="WARNING")

    def test_unknown_level(self):
        with pytest.raises(ConfigError):
            setup_logging(level="LOUD")
