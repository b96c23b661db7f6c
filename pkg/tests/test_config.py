"""Tests for configuration loading and validation."""

import pytest
from pydantic import ValidationError

from config.loader import AnnealConfig, ClassifierConfig, Config, FilterConfig, LoggingConfig, PipelineConfig


class TestDefaults:
    def test_values(self, config):
        assert config.filter.p0 == 0.01
        assert config.ranking.capacity == 256
        assert config.ranking.aging_rate == 0.0
        assert config.classifier.proto_count == 3
        assert config.classifier.threshold == 0.5
        assert config.pipeline.conflict_threshold == 0.2
        assert config.pipeline.initial_q == 2
        assert config.pipeline.epoch_every == 64
        assert config.storage.snapshot_directory is None

    def test_anneal_values(self, config):
        params = config.anneal.for_clusters(3)
        assert (params.gamma, params.epsilon, params.tau) == (0.5, 0.001, 0.9)
        assert (params.inner_tol, params.saturation) == (0.01, 0.99)
        assert params.cluster_count == 3


class TestAlphaTable:
    @pytest.mark.parametrize("k, alpha", [(2, 0.0), (7, 0.0), (8, 1e-6), (9, 0.0), (10, 3e-7), (11, 3e-8), (12, 0.0)])
    def test_per_cluster_count(self, k, alpha):
        assert AnnealConfig().for_clusters(k).alpha == alpha

    def test_explicit_alpha_wins(self):
        assert AnnealConfig(alpha=0.2).for_clusters(8).alpha == 0.2

    def test_seed_override(self):
        assert AnnealConfig(seed=4).for_clusters(2).seed == 4
        assert AnnealConfig(seed=4).for_clusters(2, seed=9).seed == 9


class TestValidation:
    @pytest.mark.parametrize("p0", [0.0, 1.0, -0.1])
    def test_p0_range(self, p0):
        with pytest.raises(ValidationError):
            FilterConfig(p0=p0)

    def test_threshold_range(self):
        ClassifierConfig(threshold=1.0)
        with pytest.raises(ValidationError):
            ClassifierConfig(threshold=0.0)

    def test_initial_q(self):
        with pytest.raises(ValidationError):
            PipelineConfig(initial_q=1)

    def test_inner_tolerance(self):
        with pytest.raises(ValidationError):
            AnnealConfig(inner_tol=2.0)

    def test_log_level(self):
        assert LoggingConfig(level="debug").level == "DEBUG"
        with pytest.raises(ValidationError):
            LoggingConfig(level="chatty")


class TestSources:
    def test_environment(self, monkeypatch):
        monkeypatch.setenv("IP_FILTER__P0", "0.05")
        monkeypatch.setenv("IP_PIPELINE__EPOCH_EVERY", "10")
        config = Config()
        assert config.filter.p0 == 0.05
        assert config.pipeline.epoch_every == 10

    def test_invalid_environment(self, monkeypatch):
        monkeypatch.setenv("IP_FILTER__P0", "2")
        with pytest.raises(ValidationError):
            Config()

    def test_toml_file(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        path = tmp_path / "custom.toml"
        path.write_text('[classifier]\nproto_count = 5\n\n[storage]\nsnapshot_directory = "snapshots"\n', encoding="utf-8")
        config = Config.load(path)
        assert config.classifier.proto_count == 5
        assert str(config.storage.snapshot_directory) == "snapshots"
        # The override does not outlive the call.
        assert Config.load().classifier.proto_count == 3

    def test_environment_beats_toml(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        path = tmp_path / "custom.toml"
        path.write_text("[filter]\np0 = 0.02\n", encoding="utf-8")
        monkeypatch.setenv("IP_FILTER__P0", "0.03")
        assert Config.load(path).filter.p0 == 0.03
