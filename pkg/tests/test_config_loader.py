import os

import pytest

from conftest import REPLAY_DIR
from kbound.core.config_loader import DEFAULT_CONFIG_PATH, ConfigLoader, get_default_config, load_config
from kbound.core.contracts import ExperimentConfig
from kbound.core.errors import ConfigError


class TestConfigLoader:
    def test_packaged_defaults_match_model(self):
        assert os.path.isfile(DEFAULT_CONFIG_PATH)
        assert load_config() == ExperimentConfig()

    def test_missing_defaults_fall_back(self, tmp_path):
        loader = ConfigLoader(str(tmp_path / "absent.yaml"))
        assert loader.defaults == ExperimentConfig().model_dump()

    def test_unparsable_defaults_fall_back(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("system: [G1\n")
        assert ConfigLoader(str(bad)).load() == ExperimentConfig()

    def test_preset_file(self):
        config = load_config(os.path.join(REPLAY_DIR, "fig3a.cfg"))
        assert config.system == "G1"
        assert config.noise_var == 0.1
        assert config.kernel == "TC"
        assert config.grid_c_count == 40

    def test_overrides_win(self):
        config = load_config(os.path.join(REPLAY_DIR, "fig3a.cfg"), {"runs": 5, "kernel": "SS", "seed": None})
        assert config.runs == 5
        assert config.kernel == "SS"
        assert config.seed == 2024

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="config not found"):
            load_config(str(tmp_path / "nope.cfg"))

    def test_non_mapping(self, tmp_path):
        path = tmp_path / "list.cfg"
        path.write_text("- a\n- b\n")
        with pytest.raises(ConfigError):
            load_config(str(path))

    @pytest.mark.parametrize(
        "line",
        [
            "delta: 1.5",
            "kernel: DC",
            "n_samples: 10",
            "grid_c_min: 5000.0",
            "unknown_key: 1",
            "system: custom",
        ],
    )
    def test_invalid_values(self, tmp_path, line):
        path = tmp_path / "bad.cfg"
        path.write_text(line + "\n")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_config_error_is_value_error(self, tmp_path):
        with pytest.raises(ValueError):
            load_config(str(tmp_path / "nope.cfg"))

    def test_default_config_cached(self):
        assert get_default_config() is get_default_config()
