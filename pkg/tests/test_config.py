from pathlib import Path

import numpy as np
import pytest

from softrod.config import ConfigError, ScenarioConfig, build_config, config_to_flat, load_config, parse_override

ROOT = Path(__file__).resolve().parents[1]
DEFAULT = ROOT / "configs" / "default.toml"


class TestDefaults:
    def test_reference_parameters(self):
        cfg = ScenarioConfig()
        assert (cfg.grid.ell, cfg.grid.N) == (0.5, 11)
        assert cfg.grid.ds == pytest.approx(0.05)
        np.testing.assert_array_equal(cfg.params.K3_diag, [1.0, 1.5])
        assert (cfg.params.K4, cfg.params.K5, cfg.params.g) == (1.0, 1.5, 0.0)
        np.testing.assert_array_equal(cfg.outer.K_q, np.eye(2))
        np.testing.assert_array_equal(cfg.outer.K_p, 4 * np.eye(2))
        assert (cfg.inner.k_u, cfg.inner.k_theta, cfg.inner.k_w) == (0.5, 4.0, 2.0)
        assert cfg.run.dt == 0.005 and cfg.run.output_stride == 10

    def test_shipped_file_matches_defaults(self):
        assert config_to_flat(load_config(DEFAULT)) == config_to_flat(ScenarioConfig())


class TestParsing:
    def test_overrides(self):
        cfg = load_config(DEFAULT, ["run.duration=2.5", "params.K3=[2.0, 3.0]", "target.family=swing"])
        assert cfg.run.duration == 2.5
        np.testing.assert_array_equal(cfg.params.K3_diag, [2.0, 3.0])
        assert cfg.target.family == "swing"

    def test_override_parsing(self):
        assert parse_override("a.b = 3") == ("a.b", 3)
        assert parse_override("x=hello") == ("x", "hello")
        with pytest.raises(ConfigError):
            parse_override("novalue")

    @pytest.mark.parametrize(
        "values",
        [{"grid.nodes": 3}, {"bogus": 1}, {"params.K4": -1.0}, {"grid.N": 2}, {"target.family": "spiral"},
         {"run.dt": 0.0}],
    )
    def test_invalid(self, values):
        with pytest.raises(ConfigError):
            build_config(values)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.toml")

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("grid.ell = = 3\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_round_trip(self):
        cfg = load_config(None, ["outer.K_p=[4.0, 2.0]", "seed=7"])
        assert config_to_flat(build_config(config_to_flat(cfg))) == config_to_flat(cfg)
