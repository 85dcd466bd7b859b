"""Tests for the INI run configuration."""

import pytest

from src.core.errors import ConfigError
from src.core.synthetic import DesignKind, Fitter
from src.utils.config import RESOLVED_NAME, RunConfig, default_settings


def write_ini(tmp_path, text):
    path = tmp_path / "run.ini"
    path.write_text(text, encoding="utf-8")
    return path


class TestDefaults:
    def test_no_path_gives_defaults(self):
        assert RunConfig.load(None).as_dict() == default_settings()

    def test_library_configs(self):
        config = RunConfig()
        assert config.tilt_config().lr == 4e-3
        assert config.tilt_config().dual_lr is None
        assert config.classifier_config().degree == 2
        assert config.el_config().max_iter == 10000
        assert config.threads is None
        assert config.design_kinds() == (DesignKind.WELL_SPECIFIED,)
        assert config.sigma1_grid() == (0.75, 1.0, 1.25, 1.5)


class TestLoad:
    def test_values_are_typed(self, tmp_path):
        path = write_ini(tmp_path, "[run]\nseed = 42\n[tilt]\nlr = 0.01\ndual_lr = 0.02\n[estimate]\nstrict = no\n")
        config = RunConfig.load(path)
        assert config.seed == 42
        assert config.get("tilt", "lr") == 0.01
        assert config.get("tilt", "dual_lr") == 0.02
        assert config.get("estimate", "strict") is False

    def test_unknown_key(self, tmp_path):
        path = write_ini(tmp_path, "[tilt]\nlearning_rate = 0.1\n")
        with pytest.raises(ConfigError, match="unknown key"):
            RunConfig.load(path)

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown section"):
            RunConfig.load(write_ini(tmp_path, "[plot]\ncolor = red\n"))

    def test_bad_value(self, tmp_path):
        with pytest.raises(ConfigError, match="not a valid int"):
            RunConfig.load(write_ini(tmp_path, "[simulate]\nreps = many\n"))

    def test_bad_syntax(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(write_ini(tmp_path, "seed = 1\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            RunConfig.load(tmp_path / "absent.ini")


class TestOverride:
    def test_none_keeps_file_value(self, tmp_path):
        config = RunConfig.load(write_ini(tmp_path, "[simulate]\nreps = 7\n"))
        config.override("simulate", reps=None, n=50)
        assert config.get("simulate", "reps") == 7
        assert config.get("simulate", "n") == 50

    def test_unknown_setting(self):
        with pytest.raises(ConfigError):
            RunConfig().set("tilt", "momentum", 0.9)

    def test_string_values_are_parsed(self):
        config = RunConfig({"tilt": {"max_iter": "25"}})
        assert config.get("tilt", "max_iter") == 25


class TestResolved:
    def test_round_trip(self, tmp_path):
        config = RunConfig({"run": {"seed": 3}, "tilt": {"eps": 1 / 3}, "simulate": {"kind": "both"}})
        path = config.write_resolved(tmp_path)
        assert path.name == RESOLVED_NAME
        again = RunConfig.load(path)
        assert again.as_dict() == config.as_dict()

    def test_unset_value_written_empty(self, tmp_path):
        text = RunConfig().to_ini()
        assert "dual_lr = \n" in text


class TestBuilders:
    def test_invalid_tilt_setting(self):
        with pytest.raises(ConfigError, match=r"\[tilt\]"):
            RunConfig({"tilt": {"bound": 0.0}}).tilt_config()

    def test_both_kinds(self):
        kinds = RunConfig({"simulate": {"kind": "both"}}).design_kinds()
        assert kinds == (DesignKind.WELL_SPECIFIED, DesignKind.MISSPECIFIED)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            RunConfig({"simulate": {"kind": "curved"}}).design_kinds()

    @pytest.mark.parametrize("grid", ["", "1.0,-2", "a,b"])
    def test_bad_sigma_grid(self, grid):
        with pytest.raises(ConfigError):
            RunConfig({"simulate": {"sigma1": grid}}).sigma1_grid()

    def test_monte_carlo_config(self):
        config = RunConfig({"run": {"seed": 9}, "simulate": {"sigma1": "1.0,2.0", "reps": 3, "fitter": "el"}})
        mc = config.monte_carlo_config()
        assert mc.seed == 9 and mc.reps == 3
        assert mc.sigma1_grid == (1.0, 2.0)
        assert mc.fitter is Fitter.EL
        assert config.monte_carlo_config(Fitter.EXP_GRAD).fitter is Fitter.EXP_GRAD

    def test_unknown_fitter(self):
        with pytest.raises(ConfigError, match="unknown fitter"):
            RunConfig({"simulate": {"fitter": "newton"}}).monte_carlo_config()

    def test_shift_design(self):
        design = RunConfig({"run": {"seed": 2}, "transfer": {"d": 5}}).shift_design()
        assert design.d == 5 and design.seed == 2
        with pytest.raises(ConfigError):
            RunConfig({"transfer": {"d": 1}}).shift_design()
