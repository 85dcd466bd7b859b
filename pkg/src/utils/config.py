"""
Run configuration: INI file values under command-line overrides.

Sections and keys are fixed by default_settings(); the type of each default
decides how a file value is parsed. The resolved configuration is written
back in the same format as config.resolved so a run can be repeated from
its output directory.
"""

import configparser
from pathlib import Path
from typing import Any, Dict, Optional, Union

from ..core.classifier import ClassifierConfig
from ..core.errors import ConfigError
from ..core.synthetic import DEFAULT_SIGMA1_GRID, DesignKind, Fitter, MonteCarloConfig
from ..core.tilt import ELConfig, TiltFitConfig
from ..core.transfer import ShiftDesign
from .logger import log_debug, log_info

PathLike = Union[str, Path]
RESOLVED_NAME = "config.resolved"


def default_settings() -> Dict[str, Dict[str, Any]]:
    """Get default settings. A None default means 'unset' and is written as an empty value."""
    return {
        "run": {
            "seed": 0,
            "out": "out",
            "threads": 0,           # 0: let TILTBENCH_THREADS decide
        },
        "tilt": {
            "eps": 1e-3,
            "tol": 2e-3,
            "bound": 5.0,
            "lr": 4e-3,
            "dual_lr": None,
            "max_iter": 4000,
            "reg": 1e-5,
            "degree": 1,
        },
        "el": {
            "tol": 1e-6,
            "max_iter": 10000,
        },
        "classifier": {
            "degree": 2,
            "ridge": 1e-3,
            "max_iter": 10000,
            "tol": 1e-8,
        },
        "simulate": {
            "kind": "well",
            "sigma1": ",".join(str(s) for s in DEFAULT_SIGMA1_GRID),
            "reps": 50,
            "n": 400,
            "classifier_n": 200,
            "fitter": Fitter.EXP_GRAD.value,
        },
        "estimate": {
            "data": "",
            "tau": "y",
            "method": "dr",
            "estimand": "mu0",
            "split": 0.5,
            "strict": True,
        },
        "transfer": {
            "d": 10,
            "n_source": 2000,
            "n_target": 2000,
            "repeats": 20,
            "ridge": 1e-3,
        },
    }


_FLOAT_KEYS = {("tilt", "dual_lr")}


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _parse(section: str, key: str, raw: str, default: Any) -> Any:
    raw = raw.strip()
    try:
        if default is None:
            if raw == "":
                return None
            return float(raw) if (section, key) in _FLOAT_KEYS else raw
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {type(default).__name__ if default is not None else 'float'}") from None
    return raw


class RunConfig:
    """Typed settings for one command invocation."""

    def __init__(self, settings: Optional[Dict[str, Dict[str, Any]]] = None):
        self._settings = default_settings()
        if settings:
            for section, values in settings.items():
                for key, value in values.items():
                    self.set(section, key, value)

    @classmethod
    def load(cls, path: Optional[PathLike]) -> "RunConfig":
        """
        Read an INI file over the defaults; no path gives the defaults.

        Raises:
            ConfigError: unknown section/key, bad value or unreadable syntax
            OSError: the file cannot be read
        """
        config = cls()
        if path is None:
            return config
        path = Path(path)
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, "r", encoding="utf-8") as f:
                parser.read_file(f)
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}") from None
        for section in parser.sections():
            if section not in config._settings:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in config._settings[section]:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                default = default_settings()[section][key]
                config._settings[section][key] = _parse(section, key, raw, default)
        log_info(f"Config loaded from {path}")
        return config

    def get(self, section: str, key: str) -> Any:
        try:
            return self._settings[section][key]
        except KeyError:
            raise ConfigError(f"unknown setting {section}.{key}") from None

    def set(self, section: str, key: str, value: Any) -> None:
        if section not in self._settings or key not in self._settings[section]:
            raise ConfigError(f"unknown setting {section}.{key}")
        default = default_settings()[section][key]
        if isinstance(value, str) and not isinstance(default, str):
            value = _parse(section, key, value, default)
        self._settings[section][key] = value

    def override(self, section: str, **values: Any) -> None:
        """Apply command-line values; None means the flag was not given."""
        for key, value in values.items():
            if value is not None:
                self.set(section, key, value)

    def as_dict(self) -> Dict[str, Dict[str, Any]]:
        return {section: dict(values) for section, values in self._settings.items()}

    def to_ini(self) -> str:
        lines = []
        for section, values in self._settings.items():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {_format(value)}" for key, value in values.items())
            lines.append("")
        return "\n".join(lines)

    def write_resolved(self, out_dir: PathLike) -> Path:
        path = Path(out_dir) / RESOLVED_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_ini(), encoding="utf-8")
        log_debug(f"Resolved config written to {path}")
        return path

    # Library configs built from the settings

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed"))

    @property
    def out_dir(self) -> Path:
        return Path(self.get("run", "out"))

    @property
    def threads(self) -> Optional[int]:
        threads = int(self.get("run", "threads"))
        return threads if threads > 0 else None

    def tilt_config(self, record_trace: bool = False) -> TiltFitConfig:
        t = self._settings["tilt"]
        try:
            return TiltFitConfig(
                eps=t["eps"], tol=t["tol"], bound=t["bound"], lr=t["lr"], dual_lr=t["dual_lr"],
                max_iter=t["max_iter"], reg=t["reg"], record_trace=record_trace,
            )
        except ValueError as e:
            raise ConfigError(f"[tilt] {e}") from None

    def el_config(self) -> ELConfig:
        return ELConfig(tol=self.get("el", "tol"), max_iter=self.get("el", "max_iter"))

    def classifier_config(self) -> ClassifierConfig:
        c = self._settings["classifier"]
        try:
            return ClassifierConfig(degree=c["degree"], ridge_lambda=c["ridge"], max_iter=c["max_iter"], tolerance=c["tol"])
        except ValueError as e:
            raise ConfigError(f"[classifier] {e}") from None

    def sigma1_grid(self):
        raw = str(self.get("simulate", "sigma1"))
        try:
            grid = tuple(float(v) for v in raw.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"[simulate] sigma1 = {raw!r} is not a comma-separated list of numbers") from None
        if not grid or any(s <= 0 for s in grid):
            raise ConfigError(f"[simulate] sigma1 values must be positive, got {raw!r}")
        return grid

    def design_kinds(self):
        raw = str(self.get("simulate", "kind"))
        if raw.strip().lower() == "both":
            return (DesignKind.WELL_SPECIFIED, DesignKind.MISSPECIFIED)
        try:
            return tuple(DesignKind.parse(v) for v in raw.split(",") if v.strip())
        except ValueError as e:
            raise ConfigError(f"[simulate] {e}") from None

    def monte_carlo_config(self, fitter: Optional[Fitter] = None) -> MonteCarloConfig:
        s = self._settings["simulate"]
        try:
            fitter = fitter or Fitter(s["fitter"])
        except ValueError:
            raise ConfigError(f"[simulate] unknown fitter {s['fitter']!r}") from None
        try:
            return MonteCarloConfig(
                kinds=self.design_kinds(),
                sigma1_grid=self.sigma1_grid(),
                reps=s["reps"],
                n=s["n"],
                classifier_n=s["classifier_n"],
                seed=self.seed,
                fitter=fitter,
                classifier=self.classifier_config(),
                tilt=self.tilt_config(),
                el=self.el_config(),
            )
        except ValueError as e:
            raise ConfigError(f"[simulate] {e}") from None

    def shift_design(self) -> ShiftDesign:
        t = self._settings["transfer"]
        try:
            return ShiftDesign(d=t["d"], n_source=t["n_source"], n_target=t["n_target"], seed=self.seed)
        except ValueError as e:
            raise ConfigError(f"[transfer] {e}") from None
