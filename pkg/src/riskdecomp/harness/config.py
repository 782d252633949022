"""Flat ``key = value`` experiment configuration."""

from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ConfigError", "ExperimentConfig", "parse_config_text", "load_config", "coerce"]

RESERVED = ("preset", "family", "trials", "seed", "out", "svg", "threads")


class ConfigError(ValueError):
    pass


def coerce(text: str):
    """Interpret a config value as bool, int, float or string (in that order)."""
    raw = text.strip()
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, later keys win."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = coerce(value)
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


@dataclass
class ExperimentConfig:
    """What to run and where to write it.

    ``overrides`` replace preset parameters (for example ``n`` or ``steps``);
    when ``preset`` is ``None`` the overrides must name a ``family`` and the
    run uses that family's default parameters.
    """

    preset: str | None = None
    trials: int | None = None
    master_seed: int = 0
    out_dir: Path | None = None
    emit_svg: bool = False
    threads: int = 1
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials is not None and self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.preset is None and "family" not in self.overrides:
            raise ConfigError("config needs a preset or a family")

    @classmethod
    def from_mapping(cls, values: dict):
        values = dict(values)
        preset = values.pop("preset", None)
        trials = values.pop("trials", None)
        seed = values.pop("seed", 0)
        out = values.pop("out", None)
        svg = values.pop("svg", False)
        threads = values.pop("threads", 1)
        return cls(preset=preset, trials=None if trials is None else int(trials),
                   master_seed=int(seed), out_dir=None if out is None else Path(out),
                   emit_svg=bool(svg), threads=int(threads), overrides=values)
