"""Scenario configuration: a flat ``key = value`` text format.

Lines are ``section.key = value``; ``#`` starts a comment. Unknown keys,
non-finite numbers and unparseable values raise :class:`ConfigError`
carrying the offending line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError

MODES = ("delay", "diffusion", "averaged-delay", "averaged-diffusion")


@dataclass(frozen=True)
class MapConfig:
    y_star: float = 1.0
    theta_star: float = 2.0
    hessian: float = 2.0


@dataclass(frozen=True)
class DitherConfig:
    a: float = 0.8
    omega: float = 5.0
    lam: float = 0.04
    D: float = 5.0


@dataclass(frozen=True)
class LoopConfig:
    k: float = 0.03
    omega_h: float = 1.0
    initial_input: float = 0.0
    H_assumed: float | None = None


@dataclass(frozen=True)
class NumericsConfig:
    dt: float | None = None
    N: int = 100
    horizon: float = 300.0
    sample_stride: int = 5
    n_modes: int = 50


@dataclass(frozen=True)
class OutputConfig:
    csv_path: str | None = None
    summary_path: str | None = None


@dataclass(frozen=True)
class OracleConfig:
    theta0: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str = "delay"
    map: MapConfig = field(default_factory=MapConfig)
    dither: DitherConfig = field(default_factory=DitherConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)

    @property
    def H_assumed(self) -> float:
        return self.loop.H_assumed if self.loop.H_assumed is not None else self.map.hessian


_INT_FIELDS = {"numerics.N", "numerics.sample_stride", "numerics.n_modes"}
_OPTIONAL_FLOAT = {"numerics.dt", "loop.H_assumed"}
_STRINGS = {"output.csv_path", "output.summary_path"}


def _keys():
    out = {"mode": (None, "mode")}
    for sec in fields(ScenarioConfig):
        if sec.name == "mode":
            continue
        for f in fields(sec.default_factory):
            key = f"{sec.name}.{f.name}"
            if key == "dither.lam":
                key = "dither.lambda"
            out[key] = (sec.name, f.name)
    return out


KEYS = _keys()


def _convert(key: str, raw: str, line=None):
    raw = raw.strip()
    if key == "mode":
        if raw not in MODES:
            raise ConfigError(f"unknown mode {raw!r}; expected one of {', '.join(MODES)}", line)
        return raw
    if key in _STRINGS:
        return raw or None
    if key in _OPTIONAL_FLOAT and raw.lower() in ("auto", "none", ""):
        return None
    if key in _INT_FIELDS:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{key} expects an integer, got {raw!r}", line) from None
        return value
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key} expects a number, got {raw!r}", line) from None
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {raw!r}", line)
    return value


def apply(config: ScenarioConfig, key: str, raw: str, line=None) -> ScenarioConfig:
    """Return ``config`` with one ``key = raw`` assignment applied."""
    key = key.strip()
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}", line)
    value = _convert(key, raw, line)
    section, name = KEYS[key]
    if section is None:
        return replace(config, mode=value)
    sub = replace(getattr(config, section), **{name: value})
    return replace(config, **{section: sub})


def parse_lines(lines, base: ScenarioConfig | None = None) -> ScenarioConfig:
    config = base if base is not None else ScenarioConfig()
    for number, text in enumerate(lines, start=1):
        text = text.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"expected 'key = value', got {text!r}", number)
        key, raw = text.split("=", 1)
        config = apply(config, key, raw, number)
    return config


def load(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_lines(fh)


def apply_overrides(config: ScenarioConfig, overrides) -> ScenarioConfig:
    """Apply ``key=value`` strings from the command line."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        config = apply(config, key, raw)
    return config


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo(config: ScenarioConfig) -> dict:
    """Flat ``{key: text}`` form that :func:`parse_lines` accepts back."""
    out = {}
    for key, (section, name) in KEYS.items():
        value = config.mode if section is None else getattr(getattr(config, section), name)
        if key in _STRINGS:
            if value is None:
                continue
            out[key] = value
        else:
            out[key] = _fmt(value)
    return out


def to_text(config: ScenarioConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in echo(config).items())
