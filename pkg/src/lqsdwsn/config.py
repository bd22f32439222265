"""Run configuration: INI-style files mapped onto dataclasses.

A file holds ``[section]`` blocks of ``key = value`` lines; internally every
setting is addressed by its dotted name (``channel.alpha``).  Unknown keys
and invalid values raise :class:`ConfigError` naming the offending field.
"""
from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .channel import ChannelParams
from .engine import ScenarioConfig
from .lqpredict.models import KINDS, TrainParams
from .protocol import ProtocolConfig

EXPERIMENTS = ("link", "neighbor", "line")


class ConfigError(ValueError):
    pass


@dataclass
class DatasetConfig:
    n_links: int = 1000
    periods_per_link: int = 110
    k: int = 10
    test_fraction: float = 0.2


@dataclass
class ModelConfig:
    kind: str = "logistic"
    l2: float = 1e-4
    max_depth: int = 8
    min_samples_leaf: int = 20
    n_trees: int = 10
    forest_depth: int = 10

    def train_params(self) -> TrainParams:
        return TrainParams(
            l2=self.l2, max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf, n_trees=self.n_trees, forest_depth=self.forest_depth
        )


@dataclass
class SweepConfig:
    experiment: str = "neighbor"
    distance_r0: list[float] = field(default_factory=lambda: [1.0])
    density: list[float] = field(default_factory=lambda: [4e-5, 8e-5, 12e-5, 16e-5, 20e-5, 24e-5, 28e-5])
    m_up: list[int] = field(default_factory=lambda: [2])
    k_down: list[int] = field(default_factory=lambda: [2])
    prediction: list[bool] = field(default_factory=lambda: [False, True])
    seeds: int = 5
    warmup_periods: float = 20.0


@dataclass
class ChannelConfig:
    alpha: float = 3.0
    sigma: float = 4.0
    beta_th: float = 66.0
    p_t_dbm: float = 0.0
    r0_override: float | None = None

    def params(self) -> ChannelParams:
        return ChannelParams(self.alpha, self.sigma, self.beta_th, self.p_t_dbm, self.r0_override)


@dataclass
class ScenarioSection:
    layout: str = "area"
    width_m: float = 500.0
    height_m: float = 500.0
    density: float = 12e-5
    node_count: int | None = None
    line_length_r0: float = 7.0
    line_nodes_per_r0: float = 8.0
    pair_distance_r0: float = 1.0
    duration_periods: float = 2000.0
    topology: bool = True
    t1_start_periods: float = 50.0
    t1_period_periods: float = 500.0
    t2_delay_periods: float = 5.0
    control_hop_delay: float = 0.0
    record_packets: bool = False


@dataclass
class Config:
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self) -> "Config":
        d = self.dataset
        if d.k < 1:
            raise ConfigError("dataset.k must be >= 1")
        if d.n_links < 1:
            raise ConfigError("dataset.n_links must be >= 1")
        if d.periods_per_link <= d.k:
            raise ConfigError(f"dataset.periods_per_link ({d.periods_per_link}) must exceed dataset.k ({d.k})")
        if not 0 < d.test_fraction < 1:
            raise ConfigError("dataset.test_fraction must lie in (0, 1)")
        if self.model.kind not in KINDS:
            raise ConfigError(f"model.kind must be one of {KINDS}, got {self.model.kind!r}")
        if self.sweep.experiment not in EXPERIMENTS:
            raise ConfigError(f"sweep.experiment must be one of {EXPERIMENTS}")
        if self.sweep.seeds < 1:
            raise ConfigError("sweep.seeds must be >= 1")
        try:
            self.channel.params()
        except ValueError as e:
            raise ConfigError(f"channel: {e}") from None
        try:
            self.scenario_config(0)
        except ValueError as e:
            raise ConfigError(f"scenario: {e}") from None
        return self

    def scenario_config(self, seed: int, **overrides) -> ScenarioConfig:
        proto_keys = {f.name for f in dataclasses.fields(ProtocolConfig)}
        proto = dataclasses.replace(self.protocol, **{k: v for k, v in overrides.items() if k in proto_keys})
        scen = dataclasses.asdict(self.scenario)
        scen.update({k: v for k, v in overrides.items() if k not in proto_keys})
        return ScenarioConfig(**scen, seed=seed, channel=self.channel.params(), protocol=proto)


SECTIONS = {f.name: f for f in dataclasses.fields(Config)}


def _convert(name: str, tp, raw: str):
    raw = raw.strip()
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    try:
        if origin is list:
            return [_convert(name, args[0], part) for part in raw.split(",") if part.strip()]
        if type(None) in args:
            if raw.lower() in ("", "none", "derived"):
                return None
            return _convert(name, next(a for a in args if a is not type(None)), raw)
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        return raw
    except (ValueError, StopIteration):
        raise ConfigError(f"{name}: cannot parse {raw!r} as {getattr(tp, '__name__', tp)}") from None


def _hints(cls):
    return typing.get_type_hints(cls)


def from_flat(flat: dict[str, str]) -> Config:
    parts: dict[str, dict] = {name: {} for name in SECTIONS}
    for key, raw in flat.items():
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"unknown config key {key!r}")
        cls = _hints(Config)[section]
        hints = _hints(cls)
        if name not in hints or name not in {f.name for f in dataclasses.fields(cls)}:
            raise ConfigError(f"unknown config key {key!r}")
        parts[section][name] = _convert(key, hints[name], raw)
    try:
        cfg = Config(**{s: _hints(Config)[s](**vals) for s, vals in parts.items()})
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return cfg.validate()


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_flat(cfg: Config) -> dict[str, str]:
    out = {}
    for section in SECTIONS:
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            if not f.init:
                continue
            out[f"{section}.{f.name}"] = _fmt(getattr(obj, f.name))
    return out


def loads(text: str) -> Config:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    flat = {f"{s}.{k}": v for s in parser.sections() for k, v in parser.items(s)}
    return from_flat(flat)


def load(path: str | Path | None) -> Config:
    if path is None:
        return Config().validate()
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return loads(text)


def dumps(cfg: Config) -> str:
    lines = []
    current = None
    for key, val in to_flat(cfg).items():
        section, _, name = key.partition(".")
        if section != current:
            if current is not None:
                lines.append("")
            lines.append(f"[{section}]")
            current = section
        lines.append(f"{name} = {val}")
    return "\n".join(lines) + "\n"
