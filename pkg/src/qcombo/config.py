"""Experiment configuration files.

Sectioned ``key = value`` text read with :mod:`configparser`::

    [experiment]
    seed = 0
    horizon = 12000

    [grid]
    rows = 1
    cols = 2

    [train_flow]
    # interval (seconds) = horizontal rates bottom-to-top | vertical rates left-to-right
    0-12000 = 700 | 10, 620

    [learner]
    algorithm = qcombo

Unknown sections or keys are rejected; every omitted key takes its default.
"""
from __future__ import annotations

import configparser
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .algorithms.base import LearnerConfig
from .sim import FlowPeriod, FlowProgram

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    rows: int = 1
    cols: int = 1
    edge_length: float = 400.0
    train_flow: FlowProgram = field(default_factory=lambda: FlowProgram(
        (FlowPeriod(0, 12000, (700.0,), (700.0,)),)))
    test_flow: FlowProgram | None = None
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    seed: int = 0
    horizon: int = 12000
    warmup: int = 1000
    train_period: int = 400
    eval_period: int = 400
    record_last: int = 200
    decision_interval: int = 5
    reward_window: int = 5
    static_period: int = 30
    eval_epsilon: str = "zero"  # or "frozen": keep the decayed training epsilon
    output_dir: str = "runs/default"

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("grid dimensions must be positive")
        for name in ("train_period", "eval_period", "decision_interval", "reward_window",
                     "record_last", "static_period"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.warmup < 0:
            raise ConfigError("warmup must be non-negative")
        if self.horizon < self.warmup + self.train_period + self.eval_period:
            raise ConfigError("horizon must cover the warmup and one train/eval cycle")
        if self.reward_window != self.decision_interval:
            raise ConfigError("reward_window must equal decision_interval")
        for name in ("warmup", "train_period", "eval_period", "record_last", "static_period"):
            if getattr(self, name) % self.decision_interval:
                raise ConfigError(f"{name} must be a multiple of decision_interval")
        if self.record_last > self.eval_period:
            raise ConfigError("record_last cannot exceed eval_period")
        if self.eval_epsilon not in ("zero", "frozen"):
            raise ConfigError("eval_epsilon must be 'zero' or 'frozen'")
        for prog in (self.train_flow, self.test_flow):
            if prog is None:
                continue
            for p in prog.periods:
                if len(p.horizontal) != self.rows or len(p.vertical) != self.cols:
                    raise ConfigError(
                        f"flow {p.start}-{p.end} needs {self.rows} horizontal and "
                        f"{self.cols} vertical rates")

    @property
    def n_cycles(self) -> int:
        return (self.horizon - self.warmup) // (self.train_period + self.eval_period)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["learner"] = self.learner.to_dict()
        d["train_flow"] = _program_dict(self.train_flow)
        d["test_flow"] = _program_dict(self.test_flow) if self.test_flow else None
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def with_learner(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, learner=dataclasses.replace(self.learner, **changes))


def _program_dict(prog: FlowProgram) -> dict:
    return {"enter_speed": prog.enter_speed,
            "periods": [[p.start, p.end, list(p.horizontal), list(p.vertical)] for p in prog.periods]}


_EXPERIMENT_KEYS = {
    "seed": int, "horizon": int, "warmup": int, "train_period": int, "eval_period": int,
    "record_last": int, "decision_interval": int, "reward_window": int, "static_period": int,
    "eval_epsilon": str, "output_dir": str,
}
_GRID_KEYS = {"rows": int, "cols": int, "edge_length": float}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _learner_types() -> dict:
    types = {}
    for f in dataclasses.fields(LearnerConfig):
        default = f.default
        if isinstance(default, bool):
            types[f.name] = _parse_bool
        elif isinstance(default, tuple):
            types[f.name] = _parse_ints
        else:
            types[f.name] = type(default)
    return types


def parse_flow_section(items, enter_speed: float = 10.0) -> FlowProgram:
    periods = []
    for key, value in items:
        if key == "enter_speed":
            enter_speed = float(value)
            continue
        try:
            start, end = (int(x) for x in key.split("-"))
            horiz, vert = value.split("|")
            h = tuple(float(x) for x in horiz.replace(",", " ").split())
            v = tuple(float(x) for x in vert.replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"bad flow entry {key} = {value}: expected 'a-b = h... | v...'") from exc
        periods.append(FlowPeriod(start, end, h, v))
    periods.sort(key=lambda p: p.start)
    try:
        return FlowProgram(tuple(periods), enter_speed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    allowed = {"experiment", "grid", "train_flow", "test_flow", "learner"}
    unknown = set(cp.sections()) - allowed
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")

    kwargs = {}

    def take(section, table):
        if not cp.has_section(section):
            return {}
        out = {}
        for key, value in cp.items(section):
            if key not in table:
                raise ConfigError(f"{source}: unknown key [{section}] {key}")
            try:
                out[key] = table[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{source}: bad value for [{section}] {key}: {value!r}") from exc
        return out

    kwargs.update(take("experiment", _EXPERIMENT_KEYS))
    kwargs.update(take("grid", _GRID_KEYS))
    try:
        kwargs["learner"] = LearnerConfig(**take("learner", _learner_types()))
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if cp.has_section("train_flow"):
        kwargs["train_flow"] = parse_flow_section(cp.items("train_flow"))
    elif "rows" in kwargs or "cols" in kwargs:
        raise ConfigError(f"{source}: [train_flow] is required when the grid is given")
    if cp.has_section("test_flow"):
        kwargs["test_flow"] = parse_flow_section(cp.items("test_flow"))
    try:
        cfg = ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    log.info("configuration from %s: %s", source, cfg.to_dict())
    return cfg


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), str(path))


def _flow_lines(prog: FlowProgram) -> list[str]:
    lines = [f"enter_speed = {prog.enter_speed:g}"]
    for p in prog.periods:
        h = ", ".join(f"{x:g}" for x in p.horizontal)
        v = ", ".join(f"{x:g}" for x in p.vertical)
        lines.append(f"{p.start}-{p.end} = {h} | {v}")
    return lines


def dump_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config_text`."""
    lines = ["[experiment]"]
    for key in _EXPERIMENT_KEYS:
        lines.append(f"{key} = {getattr(cfg, key)}")
    lines += ["", "[grid]", f"rows = {cfg.rows}", f"cols = {cfg.cols}",
              f"edge_length = {cfg.edge_length:g}", "", "[train_flow]"]
    lines += _flow_lines(cfg.train_flow)
    if cfg.test_flow is not None:
        lines += ["", "[test_flow]"] + _flow_lines(cfg.test_flow)
    lines += ["", "[learner]"]
    for key, value in cfg.learner.to_dict().items():
        if isinstance(value, list):
            value = ", ".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
