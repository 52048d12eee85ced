"""JSON run configuration with strict key checking."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .datasets import GENERATORS
from .schedule import Schedule, ScheduleError, make_schedule


class ConfigError(ValueError):
    pass


@dataclass
class ScheduleSection:
    T: int = 2
    gamma: float = 0.98
    d: int = 2


@dataclass
class ModelSection:
    width: int = 128
    time_feature_width: int = 16
    seed: int = 0


@dataclass
class TrainSection:
    iterations: int = 5000
    lr: float = 3e-4
    batch_size: int | None = None
    log_every: int = 10
    cache_trajectories: bool = False


@dataclass
class ReverseSection:
    steps_per_subpath: int = 25
    terminal_variance_source: str = "exact"
    n_samples: int = 2000
    record_trajectories: bool = False
    seed: int = 0


@dataclass
class EvalSection:
    metrics: list[str] = field(default_factory=lambda: ["sliced_w2", "energy_distance", "knn_recall"])
    k: int = 3
    n_proj: int = 64
    seed: int = 0


@dataclass
class DatasetSection:
    name: str = "two_moons"
    n: int = 1024
    seed: int = 0
    normalize: bool = True


@dataclass
class VerifySection:
    n_mc: int = 100_000
    n_posterior: int = 1_000_000
    seed: int = 0


EVAL_METRICS = ("sliced_w2", "energy_distance", "exact_w2", "knn_recall")


@dataclass
class RunConfig:
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    reverse: ReverseSection = field(default_factory=ReverseSection)
    eval: EvalSection = field(default_factory=EvalSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    verify: VerifySection = field(default_factory=VerifySection)
    output_dir: str = "runs/default"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        cfg = _build(cls, data, "")
        cfg.validate()
        return cfg

    def make_schedule(self) -> Schedule:
        s = self.schedule
        return make_schedule(s.T, s.gamma, d=s.d)

    def validate(self) -> None:
        try:
            self.make_schedule()
        except ScheduleError as exc:
            raise ConfigError(f"schedule: {exc}") from None
        checks = [
            (self.model.width >= 1, "model.width must be >= 1"),
            (self.model.time_feature_width >= 0 and self.model.time_feature_width % 2 == 0,
             "model.time_feature_width must be a non-negative even integer"),
            (self.train.iterations >= 1, "train.iterations must be >= 1"),
            (self.train.lr > 0, "train.lr must be positive"),
            (self.train.batch_size is None or self.train.batch_size >= 1, "train.batch_size must be >= 1 or null"),
            (self.train.log_every >= 1, "train.log_every must be >= 1"),
            (self.reverse.steps_per_subpath >= 1, "reverse.steps_per_subpath must be >= 1"),
            (self.reverse.terminal_variance_source in ("exact", "independent"),
             "reverse.terminal_variance_source must be 'exact' or 'independent'"),
            (self.reverse.n_samples >= 0, "reverse.n_samples must be >= 0"),
            (self.eval.k >= 1, "eval.k must be >= 1"),
            (self.eval.n_proj >= 1, "eval.n_proj must be >= 1"),
            (all(m in EVAL_METRICS for m in self.eval.metrics),
             f"eval.metrics entries must be among {', '.join(EVAL_METRICS)}"),
            (self.dataset.name in GENERATORS,
             f"dataset.name must be one of {', '.join(sorted(GENERATORS))}"),
            (self.dataset.n >= 1, "dataset.n must be >= 1"),
            (self.verify.n_mc >= 100 and self.verify.n_posterior >= 1000, "verify sample sizes too small"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)


def _build(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = prefix or "top level"
        raise ConfigError(f"unknown key(s) at {where}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = fields[name]
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        path = f"{prefix}.{name}" if prefix else name
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, path)
        else:
            kwargs[name] = _coerce(value, default, path)
    return cls(**kwargs)


def _coerce(value, default, path):
    if value is None:
        if path.endswith("batch_size"):
            return None
        raise ConfigError(f"{path}: null is not allowed")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) or path.endswith("batch_size"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{path}: expected a list of strings")
        return list(value)
    return value


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from None
    try:
        return RunConfig.from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def save_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path
