"""Momentum flow matching: training pairs from forward paths and the fit loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .forward import SubPathSample, simulate_batch
from .metrics import PointCloud
from .neural import AdamState, VelocityModel, adam_update, batch_loss, init_model, model_grad
from .schedule import Schedule

log = logging.getLogger(__name__)

# seed streams: base seed + offset
MODEL_STREAM = 0
BATCH_STREAM = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class SubPathBatch:
    """Stacked training tuples; iterating yields SubPathSample records."""

    t: np.ndarray  # (n,) int sub-path index in 1..T
    m: np.ndarray  # (n,)
    x: np.ndarray  # (n, d)
    target: np.ndarray  # (n, d)
    tau: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self):
        for i in range(len(self)):
            yield SubPathSample(int(self.t[i]), float(self.m[i]), self.x[i], self.target[i], float(self.tau[i]))


def _draw_subpaths(s: Schedule, anchors, velocities, rng) -> SubPathBatch:
    n = anchors.shape[0]
    m = rng.random(n)
    if s.T == 1:
        t = np.ones(n, dtype=np.int64)
    else:
        t = rng.integers(1, s.T + 1, size=n)
    rows = np.arange(n)
    v = velocities[rows, t - 1]
    x = anchors[rows, t - 1] + m[:, None] * v
    tau = (t - 1 + m) / s.T
    return SubPathBatch(t=t, m=m, x=x, target=v, tau=tau)


def mfm_pairs(s: Schedule, x0, rng) -> SubPathBatch:
    """One training tuple per row of ``x0`` with a freshly simulated path.

    Random draws, in order: the forward noises, then m ~ U[0,1], then the
    sub-path index t uniform on 1..T (skipped when T = 1).
    """
    traj = simulate_batch(s, x0, rng)
    return _draw_subpaths(s, traj.anchors, traj.velocities, rng)


def mfm_batch(s: Schedule, data, n: int, rng) -> SubPathBatch:
    """Sample ``n`` data points with replacement and build their training tuples."""
    pts = data.points if isinstance(data, PointCloud) else np.asarray(data, dtype=np.float64)
    if len(pts) == 0:
        raise ValueError("cannot build training pairs from an empty dataset")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    idx = rng.integers(0, len(pts), size=n)
    return mfm_pairs(s, pts[idx], rng)


def mfm_loss(model: VelocityModel, samples) -> float:
    if isinstance(samples, SubPathBatch):
        return batch_loss(model, samples.x, samples.tau, samples.target)
    samples = list(samples)
    if not samples:
        raise ValueError("mfm_loss needs at least one sample")
    x = np.stack([sp.x for sp in samples])
    tau = np.array([sp.tau for sp in samples])
    target = np.stack([sp.target_velocity for sp in samples])
    return batch_loss(model, x, tau, target)


@dataclass
class TrainConfig:
    schedule: Schedule
    iterations: int = 5000
    batch_size: int | None = None  # None: full batch, every data point once per step
    lr: float = 3e-4
    seed: int = 0
    hidden_width: int = 128
    time_feature_width: int = 16
    log_every: int = 1
    cache_trajectories: bool = False  # debug mode: reuse one set of forward paths
    dataset: str = ""

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1 or None")

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule.to_dict(),
            "iterations": self.iterations,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "seed": self.seed,
            "hidden_width": self.hidden_width,
            "time_feature_width": self.time_feature_width,
            "log_every": self.log_every,
            "cache_trajectories": self.cache_trajectories,
            "dataset": self.dataset,
        }


@dataclass
class TrainReport:
    losses: list[tuple[int, float]]
    model: VelocityModel
    seconds: float
    config: dict = field(default_factory=dict)

    @property
    def loss_values(self) -> np.ndarray:
        return np.array([v for _, v in self.losses])

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seconds": self.seconds,
            "losses": [[i, v] for i, v in self.losses],
            "model": self.model.to_dict(),
        }


def train(config: TrainConfig, data) -> TrainReport:
    s = config.schedule
    pts = data.points if isinstance(data, PointCloud) else np.asarray(data, dtype=np.float64)
    if len(pts) == 0:
        raise ValueError("cannot train on an empty dataset")
    if pts.shape[1] != s.d:
        raise ValueError(f"data dimension {pts.shape[1]} does not match schedule d={s.d}")

    model = init_model(s.d, config.hidden_width, config.seed + MODEL_STREAM, config.time_feature_width)
    opt = AdamState.for_model(model, lr=config.lr)
    rng = np.random.default_rng(config.seed + BATCH_STREAM)
    cached = simulate_batch(s, pts, rng) if config.cache_trajectories else None

    losses: list[tuple[int, float]] = []
    start = time.perf_counter()
    for it in range(config.iterations):
        if cached is not None:
            idx = rng.integers(0, len(pts), size=config.batch_size) if config.batch_size else slice(None)
            batch = _draw_subpaths(s, cached.anchors[idx], cached.velocities[idx], rng)
        elif config.batch_size is None:
            batch = mfm_pairs(s, pts, rng)
        else:
            batch = mfm_batch(s, pts, config.batch_size, rng)
        loss, grads = model_grad(model, batch.x, batch.tau, batch.target)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss {loss} at iteration {it}")
        if it % config.log_every == 0:
            losses.append((it, loss))
            if it % max(config.log_every, 500) == 0:
                log.debug("iter %d loss %.6f", it, loss)
        opt, model = adam_update(opt, model, grads)
    seconds = time.perf_counter() - start
    return TrainReport(losses=losses, model=model, seconds=seconds, config=config.to_dict())
