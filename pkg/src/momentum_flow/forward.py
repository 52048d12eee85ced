"""Forward momentum flow: simulated trajectories and sub-path interpolation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .schedule import Schedule, gamma_at, gamma_bar


class ZeroNoise:
    """Drop-in generator whose Gaussian draws are all zero (analytic test paths)."""

    def standard_normal(self, size=None):
        return np.zeros(() if size is None else size)


def as_generator(rng) -> tuple[object, int | None]:
    """Accept a seed or anything with ``standard_normal``; return (generator, seed)."""
    if rng is None or isinstance(rng, (int, np.integer)):
        seed = None if rng is None else int(rng)
        return np.random.default_rng(seed), seed
    return rng, None


def _as_points(x, d: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {arr.shape}")
    return arr


def initial_momentum(s: Schedule, z0, eps0) -> np.ndarray:
    z0 = _as_points(z0, s.d)
    eps0 = _as_points(eps0, s.d)
    return s.beta * (eps0 - z0)


def momentum_step(s: Schedule, v_prev, eps, t: int) -> np.ndarray:
    """One momentum update ``sqrt(g) v_prev + sqrt(1-g) beta eps`` for 1 <= t <= T-1."""
    if not 1 <= t <= s.T - 1:
        raise IndexError(f"momentum step index {t} outside 1..{s.T - 1}")
    v_prev = _as_points(v_prev, s.d)
    eps = _as_points(eps, s.d)
    g = gamma_at(s, t)
    return math.sqrt(g) * v_prev + math.sqrt(1.0 - g) * s.beta * eps


def terminal_momentum(s: Schedule, eps) -> np.ndarray:
    """The t = T momentum ``beta * eps_T``; never used to build anchors."""
    return s.beta * _as_points(eps, s.d)


def momentum_marginal_sample(s: Schedule, v0, t: int, eps) -> np.ndarray:
    """Draw v_t given v_0 in one step from its Gaussian marginal."""
    if not 0 <= t <= s.T - 1:
        raise IndexError(f"t={t} outside 0..{s.T - 1}")
    v0 = _as_points(v0, s.d)
    eps = _as_points(eps, s.d)
    gb = gamma_bar(s, t)
    return math.sqrt(gb) * v0 + math.sqrt(1.0 - gb) * s.beta * eps


@dataclass
class Trajectory:
    anchors: np.ndarray  # (T+1, d): z_0 .. z_T
    velocities: np.ndarray  # (T, d): v_0 .. v_{T-1}
    noises: np.ndarray  # (T, d): eps_0 .. eps_{T-1}
    schedule: Schedule
    seed: int | None = None

    @property
    def T(self) -> int:
        return self.schedule.T

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule.to_dict(),
            "seed": self.seed,
            "anchors": self.anchors.tolist(),
            "velocities": self.velocities.tolist(),
            "noises": self.noises.tolist(),
        }


@dataclass
class TrajectoryBatch:
    """Many forward trajectories stored as stacked arrays."""

    anchors: np.ndarray  # (n, T+1, d)
    velocities: np.ndarray  # (n, T, d)
    noises: np.ndarray  # (n, T, d)
    schedule: Schedule

    def __len__(self) -> int:
        return self.anchors.shape[0]

    def __getitem__(self, i: int) -> Trajectory:
        return Trajectory(self.anchors[i], self.velocities[i], self.noises[i], self.schedule)


def replay(s: Schedule, z0, noises) -> TrajectoryBatch:
    """Rebuild trajectories from starting points and recorded noises ``(n, T, d)``."""
    z0 = np.atleast_2d(_as_points(z0, s.d))
    noises = np.asarray(noises, dtype=np.float64)
    n = z0.shape[0]
    if noises.shape != (n, s.T, s.d):
        raise ValueError(f"noises must have shape {(n, s.T, s.d)}, got {noises.shape}")
    anchors = np.empty((n, s.T + 1, s.d))
    velocities = np.empty((n, s.T, s.d))
    anchors[:, 0] = z0
    v = s.beta * (noises[:, 0] - z0)
    for t in range(1, s.T + 1):
        velocities[:, t - 1] = v
        anchors[:, t] = anchors[:, t - 1] + v
        if t < s.T:
            g = gamma_at(s, t)
            v = math.sqrt(g) * v + math.sqrt(1.0 - g) * s.beta * noises[:, t]
    return TrajectoryBatch(anchors, velocities, noises, s)


def simulate_batch(s: Schedule, z0, rng, eps0=None) -> TrajectoryBatch:
    """Simulate one forward trajectory per row of ``z0``.

    Draw order is eps_0 for all rows, then eps_t for t = 1..T-1, each an
    ``(n, d)`` block. Passing ``eps0`` fixes the noise endpoint direction
    (and hence v_0) instead of drawing it.
    """
    gen, _ = as_generator(rng)
    z0 = np.atleast_2d(_as_points(z0, s.d))
    n = z0.shape[0]
    noises = np.empty((n, s.T, s.d))
    if eps0 is None:
        noises[:, 0] = gen.standard_normal((n, s.d))
    else:
        noises[:, 0] = np.broadcast_to(_as_points(eps0, s.d), (n, s.d))
    for t in range(1, s.T):
        noises[:, t] = gen.standard_normal((n, s.d))
    return replay(s, z0, noises)


def simulate_forward(s: Schedule, z0, rng) -> Trajectory:
    """Simulate a single forward trajectory from ``z0``.

    ``rng`` may be an integer seed (recorded on the trajectory), a numpy
    Generator, or any object exposing ``standard_normal(size)``.
    """
    gen, seed = as_generator(rng)
    z0 = _as_points(z0, s.d)
    if z0.ndim != 1:
        raise ValueError("simulate_forward takes a single point; use simulate_batch")
    traj = simulate_batch(s, z0[None, :], gen)[0]
    traj.seed = seed
    return traj


def simulate_many(s: Schedule, z0, n: int, seed: int) -> list[Trajectory]:
    """n independent trajectories from a common start; trajectory i uses seed + i."""
    return [simulate_forward(s, z0, seed + i) for i in range(n)]


@dataclass(frozen=True)
class SubPathSample:
    t: int
    m: float
    x: np.ndarray
    target_velocity: np.ndarray
    tau: float


def global_time(t, m, T: int):
    return (t - 1 + m) / T


def subpath_point(traj: Trajectory, t: int, m: float) -> SubPathSample:
    if not 1 <= t <= traj.T:
        raise IndexError(f"sub-path index {t} outside 1..{traj.T}")
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"m must lie in [0, 1], got {m}")
    z_prev = traj.anchors[t - 1]
    v = traj.velocities[t - 1]
    if m == 1.0:
        x = traj.anchors[t].copy()
    else:
        x = z_prev + m * v
    return SubPathSample(t=t, m=float(m), x=x, target_velocity=v.copy(), tau=global_time(t, m, traj.T))
