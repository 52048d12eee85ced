"""Reverse process: piecewise Euler sampling and momentum posterior formulas.

Sampling integrates a velocity field backward along each sub-path, from
the noise end (sub-path T) to the data end (sub-path 1). Any callable
``field(x, tau) -> velocity`` works, so analytic fields can stand in for
a trained network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import PointCloud
from .schedule import Schedule, ScheduleError, terminal_variance

SAMPLE_STREAM = 2


class SamplingError(RuntimeError):
    pass


@dataclass
class ReverseConfig:
    steps_per_subpath: int = 25
    terminal_variance_source: str = "exact"
    record_trajectories: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.steps_per_subpath < 1:
            raise ValueError("steps_per_subpath must be >= 1")
        if self.terminal_variance_source not in ("exact", "independent"):
            raise ValueError("terminal_variance_source must be 'exact' or 'independent'")

    def nfe(self, T: int) -> int:
        return T * self.steps_per_subpath


def sample_terminal(s: Schedule, rng, source: str = "exact", n: int | None = None) -> np.ndarray:
    """Draw z_T from the zero-mean isotropic Gaussian of the chosen variance."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    sigma = math.sqrt(terminal_variance(s, source))
    size = (s.d,) if n is None else (n, s.d)
    return sigma * rng.standard_normal(size)


def _euler_grid(t: int, T: int, steps: int) -> np.ndarray:
    """Global times at which the field is evaluated, m = 1, 1-h, ..., h."""
    m = 1.0 - np.arange(steps) / steps
    return (t - 1 + m) / T


def reverse_subpath(field, z_end, t: int, T: int, steps: int, path: list | None = None) -> np.ndarray:
    """Explicit Euler from m = 1 down to m = 0 on sub-path ``t``.

    Each step is ``z <- z - h * field(z, tau)`` with h = 1/steps, the field
    evaluated at the current (upper) end of the step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 1 <= t <= T:
        raise IndexError(f"sub-path index {t} outside 1..{T}")
    h = 1.0 / steps
    z = np.array(z_end, dtype=np.float64)
    for tau in _euler_grid(t, T, steps):
        z = z - h * np.asarray(field(z, tau))
        if not np.all(np.isfinite(z)):
            raise SamplingError(f"non-finite state on sub-path {t} at tau={tau:.4f}")
        if path is not None:
            path.append(z.copy())
    return z


@dataclass
class ReverseResult:
    cloud: PointCloud
    nfe: int
    anchors: np.ndarray | None = None  # (n, T+1, d); index T is the terminal draw
    path: np.ndarray | None = None  # (n, T*steps+1, d), ordered from z_T to z_0

    @property
    def velocities(self) -> np.ndarray:
        """Mean learned velocity on each sub-path, (n, T, d)."""
        if self.anchors is None:
            raise ValueError("trajectories were not recorded")
        return np.diff(self.anchors, axis=1)


def sample_reverse(field, s: Schedule, n: int, cfg: ReverseConfig | None = None) -> ReverseResult:
    """Generate ``n`` samples by chaining sub-paths t = T..1 from z_T.

    Samples are integrated together as one (n, d) batch; the field is
    evaluated ``T * steps_per_subpath`` times per sample.
    """
    cfg = cfg or ReverseConfig()
    if getattr(field, "d", s.d) != s.d:
        raise ValueError(f"model dimension {field.d} does not match schedule d={s.d}")
    if n == 0:
        empty = np.empty((0, s.d))
        return ReverseResult(PointCloud(empty, name="generated"), nfe=0)
    rng = np.random.default_rng(cfg.seed + SAMPLE_STREAM)
    z = sample_terminal(s, rng, cfg.terminal_variance_source, n=n)
    anchors = np.empty((n, s.T + 1, s.d)) if cfg.record_trajectories else None
    path = [z.copy()] if cfg.record_trajectories else None
    if anchors is not None:
        anchors[:, s.T] = z
    for t in range(s.T, 0, -1):
        z = reverse_subpath(field, z, t, s.T, cfg.steps_per_subpath, path)
        if anchors is not None:
            anchors[:, t - 1] = z
    result = ReverseResult(PointCloud(z, name="generated"), nfe=cfg.nfe(s.T), anchors=anchors)
    if path is not None:
        result.path = np.stack(path, axis=1)
    return result


# --- posterior of the momentum chain ---------------------------------------


@dataclass(frozen=True)
class PosteriorParams:
    mean: np.ndarray
    variance: float


def _posterior_gamma(s: Schedule, t: int) -> float:
    gamma = s.gamma
    if gamma == 1.0:
        raise ScheduleError("momentum posterior is degenerate at gamma = 1")
    if not 1 <= t <= s.T - 1:
        raise IndexError(f"posterior index {t} outside 1..{s.T - 1}")
    return gamma


def posterior_variance(s: Schedule, t: int) -> float:
    g = _posterior_gamma(s, t)
    return (1.0 - g) * (1.0 - g ** (t - 1)) / (1.0 - g**t) * s.beta**2


def closed_form_posterior_coefficients(s: Schedule, t: int) -> tuple[float, float]:
    """(v_t coefficient, eps coefficient) of the closed-form posterior mean."""
    g = _posterior_gamma(s, t)
    v_coef = (math.sqrt(g) * (1.0 - g ** (t - 1)) + math.sqrt(g ** (t - 1)) * (1.0 - g)) / (1.0 - g**t)
    eps_coef = -(1.0 - g) * s.beta / math.sqrt(g * (1.0 - g**t))
    return v_coef, eps_coef


def substitution_posterior_coefficients(s: Schedule, t: int) -> tuple[float, float]:
    """Coefficients after writing v_0 = (v_t - sqrt(1-gb_t) beta eps) / sqrt(gb_t)
    into the Gaussian-conditioning mean."""
    g = _posterior_gamma(s, t)
    gb, gb_prev = g**t, g ** (t - 1)
    w_vt = math.sqrt(g) * (1.0 - gb_prev) / (1.0 - gb)
    w_v0 = math.sqrt(gb_prev) * (1.0 - g) / (1.0 - gb)
    v_coef = w_vt + w_v0 / math.sqrt(gb)
    eps_coef = -w_v0 * math.sqrt(1.0 - gb) * s.beta / math.sqrt(gb)
    return v_coef, eps_coef


def posterior_params(s: Schedule, t: int, v_t, eps_hat) -> PosteriorParams:
    """Posterior of v_{t-1} given v_t and a noise estimate, closed-form coefficients."""
    v_coef, eps_coef = closed_form_posterior_coefficients(s, t)
    mean = v_coef * np.asarray(v_t, dtype=np.float64) + eps_coef * np.asarray(eps_hat, dtype=np.float64)
    return PosteriorParams(mean=mean, variance=posterior_variance(s, t))


def bayes_posterior_oracle(s: Schedule, t: int, v_t, v0) -> PosteriorParams:
    """q(v_{t-1} | v_t, v_0) by conjugate Gaussian conditioning."""
    g = _posterior_gamma(s, t)
    gb, gb_prev = g**t, g ** (t - 1)
    v_t = np.asarray(v_t, dtype=np.float64)
    v0 = np.asarray(v0, dtype=np.float64)
    mean = (math.sqrt(g) * (1.0 - gb_prev) * v_t + math.sqrt(gb_prev) * (1.0 - g) * v0) / (1.0 - gb)
    return PosteriorParams(mean=mean, variance=posterior_variance(s, t))


def posterior_momentum_step(s: Schedule, t: int, v_t, eps_hat, rng) -> np.ndarray:
    """Sample v_{t-1} from the closed-form posterior; deterministic at t = 1."""
    post = posterior_params(s, t, v_t, eps_hat)
    if post.variance == 0.0:
        return post.mean
    rng = np.random.default_rng(rng) if isinstance(rng, (int, np.integer)) else rng
    return post.mean + math.sqrt(post.variance) * rng.standard_normal(np.shape(post.mean))
