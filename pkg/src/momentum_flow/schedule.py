"""Scalar schedule quantities for the momentum flow.

A schedule fixes the number of sub-paths ``T``, the momentum decay
coefficients ``gamma_1 .. gamma_{T-1}`` and the normalization ``beta`` that
makes a noise-free momentum trajectory land exactly on its noise endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ScheduleError(ValueError):
    """Invalid schedule parameters or an operation the schedule cannot support."""


@dataclass(frozen=True)
class Schedule:
    T: int
    gammas: tuple[float, ...]
    beta: float
    d: int = 2
    # Set only when every gamma_t is the same value; closed forms need it.
    constant_gamma: float | None = None

    @property
    def gamma(self) -> float:
        if self.constant_gamma is None:
            raise ScheduleError("closed-form operation requires a constant-gamma schedule")
        return self.constant_gamma

    def to_dict(self) -> dict:
        return {"T": self.T, "gamma": self.gamma, "d": self.d}

    @classmethod
    def from_dict(cls, data: dict) -> "Schedule":
        return make_schedule(int(data["T"]), float(data["gamma"]), d=int(data.get("d", 2)))


def _check_gamma(g: float) -> None:
    if not (0.0 < g <= 1.0) or math.isnan(g):
        raise ScheduleError(f"gamma must lie in (0, 1], got {g!r}")


def _check_dim(d: int) -> None:
    if d < 1:
        raise ScheduleError(f"dimension must be >= 1, got {d}")


def constant_beta(T: int, gamma: float) -> float:
    """Normalization for constant gamma, with the analytic limit 1/T at gamma=1."""
    if gamma == 1.0:
        return 1.0 / T
    # expm1/log1p keep precision for gamma close to 1
    rg = math.sqrt(gamma)
    return math.expm1(math.log(rg)) / math.expm1(T * math.log(rg))


def make_schedule(T: int, gamma: float, d: int = 2) -> Schedule:
    if T < 1:
        raise ScheduleError(f"T must be >= 1, got {T}")
    _check_gamma(gamma)
    _check_dim(d)
    gamma = float(gamma)
    return Schedule(
        T=int(T),
        gammas=(gamma,) * (T - 1),
        beta=constant_beta(T, gamma),
        d=int(d),
        constant_gamma=gamma,
    )


def make_variable_schedule(gammas: Sequence[float], d: int = 2) -> Schedule:
    """Schedule with per-step decay ``gammas = (gamma_1, ..., gamma_{T-1})``.

    beta is chosen so that ``beta * sum_i sqrt(gamma_bar_i) = 1`` over i = 0..T-1,
    which reduces to the constant-gamma formula when all entries agree.
    """
    gammas = tuple(float(g) for g in gammas)
    for g in gammas:
        _check_gamma(g)
    _check_dim(d)
    T = len(gammas) + 1
    partial = np.concatenate([[1.0], np.cumprod(gammas)])
    beta = 1.0 / math.fsum(np.sqrt(partial))
    constant = gammas[0] if gammas and all(g == gammas[0] for g in gammas) else None
    if constant is not None:
        beta = constant_beta(T, constant)
    return Schedule(T=T, gammas=gammas, beta=beta, d=int(d), constant_gamma=constant)


def gamma_at(s: Schedule, t: int) -> float:
    """gamma_t for 1 <= t <= T-1 (constant schedules also answer t = T)."""
    if 1 <= t <= s.T - 1:
        return s.gammas[t - 1]
    if t == s.T and s.constant_gamma is not None:
        return s.constant_gamma
    raise IndexError(f"gamma index {t} out of range for T={s.T}")


def gamma_bar(s: Schedule, t: int) -> float:
    """Cumulative product gamma_1 * ... * gamma_t; 1 for t = 0."""
    if t < 0 or t > s.T:
        raise IndexError(f"t={t} outside 0..{s.T}")
    if s.constant_gamma is not None:
        return s.constant_gamma**t
    prod = 1.0
    for i in range(1, t + 1):
        prod *= gamma_at(s, i)
    return prod


def _geometric_sums(gamma: float, t: int) -> tuple[float, float]:
    """S = sum_{i<t} gamma^{i/2} and G = sum_{i<t} gamma^i, exact at gamma=1."""
    if gamma == 1.0:
        return float(t), float(t)
    rg = math.sqrt(gamma)
    S = math.expm1(t * math.log(rg)) / math.expm1(math.log(rg))
    G = math.expm1(t * math.log(gamma)) / math.expm1(math.log(gamma))
    return S, G


@dataclass(frozen=True)
class MarginalCoeffs:
    """Law of z_t given z_0: mean ``mean_coeff * z_0`` and isotropic ``variance``.

    ``noise_coeffs`` (exact source only) holds the coefficient of each
    recorded noise draw in z_t: index 0 is eps_0, index j is eps_j.
    """

    mean_coeff: float
    variance: float
    source: str
    noise_coeffs: tuple[float, ...] = field(default=())


def _check_marginal_index(s: Schedule, t: int) -> None:
    if t < 1 or t > s.T:
        raise IndexError(f"t={t} outside 1..{s.T}")


def independent_marginal(s: Schedule, t: int) -> MarginalCoeffs:
    """Closed-form marginal of z_t that treats per-step noises as independent."""
    gamma = s.gamma
    _check_marginal_index(s, t)
    S, G = _geometric_sums(gamma, t)
    beta = s.beta
    return MarginalCoeffs(
        mean_coeff=1.0 - S * beta,
        variance=(S * S - G + t) * beta * beta,
        source="independent",
    )


def independent_terminal_variance(s: Schedule) -> float:
    return independent_marginal(s, s.T).variance


def exact_marginal(s: Schedule, t: int) -> MarginalCoeffs:
    """Exact linear-Gaussian marginal of z_t = z_0 + v_0 + ... + v_{t-1}.

    Each eps_j (j >= 1) enters every later momentum, so its coefficient in
    z_t is accumulated over all of them. Works for non-constant gammas.
    """
    _check_marginal_index(s, t)
    beta = s.beta
    # coef[j] is the coefficient of eps_j in the current momentum v_i
    coef = np.zeros(t)
    coef[0] = beta
    total = np.zeros(t)
    for i in range(t):
        if i > 0:
            g = gamma_at(s, i)
            coef *= math.sqrt(g)
            coef[i] = math.sqrt(1.0 - g) * beta
        total += coef
    # the eps_0 coefficient equals S*beta; z_0 picks up -S*beta through v_0
    mean_coeff = 1.0 - total[0]
    variance = math.fsum(total * total)
    return MarginalCoeffs(
        mean_coeff=mean_coeff,
        variance=variance,
        source="exact",
        noise_coeffs=tuple(float(c) for c in total),
    )


def exact_terminal_variance(s: Schedule) -> float:
    return exact_marginal(s, s.T).variance


def terminal_variance(s: Schedule, source: str = "exact") -> float:
    if source == "exact":
        return exact_terminal_variance(s)
    if source == "independent":
        return independent_terminal_variance(s)
    raise ValueError(f"unknown terminal variance source {source!r}; use 'exact' or 'independent'")


def momentum_variance(s: Schedule, t: int) -> float:
    """Variance (per coordinate) of v_t given v_0: (1 - gamma_bar_t) beta^2."""
    return (1.0 - gamma_bar(s, t)) * s.beta**2
