"""Closed-form and Monte Carlo verification suites.

Each suite returns a SuiteResult with a pass flag and the measured values
it was judged on. Statistical comparisons use a 4 standard-error band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datasets import gen_dataset
from .forward import simulate_batch
from .metrics import knn_recall, velocity_dispersion_profile
from .neural import finite_diff_check, init_model
from .reverse import (
    bayes_posterior_oracle,
    posterior_params,
    posterior_variance,
    closed_form_posterior_coefficients,
    reverse_subpath,
    substitution_posterior_coefficients,
)
from .schedule import exact_marginal, gamma_bar, make_schedule, independent_marginal
from .training import mfm_pairs

N_SE = 4.0


@dataclass
class SuiteResult:
    name: str
    passed: bool
    values: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "status": "PASS" if self.passed else "FAIL", "values": self.values}


def mean_and_se(x: np.ndarray) -> tuple[float, float]:
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def var_and_se(x: np.ndarray) -> tuple[float, float]:
    """Sample variance and its large-sample standard error from the 4th moment."""
    c = x - x.mean()
    var = float(c.var(ddof=1))
    m4 = float(np.mean(c**4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / len(x))


def within(measured: float, expected: float, se: float, n_se: float = N_SE) -> bool:
    return abs(measured - expected) <= n_se * se


# --- schedule -------------------------------------------------------------


def beta_normalization(gammas=(0.9, 0.98, 0.999), Ts=(2, 5, 10), tol=1e-12) -> SuiteResult:
    worst = 0.0
    for g in gammas:
        for T in Ts:
            s = make_schedule(T, g)
            total = math.fsum(g ** (i / 2) for i in range(T))
            worst = max(worst, abs(s.beta * total - 1.0))
    return SuiteResult("beta_normalization", worst <= tol, {"max_abs_error": worst, "tol": tol})


def gamma_bar_consistency(gammas=(0.9, 0.98, 0.999), t_max=50, tol=1e-14) -> SuiteResult:
    worst = 0.0
    for g in gammas:
        s = make_schedule(t_max, g)
        for t in range(t_max + 1):
            prod = 1.0
            for _ in range(t):
                prod *= g
            worst = max(worst, abs(gamma_bar(s, t) - prod))
    return SuiteResult("gamma_bar_consistency", worst <= tol, {"max_abs_error": worst, "tol": tol})


# --- forward --------------------------------------------------------------


def rectified_flow_reduction(Ts=(2, 4, 8), d=2, n=64, seed=0, tol=1e-12) -> SuiteResult:
    """gamma=1 paths are straight; T=1 training tuples equal plain rectified-flow pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for T in Ts:
        s = make_schedule(T, 1.0, d=d)
        z0 = rng.standard_normal((n, d))
        traj = simulate_batch(s, z0, seed + T)
        eps0 = traj.noises[:, 0]
        t = np.arange(T + 1)[None, :, None]
        line = z0[:, None, :] + (t / T) * (eps0 - z0)[:, None, :]
        worst = max(worst, float(np.abs(traj.anchors - line).max()))

    data = rng.standard_normal((n, d))
    s1 = make_schedule(1, 0.98, d=d)
    got = mfm_pairs(s1, data, np.random.default_rng(seed))
    ref = plain_rectified_flow_pairs(data, np.random.default_rng(seed))
    identical = all(np.array_equal(a, b) for a, b in zip((got.x, got.target, got.tau), ref))
    return SuiteResult(
        "rectified_flow_reduction",
        worst <= tol and identical,
        {"max_affine_residual": worst, "tol": tol, "T1_pairs_bit_identical": identical},
    )


def plain_rectified_flow_pairs(x0: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Textbook rectified-flow tuples: x = x0 + m (eps - x0), target eps - x0, time m."""
    eps = rng.standard_normal(x0.shape)
    m = rng.random(len(x0))
    return x0 + m[:, None] * (eps - x0), eps - x0, m


def momentum_marginal_law(n=100_000, gamma=0.98, T=5, z0=0.5, eps0=1.0, seed=0) -> SuiteResult:
    """Per-t moments of v_t given a fixed v_0 against the one-step marginal."""
    s = make_schedule(T, gamma, d=1)
    traj = simulate_batch(s, np.full((n, 1), z0), seed, eps0=[eps0])
    v0 = s.beta * (eps0 - z0)
    rows, ok = [], True
    for t in range(T):
        v = traj.velocities[:, t, 0]
        gb = gamma_bar(s, t)
        exp_mean, exp_var = math.sqrt(gb) * v0, (1.0 - gb) * s.beta**2
        if t == 0:
            row_ok = bool(np.all(v == v0))
            mean, mse, var, vse = float(v.mean()), 0.0, float(v.var()), 0.0
        else:
            mean, mse = mean_and_se(v)
            var, vse = var_and_se(v)
            row_ok = within(mean, exp_mean, mse) and within(var, exp_var, vse)
        ok &= row_ok
        rows.append({"t": t, "mean": mean, "expected_mean": exp_mean, "mean_se": mse,
                     "var": var, "expected_var": exp_var, "var_se": vse, "pass": row_ok})
    return SuiteResult("momentum_marginal_law", ok, {"n": n, "rows": rows})


def forward_marginal(n=100_000, gamma=0.98, T=5, z0=0.7, seed=0) -> SuiteResult:
    """Moments of z_t against the exact marginal, plus the gap to the
    independent-noise closed form.

    The gap is measured on paths with eps_0 pinned to zero (z_0 = 0), where
    z_t is a sum of momentum noises only.
    """
    s = make_schedule(T, gamma, d=1)
    traj = simulate_batch(s, np.full((n, 1), z0), seed)
    rows, ok = [], True
    for t in range(1, T + 1):
        z = traj.anchors[:, t, 0]
        ex, pa = exact_marginal(s, t), independent_marginal(s, t)
        mean, mse = mean_and_se(z)
        var, vse = var_and_se(z)
        row_ok = within(mean, ex.mean_coeff * z0, mse) and within(var, ex.variance, vse)
        ok &= row_ok
        rows.append({"t": t, "mean": mean, "exact_mean": ex.mean_coeff * z0, "independent_mean": pa.mean_coeff * z0,
                     "mean_se": mse, "var": var, "exact_var": ex.variance, "independent_var": pa.variance,
                     "var_se": vse, "pass": row_ok})

    low_t_diff = max(
        abs(exact_marginal(s, t).variance - independent_marginal(s, t).variance)
        + abs(exact_marginal(s, t).mean_coeff - independent_marginal(s, t).mean_coeff)
        for t in (1, 2)
    )
    ok &= low_t_diff <= 1e-12

    noise_only = simulate_batch(s, np.zeros((n, 1)), seed + 1, eps0=[0.0])
    z3 = noise_only.anchors[:, 3, 0]
    var3, se3 = var_and_se(z3)
    S, G = sum(gamma ** (i / 2) for i in range(3)), sum(gamma**i for i in range(3))
    independent_noise_var = (3 - G) * s.beta**2
    gap_expected = 2.0 * math.sqrt(gamma) * (1.0 - gamma) * s.beta**2
    gap_measured = var3 - independent_noise_var
    gap_ok = within(gap_measured, gap_expected, se3)
    independent_rejected = not within(var3, independent_noise_var, se3)
    ok &= gap_ok and independent_rejected
    return SuiteResult("forward_marginal", ok, {
        "n": n,
        "rows": rows,
        "t_le_2_max_diff": low_t_diff,
        "gap_t3": {"measured": gap_measured, "expected": gap_expected, "se": se3,
                   "pass": gap_ok, "independent_form_rejected": independent_rejected, "S": S, "G": G},
    })


def forward_dispersion(n=10_000, gamma=0.98, T=5, d=2, seed=0) -> SuiteResult:
    """Momentum spread across paths sharing z_0 and eps_0 (hence v_0)."""
    s = make_schedule(T, gamma, d=d)
    traj = simulate_batch(s, np.zeros((n, d)), seed, eps0=np.ones(d))
    profile = velocity_dispersion_profile(traj)
    rows, ok = [], True
    for t, disp in enumerate(profile):
        expected = (1.0 - gamma_bar(s, t)) * s.beta**2 * d
        if t == 0:
            # every path shares v_0, so the spread is rounding noise only
            row_ok = bool(np.all(traj.velocities[:, 0] == traj.velocities[0, 0]))
            se = 0.0
        else:
            se = math.sqrt(sum(var_and_se(traj.velocities[:, t, k])[1] ** 2 for k in range(d)))
            row_ok = within(disp, expected, se)
        ok &= row_ok
        rows.append({"t": t, "dispersion": disp, "expected": expected, "se": se, "pass": row_ok})
    increasing = all(b > a for a, b in zip(profile, profile[1:]))
    return SuiteResult("forward_dispersion", ok and increasing, {"rows": rows, "strictly_increasing": increasing})


# --- reverse --------------------------------------------------------------


def posterior_oracle(n=1_000_000, gamma=0.98, T=5, t=3, z0=0.2, eps0=0.8, slice_frac=0.05, seed=0) -> SuiteResult:
    """Gaussian-conditioning posterior against brute-force chain samples.

    Samples of (v_{t-1}, v_t) come from simulating the momentum chain with
    v_0 fixed; a thin slice around E[v_t] conditions on v_t.
    """
    s = make_schedule(T, gamma, d=1)
    traj = simulate_batch(s, np.full((n, 1), z0), seed, eps0=[eps0])
    v0 = s.beta * (eps0 - z0)
    prev, cur = traj.velocities[:, t - 1, 0], traj.velocities[:, t, 0]
    center, width = cur.mean(), slice_frac * cur.std()
    sel = np.abs(cur - center) <= width
    # residual against the oracle mean at each sample's own v_t removes slice-width bias
    resid = prev[sel] - bayes_posterior_oracle(s, t, cur[sel], v0).mean
    rmean, rse = mean_and_se(resid)
    rvar, rvse = var_and_se(resid)
    post_var = posterior_variance(s, t)
    slice_ok = within(rmean, 0.0, rse) and within(rvar, post_var, rvse)

    t1_var_closed = posterior_params(s, 1, np.zeros(1), np.zeros(1)).variance
    t1_var_oracle = bayes_posterior_oracle(s, 1, np.zeros(1), np.zeros(1)).variance
    degenerate_ok = t1_var_closed == 0.0 and t1_var_oracle == 0.0

    coef_rows = []
    differs = True
    for tt in range(2, T):
        closed = closed_form_posterior_coefficients(s, tt)
        subst = substitution_posterior_coefficients(s, tt)
        differs &= abs(closed[0] - subst[0]) > 1e-9
        coef_rows.append({"t": tt, "closed_v_coef": closed[0], "substituted_v_coef": subst[0],
                          "closed_eps_coef": closed[1], "substituted_eps_coef": subst[1]})
    return SuiteResult("posterior_oracle", slice_ok and degenerate_ok and differs, {
        "n": n,
        "slice_count": int(sel.sum()),
        "residual_mean": rmean, "residual_mean_se": rse,
        "residual_var": rvar, "posterior_var": post_var, "residual_var_se": rvse,
        "t1_variance_zero": degenerate_ok,
        "v_coef_differs": differs,
        "coefficients": coef_rows,
    })


def euler_order(steps=(10, 20, 40, 80, 160), T=2, z_end=1.5) -> SuiteResult:
    """Backward Euler on u(z, tau) = z cos(tau) over all T sub-paths.

    m advances T times faster than tau, so dz/dtau = T u and the exact
    endpoint is z_end * exp(-T sin 1).
    """

    def field(z, tau):
        return z * math.cos(tau)

    exact = z_end * math.exp(-T * math.sin(1.0))
    errors = []
    for k in steps:
        z = np.array([z_end])
        for t in range(T, 0, -1):
            z = reverse_subpath(field, z, t, T, k)
        errors.append(abs(float(z[0]) - exact))
    h = 1.0 / np.asarray(steps, dtype=float)
    slope = float(np.polyfit(np.log(h), np.log(errors), 1)[0])
    return SuiteResult("euler_order", abs(slope - 1.0) <= 0.15, {"steps": list(steps), "errors": errors, "slope": slope})


# --- neural ---------------------------------------------------------------

GRAD_SHAPES = ((1, 4, 8), (2, 16, 32), (2, 128, 32), (3, 7, 5), (5, 32, 64))


def gradient_check(shapes=GRAD_SHAPES, h=1e-5, tol=1e-5, seed=0) -> SuiteResult:
    rows, ok = [], True
    for i, (d, width, batch) in enumerate(shapes):
        rng = np.random.default_rng(seed + i)
        model = init_model(d, width, seed + i)
        for name in ("b1", "b2", "b3"):
            model.params[name] = 0.1 * rng.standard_normal(model.params[name].shape)
        x = rng.standard_normal((batch, d))
        tau = rng.random(batch)
        target = rng.standard_normal((batch, d))
        err = finite_diff_check(model, x, tau, target, h=h, seed=seed + i)
        ok &= err <= tol
        rows.append({"d": d, "width": width, "batch": batch, "max_rel_error": err})
    return SuiteResult("gradient_check", ok, {"rows": rows, "tol": tol})


# --- metrics --------------------------------------------------------------


def recall_sanity(n=2000, k=3, seed=0) -> SuiteResult:
    real = gen_dataset("gaussians8", n, seed=seed, normalize_points=False)
    same, _ = knn_recall(real, real, k)
    half = gen_dataset("gaussians8", n, seed=seed + 1, normalize_points=False, modes=[0, 2, 4, 6])
    dropped, _ = knn_recall(real, half, k)
    ok = same >= 0.95 and abs(dropped - 0.5) <= 0.05
    return SuiteResult("recall_sanity", ok, {"identical_recall": same, "four_of_eight_recall": dropped})


def run_all(n_mc: int = 100_000, n_posterior: int = 1_000_000, seed: int = 0) -> list[SuiteResult]:
    return [
        beta_normalization(),
        gamma_bar_consistency(),
        rectified_flow_reduction(seed=seed),
        momentum_marginal_law(n=n_mc, seed=seed),
        forward_marginal(n=n_mc, seed=seed),
        forward_dispersion(n=max(n_mc // 10, 1000), seed=seed),
        posterior_oracle(n=n_posterior, seed=seed),
        gradient_check(seed=seed),
        euler_order(),
        recall_sanity(seed=seed),
    ]
