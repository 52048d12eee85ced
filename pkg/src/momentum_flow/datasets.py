"""Seeded 2D toy distributions."""

from __future__ import annotations

import numpy as np

from .metrics import PointCloud


def _two_moons(n, rng, noise=0.05):
    n_out = n // 2
    n_in = n - n_out
    a = rng.uniform(0.0, np.pi, n_out)
    b = rng.uniform(0.0, np.pi, n_in)
    outer = np.stack([np.cos(a), np.sin(a)], axis=1)
    inner = np.stack([1.0 - np.cos(b), 0.5 - np.sin(b)], axis=1)
    pts = np.concatenate([outer, inner])
    return pts + noise * rng.standard_normal(pts.shape)


def gaussian_ring_centers(n_modes=8, radius=2.0):
    angle = 2.0 * np.pi * np.arange(n_modes) / n_modes
    return radius * np.stack([np.cos(angle), np.sin(angle)], axis=1)


def _gaussians8(n, rng, std=0.1, modes=None):
    centers = gaussian_ring_centers()
    modes = np.arange(len(centers)) if modes is None else np.asarray(modes)
    which = modes[rng.integers(0, len(modes), n)]
    return centers[which] + std * rng.standard_normal((n, 2))


def _checkerboard(n, rng):
    # 4x4 board on [-2, 2]^2, the 8 cells with even (col + row)
    x = rng.uniform(-2.0, 2.0, n)
    col = np.floor(x + 2.0)
    row = 2.0 * rng.integers(0, 2, n) + (col % 2)
    y = row - 2.0 + rng.uniform(0.0, 1.0, n)
    return np.stack([x, y], axis=1)


def _spiral(n, rng, noise=0.05):
    r = np.sqrt(rng.uniform(0.0, 1.0, n)) * 3.0 * np.pi
    pts = np.stack([r * np.cos(r), r * np.sin(r)], axis=1) / (3.0 * np.pi)
    return pts + noise * rng.standard_normal(pts.shape)


GENERATORS = {
    "two_moons": _two_moons,
    "gaussians8": _gaussians8,
    "checkerboard": _checkerboard,
    "spiral": _spiral,
}


def normalize(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-dimension shift to zero mean and scale to unit RMS."""
    shift = points.mean(axis=0)
    centered = points - shift
    scale = np.sqrt(np.mean(centered**2, axis=0))
    return centered / scale, shift, scale


def gen_dataset(name: str, n: int, seed: int = 0, normalize_points: bool = True, **kwargs) -> PointCloud:
    if name not in GENERATORS:
        raise ValueError(f"unknown dataset {name!r}; valid names: {', '.join(sorted(GENERATORS))}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    pts = GENERATORS[name](n, rng, **kwargs)
    meta = {"dataset": name, "n": n, "seed": seed, "normalize": normalize_points}
    if not normalize_points:
        return PointCloud(pts, name=name, meta=meta)
    pts, shift, scale = normalize(pts)
    return PointCloud(pts, name=name, shift=shift, scale=scale, meta=meta)
