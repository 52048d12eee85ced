"""Point clouds and distribution-comparison metrics for 2D toy evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

EXACT_W2_MAX = 2048


@dataclass
class PointCloud:
    points: np.ndarray
    name: str = ""
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.points.ndim != 2:
            raise ValueError(f"points must be an (n, d) array, got shape {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise ValueError(f"point cloud {self.name!r} contains non-finite coordinates")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _points(c) -> np.ndarray:
    return c.points if isinstance(c, PointCloud) else np.atleast_2d(np.asarray(c, dtype=np.float64))


def _pair(A, B) -> tuple[np.ndarray, np.ndarray]:
    a, b = _points(A), _points(B)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("metric needs non-empty point clouds")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return a, b


@dataclass
class MetricReport:
    metric: str
    value: float
    params: dict
    sizes: tuple[int, int]

    def to_dict(self) -> dict:
        return {"metric": self.metric, "value": self.value, "params": self.params, "sizes": list(self.sizes)}


def energy_distance(A, B) -> float:
    """V-statistic energy distance 2E|a-b| - E|a-a'| - E|b-b'|."""
    a, b = _pair(A, B)
    ab = cdist(a, b).mean()
    aa = cdist(a, a).mean()
    bb = cdist(b, b).mean()
    return float(2.0 * ab - aa - bb)


def _random_directions(d: int, n: int, rng) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sliced_w2(A, B, n_proj: int = 64, rng=0) -> float:
    """Sliced 2-Wasserstein distance over uniformly random directions.

    The larger cloud is subsampled without replacement to the smaller
    size so each 1D problem is a plain sorted matching.
    """
    a, b = _pair(A, B)
    if n_proj < 1:
        raise ValueError("n_proj must be >= 1")
    rng = np.random.default_rng(rng)
    n = min(len(a), len(b))
    if len(a) > n:
        a = a[rng.choice(len(a), n, replace=False)]
    if len(b) > n:
        b = b[rng.choice(len(b), n, replace=False)]
    dirs = _random_directions(a.shape[1], n_proj, rng)
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return float(np.sqrt(np.mean((pa - pb) ** 2)))


def exact_w2(A, B) -> float:
    """W2 between equal-size empirical clouds via an optimal assignment."""
    a, b = _pair(A, B)
    if len(a) != len(b):
        raise ValueError(f"exact_w2 needs equal sizes, got {len(a)} and {len(b)}")
    if len(a) > EXACT_W2_MAX:
        raise ValueError(f"exact_w2 is capped at {EXACT_W2_MAX} points, got {len(a)}")
    cost = cdist(a, b, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def knn_radii(points: np.ndarray, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest neighbour, self excluded."""
    if k >= len(points):
        raise ValueError(f"k={k} must be smaller than the cloud size {len(points)}")
    dist = cdist(points, points)
    # column 0 of the partition is the point itself
    return np.partition(dist, k, axis=1)[:, k]


def _coverage(evaluated: np.ndarray, manifold: np.ndarray, k: int, chunk: int = 4096) -> float:
    radii = knn_radii(manifold, k)
    covered = 0
    for start in range(0, len(evaluated), chunk):
        dist = cdist(evaluated[start : start + chunk], manifold)
        covered += int(np.any(dist <= radii[None, :], axis=1).sum())
    return covered / len(evaluated)


def knn_recall(real, gen, k: int = 3) -> tuple[float, float]:
    """kNN-manifold (recall, precision).

    Recall is the fraction of real points inside some generated point's
    k-NN ball; precision swaps the roles.
    """
    r, g = _pair(real, gen)
    if k < 1 or k >= len(r) or k >= len(g):
        raise ValueError(f"k={k} must satisfy 1 <= k < cloud sizes ({len(r)}, {len(g)})")
    return _coverage(r, g, k), _coverage(g, r, k)


def dispersion(velocities) -> np.ndarray:
    """Trace of the across-sample covariance of velocity per sub-path.

    ``velocities`` is (n_samples, T, d); returns a length-T array.
    """
    v = np.asarray(velocities, dtype=np.float64)
    if v.ndim != 3:
        raise ValueError(f"expected (n, T, d) velocities, got shape {v.shape}")
    if v.shape[0] < 2:
        raise ValueError("dispersion needs at least two trajectories")
    return v.var(axis=0, ddof=1).sum(axis=-1)


def velocity_dispersion_profile(trajectories) -> list[float]:
    """Per-sub-path velocity dispersion across trajectories.

    Accepts forward trajectories (their momenta are used), a reverse
    sampling result (its per-sub-path mean learned velocity is used), or
    a raw ``(n, T, d)`` array.
    """
    if hasattr(trajectories, "velocities"):
        v = trajectories.velocities
    elif isinstance(trajectories, (list, tuple)):
        if len(trajectories) < 2:
            raise ValueError("dispersion needs at least two trajectories")
        shapes = {np.shape(tr.velocities) for tr in trajectories}
        if len(shapes) != 1:
            raise ValueError(f"trajectories have mismatched structures: {sorted(shapes)}")
        v = np.stack([tr.velocities for tr in trajectories])
    else:
        v = trajectories
    return dispersion(v).tolist()
