"""Doubling-dimension and local-covariance-dimension estimators."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core_math import as_points, covariance_and_mean, diameter, projection_energy, top_eigenvalues
from .manifolds import closest_point, tangent_basis

__all__ = [
    "InsufficientSampleError",
    "DoublingEstimate",
    "LocCovResult",
    "TangentEnergyResult",
    "greedy_cover",
    "estimate_doubling_dimension",
    "local_covariance_check",
    "tangent_energy_check",
]


class InsufficientSampleError(ValueError):
    """Too few points in a neighborhood for the requested statistic."""


@dataclass
class DoublingEstimate:
    d_hat: float
    probes: list = field(default_factory=list)  # (center_index, radius, cover_count)


@dataclass
class LocCovResult:
    d: int
    eps_target: float
    r: float
    fractions: list
    passed: bool


@dataclass
class TangentEnergyResult:
    fraction: float
    q: np.ndarray
    mean_to_q: float
    max_to_q: float
    containment_ok: bool | None = None


def greedy_cover(points, radius):
    """Greedy cover of ``points`` by balls of ``radius`` centered at data points.

    Starts from ``points[0]``; then repeatedly makes a center of the
    uncovered point whose ball covers the most still-uncovered points
    (lowest index on ties), until nothing is left uncovered. Returns the
    center indices.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return np.empty(0, dtype=np.int64)
    pts = as_points(pts)
    n = pts.shape[0]
    neighbors = cKDTree(pts).query_ball_point(pts, radius)
    neighbors = [np.asarray(nb, dtype=np.int64) for nb in neighbors]
    uncovered = np.ones(n, dtype=bool)
    gain = np.array([nb.size for nb in neighbors])
    centers = []
    nxt = 0
    while True:
        centers.append(nxt)
        newly = neighbors[nxt][uncovered[neighbors[nxt]]]
        uncovered[newly] = False
        if not uncovered.any():
            return np.array(centers, dtype=np.int64)
        # a newly covered point no longer counts for anyone who reaches it
        for p in newly:
            gain[neighbors[p]] -= 1
        cand = np.flatnonzero(uncovered)
        nxt = int(cand[np.argmax(gain[cand])])


def estimate_doubling_dimension(points, num_probes, rng, min_fraction=0.05):
    """Estimate the doubling dimension as the largest ``log2`` cover count seen.

    Each probe picks a random data point as center and a radius ``r``
    log-uniform in ``[min_fraction * diameter, diameter]``, restricts the
    data to ``B(center, r)`` and greedily covers it with balls of radius
    ``r / 2``.
    """
    pts = as_points(points)
    diam = diameter(pts)
    if diam == 0.0:
        return DoublingEstimate(0.0, [])
    probes = []
    lo, hi = math.log(min_fraction * diam), math.log(diam)
    for _ in range(num_probes):
        c = int(rng.integers(pts.shape[0]))
        r = math.exp(rng.uniform(lo, hi))
        dist = np.linalg.norm(pts - pts[c], axis=1)
        # center first so the cover starts from it
        inside = np.flatnonzero(dist <= r)
        inside = np.concatenate([[c], inside[inside != c]])
        count = len(greedy_cover(pts[inside], r / 2.0))
        probes.append((c, r, count))
    d_hat = max(math.log2(cnt) for _, _, cnt in probes)
    return DoublingEstimate(d_hat, probes)


def local_covariance_check(points, center, r, d, eps_target=0.0):
    """Share of covariance trace held by the top ``d`` eigenvalues inside ``B(center, r)``.

    Returns ``(fraction, passed)`` with ``passed = fraction >= 1 - eps_target``.

    Raises
    ------
    InsufficientSampleError
        If the ball holds fewer than ``d + 2`` points.
    """
    if np.asarray(points).size == 0:
        raise InsufficientSampleError(f"0 points in ball, need {d + 2}")
    pts = as_points(points)
    center = np.asarray(center, dtype=np.float64)
    local = pts[np.linalg.norm(pts - center, axis=1) <= r]
    if local.shape[0] < d + 2:
        raise InsufficientSampleError(f"{local.shape[0]} points in ball, need {d + 2}")
    _, cov = covariance_and_mean(local)
    trace = float(np.trace(cov))
    if trace == 0.0:
        fraction = 1.0
    else:
        fraction = min(1.0, max(0.0, float(np.sum(top_eigenvalues(cov, d))) / trace))
    return fraction, fraction >= 1.0 - eps_target


def tangent_energy_check(points, spec, base_point=None, r=None):
    """Share of a patch's centered energy lying in the tangent space at ``q``.

    ``q`` is the manifold point closest to the patch mean. When
    ``base_point`` and ``r`` are given, also checks ``||mu - q|| <= r`` and
    ``||x_i - q|| <= 3 r`` for every point.
    """
    if np.asarray(points).size == 0:
        raise InsufficientSampleError("empty neighborhood")
    pts = as_points(points)
    mu = pts.mean(axis=0)
    q = closest_point(spec, mu)
    T = tangent_basis(spec, q)
    total = float(np.sum((pts - mu) ** 2))
    fraction = 1.0 if total == 0.0 else projection_energy(pts, T, mu) / total
    mean_to_q = float(np.linalg.norm(mu - q))
    max_to_q = float(np.linalg.norm(pts - q, axis=1).max())
    ok = None
    if r is not None:
        ok = mean_to_q <= r and max_to_q <= 3.0 * r
    return TangentEnergyResult(fraction, q, mean_to_q, max_to_q, ok)
