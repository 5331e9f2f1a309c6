"""Monte Carlo estimates of split probabilities for RPTree-Max cells.

A cell is a fixed point set (by default uniform on a ``d``-disk of radius
``Delta`` sitting in the first ``d`` coordinates of ``R^D``). A random split
draws ``v ~ N(0, I/D)``, a random pivot giving the radius estimate
``Delta~`` (its largest distance to the cell), and a threshold uniform in
``median +- 6 Delta~ / sqrt(D)``. Points with projection strictly below the
threshold go left.

Balls are represented by finite samples; a ball is "split" when its
samples land on both sides.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .core_math import sample_direction

__all__ = [
    "PairMode",
    "SplitClass",
    "EstimateWithCI",
    "PairConfig",
    "CellGeometry",
    "uniform_disk",
    "build_geometry",
    "classify_split",
    "simulate_split_trial",
    "estimate_pair_split_probs",
    "estimate_ball_split_prob",
    "ball_split_bound",
    "projected_radius_threshold",
    "projected_radius_tail",
    "gaussian_projection_tail",
    "small_projection_bound",
    "large_projection_bound",
    "median_deviation_bound",
    "median_concentration",
]

_BATCH = 512


class PairMode(str, enum.Enum):
    GOOD_BAD = "good_bad"
    USEFUL_USELESS = "useful_useless"


class SplitClass(str, enum.Enum):
    GOOD = "good"
    BAD = "bad"
    USEFUL = "useful"
    USELESS = "useless"
    NEUTRAL = "neutral"


_CLASSES = {
    PairMode.GOOD_BAD: (SplitClass.GOOD, SplitClass.BAD, SplitClass.NEUTRAL),
    PairMode.USEFUL_USELESS: (SplitClass.USEFUL, SplitClass.USELESS, SplitClass.NEUTRAL),
}


@dataclass(frozen=True)
class EstimateWithCI:
    """Bernoulli frequency with a normal-approximation 95% half-width."""

    p: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one trial")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"frequency {self.p} outside [0, 1]")

    @classmethod
    def from_count(cls, hits, n):
        return cls(float(hits) / n, int(n))

    @property
    def half_width(self):
        return 1.96 * math.sqrt(self.p * (1.0 - self.p) / self.n)

    @property
    def lower(self):
        return self.p - self.half_width

    @property
    def upper(self):
        return self.p + self.half_width


@dataclass(frozen=True)
class PairConfig:
    """A cell of radius ``cell_radius`` and a pair of balls inside it.

    GOOD_BAD places two balls of radius ``Delta / (960 s sqrt(d))`` whose
    centers are ``Delta / s - Delta / (960 s sqrt(d))`` apart, symmetric
    about the cell center. USEFUL_USELESS places a probe ball ``B`` at the
    cell center and a satellite of radius ``Delta / (512 sqrt(d))`` at
    distance ``Delta / 2``.
    """

    cell_radius: float = 1.0
    intrinsic_dim: int = 2
    ambient_dim: int = 50
    s: float = 2.0
    mode: PairMode = PairMode.GOOD_BAD
    probe_radius: float | None = None  # B's radius in USEFUL_USELESS; default satellite radius
    cell_points: int = 2048
    samples_per_ball: int = 256

    def __post_init__(self):
        object.__setattr__(self, "mode", PairMode(self.mode))
        if self.cell_radius <= 0:
            raise ValueError("cell_radius must be positive")
        if not 1 <= self.intrinsic_dim <= self.ambient_dim:
            raise ValueError("need 1 <= intrinsic_dim <= ambient_dim")
        if self.s < 2:
            raise ValueError("s must be >= 2")
        if self.cell_points < 2 or self.samples_per_ball < 1:
            raise ValueError("cell_points >= 2 and samples_per_ball >= 1 required")
        a, b = self.ball_centers_1d
        ra, rb = self.ball_radii
        if not self.separation > 0:
            raise ValueError("ball separation must be positive")
        if max(abs(a) + ra, abs(b) + rb) > self.cell_radius:
            raise ValueError("balls must lie inside the cell")

    @property
    def ball_radius(self):
        return self.cell_radius / (960.0 * self.s * math.sqrt(self.intrinsic_dim))

    @property
    def satellite_radius(self):
        return self.cell_radius / (512.0 * math.sqrt(self.intrinsic_dim))

    @property
    def separation(self):
        if self.mode is PairMode.GOOD_BAD:
            return self.cell_radius / self.s - self.ball_radius
        return self.cell_radius / 2.0

    @property
    def ball_radii(self):
        if self.mode is PairMode.GOOD_BAD:
            return self.ball_radius, self.ball_radius
        probe = self.satellite_radius if self.probe_radius is None else self.probe_radius
        return probe, self.satellite_radius

    @property
    def ball_centers_1d(self):
        """Positions of the two centers along the first axis."""
        if self.mode is PairMode.GOOD_BAD:
            h = 0.5 * self.separation
            return -h, h
        return 0.0, self.separation

    def to_dict(self):
        return {
            "cell_radius": self.cell_radius,
            "intrinsic_dim": self.intrinsic_dim,
            "ambient_dim": self.ambient_dim,
            "s": self.s,
            "mode": self.mode.value,
            "probe_radius": self.probe_radius,
            "cell_points": self.cell_points,
            "samples_per_ball": self.samples_per_ball,
        }


def uniform_disk(n, d, D, radius, rng, center=None):
    """``n`` points uniform on a ``d``-disk of ``radius`` in the first ``d`` coordinates."""
    out = np.zeros((n, D))
    if n == 0:
        return out
    g = rng.normal(size=(n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    out[:, :d] = g * (radius * rng.uniform(size=(n, 1)) ** (1.0 / d))
    if center is not None:
        out += np.asarray(center, dtype=np.float64)
    return out


def _eccentricities(points):
    """Largest distance from every point to the rest of the set."""
    sq = np.sum(points * points, axis=1)
    out = np.empty(points.shape[0])
    for a in range(0, points.shape[0], 1024):
        g = sq[a:a + 1024, None] + sq[None, :] - 2.0 * (points[a:a + 1024] @ points.T)
        out[a:a + 1024] = np.sqrt(np.maximum(g.max(axis=1), 0.0))
    return out


@dataclass
class CellGeometry:
    """A materialized cell: its data, the sampled balls, and pivot eccentricities."""

    cell: np.ndarray
    balls: list
    ecc: np.ndarray

    @property
    def ambient_dim(self):
        return self.cell.shape[1]


def _make_geometry(cell, balls):
    return CellGeometry(cell, balls, _eccentricities(cell))


def build_geometry(config, rng):
    """Sample the cell data and both balls; ball samples are part of the cell."""
    d, D = config.intrinsic_dim, config.ambient_dim
    balls = []
    for c1, rad in zip(config.ball_centers_1d, config.ball_radii):
        center = np.zeros(D)
        center[0] = c1
        balls.append(uniform_disk(config.samples_per_ball, d, D, rad, rng, center))
    base = uniform_disk(config.cell_points, d, D, config.cell_radius, rng)
    return _make_geometry(np.vstack([base] + balls), balls)


def _lower_median_rows(P):
    k = (P.shape[1] - 1) // 2
    return np.partition(P, k, axis=1)[:, k]


def _random_thresholds(geom, V, rng):
    """Jittered median thresholds for the directions in the rows of ``V``."""
    k, D = V.shape
    med = _lower_median_rows(V @ geom.cell.T)
    pivots = rng.integers(geom.cell.shape[0], size=k)
    half = 6.0 * geom.ecc[pivots] / math.sqrt(D)
    return med + half * rng.uniform(-1.0, 1.0, size=k)


def _sides(ball, V, thr):
    """Per trial: (any sample left, any sample right)."""
    proj = V @ ball.T
    lo, hi = proj.min(axis=1), proj.max(axis=1)
    return lo < thr, hi >= thr


def _classify(geom, V, thr):
    """0 = separated, 1 = first ball cut (and second too in GOOD_BAD), 2 = neutral."""
    (l1, r1), (l2, r2) = (_sides(b, V, thr) for b in geom.balls)
    sep = (l1 & ~r1 & r2 & ~l2) | (r1 & ~l1 & l2 & ~r2)
    return sep, (l1 & r1), (l2 & r2)


def _pair_codes(mode, geom, V, thr):
    sep, cut1, cut2 = _classify(geom, V, thr)
    if mode is PairMode.GOOD_BAD:
        cut = cut1 & cut2
    else:
        cut = cut1
    return np.where(sep, 0, np.where(cut, 1, 2))


def classify_split(mode, balls, direction, threshold):
    """Class of the cut ``x . direction < threshold`` for two ball samples.

    GOOD/USEFUL: each ball entirely on its own side, on opposite sides.
    BAD: both balls cut (GOOD_BAD). USELESS: the first (probe) ball is cut.
    """
    mode = PairMode(mode)
    geom = CellGeometry(np.empty((0, len(direction))), [np.atleast_2d(b) for b in balls], np.empty(0))
    V = np.asarray(direction, dtype=np.float64)[None, :]
    code = int(_pair_codes(mode, geom, V, np.array([float(threshold)]))[0])
    return _CLASSES[mode][code]


def _directions(k, D, rng):
    return rng.normal(0.0, 1.0 / math.sqrt(D), size=(k, D))


def simulate_split_trial(config, rng, geometry=None):
    """Classify one random split of the cell with respect to the ball pair.

    Builds the cell from ``rng`` unless a prepared ``geometry`` is passed.
    """
    geom = build_geometry(config, rng) if geometry is None else geometry
    v = sample_direction(geom.ambient_dim, rng)[None, :]
    thr = _random_thresholds(geom, v, rng)
    code = int(_pair_codes(config.mode, geom, v, thr)[0])
    return _CLASSES[config.mode][code]


def estimate_pair_split_probs(config, trials, rng, geometry=None, batch=_BATCH):
    """Frequencies of each split class over ``trials`` random splits of one cell."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    geom = build_geometry(config, rng) if geometry is None else geometry
    counts = np.zeros(3, dtype=np.int64)
    done = 0
    while done < trials:
        k = min(batch, trials - done)
        V = _directions(k, geom.ambient_dim, rng)
        thr = _random_thresholds(geom, V, rng)
        counts += np.bincount(_pair_codes(config.mode, geom, V, thr), minlength=3)
        done += k
    return {cls: EstimateWithCI.from_count(c, trials) for cls, c in zip(_CLASSES[config.mode], counts)}


def ball_split_bound(ball_radius, cell_radius, d):
    """``3 delta sqrt(d) / Delta``."""
    return 3.0 * ball_radius * math.sqrt(d) / cell_radius


def estimate_ball_split_prob(ball_radius, config, trials, rng, batch=_BATCH):
    """Frequency with which a random split cuts a ball at the cell center.

    Only the cell fields of ``config`` are used. A zero radius ball is a
    single point and is never cut.
    """
    if ball_radius < 0 or ball_radius > config.cell_radius:
        raise ValueError("need 0 <= ball_radius <= cell_radius")
    d, D = config.intrinsic_dim, config.ambient_dim
    if ball_radius == 0:
        ball = np.zeros((1, D))
    else:
        ball = uniform_disk(config.samples_per_ball, d, D, ball_radius, rng)
    base = uniform_disk(config.cell_points, d, D, config.cell_radius, rng)
    geom = _make_geometry(np.vstack([base, ball]), [ball])
    hits = 0
    done = 0
    while done < trials:
        k = min(batch, trials - done)
        V = _directions(k, D, rng)
        thr = _random_thresholds(geom, V, rng)
        left, right = _sides(ball, V, thr)
        hits += int(np.count_nonzero(left & right))
        done += k
    return EstimateWithCI.from_count(hits, trials)


def projected_radius_threshold(ball_radius, d, D, eta):
    """``(4 delta / sqrt(D)) sqrt(2 (d + ln(2 / eta)))``."""
    return 4.0 * ball_radius / math.sqrt(D) * math.sqrt(2.0 * (d + math.log(2.0 / eta)))


def projected_radius_tail(ball_radius, d, D, eta, trials, rng, samples=256, batch=_BATCH):
    """Frequency that the projected radius of a ball sample reaches the tail threshold.

    The projected radius is half the length of the projected interval.
    """
    if not 0 < eta <= 1:
        raise ValueError("eta must be in (0, 1]")
    t = projected_radius_threshold(ball_radius, d, D, eta)
    if ball_radius == 0:
        return EstimateWithCI(0.0, trials)
    ball = uniform_disk(samples, d, D, ball_radius, rng)
    hits = 0
    done = 0
    while done < trials:
        k = min(batch, trials - done)
        proj = _directions(k, D, rng) @ ball.T
        rb = 0.5 * (proj.max(axis=1) - proj.min(axis=1))
        hits += int(np.count_nonzero(rb >= t))
        done += k
    return EstimateWithCI.from_count(hits, trials)


def small_projection_bound(alpha):
    """Bound on ``Pr(|U.x| <= alpha ||x|| / sqrt(D))``."""
    return math.sqrt(2.0 / math.pi) * alpha


def large_projection_bound(beta):
    """Bound on ``Pr(|U.x| >= beta ||x|| / sqrt(D))``."""
    return 2.0 / beta * math.exp(-beta * beta / 2.0)


def gaussian_projection_tail(alpha, beta, norm_x, D, trials, rng, batch=4096):
    """Frequencies of ``|U.x| <= alpha ||x||/sqrt(D)`` and ``|U.x| >= beta ||x||/sqrt(D)``.

    ``x`` has norm ``norm_x`` and a random direction; ``U ~ N(0, I/D)`` is
    drawn fresh per trial.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    if norm_x <= 0:
        raise ValueError("norm_x must be positive")
    x = rng.normal(size=D)
    x *= norm_x / np.linalg.norm(x)
    scale = norm_x / math.sqrt(D)
    small = large = 0
    done = 0
    while done < trials:
        k = min(batch, trials - done)
        a = np.abs(_directions(k, D, rng) @ x)
        small += int(np.count_nonzero(a <= alpha * scale))
        large += int(np.count_nonzero(a >= beta * scale))
        done += k
    return EstimateWithCI.from_count(small, trials), EstimateWithCI.from_count(large, trials)


def median_deviation_bound(radius, D, delta_conf):
    """``(Delta / sqrt(D)) sqrt(2 ln(2 / delta))``."""
    return radius / math.sqrt(D) * math.sqrt(2.0 * math.log(2.0 / delta_conf))


def median_concentration(points, center, radius, delta_conf, trials, rng, batch=_BATCH):
    """Frequency that the projected median strays past the deviation bound.

    Parameters
    ----------
    points : array_like, shape (n, D)
        Data, all within ``radius`` of ``center``.
    delta_conf : float
        Confidence parameter in ``(0, 2 / e^2)``.
    """
    if not 0 < delta_conf < 2.0 / math.e ** 2:
        raise ValueError("delta_conf must be in (0, 2/e^2)")
    pts = np.asarray(points, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if np.max(np.linalg.norm(pts - center, axis=1)) > radius * (1 + 1e-12):
        raise ValueError("points must lie within radius of center")
    D = pts.shape[1]
    bound = median_deviation_bound(radius, D, delta_conf)
    hits = 0
    done = 0
    while done < trials:
        k = min(batch, trials - done)
        V = _directions(k, D, rng)
        dev = np.abs(_lower_median_rows(V @ pts.T) - V @ center)
        hits += int(np.count_nonzero(dev > bound))
        done += k
    return EstimateWithCI.from_count(hits, trials)
