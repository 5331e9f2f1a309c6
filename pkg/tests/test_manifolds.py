import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rptlab.core_math import covariance_and_mean, top_eigenvalues
from rptlab.manifolds import (
    PatchSamplingError,
    SingularityError,
    closest_point,
    flat,
    random_frame,
    sample_global,
    sample_patch,
    sphere,
    tangent_basis,
    torus,
)


def torus_distances(spec, X):
    """Distance of embedded points to the torus core circle, computed in the model frame."""
    u = spec.to_model(X)
    rho = np.hypot(u[:, 0], u[:, 1])
    return np.hypot(rho - spec.center_radius, u[:, 2])


def off_frame(spec, X):
    return np.linalg.norm((X - spec.offset) - spec.to_model(X) @ spec.frame.T, axis=1)


# construction

def test_frame_orthonormal():
    rng = np.random.default_rng(0)
    for D, k in ((3, 3), (10, 3), (50, 5)):
        F = random_frame(D, k, rng)
        assert np.abs(F.T @ F - np.eye(k)).max() <= 1e-10
    with pytest.raises(ValueError):
        random_frame(2, 3, rng)


def test_bad_parameters():
    with pytest.raises(ValueError):
        sphere(2, 0.0, 5)
    with pytest.raises(ValueError):
        torus(1.0, 1.5, 5)


def test_to_dict():
    assert torus(1.0, 3.0, 5).to_dict() == {"kind": "torus", "d": 2, "D": 5, "noise_sigma": 0.0,
                                            "r0": 1.0, "R0": 3.0}


# sample_global

def test_sphere_points_at_radius():
    rng = np.random.default_rng(1)
    spec = sphere(2, 1.0, 10, rng, offset=rng.normal(size=10))
    X = sample_global(spec, 2000, rng)
    assert np.abs(np.linalg.norm(X - spec.offset, axis=1) - 1.0).max() <= 1e-10


def test_flat_has_two_nonzero_eigenvalues():
    rng = np.random.default_rng(2)
    spec = flat(2, 15, rng=rng)
    X = sample_global(spec, 3000, rng)
    _, cov = covariance_and_mean(X)
    vals = top_eigenvalues(cov, 15)
    assert np.all(vals[:2] > 1e-3)
    assert np.all(np.abs(vals[2:]) <= 1e-10 * np.trace(cov))


def test_torus_tube_distance():
    rng = np.random.default_rng(3)
    spec = torus(1.0, 3.0, 8, rng)
    X = sample_global(spec, 3000, rng)
    assert np.abs(torus_distances(spec, X) - 1.0).max() <= 1e-10
    assert off_frame(spec, X).max() <= 1e-10


def test_torus_area_weighting():
    # the outer half (rho > R0) carries area share 1/2 + r0/(pi R0)
    rng = np.random.default_rng(4)
    spec = torus(1.0, 3.0, 3)
    u = spec.to_model(sample_global(spec, 100000, rng))
    outer = np.mean(np.hypot(u[:, 0], u[:, 1]) > 3.0)
    assert outer == pytest.approx(0.5 + 1 / (3 * math.pi), abs=0.006)


def test_noise_moves_points_off():
    rng = np.random.default_rng(5)
    spec = sphere(2, 1.0, 10, rng, noise_sigma=0.01)
    X = sample_global(spec, 500, rng)
    assert np.abs(np.linalg.norm(X, axis=1) - 1.0).max() > 1e-4


def test_embedding_is_isometric():
    rng = np.random.default_rng(6)
    spec = torus(1.0, 3.0, 20, rng, offset=rng.normal(size=20))
    y = rng.normal(size=(50, 3))
    X = spec.embed(y)
    dy = np.linalg.norm(y[:, None] - y[None], axis=2)
    dx = np.linalg.norm(X[:, None] - X[None], axis=2)
    assert np.abs(dx - dy).max() <= 1e-9


# sample_patch

@pytest.mark.parametrize("make", [
    lambda rng: sphere(2, 1.0, 10, rng),
    lambda rng: sphere(3, 2.0, 12, rng),
    lambda rng: torus(1.0, 3.0, 10, rng),
    lambda rng: flat(2, 10, rng=rng),
])
def test_patch_within_radius_and_mean_in_ball(make):
    rng = np.random.default_rng(7)
    spec = make(rng)
    base = sample_global(spec, 1, rng)[0]
    for r in (0.05, 0.3):
        X = sample_patch(spec, base, r, 300, rng)
        assert X.shape == (300, spec.ambient_dim)
        assert np.linalg.norm(X - base, axis=1).max() <= r
        assert np.linalg.norm(X.mean(axis=0) - base) <= r
        q = closest_point(spec, X.mean(axis=0))
        mu = X.mean(axis=0)
        sse = np.sum((X - mu) ** 2)
        for v in (base, q):
            assert np.sum((X - v) ** 2) >= sse


def test_sphere_patch_whole_sphere():
    rng = np.random.default_rng(8)
    spec = sphere(2, 1.0, 6, rng)
    base = sample_global(spec, 1, rng)[0]
    X = sample_patch(spec, base, 2.5, 2000, rng)
    assert np.abs(np.linalg.norm(X, axis=1) - 1).max() <= 1e-10
    # the antipodal cap is reached
    assert np.linalg.norm(X - base, axis=1).max() > 1.9


def test_patch_gives_up():
    rng = np.random.default_rng(9)
    spec = flat(2, 5, rng=rng)
    far = spec.embed(np.array([100.0, 100.0]))
    with pytest.raises(PatchSamplingError) as info:
        sample_patch(spec, far + spec.frame @ np.zeros(2), 1e-3, 10, rng)
    assert info.value.proposed >= 4096


def test_patch_rejects_bad_radius():
    with pytest.raises(ValueError):
        sample_patch(flat(2, 3), np.zeros(3), 0.0, 5, np.random.default_rng(0))


def test_tangent_projection_keeps_pair_distances():
    rng = np.random.default_rng(10)
    for eps in (0.05, 0.1, 0.25):
        spec = sphere(2, 1.0, 10, rng)
        base = sample_global(spec, 1, rng)[0]
        X = sample_patch(spec, base, math.sqrt(eps), 200, rng)
        T = tangent_basis(spec, base)
        P = X @ T.T
        i, j = np.triu_indices(len(X), 1)
        lhs = np.sum((P[i] - P[j]) ** 2, axis=1)
        rhs = (1 - eps) * np.sum((X[i] - X[j]) ** 2, axis=1)
        assert np.all(lhs >= rhs)


# closest_point

def test_closest_point_examples():
    spec = sphere(2, 1.0, 5, offset=np.ones(5))
    y = np.ones(5) + 3 * np.eye(5)[0]
    assert np.allclose(closest_point(spec, y), np.ones(5) + np.eye(5)[0])
    on = spec.embed(np.array([0.0, 0.6, 0.8]))
    assert np.allclose(closest_point(spec, on), on, atol=1e-14)


def test_closest_point_singularities():
    with pytest.raises(SingularityError):
        closest_point(sphere(2, 1.0, 4), np.zeros(4))
    with pytest.raises(SingularityError):
        closest_point(torus(1.0, 3.0, 4), np.array([0.0, 0.0, 0.5, 0.0]))


@pytest.mark.parametrize("make", [
    lambda rng: sphere(2, 1.0, 8, rng),
    lambda rng: torus(1.0, 3.0, 8, rng),
    lambda rng: flat(3, 8, rng=rng),
])
def test_closest_point_beats_samples(make):
    rng = np.random.default_rng(11)
    spec = make(rng)
    M = sample_global(spec, 10000, rng)
    for _ in range(5):
        y = spec.offset + rng.normal(size=spec.ambient_dim) * 2
        q = closest_point(spec, y)
        best = np.linalg.norm(M - y, axis=1).min()
        assert np.linalg.norm(y - q) <= best + 1e-12


# tangent_basis

def test_tangent_basis_flat_is_frame():
    rng = np.random.default_rng(12)
    spec = flat(2, 7, rng=rng)
    T = tangent_basis(spec, spec.embed(np.array([0.3, 0.4])))
    assert np.allclose(T, spec.frame.T)


def test_tangent_basis_sphere_perpendicular():
    rng = np.random.default_rng(13)
    spec = sphere(3, 2.0, 9, rng, offset=rng.normal(size=9))
    for q in sample_global(spec, 20, rng):
        T = tangent_basis(spec, q)
        assert T.shape == (3, 9)
        assert np.abs(T @ T.T - np.eye(3)).max() <= 1e-10
        assert np.abs(T @ (q - spec.offset)).max() <= 1e-10


def test_tangent_basis_off_manifold():
    spec = sphere(2, 1.0, 4)
    with pytest.raises(ValueError):
        tangent_basis(spec, np.array([2.0, 0, 0, 0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["sphere", "torus", "flat"]))
def test_mean_minus_q_perpendicular_to_tangent(seed, kind):
    rng = np.random.default_rng(seed)
    spec = {"sphere": lambda: sphere(2, 1.0, 10, rng),
            "torus": lambda: torus(1.0, 3.0, 10, rng),
            "flat": lambda: flat(2, 10, rng=rng)}[kind]()
    base = sample_global(spec, 1, rng)[0]
    X = sample_patch(spec, base, 0.2, 100, rng)
    mu = X.mean(axis=0)
    q = closest_point(spec, mu)
    T = tangent_basis(spec, q)
    assert np.abs(T @ (mu - q)).max() <= 1e-8
