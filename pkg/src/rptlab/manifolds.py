"""Synthetic manifolds with known dimension and condition number.

Each manifold lives in a low-dimensional model space ``R^k`` (sphere:
``k = d + 1``, flat: ``k = d``, torus: ``k = 3``) and is carried into
``R^D`` by an orthonormal frame plus an offset, ``x = offset + frame @ y``.
Closest points and tangent spaces are computed analytically in model
coordinates.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ManifoldKind",
    "ManifoldSpec",
    "SingularityError",
    "PatchSamplingError",
    "sphere",
    "flat",
    "torus",
    "random_frame",
    "sample_global",
    "sample_patch",
    "closest_point",
    "tangent_basis",
]


class ManifoldKind(str, enum.Enum):
    SPHERE = "sphere"
    FLAT = "flat"
    TORUS = "torus"


class SingularityError(ValueError):
    """The query point has no unique closest point on the manifold."""


class PatchSamplingError(RuntimeError):
    """Rejection sampling of a patch accepted too few proposals."""

    def __init__(self, message, accepted, proposed):
        super().__init__(f"{message} (accepted {accepted} of {proposed} proposals)")
        self.accepted = accepted
        self.proposed = proposed


@dataclass(frozen=True)
class ManifoldSpec:
    """An embedded manifold.

    ``frame`` is ``(D, k)`` with orthonormal columns. ``tau`` is the
    condition number (``inf`` for a flat). For a torus ``tube_radius`` and
    ``center_radius`` are the small and large radii.
    """
    kind: ManifoldKind
    intrinsic_dim: int
    ambient_dim: int
    frame: np.ndarray
    offset: np.ndarray
    tau: float = math.inf
    extent: float = 1.0
    tube_radius: float = 0.0
    center_radius: float = 0.0
    noise_sigma: float = 0.0

    @property
    def model_dim(self):
        return self.frame.shape[1]

    def embed(self, y):
        return self.offset + np.asarray(y) @ self.frame.T

    def to_model(self, x):
        return (np.asarray(x, dtype=np.float64) - self.offset) @ self.frame

    def to_dict(self):
        out = {"kind": self.kind.value, "d": self.intrinsic_dim, "D": self.ambient_dim,
               "noise_sigma": self.noise_sigma}
        if self.kind is ManifoldKind.SPHERE:
            out["tau"] = self.tau
        elif self.kind is ManifoldKind.FLAT:
            out["extent"] = self.extent
        else:
            out.update(r0=self.tube_radius, R0=self.center_radius)
        return out


def random_frame(D, k, rng):
    """``(D, k)`` matrix with orthonormal columns, Haar-distributed."""
    if k > D:
        raise ValueError(f"cannot embed a {k}-dimensional model in R^{D}")
    q, r = np.linalg.qr(rng.normal(size=(D, k)))
    return q * np.sign(np.diag(r))


def _frame_and_offset(D, k, rng, offset):
    frame = random_frame(D, k, rng) if rng is not None else np.eye(D, k)
    off = np.zeros(D) if offset is None else np.asarray(offset, dtype=np.float64)
    return frame, off


def sphere(d, tau, D, rng=None, offset=None, noise_sigma=0.0):
    """``d``-sphere of radius ``tau`` in a random ``(d+1)``-subspace of ``R^D``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    frame, off = _frame_and_offset(D, d + 1, rng, offset)
    return ManifoldSpec(ManifoldKind.SPHERE, d, D, frame, off, tau=float(tau), noise_sigma=noise_sigma)


def flat(d, D, extent=1.0, rng=None, offset=None, noise_sigma=0.0):
    """The cube ``[0, extent]^d`` in a random ``d``-subspace of ``R^D``."""
    frame, off = _frame_and_offset(D, d, rng, offset)
    return ManifoldSpec(ManifoldKind.FLAT, d, D, frame, off, extent=float(extent), noise_sigma=noise_sigma)


def torus(r0, R0, D, rng=None, offset=None, noise_sigma=0.0):
    """Torus of tube radius ``r0`` around a circle of radius ``R0``.

    Only ``R0 >= 2 r0`` is supported; the condition number is then ``r0``.
    """
    if not (r0 > 0 and R0 >= 2 * r0):
        raise ValueError("torus requires r0 > 0 and R0 >= 2 r0")
    frame, off = _frame_and_offset(D, 3, rng, offset)
    return ManifoldSpec(ManifoldKind.TORUS, 2, D, frame, off, tau=float(r0),
                        tube_radius=float(r0), center_radius=float(R0), noise_sigma=noise_sigma)


def _torus_point(spec, theta, phi):
    r0, R0 = spec.tube_radius, spec.center_radius
    rho = R0 + r0 * np.cos(phi)
    return np.stack([rho * np.cos(theta), rho * np.sin(theta), r0 * np.sin(phi)], axis=-1)


def _model_sample(spec, n, rng):
    if spec.kind is ManifoldKind.SPHERE:
        g = rng.normal(size=(n, spec.model_dim))
        return spec.tau * g / np.linalg.norm(g, axis=1, keepdims=True)
    if spec.kind is ManifoldKind.FLAT:
        return rng.uniform(0.0, spec.extent, size=(n, spec.intrinsic_dim))
    # area element of the torus is proportional to R0 + r0 cos(phi)
    out = []
    r0, R0 = spec.tube_radius, spec.center_radius
    while sum(len(o) for o in out) < n:
        m = 2 * (n - sum(len(o) for o in out)) + 16
        theta = rng.uniform(0.0, 2 * math.pi, m)
        phi = rng.uniform(0.0, 2 * math.pi, m)
        keep = rng.uniform(0.0, R0 + r0, m) < R0 + r0 * np.cos(phi)
        out.append(_torus_point(spec, theta[keep], phi[keep]))
    return np.concatenate(out)[:n]


def sample_global(spec, n, rng):
    """``n`` points uniform on the manifold, embedded, plus optional noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = spec.embed(_model_sample(spec, n, rng))
    if spec.noise_sigma > 0:
        x = x + rng.normal(0.0, spec.noise_sigma, size=x.shape)
    return x


def _sphere_patch_proposals(spec, base_y, r, m, rng):
    """Sample the tangent disk at ``base_y`` and retract radially onto the sphere."""
    tau = spec.tau
    k = spec.model_dim
    normal = base_y / np.linalg.norm(base_y)
    # geodesic angle of the cap reachable within chord r, and its tangent extent
    ang = 2.0 * math.asin(min(1.0, r / (2.0 * tau)))
    rho = tau * math.tan(ang)
    g = rng.normal(size=(m, k))
    g -= np.outer(g @ normal, normal)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    u = rng.uniform(size=(m, 1)) ** (1.0 / spec.intrinsic_dim)
    p = base_y + rho * u * g
    return tau * p / np.linalg.norm(p, axis=1, keepdims=True)


def _torus_patch_proposals(spec, base_y, r, m, rng):
    r0, R0 = spec.tube_radius, spec.center_radius
    theta0 = math.atan2(base_y[1], base_y[0])
    rho0 = math.hypot(base_y[0], base_y[1])
    phi0 = math.atan2(base_y[2], rho0 - R0)
    # chord >= (2/pi) * angle * radius bounds the angular box of the patch
    dth = min(math.pi, math.pi * r / (2.0 * (R0 - r0)))
    dph = min(math.pi, math.pi * r / (2.0 * r0))
    theta = theta0 + rng.uniform(-dth, dth, m)
    phi = phi0 + rng.uniform(-dph, dph, m)
    keep = rng.uniform(0.0, R0 + r0, m) < R0 + r0 * np.cos(phi)
    return _torus_point(spec, theta[keep], phi[keep])


def _flat_patch_proposals(spec, base_y, r, m, rng):
    g = rng.normal(size=(m, spec.intrinsic_dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    u = rng.uniform(size=(m, 1)) ** (1.0 / spec.intrinsic_dim)
    p = base_y + r * u * g
    inside = np.all((p >= 0.0) & (p <= spec.extent), axis=1)
    return p[inside]


def sample_patch(spec, base_point, r, n, rng, min_acceptance=1e-4, max_proposals=10**7):
    """``n`` manifold points within ambient distance ``r`` of ``base_point``.

    Proposals come from a local parameterization around the base point
    (tangent disk retracted onto the sphere, an angular box on the torus,
    a disk on the flat) and are rejected by ambient distance. Small caps on
    the sphere are sampled this way; caps too wide for the tangent chart
    fall back to global sampling.

    Raises
    ------
    PatchSamplingError
        If the acceptance rate drops below ``min_acceptance``.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    base_point = np.asarray(base_point, dtype=np.float64)
    base_y = spec.to_model(base_point)
    accepted, proposed, chunks = 0, 0, []
    while accepted < n:
        m = max(256, 2 * (n - accepted))
        if spec.kind is ManifoldKind.SPHERE:
            if 2.0 * math.asin(min(1.0, r / (2.0 * spec.tau))) < 1.2:
                y = _sphere_patch_proposals(spec, base_y, r, m, rng)
            else:
                y = _model_sample(spec, m, rng)
        elif spec.kind is ManifoldKind.TORUS:
            y = _torus_patch_proposals(spec, base_y, r, m, rng)
        else:
            y = _flat_patch_proposals(spec, base_y, r, m, rng)
        proposed += m
        x = spec.embed(y)
        ok = np.linalg.norm(x - base_point, axis=1) <= r
        chunks.append(x[ok])
        accepted += int(ok.sum())
        if proposed >= 4096 and accepted < min_acceptance * proposed:
            raise PatchSamplingError("patch acceptance rate too low", accepted, proposed)
        if proposed > max_proposals:
            raise PatchSamplingError("proposal budget exhausted", accepted, proposed)
    return np.concatenate(chunks)[:n]


def _model_closest(spec, u):
    if spec.kind is ManifoldKind.SPHERE:
        nrm = np.linalg.norm(u)
        if nrm <= 1e-12 * spec.tau:
            raise SingularityError("point is at the sphere center")
        return spec.tau * u / nrm
    if spec.kind is ManifoldKind.FLAT:
        # projection onto the affine hull of the cube
        return u.copy()
    r0, R0 = spec.tube_radius, spec.center_radius
    rho = math.hypot(u[0], u[1])
    if rho <= 1e-12 * R0:
        raise SingularityError("point is on the torus axis")
    core = np.array([R0 * u[0] / rho, R0 * u[1] / rho, 0.0])
    w = u - core
    wn = np.linalg.norm(w)
    if wn <= 1e-12 * r0:
        raise SingularityError("point is on the torus core circle")
    return core + r0 * w / wn


def closest_point(spec, y):
    """Closest manifold point to ``y`` (analytic projection)."""
    y = np.asarray(y, dtype=np.float64)
    return spec.embed(_model_closest(spec, spec.to_model(y)))


def tangent_basis(spec, q, tol=1e-8):
    """Orthonormal tangent basis at ``q``, one vector per row, shape ``(d, D)``."""
    q = np.asarray(q, dtype=np.float64)
    u = spec.to_model(q)
    scale = max(1.0, spec.tau if math.isfinite(spec.tau) else spec.extent)
    resid = np.linalg.norm(q - spec.embed(u))
    on = _model_closest(spec, u)
    if resid > tol * scale or np.linalg.norm(on - u) > tol * scale:
        raise ValueError("q is not on the manifold")
    if spec.kind is ManifoldKind.FLAT:
        T = np.eye(spec.intrinsic_dim)
    elif spec.kind is ManifoldKind.SPHERE:
        normal = u / np.linalg.norm(u)
        # complete the normal to an orthonormal basis; drop the first column
        _, _, vt = np.linalg.svd(normal[None, :])
        T = vt[1:]
    else:
        theta = math.atan2(u[1], u[0])
        rho = math.hypot(u[0], u[1])
        phi = math.atan2(u[2], rho - spec.center_radius)
        T = np.array([
            [-math.sin(theta), math.cos(theta), 0.0],
            [-math.sin(phi) * math.cos(theta), -math.sin(phi) * math.sin(theta), math.cos(phi)],
        ])
    return T @ spec.frame.T
