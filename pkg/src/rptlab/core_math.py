"""Numerical primitives shared by the tree, the estimators and the samplers.

Everything here works on plain ``numpy`` arrays: a point set is an
``(n, D)`` float64 array, a direction is a length-``D`` vector.
"""
import math

import numpy as np

__all__ = [
    "as_points",
    "sample_direction",
    "project",
    "diameter",
    "meb_radius",
    "covariance_and_mean",
    "top_eigenvalues",
    "jacobi_eigenvalues",
    "projection_energy",
]


def as_points(points, name="points"):
    """Return ``points`` as a 2-D float64 array, rejecting empty or non-finite input."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def sample_direction(D, rng):
    """Draw ``v ~ N(0, I_D / D)``, so that ``E||v||^2 = 1``."""
    if D < 1:
        raise ValueError(f"ambient dimension must be >= 1, got {D}")
    return rng.normal(0.0, 1.0 / math.sqrt(D), size=D)


def project(points, v):
    """Dot every row of ``points`` with ``v``.

    ``einsum`` is used instead of ``@`` so that a single row and the same row
    inside a large matrix give bit-identical results; cell membership tests
    rely on this.
    """
    pts = np.asarray(points, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != v.shape[0]:
        raise ValueError(
            f"dimension mismatch: points have {pts.shape[1]} columns, direction has {v.shape[0]}"
        )
    return np.einsum("ij,j->i", pts, v)


def _pair_sq_dist(pts, i, j):
    diff = pts[i] - pts[j]
    return np.sum(diff * diff, axis=-1)


def diameter(points, block=1024):
    """Largest pairwise Euclidean distance.

    Candidate pairs are screened blockwise with the Gram identity, then
    every pair within rounding slack of the screened maximum is recomputed
    from coordinate differences, so the result is the exact double-loop
    value.
    """
    pts = as_points(points)
    n = pts.shape[0]
    if n == 1:
        return 0.0
    Z = pts - pts.mean(axis=0)
    sq = np.sum(Z * Z, axis=1)
    slack = 1e-10 * 4.0 * float(sq.max()) + 1e-300
    approx_best = -np.inf
    candidates = []
    for a in range(0, n, block):
        za, sa = Z[a:a + block], sq[a:a + block]
        for b in range(a, n, block):
            g = sa[:, None] + sq[None, b:b + block] - 2.0 * (za @ Z[b:b + block].T)
            m = float(g.max())
            if m < approx_best - slack:
                continue
            approx_best = max(approx_best, m)
            ii, jj = np.nonzero(g >= m - slack)
            candidates.append((ii + a, jj + b, m))
    rows = [(i, j) for i, j, m in candidates if m >= approx_best - slack]
    i = np.concatenate([r[0] for r in rows])
    j = np.concatenate([r[1] for r in rows])
    return math.sqrt(float(_pair_sq_dist(pts, i, j).max()))


def _solve_small_meb(Q, lam):
    """Exact smallest enclosing ball of the rows of ``Q`` (a small core set).

    Primal active-set method on the dual problem
    ``min ||Q^T l||^2 - sum_i l_i ||q_i||^2`` over the unit simplex.
    ``lam`` is a feasible warm start. Returns the optimal weights.
    """
    m = Q.shape[0]
    G = Q @ Q.T
    b = np.diag(G).copy()
    lam = lam.copy()
    free = lam > 0
    for _ in range(50 * m + 50):
        F = np.flatnonzero(free)
        k = F.size
        # free points affinely dependent: the objective is linear along the
        # null space of [Q_F^T; 1^T], so move along it until a weight hits zero
        A = np.vstack([Q[F].T, np.ones(k)])
        _, sv, vt = np.linalg.svd(A)
        tol = max(A.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
        rank = int(np.sum(sv > tol))
        if rank < k:
            N = vt[rank:].T
            step = N @ (N.T @ b[F])
            if np.linalg.norm(step) > 1e-12 * max(np.linalg.norm(b[F]), 1e-300):
                neg = step < 0
                ratios = -lam[F][neg] / step[neg]
                pick = int(np.argmin(ratios))
                block = F[neg][pick]
                lam[F] += ratios[pick] * step
                lam[block] = 0.0
                free[block] = False
                lam[lam < 0] = 0.0
                lam /= lam.sum()
                continue
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = 2.0 * G[np.ix_(F, F)]
        K[:k, k] = 1.0
        K[k, :k] = 1.0
        rhs = np.append(b[F], 1.0)
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        step = sol[:k] - lam[F]
        alpha = 1.0
        block = -1
        for idx, s in zip(F, step):
            if s < 0 and lam[idx] + s < 0:
                a = -lam[idx] / s
                if a < alpha:
                    alpha, block = a, idx
        lam[F] += alpha * step
        if block >= 0:
            # a weight hit zero before reaching the affine circumcenter
            lam[block] = 0.0
            free[block] = False
            lam[lam < 0] = 0.0
            lam /= lam.sum()
            continue
        lam[lam < 0] = 0.0
        lam /= lam.sum()
        c = lam @ Q
        r2 = float(np.dot(lam, b) - c @ c)
        d2 = np.sum((Q - c) ** 2, axis=1)
        outside = np.where(free, -np.inf, d2 - r2)
        j = int(np.argmax(outside))
        if outside[j] <= 1e-12 * max(r2, 1e-300):
            return lam
        free[j] = True
    return lam


def meb_radius(points, tolerance=1e-6, max_iter=None):
    """Approximate minimum enclosing ball of a point set.

    Grows a core set: solve the ball of the core exactly, add the farthest
    outside point, repeat until every point lies within ``(1 + tolerance)``
    of the core's radius. Since the core ball radius is a lower bound on the
    optimum, the returned radius is within ``(1 + tolerance)`` of optimal.
    The core-set size, and therefore the number of outer rounds, is
    ``O(1 / tolerance)`` in the worst case and tiny in practice.

    Parameters
    ----------
    points : array_like, shape (n, D)
    tolerance : float
        Relative accuracy, must be positive.
    max_iter : int, optional
        Cap on core-set growth rounds; defaults to ``ceil(2 / tolerance)``.

    Returns
    -------
    center : ndarray, shape (D,)
    radius : float
        Maximum distance from ``center`` to the points, so every point is
        inside the returned ball.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    pts = as_points(points)
    n = pts.shape[0]
    origin = pts[0].copy()
    X = pts - origin
    if n == 1:
        return origin, 0.0
    if n == 2:
        c = 0.5 * X[1]
        return c + origin, math.sqrt(float(np.sum((X[1] - c) ** 2)))
    if max_iter is None:
        max_iter = int(math.ceil(2.0 / tolerance))

    d2 = np.sum(X * X, axis=1)
    a = int(np.argmax(d2))
    if d2[a] == 0.0:
        return origin, 0.0
    d2a = np.sum((X - X[a]) ** 2, axis=1)
    bidx = int(np.argmax(d2a))
    core = [a] if bidx == a else [a, bidx]
    lam = np.full(len(core), 1.0 / len(core))

    for _ in range(max_iter):
        lam = _solve_small_meb(X[core], lam)
        c = lam @ X[core]
        core_r = math.sqrt(max(float(np.max(np.sum((X[core] - c) ** 2, axis=1))), 0.0))
        dist2 = np.sum((X - c) ** 2, axis=1)
        j = int(np.argmax(dist2))
        far = math.sqrt(dist2[j])
        if far <= (1.0 + tolerance) * core_r or j in core:
            return c + origin, far
        core.append(j)
        lam = np.append(lam, 0.0)
    return c + origin, far


def covariance_and_mean(points):
    """Population mean and covariance ``(1/n) sum (x - mu)(x - mu)^T``."""
    pts = as_points(points)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("covariance needs at least 2 points")
    mu = pts.mean(axis=0)
    Z = pts - mu
    cov = (Z.T @ Z) / n
    cov = 0.5 * (cov + cov.T)
    return mu, cov


def jacobi_eigenvalues(matrix, rel_tol=1e-12, max_sweeps=100):
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps over every off-diagonal pair until the off-diagonal Frobenius
    mass drops below ``rel_tol * |trace|`` (or the Frobenius norm when the
    trace vanishes). Returned unsorted, in diagonal order.
    """
    A = np.array(matrix, dtype=np.float64, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    # work at unit magnitude so squared entries neither underflow nor overflow
    mag = float(np.abs(A).max()) if A.size else 0.0
    if mag == 0.0:
        return np.zeros(n)
    A /= mag
    scale = abs(np.trace(A))
    if scale == 0.0:
        scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n)
    thresh = rel_tol * scale

    def off_mass():
        return math.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))

    for _ in range(max_sweeps):
        if off_mass() < thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(apq) < abs(diff) * 1e-36:
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = A[q, p] = 0.0
    return np.diag(A) * mag


def top_eigenvalues(cov, k):
    """The ``k`` largest eigenvalues of a symmetric matrix, descending."""
    cov = np.asarray(cov, dtype=np.float64)
    D = cov.shape[0]
    if not 1 <= k <= D:
        raise ValueError(f"k must be in [1, {D}], got {k}")
    vals = np.sort(jacobi_eigenvalues(cov))[::-1]
    return vals[:k]


def projection_energy(points, basis, origin):
    """``sum_i sum_b <x_i - origin, b>^2`` for an orthonormal ``basis``.

    ``basis`` holds one direction per row.
    """
    pts = as_points(points)
    B = np.atleast_2d(np.asarray(basis, dtype=np.float64))
    if B.shape[1] != pts.shape[1]:
        raise ValueError("basis and points have different dimensions")
    gram = B @ B.T
    if np.max(np.abs(gram - np.eye(B.shape[0]))) > 1e-8:
        raise ValueError("basis is not orthonormal")
    coeffs = (pts - np.asarray(origin, dtype=np.float64)) @ B.T
    return float(np.sum(coeffs * coeffs))
