"""Random projection trees: RPTree-Max and RPTree-Mean.

A Max split picks a Gaussian direction ``v``, projects the cell's data on
it and cuts at the (lower) median of the projections shifted by a jitter
drawn uniformly from ``[-1, 1] * 6 * radius_estimate / sqrt(D)``. Points
strictly below the threshold go left.

The Mean rule either cuts at the unjittered median of a random projection
(when the cell is "round", i.e. its squared diameter is at most
``mean_rule_constant`` times its average squared interpoint distance) or at
the median distance to the cell mean. Points at or below the threshold go
left.

Cell radii are always radii of the cell's *data* (minimum enclosing ball
of the points it holds), never of the unbounded polytope.
"""
import enum
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .core_math import as_points, diameter, meb_radius, project, sample_direction

__all__ = [
    "SplitRule",
    "SplitRecord",
    "TreeNode",
    "Tree",
    "BuildParams",
    "Ball",
    "DegenerateSplitError",
    "estimate_cell_radius",
    "median_split",
    "split_cell",
    "build_tree",
    "cell_contains_ball",
    "smallest_containing_cell",
    "packing_count",
    "levels_to_reduce",
    "collect_level_radii",
    "tree_to_json",
    "tree_from_json",
]


class SplitRule(str, enum.Enum):
    MAX = "MAX"
    MEAN = "MEAN"


class DegenerateSplitError(RuntimeError):
    """Every attempted split left one child empty."""


@dataclass(frozen=True)
class BuildParams:
    rule: SplitRule = SplitRule.MAX
    max_leaf_size: int = 10
    max_depth: int = 64
    degenerate_retries: int = 1000
    mean_rule_constant: float = 2.0
    meb_tolerance: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "rule", SplitRule(self.rule))
        if self.max_leaf_size < 1:
            raise ValueError("max_leaf_size must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.degenerate_retries < 0:
            raise ValueError("degenerate_retries must be >= 0")

    def to_dict(self):
        d = asdict(self)
        d["rule"] = self.rule.value
        return d


@dataclass(frozen=True)
class Ball:
    """Closed ball ``B(center, radius)``.

    With ``basis`` (orthonormal rows) the ball is restricted to the affine
    plane ``center + span(basis)``, i.e. the part of ``B`` lying on flat
    data through its center.
    """
    center: np.ndarray
    radius: float
    basis: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if not self.radius >= 0:
            raise ValueError("ball radius must be non-negative")
        if self.basis is not None:
            B = np.atleast_2d(np.asarray(self.basis, dtype=np.float64))
            if B.shape[1] != self.center.shape[0]:
                raise ValueError("basis and center have different dimensions")
            if np.max(np.abs(B @ B.T - np.eye(B.shape[0]))) > 1e-8:
                raise ValueError("basis is not orthonormal")
            object.__setattr__(self, "basis", B)

    def projected_radius(self, v):
        """Half-length of the ball's projection onto ``v``."""
        v = np.asarray(v, dtype=np.float64)
        if self.basis is None:
            return self.radius * float(np.linalg.norm(v))
        return self.radius * float(np.linalg.norm(self.basis @ v))

    def distance_range(self, point):
        """``(min, max)`` distance from ``point`` to the ball."""
        w = self.center - np.asarray(point, dtype=np.float64)
        if self.basis is None:
            dist = float(np.linalg.norm(w))
            return max(dist - self.radius, 0.0), dist + self.radius
        par = self.basis @ w
        perp2 = max(float(w @ w - par @ par), 0.0)
        npar = float(np.linalg.norm(par))
        lo = math.sqrt(perp2 + max(npar - self.radius, 0.0) ** 2)
        return lo, math.sqrt(perp2 + (npar + self.radius) ** 2)


@dataclass
class SplitRecord:
    """One cut. ``rule_branch`` is ``"projection"`` or ``"distance"``.

    For the distance branch ``center`` holds the cell mean and the split
    value of a point is its distance to it; ``direction`` is unused.
    """
    direction: np.ndarray | None
    median: float
    jitter: float
    threshold: float
    radius_estimate: float
    pivot_index: int
    rule_branch: str = "projection"
    left_inclusive: bool = False
    center: np.ndarray | None = None

    def values(self, points):
        pts = np.atleast_2d(points)
        if self.rule_branch == "distance":
            return _distances(pts, self.center)
        return project(pts, self.direction)

    def goes_left(self, points):
        vals = self.values(points)
        if self.left_inclusive:
            return vals <= self.threshold
        return vals < self.threshold

    def ball_side(self, ball):
        """``"left"``/``"right"`` if the ball lies entirely on one side, else ``None``."""
        if self.rule_branch == "distance":
            lo, hi = ball.distance_range(self.center)
        else:
            c = float(project(ball.center[None, :], self.direction)[0])
            spread = ball.projected_radius(self.direction)
            lo, hi = c - spread, c + spread
        if self.left_inclusive:
            if hi <= self.threshold:
                return "left"
            if lo > self.threshold:
                return "right"
        else:
            if hi < self.threshold:
                return "left"
            if lo >= self.threshold:
                return "right"
        return None


@dataclass
class TreeNode:
    id: int
    point_indices: np.ndarray
    depth: int
    parent: int | None = None
    split: SplitRecord | None = None
    left: int | None = None
    right: int | None = None
    degenerate: bool = False
    truncated: bool = False  # left unsplit by a focused build
    _radius: float | None = field(default=None, repr=False)
    _bounds: tuple | None = field(default=None, repr=False)

    @property
    def is_leaf(self):
        return self.split is None

    @property
    def size(self):
        return int(self.point_indices.size)


class Tree:
    """A built tree: flat node list (``nodes[0]`` is the root) over ``data``."""

    def __init__(self, data, params, seed, nodes):
        self.data = data
        self.params = params
        self.seed = seed
        self.nodes = nodes

    @property
    def root(self):
        return self.nodes[0]

    @property
    def ambient_dim(self):
        return self.data.shape[1]

    def node(self, node):
        return self.nodes[node] if isinstance(node, (int, np.integer)) else node

    def children(self, node):
        node = self.node(node)
        if node.is_leaf:
            return []
        return [self.nodes[node.left], self.nodes[node.right]]

    def leaves(self, node=None):
        start = self.root if node is None else self.node(node)
        out, stack = [], [start]
        while stack:
            n = stack.pop()
            if n.is_leaf:
                out.append(n)
            else:
                stack.append(self.nodes[n.right])
                stack.append(self.nodes[n.left])
        return out

    def descendants(self, node):
        """All nodes of the subtree rooted at ``node`` (pre-order, node first)."""
        out, stack = [], [self.node(node)]
        while stack:
            n = stack.pop()
            out.append(n)
            if not n.is_leaf:
                stack.append(self.nodes[n.right])
                stack.append(self.nodes[n.left])
        return out

    def path(self, node):
        """Root-to-node list of ``(ancestor, went_left)`` constraints."""
        node = self.node(node)
        out = []
        while node.parent is not None:
            parent = self.nodes[node.parent]
            out.append((parent, parent.left == node.id))
            node = parent
        out.reverse()
        return out

    def data_radius(self, node):
        """Enclosing-ball radius of the node's data, cached.

        Clipped to the parent's value so that radii never increase going
        down, even with an approximate enclosing-ball solver.
        """
        node = self.node(node)
        if node._radius is not None:
            return node._radius
        chain = []
        n = node
        while n is not None and n._radius is None:
            chain.append(n)
            n = self.nodes[n.parent] if n.parent is not None else None
        for n in reversed(chain):
            _, r = meb_radius(self.data[n.point_indices], self.params.meb_tolerance)
            if n.parent is not None:
                r = min(r, self.nodes[n.parent]._radius)
            n._radius = float(r)
        return node._radius

    def radius_bounds(self, node):
        """Cheap ``(lower, upper)`` bounds on :meth:`data_radius`.

        The farthest point from any data point is between one and two
        radii away; ``upper`` is inflated by the solver tolerance.
        """
        node = self.node(node)
        if node._radius is not None:
            return node._radius, node._radius
        if node._bounds is None:
            pts = self.data[node.point_indices]
            ecc = float(_distances(pts, pts[0]).max())
            upper = float(_distances(pts, pts.mean(axis=0)).max())
            node._bounds = (0.5 * ecc, (1.0 + self.params.meb_tolerance) * min(ecc, upper))
        return node._bounds

    def radius_at_most(self, node, value):
        """``data_radius(node) <= value``, solving the enclosing ball only if needed."""
        lo, hi = self.radius_bounds(node)
        if hi <= value:
            return True
        if lo > value:
            return False
        return self.data_radius(node) <= value

    @property
    def depth(self):
        return max(n.depth for n in self.nodes)

    def __len__(self):
        return len(self.nodes)


def _distances(points, center):
    diff = points - center
    return np.sqrt(np.sum(diff * diff, axis=1))


def estimate_cell_radius(points, pivot):
    """Max distance from ``points[pivot]`` to the points of the cell.

    Lies between half the diameter and the diameter.
    """
    pts = as_points(points)
    return float(_distances(pts, pts[pivot]).max())


def _lower_median(values):
    k = (values.size + 1) // 2 - 1
    return float(np.partition(values, k)[k])


def median_split(values, jitter=0.0, left_inclusive=False):
    """Cut ``values`` at ``lower_median + jitter``.

    Returns ``(median, threshold, left_mask)``; ties at the threshold go
    right unless ``left_inclusive``.
    """
    values = np.asarray(values, dtype=np.float64)
    med = _lower_median(values)
    threshold = med + jitter
    mask = values <= threshold if left_inclusive else values < threshold
    return med, threshold, mask


def _split_max(pts, params, rng, pivot, radius_est, batch=8):
    n, D = pts.shape
    half_width = 6.0 * radius_est / math.sqrt(D)
    k_med = (n + 1) // 2 - 1
    attempts = params.degenerate_retries + 1
    done = 0
    while done < attempts:
        k = min(batch, attempts - done)
        V = rng.normal(0.0, 1.0 / math.sqrt(D), size=(k, D))
        # scaling a value in [-1, 1] keeps |jitter| <= half_width exactly
        jitters = half_width * rng.uniform(-1.0, 1.0, size=k)
        # BLAS screening; the accepted direction is recomputed with project()
        P = pts @ V.T
        meds = np.partition(P, k_med, axis=0)[k_med]
        counts = np.count_nonzero(P < meds + jitters, axis=0)
        for j in np.flatnonzero((counts > 0) & (counts < n)):
            med, thr, mask = median_split(project(pts, V[j]), jitters[j])
            if 0 < int(mask.sum()) < n:
                return SplitRecord(V[j].copy(), med, float(jitters[j]), thr, radius_est, pivot), mask
        done += k
    raise DegenerateSplitError(f"no non-degenerate split after {attempts} attempts")


def _split_mean(pts, params, rng, pivot, radius_est):
    n, D = pts.shape
    mu = pts.mean(axis=0)
    avg_sq = 2.0 * float(np.sum((pts - mu) ** 2)) / n
    diam = diameter(pts)
    if diam * diam <= params.mean_rule_constant * avg_sq:
        for _ in range(params.degenerate_retries + 1):
            v = sample_direction(D, rng)
            med, thr, mask = median_split(project(pts, v), 0.0, left_inclusive=True)
            if 0 < int(mask.sum()) < n:
                rec = SplitRecord(v, med, 0.0, thr, radius_est, pivot,
                                  rule_branch="projection", left_inclusive=True)
                return rec, mask
        raise DegenerateSplitError("projection branch degenerate")
    med, thr, mask = median_split(_distances(pts, mu), 0.0, left_inclusive=True)
    if not 0 < int(mask.sum()) < n:
        raise DegenerateSplitError("distance branch degenerate")
    rec = SplitRecord(None, med, 0.0, thr, radius_est, pivot,
                      rule_branch="distance", left_inclusive=True, center=mu)
    return rec, mask


def split_cell(points, params, rng, indices=None):
    """Split one cell.

    Parameters
    ----------
    points : ndarray, shape (n, D)
        Data held by the cell.
    params : BuildParams
    rng : numpy.random.Generator
    indices : ndarray, optional
        Dataset indices of ``points``; defaults to ``arange(n)``.

    Returns
    -------
    record : SplitRecord
    left, right : ndarray
        Entries of ``indices`` sent to each child.

    Raises
    ------
    DegenerateSplitError
        If every attempt left a child empty, or all points coincide.
    """
    pts = as_points(points)
    n = pts.shape[0]
    if indices is None:
        indices = np.arange(n)
    if n < 2:
        raise DegenerateSplitError("cannot split fewer than 2 points")
    pivot = int(rng.integers(n))
    radius_est = estimate_cell_radius(pts, pivot)
    if radius_est == 0.0:
        raise DegenerateSplitError("all points coincide")
    if params.rule is SplitRule.MAX:
        rec, mask = _split_max(pts, params, rng, pivot, radius_est)
    else:
        rec, mask = _split_mean(pts, params, rng, pivot, radius_est)
    rec.pivot_index = int(indices[pivot])
    return rec, indices[mask], indices[~mask]


def build_tree(dataset, params=None, seed=0, focus=None):
    """Build an RP tree over ``dataset`` (``(n, D)`` array).

    Splitting stops at ``max_leaf_size`` points, at ``max_depth``, when the
    radius estimate is zero, or when a split stays degenerate (the leaf is
    then flagged ``degenerate``). The same dataset, params and seed always
    give the same tree.

    With a ``focus`` ball only cells that fully contain it are split; their
    other children stay unsplit and are flagged ``truncated``. Every split
    uses fresh randomness, so the root-to-ball path has the same
    distribution as in a full build, at a fraction of the cost.
    """
    data = as_points(dataset, "dataset")
    params = params or BuildParams()
    rng = np.random.default_rng(seed)
    root = TreeNode(0, np.arange(data.shape[0]), 0)
    nodes = [root]
    stack = [root]
    while stack:
        node = stack.pop()
        if node.size <= params.max_leaf_size or node.depth >= params.max_depth:
            continue
        pts = data[node.point_indices]
        if np.all(pts == pts[0]):
            # radius estimate would be zero for any pivot
            continue
        try:
            rec, left, right = split_cell(pts, params, rng, node.point_indices)
        except DegenerateSplitError:
            node.degenerate = True
            continue
        node.split = rec
        lchild = TreeNode(len(nodes), left, node.depth + 1, parent=node.id)
        rchild = TreeNode(len(nodes) + 1, right, node.depth + 1, parent=node.id)
        nodes.extend([lchild, rchild])
        node.left, node.right = lchild.id, rchild.id
        if focus is None:
            stack.append(rchild)
            stack.append(lchild)
            continue
        side = rec.ball_side(focus)
        for child, name in ((lchild, "left"), (rchild, "right")):
            if side == name:
                stack.append(child)
            else:
                child.truncated = child.size > params.max_leaf_size
    return Tree(data, params, seed, nodes)


def cell_contains_ball(tree, node, ball):
    """True iff ``ball`` satisfies every cut on the root-to-``node`` path."""
    for ancestor, went_left in tree.path(node):
        side = ancestor.split.ball_side(ball)
        if side != ("left" if went_left else "right"):
            return False
    return True


def smallest_containing_cell(tree, ball):
    """Deepest node whose cell fully contains ``ball``.

    Containing nodes form a path from the root, so this walks down until
    neither child contains the ball.
    """
    node = tree.root
    while not node.is_leaf:
        side = node.split.ball_side(ball)
        if side is None:
            break
        node = tree.nodes[node.left if side == "left" else node.right]
    return node


def _touches_ball(tree, node, ball):
    pts = tree.data[node.point_indices]
    return bool(np.any(_distances(pts, ball.center) <= ball.radius))


def packing_count(tree, ball, r):
    """Number of disjoint cells of data radius ``> r`` that hold a point of ``ball``.

    The qualifying nodes are closed under taking ancestors, so the largest
    disjoint family is the set of qualifying nodes with no qualifying child.
    """
    if not r > 0:
        raise ValueError("r must be positive")

    def qualifies(n):
        return tree.data_radius(n) > r and _touches_ball(tree, n, ball)

    if not qualifies(tree.root):
        return 0
    count, stack = 0, [tree.root]
    while stack:
        node = stack.pop()
        good = [c for c in tree.children(node) if qualifies(c)]
        if good:
            stack.extend(good)
        else:
            count += 1
    return count


def _level_frontiers(tree, node):
    """Yield ``(level, nodes_at_level, propagated_leaves)`` below ``node``."""
    node = tree.node(node)
    current, carried, level = [node], [], 0
    while current:
        yield level, current, carried
        nxt = []
        for n in current:
            if n.is_leaf:
                carried = carried + [n]
            else:
                nxt.extend(tree.children(n))
        current, level = nxt, level + 1


def levels_to_reduce(tree, node, s):
    """Levels below ``node`` after which every cell has radius ``<= radius(node) / s``.

    Leaves above a level count as part of it. Returns ``None`` (censored)
    when the subtree runs out of levels first.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    node = tree.node(node)
    target = tree.data_radius(node) / s
    current, level = [node], 0
    while current:
        # a leaf that is too big stays in every deeper level
        if any(n.is_leaf and not tree.radius_at_most(n, target) for n in current):
            return None
        if all(tree.radius_at_most(n, target) for n in current):
            return level
        current = [c for n in current for c in tree.children(n)]
        level += 1
    return None


def collect_level_radii(tree, node):
    """Per-level ``(level, max_radius, mean_radius)`` rows below ``node``.

    ``max_radius`` includes leaves carried down from shallower levels;
    ``mean_radius`` averages only the nodes that exist at that depth.
    """
    rows = []
    for level, current, carried in _level_frontiers(tree, node):
        radii = [tree.data_radius(n) for n in current]
        carried_max = max((tree.data_radius(n) for n in carried), default=0.0)
        rows.append((level, max(max(radii), carried_max), float(np.mean(radii))))
    return rows


def tree_to_json(tree):
    """Debug dump: node list with parent links, split values as float arrays."""
    out = []
    for n in tree.nodes:
        entry = {
            "id": n.id,
            "parent": n.parent,
            "depth": n.depth,
            "left": n.left,
            "right": n.right,
            "degenerate": n.degenerate,
            "point_indices": n.point_indices.tolist() if n.is_leaf else None,
        }
        if n.split is not None:
            s = n.split
            entry["split"] = {
                "branch": s.rule_branch,
                "left_inclusive": s.left_inclusive,
                "direction": None if s.direction is None else s.direction.tolist(),
                "center": None if s.center is None else s.center.tolist(),
                "values": [s.median, s.jitter, s.threshold, s.radius_estimate, float(s.pivot_index)],
            }
        out.append(entry)
    return json.dumps({"seed": tree.seed, "params": tree.params.to_dict(),
                       "ambient_dim": tree.ambient_dim, "nodes": out})


def tree_from_json(text, dataset):
    """Rebuild a :class:`Tree` from :func:`tree_to_json` output and its dataset."""
    doc = json.loads(text)
    data = as_points(dataset, "dataset")
    nodes = []
    for e in doc["nodes"]:
        nodes.append(TreeNode(e["id"], np.empty(0, dtype=np.int64), e["depth"], e["parent"],
                              left=e["left"], right=e["right"], degenerate=e["degenerate"]))
        if "split" in e:
            s = e["split"]
            med, jit, thr, rad, piv = s["values"]
            nodes[-1].split = SplitRecord(
                None if s["direction"] is None else np.array(s["direction"]),
                med, jit, thr, rad, int(piv), s["branch"], s["left_inclusive"],
                None if s["center"] is None else np.array(s["center"]))
        else:
            nodes[-1].point_indices = np.array(e["point_indices"], dtype=np.int64)
    # internal nodes hold the union of their leaves, in leaf order
    for n in reversed(nodes):
        if n.split is not None:
            n.point_indices = np.sort(np.concatenate(
                [nodes[n.left].point_indices, nodes[n.right].point_indices]))
    return Tree(data, BuildParams(**doc["params"]), doc["seed"], nodes)
