"""Independent oracles shared by the tree tests and the acceptance suite."""
import itertools
import math

import numpy as np


def flat_data(n, d, D, rng):
    X = np.zeros((n, D))
    X[:, :d] = rng.uniform(size=(n, d))
    Q, _ = np.linalg.qr(rng.normal(size=(D, D)))
    return X @ Q.T


def contains_oracle(tree, node, ball):
    """Containment from the halfspace formulas, ancestor by ancestor."""
    n = node
    while n.parent is not None:
        parent = tree.nodes[n.parent]
        sp = parent.split
        c = float(np.dot(ball.center, sp.direction))
        spread = ball.radius * float(np.linalg.norm(sp.direction))
        if parent.left == n.id:
            if not c + spread < sp.threshold:
                return False
        elif not c - spread >= sp.threshold:
            return False
        n = parent
    return True


def deepest_containing_scan(tree, ball):
    best = tree.root
    for n in tree.nodes:
        if contains_oracle(tree, n, ball) and n.depth > best.depth:
            best = n
    return best


def is_ancestor(tree, a, b):
    n = b
    while n.parent is not None:
        n = tree.nodes[n.parent]
        if n.id == a.id:
            return True
    return False


def max_antichain_oracle(tree, qualifying):
    """Largest set of pairwise non-nested qualifying nodes.

    Exhaustive over subsets when small; otherwise the tree DP
    ``f(v) = max([v qualifies], sum f(children))`` which needs no closure property.
    """
    q = list(qualifying)
    if len(q) <= 14:
        best = 0
        for k in range(len(q), 0, -1):
            for sub in itertools.combinations(q, k):
                if all(not is_ancestor(tree, a, b) and not is_ancestor(tree, b, a)
                       for a, b in itertools.combinations(sub, 2)):
                    return k
        return best
    ids = {n.id for n in q}

    def f(n):
        kids = sum(f(c) for c in tree.children(n))
        return max(1 if n.id in ids else 0, kids)

    return f(tree.root)


def level_scan_oracle(tree, node, s):
    target = tree.data_radius(node) / s
    depth0 = node.depth
    sub = tree.descendants(node)
    max_depth = max(n.depth for n in sub)
    for level in range(0, max_depth - depth0 + 1):
        members = [n for n in sub if n.depth == depth0 + level or (n.is_leaf and n.depth < depth0 + level)]
        if all(tree.data_radius(n) <= target for n in members):
            return level
    return None


def check_invariants(tree):
    n = tree.data.shape[0]
    leaves = tree.leaves()
    allidx = np.concatenate([l.point_indices for l in leaves])
    assert np.array_equal(np.sort(allidx), np.arange(n))
    D = tree.ambient_dim
    for node in tree.nodes:
        if node.is_leaf:
            continue
        l, r = tree.children(node)
        assert l.depth == r.depth == node.depth + 1
        merged = np.sort(np.concatenate([l.point_indices, r.point_indices]))
        assert np.array_equal(merged, np.sort(node.point_indices))
        sp = node.split
        if sp.rule_branch == "projection" and not sp.left_inclusive:
            assert abs(sp.jitter) <= 6 * sp.radius_estimate / math.sqrt(D)
        assert sp.radius_estimate >= 0
        assert np.all(sp.goes_left(tree.data[l.point_indices]))
        assert not np.any(sp.goes_left(tree.data[r.point_indices]))
        for c in (l, r):
            assert tree.data_radius(c) <= tree.data_radius(node) + 1e-9
