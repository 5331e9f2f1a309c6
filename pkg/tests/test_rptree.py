import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import (check_invariants, deepest_containing_scan, flat_data, level_scan_oracle,
                     max_antichain_oracle)
from rptlab.core_math import meb_radius, project
from rptlab.rptree import (
    Ball,
    BuildParams,
    SplitRecord,
    SplitRule,
    Tree,
    TreeNode,
    build_tree,
    cell_contains_ball,
    collect_level_radii,
    estimate_cell_radius,
    levels_to_reduce,
    median_split,
    packing_count,
    smallest_containing_cell,
    split_cell,
    tree_from_json,
    tree_to_json,
)


# median_split and split_cell

def test_median_split_examples():
    med, thr, left = median_split(np.array([0.0, 1, 2, 3, 4]), jitter=0.5)
    assert (med, thr) == (2.0, 2.5)
    assert left.tolist() == [True, True, True, False, False]
    med, thr, left = median_split(np.array([0.0, 1, 2, 3]), jitter=0.0)
    assert (med, thr) == (1.0, 1.0)
    assert left.tolist() == [True, False, False, False]


def test_estimate_cell_radius_examples():
    X = np.array([[0.0, 0], [3, 0], [0, 4]])
    assert estimate_cell_radius(X, 0) == 4.0
    assert estimate_cell_radius(X[:1], 0) == 0.0
    rng = np.random.default_rng(0)
    Y = rng.normal(size=(40, 3))
    diam = max(np.linalg.norm(a - b) for a in Y for b in Y)
    for p in range(40):
        assert diam / 2 <= estimate_cell_radius(Y, p) <= diam


def test_estimate_cell_radius_empty():
    with pytest.raises(ValueError):
        estimate_cell_radius(np.empty((0, 2)), 0)


def test_threshold_range_over_many_splits():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 8))
    params = BuildParams()
    for _ in range(10000 // 20):
        for _ in range(20):
            rec, left, right = split_cell(X, params, rng)
            bound = 6 * rec.radius_estimate / math.sqrt(8)
            assert abs(rec.jitter) <= bound
            assert rec.median - bound <= rec.threshold <= rec.median + bound
            assert len(left) and len(right)


def test_split_record_fields_match_cell():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(31, 5))
    idx = np.arange(100, 131)
    rec, left, right = split_cell(X, BuildParams(), rng, idx)
    vals = project(X, rec.direction)
    assert rec.median == np.sort(vals)[math.ceil(31 / 2) - 1]
    assert rec.threshold == rec.median + rec.jitter
    assert rec.radius_estimate == estimate_cell_radius(X, rec.pivot_index - 100)
    assert sorted(left.tolist() + right.tolist()) == idx.tolist()
    assert set(left.tolist()) == set(idx[vals < rec.threshold].tolist())


# build_tree

def test_small_dataset_is_single_leaf():
    tree = build_tree(np.random.default_rng(0).normal(size=(5, 3)), BuildParams(max_leaf_size=10))
    assert len(tree) == 1 and tree.root.is_leaf


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        build_tree(np.empty((0, 3)))


def test_identical_points_stop_without_flag():
    tree = build_tree(np.ones((50, 4)), BuildParams(max_leaf_size=2))
    assert len(tree) == 1 and not tree.root.degenerate


def test_build_determinism():
    X = np.random.default_rng(3).uniform(size=(1000, 2))
    a, b = build_tree(X, seed=42), build_tree(X, seed=42)
    assert tree_to_json(a) == tree_to_json(b)
    assert tree_to_json(a) != tree_to_json(build_tree(X, seed=43))


def test_invariants_flat_data():
    rng = np.random.default_rng(4)
    check_invariants(build_tree(flat_data(800, 2, 20, rng), BuildParams(max_leaf_size=3), seed=1))


def test_mean_rule_invariants_and_both_branches():
    rng = np.random.default_rng(5)
    X = np.vstack([rng.uniform(size=(300, 3)), rng.normal(size=(300, 3)) * [5, 0.1, 0.1]])
    tree = build_tree(X, BuildParams(rule=SplitRule.MEAN, max_leaf_size=5), seed=2)
    check_invariants(tree)
    branches = {n.split.rule_branch for n in tree.nodes if not n.is_leaf}
    assert branches == {"projection", "distance"}
    assert all(n.split.left_inclusive for n in tree.nodes if not n.is_leaf)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 120), st.integers(1, 6), st.integers(0, 2**32 - 1), st.integers(1, 8),
       st.sampled_from(["MAX", "MEAN"]))
def test_invariants_property(n, D, seed, leaf, rule):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(n, D)), 1)  # rounding creates ties
    tree = build_tree(X, BuildParams(rule=rule, max_leaf_size=leaf), seed=seed)
    check_invariants(tree)


def test_children_radius_uses_subset_meb():
    rng = np.random.default_rng(6)
    tree = build_tree(rng.normal(size=(300, 4)), seed=3)
    for node in tree.nodes[:40]:
        exact = meb_radius(tree.data[node.point_indices])[1]
        assert tree.data_radius(node) <= exact * (1 + 1e-12)
        assert tree.data_radius(node) >= exact / (1 + 1e-6) - 1e-12


def test_json_round_trip():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(200, 3))
    tree = build_tree(X, BuildParams(max_leaf_size=4), seed=5)
    back = tree_from_json(tree_to_json(tree), X)
    assert tree_to_json(back) == tree_to_json(tree)
    for a, b in zip(tree.nodes, back.nodes):
        assert np.array_equal(np.sort(a.point_indices), b.point_indices)
    json.loads(tree_to_json(tree))


# containment

def line_tree():
    """One split along x at threshold 1: left cell is {x < 1}."""
    data = np.array([[0.0, 0.0], [2.0, 0.0]])
    root = TreeNode(0, np.array([0, 1]), 0, left=1, right=2)
    root.split = SplitRecord(np.array([1.0, 0.0]), 0.0, 1.0, 1.0, 2.0, 0)
    nodes = [root, TreeNode(1, np.array([0]), 1, parent=0), TreeNode(2, np.array([1]), 1, parent=0)]
    return Tree(data, BuildParams(), 0, nodes)


def test_cell_contains_ball_examples():
    tree = line_tree()
    assert cell_contains_ball(tree, tree.root, Ball([5.0, 5.0], 100.0))
    assert cell_contains_ball(tree, tree.nodes[1], Ball([0.0, 0.0], 0.5))
    assert not cell_contains_ball(tree, tree.nodes[1], Ball([0.0, 0.0], 1.2))
    # ties go right
    assert cell_contains_ball(tree, tree.nodes[2], Ball([1.5, 0.0], 0.5))
    assert not cell_contains_ball(tree, tree.nodes[1], Ball([0.5, 0.0], 0.5))


def test_restricted_ball_spread():
    v = np.array([3.0, 4.0, 0.0])
    full = Ball(np.zeros(3), 2.0)
    flat = Ball(np.zeros(3), 2.0, basis=[[1.0, 0.0, 0.0]])
    assert full.projected_radius(v) == 10.0
    assert flat.projected_radius(v) == 6.0
    lo, hi = flat.distance_range([0.0, 3.0, 0.0])
    assert (lo, hi) == (3.0, math.sqrt(13.0))
    with pytest.raises(ValueError):
        Ball(np.zeros(3), 1.0, basis=[[1.0, 1.0, 0.0]])


def test_smallest_containing_cell_examples():
    rng = np.random.default_rng(8)
    X = rng.uniform(size=(400, 3))
    tree = build_tree(X, BuildParams(max_leaf_size=1), seed=9)
    assert smallest_containing_cell(tree, Ball(X[0], 1e6)) is tree.root
    leaf = smallest_containing_cell(tree, Ball(X[17], 0.0))
    assert leaf.is_leaf and 17 in leaf.point_indices


def test_smallest_containing_cell_matches_scan():
    rng = np.random.default_rng(9)
    for trial in range(30):
        X = rng.uniform(size=(150, 4))
        tree = build_tree(X, BuildParams(max_leaf_size=2), seed=trial)
        for _ in range(5):
            ball = Ball(X[rng.integers(150)] + rng.normal(scale=0.01, size=4), rng.uniform(0, 0.2))
            got = smallest_containing_cell(tree, ball)
            assert got is deepest_containing_scan(tree, ball)
            assert cell_contains_ball(tree, got, ball)


def test_focused_build_keeps_ball_path():
    rng = np.random.default_rng(10)
    X = rng.uniform(size=(2000, 5))
    ball = Ball(X[3], 0.02)
    tree = build_tree(X, BuildParams(max_leaf_size=1), seed=4, focus=ball)
    check_invariants(tree)
    cell = smallest_containing_cell(tree, ball)
    assert not cell.truncated
    for n in tree.nodes:
        if n.truncated:
            assert not cell_contains_ball(tree, n, ball)
    assert len(tree) < 200


# packing

def test_packing_trivial_cases():
    rng = np.random.default_rng(11)
    X = rng.uniform(size=(300, 2))
    tree = build_tree(X, seed=1)
    root_r = tree.data_radius(tree.root)
    assert packing_count(tree, Ball(X[0], 0.3), root_r) == 0
    assert packing_count(tree, Ball(X[0], 0.3), 2 * root_r) == 0
    assert packing_count(tree, Ball([10.0, 10.0], 0.5), 0.01) == 0
    with pytest.raises(ValueError):
        packing_count(tree, Ball(X[0], 0.3), 0.0)


def test_packing_matches_antichain_oracle():
    rng = np.random.default_rng(12)
    for trial in range(25):
        X = rng.uniform(size=(64, 2))
        tree = build_tree(X, BuildParams(max_leaf_size=1, max_depth=6), seed=trial)
        for _ in range(4):
            ball = Ball(X[rng.integers(64)], rng.uniform(0.05, 0.5))
            r = rng.uniform(0.01, 0.4)
            qual = [n for n in tree.nodes if tree.data_radius(n) > r
                    and np.any(np.linalg.norm(X[n.point_indices] - ball.center, axis=1) <= ball.radius)]
            assert packing_count(tree, ball, r) == max_antichain_oracle(tree, qual)


def test_packing_monotone():
    rng = np.random.default_rng(13)
    X = rng.uniform(size=(500, 3))
    tree = build_tree(X, BuildParams(max_leaf_size=2), seed=3)
    c = X[5]
    counts_r = [packing_count(tree, Ball(c, 0.3), r) for r in (0.01, 0.02, 0.05, 0.1, 0.2, 0.5)]
    assert all(a >= b for a, b in zip(counts_r, counts_r[1:]))
    counts_R = [packing_count(tree, Ball(c, R), 0.03) for R in (0.05, 0.1, 0.2, 0.4)]
    assert all(a <= b for a, b in zip(counts_R, counts_R[1:]))


# size reduction

def chain_tree():
    data = np.array([[0.0], [1.0], [2.0], [4.0], [8.0]])
    dummy = SplitRecord(np.array([1.0]), 0.0, 0.0, 0.0, 1.0, 0)
    n0 = TreeNode(0, np.arange(5), 0, left=1, right=2, split=dummy)
    n1 = TreeNode(1, np.array([0, 1, 2, 3]), 1, parent=0, left=3, right=4, split=dummy)
    n2 = TreeNode(2, np.array([4]), 1, parent=0)
    n3 = TreeNode(3, np.array([0, 1, 2]), 2, parent=1)
    n4 = TreeNode(4, np.array([3]), 2, parent=1)
    return Tree(data, BuildParams(), 0, [n0, n1, n2, n3, n4])


def test_levels_to_reduce_chain():
    tree = chain_tree()
    assert [tree.data_radius(i) for i in range(4)] == pytest.approx([4, 2, 0, 1])
    assert levels_to_reduce(tree, tree.root, 1) == 0
    assert levels_to_reduce(tree, tree.root, 2) == 1
    assert levels_to_reduce(tree, tree.root, 4) == 2
    assert levels_to_reduce(tree, tree.root, 8) is None
    with pytest.raises(ValueError):
        levels_to_reduce(tree, tree.root, 0.5)


def test_collect_level_radii_examples():
    single = build_tree(np.random.default_rng(0).normal(size=(3, 2)))
    assert len(collect_level_radii(single, single.root)) == 1
    rows = collect_level_radii(chain_tree(), 0)
    assert [r[0] for r in rows] == [0, 1, 2]
    assert rows[1][1] == pytest.approx(2.0)
    assert rows[2][1] == pytest.approx(1.0)
    assert rows[2][2] == pytest.approx(0.5)


def test_levels_to_reduce_matches_scans():
    rng = np.random.default_rng(14)
    for trial in range(20):
        X = flat_data(300, 2, 10, rng)
        tree = build_tree(X, BuildParams(max_leaf_size=int(rng.integers(1, 6))), seed=trial)
        rows = collect_level_radii(tree, tree.root)
        for s in (1, 1.5, 2, 3, 4, 8):
            got = levels_to_reduce(tree, tree.root, s)
            assert got == level_scan_oracle(tree, tree.root, s)
            target = tree.data_radius(tree.root) / s
            from_table = next((lvl for lvl, mx, _ in rows if mx <= target), None)
            assert got == from_table
        node = tree.nodes[1]
        if node.size > 1 and tree.data_radius(node) > 0:
            assert levels_to_reduce(tree, node, 2) == level_scan_oracle(tree, node, 2)
