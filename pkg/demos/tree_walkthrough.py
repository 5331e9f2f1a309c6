"""Build an RP tree on a 2-D flat in R^50 and look at how fast cells shrink.

Run: python3 demos/tree_walkthrough.py
"""
import numpy as np

from rptlab import Ball, BuildParams, build_tree, collect_level_radii, levels_to_reduce, packing_count
from rptlab.manifolds import flat, sample_global

rng = np.random.default_rng(0)
spec = flat(2, 50, rng=rng)
X = sample_global(spec, 5000, rng)
tree = build_tree(X, BuildParams(max_leaf_size=3), seed=1)
print(f"{len(tree)} nodes, {len(tree.leaves())} leaves, root data radius {tree.data_radius(tree.root):.4f}")

print("\nlevel  max radius  mean radius")
for level, mx, mean in collect_level_radii(tree, tree.root)[:12]:
    print(f"{level:5d}  {mx:10.4f}  {mean:11.4f}")

print("\nlevels needed to shrink every cell by s:")
for s in (2, 4, 8, 16):
    print(f"  s={s:2d}: {levels_to_reduce(tree, tree.root, s)}")

R = 0.1 * tree.data_radius(tree.root)
ball = Ball(X[0], R)
print("\ncells of radius > r meeting B(x, R):")
for q in (2, 4, 8):
    print(f"  R/r={q}: {packing_count(tree, ball, R / q)}")
