"""Monte Carlo estimates of how a random split treats pairs of small balls.

Run: python3 demos/split_probabilities.py
"""
import numpy as np

from rptlab.split_stats import (PairConfig, ball_split_bound, estimate_ball_split_prob,
                                estimate_pair_split_probs)

rng = np.random.default_rng(0)
N = 20000
for s in (2, 4):
    cfg = PairConfig(s=s, mode="good_bad")
    est = estimate_pair_split_probs(cfg, N, rng)
    print(f"s={s}: " + ", ".join(f"{k.value} {v.p:.4f}+-{v.half_width:.4f}" for k, v in est.items())
          + f"   (good >= {1 / (56 * s):.5f}, bad <= {1 / (320 * s):.5f})")

est = estimate_pair_split_probs(PairConfig(mode="useful_useless"), N, rng)
print("useful/useless: " + ", ".join(f"{k.value} {v.p:.4f}" for k, v in est.items()) + "   (useful >= 0.00521)")

for ratio in (0.001, 0.01, 0.05):
    e = estimate_ball_split_prob(ratio, PairConfig(), N, rng)
    print(f"ball of radius {ratio} x cell radius split with prob {e.p:.5f} (bound {ball_split_bound(ratio, 1, 2):.5f})")
