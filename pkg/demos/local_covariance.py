"""Small patches of a sphere and a torus look flat: most variance is tangent.

Run: python3 demos/local_covariance.py
"""
import math

import numpy as np

from rptlab.intrinsic_dim import local_covariance_check, tangent_energy_check
from rptlab.manifolds import sample_global, sample_patch, sphere, torus

rng = np.random.default_rng(0)
for name, spec in (("sphere", sphere(2, 1.0, 10, rng)), ("torus", torus(1.0, 3.0, 10, rng))):
    for eps in (0.05, 0.1, 0.25):
        r = math.sqrt(eps) * spec.tau / 3
        fracs = []
        for _ in range(20):
            base = sample_global(spec, 1, rng)[0]
            patch = sample_patch(spec, base, r, 200, rng)
            eig, _ = local_covariance_check(patch, base, r, 2)
            fracs.append((eig, tangent_energy_check(patch, spec, base, r).fraction))
        eig_min = min(f[0] for f in fracs)
        tan_min = min(f[1] for f in fracs)
        print(f"{name:6s} eps={eps:<5} r={r:.4f}  min top-2 share {eig_min:.5f}  "
              f"min tangent share {tan_min:.5f}  target {1 - eps:.2f}")
