"""
The three fitting losses on a toy problem
=========================================
"""

import numpy as np

from braidrecon import LossWeights, ProjectionSpec, generate, simulate_coarse, vertical_params
from braidrecon.fit import Objective

spec = ProjectionSpec(256, 512)
truth = vertical_params(spec, a=20.0, b=10.0, shift_z=50.0).with_noise(0)
coarse, mask, edges = simulate_coarse(truth, noise_sigma=0.5, strands_per_bunch=6, seed=0, spec=spec)
print(len(coarse), "coarse strands,", coarse.n_points, "points")

objective = Objective(coarse, edges, LossWeights(), spec)

# sweep the width parameter and watch each term
for a in (14.0, 17.0, 20.0, 23.0, 26.0):
    r = objective(truth.replace(a=a))
    print(f"a={a:5.1f}  chamfer={r.l_pc:7.3f}  bce={r.l_proj:6.3f}  reg={r.l_reg:7.3f}  total={r.l_total:7.3f}")

# the depth term only sees b and the shape of z
for b in (6.0, 10.0, 14.0):
    print(f"b={b:5.1f}  reg={objective(truth.replace(b=b)).l_reg:8.3f}")
