"""
A three-bunch braid from two sinusoids
======================================

Each bunch swings left-right at the base frequency and front-back at twice
it, with the bunches a third of a period apart.
"""

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from braidrecon import BraidParams, generate
from braidrecon.synth import midline_points

params = BraidParams(n_points=400).with_noise(0)
braid = generate(params)
centers = braid.centerline_points()
print("bunches:", braid.n_bunches, " points per centerline:", centers.shape[1])
print("tube radii:", braid.radius_profile[:, 0])

# with zero shifts the centerlines are the analytic mid-lines
t = np.arange(params.n_points) * params.t_step
print("max gap to analytic mid-lines:", np.abs(centers - midline_points(params.a, params.b, t)).max())

fig, (front, side) = plt.subplots(1, 2, figsize=(8, 6), sharey=True)
for c, color in zip(centers, "rbg"):
    front.plot(c[:, 0], c[:, 1], color)
    side.plot(c[:, 2], c[:, 1], color)
front.set_title("front (x, y)")
side.set_title("side (z, y)")
front.invert_yaxis()
fig.savefig("braid_model.png", dpi=80)
print("wrote braid_model.png")
