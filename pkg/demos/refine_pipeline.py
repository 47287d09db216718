"""
From noisy coarse strands to a clean braid
==========================================
"""

import numpy as np
from scipy.spatial import cKDTree

from braidrecon import ProjectionSpec, RefineConfig, generate, simulate_coarse, vertical_params
from braidrecon.fit import adjust_radius
from braidrecon.formats import export_ply
from braidrecon.refine import allocate, downsample, refine_all, smooth
from braidrecon.raster import mask_strands

spec = ProjectionSpec(256, 512)
truth = vertical_params(spec, a=20.0, b=10.0, shift_z=50.0).with_noise(0)
coarse, mask, _ = simulate_coarse(truth, noise_sigma=2.0, strands_per_bunch=8, seed=1, spec=spec)
braid = adjust_radius(generate(truth))


def outside(strands):
    centers, out = braid.centerline_points(), 0
    for s in strands:
        b = int(s.id[1])
        d, k = cKDTree(centers[b]).query(s.points)
        out += np.sum(d > braid.radius_profile[b, k] + 1e-9)
    return out


print("points outside their tube before:", outside(coarse), "of", coarse.n_points)
refined = refine_all(coarse, mask, braid, RefineConfig(downsample_keep_every=1, smooth_window=1), spec)
print("after snapping:", outside(refined), "(tail points below the braid are never snapped)")

inside, _ = mask_strands(coarse, mask, spec)
alloc = allocate(inside, braid)
print("bunch sizes:", alloc.sizes(3))
export_ply(refine_all(coarse, mask, braid, spec=spec), "refined.ply", alloc)
print("wrote refined.ply")

# order matters: downsampling first widens the effective smoothing window
x = np.sin(2 * np.pi * np.arange(200) / 20)[:, None] * np.ones(3)
print("peak-to-peak kept, downsample then smooth:", np.ptp(smooth(downsample(x, 2), 5)[:, 0]) / np.ptp(x[:, 0]))
print("peak-to-peak kept, smooth then downsample:", np.ptp(downsample(smooth(x, 5), 2)[:, 0]) / np.ptp(x[:, 0]))
