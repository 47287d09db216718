"""Synthetic coarse hair for desk-scale experiments.

Stands in for an upstream single-view reconstruction: strands are sampled on
a known braid tube and jittered, and the mask and edge image are rendered
from the same braid.
"""

from __future__ import annotations

import numpy as np

from .fit import A_WIDTH_RATIO
from .raster import ProjectionSpec, edge_image_synthetic, rasterize_tube
from .strands import GrayImage, MidLineAnnotation, Strand, StrandSet
from .synth import BraidParams, generate, tube_points


def simulate_coarse(truth: BraidParams, noise_sigma: float, strands_per_bunch: int, seed: int = 0,
                    spec: ProjectionSpec = ProjectionSpec(), softness: float = 1.0) -> tuple:
    """Return ``(strands, mask, edges)`` sampled from the braid ``truth``.

    Each strand sits on its bunch's tube surface at a random angle and gets
    isotropic Gaussian noise of standard deviation ``noise_sigma``.
    """
    rng = np.random.default_rng(seed)
    braid = generate(truth, seed)
    strands = []
    for i, line in enumerate(braid.centerlines):
        angles = rng.uniform(0.0, 2.0 * np.pi, strands_per_bunch)
        for j, angle in enumerate(angles):
            surface = _surface_strand(line.points, braid.radius_profile[i], angle)
            if noise_sigma > 0:
                surface = surface + rng.normal(0.0, noise_sigma, surface.shape)
            strands.append(Strand(f"c{i}_{j}", surface))
    centers = StrandSet(tuple(braid.centerlines))
    silhouette = rasterize_tube(centers, list(braid.radius_profile), spec, softness)
    mask = GrayImage((silhouette.pixels > 0.5).astype(np.float64))
    edges = edge_image_synthetic(braid, spec, softness)
    return StrandSet(tuple(strands)), mask, edges


def _surface_strand(centerline: np.ndarray, radii: np.ndarray, angle: float) -> np.ndarray:
    # a 4-strand tube gives the normal (index 0) and binormal (index 1) directions
    ring = tube_points(centerline, np.ones(len(centerline)), n_surface=4)
    normal = ring[0] - centerline
    binormal = ring[1] - centerline
    offset = np.cos(angle) * normal + np.sin(angle) * binormal
    return centerline + radii[:, None] * offset


def truth_midline(truth: BraidParams) -> MidLineAnnotation:
    """The annotation a perfect annotator would draw for ``truth``."""
    k = np.arange(truth.n_points)
    x = np.broadcast_to(truth.shift_x, k.shape)
    y = k * truth.t_step + np.broadcast_to(truth.shift_y, k.shape)
    return MidLineAnnotation.from_points(np.column_stack([x, y]), truth.a * A_WIDTH_RATIO)


def vertical_params(spec: ProjectionSpec, n_points: int = 200, margin: float = 0.1, **overrides) -> BraidParams:
    """Braid hanging straight down the middle of the image.

    The mid-line spans the image height minus ``margin`` at each end; extra
    keyword arguments override the remaining BraidParams fields.
    """
    fields = dict(n_points=n_points)
    fields.update(overrides)
    t_step = fields.get("t_step", 0.05)
    k = np.arange(n_points)
    rows = np.linspace(margin * spec.height, (1.0 - margin) * spec.height, n_points)
    fields.setdefault("shift_x", spec.width / 2.0)
    fields.setdefault("shift_y", rows - k * t_step)
    return BraidParams(**fields)
