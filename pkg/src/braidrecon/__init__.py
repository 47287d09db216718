"""Strand-based braid reconstruction.

Generate sinusoidal braid models, fit them to coarse hair strands and a
braid edge image, and refine the coarse strands onto the fitted braid.
"""

from .fit import FitConfig, FitTrace, adjust_radius, fit, initialize
from .losses import LossReport, LossWeights, chamfer, depth_regularizer, projection_bce
from .raster import CannyConfig, ProjectionSpec, canny, edge_image_synthetic, mask_strands, rasterize_tube
from .refine import Allocation, RefineConfig, allocate, downsample_smooth, reconstruct_bunch, refine_all, replace_and_attach
from .simulate import simulate_coarse, truth_midline, vertical_params
from .strands import (
    GrayImage,
    MidLineAnnotation,
    Point3,
    Strand,
    StrandSet,
    ValidationError,
    arc_length,
    validate,
)
from .synth import BraidParams, SyntheticBraid, centerline_distance, generate, midlines

__version__ = "0.1.0"
