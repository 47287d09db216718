"""
Orthographic projection of strands into image space.

Pixel (row, col) is centered on x = col, y = row; z is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .strands import GrayImage, StrandSet, ValidationError
from .synth import SyntheticBraid

EDGE_INNER_SCALE = 1.4


@dataclass(frozen=True)
class ProjectionSpec:
    width: int = 256
    height: int = 512

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ValidationError("image size must be integral")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"image size must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class CannyConfig:
    """Canny parameters; thresholds are fractions of the peak gradient."""

    gaussian_sigma: float = 1.4
    low_threshold: float = 0.1
    high_threshold: float = 0.3

    def __post_init__(self):
        if not self.gaussian_sigma > 0:
            raise ValidationError("gaussian_sigma must be > 0")
        if not 0 < self.low_threshold < self.high_threshold <= 1:
            raise ValidationError("need 0 < low_threshold < high_threshold <= 1")


def _broadcast_radii(strands: StrandSet, radii) -> np.ndarray:
    n = strands.n_points
    if np.ndim(radii) == 0:
        return np.full(n, float(radii))
    if isinstance(radii, np.ndarray) and radii.ndim == 1:
        flat = radii.astype(np.float64)
    else:
        parts = [np.atleast_1d(np.asarray(r, dtype=np.float64)) for r in radii]
        if len(parts) != len(strands):
            raise ValidationError(f"got radii for {len(parts)} strands, expected {len(strands)}")
        for strand, r in zip(strands, parts):
            if r.size not in (1, len(strand)):
                raise ValidationError(
                    f"strand {strand.id!r}: {r.size} radii for {len(strand)} points"
                )
        flat = np.concatenate(
            [np.broadcast_to(r, len(s)) for s, r in zip(strands, parts)]
        ) if parts else np.zeros(0)
    if flat.shape != (n,):
        raise ValidationError(f"got {flat.size} radii for {n} points")
    return flat


def rasterize_discs(xy: np.ndarray, radii: np.ndarray, spec: ProjectionSpec, softness: float = 1.0) -> np.ndarray:
    """Max-blend of discs centered on ``xy`` into an (H, W) float array.

    Coverage is 1 within the radius and falls linearly to 0 over
    ``softness`` pixels outside it.
    """
    if softness < 0:
        raise ValidationError("softness must be >= 0")
    image = np.zeros(spec.height * spec.width)
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    radii = np.asarray(radii, dtype=np.float64).reshape(-1)
    if len(xy) == 0:
        return image.reshape(spec.height, spec.width)
    reach = int(math.ceil(radii.max() + softness)) + 1
    # cull discs that cannot touch the image
    near = (
        (xy[:, 0] + radii + softness >= 0) & (xy[:, 0] - radii - softness <= spec.width - 1)
        & (xy[:, 1] + radii + softness >= 0) & (xy[:, 1] - radii - softness <= spec.height - 1)
    )
    xy, radii = xy[near], radii[near]
    if len(xy) == 0:
        return image.reshape(spec.height, spec.width)
    offsets = np.arange(-reach, reach + 1)
    base_c = np.floor(xy[:, 0]).astype(np.int64)
    base_r = np.floor(xy[:, 1]).astype(np.int64)
    # chunk to bound memory on large point sets
    chunk = max(1, 2_000_000 // len(offsets) ** 2)
    for lo in range(0, len(xy), chunk):
        sl = slice(lo, lo + chunk)
        cols = base_c[sl, None, None] + offsets[None, None, :]
        rows = base_r[sl, None, None] + offsets[None, :, None]
        d = np.sqrt((cols - xy[sl, 0, None, None]) ** 2 + (rows - xy[sl, 1, None, None]) ** 2)
        r = radii[sl, None, None]
        if softness > 0:
            cover = np.clip(1.0 - (d - r) / softness, 0.0, 1.0)
        else:
            cover = (d <= r).astype(np.float64)
        valid = (cover > 0) & (cols >= 0) & (cols < spec.width) & (rows >= 0) & (rows < spec.height)
        np.maximum.at(image, (rows * spec.width + cols)[valid], cover[valid])
    return image.reshape(spec.height, spec.width)


def rasterize_tube(strands: StrandSet, radii, spec: ProjectionSpec, softness: float = 1.0) -> GrayImage:
    """Silhouette of discs of per-point radius swept along every strand.

    ``radii`` is a scalar, a flat array with one entry per point, or one
    scalar/array per strand.
    """
    flat = _broadcast_radii(strands, radii)
    xy = strands.points()[:, :2]
    return GrayImage(rasterize_discs(xy, flat, spec, softness))


def _edge_band(xy, radii, spec, softness) -> np.ndarray:
    outer = rasterize_discs(xy, radii, spec, softness)
    inner = rasterize_discs(xy, radii / EDGE_INNER_SCALE, spec, softness)
    return np.clip(outer - inner, 0.0, 1.0)


def edge_image_synthetic(braid: SyntheticBraid, spec: ProjectionSpec, softness: float = 1.0) -> GrayImage:
    """Edge band of the braid silhouette: tube at r minus tube at r / 1.4."""
    xy = braid.centerline_points()[:, :, :2].reshape(-1, 2)
    radii = np.asarray(braid.radius_profile).reshape(-1)
    return GrayImage(_edge_band(xy, radii, spec, softness))


def canny(image: GrayImage, cfg: CannyConfig = CannyConfig()) -> GrayImage:
    """Binary Canny edge map of ``image``."""
    smooth = ndimage.gaussian_filter(image.pixels, cfg.gaussian_sigma, mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest")
    gy = ndimage.sobel(smooth, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 1e-12:
        return GrayImage.zeros(image.height, image.width)

    # quantize gradient direction to 0, 45, 90, 135 degrees
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = (np.floor((angle + 22.5) / 45.0).astype(int)) % 4
    steps = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    padded = np.pad(mag, 1)
    h, w = mag.shape
    keep = np.zeros_like(mag, dtype=bool)
    for s, (dr, dc) in steps.items():
        ahead = padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
        behind = padded[1 - dr : 1 - dr + h, 1 - dc : 1 - dc + w]
        # strict on one side so a two-pixel plateau yields a single edge
        keep |= (sector == s) & (mag > ahead) & (mag >= behind)
    thin = np.where(keep, mag / peak, 0.0)

    strong = thin >= cfg.high_threshold
    candidate = thin >= cfg.low_threshold
    labels, n = ndimage.label(candidate, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return GrayImage.zeros(h, w)
    has_strong = np.zeros(n + 1, dtype=bool)
    has_strong[labels[strong]] = True
    has_strong[0] = False
    return GrayImage(has_strong[labels].astype(np.float64))


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an (H, W, 3) array in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb[..., :3] @ np.array([0.299, 0.587, 0.114])


def real_edges(mask: GrayImage, cfg: CannyConfig = CannyConfig(), image: GrayImage | None = None) -> GrayImage:
    """Target edges for the projection loss.

    Canny on ``image * mask`` when a grayscale photo is given, otherwise on
    the mask alone.
    """
    if image is None:
        return canny(mask, cfg)
    if (image.height, image.width) != (mask.height, mask.width):
        raise ValidationError("image and mask sizes differ")
    return canny(GrayImage(image.pixels * mask.pixels), cfg)


def project_pixels(points: np.ndarray, spec: ProjectionSpec) -> tuple:
    """Nearest pixel (row, col) of each point and a mask of in-bounds hits."""
    col = np.rint(points[:, 0]).astype(np.int64)
    row = np.rint(points[:, 1]).astype(np.int64)
    inside = (col >= 0) & (col < spec.width) & (row >= 0) & (row < spec.height)
    return row, col, inside


def mask_strands(strands: StrandSet, mask: GrayImage, spec: ProjectionSpec, threshold: float = 0.5) -> tuple:
    """Split strands into those mostly on the mask and the rest.

    A strand is inside when at least ``threshold`` of its projected points
    land on mask pixels above 0.5.
    """
    if (mask.width, mask.height) != (spec.width, spec.height):
        raise ValidationError(
            f"mask is {mask.width}x{mask.height}, projection is {spec.width}x{spec.height}"
        )
    on = mask.pixels > 0.5
    inside, outside = [], []
    for strand in strands:
        row, col, ok = project_pixels(strand.points, spec)
        hits = np.zeros(len(strand), dtype=bool)
        hits[ok] = on[row[ok], col[ok]]
        (inside if hits.mean() >= threshold else outside).append(strand)
    return StrandSet(tuple(inside)), StrandSet(tuple(outside))
