"""Snap coarse strands onto a fitted synthetic braid.

Pipeline: keep strands on the braid mask, allocate them to bunches, pull
points that stray outside the bunch tube back onto its surface, re-attach
the untouched tails, then downsample and smooth everything.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .raster import ProjectionSpec, mask_strands
from .strands import GrayImage, Strand, StrandSet, ValidationError
from .synth import SyntheticBraid


@dataclass(frozen=True)
class RefineConfig:
    inclusion_factor: float = 1.2
    downsample_keep_every: int = 2
    smooth_window: int = 5
    balance: bool = True
    mask_threshold: float = 0.5

    def __post_init__(self):
        if not self.inclusion_factor > 1:
            raise ValidationError("inclusion_factor must be > 1")
        if int(self.downsample_keep_every) != self.downsample_keep_every or self.downsample_keep_every < 1:
            raise ValidationError("downsample_keep_every must be an integer >= 1")
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValidationError("smooth_window must be a positive odd integer")


@dataclass
class Allocation:
    bunch_of: dict = field(default_factory=dict)
    rejected: list = field(default_factory=list)

    def sizes(self, n_bunches: int) -> list:
        counts = [0] * n_bunches
        for b in self.bunch_of.values():
            counts[b] += 1
        return counts


class _CenterlineIndex:
    """Nearest-centerline-point lookup over all bunches of a braid."""

    def __init__(self, braid: SyntheticBraid):
        centers = braid.centerline_points()
        self.n_bunches, self.n_points = centers.shape[:2]
        self.points = centers.reshape(-1, 3)
        self.radius = np.asarray(braid.radius_profile).reshape(-1)
        self.tree = cKDTree(self.points)

    def nearest(self, points):
        d, flat = self.tree.query(np.atleast_2d(points))
        return d, flat // self.n_points, flat % self.n_points, self.radius[flat]


def _bunch_distances(point: np.ndarray, braid: SyntheticBraid) -> np.ndarray:
    centers = braid.centerline_points()
    return np.linalg.norm(centers - point, axis=2).min(axis=1)


def allocate(coarse_braid: StrandSet, braid: SyntheticBraid, cfg: RefineConfig = RefineConfig()) -> Allocation:
    """Assign braid-region strands to bunches.

    A strand is kept when any of its points comes within
    ``inclusion_factor`` times the local tube radius of a centerline; it goes
    to the bunch closest to its top point. With balancing on, strands whose
    best and second-best bunches are nearly tied move first until bunch sizes
    differ by at most one.
    """
    index = _CenterlineIndex(braid)
    alloc = Allocation()
    dists = {}
    for strand in coarse_braid:
        d, _, _, r = index.nearest(strand.points)
        if not np.any(d <= cfg.inclusion_factor * r):
            alloc.rejected.append(strand.id)
            continue
        top = strand.points[np.argmin(strand.points[:, 1])]
        dists[strand.id] = _bunch_distances(top, braid)
        alloc.bunch_of[strand.id] = int(np.argmin(dists[strand.id]))
    if cfg.balance:
        _balance(alloc, dists, braid.n_bunches)
    return alloc


def _balance(alloc: Allocation, dists: dict, n_bunches: int) -> None:
    sizes = alloc.sizes(n_bunches)
    while max(sizes) - min(sizes) > 1:
        src = int(np.argmax(sizes))
        best = None
        for sid in sorted(s for s, b in alloc.bunch_of.items() if b == src):
            d = dists[sid]
            for dst in range(n_bunches):
                if sizes[dst] < sizes[src] - 1:
                    key = (d[dst] - d[src], sid, dst)
                    if best is None or key < best:
                        best = key
        _, sid, dst = best
        alloc.bunch_of[sid] = dst
        sizes[src] -= 1
        sizes[dst] += 1


def reconstruct_bunch(strands: StrandSet, braid: SyntheticBraid, bunch: int) -> StrandSet:
    """Pull points outside the bunch tube radially back onto its surface.

    Each point is compared with its nearest centerline point of ``bunch``;
    points farther than the local radius move along the line to that
    centerline point until they sit exactly at the radius. Points inside the
    tube are left alone. Moves are independent per point, so the
    top-to-bottom walk order does not change the result.
    """
    centerline = braid.centerlines[bunch].points
    radii = np.asarray(braid.radius_profile[bunch])
    tree = cKDTree(centerline)
    out = []
    for strand in strands:
        pts = strand.points
        d, k = tree.query(pts)
        r = radii[k]
        far = d > r
        new = pts.copy()
        if np.any(far):
            c = centerline[k[far]]
            new[far] = c + (pts[far] - c) * (r[far] / d[far])[:, None]
        out.append(strand.with_points(new) if np.any(far) else strand)
    return StrandSet(tuple(out))


def replace_and_attach(original: StrandSet, reconstructed: StrandSet, allocation: Allocation) -> StrandSet:
    """Swap allocated strands for their reconstructed heads plus original tails.

    The reconstructed strand covers the first ``len(reconstructed)`` points of
    the original; the remaining tail points are appended after translating
    them by the displacement of the junction point, so the junction segment
    keeps its original offset.
    """
    allocated = set(allocation.bunch_of)
    have = set(reconstructed.ids)
    if allocated != have:
        missing = sorted(allocated - have)
        extra = sorted(have - allocated)
        raise ValidationError(f"reconstructed ids do not match allocation (missing {missing}, extra {extra})")
    out = []
    for strand in original:
        if strand.id not in allocated:
            out.append(strand)
            continue
        head = reconstructed[strand.id].points
        n = len(head)
        if n > len(strand):
            raise ValidationError(f"strand {strand.id!r}: reconstruction is longer than the original")
        tail = strand.points[n:]
        if len(tail):
            tail = tail + (head[-1] - strand.points[n - 1])
            out.append(strand.with_points(np.concatenate([head, tail])))
        else:
            out.append(reconstructed[strand.id])
    return StrandSet(tuple(out))


def downsample(points: np.ndarray, keep_every: int) -> np.ndarray:
    """Every ``keep_every``-th point, always including the last one."""
    idx = list(range(0, len(points), keep_every))
    if idx[-1] != len(points) - 1:
        idx.append(len(points) - 1)
    return points[idx]


def smooth(points: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; windows shrink symmetrically near the ends."""
    n = len(points)
    half = window // 2
    csum = np.concatenate([np.zeros((1,) + points.shape[1:]), np.cumsum(points, axis=0)])
    i = np.arange(n)
    r = np.minimum(half, np.minimum(i, n - 1 - i))
    out = (csum[i + r + 1] - csum[i - r]) / (2 * r + 1)[:, None]
    # single-point windows copy exactly instead of differencing the cumsum
    out[r == 0] = points[r == 0]
    return out


def downsample_smooth(strands: StrandSet, cfg: RefineConfig = RefineConfig()) -> StrandSet:
    """Downsample, then smooth, every strand."""
    out = []
    for strand in strands:
        pts = smooth(downsample(strand.points, cfg.downsample_keep_every), cfg.smooth_window)
        out.append(strand.with_points(pts))
    return StrandSet(tuple(out))


def _head_length(points: np.ndarray, y_end: float) -> int:
    """Length of the prefix before the trailing run of points below ``y_end``."""
    below = points[:, 1] > y_end
    n = len(points)
    while n > 0 and below[n - 1]:
        n -= 1
    return max(n, 2)


def refine_all(coarse_full: StrandSet, mask: GrayImage, braid: SyntheticBraid,
               cfg: RefineConfig = RefineConfig(), spec: ProjectionSpec | None = None) -> StrandSet:
    """Full refinement. Strand ids and order are preserved."""
    if spec is None:
        spec = ProjectionSpec(mask.width, mask.height)
    inside, _ = mask_strands(coarse_full, mask, spec, cfg.mask_threshold)
    alloc = allocate(inside, braid, cfg) if len(inside) else Allocation()
    y_end = float(braid.centerline_points()[:, -1, 1].max())
    rebuilt = []
    for bunch in range(braid.n_bunches):
        ids = sorted(s for s, b in alloc.bunch_of.items() if b == bunch)
        heads = StrandSet(tuple(
            Strand(s, inside[s].points[: _head_length(inside[s].points, y_end)]) for s in ids
        ))
        rebuilt.extend(reconstruct_bunch(heads, braid, bunch))
    merged = replace_and_attach(coarse_full, StrandSet(tuple(rebuilt)), alloc)
    return downsample_smooth(merged, cfg)
