"""Fitting objective: point-cloud Chamfer, edge BCE and depth regularizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .strands import GrayImage, StrandSet, ValidationError


@dataclass(frozen=True)
class LossWeights:
    """Weights of the total loss.

    Attributes:
        lambda_reg_b: weight of |b - b_anchor| inside the regularizer.
        lambda_proj: weight of the projection BCE in the total.
        lambda_reg: weight of the regularizer in the total.
        bce_epsilon: clamp for predicted edge values before taking logs.
        b_anchor: target depth amplitude.
        lambda_pc: weight of the Chamfer term; 1 except in ablations.
    """

    lambda_reg_b: float = 1.0
    lambda_proj: float = 1e-4
    lambda_reg: float = 1e-3
    bce_epsilon: float = 1e-7
    b_anchor: float = 10.0
    lambda_pc: float = 1.0

    def __post_init__(self):
        for name in ("lambda_reg_b", "lambda_proj", "lambda_reg", "lambda_pc"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be >= 0")
        if not 0 < self.bce_epsilon < 0.5:
            raise ValidationError("bce_epsilon must lie in (0, 0.5)")


@dataclass(frozen=True)
class LossReport:
    l_pc: float
    l_proj: float
    l_reg: float
    l_total: float


def _as_points(points) -> np.ndarray:
    if isinstance(points, StrandSet):
        points = points.points()
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise ValidationError("Chamfer distance needs at least one point per set")
    return points


def chamfer_points(p1, p2, tree2: cKDTree | None = None) -> float:
    """Chamfer distance between two (N, 3) point arrays via k-d trees.

    ``tree2`` may carry a prebuilt tree over ``p2``.
    """
    p1, p2 = _as_points(p1), _as_points(p2)
    if tree2 is None:
        tree2 = cKDTree(p2)
    forward = np.mean(tree2.query(p1)[0])
    backward = np.mean(cKDTree(p1).query(p2)[0])
    # fixed summation order keeps chamfer(a, b) == chamfer(b, a) bit for bit
    return float(min(forward, backward) + max(forward, backward))


def chamfer(s1, s2) -> float:
    """Chamfer distance between the points of two strand sets.

    Mean nearest-neighbor distance from ``s1`` to ``s2`` plus the mean from
    ``s2`` to ``s1``. Strand identity is ignored. Accepts StrandSets or
    (N, 3) arrays.
    """
    return chamfer_points(s1, s2)


def projection_bce(real: GrayImage, synth: GrayImage, eps: float = 1e-7) -> float:
    """Mean pixel-wise binary cross-entropy of predicted edges ``synth``
    against target edges ``real``."""
    if not 0 < eps < 0.5:
        raise ValidationError("eps must lie in (0, 0.5)")
    target = real.pixels if isinstance(real, GrayImage) else np.asarray(real)
    pred = synth.pixels if isinstance(synth, GrayImage) else np.asarray(synth)
    if target.shape != pred.shape:
        raise ValidationError(f"image shapes differ: {target.shape} vs {pred.shape}")
    pred = np.clip(pred, eps, 1.0 - eps)
    bce = -(target * np.log(pred) + (1.0 - target) * np.log1p(-pred))
    return float(bce.mean())


def depth_regularizer(z, delta_t: float, b: float, lam: float = 1.0, b_anchor: float = 10.0) -> float:
    """Sample std of the forward-difference depth slope plus ``lam * |b - b_anchor|``.

    The derivative has N - 1 samples for N depths; the standard deviation
    divides by N - 2.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or len(z) < 3:
        raise ValidationError("depth regularizer needs at least 3 depth samples")
    if not delta_t > 0:
        raise ValidationError("delta_t must be > 0")
    slope = np.diff(z) / delta_t
    return float(np.std(slope, ddof=1) + lam * abs(b - b_anchor))


def regularizer_total(z_per_bunch, delta_t: float, b: float, weights: LossWeights) -> float:
    return float(sum(
        depth_regularizer(z, delta_t, b, weights.lambda_reg_b, weights.b_anchor)
        for z in z_per_bunch
    ))


def combine(l_pc: float, l_proj: float, l_reg: float, weights: LossWeights) -> LossReport:
    total = weights.lambda_pc * l_pc + weights.lambda_proj * l_proj + weights.lambda_reg * l_reg
    return LossReport(float(l_pc), float(l_proj), float(l_reg), float(total))


def total(s1, s2, real_edges: GrayImage, synth_edges: GrayImage, z_per_bunch, params, weights: LossWeights = LossWeights()) -> LossReport:
    """Weighted sum of the three loss terms.

    ``z_per_bunch`` are the centerline depths of each bunch; the regularizer
    is summed over them using the step ``params.t_step * params.t_scale``.
    """
    l_pc = chamfer(s1, s2)
    l_proj = projection_bce(real_edges, synth_edges, weights.bce_epsilon)
    l_reg = regularizer_total(z_per_bunch, params.t_step * params.t_scale, params.b, weights)
    return combine(l_pc, l_proj, l_reg, weights)
