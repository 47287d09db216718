"""Fit braid parameters to coarse strands and an edge image.

The optimizer is plain Adam driven by central finite differences over a
handful of scalar parameters. The per-point shifts x', y' come from the
mid-line annotation and stay frozen.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from . import synth
from .losses import LossReport, LossWeights, chamfer_points, combine, projection_bce, regularizer_total
from .raster import ProjectionSpec, _edge_band
from .strands import GrayImage, MidLineAnnotation, StrandSet, ValidationError
from .synth import BraidParams, SyntheticBraid

log = logging.getLogger(__name__)

LEARNABLE = ("a", "b", "w", "t_scale", "radius", "shift_z")
DEFAULT_LEARNABLE = ("a", "b", "w", "t_scale", "shift_z")
# Central-difference steps, sized so each probe moves braid points by about
# 1e-3 px or less. w and t_scale multiply a phase of up to ~10 rad, so a unit
# change in them moves points ~200x farther than a unit change in a.
DEFAULT_FD_STEP = {
    "a": 1e-3,
    "b": 1e-3,
    "shift_z": 1e-3,
    "w": 1e-6,
    "t_scale": 1e-6,
    "radius": 1e-3,
}

# defaults applied by initialize()
A_WIDTH_RATIO = 1.75
INIT_B = 10.0
INIT_W = 1.0
INIT_RADIUS = 7.0
INIT_T_STEP = 0.05


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitConfig:
    epochs: int = 200
    lr: float = 1e-4
    lr_drop_epochs: tuple = (100, 133)
    lr_drop_factor: float = 0.5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    fd_step: dict = field(default_factory=lambda: dict(DEFAULT_FD_STEP))
    learnable: tuple = DEFAULT_LEARNABLE
    seed: int = 0
    # None: one braid point per pixel of mid-line length
    n_points: Optional[int] = None
    n_bunches: int = 3
    softness: float = 1.0

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValidationError("epochs must be an integer >= 1")
        if not self.lr > 0:
            raise ValidationError("lr must be > 0")
        if not 0 < self.lr_drop_factor <= 1:
            raise ValidationError("lr_drop_factor must lie in (0, 1]")
        unknown = set(self.learnable) - set(LEARNABLE)
        if unknown:
            raise ValidationError(f"unknown learnable parameters: {sorted(unknown)}")
        if len(set(self.learnable)) != len(self.learnable):
            raise ValidationError("learnable parameters listed twice")
        steps = dict(DEFAULT_FD_STEP)
        steps.update(self.fd_step)
        for name, h in steps.items():
            if name not in LEARNABLE:
                raise ValidationError(f"fd_step for unknown parameter {name!r}")
            if not h > 0:
                raise ValidationError(f"fd_step[{name!r}] must be > 0")
        object.__setattr__(self, "fd_step", steps)
        object.__setattr__(self, "learnable", tuple(self.learnable))
        object.__setattr__(self, "lr_drop_epochs", tuple(int(e) for e in self.lr_drop_epochs))
        if self.n_points is not None and self.n_points < 2:
            raise ValidationError("n_points must be >= 2")


@dataclass
class FitTrace:
    """Result of :func:`fit`.

    ``reports[e]`` and ``lrs[e]`` describe epoch ``e`` before its update.
    ``params`` is the best parameter set seen (lowest total loss), while
    ``last_params`` is where the optimizer stopped.
    """

    reports: list
    lrs: list
    params: BraidParams
    best_report: LossReport
    last_params: BraidParams
    initial_params: BraidParams
    wall_time: float
    diverged: bool = False


def lr_at(epoch: int, cfg: FitConfig) -> float:
    drops = sum(1 for e in cfg.lr_drop_epochs if e <= epoch)
    return cfg.lr * cfg.lr_drop_factor**drops


def _depth_anchor(midline: MidLineAnnotation, points: np.ndarray) -> Optional[float]:
    """Smallest z among points projecting within half the width of the mid-line."""
    a = midline.polyline[:-1]
    b = midline.polyline[1:]
    ab = b - a
    xy = points[:, :2]
    best = np.full(len(points), np.inf)
    for p0, d in zip(a, ab):
        dd = d.dot(d)
        if dd == 0:
            continue
        s = np.clip((xy - p0) @ d / dd, 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(xy - (p0 + s[:, None] * d), axis=1))
    near = best <= midline.width_px / 2.0
    if not np.any(near):
        return None
    return float(points[near, 2].min())


def initialize(midline: MidLineAnnotation, braid_strands: StrandSet, cfg: FitConfig = FitConfig()) -> BraidParams:
    """Starting parameters from the annotation and the braid-region strands.

    x' and y' follow the mid-line resampled by arc length; y' absorbs the
    ``k * t_step`` term so the braid rows coincide with the mid-line rows.
    z' is the smallest depth of any strand point within half the mid-line
    width of the mid-line.
    """
    if len(braid_strands) == 0:
        raise ValidationError("no braid strands to initialize from")
    n = cfg.n_points or int(round(midline.length())) + 1
    z0 = _depth_anchor(midline, braid_strands.points())
    if z0 is None:
        raise ValidationError("no braid points project near the mid-line; cannot set z'")
    xy = midline.resample(n)
    k = np.arange(n)
    return BraidParams(
        a=midline.width_px / A_WIDTH_RATIO,
        b=INIT_B,
        w=INIT_W,
        t_step=INIT_T_STEP,
        n_points=n,
        n_bunches=cfg.n_bunches,
        radius=INIT_RADIUS,
        shift_x=xy[:, 0],
        shift_y=xy[:, 1] - k * INIT_T_STEP,
        shift_z=z0,
    ).with_noise(cfg.seed)


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> tuple:
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValidationError("parameter, gradient and moment shapes differ")
    if not np.all(np.isfinite(grads)):
        raise FitError("non-finite gradient")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new, AdamState(m, v, t)


def gradient_fd(params: np.ndarray, learnable, loss_fn: Callable, fd_step) -> np.ndarray:
    """Central finite-difference gradient of ``loss_fn`` at ``params``.

    ``learnable`` is a boolean mask; masked-out entries get a zero gradient.
    ``fd_step`` is a scalar or one step per entry.
    """
    params = np.asarray(params, dtype=np.float64)
    mask = np.broadcast_to(np.asarray(learnable, dtype=bool), params.shape)
    steps = np.broadcast_to(np.asarray(fd_step, dtype=np.float64), params.shape)
    grads = np.zeros_like(params)
    for i in np.flatnonzero(mask):
        h = steps[i]
        up, down = params.copy(), params.copy()
        up[i] += h
        down[i] -= h
        f_up, f_down = float(loss_fn(up)), float(loss_fn(down))
        if not (np.isfinite(f_up) and np.isfinite(f_down)):
            raise FitError(f"non-finite loss while probing parameter {i}")
        grads[i] = (f_up - f_down) / (2.0 * h)
    return grads


class Objective:
    """Total loss of braid parameters against fixed coarse strands and edges.

    Pass ``real_edges=None`` to drop the projection term (it is then
    reported as 0).
    """

    def __init__(self, coarse: StrandSet, real_edges: Optional[GrayImage], weights: LossWeights = LossWeights(),
                 spec: Optional[ProjectionSpec] = None, softness: float = 1.0):
        self.coarse = coarse.points()
        if len(self.coarse) == 0:
            raise ValidationError("coarse strand set is empty")
        self.tree = cKDTree(self.coarse)
        self.real_edges = real_edges
        if real_edges is not None and spec is None:
            spec = ProjectionSpec(real_edges.width, real_edges.height)
        self.spec = spec
        self.weights = weights
        self.softness = softness

    def geometry(self, params: BraidParams) -> tuple:
        centers = synth.centerline_arrays(params)
        radii = (1.0 + np.asarray(params.noise))[:, None] * params.radius * np.ones(params.n_points)
        return centers, radii

    def __call__(self, params: BraidParams) -> LossReport:
        centers, radii = self.geometry(params)
        clouds = [centers.reshape(-1, 3)]
        for cl, r in zip(centers, radii):
            clouds.append(synth.tube_points(cl, r).reshape(-1, 3))
        l_pc = chamfer_points(np.concatenate(clouds), self.coarse, self.tree)
        if self.real_edges is not None:
            band = _edge_band(centers[:, :, :2].reshape(-1, 2), radii.reshape(-1), self.spec, self.softness)
            l_proj = projection_bce(self.real_edges, band, self.weights.bce_epsilon)
        else:
            l_proj = 0.0
        l_reg = regularizer_total(centers[:, :, 2], params.t_step * params.t_scale, params.b, self.weights)
        return combine(l_pc, l_proj, l_reg, self.weights)


def pack(params: BraidParams, names) -> np.ndarray:
    values = []
    for name in names:
        value = getattr(params, name)
        if np.ndim(value) != 0:
            raise ValidationError(f"{name} must be a scalar to be learnable")
        values.append(float(value))
    return np.array(values)


def unpack(params: BraidParams, names, values) -> BraidParams:
    changes = {name: float(v) for name, v in zip(names, values)}
    # keep the model well-posed: a >= 0 and positive scales
    if "a" in changes:
        changes["a"] = max(changes["a"], 0.0)
    for name in ("w", "t_scale", "radius"):
        if name in changes:
            changes[name] = max(changes[name], 1e-6)
    return params.replace(**changes)


def fit(coarse_braid: StrandSet, real_edges: Optional[GrayImage], midline: MidLineAnnotation,
        weights: LossWeights = LossWeights(), cfg: FitConfig = FitConfig(),
        init: Optional[BraidParams] = None, spec: Optional[ProjectionSpec] = None) -> FitTrace:
    """Optimize braid parameters; see :class:`FitTrace` for the result.

    ``init`` overrides :func:`initialize`.
    """
    start = time.perf_counter()
    params0 = initialize(midline, coarse_braid, cfg) if init is None else init.with_noise(cfg.seed)
    objective = Objective(coarse_braid, real_edges, weights, spec, cfg.softness)
    names = cfg.learnable
    steps = np.array([cfg.fd_step[n] for n in names])
    mask = np.ones(len(names), dtype=bool)

    def scalar_loss(x):
        return objective(unpack(params0, names, x)).l_total

    x = pack(params0, names)
    state = AdamState.zeros(len(names))
    reports, lrs = [], []
    best_x, best_report = x.copy(), None
    diverged = False
    for epoch in range(cfg.epochs):
        report = objective(unpack(params0, names, x))
        if not np.isfinite(report.l_total):
            log.warning("non-finite loss at epoch %d; stopping", epoch)
            diverged = True
            break
        reports.append(report)
        lr = lr_at(epoch, cfg)
        lrs.append(lr)
        if best_report is None or report.l_total < best_report.l_total:
            best_x, best_report = x.copy(), report
        try:
            grads = gradient_fd(x, mask, scalar_loss, steps)
        except FitError:
            log.warning("non-finite loss while probing at epoch %d; stopping", epoch)
            diverged = True
            break
        x, state = adam_step(x, grads, state, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        x = pack(unpack(params0, names, x), names)
        log.debug("epoch %d lr %.3g loss %.6f", epoch, lr, report.l_total)

    if not diverged:
        final = objective(unpack(params0, names, x))
        if np.isfinite(final.l_total) and final.l_total < best_report.l_total:
            best_x, best_report = x.copy(), final
    last = unpack(params0, names, x) if not diverged else unpack(params0, names, best_x)
    return FitTrace(
        reports=reports,
        lrs=lrs,
        params=unpack(params0, names, best_x),
        best_report=best_report,
        last_params=last,
        initial_params=params0,
        wall_time=time.perf_counter() - start,
        diverged=diverged,
    )


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with edge replication at both ends."""
    values = np.asarray(values, dtype=np.float64)
    half = window // 2
    padded = np.pad(values, (half, half), mode="edge")
    kernel = np.full(window, 1.0 / window)
    return np.convolve(padded, kernel, mode="valid")


def adjust_radius(braid: SyntheticBraid, window: int = 9) -> SyntheticBraid:
    """Smooth each bunch's radius profile along the braid and rebuild the tubes."""
    if window < 1 or window % 2 == 0:
        raise ValidationError("window must be a positive odd integer")
    profile = np.stack([moving_average(r, window) for r in braid.radius_profile])
    return synth.build(braid.params, braid.centerline_points(), profile)
