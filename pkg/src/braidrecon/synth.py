"""Procedural sinusoidal braid model.

Each bunch ``i`` of an ``n``-bunch braid follows

    x = a sin(w t + 2 pi i / n) + x'
    y = t0 + y'
    z = b sin(2 (w t + 2 pi i / n)) + z'

in image coordinates, where ``t = k * t_step * t_scale`` for point ``k`` and
``t0 = k * t_step`` is the unscaled parameter. With zero shifts, ``w = 1``
and ``t_scale = 1`` this is exactly the classic analytic three-strand braid
returned by :func:`midlines`.

Bunches are expanded into tubes of radius ``(1 + noise_i) * radius``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .strands import Point3, Strand, StrandSet, ValidationError

# surface strands per bunch, in addition to the centerline
N_SURFACE = 6
NOISE_RANGE = 0.1

Shift = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class BraidParams:
    """Parameters of the synthetic braid.

    ``shift_x``, ``shift_y`` and ``shift_z`` are scalars or per-point arrays
    of length ``n_points``. ``noise`` holds one radius perturbation per bunch;
    when None it is drawn from the seed passed to :func:`generate`.
    """

    a: float = 20.0
    b: float = 10.0
    w: float = 1.0
    t_step: float = 0.05
    n_points: int = 200
    n_bunches: int = 3
    radius: float = 7.0
    shift_x: Shift = 0.0
    shift_y: Shift = 0.0
    shift_z: Shift = 0.0
    noise: Optional[tuple] = None
    t_scale: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "w", "t_step", "radius", "t_scale"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.a < 0:
            raise ValidationError(f"a must be >= 0, got {self.a}")
        if self.w <= 0:
            raise ValidationError(f"w must be > 0, got {self.w}")
        if self.t_step <= 0:
            raise ValidationError(f"t_step must be > 0, got {self.t_step}")
        if self.t_scale <= 0:
            raise ValidationError(f"t_scale must be > 0, got {self.t_scale}")
        if self.radius <= 0:
            raise ValidationError(f"radius must be > 0, got {self.radius}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValidationError(f"n_points must be an integer >= 2, got {self.n_points}")
        if int(self.n_bunches) != self.n_bunches or self.n_bunches < 2:
            raise ValidationError(f"n_bunches must be an integer >= 2, got {self.n_bunches}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "n_bunches", int(self.n_bunches))
        for name in ("shift_x", "shift_y", "shift_z"):
            object.__setattr__(self, name, self._check_shift(name, getattr(self, name)))
        if self.noise is not None:
            noise = tuple(float(v) for v in self.noise)
            if len(noise) != self.n_bunches:
                raise ValidationError(
                    f"noise needs {self.n_bunches} entries, got {len(noise)}"
                )
            if not all(abs(v) < 1 for v in noise):
                raise ValidationError("noise entries must satisfy |noise_i| < 1")
            object.__setattr__(self, "noise", noise)

    def _check_shift(self, name, value):
        if np.ndim(value) == 0:
            value = float(value)
            if not np.isfinite(value):
                raise ValidationError(f"{name} must be finite")
            return value
        value = np.array(value, dtype=np.float64)
        if value.shape != (self.n_points,):
            raise ValidationError(
                f"{name} must be scalar or have shape ({self.n_points},), got {value.shape}"
            )
        if not np.all(np.isfinite(value)):
            raise ValidationError(f"{name} must be finite")
        value.flags.writeable = False
        return value

    def replace(self, **changes) -> "BraidParams":
        return dataclasses.replace(self, **changes)

    def with_noise(self, seed: int) -> "BraidParams":
        """Fill in ``noise`` from ``seed`` if it is not set yet."""
        if self.noise is not None:
            return self
        return self.replace(noise=draw_noise(self.n_bunches, seed))


def draw_noise(n_bunches: int, seed: int) -> tuple:
    rng = np.random.default_rng(seed)
    return tuple(float(v) for v in rng.uniform(-NOISE_RANGE, NOISE_RANGE, n_bunches))


@dataclass(frozen=True, eq=False)
class SyntheticBraid:
    """Generated braid geometry.

    Attributes:
        centerlines: one Strand per bunch, ids ``L0``, ``L1``, ...
        tube_strands: centerline plus surface strands of every bunch.
        bunch_of: tube strand id -> bunch index.
        radius_profile: (n_bunches, n_points) tube radius along each bunch.
        params: the parameters the geometry was generated from.
    """

    centerlines: tuple
    tube_strands: StrandSet
    bunch_of: dict
    radius_profile: np.ndarray
    params: BraidParams

    @property
    def n_bunches(self) -> int:
        return len(self.centerlines)

    def centerline_points(self) -> np.ndarray:
        """(n_bunches, n_points, 3) array of all centerlines."""
        return np.stack([c.points for c in self.centerlines])


def midline_points(a: float, b: float, t_values, n_bunches: int = 3) -> np.ndarray:
    """Analytic braid mid-lines evaluated at ``t_values``.

    Bunch ``i`` is ``(a sin(t + p_i), t, b sin(2 (t + p_i)))`` with phase
    ``p_i = 2 pi i / n_bunches``. Returns an (n_bunches, len(t_values), 3)
    array.
    """
    t = np.asarray(t_values, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise ValidationError("t_values must be a non-empty 1-D sequence")
    if n_bunches < 2:
        raise ValidationError("n_bunches must be >= 2")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("t_values must be strictly increasing")
    out = np.empty((n_bunches, t.size, 3))
    for i in range(n_bunches):
        phase = t + 2.0 * np.pi * i / n_bunches
        out[i] = np.column_stack([a * np.sin(phase), t, b * np.sin(2.0 * phase)])
    return out


def midlines(a: float, b: float, t_values, n_bunches: int = 3) -> list:
    """:func:`midline_points` wrapped as Strands ``L0``, ``L1``, ...

    Needs at least two t values, since a Strand is a polyline.
    """
    return [Strand(f"L{i}", pts) for i, pts in enumerate(midline_points(a, b, t_values, n_bunches))]


def centerline_arrays(params: BraidParams) -> np.ndarray:
    """(n_bunches, n_points, 3) centerline coordinates for ``params``."""
    k = np.arange(params.n_points, dtype=np.float64)
    t = k * params.t_step * params.t_scale
    y = k * params.t_step + params.shift_y
    out = np.empty((params.n_bunches, params.n_points, 3))
    for i in range(params.n_bunches):
        phase = params.w * t + 2.0 * np.pi * i / params.n_bunches
        out[i, :, 0] = params.a * np.sin(phase) + params.shift_x
        out[i, :, 1] = y
        out[i, :, 2] = params.b * np.sin(2.0 * phase) + params.shift_z
    return out


def _transport_frames(points: np.ndarray) -> tuple:
    """Unit normal and binormal along a polyline by parallel transport."""
    tangent = np.gradient(points, axis=0)
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    n = len(points)
    normals = np.empty_like(points)
    # seed with the world axis least aligned with the first tangent
    seed = np.eye(3)[np.argmin(np.abs(tangent[0]))]
    normal = seed - seed.dot(tangent[0]) * tangent[0]
    normal /= np.linalg.norm(normal)
    normals[0] = normal
    for k in range(1, n):
        normal = normal - normal.dot(tangent[k]) * tangent[k]
        normal /= np.linalg.norm(normal)
        normals[k] = normal
    binormals = np.cross(tangent, normals)
    return normals, binormals


def tube_points(centerline: np.ndarray, radii: np.ndarray, n_surface: int = N_SURFACE) -> np.ndarray:
    """(n_surface, n_points, 3) surface strands around ``centerline``."""
    normals, binormals = _transport_frames(centerline)
    angles = 2.0 * np.pi * np.arange(n_surface) / n_surface
    offsets = (
        np.cos(angles)[:, None, None] * normals[None]
        + np.sin(angles)[:, None, None] * binormals[None]
    )
    return centerline[None] + radii[None, :, None] * offsets


def build(params: BraidParams, centerlines: np.ndarray, radius_profile: np.ndarray) -> SyntheticBraid:
    lines, tubes, bunch_of = [], [], {}
    for i, cl in enumerate(centerlines):
        lines.append(Strand(f"L{i}", cl))
        tubes.append(Strand(f"b{i}c", cl))
        bunch_of[f"b{i}c"] = i
        for j, pts in enumerate(tube_points(cl, radius_profile[i])):
            tubes.append(Strand(f"b{i}s{j}", pts))
            bunch_of[f"b{i}s{j}"] = i
    profile = np.array(radius_profile, dtype=np.float64)
    profile.flags.writeable = False
    return SyntheticBraid(tuple(lines), StrandSet(tuple(tubes)), bunch_of, profile, params)


def generate(params: BraidParams, seed: int = 0) -> SyntheticBraid:
    """Generate centerlines and tube strands for ``params``.

    ``seed`` only matters when ``params.noise`` is None.
    """
    params = params.with_noise(seed)
    centerlines = centerline_arrays(params)
    scale = 1.0 + np.asarray(params.noise)
    profile = np.repeat((scale * params.radius)[:, None], params.n_points, axis=1)
    return build(params, centerlines, profile)


def centerline_distance(p, braid: SyntheticBraid, bunch: int) -> tuple:
    """Distance from ``p`` to the nearest centerline point of ``bunch``.

    Returns ``(distance, index)``; ties go to the smaller index.
    """
    if not 0 <= bunch < braid.n_bunches:
        raise IndexError(f"bunch {bunch} out of range")
    d = np.linalg.norm(braid.centerlines[bunch].points - np.asarray(p, dtype=np.float64), axis=1)
    k = int(np.argmin(d))
    return float(d[k]), k


__all__ = [
    "BraidParams",
    "Point3",
    "SyntheticBraid",
    "centerline_arrays",
    "centerline_distance",
    "draw_noise",
    "generate",
    "midline_points",
    "midlines",
    "tube_points",
]
