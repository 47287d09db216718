"""
Geometric and image containers shared by every stage of the braid pipeline.

Conventions: x grows rightward, y grows downward (image rows, the braiding
direction) and z grows toward the camera. Strands and mid-lines are stored
root-first, i.e. with the smallest y at index 0.

All containers are immutable: numpy payloads are copied on construction and
flagged read-only.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np


class ValidationError(ValueError):
    """Raised when data violates a container invariant."""


class DuplicateIdError(ValidationError):
    pass


class DegenerateStrandError(ValidationError):
    pass


class NonFiniteCoordinateError(ValidationError):
    pass


class Point3(NamedTuple):
    x: float
    y: float
    z: float


StrandId = str


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.flags.writeable = False
    return array


def _check_points(strand_id, points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise DegenerateStrandError(
            f"strand {strand_id!r}: expected (n, 3) points, got shape {points.shape}"
        )
    if len(points) < 2:
        raise DegenerateStrandError(
            f"strand {strand_id!r}: needs at least 2 points, got {len(points)}"
        )
    if not np.all(np.isfinite(points)):
        raise NonFiniteCoordinateError(f"strand {strand_id!r}: non-finite coordinate")
    if np.any(np.all(points[1:] == points[:-1], axis=1)):
        raise DegenerateStrandError(
            f"strand {strand_id!r}: consecutive points coincide"
        )
    return points


@dataclass(frozen=True, eq=False)
class Strand:
    """An ordered 3D polyline with an opaque identifier.

    Attributes:
        id: Identifier, unique inside a StrandSet.
        points: (n, 3) float array, n >= 2, read-only.
    """

    id: StrandId
    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "points", _frozen(_check_points(self.id, self.points)))

    def __len__(self) -> int:
        return len(self.points)

    def with_points(self, points) -> "Strand":
        return Strand(self.id, points)


@dataclass(frozen=True, eq=False)
class StrandSet:
    """A collection of strands with unique ids, kept in insertion order."""

    strands: tuple

    def __post_init__(self):
        strands = tuple(self.strands)
        for strand in strands:
            if not isinstance(strand, Strand):
                raise ValidationError(f"expected Strand, got {type(strand).__name__}")
        _check_unique([s.id for s in strands])
        object.__setattr__(self, "strands", strands)

    def __iter__(self) -> Iterator[Strand]:
        return iter(self.strands)

    def __len__(self) -> int:
        return len(self.strands)

    def __getitem__(self, strand_id: StrandId) -> Strand:
        return self._index[str(strand_id)]

    def __contains__(self, strand_id) -> bool:
        return str(strand_id) in self._index

    @property
    def _index(self) -> dict:
        index = self.__dict__.get("_cached_index")
        if index is None:
            index = {s.id: s for s in self.strands}
            object.__setattr__(self, "_cached_index", index)
        return index

    @property
    def ids(self) -> list:
        return [s.id for s in self.strands]

    def points(self) -> np.ndarray:
        """All points of all strands stacked into one (N, 3) array."""
        if not self.strands:
            return np.zeros((0, 3))
        return np.concatenate([s.points for s in self.strands])

    @property
    def n_points(self) -> int:
        return sum(len(s) for s in self.strands)

    def subset(self, ids: Iterable[StrandId]) -> "StrandSet":
        return StrandSet(tuple(self[i] for i in ids))

    @classmethod
    def from_arrays(cls, items: Iterable) -> "StrandSet":
        """Build a set from ``(id, points)`` pairs."""
        return cls(tuple(Strand(i, p) for i, p in items))


def _check_unique(ids: Sequence[str]) -> None:
    seen = set()
    for strand_id in ids:
        if strand_id in seen:
            raise DuplicateIdError(f"duplicate strand id {strand_id!r}")
        seen.add(strand_id)


StrandLike = Union[Strand, tuple]


def validate(strands: Iterable[StrandLike]) -> None:
    """Check strand invariants on raw or constructed data.

    Accepts Strand objects or ``(id, points)`` pairs so that data can be
    checked before construction. Returns None when everything holds.

    Raises:
        DuplicateIdError, DegenerateStrandError, NonFiniteCoordinateError
    """
    ids = []
    for item in strands:
        if isinstance(item, Strand):
            strand_id, points = item.id, item.points
        else:
            strand_id, points = item
        _check_points(strand_id, points)
        ids.append(str(strand_id))
    _check_unique(ids)


def arc_length(strand: Strand) -> float:
    """Sum of segment lengths of a strand."""
    return float(np.linalg.norm(np.diff(strand.points, axis=0), axis=1).sum())


def orient_root_first(strand: Strand) -> Strand:
    """Return the strand with its smallest-y end first."""
    if strand.points[0, 1] > strand.points[-1, 1]:
        return strand.with_points(strand.points[::-1])
    return strand


@dataclass(frozen=True, eq=False)
class GrayImage:
    """An H x W grid of values in [0, 1]; pixel (row, col) sits at x=col, y=row."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValidationError(f"image must be a non-empty 2D array, got {pixels.shape}")
        if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
            raise ValidationError("image pixels must lie in [0, 1]")
        object.__setattr__(self, "pixels", _frozen(pixels))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def zeros(cls, height: int, width: int) -> "GrayImage":
        return cls(np.zeros((height, width)))


@dataclass(frozen=True, eq=False)
class MidLineAnnotation:
    """Braid center path in pixels plus the braid width measured on the mask.

    Use :meth:`from_points` for raw annotations; it puts the smallest-y end
    first. The constructor itself only validates.
    """

    polyline: np.ndarray
    width_px: float

    def __post_init__(self):
        polyline = np.asarray(self.polyline, dtype=np.float64)
        if polyline.ndim != 2 or polyline.shape[1] != 2 or len(polyline) < 2:
            raise ValidationError("mid-line needs at least 2 points of (x, y)")
        if not np.all(np.isfinite(polyline)):
            raise NonFiniteCoordinateError("mid-line has a non-finite coordinate")
        if not (np.isfinite(self.width_px) and self.width_px > 0):
            raise ValidationError(f"width_px must be > 0, got {self.width_px}")
        if np.any(np.diff(polyline[:, 1]) < 0):
            raise ValidationError("mid-line must be monotone in y, root first")
        if np.linalg.norm(polyline[-1] - polyline[0]) == 0:
            raise ValidationError("mid-line has zero extent")
        object.__setattr__(self, "polyline", _frozen(polyline))
        object.__setattr__(self, "width_px", float(self.width_px))

    @classmethod
    def from_points(cls, points, width_px: float) -> "MidLineAnnotation":
        points = np.asarray(points, dtype=np.float64)
        if len(points) >= 2 and points[0, 1] > points[-1, 1]:
            points = points[::-1]
        return cls(points, width_px)

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.polyline, axis=0), axis=1).sum())

    def resample(self, n: int) -> np.ndarray:
        """n points spaced uniformly by arc length, endpoints included."""
        seg = np.linalg.norm(np.diff(self.polyline, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        keep = np.concatenate([[True], seg > 0])
        cum, poly = cum[keep], self.polyline[keep]
        s = np.linspace(0.0, cum[-1], n)
        return np.column_stack([np.interp(s, cum, poly[:, 0]), np.interp(s, cum, poly[:, 1])])
