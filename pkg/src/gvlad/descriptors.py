"""Local descriptor containers.

A :class:`LocalDescriptor` is one keypoint: appearance vector plus dominant
angle, with optional position and scale kept for provenance. Most of the
library works on :class:`DescriptorSet`, the column-wise form holding every
keypoint of one image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import InvalidArgumentError

TWO_PI = 2.0 * np.pi


def wrap_angles(theta) -> np.ndarray:
    """Reduce angles to ``[0, 2*pi)``; values already in range are returned untouched."""
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise InvalidArgumentError("angles must be finite")
    out = theta.copy()
    bad = (out < 0.0) | (out >= TWO_PI)
    if np.any(bad):
        wrapped = np.mod(out[bad], TWO_PI)
        # mod of a tiny negative number can round up to exactly 2*pi
        wrapped[wrapped >= TWO_PI] = 0.0
        out[bad] = wrapped
    return out


@dataclass(frozen=True)
class LocalDescriptor:
    vector: np.ndarray
    angle: float
    position: Optional[tuple[float, float]] = None
    scale: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise InvalidArgumentError("descriptor vector must be a finite 1-D array")
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "angle", float(wrap_angles(self.angle)))


@dataclass(frozen=True)
class DescriptorSet:
    """All local descriptors of one image, stored column-wise.

    ``vectors`` has shape (n, d); ``angles`` has shape (n,) and is always in
    ``[0, 2*pi)``. ``positions`` (n, 2) and ``scales`` (n,) are optional.
    """

    vectors: np.ndarray
    angles: np.ndarray
    positions: Optional[np.ndarray] = None
    scales: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidArgumentError(f"vectors must be 2-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("descriptor vectors must be finite")
        a = wrap_angles(np.asarray(self.angles, dtype=np.float64).reshape(-1))
        if a.shape[0] != v.shape[0]:
            raise InvalidArgumentError("need exactly one angle per descriptor")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "angles", a)
        if self.positions is not None:
            p = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
            if p.shape[0] != v.shape[0]:
                raise InvalidArgumentError("positions length mismatch")
            object.__setattr__(self, "positions", p)
        if self.scales is not None:
            s = np.asarray(self.scales, dtype=np.float64).reshape(-1)
            if s.shape[0] != v.shape[0]:
                raise InvalidArgumentError("scales length mismatch")
            object.__setattr__(self, "scales", s)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def __iter__(self) -> Iterator[LocalDescriptor]:
        for i in range(len(self)):
            yield LocalDescriptor(
                vector=self.vectors[i],
                angle=self.angles[i],
                position=None if self.positions is None else tuple(self.positions[i]),
                scale=None if self.scales is None else float(self.scales[i]),
            )

    @classmethod
    def from_records(cls, records: Iterable[LocalDescriptor], dim: Optional[int] = None) -> "DescriptorSet":
        records = list(records)
        if not records:
            if dim is None:
                raise InvalidArgumentError("dimension required for an empty descriptor set")
            return cls(np.empty((0, dim)), np.empty(0))
        vectors = np.stack([r.vector for r in records])
        angles = np.array([r.angle for r in records])
        positions = None
        if all(r.position is not None for r in records):
            positions = np.array([r.position for r in records], dtype=np.float64)
        scales = None
        if all(r.scale is not None for r in records):
            scales = np.array([r.scale for r in records], dtype=np.float64)
        return cls(vectors, angles, positions, scales)


def as_descriptor_set(descriptors) -> DescriptorSet:
    """Accept a DescriptorSet, or an iterable of LocalDescriptor records."""
    if isinstance(descriptors, DescriptorSet):
        return descriptors
    return DescriptorSet.from_records(descriptors)


def stack_vectors(collection) -> np.ndarray:
    """Concatenate appearance vectors from descriptor sets, records or raw arrays."""
    if isinstance(collection, np.ndarray):
        return np.asarray(collection, dtype=np.float64)
    if isinstance(collection, DescriptorSet):
        return collection.vectors
    parts = []
    records = []
    for item in collection:
        if isinstance(item, DescriptorSet):
            parts.append(item.vectors)
        elif isinstance(item, LocalDescriptor):
            records.append(item.vector)
        else:
            parts.append(np.atleast_2d(np.asarray(item, dtype=np.float64)))
    if records:
        parts.append(np.stack(records))
    if not parts:
        return np.empty((0, 0))
    dims = {p.shape[1] for p in parts}
    if len(dims) > 1:
        raise InvalidArgumentError(f"inconsistent descriptor dimensions {sorted(dims)}")
    return np.concatenate(parts, axis=0)
