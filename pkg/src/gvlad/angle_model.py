"""Keypoint-angle membership learned by k-means on the circle.

Angles are embedded as points ``(r cos t, r sin t)`` so that ordinary
Euclidean k-means respects wrap-around at ``2*pi``. The learned centroids
define the bin of any angle by nearest-centroid lookup. Bin indices are
0-based throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptors import TWO_PI, wrap_angles
from .errors import (
    BadMagicError,
    EmptyInputError,
    InvalidArgumentError,
    VersionMismatchError,
)
from .kmeans import KMeansResult, kmeans, nearest_centroid

ANGLE_MODEL_FORMAT = "gvlad-angle-model"
ANGLE_MODEL_VERSION = 1


def angle_to_point(theta, r: float = 1.0) -> np.ndarray:
    """Map angle(s) onto the circle of radius ``r``; returns shape (..., 2)."""
    r = float(r)
    if not (math.isfinite(r) and r > 0.0):
        raise InvalidArgumentError(f"radius must be a positive finite number, got {r!r}")
    theta = wrap_angles(theta)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


@dataclass(frozen=True)
class AngleModel:
    centroids: np.ndarray
    r: float = 1.0

    def __post_init__(self):
        c = np.array(self.centroids, dtype=np.float64).reshape(-1, 2)
        if c.shape[0] < 1:
            raise InvalidArgumentError("an angle model needs at least one centroid")
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("angle centroids must be finite")
        if np.unique(c, axis=0).shape[0] != c.shape[0]:
            raise InvalidArgumentError("angle centroids must be distinct")
        if not (math.isfinite(self.r) and self.r > 0.0):
            raise InvalidArgumentError("radius must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "r", float(self.r))

    @property
    def M(self) -> int:
        return self.centroids.shape[0]

    def assign(self, theta) -> np.ndarray:
        """Vectorised :func:`assign_membership`."""
        pts = angle_to_point(np.atleast_1d(theta), self.r)
        labels, _ = nearest_centroid(pts, self.centroids)
        return labels

    def centroid_angles(self) -> np.ndarray:
        return np.mod(np.arctan2(self.centroids[:, 1], self.centroids[:, 0]), TWO_PI)

    def boundaries(self, resolution: int = 4096) -> np.ndarray:
        """Sorted angles in ``[0, 2*pi)`` where the membership changes.

        A dense scan locates each change, then bisection pins it down to
        roughly 1e-12 rad.
        """
        if self.M == 1:
            return np.empty(0)
        n = max(resolution, 64 * self.M)
        grid = np.arange(n) * (TWO_PI / n)
        lab = self.assign(grid)
        nxt = np.roll(lab, -1)
        out = []
        for i in np.flatnonzero(lab != nxt):
            lo, hi = grid[i], grid[i] + TWO_PI / n
            a = lab[i]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if self.assign(mid)[0] == a:
                    lo = mid
                else:
                    hi = mid
            out.append(math.fmod(hi, TWO_PI))
        return np.sort(np.array(out))

    def arcs(self, resolution: int = 4096) -> list[tuple[float, float, int]]:
        """Membership arcs as ``(start, end, bin)``; ``end`` may exceed ``2*pi`` for the wrapping arc."""
        b = self.boundaries(resolution)
        if b.size == 0:
            return [(0.0, TWO_PI, 0)]
        arcs = []
        for i, start in enumerate(b):
            end = b[(i + 1) % len(b)]
            if end <= start:
                end += TWO_PI
            mid = 0.5 * (start + end)
            arcs.append((float(start), float(end), int(self.assign(mid)[0])))
        return arcs

    def to_dict(self) -> dict:
        return {
            "format": ANGLE_MODEL_FORMAT,
            "version": ANGLE_MODEL_VERSION,
            "M": self.M,
            "r": self.r,
            "centroids": self.centroids.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AngleModel":
        if data.get("format") != ANGLE_MODEL_FORMAT:
            raise BadMagicError(f"not an angle model file (format={data.get('format')!r})")
        if data.get("version") != ANGLE_MODEL_VERSION:
            raise VersionMismatchError(f"unsupported angle model version {data.get('version')!r}")
        model = cls(np.asarray(data["centroids"], dtype=np.float64), r=float(data["r"]))
        if model.M != int(data["M"]):
            raise InvalidArgumentError("centroid count does not match M")
        return model

    def save(self, path) -> None:
        # json writes floats with repr, which round-trips float64 exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "AngleModel":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise BadMagicError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)


def learn_angle_membership(
    angles,
    M: int,
    seed: int = 0,
    restarts: int = 10,
    r: float = 1.0,
    return_result: bool = False,
):
    """Cluster keypoint angles into ``M`` circular bins.

    Parameters
    ----------
    angles : array_like
        Angles in radians; anything outside ``[0, 2*pi)`` is wrapped.
    M : int
        Number of angular bins.
    seed, restarts :
        Passed to :func:`gvlad.kmeans.kmeans`; the lowest-objective restart wins.
    r : float
        Radius of the embedding circle. Memberships do not depend on it.
    return_result : bool
        Also return the raw :class:`~gvlad.kmeans.KMeansResult`.
    """
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    if angles.size == 0:
        raise EmptyInputError("no angles to learn from")
    pts = angle_to_point(angles, r)
    result: KMeansResult = kmeans(pts, M, seed=seed, restarts=restarts)
    model = AngleModel(result.centroids, r=r)
    if return_result:
        return model, result
    return model


def assign_membership(theta: float, model: AngleModel) -> int:
    return int(model.assign(theta)[0])


def angle_histogram(angles, Q: int) -> np.ndarray:
    """L2-normalised histogram of angles over ``Q`` equal-width bins of ``[0, 2*pi)``."""
    if int(Q) != Q or Q < 1:
        raise InvalidArgumentError(f"Q must be a positive integer, got {Q!r}")
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    if angles.size == 0:
        raise EmptyInputError("cannot build a histogram from no angles")
    a = wrap_angles(angles)
    idx = np.minimum((a * (Q / TWO_PI)).astype(np.int64), Q - 1)
    hist = np.bincount(idx, minlength=Q).astype(np.float64)
    return hist / np.linalg.norm(hist)
