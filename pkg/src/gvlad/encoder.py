"""VLAD / gVLAD aggregation and the normalisation chain.

Layout of an encoded vector is word-major, then angle bin, then feature
dimension: position ``(i * M + j) * d + t`` holds component ``t`` of the
residual sum for visual word ``i`` and angle bin ``j``. With ``M == 1`` this
is exactly the plain VLAD layout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .angle_model import AngleModel
from .codebook import Codebook
from .descriptors import as_descriptor_set
from .errors import ConfigurationError, EmptyInputError, InvalidArgumentError

LAYOUT = "word-major/angle-bin/feature"


@dataclass(frozen=True)
class EncodedVector:
    """An image signature plus the structure needed to interpret it.

    ``rho`` is 0 for a raw (unwhitened) signature of length ``K*M*d`` and the
    retained dimension after PCA projection otherwise.
    """

    values: np.ndarray
    K: int
    d: int
    M: int = 1
    rho: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        expected = self.rho if self.rho else self.K * self.M * self.d
        if v.shape[0] != expected:
            raise InvalidArgumentError(
                f"vector length {v.shape[0]} does not match K*M*d={self.K * self.M * self.d}"
                + (f" / rho={self.rho}" if self.rho else "")
            )
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def layout(self) -> str:
        return "pca" if self.rho else LAYOUT

    def blocks(self) -> np.ndarray:
        """View as (K, M, d); only valid before projection."""
        if self.rho:
            raise ConfigurationError("a projected vector has no block structure")
        return self.values.reshape(self.K, self.M, self.d)

    def with_values(self, values) -> "EncodedVector":
        return replace(self, values=values)


def _aggregate(vectors: np.ndarray, words: np.ndarray, bins: np.ndarray,
               centroids: np.ndarray, M: int) -> np.ndarray:
    K, d = centroids.shape
    out = np.zeros((K * M, d), dtype=np.float64)
    cell = words * M + bins
    # Summation order is fixed by sorting on (cell, vector components), which
    # makes the result independent of input order.
    keys = [vectors[:, t] for t in range(d - 1, -1, -1)] + [cell]
    order = np.lexsort(keys)
    cell_sorted = cell[order]
    residuals = vectors[order] - centroids[words[order]]
    starts = np.concatenate(([0], np.flatnonzero(np.diff(cell_sorted)) + 1))
    sums = np.add.reduceat(residuals.astype(np.longdouble), starts, axis=0)
    out[cell_sorted[starts]] = sums.astype(np.float64)
    return out.reshape(-1)


def _check(descriptors, codebook: Codebook):
    ds = as_descriptor_set(descriptors)
    if len(ds) == 0:
        raise EmptyInputError("cannot encode an image with no descriptors")
    if ds.dim != codebook.d:
        raise InvalidArgumentError(f"descriptor dimension {ds.dim} does not match codebook d={codebook.d}")
    return ds


def vlad_encode(descriptors, codebook: Codebook) -> EncodedVector:
    ds = _check(descriptors, codebook)
    words = codebook.assign(ds.vectors)
    values = _aggregate(ds.vectors, words, np.zeros_like(words), codebook.centroids, 1)
    return EncodedVector(values, codebook.K, codebook.d, 1)


def gvlad_encode(descriptors, codebook: Codebook, angle_model: AngleModel) -> EncodedVector:
    """Residual sums split by (visual word, angle bin)."""
    ds = _check(descriptors, codebook)
    words = codebook.assign(ds.vectors)
    bins = angle_model.assign(ds.angles)
    values = _aggregate(ds.vectors, words, bins, codebook.centroids, angle_model.M)
    return EncodedVector(values, codebook.K, codebook.d, angle_model.M)


def intra_normalize(v: EncodedVector) -> EncodedVector:
    blocks = v.values.reshape(v.K * v.M, v.d).copy()
    norms = np.linalg.norm(blocks, axis=1)
    nz = norms > 0.0
    blocks[nz] /= norms[nz, None]
    return v.with_values(blocks.reshape(-1))


def inter_zscore_normalize(v: EncodedVector, zero_tol: float = 1e-12) -> EncodedVector:
    """Standardise every within-word coordinate across the K visual words.

    Population standard deviation is used. A slice whose deviation is at
    most ``zero_tol`` times its largest magnitude counts as constant and is
    set to zero.
    """
    if v.K < 2:
        raise ConfigurationError("inter-word Z-score needs at least two visual words")
    x = v.values.reshape(v.K, v.M * v.d)
    mean = x.mean(axis=0)
    centered = x - mean
    std = np.sqrt(np.mean(centered * centered, axis=0))
    scale = np.abs(x).max(axis=0)
    const = std <= zero_tol * scale
    out = np.zeros_like(x)
    live = ~const
    out[:, live] = centered[:, live] / std[live]
    return v.with_values(out.reshape(-1))


def l2_normalize(v: EncodedVector) -> EncodedVector:
    norm = np.linalg.norm(v.values)
    if norm == 0.0:
        return v.with_values(v.values.copy())
    return v.with_values(v.values / norm)


def power_normalize(v: EncodedVector, alpha: float = 0.5) -> EncodedVector:
    """Signed power normalisation (``alpha=0.5`` is signed square root); comparison switch only."""
    return v.with_values(np.sign(v.values) * np.abs(v.values) ** alpha)


def encode_image(
    descriptors,
    codebook: Codebook,
    angle_model: Optional[AngleModel] = None,
    *,
    intra: bool = True,
    zscore: bool = True,
    l2: bool = True,
    ssr: bool = False,
) -> EncodedVector:
    """Full signature of one image.

    Aggregation is gVLAD when ``angle_model`` is given and plain VLAD
    otherwise, followed by the enabled stages in the fixed order
    intra-normalisation, inter-word Z-score, global L2. ``ssr`` inserts a
    signed square root right after aggregation.
    """
    if angle_model is None:
        v = vlad_encode(descriptors, codebook)
    else:
        v = gvlad_encode(descriptors, codebook, angle_model)
    if ssr:
        v = power_normalize(v)
    if intra:
        v = intra_normalize(v)
    if zscore:
        v = inter_zscore_normalize(v)
    if l2:
        v = l2_normalize(v)
    return v
