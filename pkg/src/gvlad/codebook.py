"""Visual vocabulary: training, nearest-word assignment and adaptation."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptors import stack_vectors
from .errors import (
    BadMagicError,
    EmptyInputError,
    InvalidArgumentError,
    NonFiniteValueError,
    TruncatedFileError,
    VersionMismatchError,
)
from .kmeans import KMeansResult, kmeans, nearest_centroid

CODEBOOK_MAGIC = b"GVCB"
CODEBOOK_VERSION = 1
_HEADER = struct.Struct("<4sIII")  # magic, version, K, d

DEFAULT_K = 256


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray

    def __post_init__(self):
        c = np.array(self.centroids, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise InvalidArgumentError(f"centroids must be a non-empty K x d matrix, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("centroids must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    def assign(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.d:
            raise InvalidArgumentError(
                f"descriptor dimension {x.shape[-1] if x.ndim else None} does not match codebook d={self.d}"
            )
        labels, _ = nearest_centroid(x, self.centroids)
        return labels

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(CODEBOOK_MAGIC, CODEBOOK_VERSION, self.K, self.d))
            fh.write(self.centroids.astype("<f4").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "Codebook":
        data = Path(path).read_bytes()
        if len(data) < _HEADER.size:
            raise TruncatedFileError(f"{path}: header truncated")
        magic, version, K, d = _HEADER.unpack_from(data)
        if magic != CODEBOOK_MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}")
        if version != CODEBOOK_VERSION:
            raise VersionMismatchError(f"{path}: unsupported codebook version {version}")
        need = _HEADER.size + 4 * K * d
        if len(data) < need:
            raise TruncatedFileError(f"{path}: expected {need} bytes, got {len(data)}")
        c = np.frombuffer(data, dtype="<f4", count=K * d, offset=_HEADER.size).reshape(K, d)
        if not np.all(np.isfinite(c)):
            raise NonFiniteValueError(f"{path}: non-finite centroid values")
        return cls(c.astype(np.float64))


def train_codebook(descriptors, K: int = DEFAULT_K, seed: int = 0, restarts: int = 10,
                   max_iter: int = 100, tol: float = 1e-7, return_result: bool = False):
    """k-means vocabulary over all training descriptors.

    ``descriptors`` may be an (n, d) array, a DescriptorSet, or an iterable
    of either.
    """
    x = stack_vectors(descriptors)
    if x.size == 0:
        raise EmptyInputError("no training descriptors")
    result: KMeansResult = kmeans(x, K, seed=seed, restarts=restarts, max_iter=max_iter, tol=tol)
    cb = Codebook(result.centroids)
    return (cb, result) if return_result else cb


def assign_nn(x, codebook: Codebook) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidArgumentError("assign_nn takes a single descriptor vector")
    return int(codebook.assign(x[None, :])[0])


def adapt_codebook(source: Codebook, target_descriptors, divisor: str = "per_word") -> Codebook:
    """Re-estimate each visual word from a new dataset.

    Every target descriptor is assigned to its nearest source word. With
    ``divisor="per_word"`` (default) word ``i`` becomes the mean of the
    descriptors assigned to it. ``divisor="global"`` divides each word's sum
    by the total descriptor count instead, the literal printed rule, which
    shrinks words toward the origin. Words that receive nothing keep their
    source centroid under either rule.
    """
    if divisor not in ("per_word", "global"):
        raise InvalidArgumentError(f"divisor must be 'per_word' or 'global', got {divisor!r}")
    x = stack_vectors(target_descriptors)
    if x.shape[0] == 0:
        raise EmptyInputError("no target descriptors to adapt to")
    if x.shape[1] != source.d:
        raise InvalidArgumentError(f"target dimension {x.shape[1]} does not match codebook d={source.d}")
    labels = source.assign(x)
    counts = np.bincount(labels, minlength=source.K)
    sums = np.zeros((source.K, source.d), dtype=np.float64)
    np.add.at(sums, labels, x)
    adapted = np.array(source.centroids, copy=True)
    hit = counts > 0
    if divisor == "per_word":
        adapted[hit] = sums[hit] / counts[hit, None]
    else:
        adapted[hit] = sums[hit] / x.shape[0]
    return Codebook(adapted)
