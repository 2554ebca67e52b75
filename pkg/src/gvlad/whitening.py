"""PCA projection with optional whitening for compressing signatures."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import EncodedVector
from .errors import (
    BadMagicError,
    DegenerateInputError,
    InvalidArgumentError,
    NonFiniteValueError,
    TruncatedFileError,
    VersionMismatchError,
)

WHITENING_MAGIC = b"GVWM"
WHITENING_VERSION = 1
_HEADER = struct.Struct("<4sIIId")  # magic, version, D, rho, epsilon

DEFAULT_RHO = 128
DEFAULT_EPSILON = 1e-10


@dataclass(frozen=True)
class WhiteningModel:
    """Fitted PCA basis.

    ``projection`` row ``k`` is ``eigenvector_k / sqrt(eigenvalue_k + epsilon)``.
    """

    mean: np.ndarray
    projection: np.ndarray
    eigenvalues: np.ndarray
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        proj = np.asarray(self.projection, dtype=np.float64)
        lam = np.asarray(self.eigenvalues, dtype=np.float64).reshape(-1)
        if proj.ndim != 2 or proj.shape != (lam.shape[0], mean.shape[0]):
            raise InvalidArgumentError(
                f"inconsistent shapes: mean {mean.shape}, projection {proj.shape}, eigenvalues {lam.shape}"
            )
        if np.any(lam < 0) or np.any(np.diff(lam) > 0):
            raise InvalidArgumentError("eigenvalues must be non-negative and descending")
        for arr in (mean, proj, lam):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "projection", proj)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def rho(self) -> int:
        return self.projection.shape[0]

    @property
    def D(self) -> int:
        return self.mean.shape[0]

    @property
    def components(self) -> np.ndarray:
        """Unit eigenvectors as rows (plain PCA, no whitening)."""
        return self.projection * np.sqrt(self.eigenvalues + self.epsilon)[:, None]

    def truncate(self, rho: int) -> "WhiteningModel":
        """Keep only the leading ``rho`` components."""
        if int(rho) != rho or not 1 <= rho <= self.rho:
            raise InvalidArgumentError(f"rho must be in [1, {self.rho}], got {rho!r}")
        rho = int(rho)
        return WhiteningModel(self.mean, self.projection[:rho], self.eigenvalues[:rho], self.epsilon)

    def transform(self, X, whiten: bool = True, normalize: bool = True) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.D:
            raise InvalidArgumentError(f"vector dimension {X.shape[1]} does not match model D={self.D}")
        basis = self.projection if whiten else self.components
        Y = (X - self.mean) @ basis.T
        if normalize:
            norms = np.linalg.norm(Y, axis=1)
            nz = norms > 0.0
            Y[nz] /= norms[nz, None]
        return Y

    def inverse_transform(self, Y, whiten: bool = True) -> np.ndarray:
        """Map un-normalised projections back to signature space."""
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        if whiten:
            back = self.projection * (self.eigenvalues + self.epsilon)[:, None]
        else:
            back = self.components
        return Y @ back + self.mean

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(WHITENING_MAGIC, WHITENING_VERSION, self.D, self.rho, self.epsilon))
            fh.write(self.mean.astype("<f4").tobytes())
            fh.write(self.eigenvalues.astype("<f4").tobytes())
            fh.write(self.projection.astype("<f4").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "WhiteningModel":
        data = Path(path).read_bytes()
        if len(data) < _HEADER.size:
            raise TruncatedFileError(f"{path}: header truncated")
        magic, version, D, rho, eps = _HEADER.unpack_from(data)
        if magic != WHITENING_MAGIC:
            raise BadMagicError(f"{path}: bad magic {magic!r}")
        if version != WHITENING_VERSION:
            raise VersionMismatchError(f"{path}: unsupported whitening model version {version}")
        need = _HEADER.size + 4 * (D + rho + rho * D)
        if len(data) < need:
            raise TruncatedFileError(f"{path}: expected {need} bytes, got {len(data)}")
        off = _HEADER.size
        mean = np.frombuffer(data, "<f4", D, off)
        off += 4 * D
        lam = np.frombuffer(data, "<f4", rho, off)
        off += 4 * rho
        proj = np.frombuffer(data, "<f4", rho * D, off).reshape(rho, D)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(lam)) and np.all(np.isfinite(proj))):
            raise NonFiniteValueError(f"{path}: non-finite values")
        return cls(mean.astype(np.float64), proj.astype(np.float64), lam.astype(np.float64), eps)


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.atleast_2d(vectors.astype(np.float64))
    rows = [v.values if isinstance(v, EncodedVector) else np.asarray(v, dtype=np.float64) for v in vectors]
    if not rows:
        return np.empty((0, 0))
    if len({r.shape for r in rows}) != 1:
        raise InvalidArgumentError("all vectors must share one dimension")
    return np.stack(rows)


def _fix_signs(E: np.ndarray) -> np.ndarray:
    # columns are eigenvectors; make the largest-magnitude entry positive
    idx = np.argmax(np.abs(E), axis=0)
    signs = np.sign(E[idx, np.arange(E.shape[1])])
    signs[signs == 0] = 1.0
    return E * signs


def fit_whitening(vectors, rho: int = DEFAULT_RHO, epsilon: float = DEFAULT_EPSILON,
                  method: str = "auto") -> WhiteningModel:
    """Fit mean and top-``rho`` eigenpairs of the sample covariance (1/(n-1)).

    ``method="gram"`` diagonalises the n x n Gram matrix instead of the
    D x D covariance, which is what makes D = 65,536 tractable; ``"auto"``
    picks it whenever n < D.
    """
    X = _as_matrix(vectors)
    n = X.shape[0]
    if n < 2:
        raise DegenerateInputError(f"need at least 2 vectors to fit PCA, got {n}")
    D = X.shape[1]
    if int(rho) != rho or rho < 1 or rho > min(D, n - 1):
        raise InvalidArgumentError(f"rho must be in [1, min(D, n-1)] = [1, {min(D, n - 1)}], got {rho!r}")
    rho = int(rho)
    if method == "auto":
        method = "gram" if n < D else "covariance"
    mean = X.mean(axis=0)
    Xc = X - mean

    if method == "covariance":
        C = (Xc.T @ Xc) / (n - 1)
        lam, E = np.linalg.eigh(C)
        lam = lam[::-1][:rho]
        E = E[:, ::-1][:, :rho]
        lam = np.clip(lam, 0.0, None)
    elif method == "gram":
        G = (Xc @ Xc.T) / (n - 1)
        lam, U = np.linalg.eigh(G)
        lam = lam[::-1][:rho]
        U = U[:, ::-1][:, :rho]
        floor = 1e-12 * max(float(lam[0]), 0.0)
        if not np.all(lam > floor):
            rank = int(np.sum(lam > floor))
            raise DegenerateInputError(f"fit data has rank {rank} < rho={rho}")
        E = Xc.T @ U
        E /= np.linalg.norm(E, axis=0)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")

    E = _fix_signs(E)
    projection = E.T / np.sqrt(lam + epsilon)[:, None]
    return WhiteningModel(mean, projection, lam, epsilon)


def apply_whitening(v: EncodedVector, model: WhiteningModel, whiten: bool = True,
                    normalize: bool = True) -> EncodedVector:
    """Center, project to ``model.rho`` dimensions, then L2-normalise.

    With ``whiten=False`` the projection uses unit eigenvectors (plain PCA).
    """
    y = model.transform(v.values, whiten=whiten, normalize=normalize)[0]
    return EncodedVector(y, v.K, v.d, v.M, rho=model.rho)
