"""On-disk formats: descriptor files, signature files, ground truth, manifests, rankings.

All binary formats are little-endian with 32-bit float payloads and start
with a 4-byte magic followed by a uint32 format version.

Descriptor file (``GVDS``)::

    magic[4] version:u32 d:u32 count:u64
    count x (px:f32 py:f32 scale:f32 angle:f32 vector:f32[d])

Signature file (``GVEV``)::

    magic[4] version:u32 K:u32 d:u32 M:u32 rho:u32 count:u64
    count x f32[rho or K*M*d]
    count x (len:u32 utf8-id[len])

Angles in descriptor files are radians. Any external extractor (OpenCV
SURF/SIFT, RootSIFT, ...) can be bridged by writing this layout; see
:func:`write_descriptor_file`.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .descriptors import TWO_PI, DescriptorSet
from .encoder import EncodedVector
from .errors import (
    BadMagicError,
    FormatError,
    NonFiniteValueError,
    TruncatedFileError,
    ValidationError,
    VersionMismatchError,
)
from .retrieval import DatasetIndex, GroundTruth, QueryTruth, RankingResult, build_index

DESCRIPTOR_MAGIC = b"GVDS"
DESCRIPTOR_VERSION = 1
_DESC_HEADER = struct.Struct("<4sIIQ")

VECTOR_MAGIC = b"GVEV"
VECTOR_VERSION = 1
_VEC_HEADER = struct.Struct("<4sIIIIIQ")

MANIFEST_FORMAT = "gvlad-manifest"
MANIFEST_VERSION = 1

# largest float32 strictly below 2*pi
_MAX_ANGLE_F32 = np.nextafter(np.float32(TWO_PI), np.float32(0.0))


def _check_magic(path, magic, expected, version, expected_version):
    if magic != expected:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {expected!r}")
    if version != expected_version:
        raise VersionMismatchError(f"{path}: format version {version}, expected {expected_version}")


# -- descriptors -------------------------------------------------------------

def write_descriptor_file(path, descriptors: DescriptorSet) -> None:
    n, d = descriptors.vectors.shape
    rec = np.zeros((n, 4 + d), dtype="<f4")
    if descriptors.positions is not None:
        rec[:, 0:2] = descriptors.positions
    if descriptors.scales is not None:
        rec[:, 2] = descriptors.scales
    angles = descriptors.angles.astype("<f4")
    angles[angles.astype(np.float64) >= TWO_PI] = _MAX_ANGLE_F32
    rec[:, 3] = angles
    rec[:, 4:] = descriptors.vectors
    with open(path, "wb") as fh:
        fh.write(_DESC_HEADER.pack(DESCRIPTOR_MAGIC, DESCRIPTOR_VERSION, d, n))
        fh.write(rec.tobytes(order="C"))


def read_descriptor_file(path) -> DescriptorSet:
    """Load one image's descriptors. A file with zero records gives an empty set."""
    data = Path(path).read_bytes()
    if len(data) < _DESC_HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated ({len(data)} bytes)")
    magic, version, d, n = _DESC_HEADER.unpack_from(data)
    _check_magic(path, magic, DESCRIPTOR_MAGIC, version, DESCRIPTOR_VERSION)
    need = _DESC_HEADER.size + 4 * n * (4 + d)
    if len(data) < need:
        raise TruncatedFileError(f"{path}: header promises {n} records, file holds {len(data)} of {need} bytes")
    if len(data) > need:
        raise FormatError(f"{path}: {len(data) - need} trailing bytes after {n} records")
    rec = np.frombuffer(data, dtype="<f4", count=n * (4 + d), offset=_DESC_HEADER.size).reshape(n, 4 + d)
    rec = rec.astype(np.float64)
    if not np.all(np.isfinite(rec)):
        raise NonFiniteValueError(f"{path}: non-finite values in descriptor records")
    return DescriptorSet(rec[:, 4:], rec[:, 3], positions=rec[:, 0:2], scales=rec[:, 2])


# -- encoded signatures ------------------------------------------------------

@dataclass
class VectorSet:
    """Signatures of many images with shared structure metadata."""

    ids: list
    values: np.ndarray
    K: int
    d: int
    M: int = 1
    rho: int = 0

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.rho if self.rho else self.K * self.M * self.d

    def __iter__(self) -> Iterator[tuple]:
        for i, image_id in enumerate(self.ids):
            yield image_id, EncodedVector(self.values[i], self.K, self.d, self.M, self.rho)

    def as_dict(self) -> dict:
        return dict(iter(self))

    def to_index(self, dtype=np.float32) -> DatasetIndex:
        return build_index(iter(self), dtype=dtype)

    @classmethod
    def from_encoded(cls, pairs) -> "VectorSet":
        pairs = list(pairs)
        if not pairs:
            raise ValidationError("no vectors")
        first = pairs[0][1]
        meta = (first.K, first.d, first.M, first.rho)
        for _, v in pairs:
            if (v.K, v.d, v.M, v.rho) != meta:
                raise ValidationError("vectors have differing structure metadata")
        return cls([p[0] for p in pairs], np.stack([p[1].values for p in pairs]), *meta)


def write_vectors(path, vectors: VectorSet) -> None:
    n = len(vectors)
    vals = np.asarray(vectors.values, dtype="<f4").reshape(n, vectors.dim)
    with open(path, "wb") as fh:
        fh.write(_VEC_HEADER.pack(VECTOR_MAGIC, VECTOR_VERSION, vectors.K, vectors.d,
                                  vectors.M, vectors.rho, n))
        fh.write(vals.tobytes(order="C"))
        for image_id in vectors.ids:
            raw = str(image_id).encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def read_vectors(path) -> VectorSet:
    data = Path(path).read_bytes()
    if len(data) < _VEC_HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated")
    magic, version, K, d, M, rho, n = _VEC_HEADER.unpack_from(data)
    _check_magic(path, magic, VECTOR_MAGIC, version, VECTOR_VERSION)
    dim = rho if rho else K * M * d
    off = _VEC_HEADER.size
    if len(data) < off + 4 * n * dim:
        raise TruncatedFileError(f"{path}: vector payload truncated")
    vals = np.frombuffer(data, "<f4", n * dim, off).reshape(n, dim).astype(np.float64)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteValueError(f"{path}: non-finite vector values")
    off += 4 * n * dim
    ids = []
    for _ in range(n):
        if len(data) < off + 4:
            raise TruncatedFileError(f"{path}: id table truncated")
        (length,) = struct.unpack_from("<I", data, off)
        off += 4
        if len(data) < off + length:
            raise TruncatedFileError(f"{path}: id table truncated")
        ids.append(data[off:off + length].decode("utf-8"))
        off += length
    if off != len(data):
        raise FormatError(f"{path}: {len(data) - off} trailing bytes")
    return VectorSet(ids, vals, K, d, M, rho)


# -- ground truth ------------------------------------------------------------

def parse_ground_truth(text: str, source: str = "<string>") -> GroundTruth:
    """Parse lines of the form ``q1 relevant: a b ignore: c``.

    Blank lines and ``#`` comments are skipped. Every query needs a
    non-empty relevant list; query ids must be unique.
    """
    truth = GroundTruth()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        qid, rest = tokens[0], tokens[1:]
        where = f"{source}:{lineno}"
        if qid.endswith(":"):
            raise ValidationError(f"{where}: line must start with a query id")
        sections = {"relevant:": [], "ignore:": []}
        current = None
        for tok in rest:
            if tok in sections:
                if sections[tok]:
                    raise ValidationError(f"{where}: repeated section {tok!r}")
                current = tok
            elif current is None:
                raise ValidationError(f"{where}: token {tok!r} outside a section")
            else:
                sections[current].append(tok)
        if not sections["relevant:"]:
            raise ValidationError(f"{where}: query {qid!r} has no relevant ids")
        if qid in truth:
            raise ValidationError(f"{where}: duplicate query id {qid!r}")
        try:
            truth[qid] = QueryTruth(sections["relevant:"], sections["ignore:"])
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from exc
    return truth


def read_ground_truth(path) -> GroundTruth:
    return parse_ground_truth(Path(path).read_text(), source=str(path))


def write_ground_truth(path, truth) -> None:
    lines = []
    for qid, t in truth.items():
        line = f"{qid} relevant: " + " ".join(sorted(t.relevant))
        if t.ignore:
            line += " ignore: " + " ".join(sorted(t.ignore))
        lines.append(line)
    Path(path).write_text("\n".join(lines) + "\n")


# -- manifest ----------------------------------------------------------------

@dataclass
class Manifest:
    """Dataset listing. Relative paths resolve against ``root``."""

    name: str
    images: list
    queries: list = field(default_factory=list)
    ground_truth: Optional[Path] = None
    root: Path = Path(".")

    def image_ids(self) -> list:
        return [i for i, _ in self.images]

    def iter_images(self) -> Iterator[tuple]:
        for image_id, p in self.images:
            yield image_id, read_descriptor_file(self.root / p)

    def iter_queries(self) -> Iterator[tuple]:
        for qid, p in self.queries:
            yield qid, read_descriptor_file(self.root / p)

    def load_ground_truth(self) -> GroundTruth:
        if self.ground_truth is None:
            raise ValidationError(f"manifest {self.name!r} names no ground-truth file")
        return read_ground_truth(self.root / self.ground_truth)

    def to_dict(self) -> dict:
        out = {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "name": self.name,
            "images": [{"id": i, "path": str(p)} for i, p in self.images],
            "queries": [{"id": i, "path": str(p)} for i, p in self.queries],
        }
        if self.ground_truth is not None:
            out["ground_truth"] = str(self.ground_truth)
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def _unique(entries, what, source):
    ids = [e[0] for e in entries]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{source}: duplicate {what} ids")


def load_manifest(path, check_files: bool = True) -> Manifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise BadMagicError(f"{path}: not a JSON manifest ({exc})") from exc
    if data.get("format") != MANIFEST_FORMAT:
        raise BadMagicError(f"{path}: not a gvlad manifest")
    if data.get("version") != MANIFEST_VERSION:
        raise VersionMismatchError(f"{path}: manifest version {data.get('version')!r}")
    try:
        images = [(str(e["id"]), Path(e["path"])) for e in data["images"]]
        queries = [(str(e["id"]), Path(e["path"])) for e in data.get("queries", [])]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed image/query entry ({exc})") from exc
    _unique(images, "image", path)
    _unique(queries, "query", path)
    gt = data.get("ground_truth")
    m = Manifest(
        name=str(data.get("name", path.stem)),
        images=images,
        queries=queries,
        ground_truth=Path(gt) if gt else None,
        root=path.parent,
    )
    if check_files:
        for _, p in images + queries:
            if not (m.root / p).is_file():
                raise FileNotFoundError(f"{path}: missing descriptor file {m.root / p}")
        if m.ground_truth is not None and not (m.root / m.ground_truth).is_file():
            raise FileNotFoundError(f"{path}: missing ground-truth file {m.root / m.ground_truth}")
    return m


# -- rankings and reports ----------------------------------------------------

def format_ranking(ranking: RankingResult) -> str:
    return "".join(f"{r} {image_id} {dist!r}\n" for r, (image_id, dist) in enumerate(ranking, 1))


def write_rankings(path, rankings: dict) -> None:
    """One ``# query <id>`` header per query followed by ``rank id distance`` lines."""
    with open(path, "w") as fh:
        for qid, ranking in rankings.items():
            fh.write(f"# query {qid}\n")
            fh.write(format_ranking(ranking))


def read_rankings(path) -> dict:
    out, current = {}, None
    for line in Path(path).read_text().splitlines():
        if line.startswith("# query "):
            current = line[len("# query "):]
            out[current] = []
        elif line.strip():
            _, image_id, dist = line.split()
            out[current].append((image_id, float(dist)))
    return out


def map_report(aps: dict) -> dict:
    vals = list(aps.values())
    return {
        "map": math.fsum(vals) / len(vals),
        "n_queries": len(vals),
        "per_query": {str(k): v for k, v in aps.items()},
    }
