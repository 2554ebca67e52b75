"""Batch helpers tying the stages together over whole collections."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional

import numpy as np

from .angle_model import AngleModel
from .codebook import Codebook
from .encoder import encode_image
from .errors import EmptyInputError
from .io import VectorSet
from .whitening import WhiteningModel


def pool_training_data(items: Iterable, max_descriptors: Optional[int] = None,
                       seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate vectors and angles of ``(id, DescriptorSet)`` pairs.

    With ``max_descriptors`` a seeded uniform subsample without replacement
    is returned, in original order.
    """
    vecs, angs = [], []
    for _, ds in items:
        if len(ds):
            vecs.append(ds.vectors)
            angs.append(ds.angles)
    if not vecs:
        raise EmptyInputError("no descriptors in the training collection")
    x = np.concatenate(vecs)
    a = np.concatenate(angs)
    if max_descriptors is not None and x.shape[0] > max_descriptors:
        keep = np.sort(np.random.default_rng(seed).choice(x.shape[0], max_descriptors, replace=False))
        x, a = x[keep], a[keep]
    return x, a


def encode_collection(items: Iterable, codebook: Codebook, angle_model: Optional[AngleModel] = None,
                      workers: int = 1, **options) -> VectorSet:
    """Encode every ``(id, DescriptorSet)`` pair; output order follows input order.

    ``options`` are forwarded to :func:`gvlad.encoder.encode_image`.
    """
    items = list(items)

    def one(item):
        return item[0], encode_image(item[1], codebook, angle_model, **options)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(one, items))
    else:
        pairs = [one(it) for it in items]
    return VectorSet.from_encoded(pairs)


def whiten_collection(vectors: VectorSet, model: WhiteningModel, whiten: bool = True) -> VectorSet:
    y = model.transform(vectors.values, whiten=whiten)
    return VectorSet(list(vectors.ids), y, vectors.K, vectors.d, vectors.M, model.rho)
