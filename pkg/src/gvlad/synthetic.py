"""Synthetic retrieval corpora where keypoint orientation carries the class.

Appearance vectors come from one Gaussian mixture shared by all classes.
Each mixture component has two sub-modes placed symmetrically around its
mean, so per-word residual sums (plain VLAD) look the same for every class.
What differs per class is which of four axis-aligned orientations each
sub-mode's keypoints take. ``angle_signal`` is the probability that a
keypoint follows its class orientation; otherwise the orientation is one
of the four axes at random. At ``angle_signal=0`` classes are
indistinguishable, at 1 only an orientation-aware encoding can tell them
apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptors import TWO_PI, DescriptorSet
from .errors import InvalidArgumentError
from .io import Manifest, write_descriptor_file, write_ground_truth
from .retrieval import GroundTruth, QueryTruth


@dataclass
class SyntheticDataset:
    images: dict
    labels: dict

    def ground_truth(self) -> GroundTruth:
        by_class: dict = {}
        for image_id, c in self.labels.items():
            by_class.setdefault(c, []).append(image_id)
        truth = GroundTruth()
        for image_id, c in self.labels.items():
            others = [i for i in by_class[c] if i != image_id]
            if others:
                truth[image_id] = QueryTruth(others)
        return truth


def synthetic_dataset(
    classes: int,
    images_per_class: int,
    descriptors_per_image: int,
    d: int = 8,
    angle_signal: float = 1.0,
    seed: int = 0,
    *,
    components: int = 8,
    shared_appearance: bool = True,
    spread: float = 6.0,
    offset: float = 2.0,
    jitter: float = 0.2,
) -> SyntheticDataset:
    for name, val in (("classes", classes), ("images_per_class", images_per_class),
                      ("descriptors_per_image", descriptors_per_image), ("d", d),
                      ("components", components)):
        if int(val) != val or val < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer, got {val!r}")
    if not 0.0 <= angle_signal <= 1.0:
        raise InvalidArgumentError(f"angle_signal must lie in [0, 1], got {angle_signal!r}")
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, spread, size=(components, d))
    u = rng.normal(size=(components, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    # orientation code per (class, component, sub-mode); the two sub-modes differ
    codes = np.stack([
        np.stack([rng.permutation(4)[:2] for _ in range(components)])
        for _ in range(classes)
    ])
    if shared_appearance:
        weights = np.full((classes, components), 1.0 / components)
    else:
        weights = rng.dirichlet(np.ones(components), size=classes)

    images, labels = {}, {}
    n = descriptors_per_image
    for c in range(classes):
        for i in range(images_per_class):
            g = rng.choice(components, size=n, p=weights[c])
            s = rng.integers(0, 2, size=n)
            sign = (2 * s - 1)[:, None]
            x = means[g] + sign * offset * u[g] + rng.normal(size=(n, d))
            follow = rng.random(n) < angle_signal
            axis = np.where(follow, codes[c, g, s], rng.integers(0, 4, size=n))
            theta = np.mod(axis * (np.pi / 2) + rng.uniform(-jitter, jitter, size=n), TWO_PI)
            pos = rng.uniform([0.0, 0.0], [1024.0, 768.0], size=(n, 2))
            scale = rng.lognormal(1.0, 0.5, size=n)
            image_id = f"c{c:03d}_i{i:03d}"
            images[image_id] = DescriptorSet(x, theta, positions=pos, scales=scale)
            labels[image_id] = c
    return SyntheticDataset(images, labels)


def generate_synthetic(
    out_dir,
    classes: int,
    images_per_class: int,
    descriptors_per_image: int,
    d: int = 8,
    angle_signal: float = 1.0,
    seed: int = 0,
    **kwargs,
) -> Manifest:
    """Write a synthetic corpus (descriptor files, ground truth, manifest) under ``out_dir``.

    Every image is also a query whose relevant set is the rest of its
    class. Returns the saved manifest.
    """
    out = Path(out_dir)
    (out / "descriptors").mkdir(parents=True, exist_ok=True)
    data = synthetic_dataset(classes, images_per_class, descriptors_per_image, d,
                             angle_signal, seed, **kwargs)
    entries = []
    for image_id, ds in data.images.items():
        rel = Path("descriptors") / f"{image_id}.gvds"
        write_descriptor_file(out / rel, ds)
        entries.append((image_id, rel))
    write_ground_truth(out / "ground_truth.txt", data.ground_truth())
    manifest = Manifest(
        name=f"synthetic-s{seed}-a{angle_signal:g}",
        images=entries,
        queries=list(entries),
        ground_truth=Path("ground_truth.txt"),
        root=out,
    )
    manifest.save(out / "manifest.json")
    return manifest
