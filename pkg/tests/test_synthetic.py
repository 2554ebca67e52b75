import numpy as np
import pytest

from gvlad.errors import InvalidArgumentError
from gvlad.kmeans import kmeans
from gvlad.synthetic import generate_synthetic, synthetic_dataset


def test_shapes_and_truth():
    data = synthetic_dataset(3, 4, 30, d=5, seed=1)
    assert len(data.images) == 12
    ds = data.images["c001_i002"]
    assert ds.vectors.shape == (30, 5) and ds.positions.shape == (30, 2)
    gt = data.ground_truth()
    assert gt["c001_i002"].relevant == {"c001_i000", "c001_i001", "c001_i003"}


def test_zero_signal_angles_class_independent():
    data = synthetic_dataset(4, 10, 200, angle_signal=0.0, seed=2)
    bins = {}
    for image_id, ds in data.images.items():
        quad = np.round(ds.angles / (np.pi / 2)).astype(int) % 4
        bins.setdefault(data.labels[image_id], []).append(np.bincount(quad, minlength=4) / len(quad))
    means = np.array([np.mean(v, axis=0) for v in bins.values()])
    np.testing.assert_allclose(means, 0.25, atol=0.03)


def test_full_signal_follows_class_code():
    # without jitter, every descriptor of one appearance sub-mode in one class shares an axis
    data = synthetic_dataset(3, 5, 80, d=4, components=2, angle_signal=1.0, seed=3, jitter=0.0,
                             offset=30.0, spread=200.0)
    for c in range(3):
        pooled_x = np.concatenate([ds.vectors for i, ds in data.images.items() if data.labels[i] == c])
        pooled_a = np.concatenate([ds.angles for i, ds in data.images.items() if data.labels[i] == c])
        quad = np.round(pooled_a / (np.pi / 2)).astype(int) % 4
        assert np.allclose(pooled_a, np.mod(quad * np.pi / 2, 2 * np.pi))
        # sub-modes are far apart here, so clustering the vectors recovers them
        labels = kmeans(pooled_x, 4, seed=0).labels
        for j in range(4):
            assert len(set(quad[labels == j])) == 1


def test_byte_identical_regeneration(tmp_path):
    generate_synthetic(tmp_path / "a", 2, 3, 20, seed=9)
    generate_synthetic(tmp_path / "b", 2, 3, 20, seed=9)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 2 * 3 + 2
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.parametrize("kwargs", [dict(classes=0), dict(angle_signal=1.5), dict(d=0)])
def test_invalid(kwargs):
    base = dict(classes=2, images_per_class=2, descriptors_per_image=5)
    with pytest.raises(InvalidArgumentError):
        synthetic_dataset(**{**base, **kwargs})
