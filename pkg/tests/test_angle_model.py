import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gvlad.angle_model import (
    AngleModel,
    angle_histogram,
    angle_to_point,
    assign_membership,
    learn_angle_membership,
)
from gvlad.errors import (
    BadMagicError,
    DegenerateInputError,
    EmptyInputError,
    InvalidArgumentError,
    VersionMismatchError,
)

from oracles import brute_force_wcss

PI = math.pi


def four_mode_angles(n=1000, jitter=0.05, seed=0):
    rng = np.random.default_rng(seed)
    modes = rng.integers(0, 4, size=n) * (PI / 2)
    return np.mod(modes + rng.uniform(-jitter, jitter, size=n), 2 * PI)


@pytest.fixture(scope="module")
def axis_model():
    return learn_angle_membership(four_mode_angles(), 4, seed=0)


class TestAngleToPoint:
    @pytest.mark.parametrize("theta,r,expected", [
        (0.0, 1.0, (1.0, 0.0)),
        (PI / 2, 1.0, (0.0, 1.0)),
        (PI, 2.0, (-2.0, 0.0)),
    ])
    def test_axis_cases(self, theta, r, expected):
        np.testing.assert_allclose(angle_to_point(theta, r), expected, atol=1e-15)

    @given(st.floats(-100, 100), st.floats(1e-3, 1e3))
    def test_on_circle(self, theta, r):
        assert abs(np.linalg.norm(angle_to_point(theta, r)) - r) <= 1e-9 * max(1.0, r)

    def test_wraps_out_of_range(self):
        np.testing.assert_allclose(angle_to_point(-PI / 2), angle_to_point(3 * PI / 2), atol=1e-12)

    @pytest.mark.parametrize("theta,r", [(np.nan, 1.0), (np.inf, 1.0), (0.0, 0.0), (0.0, -1.0)])
    def test_invalid(self, theta, r):
        with pytest.raises(InvalidArgumentError):
            angle_to_point(theta, r)


class TestLearn:
    def test_four_axis_modes(self, axis_model):
        ang = np.sort(axis_model.centroid_angles())
        for got, want in zip(ang, [0, PI / 2, PI, 3 * PI / 2]):
            diff = abs((got - want + PI) % (2 * PI) - PI)
            assert diff < 0.1
        bounds = axis_model.boundaries()
        np.testing.assert_allclose(bounds, [PI / 4, 3 * PI / 4, 5 * PI / 4, 7 * PI / 4], atol=0.1)

    def test_one_bin(self):
        a = np.random.default_rng(2).uniform(0, 2 * PI, 50)
        m = learn_angle_membership(a, 1)
        np.testing.assert_allclose(m.centroids[0], angle_to_point(a).mean(axis=0), atol=1e-12)
        assert set(m.assign(a)) == {0}

    def test_two_pairs_partition(self):
        a = np.array([0.0, 0.1, PI, PI + 0.1])
        _, best_part = brute_force_wcss(angle_to_point(a), 2)
        assert best_part == frozenset({frozenset({0, 1}), frozenset({2, 3})})
        m = learn_angle_membership(a, 2, seed=0)
        lab = m.assign(a)
        assert lab[0] == lab[1] and lab[2] == lab[3] and lab[0] != lab[2]

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            learn_angle_membership([], 2)
        with pytest.raises(DegenerateInputError):
            learn_angle_membership([0.5, 0.5, 0.5 + 2 * PI], 2)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(0, 2 * PI, exclude_max=True), min_size=4, max_size=8, unique=True),
           st.integers(1, 3), st.floats(0, 2 * PI))
    def test_optimal_objective_rotation_invariant(self, angles, M, delta):
        pts = angle_to_point(angles)
        if len(np.unique(np.round(pts, 12), axis=0)) < M:
            return
        base, _ = brute_force_wcss(pts, M)
        rotated, _ = brute_force_wcss(angle_to_point(np.array(angles) + delta), M)
        assert abs(base - rotated) <= 1e-6

    @pytest.mark.parametrize("seed", range(8))
    def test_learned_model_has_M_arcs(self, seed):
        rng = np.random.default_rng(seed)
        M = int(rng.integers(2, 7))
        a = rng.vonmises(0.0, 0.5, 500) + rng.integers(0, 3, 500) * 2.0
        m = learn_angle_membership(a, M, seed=seed, restarts=3)
        arcs = m.arcs()
        assert len(arcs) == M
        assert sorted(b for _, _, b in arcs) == list(range(M))


class TestAssign:
    def test_zero_goes_to_x_axis_bin(self, axis_model):
        near = int(np.argmin(((axis_model.centroids - [1.0, 0.0]) ** 2).sum(axis=1)))
        assert assign_membership(0.0, axis_model) == near

    @given(st.floats(0, 2 * PI, exclude_max=True))
    def test_periodic(self, theta):
        m = AngleModel([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        assert assign_membership(theta, m) == assign_membership(theta + 2 * PI, m)

    def test_single_bin(self):
        m = AngleModel([[0.3, 0.1]])
        assert all(assign_membership(t, m) == 0 for t in np.linspace(0, 6.2, 20))

    def test_tie_lowest_index(self):
        m = AngleModel([[0.0, 1.0], [0.0, -1.0]])
        assert assign_membership(0.0, m) == 0

    def test_total_and_piecewise_constant(self, axis_model):
        grid = np.linspace(0, 2 * PI, 10000, endpoint=False)
        lab = axis_model.assign(grid)
        changes = int(np.sum(lab != np.roll(lab, 1)))
        assert changes == 4
        assert set(lab) == {0, 1, 2, 3}


class TestModelFile:
    def test_round_trip(self, tmp_path, axis_model):
        p = tmp_path / "m.json"
        axis_model.save(p)
        back = AngleModel.load(p)
        assert np.array_equal(back.centroids, axis_model.centroids)
        assert back.r == axis_model.r

    def test_bad_header(self, tmp_path, axis_model):
        d = axis_model.to_dict()
        with pytest.raises(VersionMismatchError):
            AngleModel.from_dict({**d, "version": 99})
        with pytest.raises(BadMagicError):
            AngleModel.from_dict({**d, "format": "x"})

    def test_invariants(self):
        with pytest.raises(InvalidArgumentError):
            AngleModel([[1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(InvalidArgumentError):
            AngleModel(np.empty((0, 2)))


class TestHistogram:
    def test_one_per_bin(self):
        np.testing.assert_allclose(angle_histogram([0, PI / 2, PI, 3 * PI / 2], 4), [0.5] * 4)

    def test_dimension(self):
        assert angle_histogram(np.linspace(0, 6, 100), 72).shape == (72,)

    def test_identical_angles(self):
        h = angle_histogram([1.0] * 9, 8)
        assert np.count_nonzero(h) == 1 and h.max() == 1.0

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=50), st.integers(1, 100))
    def test_unit_norm(self, a, Q):
        assert abs(np.linalg.norm(angle_histogram(a, Q)) - 1.0) <= 1e-9

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            angle_histogram([], 4)
        with pytest.raises(InvalidArgumentError):
            angle_histogram([1.0], 0)
