import numpy as np
import pytest

from gvlad import EncodedVector, apply_whitening, fit_whitening
from gvlad.errors import DegenerateInputError, InvalidArgumentError, TruncatedFileError
from gvlad.whitening import DEFAULT_RHO, WhiteningModel


def diag41_data():
    # sample covariance (1/(n-1)) is exactly diag(4, 1)
    s = np.sqrt(3.0 / 4.0)
    a = np.array([1, -1, 1, -1]) * s
    b = np.array([1, 1, -1, -1]) * s
    return np.column_stack([2 * a, b]) + [5.0, -3.0]


def spectrum_data(n, D, rng, decay=0.97):
    scales = decay ** np.arange(D)
    basis, _ = np.linalg.qr(rng.normal(size=(D, D)))
    return (rng.normal(size=(n, D)) * scales) @ basis.T + rng.normal(size=D)


class TestFit:
    def test_analytic_diag(self):
        X = diag41_data()
        m = fit_whitening(X, 2)
        np.testing.assert_allclose(m.eigenvalues, [4.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(m.mean, [5.0, -3.0], atol=1e-12)
        y1 = m.transform(m.mean + [2.0, 0.0], normalize=False)[0]
        y2 = m.transform(m.mean + [0.0, 1.0], normalize=False)[0]
        np.testing.assert_allclose(np.abs(y1), [1.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(np.abs(y2), [0.0, 1.0], atol=1e-9)

    def test_default_rho(self):
        assert DEFAULT_RHO == 128

    @pytest.mark.parametrize("method", ["gram", "covariance"])
    def test_whitened_covariance_identity(self, method):
        rng = np.random.default_rng(0)
        X = spectrum_data(300, 40, rng)
        m = fit_whitening(X, 20, method=method)
        Y = m.transform(X, normalize=False)
        np.testing.assert_allclose(np.cov(Y, rowvar=False), np.eye(20), atol=1e-6)

    def test_methods_agree(self):
        rng = np.random.default_rng(1)
        X = spectrum_data(200, 30, rng)
        a = fit_whitening(X, 10, method="gram")
        b = fit_whitening(X, 10, method="covariance")
        np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-9)
        np.testing.assert_allclose(a.projection, b.projection, atol=1e-7)

    def test_projection_rows(self):
        rng = np.random.default_rng(2)
        m = fit_whitening(spectrum_data(100, 50, rng), 16)
        G = m.projection @ m.projection.T
        np.testing.assert_allclose(G, np.diag(1.0 / (m.eigenvalues + m.epsilon)), atol=1e-9)
        assert np.all(np.diff(m.eigenvalues) <= 0) and np.all(m.eigenvalues >= 0)

    def test_identity_covariance_fixed_point(self):
        # centred orthogonal design: covariance is exactly I
        X = np.vstack([np.eye(3), -np.eye(3)]) * np.sqrt(5.0 / 2.0)
        m = fit_whitening(X, 3)
        np.testing.assert_allclose(m.eigenvalues, 1.0, atol=1e-12)
        Y = m.transform(X, normalize=False)
        np.testing.assert_allclose(np.cov(Y, rowvar=False), np.eye(3), atol=1e-9)
        P = m.transform(X, whiten=False, normalize=False)
        np.testing.assert_allclose(Y, P, atol=1e-9)

    def test_errors(self):
        with pytest.raises(DegenerateInputError):
            fit_whitening(np.ones((1, 4)), 1)
        with pytest.raises(InvalidArgumentError):
            fit_whitening(np.random.default_rng(0).normal(size=(5, 10)), 5)
        with pytest.raises(DegenerateInputError):
            fit_whitening(np.tile([1.0, 2.0, 3.0, 4.0], (6, 1)) * np.arange(6)[:, None] + 1, 3, method="gram")


class TestApply:
    def test_mean_maps_to_zero(self):
        rng = np.random.default_rng(3)
        X = spectrum_data(50, 12, rng)
        m = fit_whitening(X, 5)
        v = apply_whitening(EncodedVector(m.mean, 3, 4, 1), m)
        assert v.dim == 5 and v.rho == 5
        assert np.array_equal(v.values, np.zeros(5))

    def test_full_rank_reconstruction(self):
        rng = np.random.default_rng(4)
        X = spectrum_data(60, 10, rng, decay=0.8)
        m = fit_whitening(X, 10)
        for whiten in (True, False):
            Y = m.transform(X, whiten=whiten, normalize=False)
            back = m.inverse_transform(Y, whiten=whiten)
            assert np.max(np.abs(back - X)) / np.max(np.abs(X)) < 1e-5

    def test_affine_before_normalisation(self):
        rng = np.random.default_rng(5)
        X = spectrum_data(40, 8, rng)
        m = fit_whitening(X, 4)
        a, b, t = X[0], X[1], 0.3
        lhs = m.transform(t * a + (1 - t) * b, normalize=False)
        rhs = t * m.transform(a, normalize=False) + (1 - t) * m.transform(b, normalize=False)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_normalised_output(self):
        rng = np.random.default_rng(6)
        X = spectrum_data(40, 8, rng)
        m = fit_whitening(X, 4)
        v = apply_whitening(EncodedVector(X[3], 2, 4), m)
        assert abs(np.linalg.norm(v.values) - 1) < 1e-12

    def test_dimension_mismatch(self):
        m = fit_whitening(diag41_data(), 2)
        with pytest.raises(InvalidArgumentError):
            apply_whitening(EncodedVector(np.zeros(3), 3, 1), m)

    def test_truncate(self):
        rng = np.random.default_rng(7)
        m = fit_whitening(spectrum_data(40, 8, rng), 6)
        t = m.truncate(3)
        X = rng.normal(size=(5, 8))
        np.testing.assert_allclose(t.transform(X, normalize=False), m.transform(X, normalize=False)[:, :3])
        with pytest.raises(InvalidArgumentError):
            m.truncate(7)


class TestFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        m = fit_whitening(spectrum_data(30, 12, rng), 6)
        m.save(tmp_path / "w.bin")
        back = WhiteningModel.load(tmp_path / "w.bin")
        assert (back.D, back.rho, back.epsilon) == (12, 6, m.epsilon)
        assert np.array_equal(back.projection, m.projection.astype(np.float32).astype(np.float64))
        back.save(tmp_path / "w2.bin")
        assert (tmp_path / "w.bin").read_bytes() == (tmp_path / "w2.bin").read_bytes()

    def test_truncated(self, tmp_path):
        m = fit_whitening(diag41_data(), 2)
        m.save(tmp_path / "w.bin")
        (tmp_path / "t.bin").write_bytes((tmp_path / "w.bin").read_bytes()[:-1])
        with pytest.raises(TruncatedFileError):
            WhiteningModel.load(tmp_path / "t.bin")
