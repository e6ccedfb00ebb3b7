import math

import numpy as np
import pytest

from patchview.metrics import (GaussianStats, frechet_distance, gaussian_stats,
                               psnr, read_features, write_features_binary,
                               write_features_csv)

from oracles import diagonal_frechet, pixelwise_psnr, two_pass_covariance


# ---------------------------------------------------------------------------
# gaussian_stats


def test_stats_of_two_points():
    stats = gaussian_stats(np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert np.allclose(stats.mean, [1.0, 0.0])
    assert np.allclose(stats.cov, np.diag([2.0, 0.0]))
    assert stats.n == 2


def test_stats_of_constant_features():
    stats = gaussian_stats(np.full((10, 3), 4.2))
    assert np.allclose(stats.cov, 0.0)


def test_stats_match_two_pass_oracle():
    rng = np.random.default_rng(2)
    x = rng.normal(2.0, 3.0, (100, 5))
    stats = gaussian_stats(x)
    mean, cov = two_pass_covariance(x)
    assert np.abs(stats.mean - mean).max() < 1e-10
    assert np.abs(stats.cov - cov).max() < 1e-10


def test_stats_require_two_samples():
    with pytest.raises(ValueError, match="at least 2"):
        gaussian_stats(np.ones((1, 4)))


def test_stats_validate_symmetry():
    with pytest.raises(ValueError, match="symmetric"):
        GaussianStats(np.zeros(2), np.array([[1.0, 0.5], [0.1, 1.0]]), n=10)


# ---------------------------------------------------------------------------
# frechet_distance


def _random_stats(rng, d=6, n=200):
    x = rng.normal(0, 1, (n, d)) @ rng.normal(0, 1, (d, d))
    return gaussian_stats(x + rng.normal(0, 2, d))


def test_identical_stats_give_zero():
    rng = np.random.default_rng(4)
    a = _random_stats(rng)
    assert frechet_distance(a, a) <= 1e-10


def test_mean_shift_gives_squared_norm():
    rng = np.random.default_rng(5)
    a = _random_stats(rng)
    v = rng.normal(0, 3, a.dim)
    b = GaussianStats(a.mean + v, a.cov, n=a.n)
    assert frechet_distance(a, b) == pytest.approx(float(v @ v), rel=1e-9, abs=1e-9)


def test_diagonal_case_matches_closed_form():
    a_diag = [1.0, 4.0, 0.25, 9.0]
    b_diag = [2.0, 1.0, 1.0, 3.0]
    a = GaussianStats(np.zeros(4), np.diag(a_diag), n=100)
    b = GaussianStats(np.zeros(4), np.diag(b_diag), n=100)
    expected = diagonal_frechet(a_diag, b_diag)
    assert frechet_distance(a, b) == pytest.approx(expected, abs=1e-6)


def test_symmetry():
    rng = np.random.default_rng(6)
    a, b = _random_stats(rng), _random_stats(rng)
    assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), abs=1e-8)


def test_nonnegative_and_zero_only_for_equal():
    rng = np.random.default_rng(7)
    for _ in range(10):
        a, b = _random_stats(rng), _random_stats(rng)
        d = frechet_distance(a, b)
        assert d >= 0.0
        assert d > 1e-3  # independent random stats are far apart


def test_orthogonal_invariance():
    rng = np.random.default_rng(8)
    a, b = _random_stats(rng, d=5), _random_stats(rng, d=5)
    q, _ = np.linalg.qr(rng.normal(0, 1, (5, 5)))
    a_rot = GaussianStats(q @ a.mean, q @ a.cov @ q.T, n=a.n)
    b_rot = GaussianStats(q @ b.mean, q @ b.cov @ q.T, n=b.n)
    assert frechet_distance(a_rot, b_rot) == pytest.approx(
        frechet_distance(a, b), abs=1e-8)


def test_dimension_mismatch():
    a = GaussianStats(np.zeros(3), np.eye(3), n=10)
    b = GaussianStats(np.zeros(4), np.eye(4), n=10)
    with pytest.raises(ValueError, match="dimension"):
        frechet_distance(a, b)


def test_genuinely_non_psd_rejected():
    a = GaussianStats(np.zeros(2), np.diag([1.0, -0.5]), n=10)
    b = GaussianStats(np.zeros(2), np.eye(2), n=10)
    with pytest.raises(ValueError, match="PSD"):
        frechet_distance(a, b)


# ---------------------------------------------------------------------------
# psnr


def test_identical_images_are_infinite():
    img = np.random.default_rng(0).integers(0, 255, (16, 16, 3), dtype=np.uint8)
    assert psnr(img, img) == float("inf")


def test_one_lsb_everywhere():
    a = np.zeros((8, 8), dtype=np.uint8)
    b = a + 1
    assert psnr(a, b) == pytest.approx(20.0 * math.log10(255.0), abs=1e-9)
    assert psnr(a, b) == pytest.approx(48.1308036, abs=1e-6)


def test_matches_pixelwise_oracle():
    rng = np.random.default_rng(9)
    a = rng.integers(0, 256, (12, 12, 3))
    b = rng.integers(0, 256, (12, 12, 3))
    assert psnr(a, b) == pytest.approx(pixelwise_psnr(a, b), abs=1e-9)


def test_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        psnr(np.zeros((4, 4)), np.zeros((5, 4)))


# ---------------------------------------------------------------------------
# feature IO


def test_binary_roundtrip(tmp_path):
    rng = np.random.default_rng(10)
    x = rng.normal(0, 1, (20, 7)).astype(np.float32)
    path = tmp_path / "features.bin"
    write_features_binary(path, x)
    assert np.allclose(read_features(path), x, atol=1e-7)


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    x = rng.normal(0, 1, (15, 4))
    path = tmp_path / "features.csv"
    write_features_csv(path, x, dim_names=["a", "b", "c", "d"])
    header = path.read_text().splitlines()[0]
    assert header == "a,b,c,d"
    assert np.allclose(read_features(path), x, atol=1e-12)


def test_truncated_binary_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    write_features_binary(path, np.ones((4, 4), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="truncated"):
        read_features(path)
