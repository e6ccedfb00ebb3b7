"""Fréchet distance between Gaussian feature statistics, plus image PSNR.

Feature extraction is deliberately external: the operations consume raw
feature matrices (n samples x d dims) supplied as CSV or as a small binary
format, so any embedding can be plugged in. Covariances use the unbiased
1/(n-1) normalization.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussianStats",
    "gaussian_stats",
    "frechet_distance",
    "psnr",
    "read_features",
    "write_features_csv",
    "write_features_binary",
    "FEATURE_MAGIC",
]

# 16-byte little-endian header: magic, n, d, reserved (uint32 each).
FEATURE_MAGIC = 0x50564654  # "TFVP" little-endian on disk

_PSD_TOL = -1e-6


@dataclass(frozen=True, eq=False)
class GaussianStats:
    """Sample mean and covariance of a feature cloud."""

    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        c = np.asarray(self.cov, dtype=np.float64)
        if c.shape != (m.size, m.size):
            raise ValueError(f"cov shape {c.shape} does not match mean dim {m.size}")
        if np.abs(c - c.T).max() > 1e-9 * max(1.0, np.abs(c).max()):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", (c + c.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.mean.size


def gaussian_stats(features) -> GaussianStats:
    """Mean and 1/(n-1)-normalized covariance of an (n, d) feature matrix."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-D (n, d), got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples to estimate covariance, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, cov=cov, n=n)


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    if vals.min() < _PSD_TOL * max(1.0, abs(vals.max())):
        raise ValueError(f"matrix is not PSD (min eigenvalue {vals.min():.3e})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Fréchet distance between two Gaussians:

        ||m_a - m_b||^2 + Tr(C_a + C_b - 2 (C_a C_b)^{1/2})

    The trace of the matrix square root is computed from the symmetrized
    product C_a^{1/2} C_b C_a^{1/2} (same trace, far better conditioning
    than sqrtm of the non-symmetric product). Small negative eigenvalues
    are clipped; the result is clamped at 0.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    sqrt_a = _sqrt_psd(a.cov)
    inner = sqrt_a @ b.cov @ sqrt_a
    inner = (inner + inner.T) / 2.0
    vals = np.linalg.eigh(inner)[0]
    if vals.min() < _PSD_TOL * max(1.0, abs(vals.max())):
        raise ValueError(f"covariance product is not PSD (min eigenvalue {vals.min():.3e})")
    trace_sqrt = np.sqrt(np.clip(vals, 0.0, None)).sum()
    value = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * trace_sqrt)
    return max(value, 0.0)


def psnr(a, b, peak: float = 255.0) -> float:
    """10*log10(peak^2 / MSE); +inf for identical images."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    mse = np.mean((x - y) ** 2)
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))


# ---------------------------------------------------------------------------
# Feature matrix IO


def write_features_csv(path, features, dim_names=None) -> None:
    x = np.asarray(features, dtype=np.float64)
    if dim_names is None:
        dim_names = [f"f{i}" for i in range(x.shape[1])]
    header = ",".join(dim_names)
    np.savetxt(path, x, delimiter=",", header=header, comments="")


def write_features_binary(path, features) -> None:
    x = np.ascontiguousarray(features, dtype="<f4")
    n, d = x.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4I", FEATURE_MAGIC, n, d, 0))
        fh.write(x.tobytes())


def read_features(path) -> np.ndarray:
    """Read a feature matrix; binary (magic-headed) or CSV, sniffed by content."""
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) == 16 and struct.unpack("<I", head[:4])[0] == FEATURE_MAGIC:
            _, n, d, _ = struct.unpack("<4I", head)
            data = np.frombuffer(fh.read(4 * n * d), dtype="<f4")
            if data.size != n * d:
                raise ValueError(f"{path}: truncated feature file ({data.size} of {n * d} values)")
            return data.reshape(n, d).astype(np.float64)
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
