"""Sample-quality metrics: energy distance, covariance error, marginal variance."""

from __future__ import annotations

import numpy as np


class MetricError(ValueError):
    """Invalid metric inputs."""


def _as_samples(x, name: str) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.ndim != 2 or x.shape[0] < 1:
        raise MetricError(f"{name} must be a nonempty n x d sample matrix, got {x.shape}")
    return x


def _mean_pairwise_distance(x: np.ndarray, y: np.ndarray) -> float:
    sq = (
        np.einsum("ij,ij->i", x, x)[:, None]
        - 2.0 * (x @ y.T)
        + np.einsum("ij,ij->i", y, y)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    return float(np.sqrt(sq, out=sq).mean())


def energy_distance(x, y) -> float:
    """All-pairs energy distance 2 E||X - Y|| - E||X - X'|| - E||Y - Y'||.

    V-form: the within-sample means include the zero diagonal terms.
    Symmetric in its arguments and zero for identical point multisets.
    """
    x = _as_samples(x, "x")
    y = _as_samples(y, "y")
    if x.shape[1] != y.shape[1]:
        raise MetricError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return (
        2.0 * _mean_pairwise_distance(x, y)
        - _mean_pairwise_distance(x, x)
        - _mean_pairwise_distance(y, y)
    )


def covariance_error(x, reference_covariance) -> float:
    """Frobenius distance between the unbiased sample covariance and a reference."""
    x = _as_samples(x, "x")
    if x.shape[0] < 2:
        raise MetricError("need at least two samples for a covariance")
    ref = np.asarray(reference_covariance, dtype=float)
    if ref.shape != (x.shape[1], x.shape[1]):
        raise MetricError(f"reference covariance shape {ref.shape} does not match d={x.shape[1]}")
    if not np.allclose(ref, ref.T, atol=1e-12):
        raise MetricError("reference covariance must be symmetric")
    centered = x - x.mean(axis=0)
    sample_cov = centered.T @ centered / (x.shape[0] - 1)
    return float(np.linalg.norm(sample_cov - ref))


def dim_avg_marginal_variance(x) -> float:
    """Mean over coordinates of the unbiased per-coordinate sample variance."""
    x = _as_samples(x, "x")
    if x.shape[0] < 2:
        raise MetricError("need at least two samples for a variance")
    return float(x.var(axis=0, ddof=1).mean())
