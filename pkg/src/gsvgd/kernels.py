"""Radial kernels k(u, v) = Phi(||u - v||^2) and the median-heuristic bandwidth.

Two families are provided: the Gaussian RBF and the inverse multiquadric
(IMQ).  Both expose Phi and its first three derivatives in the squared
distance, which is everything the projected Stein discrepancy and its
projector gradient need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

BANDWIDTH_FLOOR = 1e-8

GAUSSIAN = "gaussian_rbf"
IMQ = "imq"


class KernelError(ValueError):
    """Invalid kernel parameters or mismatched input shapes."""


@dataclass(frozen=True)
class RadialKernelSpec:
    """Kernel family plus bandwidth sigma^2 (and IMQ shape parameters).

    gaussian_rbf: k(u, v) = exp(-||u - v||^2 / (2 sigma^2))
    imq:          k(u, v) = (c + ||u - v||^2 / sigma^2)^beta,  beta in (-1, 0), c > 0
    """

    family: str = GAUSSIAN
    bandwidth: float = 1.0
    imq_beta: float = -0.5
    imq_c: float = 1.0

    def __post_init__(self):
        if self.family not in (GAUSSIAN, IMQ):
            raise KernelError(f"unknown kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise KernelError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.family == IMQ:
            if not -1.0 < self.imq_beta < 0.0:
                raise KernelError(f"imq exponent must lie in (-1, 0), got {self.imq_beta}")
            if not self.imq_c > 0:
                raise KernelError(f"imq offset must be positive, got {self.imq_c}")

    # -- Phi and derivatives in the squared distance ---------------------

    def phi(self, sq):
        """Phi(s) for s = ||u - v||^2 (scalar or array)."""
        sq = np.asarray(sq, dtype=float)
        if np.any(sq < 0):
            raise KernelError("squared distance must be nonnegative")
        if self.family == GAUSSIAN:
            out = sq * (-0.5 / self.bandwidth)
            return np.exp(out, out=out) if out.ndim else np.exp(out)
        return (self.imq_c + sq / self.bandwidth) ** self.imq_beta

    def phi_derivs(self, sq, order: int, phi_value=None):
        """[Phi, Phi', ..., Phi^(order)] evaluated at ``sq``.

        ``phi_value`` lets callers reuse an already computed Phi(sq);
        for both families all derivatives are cheap rescalings of it.
        """
        if not 0 <= order <= 3:
            raise KernelError(f"derivative order must be in 0..3, got {order}")
        sq = np.asarray(sq, dtype=float)
        k = self.phi(sq) if phi_value is None else np.asarray(phi_value, dtype=float)
        out = [k]
        if self.family == GAUSSIAN:
            c = -0.5 / self.bandwidth
            for n in range(1, order + 1):
                out.append(c ** n * k)
        else:
            base = self.imq_c + sq / self.bandwidth
            factor = 1.0
            for n in range(1, order + 1):
                factor *= (self.imq_beta - (n - 1)) / self.bandwidth
                out.append(factor * k / base ** n)
        return out

    def phi_prime(self, sq):
        """First derivative of Phi at the squared distance ``sq``."""
        return self.phi_derivs(sq, 1)[1]

    def deriv_scalars(self) -> tuple[float, float, float] | None:
        """(c1, c2, c3) with Phi^(n) = c_n * Phi when that holds (Gaussian family)."""
        if self.family != GAUSSIAN:
            return None
        c = -0.5 / self.bandwidth
        return c, c * c, c * c * c

    # -- pointwise kernel API --------------------------------------------

    def eval(self, u, v) -> float:
        """k(u, v)."""
        d = _difference(u, v)
        return float(self.phi(d @ d))

    def grad2(self, u, v) -> np.ndarray:
        """Gradient of k(u, v) with respect to the second argument v."""
        d = _difference(u, v)
        _, p1 = self.phi_derivs(d @ d, 1)
        return -2.0 * p1 * d

    def trace_grad12(self, u, v) -> float:
        """Trace of the mixed second derivative matrix d^2 k / du_i dv_i."""
        d = _difference(u, v)
        sq = d @ d
        _, p1, p2 = self.phi_derivs(sq, 2)
        return float(-4.0 * p2 * sq - 2.0 * len(d) * p1)


def _difference(u, v) -> np.ndarray:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise KernelError(f"inputs differ in length: {u.shape} vs {v.shape}")
    return u - v


def pairwise_sqdist(points: np.ndarray) -> np.ndarray:
    """Dense n x n matrix of squared Euclidean distances (clipped at 0)."""
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise KernelError(f"points must be an n x m matrix, got ndim={x.ndim}")
    sqnorm = np.einsum("ij,ij->i", x, x)
    sq = x @ x.T
    sq *= -2.0
    sq += sqnorm[:, None]
    sq += sqnorm[None, :]
    np.maximum(sq, 0.0, out=sq)
    return sq


@lru_cache(maxsize=8)
def _triu_indices(n: int):
    return np.triu_indices(n, 1)


def median_from_sqdist(sq: np.ndarray) -> float:
    """Lower median of the strict upper triangle of a squared-distance matrix."""
    n = sq.shape[0]
    if n < 2:
        raise KernelError("need at least two points for pairwise distances")
    flat = sq[_triu_indices(n)]
    kth = (flat.size - 1) // 2
    return float(np.partition(flat, kth)[kth])


def median_pairwise_sqdist(points: np.ndarray) -> float:
    """Lower median of the n(n-1)/2 pairwise squared distances."""
    return median_from_sqdist(pairwise_sqdist(points))


def median_heuristic(points: np.ndarray, n_for_log: int) -> tuple[float, bool]:
    """Bandwidth sigma^2 = med^2 / (2 log n) from the median pairwise distance.

    ``med`` is the lower median of the pairwise Euclidean distances of
    ``points`` and ``n_for_log`` is the sample size used inside the log.
    Returns (sigma^2, degenerate); the bandwidth is floored at 1e-8 and the
    flag is set when all points coincide (median distance ~ 0).
    """
    if n_for_log < 2:
        raise KernelError(f"n_for_log must be >= 2, got {n_for_log}")
    med_sq = median_pairwise_sqdist(points)
    raw = med_sq / (2.0 * math.log(n_for_log))
    if raw <= BANDWIDTH_FLOOR:
        return BANDWIDTH_FLOOR, True
    return raw, False


@dataclass(frozen=True)
class KernelPolicy:
    """How to build a concrete kernel for a given particle cloud.

    ``bandwidth=None`` applies the median heuristic to the points the
    kernel will act on (projected particles for subspace updates); a
    fixed positive value pins sigma^2.
    """

    family: str = GAUSSIAN
    bandwidth: float | None = None
    imq_beta: float = -0.5
    imq_c: float = 1.0

    def spec_for(self, points: np.ndarray, n_for_log: int | None = None) -> RadialKernelSpec:
        if self.bandwidth is not None:
            sigma2 = self.bandwidth
        else:
            n = len(points) if n_for_log is None else n_for_log
            sigma2, _ = median_heuristic(points, n)
        return RadialKernelSpec(self.family, sigma2, self.imq_beta, self.imq_c)

    def spec_from_sqdist(self, sq: np.ndarray, n_for_log: int) -> RadialKernelSpec:
        """Same as ``spec_for`` but reusing a precomputed squared-distance matrix."""
        if self.bandwidth is not None:
            sigma2 = self.bandwidth
        else:
            if n_for_log < 2:
                raise KernelError(f"n_for_log must be >= 2, got {n_for_log}")
            sigma2 = max(median_from_sqdist(sq) / (2.0 * math.log(n_for_log)), BANDWIDTH_FLOOR)
        return RadialKernelSpec(self.family, sigma2, self.imq_beta, self.imq_c)

    def with_bandwidth(self, sigma2: float) -> "KernelPolicy":
        return replace(self, bandwidth=sigma2)
