"""Grassmann-manifold primitives.

A subspace of R^d is represented by a d x m matrix with orthonormal
columns (a "projector"); two projectors represent the same subspace
iff they differ by a right orthogonal factor.  Everything a projected
Stein update needs lives here: tangent projection, the polar
retraction, tangent-space Gaussian noise, block one-hot initialization
and batch re-orthonormalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHONORMALITY_TOL = 1e-10
RANK_DEFICIENCY_TOL = 1e-12


class ManifoldError(ValueError):
    """Invalid manifold input (shape mismatch, lost orthonormality, degenerate step)."""


@dataclass(frozen=True)
class Projector:
    """Column-orthonormal d x m matrix representing an m-dimensional subspace of R^d."""

    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if a.ndim != 2:
            raise ManifoldError(f"projector must be a 2-d matrix, got ndim={a.ndim}")
        d, m = a.shape
        if not 1 <= m <= d:
            raise ManifoldError(f"projector needs 1 <= m <= d, got d={d}, m={m}")
        gram_defect = np.linalg.norm(a.T @ a - np.eye(m))
        if gram_defect > ORTHONORMALITY_TOL:
            raise ManifoldError(
                f"columns are not orthonormal: ||A^T A - I||_F = {gram_defect:.3e}"
            )
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def m(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class TangentVector:
    """Direction in the tangent space at ``base``: satisfies A^T delta = 0.

    The tangency defect is checked relative to ||delta||_F (floored at 1):
    for large tangents an absolute bound is unattainable in double
    precision, since one projection already leaves a defect of order
    eps * ||delta||.
    """

    delta: np.ndarray
    base: Projector

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=float)
        if delta.shape != self.base.matrix.shape:
            raise ManifoldError(
                f"tangent shape {delta.shape} does not match base {self.base.matrix.shape}"
            )
        defect = np.linalg.norm(self.base.matrix.T @ delta)
        scale = max(1.0, float(np.linalg.norm(delta)))
        if defect > ORTHONORMALITY_TOL * scale:
            raise ManifoldError(f"not tangent at base: ||A^T delta||_F = {defect:.3e}")
        delta.setflags(write=False)
        object.__setattr__(self, "delta", delta)


def tangent_project(base: Projector, ambient: np.ndarray) -> TangentVector:
    """Project an ambient d x m matrix onto the tangent space at ``base``.

    Returns (I - A A^T) G, computed as G - A (A^T G).
    """
    g = np.asarray(ambient, dtype=float)
    a = base.matrix
    if g.shape != a.shape:
        raise ManifoldError(f"expected shape {a.shape}, got {g.shape}")
    delta = g - a @ (a.T @ g)
    # the defect of delta is ~eps * ||G||; re-project once so the
    # TangentVector invariant holds even for huge inputs
    delta -= a @ (a.T @ delta)
    return TangentVector(delta, base)


def polar_retract(base: Projector, delta: np.ndarray) -> Projector:
    """Move from ``base`` along ``delta`` and re-orthonormalize.

    Returns U V^T from the thin SVD of A + delta.  For tangent deltas this
    is a second-order accurate approximation of the exponential map; the
    output's subspace does not depend on sign conventions of the SVD.
    """
    if isinstance(delta, TangentVector):
        delta = delta.delta
    delta = np.asarray(delta, dtype=float)
    a = base.matrix
    if delta.shape != a.shape:
        raise ManifoldError(f"expected shape {a.shape}, got {delta.shape}")
    u, s, vt = np.linalg.svd(a + delta, full_matrices=False)
    if s[-1] < RANK_DEFICIENCY_TOL:
        raise ManifoldError(
            f"degenerate step: smallest singular value {s[-1]:.3e} of A + delta "
            f"is below {RANK_DEFICIENCY_TOL:.0e}"
        )
    # deterministic sign convention: largest-magnitude entry of each U column positive
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u = u * signs
    vt = vt * signs[:, None]
    return Projector(u @ vt)


def sample_tangent_noise(base: Projector, rng: np.random.Generator) -> TangentVector:
    """Standard Gaussian d x m noise projected onto the tangent space at ``base``."""
    xi = rng.standard_normal(base.matrix.shape)
    return tangent_project(base, xi)


def init_projectors(d: int, m: int, n_projectors: int) -> list[Projector]:
    """Block one-hot initialization: projector l spans coordinates l*m .. (l+1)*m - 1.

    The concatenation of all blocks is column-orthonormal by construction.
    """
    if m < 1 or n_projectors < 1:
        raise ManifoldError(f"need m >= 1 and n_projectors >= 1, got m={m}, M={n_projectors}")
    if n_projectors * m > d:
        raise ManifoldError(
            f"cannot fit {n_projectors} disjoint rank-{m} blocks in dimension {d}"
        )
    eye = np.eye(d)
    return [Projector(eye[:, l * m:(l + 1) * m]) for l in range(n_projectors)]


def reorthonormalize(projectors: list[Projector]) -> list[Projector]:
    """Restore joint orthonormality of a projector batch via Householder QR.

    The column-wise concatenation is QR-factored with the R diagonal
    normalized to be nonnegative (deterministic output), then split back
    into blocks of the original ranks.
    """
    if not projectors:
        return []
    d = projectors[0].d
    ranks = [p.m for p in projectors]
    if any(p.d != d for p in projectors):
        raise ManifoldError("projectors must share the ambient dimension")
    if sum(ranks) > d:
        raise ManifoldError(f"total rank {sum(ranks)} exceeds ambient dimension {d}")
    stacked = np.concatenate([p.matrix for p in projectors], axis=1)
    q, r = np.linalg.qr(stacked)
    diag = np.diagonal(r)
    if np.min(np.abs(diag)) < RANK_DEFICIENCY_TOL:
        raise ManifoldError("degenerate batch: concatenated projectors are rank deficient")
    signs = np.where(diag < 0, -1.0, 1.0)
    q = q * signs
    out = []
    offset = 0
    for m in ranks:
        out.append(Projector(q[:, offset:offset + m]))
        offset += m
    return out


def subspace_distance(a: Projector, b: Projector) -> float:
    """Frobenius distance ||A A^T - B B^T||_F between the spanned subspaces.

    Zero iff both projectors span the same subspace; invariant to the
    choice of representative.
    """
    if a.d != b.d or a.m != b.m:
        raise ManifoldError(
            f"incompatible projectors: ({a.d},{a.m}) vs ({b.d},{b.m})"
        )
    return float(np.linalg.norm(a.matrix @ a.matrix.T - b.matrix @ b.matrix.T))
