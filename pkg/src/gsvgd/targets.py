"""Target distributions: score functions, exact samplers, analytic moments.

Every target exposes ``score`` (gradient of the log density at one point)
and ``score_batch`` (vectorized over an n x d particle matrix).  The
synthetic targets also provide exact ground-truth sampling and closed-form
covariances so benchmark metrics carry no extra Monte-Carlo noise.  The
conditioned diffusion posterior is parameterized by the Brownian increments
of its forcing path, with the likelihood gradient obtained by reverse
accumulation through the forward Euler recurrence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol, runtime_checkable

import numpy as np


class TargetError(ValueError):
    """Invalid target parameters or input shapes."""


@runtime_checkable
class ScoreModel(Protocol):
    """Minimal interface a sampler needs from a target density."""

    dim: int

    def score(self, x: np.ndarray) -> np.ndarray: ...

    def score_batch(self, points: np.ndarray) -> np.ndarray: ...


def _as_point(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (dim,):
        raise TargetError(f"expected a length-{dim} point, got shape {x.shape}")
    return x


def _as_batch(points, dim: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != dim:
        raise TargetError(f"expected n x {dim} points, got shape {pts.shape}")
    return pts


def _check_spd(cov: np.ndarray, what: str) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise TargetError(f"{what} must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise TargetError(f"{what} must be symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise TargetError(f"{what} is not positive definite") from exc
    return cov


class GaussianTarget:
    """Multivariate normal N(mean, covariance) with closed-form score."""

    def __init__(self, mean, covariance):
        self.mean = np.asarray(mean, dtype=float).ravel()
        self.dim = self.mean.size
        cov = np.asarray(covariance, dtype=float)
        if cov.ndim == 1:
            if cov.shape != (self.dim,):
                raise TargetError("diagonal covariance length must match the mean")
            if np.any(cov <= 0):
                raise TargetError("diagonal covariance entries must be positive")
            cov = np.diag(cov)
        self.covariance_matrix = _check_spd(cov, "covariance")
        if self.covariance_matrix.shape[0] != self.dim:
            raise TargetError("covariance size must match the mean")
        self._chol = np.linalg.cholesky(self.covariance_matrix)
        self._precision = np.linalg.inv(self.covariance_matrix)

    @classmethod
    def standard(cls, dim: int) -> "GaussianTarget":
        return cls(np.zeros(dim), np.eye(dim))

    def score(self, x) -> np.ndarray:
        return self.score_batch(_as_point(x, self.dim))[0]

    def score_batch(self, points) -> np.ndarray:
        pts = _as_batch(points, self.dim)
        return -(pts - self.mean) @ self._precision

    def log_density_unnormalized(self, x) -> float:
        diff = _as_point(x, self.dim) - self.mean
        return float(-0.5 * diff @ self._precision @ diff)

    def sample_ground_truth(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self._chol.T

    def covariance(self) -> np.ndarray:
        return self.covariance_matrix.copy()


class GaussianMixtureTarget:
    """Finite Gaussian mixture with log-sum-exp stabilized responsibilities."""

    def __init__(self, weights, means, covariances):
        self.weights = np.asarray(weights, dtype=float).ravel()
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise TargetError("mixture weights must be nonnegative and sum to 1")
        self.means = np.asarray(means, dtype=float)
        if self.means.ndim != 2 or self.means.shape[0] != self.weights.size:
            raise TargetError("means must be a K x d matrix matching the weights")
        self.n_components, self.dim = self.means.shape
        covs = [np.asarray(c, dtype=float) for c in covariances]
        if len(covs) != self.n_components:
            raise TargetError("need one covariance per component")
        self.covariances = [_check_spd(c, f"covariance {k}") for k, c in enumerate(covs)]
        self._chols = [np.linalg.cholesky(c) for c in self.covariances]
        self._precisions = [np.linalg.inv(c) for c in self.covariances]
        self._log_consts = np.array(
            [
                np.log(w) - np.sum(np.log(np.diagonal(l))) if w > 0 else -np.inf
                for w, l in zip(self.weights, self._chols)
            ]
        )

    def _component_pulls(self, pts):
        """Per-component precision-weighted residuals and log posteriors."""
        n = pts.shape[0]
        pulls = np.empty((self.n_components, n, self.dim))
        logits = np.empty((self.n_components, n))
        for k in range(self.n_components):
            diff = pts - self.means[k]
            pulls[k] = diff @ self._precisions[k]
            logits[k] = self._log_consts[k] - 0.5 * np.einsum("ij,ij->i", diff, pulls[k])
        return pulls, logits

    def score(self, x) -> np.ndarray:
        return self.score_batch(_as_point(x, self.dim))[0]

    def score_batch(self, points) -> np.ndarray:
        pts = _as_batch(points, self.dim)
        pulls, logits = self._component_pulls(pts)
        top = logits.max(axis=0)
        resp = np.exp(logits - top)
        resp /= resp.sum(axis=0)
        return -np.einsum("kn,knd->nd", resp, pulls)

    def log_density_unnormalized(self, x) -> float:
        pts = _as_batch(_as_point(x, self.dim), self.dim)
        _, logits = self._component_pulls(pts)
        top = logits.max(axis=0)
        return float(top[0] + np.log(np.exp(logits - top).sum(axis=0))[0])

    def sample_ground_truth(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comps = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        out = np.empty((n, self.dim))
        for k in range(self.n_components):
            mask = comps == k
            out[mask] = self.means[k] + z[mask] @ self._chols[k].T
        return out

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def covariance(self) -> np.ndarray:
        """Exact mixture covariance: sum_k w_k (Sigma_k + mu_k mu_k^T) - mu mu^T."""
        mu = self.mean()
        second = sum(
            w * (c + np.outer(m, m))
            for w, m, c in zip(self.weights, self.means, self.covariances)
        )
        return second - np.outer(mu, mu)


def make_multimodal_target(d: int) -> GaussianMixtureTarget:
    """Four equal-weight unit-covariance modes on a circle of radius sqrt(5).

    The modes live in the first two coordinates (angles pi/4 + k*pi/2); all
    remaining coordinates are standard normal.
    """
    if d < 2:
        raise TargetError(f"multimodal target needs d >= 2, got {d}")
    means = np.zeros((4, d))
    radius = np.sqrt(5.0)
    for k in range(1, 5):
        angle = 2.0 * k * np.pi / 4.0 + np.pi / 4.0
        means[k - 1, 0] = radius * np.cos(angle)
        means[k - 1, 1] = radius * np.sin(angle)
    covs = [np.eye(d) for _ in range(4)]
    return GaussianMixtureTarget(np.full(4, 0.25), means, covs)


def make_xshaped_target(d: int, correlation: float = 0.95) -> GaussianMixtureTarget:
    """Two-component mixture whose leading 2 x 2 blocks are +/- correlated.

    Component means have ones in the first two coordinates and zeros
    elsewhere; plotted marginally in those coordinates the density forms
    an X.
    """
    if d < 2:
        raise TargetError(f"x-shaped target needs d >= 2, got {d}")
    if not 0 <= correlation < 1:
        raise TargetError("correlation must lie in [0, 1)")
    mean = np.zeros(d)
    mean[:2] = 1.0
    covs = []
    for sign in (1.0, -1.0):
        c = np.eye(d)
        c[0, 1] = c[1, 0] = sign * correlation
        covs.append(c)
    return GaussianMixtureTarget(np.array([0.5, 0.5]), np.stack([mean, mean]), covs)


# -- conditioned diffusion ------------------------------------------------

N_STEPS = 100
DT = 1e-2
N_OBSERVATIONS = 20
OBS_STRIDE = 5
SIGMA_OBS = 0.1
# 0-based indices into the solution path (u_1 .. u_100) observed at t = 0.05 i
OBS_PATH_INDICES = np.arange(1, N_OBSERVATIONS + 1) * OBS_STRIDE - 1


def drift(u):
    """Forcing-free dynamics 10 u (1 - u^2) / (1 + u^2)."""
    u = np.asarray(u, dtype=float)
    u2 = u * u
    return 10.0 * u * (1.0 - u2) / (1.0 + u2)


def drift_deriv(u):
    """Derivative of the drift: 10 (1 - 4 u^2 - u^4) / (1 + u^2)^2."""
    u = np.asarray(u, dtype=float)
    u2 = u * u
    return 10.0 * (1.0 - 4.0 * u2 - u2 * u2) / (1.0 + u2) ** 2


@dataclass(frozen=True)
class ConditionedDiffusionModel:
    """Posterior over Brownian increments of a forced scalar diffusion.

    State u solves u' = drift(u) + forcing' on [0, 1], u(0) = 0, discretized
    by explicit Euler with 100 steps of size dt = 0.01 where the forcing
    contributes the increment w_j at step j.  Noisy observations of u at the
    20 times t = 0.05 i condition the prior w_j ~ N(0, dt) i.i.d.
    """

    observations: np.ndarray
    sigma_obs: float = SIGMA_OBS
    dim: int = field(default=N_STEPS, init=False)

    def __post_init__(self):
        y = np.asarray(self.observations, dtype=float).ravel()
        if y.shape != (N_OBSERVATIONS,):
            raise TargetError(f"expected {N_OBSERVATIONS} observations, got {y.shape}")
        if self.sigma_obs <= 0:
            raise TargetError("observation noise must be positive")
        y.setflags(write=False)
        object.__setattr__(self, "observations", y)

    def forward(self, increments) -> np.ndarray:
        """Solution path (u_1, ..., u_100) for one increment vector."""
        return self.forward_batch(_as_batch(increments, N_STEPS))[0]

    def forward_batch(self, increments) -> np.ndarray:
        w = _as_batch(increments, N_STEPS)
        path = np.empty_like(w)
        u = np.zeros(w.shape[0])
        for j in range(N_STEPS):
            u = u + drift(u) * DT + w[:, j]
            path[:, j] = u
        return path

    def score(self, increments) -> np.ndarray:
        return self.score_batch(_as_point(increments, N_STEPS))[0]

    def score_batch(self, increments) -> np.ndarray:
        """Gradient of the log posterior: -w/dt plus the adjoint of the data misfit."""
        w = _as_batch(increments, N_STEPS)
        path = self.forward_batch(w)
        residual_weight = np.zeros_like(path)
        residual_weight[:, OBS_PATH_INDICES] = (
            self.observations - path[:, OBS_PATH_INDICES]
        ) / self.sigma_obs**2
        grad = np.empty_like(path)
        adjoint = np.zeros(w.shape[0])
        for j in range(N_STEPS - 1, -1, -1):
            adjoint = adjoint * (1.0 + drift_deriv(path[:, j]) * DT) + residual_weight[:, j]
            grad[:, j] = adjoint
        return grad - w / DT

    def log_density_unnormalized(self, increments) -> float:
        w = _as_point(increments, N_STEPS)
        path = self.forward_batch(w[None, :])[0]
        misfit = self.observations - path[OBS_PATH_INDICES]
        return float(-0.5 * w @ w / DT - 0.5 * misfit @ misfit / self.sigma_obs**2)

    def sample_prior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Increment draws from the Brownian prior N(0, dt)^100."""
        return rng.standard_normal((n, N_STEPS)) * np.sqrt(DT)


def generate_observations(
    rng: np.random.Generator, sigma_obs: float = SIGMA_OBS
) -> tuple[np.ndarray, np.ndarray]:
    """Draw a true increment vector and noisy observations of its solution path.

    Returns (w_true, y).  ``sigma_obs = 0`` yields exact observations.
    """
    w_true = rng.standard_normal(N_STEPS) * np.sqrt(DT)
    u = np.zeros(1)
    path = np.empty(N_STEPS)
    for j in range(N_STEPS):
        u = u + drift(u) * DT + w_true[j]
        path[j] = u[0]
    y = path[OBS_PATH_INDICES].copy()
    if sigma_obs > 0:
        y += sigma_obs * rng.standard_normal(N_OBSERVATIONS)
    return w_true, y


def load_reference_observations() -> tuple[np.ndarray, np.ndarray, float]:
    """Fixed benchmark observation set shipped with the package.

    Returns (w_true, y, sigma_obs); every benchmark run conditions on the
    same data so results are comparable across machines.
    """
    payload = json.loads(
        resources.files("gsvgd.data").joinpath("diffusion_observations.json").read_text()
    )
    return (
        np.asarray(payload["w_true"], dtype=float),
        np.asarray(payload["observations"], dtype=float),
        float(payload["sigma_obs"]),
    )


def reference_diffusion_model() -> ConditionedDiffusionModel:
    _, y, sigma = load_reference_observations()
    return ConditionedDiffusionModel(y, sigma)
