"""Particle evolutions: plain Stein descent and its subspace-projected variant.

One projected step moves every particle only inside the span of the
current projectors, each projector being driven up the gradient of the
projected Stein discrepancy plus tangent-space noise whose temperature
follows an annealing schedule.  All randomness comes from an explicit
generator, so trajectories are reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, replace

import numpy as np

from .discrepancy import KsdWorkspace, grad_from_workspace
from .kernels import KernelPolicy, pairwise_sqdist
from .manifold import Projector, init_projectors, polar_retract, reorthonormalize, tangent_project


class DivergenceError(RuntimeError):
    """A particle or projector update produced non-finite or overflow-bound values."""


# beyond this magnitude squared distances overflow, so treat it as divergence
DIVERGENCE_BOUND = 1e150


def _check_particles(particles: np.ndarray) -> None:
    if not np.all(np.isfinite(particles)) or np.abs(particles).max() > DIVERGENCE_BOUND:
        raise DivergenceError("particle update produced non-finite or unbounded values")


class SamplerConfigError(ValueError):
    """Inconsistent sampler configuration."""


@dataclass(frozen=True)
class AnnealSchedule:
    """Temperature schedule: multiply by ``factor`` (up to ``t_large``)
    whenever the particle-averaged update magnitude stalls below ``threshold``."""

    t0: float = 1e-4
    t_large: float = 1e6
    factor: float = 10.0
    threshold: float = 1e-4

    def __post_init__(self):
        if self.t0 < 0 or self.t_large < self.t0:
            raise SamplerConfigError("need 0 <= t0 <= t_large")
        if self.factor < 1 or self.threshold < 0:
            raise SamplerConfigError("need factor >= 1 and threshold >= 0")


@dataclass(frozen=True)
class AnnealState:
    temperature: float
    previous_magnitude: float | None = None


@dataclass(frozen=True)
class GsvgdConfig:
    """Step sizes and projector layout for the subspace sampler."""

    dim: int
    m: int = 1
    n_projectors: int | None = None
    step_size: float = 0.1
    projector_step: float = 0.1
    anneal: AnnealSchedule | None = None
    reorthonormalize_every: int = 1000
    iterations: int = 2000
    seed: int = 0
    adagrad: bool = False

    def __post_init__(self):
        if self.dim < 1 or not 1 <= self.m <= self.dim:
            raise SamplerConfigError(f"need 1 <= m <= dim, got m={self.m}, dim={self.dim}")
        m_cap = default_projector_count(self.dim, self.m)
        n = self.n_projectors
        if n is None:
            object.__setattr__(self, "n_projectors", m_cap)
        elif not 1 <= n * self.m <= self.dim:
            raise SamplerConfigError(
                f"projector count {n} of rank {self.m} does not fit in dimension {self.dim}"
            )
        if self.anneal is None:
            object.__setattr__(
                self, "anneal", AnnealSchedule(threshold=1e-4 * self.n_projectors)
            )
        if self.step_size < 0 or self.projector_step < 0:
            raise SamplerConfigError("step sizes must be nonnegative")
        if self.iterations < 0 or self.reorthonormalize_every < 1:
            raise SamplerConfigError("iterations >= 0 and reorthonormalize_every >= 1 required")


def default_projector_count(d: int, m: int) -> int:
    """min(20, floor(d / m)) projectors of rank m."""
    return min(20, d // m)


@dataclass(frozen=True)
class GsvgdState:
    particles: np.ndarray
    projectors: tuple[Projector, ...]
    anneal: AnnealState
    iteration: int = 0


def particle_avg_magnitude(updates) -> float:
    """Mean over particles of the max-absolute-coordinate of their update."""
    u = np.atleast_2d(np.asarray(updates, dtype=float))
    if u.size == 0:
        return 0.0
    return float(np.abs(u).max(axis=1).mean())


def anneal_update(state: AnnealState, magnitude: float, schedule: AnnealSchedule) -> AnnealState:
    """Raise the temperature when the update magnitude has stalled."""
    if magnitude < 0:
        raise SamplerConfigError("magnitude must be nonnegative")
    temperature = state.temperature
    if (
        state.previous_magnitude is not None
        and abs(magnitude - state.previous_magnitude) < schedule.threshold
    ):
        temperature = min(temperature * schedule.factor, schedule.t_large)
    return AnnealState(temperature=temperature, previous_magnitude=magnitude)


def _phi_from_workspace(ws: KsdWorkspace) -> np.ndarray:
    """Average Stein transport direction, one row per particle (n x d).

    Row i is (1/n) sum_j [ A A^T s_j k(u_j, u_i) + A grad_1 k(u_j, u_i) ]
    with u = A^T x; the gradient is taken in the first (j-indexed) argument,
    which for a radial kernel pushes nearby particles apart.
    """
    t, u, k = ws.projected_scores, ws.projected_points, ws.kernel_matrix
    n = t.shape[0]
    scalars = ws.spec.deriv_scalars()
    if scalars is not None:
        c1 = scalars[0]
        repulse = (2.0 * c1) * (k @ u - k.sum(axis=1)[:, None] * u)
    else:
        p1 = ws.phi_derivs(1)[1]
        repulse = 2.0 * (p1 @ u - p1.sum(axis=1)[:, None] * u)
    phi_proj = (k @ t + repulse) / n
    if ws.projector_matrix is None:
        return phi_proj
    return phi_proj @ ws.projector_matrix.T


def gsvgd_phi(particles, scores, projector, kernel) -> np.ndarray:
    """Projected Stein update for one projector; every row lies in its span."""
    from .discrepancy import _resolve_spec

    spec = _resolve_spec(kernel, particles, projector)
    ws = KsdWorkspace.build(particles, scores, projector, spec)
    return _phi_from_workspace(ws)


def svgd_step(particles, model, kernel_policy: KernelPolicy, step_size: float) -> np.ndarray:
    """One full-space Stein descent step with the bandwidth policy applied to
    the raw particles."""
    x = np.asarray(particles, dtype=float)
    scores = model.score_batch(x)
    spec = kernel_policy.spec_for(x)
    ws = KsdWorkspace.build(x, scores, None, spec)
    new = x + step_size * _phi_from_workspace(ws)
    _check_particles(new)
    return new


def gsvgd_step(
    state: GsvgdState,
    model,
    kernel_policy: KernelPolicy,
    config: GsvgdConfig,
    rng: np.random.Generator,
) -> GsvgdState:
    """One iteration of the projected sampler.

    Scores are evaluated once; the particle update uses the
    iteration-start projectors, and each projector then takes one
    retraction step along its discrepancy gradient plus sqrt(2 T delta)
    tangent noise at the pre-update temperature.  Joint orthonormality is
    re-imposed every ``reorthonormalize_every`` iterations.
    """
    x = state.particles
    scores = model.score_batch(x)
    total_phi = np.zeros_like(x)
    temperature = state.anneal.temperature
    noise_scale = np.sqrt(2.0 * temperature * config.projector_step)

    new_projectors = []
    for projector in state.projectors:
        projected = x @ projector.matrix
        sqdist = pairwise_sqdist(projected)
        spec = kernel_policy.spec_from_sqdist(sqdist, n_for_log=x.shape[0])
        ws = KsdWorkspace.build(
            x, scores, projector, spec, projected_points=projected, sqdist=sqdist
        )
        total_phi += _phi_from_workspace(ws)
        delta = None
        if config.projector_step > 0:
            grad = tangent_project(projector, grad_from_workspace(ws)).delta
            delta = config.projector_step * grad
        if noise_scale > 0:
            noise = tangent_project(projector, rng.standard_normal(projector.matrix.shape)).delta
            delta = noise_scale * noise if delta is None else delta + noise_scale * noise
        if delta is None:
            new_projectors.append(projector)
        else:
            if not np.all(np.isfinite(delta)):
                raise DivergenceError("projector update produced non-finite values")
            new_projectors.append(polar_retract(projector, delta))

    new_particles = x + config.step_size * total_phi
    _check_particles(new_particles)

    magnitude = particle_avg_magnitude(total_phi)
    anneal = anneal_update(state.anneal, magnitude, config.anneal)
    iteration = state.iteration + 1
    if iteration % config.reorthonormalize_every == 0 and len(new_projectors) > 0:
        new_projectors = reorthonormalize(new_projectors)
    return GsvgdState(
        particles=new_particles,
        projectors=tuple(new_projectors),
        anneal=anneal,
        iteration=iteration,
    )


@dataclass(frozen=True)
class MetricSeries:
    """One metric's (iteration, value) trace for a single run."""

    name: str
    values: tuple[tuple[int, float], ...]
    seed: int
    config_digest: str

    def __post_init__(self):
        iters = [i for i, _ in self.values]
        if any(b <= a for a, b in zip(iters, iters[1:])):
            raise SamplerConfigError("metric iterations must be strictly increasing")

    def final_value(self) -> float:
        return self.values[-1][1]


@dataclass(frozen=True)
class SamplerRun:
    """Outcome of one sampler run: final particles plus metric traces."""

    particles: np.ndarray
    series: tuple[MetricSeries, ...]
    iterations: int
    wall_time: float
    final_temperature: float | None = None

    def series_by_name(self) -> dict[str, MetricSeries]:
        return {s.name: s for s in self.series}


def config_digest(config: GsvgdConfig, method: str, n_particles: int) -> str:
    text = f"{method}|{n_particles}|{config}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def run(
    model,
    config: GsvgdConfig,
    n_particles: int,
    init_fn,
    method: str = "gsvgd",
    kernel_policy: KernelPolicy | None = None,
    rng: np.random.Generator | None = None,
    metric_hooks: dict | None = None,
    metric_stride: int = 100,
) -> SamplerRun:
    """Run the sampler for ``config.iterations`` steps.

    ``init_fn(rng, n_particles)`` draws the initial particle matrix;
    ``metric_hooks`` maps metric names to callables evaluated on the
    particles at iteration 0, every ``metric_stride`` iterations and at the
    final iteration.  Fully deterministic given ``config.seed`` (or a
    caller-provided generator).
    """
    if method not in ("svgd", "gsvgd"):
        raise SamplerConfigError(f"method must be 'svgd' or 'gsvgd', got {method!r}")
    if n_particles < 1:
        raise SamplerConfigError("need at least one particle")
    if metric_stride < 1:
        raise SamplerConfigError("metric_stride must be >= 1")
    if rng is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    if kernel_policy is None:
        kernel_policy = KernelPolicy()
    if model.dim != config.dim:
        raise SamplerConfigError(f"model dim {model.dim} != config dim {config.dim}")
    if config.adagrad and method != "svgd":
        # per-coordinate rescaling would push updates out of the projector span
        raise SamplerConfigError("adagrad scaling is only supported for method='svgd'")

    start = time.perf_counter()
    particles = np.asarray(init_fn(rng, n_particles), dtype=float)
    if particles.shape != (n_particles, config.dim):
        raise SamplerConfigError(
            f"init_fn returned shape {particles.shape}, expected {(n_particles, config.dim)}"
        )
    state = GsvgdState(
        particles=particles,
        projectors=tuple(init_projectors(config.dim, config.m, config.n_projectors)),
        anneal=AnnealState(temperature=config.anneal.t0),
    )

    hooks = metric_hooks or {}
    digest = config_digest(config, method, n_particles)
    traces: dict[str, list[tuple[int, float]]] = {name: [] for name in hooks}

    def record(iteration: int) -> None:
        for name, fn in hooks.items():
            traces[name].append((iteration, float(fn(state.particles))))

    record(0)
    grad_scale_acc = np.zeros_like(state.particles) if config.adagrad else None
    for t in range(config.iterations):
        try:
            if method == "svgd":
                scores = model.score_batch(state.particles)
                spec = kernel_policy.spec_for(state.particles)
                ws = KsdWorkspace.build(state.particles, scores, None, spec)
                phi = _phi_from_workspace(ws)
                if config.adagrad:
                    grad_scale_acc += phi * phi
                    phi = phi / (1e-6 + np.sqrt(grad_scale_acc))
                new_particles = state.particles + config.step_size * phi
                _check_particles(new_particles)
                state = replace(state, particles=new_particles, iteration=state.iteration + 1)
            else:
                state = gsvgd_step(state, model, kernel_policy, config, rng)
        except DivergenceError as exc:
            raise DivergenceError(f"{exc} (iteration {t + 1})") from exc
        if (t + 1) % metric_stride == 0 and (t + 1) != config.iterations:
            record(t + 1)
    if config.iterations > 0:
        record(config.iterations)

    series = tuple(
        MetricSeries(name=name, values=tuple(vals), seed=config.seed, config_digest=digest)
        for name, vals in traces.items()
    )
    return SamplerRun(
        particles=state.particles,
        series=series,
        iterations=config.iterations,
        wall_time=time.perf_counter() - start,
        final_temperature=state.anneal.temperature if method == "gsvgd" else None,
    )
