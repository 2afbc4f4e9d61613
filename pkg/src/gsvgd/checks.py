"""Self-check suite behind ``gsvgd check``: fast invariants on small instances."""

from __future__ import annotations

import numpy as np

from . import discrepancy, kernels, manifold, metrics, sampler, targets


def _random_projector(rng, d, m):
    q, r = np.linalg.qr(rng.standard_normal((d, m)))
    return manifold.Projector(q * np.where(np.diagonal(r) < 0, -1.0, 1.0))


def check_manifold(rng) -> str | None:
    for d, m in ((4, 1), (6, 3), (5, 5)):
        a = _random_projector(rng, d, m)
        delta = manifold.tangent_project(a, rng.standard_normal((d, m))).delta
        b = manifold.polar_retract(a, 0.3 * delta)
        defect = np.linalg.norm(b.matrix.T @ b.matrix - np.eye(m))
        if defect > 1e-10:
            return f"retraction lost orthonormality by {defect:.2e}"
        if manifold.subspace_distance(manifold.polar_retract(a, np.zeros((d, m))), a) > 1e-10:
            return "retraction at zero moved the subspace"
    return None


def check_kernel_derivatives(rng) -> str | None:
    for family in (kernels.GAUSSIAN, kernels.IMQ):
        spec = kernels.RadialKernelSpec(family, bandwidth=0.7)
        for _ in range(10):
            u, v = rng.standard_normal(3), rng.standard_normal(3)
            step = 1e-5
            fd = np.array([
                (spec.eval(u, v + step * e) - spec.eval(u, v - step * e)) / (2 * step)
                for e in np.eye(3)
            ])
            if np.linalg.norm(fd - spec.grad2(u, v)) > 1e-6 * max(1.0, np.linalg.norm(fd)):
                return f"{family} grad2 disagrees with finite differences"
    return None


def check_scores(rng) -> str | None:
    models = [
        targets.GaussianTarget(rng.standard_normal(4), np.diag(rng.uniform(0.5, 2.0, 4))),
        targets.make_multimodal_target(4),
        targets.reference_diffusion_model(),
    ]
    for model in models:
        x = rng.standard_normal(model.dim) * 0.3
        score = model.score(x)
        step = 1e-5
        for j in range(0, model.dim, max(1, model.dim // 7)):
            e = np.zeros(model.dim)
            e[j] = step
            fd = (model.log_density_unnormalized(x + e) - model.log_density_unnormalized(x - e)) / (2 * step)
            if abs(fd - score[j]) > 1e-4 * max(1.0, abs(fd)):
                return f"{type(model).__name__} score[{j}] disagrees with finite differences"
    return None


def check_ksd_invariance(rng) -> str | None:
    d, m, n = 5, 2, 25
    x, s = rng.standard_normal((n, d)), rng.standard_normal((n, d))
    spec = kernels.RadialKernelSpec(bandwidth=1.3)
    a = _random_projector(rng, d, m)
    base = discrepancy.ksd_vstat(x, s, a, spec)
    for _ in range(5):
        c, _ = np.linalg.qr(rng.standard_normal((m, m)))
        rotated = discrepancy.ksd_vstat(x, s, manifold.Projector(a.matrix @ c), spec)
        if abs(base - rotated) > 1e-10:
            return f"value changed by {abs(base - rotated):.2e} under an orthogonal factor"
    return None


def check_ksd_gradient(rng) -> str | None:
    d, m, n = 5, 2, 12
    x, s = rng.standard_normal((n, d)), rng.standard_normal((n, d))
    spec = kernels.RadialKernelSpec(bandwidth=0.9)
    a = _random_projector(rng, d, m)
    grad = discrepancy.grad_a_ksd(x, s, a, spec)
    step = 1e-5
    for idx in ((0, 0), (2, 1), (4, 0)):
        bump = np.zeros((d, m))
        bump[idx] = step
        fd = (
            discrepancy.ksd_vstat(x, s, a.matrix + bump, spec)
            - discrepancy.ksd_vstat(x, s, a.matrix - bump, spec)
        ) / (2 * step)
        if abs(fd - grad[idx]) > 1e-5 * max(1.0, abs(fd)):
            return f"gradient entry {idx} disagrees with finite differences"
    return None


def check_svgd_reduction(rng) -> str | None:
    model = targets.GaussianTarget.standard(3)
    config = sampler.GsvgdConfig(
        dim=3, m=3, n_projectors=1, projector_step=0.0,
        anneal=sampler.AnnealSchedule(t0=0.0, threshold=0.0),
        iterations=20, seed=7,
    )
    init = lambda rng_, n: 1.0 + rng_.standard_normal((n, 3))
    full = sampler.run(model, config, 15, init, method="gsvgd")
    plain = sampler.run(model, config, 15, init, method="svgd")
    gap = np.abs(full.particles - plain.particles).max()
    if gap > 1e-8:
        return f"projected sampler with the identity projector deviates by {gap:.2e}"
    return None


def check_determinism(rng) -> str | None:
    model = targets.make_xshaped_target(4)
    config = sampler.GsvgdConfig(dim=4, m=2, iterations=15, seed=11)
    init = lambda rng_, n: rng_.standard_normal((n, 4))
    first = sampler.run(model, config, 12, init)
    second = sampler.run(model, config, 12, init)
    if not np.array_equal(first.particles, second.particles):
        return "two identically seeded runs differ"
    return None


def check_metrics(rng) -> str | None:
    if abs(metrics.energy_distance([[0.0]], [[2.0]]) - 4.0) > 1e-12:
        return "energy distance of {0} vs {2} is not 4"
    if abs(metrics.covariance_error([[-1.0, 0.0], [1.0, 0.0]], np.diag([2.0, 0.0]))) > 1e-12:
        return "two-point covariance error is not 0"
    if abs(metrics.dim_avg_marginal_variance([[0.0, 0.0], [2.0, 2.0]]) - 2.0) > 1e-12:
        return "dimension-averaged variance of the two-point cloud is not 2"
    return None


CHECKS = [
    ("manifold retraction", check_manifold),
    ("kernel derivatives", check_kernel_derivatives),
    ("target scores", check_scores),
    ("ksd projector invariance", check_ksd_invariance),
    ("ksd projector gradient", check_ksd_gradient),
    ("svgd reduction", check_svgd_reduction),
    ("run determinism", check_determinism),
    ("metric values", check_metrics),
]


def run_checks(verbose: bool = True) -> bool:
    """Run every check; returns True when all pass."""
    rng = np.random.default_rng(20240817)
    all_ok = True
    for name, fn in CHECKS:
        failure = fn(rng)
        ok = failure is None
        all_ok &= ok
        if verbose:
            status = "ok" if ok else "FAIL"
            detail = "" if ok else f" — {failure}"
            print(f"{status:4s} {name}{detail}")
    return all_ok
