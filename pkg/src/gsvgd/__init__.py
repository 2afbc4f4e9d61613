"""Particle-based variational inference with subspace-projected Stein updates.

The package provides plain Stein variational gradient descent, its
Grassmann-projected variant with annealed stochastic subspace dynamics, the
projected kernel Stein discrepancy (value, gradients and worst-case
subspace search), synthetic benchmark targets, sample-quality metrics and a
seeded experiment harness with a CLI.
"""

__version__ = "0.1.0"

from .discrepancy import (
    KsdWorkspace,
    bootstrap_se,
    bootstrap_vstats,
    gksd_estimate,
    grad_a_ksd,
    grad_alpha_two_sample,
    ksd_two_sample,
    ksd_vstat,
    riemannian_grad,
    stein_kernel_matrix,
    two_sample_stein_matrix,
)
from .kernels import KernelPolicy, RadialKernelSpec, median_heuristic
from .manifold import (
    Projector,
    TangentVector,
    init_projectors,
    polar_retract,
    reorthonormalize,
    sample_tangent_noise,
    subspace_distance,
    tangent_project,
)
from .metrics import covariance_error, dim_avg_marginal_variance, energy_distance
from .sampler import (
    AnnealSchedule,
    AnnealState,
    DivergenceError,
    GsvgdConfig,
    GsvgdState,
    MetricSeries,
    SamplerRun,
    anneal_update,
    gsvgd_phi,
    gsvgd_step,
    particle_avg_magnitude,
    run,
    svgd_step,
)
from .targets import (
    ConditionedDiffusionModel,
    GaussianMixtureTarget,
    GaussianTarget,
    ScoreModel,
    generate_observations,
    make_multimodal_target,
    make_xshaped_target,
    reference_diffusion_model,
)

__all__ = [name for name in dir() if not name.startswith("_")]
