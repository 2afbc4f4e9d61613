"""Experiment configuration: a line-oriented ``key = value`` format.

Nested keys are dotted (``anneal.t0 = 1e-4``); ``#`` starts a comment.
Unknown keys, malformed values and out-of-range settings raise
``ConfigError`` naming the offending key.  ``render_config`` produces a
canonical dump that parses back to the same configuration, which is what
experiment outputs echo for replay.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from . import targets
from .kernels import GAUSSIAN, IMQ, KernelPolicy
from .sampler import AnnealSchedule, GsvgdConfig, default_projector_count

METHODS = ("svgd", "gsvgd")
TARGETS = ("gaussian", "multimodal", "xshaped", "diffusion")

_INIT_DEFAULTS = {  # (mean, variance) of the isotropic initial particle law
    "gaussian": (2.0, 2.0),
    "multimodal": (0.0, 1.0),
    "xshaped": (0.0, 1.0),
}

GROUND_TRUTH_STREAM = 2**32  # spawn key for the per-experiment reference sample


class ConfigError(ValueError):
    """Problem with an experiment configuration; the message names the key."""


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    target: str
    d: int
    n_particles: int
    iterations: int
    seed: int
    m: int = 1
    n_projectors: int | None = None
    step_size: float = 0.1
    projector_step: float = 0.1
    anneal_t0: float = 1e-4
    anneal_t_large: float = 1e6
    anneal_factor: float = 10.0
    anneal_threshold: float | None = None
    reorthonormalize_every: int = 1000
    kernel_family: str = GAUSSIAN
    kernel_bandwidth: float | None = None
    kernel_imq_beta: float = -0.5
    kernel_imq_c: float = 1.0
    repetitions: int = 1
    metric_stride: int = 100
    out_dir: str | None = None
    init_mean: float | None = None
    init_var: float | None = None
    target_correlation: float = 0.95
    target_sigma_obs: float = 0.1
    target_observation_seed: int | None = None
    ground_truth_samples: int = 2000
    adagrad: bool = False
    figures: bool = True

    # -- derived pieces ----------------------------------------------------

    def resolved_projector_count(self) -> int:
        if self.n_projectors is not None:
            return self.n_projectors
        return default_projector_count(self.d, self.m)

    def sampler_config(self, seed: int | None = None) -> GsvgdConfig:
        n_proj = self.resolved_projector_count()
        threshold = self.anneal_threshold
        if threshold is None:
            threshold = 1e-4 * n_proj
        return GsvgdConfig(
            dim=self.d,
            m=self.m,
            n_projectors=n_proj,
            step_size=self.step_size,
            projector_step=self.projector_step,
            anneal=AnnealSchedule(
                t0=self.anneal_t0,
                t_large=self.anneal_t_large,
                factor=self.anneal_factor,
                threshold=threshold,
            ),
            reorthonormalize_every=self.reorthonormalize_every,
            iterations=self.iterations,
            seed=self.seed if seed is None else seed,
            adagrad=self.adagrad,
        )

    def kernel_policy(self) -> KernelPolicy:
        return KernelPolicy(
            family=self.kernel_family,
            bandwidth=self.kernel_bandwidth,
            imq_beta=self.kernel_imq_beta,
            imq_c=self.kernel_imq_c,
        )

    def build_target(self):
        if self.target == "gaussian":
            return targets.GaussianTarget.standard(self.d)
        if self.target == "multimodal":
            return targets.make_multimodal_target(self.d)
        if self.target == "xshaped":
            return targets.make_xshaped_target(self.d, self.target_correlation)
        if self.target_observation_seed is None and self.target_sigma_obs == targets.SIGMA_OBS:
            return targets.reference_diffusion_model()
        seed = 0 if self.target_observation_seed is None else self.target_observation_seed
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        _, y = targets.generate_observations(rng, self.target_sigma_obs)
        return targets.ConditionedDiffusionModel(y, self.target_sigma_obs)

    def init_fn(self, model):
        if self.target == "diffusion":
            return lambda rng, n: model.sample_prior(n, rng)
        mean_default, var_default = _INIT_DEFAULTS[self.target]
        mean = mean_default if self.init_mean is None else self.init_mean
        var = var_default if self.init_var is None else self.init_var
        std = float(np.sqrt(var))
        d = self.d
        return lambda rng, n: mean + std * rng.standard_normal((n, d))


# -- key table ---------------------------------------------------------------

def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"key '{key}': expected a boolean, got {raw!r}")


def _parse_int(raw: str, key: str) -> int:
    try:
        value = float(raw)
        if value != int(value):
            raise ValueError
        return int(value)
    except ValueError:
        raise ConfigError(f"key '{key}': expected an integer, got {raw!r}") from None


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"key '{key}': expected a number, got {raw!r}") from None


def _parse_str(raw: str, key: str) -> str:
    return raw.strip()


# key -> (config field, parser)
_KEYS = {
    "method": ("method", _parse_str),
    "target": ("target", _parse_str),
    "d": ("d", _parse_int),
    "n_particles": ("n_particles", _parse_int),
    "n": ("n_particles", _parse_int),
    "iterations": ("iterations", _parse_int),
    "seed": ("seed", _parse_int),
    "m": ("m", _parse_int),
    "n_projectors": ("n_projectors", _parse_int),
    "step_size": ("step_size", _parse_float),
    "projector_step": ("projector_step", _parse_float),
    "anneal.t0": ("anneal_t0", _parse_float),
    "anneal.t_large": ("anneal_t_large", _parse_float),
    "anneal.factor": ("anneal_factor", _parse_float),
    "anneal.threshold": ("anneal_threshold", _parse_float),
    "reorthonormalize_every": ("reorthonormalize_every", _parse_int),
    "kernel.family": ("kernel_family", _parse_str),
    "kernel.bandwidth": ("kernel_bandwidth", _parse_float),
    "kernel.imq_beta": ("kernel_imq_beta", _parse_float),
    "kernel.imq_c": ("kernel_imq_c", _parse_float),
    "repetitions": ("repetitions", _parse_int),
    "metric_stride": ("metric_stride", _parse_int),
    "out_dir": ("out_dir", _parse_str),
    "init.mean": ("init_mean", _parse_float),
    "init.var": ("init_var", _parse_float),
    "target.correlation": ("target_correlation", _parse_float),
    "target.sigma_obs": ("target_sigma_obs", _parse_float),
    "target.observation_seed": ("target_observation_seed", _parse_int),
    "ground_truth_samples": ("ground_truth_samples", _parse_int),
    "adagrad": ("adagrad", _parse_bool),
    "figures": ("figures", _parse_bool),
}

_REQUIRED = ("method", "target", "d", "n_particles", "iterations", "seed")

# canonical dump order and key names (one per config field)
_CANONICAL_KEY = {field_name: key for key, (field_name, _) in _KEYS.items() if key != "n"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate the documented key = value format."""
    values: dict[str, object] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, raw_value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key '{key}' (line {lineno})")
        field_name, parser = _KEYS[key]
        if field_name in values:
            raise ConfigError(f"key '{key}': set more than once")
        values[field_name] = parser(raw_value, key)

    missing = [key for key in _REQUIRED if key not in values]
    if missing:
        raise ConfigError(f"missing required key '{missing[0]}'")
    config = ExperimentConfig(**values)
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    if config.method not in METHODS:
        raise ConfigError(f"key 'method': must be one of {METHODS}, got {config.method!r}")
    if config.target not in TARGETS:
        raise ConfigError(f"key 'target': must be one of {TARGETS}, got {config.target!r}")
    if config.d < 1:
        raise ConfigError(f"key 'd': must be positive, got {config.d}")
    if config.target == "diffusion" and config.d != targets.N_STEPS:
        raise ConfigError(f"key 'd': diffusion target is {targets.N_STEPS}-dimensional, got {config.d}")
    if config.target in ("multimodal", "xshaped") and config.d < 2:
        raise ConfigError(f"key 'd': target {config.target!r} needs d >= 2")
    if config.n_particles < 1:
        raise ConfigError(f"key 'n_particles': must be positive, got {config.n_particles}")
    if config.iterations < 0:
        raise ConfigError(f"key 'iterations': must be nonnegative, got {config.iterations}")
    if not 1 <= config.m <= config.d:
        raise ConfigError(f"key 'm': need 1 <= m <= d, got m={config.m}, d={config.d}")
    n_proj = config.resolved_projector_count()
    if not 1 <= n_proj * config.m <= config.d:
        raise ConfigError(
            f"key 'n_projectors': {n_proj} projectors of rank {config.m} do not fit in d={config.d}"
        )
    for key, value in (
        ("step_size", config.step_size),
        ("projector_step", config.projector_step),
    ):
        if value < 0:
            raise ConfigError(f"key '{key}': must be nonnegative, got {value}")
    if config.anneal_t0 < 0 or config.anneal_t_large < config.anneal_t0:
        raise ConfigError("key 'anneal.t0': need 0 <= t0 <= t_large")
    if config.anneal_factor < 1:
        raise ConfigError(f"key 'anneal.factor': must be >= 1, got {config.anneal_factor}")
    if config.anneal_threshold is not None and config.anneal_threshold < 0:
        raise ConfigError("key 'anneal.threshold': must be nonnegative")
    if config.reorthonormalize_every < 1:
        raise ConfigError("key 'reorthonormalize_every': must be >= 1")
    if config.kernel_family not in (GAUSSIAN, IMQ):
        raise ConfigError(
            f"key 'kernel.family': must be '{GAUSSIAN}' or '{IMQ}', got {config.kernel_family!r}"
        )
    if config.kernel_bandwidth is not None and config.kernel_bandwidth <= 0:
        raise ConfigError("key 'kernel.bandwidth': must be positive")
    if not -1.0 < config.kernel_imq_beta < 0.0:
        raise ConfigError("key 'kernel.imq_beta': must lie in (-1, 0)")
    if config.kernel_imq_c <= 0:
        raise ConfigError("key 'kernel.imq_c': must be positive")
    if config.repetitions < 1:
        raise ConfigError(f"key 'repetitions': must be >= 1, got {config.repetitions}")
    if config.metric_stride < 1:
        raise ConfigError(f"key 'metric_stride': must be >= 1, got {config.metric_stride}")
    if config.init_var is not None and config.init_var <= 0:
        raise ConfigError("key 'init.var': must be positive")
    if config.target == "diffusion" and (config.init_mean is not None or config.init_var is not None):
        raise ConfigError("key 'init.mean': diffusion particles are initialized from the prior")
    if config.target_sigma_obs <= 0:
        raise ConfigError("key 'target.sigma_obs': must be positive")
    if not 0 <= config.target_correlation < 1:
        raise ConfigError("key 'target.correlation': must lie in [0, 1)")
    if config.ground_truth_samples < 2:
        raise ConfigError("key 'ground_truth_samples': must be >= 2")
    if config.adagrad and config.method != "svgd":
        raise ConfigError("key 'adagrad': only supported for method = svgd")


def render_config(config: ExperimentConfig) -> str:
    """Canonical dump; ``parse_config(render_config(c))`` equals ``c``."""
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        key = _CANONICAL_KEY[f.name]
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def with_overrides(
    config: ExperimentConfig, seed: int | None = None, out_dir: str | None = None
) -> ExperimentConfig:
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if out_dir is not None:
        updates["out_dir"] = out_dir
    return replace(config, **updates) if updates else config
