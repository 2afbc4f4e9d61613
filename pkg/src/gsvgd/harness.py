"""Experiment runner: seeds, repetitions, metrics, CSV/JSON/figure outputs.

Every output byte is a function of (config, seed): repetition r runs on its
own generator seeded with ``seed + r``, the ground-truth reference sample
uses a stream that does not depend on the repetition count, floats are
written with shortest round-trip formatting, and wall times never enter
the deterministic files.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, metrics, targets
from .config import GROUND_TRUTH_STREAM, ExperimentConfig, render_config
from .sampler import DivergenceError, SamplerRun
from .sampler import run as sampler_run

METRICS_CSV = "metrics.csv"
SUMMARY_JSON = "summary.json"
CONFIG_ECHO = "config_echo.txt"
DIFFUSION_CSV = "diffusion_paths.csv"


@dataclass(frozen=True)
class RunRecord:
    """One repetition: its seed, sampler output and config echo."""

    rep: int
    seed: int
    result: SamplerRun
    config_echo: str
    version: str = __version__


@dataclass(frozen=True)
class ExperimentOutcome:
    config: ExperimentConfig
    records: tuple[RunRecord, ...]
    diverged: dict[int, str]
    out_dir: Path
    files: tuple[Path, ...]
    wall_time: float

    @property
    def all_diverged(self) -> bool:
        return len(self.records) == 0


def rep_generator(seed: int, rep: int) -> np.random.Generator:
    """Counter-based generator for repetition ``rep`` of a base seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed + rep)))


def ground_truth_generator(seed: int) -> np.random.Generator:
    """Reference-sample stream; independent of the repetition count."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, GROUND_TRUTH_STREAM))))


def build_metric_hooks(config: ExperimentConfig, model) -> dict:
    """Metric closures with the ground truth baked in (exact samplers only)."""
    hooks: dict = {}
    if config.target != "diffusion":
        reference = model.sample_ground_truth(
            config.ground_truth_samples, ground_truth_generator(config.seed)
        )
        reference_cov = model.covariance()
        hooks["energy_distance"] = lambda x: metrics.energy_distance(x, reference)
        hooks["cov_error_frobenius"] = lambda x: metrics.covariance_error(x, reference_cov)
    hooks["dim_avg_var"] = metrics.dim_avg_marginal_variance
    return hooks


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentOutcome:
    """Run all repetitions, write CSV/JSON (and figures), return the outcome.

    A diverging repetition is recorded in the summary instead of aborting;
    only the surviving repetitions contribute rows and statistics.
    """
    started = time.perf_counter()
    out_path = Path(out_dir if out_dir is not None else (config.out_dir or "results"))
    out_path.mkdir(parents=True, exist_ok=True)

    model = config.build_target()
    hooks = build_metric_hooks(config, model)
    init_fn = config.init_fn(model)
    policy = config.kernel_policy()
    echo = render_config(config)

    records: list[RunRecord] = []
    diverged: dict[int, str] = {}
    for rep in range(config.repetitions):
        rep_seed = config.seed + rep
        try:
            result = sampler_run(
                model,
                config.sampler_config(seed=rep_seed),
                config.n_particles,
                init_fn,
                method=config.method,
                kernel_policy=policy,
                rng=rep_generator(config.seed, rep),
                metric_hooks=hooks,
                metric_stride=config.metric_stride,
            )
        except DivergenceError as exc:
            diverged[rep] = str(exc)
            continue
        records.append(RunRecord(rep=rep, seed=rep_seed, result=result, config_echo=echo))

    files = [out_path / CONFIG_ECHO, out_path / METRICS_CSV, out_path / SUMMARY_JSON]
    (out_path / CONFIG_ECHO).write_text(echo)
    (out_path / METRICS_CSV).write_bytes(metrics_csv_bytes(records))
    (out_path / SUMMARY_JSON).write_bytes(summary_json_bytes(config, records, diverged))
    if config.target == "diffusion":
        files.append(out_path / DIFFUSION_CSV)
        (out_path / DIFFUSION_CSV).write_bytes(diffusion_csv_bytes(model, records))
    if config.figures:
        from . import figures

        files.extend(figures.render_experiment_figures(config, model, records, out_path))

    return ExperimentOutcome(
        config=config,
        records=tuple(records),
        diverged=diverged,
        out_dir=out_path,
        files=tuple(files),
        wall_time=time.perf_counter() - started,
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def metrics_csv_bytes(records: list[RunRecord]) -> bytes:
    """Rows ``rep,iteration,metric,value`` ordered by (rep, iteration, metric)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rep", "iteration", "metric", "value"])
    for record in records:
        by_iteration: dict[int, list[tuple[str, float]]] = {}
        for series in record.result.series:
            for iteration, value in series.values:
                by_iteration.setdefault(iteration, []).append((series.name, value))
        for iteration in sorted(by_iteration):
            for name, value in by_iteration[iteration]:
                writer.writerow([record.rep, iteration, name, _fmt(value)])
    return buf.getvalue().encode()


def parse_metrics_csv(path: str | Path) -> dict[tuple[int, int, str], float]:
    """Read back a metrics CSV as {(rep, iteration, metric): value}."""
    out: dict[tuple[int, int, str], float] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[(int(row["rep"]), int(row["iteration"]), row["metric"])] = float(row["value"])
    return out


def final_values(records: list[RunRecord]) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for record in records:
        for series in record.result.series:
            out.setdefault(series.name, []).append(series.final_value())
    return out


def mean_and_ci(values: list[float]) -> dict[str, float]:
    """Mean with a normal-approximation 95% interval (mean +/- 1.96 SE)."""
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return {"mean": mean, "ci_low": mean - 1.96 * se, "ci_high": mean + 1.96 * se}


def summary_json_bytes(
    config: ExperimentConfig, records: list[RunRecord], diverged: dict[int, str]
) -> bytes:
    payload: dict = {
        name: mean_and_ci(values) for name, values in final_values(records).items()
    }
    payload["diverged_reps"] = [
        {"rep": rep, "error": message} for rep, message in sorted(diverged.items())
    ]
    payload["version"] = __version__
    return (json.dumps(payload, indent=1, sort_keys=True) + "\n").encode()


def diffusion_path_summary(model, particles: np.ndarray) -> dict[str, np.ndarray]:
    """Posterior mean and central 95% band of the solution path."""
    paths = model.forward_batch(particles)
    lo, hi = np.quantile(paths, [0.025, 0.975], axis=0)
    return {
        "t": (np.arange(1, targets.N_STEPS + 1)) * targets.DT,
        "mean": paths.mean(axis=0),
        "ci_low": lo,
        "ci_high": hi,
    }


def diffusion_csv_bytes(model, records: list[RunRecord]) -> bytes:
    """Rows ``rep,grid_index,t,mean,ci_low,ci_high`` of the solution-path posterior."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rep", "grid_index", "t", "mean", "ci_low", "ci_high"])
    for record in records:
        summary = diffusion_path_summary(model, record.result.particles)
        for j in range(targets.N_STEPS):
            writer.writerow(
                [
                    record.rep,
                    j + 1,
                    _fmt(summary["t"][j]),
                    _fmt(summary["mean"][j]),
                    _fmt(summary["ci_low"][j]),
                    _fmt(summary["ci_high"][j]),
                ]
            )
    return buf.getvalue().encode()
