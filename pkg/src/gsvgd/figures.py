"""Figure rendering for experiment outputs (PNG files next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import targets
from .harness import RunRecord, diffusion_path_summary


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_metric_figure(metric: str, traces: list[tuple[int, list, list]], out_path: Path) -> Path:
    """Line chart of one metric: faint per-repetition traces plus their mean."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    common = None
    stacked = []
    for rep, iters, vals in traces:
        ax.plot(iters, vals, color="tab:blue", alpha=0.25, linewidth=0.9)
        if common is None:
            common = iters
        if iters == common:
            stacked.append(vals)
    if stacked and len(stacked) == len(traces):
        ax.plot(common, np.mean(stacked, axis=0), color="tab:blue", linewidth=1.8, label="mean")
        ax.legend(frameon=False)
    ax.set_xlabel("iteration")
    ax.set_ylabel(metric)
    ax.set_title(metric)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)
    return out_path


def render_diffusion_figure(model, record: RunRecord, out_path: Path) -> Path:
    """Posterior mean path with its central 95% band and the observations."""
    plt = _pyplot()
    summary = diffusion_path_summary(model, record.result.particles)
    fig, ax = plt.subplots(figsize=(5.6, 3.2))
    ax.fill_between(
        summary["t"], summary["ci_low"], summary["ci_high"],
        color="tab:blue", alpha=0.25, label="95% band",
    )
    ax.plot(summary["t"], summary["mean"], color="tab:blue", linewidth=1.6, label="posterior mean")
    obs_t = (targets.OBS_PATH_INDICES + 1) * targets.DT
    ax.plot(obs_t, model.observations, "k.", markersize=5, label="observations")
    ax.set_xlabel("t")
    ax.set_ylabel("u(t)")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)
    return out_path


def render_experiment_figures(config, model, records: list[RunRecord], out_dir: Path) -> list[Path]:
    """One PNG per metric, plus the solution-path band for the diffusion target."""
    produced: list[Path] = []
    if records:
        by_metric: dict[str, list[tuple[int, list, list]]] = {}
        for record in records:
            for series in record.result.series:
                iters = [i for i, _ in series.values]
                vals = [v for _, v in series.values]
                by_metric.setdefault(series.name, []).append((record.rep, iters, vals))
        for metric, traces in by_metric.items():
            path = out_dir / f"metric_{metric}.png"
            produced.append(render_metric_figure(metric, traces, path))
        if config.target == "diffusion":
            path = out_dir / "diffusion_path.png"
            produced.append(render_diffusion_figure(model, records[0], path))
    return produced
