#!/usr/bin/env python3
"""
Plot the CSV artifacts of a finished run.

Reads ``<out>/<run_id>.json`` to find the experiment kind and writes PNG
figures next to the CSVs in ``<out>/<run_id>/``. Needs the ``plot`` extra.

Usage:
    python3 scripts/plot_results.py results/toy/run-0001.json
    python3 scripts/plot_results.py results/toy/run-0002.json --max-trajectories 20
"""

import argparse
import logging
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from gradient_gate.harness import read_csv, read_run_record  # noqa: E402
from gradient_gate.harness.emit import (  # noqa: E402
    GRID_AGGREGATE,
    HIGHDIM,
    MNIST_EPOCH,
    MNIST_GATES,
    PROP3,
    TOY_SUMMARY,
    TRAJECTORY,
)

logger = logging.getLogger("plot_results")


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info("Wrote %s", path)
    return path


def plot_toy(run_dir: Path, max_trajectories: int) -> list[Path]:
    """One panel of descent paths per scenario and method, plus a convergence bar chart."""
    paths = []
    summary = read_csv(run_dir / "summary.csv", TOY_SUMMARY)
    fig, ax = plt.subplots(figsize=(8, 4))
    labels = [f"{s}\n{m}" for s, m in zip(summary["scenario"], summary["method"])]
    ax.bar(np.arange(len(summary)), summary["converged"] / summary["runs"])
    ax.set_xticks(np.arange(len(summary)), labels, rotation=90, fontsize=7)
    ax.set_ylabel("fraction converged")
    paths.append(_save(fig, run_dir / "toy_convergence.png"))

    trajectories_csv = run_dir / "trajectories.csv"
    if not trajectories_csv.exists():
        logger.warning("No trajectories.csv, skipping path plots (set write_trajectories: true)")
        return paths

    frame = read_csv(trajectories_csv, TRAJECTORY)
    groups = frame["run_id"].str.rsplit("/", n=1).str[0]
    for group in groups.unique():
        runs = frame[groups == group]
        fig, ax = plt.subplots(figsize=(4, 4))
        for i, (_, run) in enumerate(runs.groupby("run_id", sort=True)):
            if i >= max_trajectories:
                break
            if run["x2"].isna().all():
                ax.plot(run["step"], run["x1"], lw=0.8)
            else:
                ax.plot(run["x1"], run["x2"], lw=0.8)
                ax.plot(run["x1"].iloc[0], run["x2"].iloc[0], "k.", ms=3)
        ax.set_title(group)
        paths.append(_save(fig, run_dir / f"toy_{group.replace('/', '_')}.png"))
    return paths


def plot_prop3(run_dir: Path, max_trajectories: int) -> list[Path]:
    frame = read_csv(run_dir / "integrals.csv", PROP3)
    fig, ax = plt.subplots(figsize=(6, 4))
    for field, rows in frame.groupby("field", sort=False):
        ax.plot(rows["a"], rows["difference"], marker="o", label=field)
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("a")
    ax.set_ylabel("integral_b - integral_a")
    ax.legend(fontsize=7)
    return [_save(fig, run_dir / "prop3.png")]


def plot_gridworld(run_dir: Path, max_trajectories: int) -> list[Path]:
    """Mean evaluation return per method with a standard-error band, one panel per temperature."""
    frame = read_csv(run_dir / "aggregate.csv", GRID_AGGREGATE)
    temperatures = sorted(frame["temperature"].unique())
    fig, axes = plt.subplots(1, len(temperatures), figsize=(5 * len(temperatures), 4), squeeze=False)
    for ax, temperature in zip(axes[0], temperatures):
        subset = frame[frame["temperature"] == temperature]
        for method, rows in subset.groupby("method", sort=False):
            rows = rows.sort_values("step")
            ax.plot(rows["step"], rows["mean_return"], label=method)
            ax.fill_between(
                rows["step"],
                rows["mean_return"] - rows["stderr"],
                rows["mean_return"] + rows["stderr"],
                alpha=0.2,
            )
        ax.set_title(f"T = {temperature:g}")
        ax.set_xlabel("policy updates")
        ax.set_ylabel("evaluation return")
        ax.legend(fontsize=7)
    return [_save(fig, run_dir / "gridworld.png")]


def plot_mnist(run_dir: Path, max_trajectories: int) -> list[Path]:
    paths = []
    epochs = read_csv(run_dir / "epochs.csv", MNIST_EPOCH)
    final = epochs[epochs["epoch"] == epochs["epoch"].max()]
    table = final.groupby(["rotation", "mode"])["test_error"].mean().unstack("mode")
    fig, ax = plt.subplots(figsize=(6, 4))
    for mode in table.columns:
        ax.plot(table.index, table[mode], marker="o", label=mode)
    ax.set_xlabel("auxiliary rotation (degrees)")
    ax.set_ylabel("final test error")
    ax.legend(fontsize=7)
    paths.append(_save(fig, run_dir / "mnist_error.png"))

    gates = read_csv(run_dir / "gates.csv", MNIST_GATES)
    if not gates.empty:
        fig, ax = plt.subplots(figsize=(6, 4))
        for rotation, rows in gates.groupby("rotation"):
            by_step = rows.groupby(["epoch", "step"])["raw_cos"].mean()
            ax.plot(np.arange(len(by_step)), by_step.to_numpy(), lw=0.6, label=f"{rotation:g}")
        ax.axhline(0.0, color="grey", lw=0.5)
        ax.set_xlabel("update")
        ax.set_ylabel("cosine")
        ax.legend(title="rotation", fontsize=7)
        paths.append(_save(fig, run_dir / "mnist_cos.png"))
    return paths


def plot_highdim(run_dir: Path, max_trajectories: int) -> list[Path]:
    frame = read_csv(run_dir / "highdim.csv", HIGHDIM)
    fig, ax = plt.subplots(figsize=(6, 4))
    for (kind, sigma), rows in frame.groupby(["kind", "sigma"]):
        column = "median_abs_cos" if kind == "random" else "mean_cos"
        label = kind if kind == "random" else f"{kind} sigma={sigma:g}"
        ax.plot(rows["d"], rows[column], marker="o", label=label)
    ax.set_xscale("log")
    ax.set_xlabel("dimension")
    ax.set_ylabel("cosine")
    ax.legend(fontsize=7)
    return [_save(fig, run_dir / "highdim.png")]


PLOTTERS = {
    "toy": plot_toy,
    "prop3": plot_prop3,
    "gridworld": plot_gridworld,
    "mnist": plot_mnist,
    "highdim": plot_highdim,
}


def main() -> int:
    parser = argparse.ArgumentParser(description="Plot the CSV artifacts of a finished run")
    parser.add_argument("record", type=Path, help="Path to a run record, e.g. results/toy/run-0001.json")
    parser.add_argument("--max-trajectories", type=int, default=30, help="Paths drawn per toy panel")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")

    record = read_run_record(args.record)
    run_dir = args.record.parent / record.run_id
    if not run_dir.is_dir():
        logger.error("Run directory not found: %s", run_dir)
        return 1

    plotter = PLOTTERS.get(record.kind)
    if plotter is None:
        logger.error("No plots for kind %r", record.kind)
        return 1

    written = plotter(run_dir, args.max_trajectories)
    logger.info("%d figure(s) written to %s", len(written), run_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
