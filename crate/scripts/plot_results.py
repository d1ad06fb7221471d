#!/usr/bin/env python3
"""Plot sweep outputs written by `adaptive-smc sweep`.

    python scripts/plot_results.py OUT_DIR

Writes `thresholds.png` (MSE, mean particle count and time per configuration)
and `trajectories.png` (particle count against time for the first runs of
each configuration) into OUT_DIR.
"""

import argparse
import glob
import os
import re

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def summary_panels(out_dir):
    agg = pd.read_csv(os.path.join(out_dir, "aggregate.csv"))
    timing = pd.read_csv(os.path.join(out_dir, "timing.csv"))
    means = agg[agg["row"] == "mean"].set_index("label")
    errs = agg[agg["row"] == "stderr"].set_index("label")
    t = timing.groupby("label")["wall_clock_seconds"]
    labels = list(means.index)

    fig, axes = plt.subplots(1, 3, figsize=(13, 3.8))
    for ax, col, title in [(axes[0], "mse", "MSE"), (axes[1], "m_bar", "mean M (second half)")]:
        ax.errorbar(range(len(labels)), means[col], yerr=2 * errs[col], fmt="o-", capsize=3)
        ax.set_title(title)
    axes[1].set_yscale("log", base=2)
    n = t.count().reindex(labels)
    axes[2].errorbar(
        range(len(labels)),
        t.mean().reindex(labels),
        yerr=2 * t.std().reindex(labels) / n.pow(0.5),
        fmt="o-",
        capsize=3,
    )
    axes[2].set_title("filter time per run [s]")
    for ax in axes:
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "thresholds.png"), dpi=120)


def trajectories(out_dir, runs):
    files = sorted(glob.glob(os.path.join(out_dir, "*_run[0-9][0-9][0-9].csv")))
    groups = {}
    for f in files:
        m = re.match(r"(.*)_run(\d{3})\.csv$", os.path.basename(f))
        if m and int(m.group(2)) < runs:
            groups.setdefault(m.group(1), []).append(f)
    if not groups:
        return
    fig, axes = plt.subplots(len(groups), 1, figsize=(9, 2.6 * len(groups)), squeeze=False)
    for ax, (label, fs) in zip(axes[:, 0], sorted(groups.items())):
        for f in fs:
            d = pd.read_csv(f)
            ax.plot(d["t"], d["M"], lw=0.8)
        ax.set_yscale("log", base=2)
        ax.set_ylabel("M")
        ax.set_title(label)
    axes[-1, 0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "trajectories.png"), dpi=120)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("out_dir")
    p.add_argument("--runs", type=int, default=5, help="runs per configuration in the trajectory plot")
    a = p.parse_args()
    summary_panels(a.out_dir)
    trajectories(a.out_dir, a.runs)


if __name__ == "__main__":
    main()
