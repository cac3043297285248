#!/usr/bin/env python3
"""Plot the canned experiments from their CSV outputs.

Usage:
    stackliq reproduce fig1 --out out/fig1
    python docs/plot_figures.py out/fig1 fig1

The library emits data only; everything visual lives here.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    return header, np.atleast_2d(data)


def col(header, data, name):
    return data[:, header.index(name)]


def plot_strategies(out_dir, fig_path, inventories=False):
    header, solve = read_csv(out_dir / "solve.csv")
    t = col(header, solve, "t")
    ph, paths = read_csv(out_dir / "paths.csv")
    ids = col(ph, paths, "path_id").astype(int)

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(9, 7), sharex=True)
    if inventories:
        top.plot(t, col(header, solve, "Q0_star"), "g-", label="leader optimal")
        top.plot(t, col(header, solve, "Q0_bm"), "g--", label="leader benchmark")
        field, label = "Q1", "follower inventory"
    else:
        top.plot(t, col(header, solve, "nu0_hat"), "g-", label="leader optimal")
        top.plot(t, col(header, solve, "nu0_bm"), "g--", label="leader benchmark")
        field, label = "nu1", "follower rate"
    top.legend()
    top.set_ylabel("shares" if inventories else "shares/time")

    series = []
    for k in np.unique(ids):
        mask = ids == k
        y = col(ph, paths, field)[mask]
        bottom.plot(col(ph, paths, "t")[mask], y, lw=0.4, alpha=0.4, color="tab:orange")
        series.append(y)
    bottom.plot(col(ph, paths, "t")[ids == 0], np.mean(series, axis=0),
                color="tab:brown", lw=2, label=f"mean {label}")
    bottom.legend()
    bottom.set_xlabel("time")
    fig.savefig(fig_path, dpi=150, bbox_inches="tight")


def plot_savings(out_dir, fig_path):
    header, data = read_csv(out_dir / "savings.csv")
    sav = col(header, data, "savings_bps")
    sav = sav[np.isfinite(sav)]
    fig, (top, bottom) = plt.subplots(
        2, 1, figsize=(8, 6), gridspec_kw={"height_ratios": [1, 3]}
    )
    top.boxplot(sav, vert=False)
    top.set_yticks([])
    bottom.hist(sav, bins=40, color="tab:blue", alpha=0.8)
    bottom.axvline(sav.mean(), color="k", ls="--", label=f"mean {sav.mean():.1f} bps")
    bottom.set_xlabel("savings (bps)")
    bottom.legend()
    fig.savefig(fig_path, dpi=150, bbox_inches="tight")


def plot_volume(out_dir, fig_path):
    header, data = read_csv(out_dir / "volume.csv")
    starts = col(header, data, "bin_start_minutes")
    ids = col(header, data, "path_id").astype(int)
    logv = col(header, data, "log_volume")
    mh, med = read_csv(out_dir / "volume_median.csv")
    fig, ax = plt.subplots(figsize=(9, 5))
    for k in np.unique(ids)[:200]:
        mask = ids == k
        ax.plot(starts[mask] / 60.0 + 10.0, logv[mask], lw=0.2, alpha=0.2, color="tab:blue")
    ax.plot(
        col(mh, med, "bin_start_minutes") / 60.0 + 10.0,
        col(mh, med, "median_log_volume"),
        color="magenta",
        lw=2,
    )
    ax.set_xlabel("time of day (hours)")
    ax.set_ylabel("log(1 + volume)")
    fig.savefig(fig_path, dpi=150, bbox_inches="tight")


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    out_dir = Path(sys.argv[1])
    which = sys.argv[2]
    target = out_dir / f"{which}.png"
    if which in ("fig1", "fig3"):
        plot_strategies(out_dir, target, inventories=True)
    elif which == "fig2":
        plot_strategies(out_dir, target, inventories=False)
    elif which == "fig4":
        plot_savings(out_dir, target)
    elif which == "fig5":
        plot_volume(out_dir, target)
    else:
        sys.exit(f"unknown figure {which!r}")
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
