#!/usr/bin/env python3
"""Plot the CSV output of `tfilter filter` or `tfilter control`.

Example:
    tfilter filter --seed 7 --out filter.csv
    python3 docs/plot_trajectories.py filter.csv --save filter.png

Matplotlib is deliberately not a package dependency; install it separately
to use this script (`pip install matplotlib`).
"""

import argparse

import matplotlib.pyplot as plt
import numpy as np

from transformer_filter.records import ClosedLoopRecord, TrajectoryRecord, read_csv


def plot_filter(record: TrajectoryRecord, axes):
    top, bottom = axes
    for i in range(record.states.shape[1]):
        top.plot(record.times, record.states[:, i], color="0.7",
                 label="true state" if i == 0 else None)
        top.plot(record.times, record.kalman_estimates[:, i], "--",
                 label="reference estimate" if i == 0 else None)
        top.plot(record.times, record.transformer_estimates[:, i], ":",
                 label="softmax-window estimate" if i == 0 else None)
    top.set_ylabel("state / estimates")
    top.legend(loc="upper right", fontsize="small")
    bottom.semilogy(record.times, np.maximum(record.estimate_errors, 1e-18),
                    label="estimate error")
    bottom.semilogy(record.times, np.maximum(record.interpolant_gaps, 1e-18),
                    label="interpolant gap")
    if "eps" in record.metadata:
        bottom.axhline(float(record.metadata["eps"]), color="r", lw=0.8,
                       label="eps target")
    bottom.set_xlabel("t")
    bottom.set_ylabel("error")
    bottom.legend(loc="upper right", fontsize="small")


def plot_control(record: ClosedLoopRecord, axes):
    top, bottom = axes
    for i in range(record.states.shape[1]):
        top.plot(record.times, record.states[:, i],
                 label="softmax-loop state" if i == 0 else None)
        top.plot(record.times, record.ref_states[:, i], "--",
                 label="reference-loop state" if i == 0 else None)
    top.set_ylabel("states")
    top.legend(loc="upper right", fontsize="small")
    bottom.semilogy(record.times, np.maximum(record.state_errors, 1e-18),
                    label="state error")
    if "eps" in record.metadata:
        bottom.axhline(float(record.metadata["eps"]), color="r", lw=0.8,
                       label="eps target")
    bottom.set_xlabel("t")
    bottom.set_ylabel("error")
    bottom.legend(loc="upper right", fontsize="small")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv", help="output of `tfilter filter` or `tfilter control`")
    parser.add_argument("--save", default=None, help="write a PNG instead of showing")
    args = parser.parse_args()

    metadata, _, _ = read_csv(args.csv)
    kind = metadata.get("kind", "filter")
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    if kind == "control":
        plot_control(ClosedLoopRecord.from_csv(args.csv), axes)
    else:
        plot_filter(TrajectoryRecord.from_csv(args.csv), axes)
    title = ", ".join(f"{k}={metadata[k]}" for k in ("kind", "seed", "beta", "window")
                      if k in metadata)
    fig.suptitle(title, fontsize="small")
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
        print(f"wrote {args.save}")
    else:
        plt.show()


if __name__ == "__main__":
    main()
