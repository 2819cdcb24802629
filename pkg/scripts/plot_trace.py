#!/usr/bin/env python3
"""Render a trace.csv produced by `sim run` into summary figures.

Usage: plot_trace.py TRACE_CSV [-o OUT.png]

Panels: leader/follower output trajectories, containment error norms with DoS
spans shaded, observer/estimator errors (log scale), and the adaptation
parameters.
"""

import argparse
import csv
import re

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load_trace(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        data = np.array([[float(x) for x in row] for row in reader])
    return names, {n: data[:, i] for i, n in enumerate(names)}


def dos_spans(t, dos):
    """(start, end) pairs of contiguous DoS activity in the sampled trace."""
    spans = []
    active = dos > 0.5
    start = None
    for i in range(len(t)):
        if active[i] and start is None:
            start = t[i]
        elif not active[i] and start is not None:
            spans.append((start, t[i]))
            start = None
    if start is not None:
        spans.append((start, t[-1]))
    return spans


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("trace")
    ap.add_argument("-o", "--out", default=None)
    args = ap.parse_args()

    names, cols = load_trace(args.trace)
    t = cols["t"]
    spans = dos_spans(t, cols["dos"])
    followers = sorted({int(m.group(1)) for n in names
                        if (m := re.match(r"e_(\d+)_norm", n))})
    leaders = sorted({int(m.group(1)) for n in names
                      if (m := re.match(r"yk_(\d+)_0", n))})
    dims = sorted({int(m.group(2)) for n in names
                   if (m := re.match(r"y_(\d+)_(\d+)", n))})

    fig, axes = plt.subplots(2, 2, figsize=(12, 8), sharex=True)

    ax = axes[0, 0]
    for k in leaders:
        ax.plot(t, cols[f"yk_{k}_0"], "k--", lw=1,
                label="leaders" if k == leaders[0] else None)
    for i in followers:
        ax.plot(t, cols[f"y_{i}_0"], lw=1, label=f"follower {i}")
    ax.set_ylabel(f"output component 0 (of {len(dims)})")
    ax.legend(fontsize=7)

    ax = axes[0, 1]
    for i in followers:
        ax.plot(t, cols[f"e_{i}_norm"], lw=1, label=f"$\\|e_{i}\\|$")
    for a, b in spans:
        ax.axvspan(a, b, color="tab:red", alpha=0.12, lw=0)
    ax.set_ylabel("containment error norm")
    ax.legend(fontsize=7)

    ax = axes[1, 0]
    for i in followers:
        ax.semilogy(t, np.maximum(cols[f"obs_err_{i}"], 1e-16), lw=1,
                    label=f"observer {i}")
    ax.semilogy(t, np.maximum(cols["z_err_norm"], 1e-16), "k", lw=1.5,
                label="estimator")
    for a, b in spans:
        ax.axvspan(a, b, color="tab:red", alpha=0.12, lw=0)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("twin-layer errors")
    ax.legend(fontsize=7)

    ax = axes[1, 1]
    for i in followers:
        ax.plot(t, cols[f"rho_{i}"], lw=1, label=f"$\\hat\\rho_{i}$")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("adaptation parameter")
    ax.legend(fontsize=7)

    fig.tight_layout()
    out = args.out or args.trace.replace(".csv", ".png")
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
