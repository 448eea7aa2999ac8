#!/usr/bin/env python3
"""Plot one or more da-lab trace CSVs.

Documentation-grade example, not part of the tool's contract: the CSV format
(t,eta,grad_sq,f_val,x_norm,xi_sq,b_running) is plain enough for any plotting
stack.

Usage:
    python3 scripts/plot_trace.py out/trace.csv [more.csv ...] [--out plot.png]

Left panel: per-step squared gradient norm and its running average (the
stationarity measure the convergence bounds control), log-log. Right panel:
the step-size sequence.
"""

import argparse
import csv
import itertools
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_trace(path):
    ts, grad_sq, eta = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            ts.append(int(row["t"]))
            grad_sq.append(float(row["grad_sq"]))
            eta.append(float(row["eta"]))
    return ts, grad_sq, eta


def running_average(values):
    total = 0.0
    out = []
    for i, v in enumerate(values, start=1):
        total += v
        out.append(total / i)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("traces", nargs="+", help="trace CSV files emitted by `da-lab run`")
    parser.add_argument("--out", default="trace.png", help="output image path")
    args = parser.parse_args()

    fig, (ax_grad, ax_eta) = plt.subplots(1, 2, figsize=(11, 4.2))
    colors = itertools.cycle(plt.rcParams["axes.prop_cycle"].by_key()["color"])
    for path in args.traces:
        label = pathlib.Path(path).stem
        ts, grad_sq, eta = read_trace(path)
        color = next(colors)
        ax_grad.loglog(ts, grad_sq, color=color, alpha=0.25, linewidth=0.7)
        ax_grad.loglog(ts, running_average(grad_sq), color=color, linewidth=1.8, label=label)
        ax_eta.loglog(ts, eta, color=color, linewidth=1.4, label=label)

    ax_grad.set_xlabel("t")
    ax_grad.set_ylabel(r"$\|\nabla f(x_t)\|^2$ (faint) and running average")
    ax_grad.legend()
    ax_grad.grid(True, which="both", alpha=0.3)
    ax_eta.set_xlabel("t")
    ax_eta.set_ylabel(r"step size $\eta_t$")
    ax_eta.legend()
    ax_eta.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
