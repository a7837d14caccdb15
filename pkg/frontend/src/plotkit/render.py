"""Render overlay, dip-zoom, and finite-field figures from run CSVs."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .csvdata import CsvError, load_run

KINDS = ("overlay", "dipzoom", "field")
_FIGSIZE = (6.4, 4.2)
_DPI = 150
_PNG_META = {"Software": "plotkit"}


@dataclass
class PlotJob:
    inputs: list          # (csv path, label or None) pairs
    kind: str = "overlay"
    out: str = "figure.png"
    window: tuple | None = None

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("need at least one input CSV")
        if self.kind not in KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}")


def _check_window(window, runs):
    if window is None:
        return None
    lo, hi = window
    t0 = min(r.times[0] for r in runs)
    t1 = max(r.times[-1] for r in runs)
    if lo >= hi or lo < t0 - 1e-9 or hi > t1 + 1e-9:
        raise ValueError(
            f"window {window} outside the data range ({t0:g}, {t1:g})"
        )
    return lo, hi


def render(job: PlotJob) -> str:
    """Write the figure file for a job; returns the output path."""
    runs = []
    for path, label in job.inputs:
        run = load_run(path)
        runs.append((run, label or run.label()))
    window = _check_window(job.window, [r for r, _ in runs])

    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    for run, label in runs:
        ax.plot(run.times, run.s_real, lw=1.0, label=label)
    ax.set_xlabel("t J_Q")
    ax.set_ylabel("Re S(t)")

    if job.kind == "overlay":
        if window:
            ax.set_xlim(*window)
        ax.axhline(1 / 12, color="0.7", lw=0.6, ls=":")
    elif job.kind == "dipzoom":
        lo, hi = window if window else (2.0, 5.0)
        ax.set_xlim(lo, hi)
        sel_vals = [
            run.s_real[(run.times >= lo) & (run.times <= hi)] for run, _ in runs
        ]
        vmin = min(v.min() for v in sel_vals if len(v))
        vmax = max(v.max() for v in sel_vals if len(v))
        pad = 0.1 * (vmax - vmin + 1e-12)
        ax.set_ylim(vmin - pad, vmax + pad)
    else:  # field
        run0 = runs[0][0]
        jq = run0.j_q()
        tt = np.linspace(run0.times[0], run0.times[-1], 400)
        env = 0.25 * np.exp(-((jq * tt) ** 2) / 8.0)
        ax.plot(tt, env, "k--", lw=0.8, label="envelope")
        ax.plot(tt, -env, "k--", lw=0.8)
        if window:
            ax.set_xlim(*window)
        # inset resolving individual precession periods
        inset = ax.inset_axes([0.58, 0.62, 0.38, 0.33])
        t_hi = min(run0.times[-1], 1.0)
        for run, _ in runs:
            keep = run.times <= t_hi
            inset.plot(run.times[keep], run.s_real[keep], lw=0.8)
        inset.plot(tt[tt <= t_hi], env[tt <= t_hi], "k--", lw=0.6)
        inset.tick_params(labelsize=6)

    ax.legend(fontsize=7, loc="upper right" if job.kind == "field" else "best")
    fig.tight_layout()
    fig.savefig(job.out, metadata=_PNG_META)
    plt.close(fig)
    return job.out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    parser.add_argument("inputs", nargs="+", help="run CSV files")
    parser.add_argument("--kind", choices=KINDS, default="overlay")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument(
        "--window", type=lambda s: tuple(float(v) for v in s.split(",")),
        help="time window lo,hi",
    )
    parser.add_argument(
        "--labels", help="comma separated legend labels (defaults to metadata)"
    )
    args = parser.parse_args(argv)
    labels = args.labels.split(",") if args.labels else [None] * len(args.inputs)
    if len(labels) != len(args.inputs):
        print("error: need one label per input", file=sys.stderr)
        return 2
    try:
        job = PlotJob(
            inputs=list(zip(args.inputs, labels)),
            kind=args.kind,
            out=args.out,
            window=args.window,
        )
        render(job)
    except (CsvError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
