"""Matplotlib figures written next to the CSV reports."""

from __future__ import annotations

import os
import tempfile
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 3.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
}


def _save(fig, path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.stem}.", suffix=path.suffix)
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=120, bbox_inches="tight")
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)


def plot_trace(traces, path) -> None:
    """Convergence of one or more solver traces: stop metric and PSNR."""
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2)
        for tr in traces:
            it = tr.column("iteration")
            ax0.semilogy(it, tr.column("e"), marker=".", label=tr.label)
            ax1.plot(it, tr.column("psnr"), marker=".", label=tr.label)
        ax0.set_xlabel("iteration")
        ax0.set_ylabel("relative change e")
        ax1.set_xlabel("iteration")
        ax1.set_ylabel("PSNR (dB)")
        ax0.legend()
        _save(fig, path)


def plot_bench(rows, path, sweep: str) -> None:
    """Timing sweep: ``rows`` are dicts with ``value`` and ``*_ms`` columns."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        xs = [r["value"] for r in rows]
        for key in sorted({k for r in rows for k in r if k.endswith("_ms")}):
            pts = [(x, r[key]) for x, r in zip(xs, rows) if r.get(key) is not None]
            if pts:
                ax.plot(*zip(*pts), marker="o", label=key[:-3])
        ax.set_xlabel("tensor order N" if sweep == "N" else "sample parameter J")
        ax.set_ylabel("time (ms)")
        if sweep == "N":
            ax.set_yscale("log")
        ax.legend()
        _save(fig, path)


def plot_ablation(rows, path) -> None:
    """Mean PSNR and time per variant versus the sample parameter."""
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        acc[r["variant"]][r["J"]].append((r["psnr"], r["seconds"]))
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2)
        for variant, by_j in acc.items():
            js = sorted(by_j)
            ax0.plot(js, [sum(p for p, _ in by_j[j]) / len(by_j[j]) for j in js], marker="o", label=variant)
            ax1.plot(js, [sum(s for _, s in by_j[j]) / len(by_j[j]) for j in js], marker="o", label=variant)
        for ax in (ax0, ax1):
            ax.set_xscale("log")
            ax.set_xlabel("sample parameter J")
        ax0.set_ylabel("PSNR (dB)")
        ax1.set_ylabel("time (s)")
        ax0.legend()
        _save(fig, path)
