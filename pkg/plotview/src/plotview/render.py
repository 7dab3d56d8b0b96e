"""Render frame streams and kernel documents into static figures.

render_run writes three files with fixed names into out_dir:
waterfall.png (every captured interface, colored by time), snapshots.png
(a handful of profiles with the flux underneath), seminorm.png (the
Lipschitz seminorm against time, recomputed from the raw arrays). The
embedded stats are asserted against the recomputation first, so a stream
whose stats were tampered with fails loudly rather than plotting.
"""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .stream import FrameStream, load_stream

RUN_FIGURES = ("waterfall.png", "snapshots.png", "seminorm.png")
KERNEL_FIGURE = "kernel_decay.png"


def _x_nodes(stream: FrameStream) -> np.ndarray:
    grid = stream.config["grid"]
    return np.arange(grid["n_x"]) * stream.dx


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _waterfall(stream: FrameStream, path: Path) -> Path:
    x = _x_nodes(stream)
    times = stream.times()
    span = times[-1] - times[0] or 1.0
    cmap = plt.get_cmap("viridis")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for fr in stream.frames:
        ax.plot(x, fr.f, color=cmap((fr.t - times[0]) / span), lw=0.8)
    sm = plt.cm.ScalarMappable(
        cmap=cmap, norm=plt.Normalize(times[0], times[-1]))
    fig.colorbar(sm, ax=ax, label="t")
    ax.set_xlabel("x")
    ax.set_ylabel("f")
    ax.set_title("interface height over time")
    return _save(fig, path)


def _snapshots(stream: FrameStream, path: Path) -> Path:
    x = _x_nodes(stream)
    n = len(stream.frames)
    picks = sorted({0, n // 4, n // 2, (3 * n) // 4, n - 1})
    fig, (ax_f, ax_i) = plt.subplots(
        2, 1, figsize=(7, 6), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]})
    for k in picks:
        fr = stream.frames[k]
        (line,) = ax_f.plot(x, fr.f, label=f"t={fr.t:.4g}")
        ax_i.plot(x, fr.i_plus, color=line.get_color(), lw=0.9)
        if fr.i_minus is not None:
            ax_i.plot(x, fr.i_minus, color=line.get_color(), lw=0.9, ls="--")
    ax_f.set_ylabel("f")
    ax_f.legend(loc="best", fontsize="small")
    ax_i.set_xlabel("x")
    ax_i.set_ylabel("interface flux")
    fig.suptitle("interface and flux snapshots")
    return _save(fig, path)


def _seminorm(stream: FrameStream, path: Path) -> Path:
    times = stream.times()
    curve = stream.lipschitz_curve()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(times, curve, marker=".", ms=3)
    ax.set_xlabel("t")
    ax.set_ylabel("Lipschitz seminorm of f")
    ax.set_title("shift-modulus decay")
    return _save(fig, path)


def render_run(frames_path, out_dir) -> list:
    """Three fixed-name figures from one NDJSON stream; returns the paths."""
    stream = load_stream(frames_path)
    stream.check_stats()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = dict(zip(RUN_FIGURES, RUN_FIGURES))
    return [
        _waterfall(stream, out / names["waterfall.png"]),
        _snapshots(stream, out / names["snapshots.png"]),
        _seminorm(stream, out / names["seminorm.png"]),
    ]


def render_kernel(kernel_path, out_dir) -> Path:
    """Log-scale off-diagonal weight magnitude against offset distance."""
    with open(kernel_path) as fh:
        doc = json.load(fh)
    est = doc["estimate"]
    weights = np.asarray(est["weights"], dtype=float)
    offsets = np.asarray(est["offsets"], dtype=float)
    base = int(est["base_point"])
    mask = np.arange(weights.size) != base
    dist = np.abs(offsets[mask])
    mag = np.abs(weights[mask])
    order = np.argsort(dist)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4))
    floor = mag[mag > 0].min() if (mag > 0).any() else 1e-300
    ax.semilogy(dist[order], np.maximum(mag[order], floor), marker=".", ms=4)
    ax.set_xlabel("|offset| from the base column")
    ax.set_ylabel("|weight|")
    ax.set_title(f"kernel decay (c0 = {est['c0']:.4g})")
    return _save(fig, out / KERNEL_FIGURE)
