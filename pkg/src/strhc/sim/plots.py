"""Headless figures from a trace: rings with the trajectory, inputs, levels and flags."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..geometry import vertices_2d  # noqa: E402
from ..reach import ControllableFamily  # noqa: E402
from .trace import SimTrace  # noqa: E402


def ring_outlines(family: ControllableFamily) -> list[np.ndarray]:
    """Closed vertex loops, one per ring ``T[0..N]`` (planar families only)."""
    loops = []
    for P in family.T:
        V = vertices_2d(P)
        loops.append(np.vstack([V, V[:1]]) if len(V) else V)
    return loops


def _save(fig, path: Path) -> Path:
    fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    plt.close(fig)
    return path


def plot_rings(trace: SimTrace, family: ControllableFamily, path: Path):
    fig, ax = plt.subplots(figsize=(6, 5))
    loops = ring_outlines(family)
    for i, L in enumerate(loops):
        if len(L):
            ax.plot(L[:, 0], L[:, 1], color="black", lw=1.2 if i == 0 else 0.4)
    if len(trace):
        X = trace.column("x")
        ax.plot(X[:, 0], X[:, 1], color="tab:red", lw=1.2, label="x(t)")
        ax.plot(X[0, 0], X[0, 1], "o", color="tab:red", ms=4)
        ax.legend(loc="best")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(f"{family.N + 1} rings and state trajectory")
    return _save(fig, path), len(loops)


def plot_inputs(trace: SimTrace, path: Path):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    t = np.array([r.t for r in trace.records]) * trace.Ts
    if len(trace):
        ax.step(t, trace.column("u_c")[:, 0], where="post", label="u^c (sent)", lw=1)
        ax.step(t, trace.column("u_tilde")[:, 0], where="post", label="u~ (received)", lw=1, ls="--")
        ax.step(t, trace.column("u")[:, 0], where="post", label="u (applied)", lw=1.2)
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("input")
    return _save(fig, path)


def plot_levels(trace: SimTrace, path: Path):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    t = np.array([r.t for r in trace.records]) * trace.Ts
    lvl = np.array([np.nan if r.level is None else r.level for r in trace.records], dtype=float)
    ax.step(t, lvl, where="post", label="i(t)")
    ax.step(t, [r.i_hat for r in trace.records], where="post", label="i_hat(t)", ls="--")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("set level")
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def plot_flags(trace: SimTrace, path: Path):
    fig, axes = plt.subplots(3, 1, figsize=(7, 4.5), sharex=True)
    t = np.array([r.t for r in trace.records]) * trace.Ts
    series = (
        ("detector", [r.detector for r in trace.records]),
        ("pre-check fail", [1 - r.pre_check for r in trace.records]),
        ("post-check fail", [1 - r.post_check for r in trace.records]),
    )
    for ax, (name, v) in zip(axes, series):
        ax.step(t, v, where="post")
        ax.set_ylim(-0.1, 1.1)
        ax.set_ylabel(name, fontsize=8)
    axes[-1].set_xlabel("time [s]")
    return _save(fig, path)


def emit_plots(trace: SimTrace, family: ControllableFamily, outdir, fmt: str = "svg") -> list[Path]:
    """Write the figures into ``outdir`` and return their paths (ring plot only for planar models)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    if trace.n == 2:
        p, _ = plot_rings(trace, family, outdir / f"rings.{fmt}")
        paths.append(p)
    paths.append(plot_inputs(trace, outdir / f"inputs.{fmt}"))
    paths.append(plot_levels(trace, outdir / f"levels.{fmt}"))
    paths.append(plot_flags(trace, outdir / f"flags.{fmt}"))
    return paths
