"""Optional figure rendering for run outputs (requires matplotlib)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = ["tab:red", "tab:blue", "tab:green", "tab:orange", "tab:purple", "tab:brown", "tab:pink"]


def plot_ensembles(ensembles_by_method, goals, path, max_draws: int = 20):
    """One panel per method with sampled 2-D paths, starts and goals."""
    methods = list(ensembles_by_method)
    fig, axes = plt.subplots(1, len(methods), figsize=(4.2 * len(methods), 4.2), squeeze=False)
    for ax, method in zip(axes[0], methods):
        ens = ensembles_by_method[method]
        for i, a in enumerate(sorted(ens)):
            c = COLORS[i % len(COLORS)]
            paths = ens[a].paths
            for d in range(min(max_draws, paths.shape[0])):
                ax.plot(paths[d, :, 0], paths[d, :, 1], color=c, lw=0.5, alpha=0.5)
            ax.plot(*paths[0, 0, :2], "o", color=c, ms=5)
            for _, g in goals.get(a, ()):
                ax.plot(g[0], g[1], "x", color=c, ms=8, mew=2)
        ax.set_title(method)
        ax.set_aspect("equal", adjustable="datalim")
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def plot_criterion_traces(traces, path):
    """``traces`` maps a label to ``(times, values)``; zero line marks the threshold."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for i, (label, (ts, vals)) in enumerate(traces.items()):
        ax.plot(ts, vals, label=label, color=COLORS[i % len(COLORS)])
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("criterion")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def plot_certification(outcome, func, path, n: int = 1000):
    """Target function, sampled points and the final floor function."""
    ts = np.linspace(outcome.t0, outcome.tf, n)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(ts, [func(t) for t in ts], color="k", lw=1, label="target")
    ax.plot(ts, outcome.floor_at(ts), color="tab:blue", lw=1, label="floor")
    st = np.array([s[0] for s in outcome.samples])
    sv = np.array([s[1] for s in outcome.samples])
    ax.plot(st, sv, "o", color="tab:red", ms=4, label="samples")
    ax.axhline(0.0, color="grey", lw=0.8)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)
