"""Figure rendering for the experiment reports.

Each report subcommand writes a PNG next to its CSV so a run is immediately
inspectable; the CSV stays the authoritative artifact. All rendering goes
through the Agg backend, so the module is safe on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIG_SIZE = (6.4, 4.2)


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_nmse(rows: list[dict], path: str | Path) -> Path:
    """NMSE versus pilot power, one line per (element count, correlation)."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    keys = sorted({(r["ris_elements"], r["correlation"]) for r in rows})
    for n, kind in keys:
        sel = [r for r in rows if r["ris_elements"] == n and r["correlation"] == kind]
        sel.sort(key=lambda r: r["pilot_power_w"])
        style = "-o" if kind == "correlated" else "--s"
        ax.loglog(
            [r["pilot_power_w"] for r in sel],
            [r["nmse_closed"] for r in sel],
            style,
            label=f"N={n}, {kind}",
        )
        ax.loglog(
            [r["pilot_power_w"] for r in sel],
            [r["nmse_mc"] for r in sel],
            "x",
            color=ax.lines[-1].get_color(),
        )
    ax.set_xlabel("pilot power [W]")
    ax.set_ylabel("NMSE")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)


def plot_bound(rows: list[dict], path: str | Path) -> Path:
    """Weighted sum rate: closed form (lines) vs Monte Carlo (markers)."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    antennas = sorted({r["bs_antennas"] for r in rows})
    for m in antennas:
        sel = [r for r in rows if r["bs_antennas"] == m]
        elements = sorted({r["ris_elements"] for r in sel})
        closed = []
        mc = []
        for n in elements:
            pts = [r for r in sel if r["ris_elements"] == n]
            closed.append(sum(r["weight"] * max(r["rate_closed"], 0.0) for r in pts))
            mc.append(sum(r["weight"] * max(r["rate_mc"], 0.0) for r in pts))
        ax.plot(elements, closed, "-o", label=f"M={m} closed form")
        ax.plot(elements, mc, "x", color=ax.lines[-1].get_color(), label=f"M={m} Monte Carlo")
    ax.set_xlabel("reflecting elements N")
    ax.set_ylabel("weighted sum rate [bits/s/Hz]")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def plot_convergence(rows: list[dict], path: str | Path) -> Path:
    """Weighted sum rate per outer iteration with inner-step counts."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    iters = [r["iter"] for r in rows]
    wsr = [r["wsr"] for r in rows]
    ax.plot(iters, wsr, "-o")
    total_inner = int(sum(r.get("inner_iterations", 0) for r in rows))
    ax.set_xlabel(f"outer iteration ({total_inner} gradient steps total)")
    ax.set_ylabel("weighted sum rate [bits/s/Hz]")
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def plot_wsr_cdf(rows: list[dict], path: str | Path) -> Path:
    """Empirical CDF of the weighted sum rate per method over drops."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    methods = sorted({r["method"] for r in rows})
    for method in methods:
        values = np.sort([r["wsr"] for r in rows if r["method"] == method])
        cdf = np.arange(1, len(values) + 1) / len(values)
        ax.step(values, cdf, where="post", label=method)
    ax.set_xlabel("weighted sum rate [bits/s/Hz]")
    ax.set_ylabel("CDF")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)
