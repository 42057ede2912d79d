"""Figure rendering for the experiment tables.

Each function takes the summary rows produced by the harness and writes a
PNG next to the CSV.  Rendering is optional; the CSV remains the primary
artifact.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _series_key(row, keys):
    return tuple(row[k] for k in keys)


def plot_fig2(summary: list[dict], path: str) -> str:
    """Violation vs sample size, one line per (method, K, delta)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    groups: dict[tuple, list[dict]] = {}
    for row in summary:
        if row.get("mean_violation") in ("", None):
            continue
        groups.setdefault(_series_key(row, ("method", "K", "delta")), []).append(row)
    for (method, K, delta), rows in groups.items():
        rows = sorted(rows, key=lambda r: r["N"])
        n = [r["N"] for r in rows]
        mean = [r["mean_violation"] for r in rows]
        std = [r["std_violation"] for r in rows]
        label = (f"K={K}, d={delta}" if method == "partition"
                 else f"scenario N-hard")
        line, = ax.plot(n, mean, marker="o", label=label)
        lo = [max(m - s, 1e-6) for m, s in zip(mean, std)]
        hi = [m + s for m, s in zip(mean, std)]
        ax.fill_between(n, lo, hi, alpha=0.2, color=line.get_color())
    eps = next((r["epsilon"] for r in summary if "epsilon" in r), None)
    if eps is not None:
        ax.axhline(eps, color="k", linestyle="--", linewidth=1,
                   label=f"risk level {eps}")
    ax.set_xlabel("sample size N")
    ax.set_ylabel("empirical violation")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_table1(summary: list[dict], path: str) -> str:
    """Lower/upper bounds vs K, one pair of lines per delta."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    deltas = sorted({row["delta"] for row in summary})
    for delta in deltas:
        rows = sorted((r for r in summary
                       if r["delta"] == delta and r["LB"] != ""),
                      key=lambda r: r["K"])
        ks = [r["K"] for r in rows]
        ax.plot(ks, [r["LB"] for r in rows], marker="o",
                label=f"LB, d={delta}")
        ax.plot(ks, [r["UB"] for r in rows], marker="s",
                label=f"UB, d={delta}")
    ax.set_xlabel("number of cells K")
    ax.set_ylabel("performance bound")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_closedloop(summary: list[dict], path: str) -> str:
    """Mean stage cost over time, one line per (strategy, K)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    groups: dict[tuple, list[dict]] = {}
    for row in summary:
        groups.setdefault(_series_key(row, ("strategy", "K")), []).append(row)
    for (strategy, K), rows in groups.items():
        rows = sorted(rows, key=lambda r: r["t"])
        t = [r["t"] for r in rows]
        mean = [r["mean_cost"] for r in rows]
        std = [r["std_cost"] for r in rows]
        line, = ax.plot(t, mean, label=f"{strategy}, K={K}")
        lo = [max(m - s, 0.1) for m, s in zip(mean, std)]
        hi = [m + s for m, s in zip(mean, std)]
        ax.fill_between(t, lo, hi, alpha=0.2, color=line.get_color())
    ax.set_xlabel("time step")
    ax.set_ylabel("stage cost")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
