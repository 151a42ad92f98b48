"""Matplotlib rendering for sweep and report outputs.

Figures are written next to the delimited output files; nothing here is
needed by the numeric paths.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_sweep(rows: list[dict], out_path) -> Path:
    """Cycles vs context length, one line per method/block-size."""
    out_path = Path(out_path)
    series: dict[str, list[tuple[int, int]]] = {}
    for r in rows:
        label = r["method"]
        if r.get("block_size"):
            label += f" (B={r['block_size']})"
        series.setdefault(label, []).append((r["n"], r["cycles"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                markersize=3, label=label)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("context length N")
    ax.set_ylabel("attention cycles")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_latency_breakdown(phases: dict[str, int], out_path) -> Path:
    out_path = Path(out_path)
    names = list(phases)
    vals = [phases[k] for k in names]
    total = sum(vals)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    bars = ax.barh(names, vals)
    for bar, v in zip(bars, vals):
        ax.text(bar.get_width(), bar.get_y() + bar.get_height() / 2,
                f" {100 * v / total:.2f}%", va="center", fontsize=8)
    ax.set_xlabel("cycles per token")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
