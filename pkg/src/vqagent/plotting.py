"""Report figures, rendered headless to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def accuracy_chart(reports, group: str, path) -> Path:
    """Grouped bars: one group per category (or video type), one bar per mode."""
    tables = {r.mode: getattr(r, f"by_{group}") for r in reports}
    keys = sorted({k for t in tables.values() for k in t})
    fig, ax = plt.subplots(figsize=(max(4, 1.6 * len(keys) + 2), 3.5))
    width = 0.8 / max(1, len(tables))
    x = np.arange(len(keys))
    for i, (mode, table) in enumerate(tables.items()):
        vals = [table.get(k, {}).get("accuracy", 0.0) for k in keys]
        ax.bar(x + i * width - 0.4 + width / 2, vals, width, label=mode)
    ax.set_xticks(x, [k.replace("_", "\n") for k in keys])
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title(f"accuracy by {group.replace('_', ' ')}")
    ax.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def scene_score_plot(times, scores, threshold: float, cuts, path) -> Path:
    """Consecutive-frame change scores with the threshold and the chosen cuts."""
    fig, ax = plt.subplots(figsize=(8, 2.8))
    ax.plot(times, scores, lw=0.8)
    ax.axhline(threshold, color="red", ls="--", lw=0.8, label=f"threshold {threshold:g}")
    for c in cuts:
        ax.axvline(c, color="grey", lw=0.6, alpha=0.6)
    ax.set_xlabel("seconds")
    ax.set_ylabel("change score")
    ax.legend(fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
