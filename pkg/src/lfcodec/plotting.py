"""Report figures: RD curves and per-view quality fluctuation."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import RdCurve  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "savefig.dpi": 120,
}


def plot_rd(curves: Sequence[RdCurve], path, quality_label: str = "PSNR (dB)",
            title: str = "") -> Path:
    """Quality against bpp, one line per curve."""
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for c in curves:
            ax.plot(c.rate, c.quality, marker="o", label=c.label or None)
        ax.set_xlabel("rate (bpp)")
        ax.set_ylabel(quality_label)
        if title:
            ax.set_title(title)
        if any(c.label for c in curves):
            ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_fluctuation(series: Mapping[str, Sequence[float]], path, title: str = "") -> Path:
    """Per-view PSNR in POC order; lossless views are drawn at the top edge."""
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.4, 3.2))
        finite = [v for s in series.values() for v in s if math.isfinite(v)]
        cap = (max(finite) + 1.0) if finite else 100.0
        for name, vals in series.items():
            y = np.array([v if math.isfinite(v) else cap for v in vals])
            ax.plot(np.arange(len(y)), y, marker=".", linewidth=0.8, label=name)
        ax.set_xlabel("POC")
        ax.set_ylabel("PSNR (dB)")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
