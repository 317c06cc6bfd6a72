"""Objective quality (PSNR, SSIM), Bjontegaard deltas and per-view fluctuation."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch
from .lightfield import LightField, View

PEAK = 255.0


def _luma(x) -> np.ndarray:
    if isinstance(x, View):
        x = x.y
    return np.asarray(x, np.float64)


def _pair(a, b):
    a, b = _luma(a), _luma(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak: float = PEAK) -> float:
    """PSNR in dB on 8-bit luma; ``inf`` for identical inputs."""
    m = mse(a, b)
    if m == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / m)


def _gauss_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r * r) / (2 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a, b, peak: float = PEAK, win: int = 11, sigma: float = 1.5) -> float:
    """Single-scale SSIM averaged over the valid window positions."""
    a, b = _pair(a, b)
    if a.shape[0] < win or a.shape[1] < win:
        raise DimensionMismatch(f"SSIM needs at least {win}x{win} pixels, got {a.shape}")
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    w = _gauss_window(win, sigma)
    h = win // 2

    def filt(x):
        return ndimage.correlate(x, w, mode="constant")[h:x.shape[0] - h, h:x.shape[1] - h]

    mu_a, mu_b = filt(a), filt(b)
    saa = filt(a * a) - mu_a ** 2
    sbb = filt(b * b) - mu_b ** 2
    sab = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (saa + sbb + c2)
    return float(np.mean(num / den))


# --- Bjontegaard deltas --------------------------------------------------------

@dataclass
class RdCurve:
    """Rate (bpp) / quality points sorted by increasing rate."""

    rate: np.ndarray
    quality: np.ndarray
    label: str = ""

    def __post_init__(self):
        r = np.asarray(self.rate, np.float64)
        q = np.asarray(self.quality, np.float64)
        if r.shape != q.shape or r.ndim != 1:
            raise ValueError("rate and quality must be 1-D arrays of equal length")
        if len(r) < 4:
            raise ValueError("an RD curve needs at least 4 points")
        if np.any(r <= 0) or not np.all(np.isfinite(r)) or not np.all(np.isfinite(q)):
            raise ValueError("rates must be positive and all values finite")
        order = np.argsort(r)
        r, q = r[order], q[order]
        if np.any(np.diff(r) <= 0):
            raise ValueError("rates must be distinct")
        if np.any(np.diff(q) < 0):
            warnings.warn(f"RD curve {self.label!r} is not monotone in quality", stacklevel=2)
        self.rate, self.quality = r, q

    def __len__(self):
        return len(self.rate)


def _as_curve(c) -> RdCurve:
    if isinstance(c, RdCurve):
        return c
    r, q = zip(*c)
    return RdCurve(np.array(r), np.array(q))


def _mean_gap(x1, y1, x2, y2) -> float:
    """Mean of (fit2 - fit1) over the overlap of the x ranges, cubic fits."""
    lo = max(x1.min(), x2.min())
    hi = min(x1.max(), x2.max())
    if hi <= lo:
        raise ValueError("RD curves do not overlap")
    p1 = np.polyint(np.polyfit(x1, y1, 3))
    p2 = np.polyint(np.polyfit(x2, y2, 3))
    a1 = np.polyval(p1, hi) - np.polyval(p1, lo)
    a2 = np.polyval(p2, hi) - np.polyval(p2, lo)
    return float((a2 - a1) / (hi - lo))


def bd_rate(anchor, test) -> float:
    """Average bitrate difference (percent) of ``test`` against ``anchor`` at equal quality."""
    a, t = _as_curve(anchor), _as_curve(test)
    d = _mean_gap(a.quality, np.log10(a.rate), t.quality, np.log10(t.rate))
    return 100.0 * (10.0 ** d - 1.0)


def bd_quality(anchor, test) -> float:
    """Average quality difference of ``test`` against ``anchor`` at equal rate."""
    a, t = _as_curve(anchor), _as_curve(test)
    return _mean_gap(np.log10(a.rate), a.quality, np.log10(t.rate), t.quality)


bd_psnr = bd_quality


# --- fluctuation ----------------------------------------------------------------

@dataclass
class FluctuationStats:
    """Per-view PSNR in POC order with summary statistics.

    Lossless views (infinite PSNR) are excluded from the summary; if every
    view is lossless the summary is mean=inf, std=0 and ``all_lossless`` is set.
    """

    psnr: List[float]
    mean: float = field(init=False)
    std: float = field(init=False)
    min: float = field(init=False)
    all_lossless: bool = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.psnr, np.float64)
        finite = vals[np.isfinite(vals)]
        self.all_lossless = finite.size == 0
        if self.all_lossless:
            self.mean, self.std, self.min = math.inf, 0.0, math.inf
        else:
            self.mean = float(finite.mean())
            self.std = float(finite.std())
            self.min = float(finite.min())

    def __len__(self):
        return len(self.psnr)


def fluctuation(decoded: LightField, original: LightField, seq=None) -> FluctuationStats:
    """Per-view luma PSNR, ordered by POC when ``seq`` is given, else row-major."""
    if (decoded.grid_rows, decoded.grid_cols) != (original.grid_rows, original.grid_cols):
        raise DimensionMismatch("light fields have different angular grids")
    positions = [e.pos for e in seq] if seq is not None else original.positions()
    return FluctuationStats([psnr(decoded[p], original[p]) for p in positions])


def per_view_quality(decoded: LightField, original: LightField, seq=None,
                     with_ssim: bool = True) -> List[Dict]:
    """One row per view: poc, u, v, psnr_db and optionally ssim."""
    if (decoded.grid_rows, decoded.grid_cols) != (original.grid_rows, original.grid_cols):
        raise DimensionMismatch("light fields have different angular grids")
    if seq is not None:
        items = [(e.poc, e.pos) for e in seq]
    else:
        items = list(enumerate(original.positions()))
    rows = []
    for poc, p in items:
        row = {"poc": poc, "u": p.u, "v": p.v, "psnr_db": psnr(decoded[p], original[p])}
        if with_ssim:
            row["ssim"] = ssim(decoded[p], original[p])
        rows.append(row)
    return rows


def lf_quality(decoded: LightField, original: LightField) -> Dict[str, float]:
    """Light-field PSNR from the pooled luma MSE, and mean per-view SSIM."""
    err = [mse(decoded[p], original[p]) for p in original.positions()]
    m = float(np.mean(err))
    return {
        "psnr_db": math.inf if m == 0 else 10 * math.log10(PEAK ** 2 / m),
        "ssim": float(np.mean([ssim(decoded[p], original[p]) for p in original.positions()])),
    }


# --- CSV I/O --------------------------------------------------------------------

RD_FIELDS = ("rate_bpp", "psnr_db", "ssim")


def write_rd_csv(path, rows: Iterable[Dict], fields: Sequence[str] = RD_FIELDS):
    rows = list(rows)
    extra = [k for k in rows[0] if k not in fields] if rows else []
    with Path(path).open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(extra) + list(fields), extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def read_rd_csv(path, quality: str = "psnr_db", label: Optional[str] = None) -> RdCurve:
    with Path(path).open(newline="") as f:
        rows = list(csv.DictReader(f))
    return RdCurve(np.array([float(r["rate_bpp"]) for r in rows]),
                   np.array([float(r[quality]) for r in rows]),
                   label=label or Path(path).stem)


def write_rows(path, rows: Sequence[Dict], fields: Optional[Sequence[str]] = None):
    """Generic CSV writer for report rows (keys of the first row by default)."""
    fields = list(fields or (rows[0].keys() if rows else []))
    with Path(path).open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
