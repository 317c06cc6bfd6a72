"""Disparity-driven backward warping with bilinear sampling."""

from __future__ import annotations

from typing import Tuple

import numpy as np

from ..errors import DimensionMismatch


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                    with_grad: bool = False):
    """Sample ``img`` (H, W) at fractional (ys, xs), clamping to the border.

    With ``with_grad`` also returns d(value)/d(ys) and d(value)/d(xs); both are
    zero where the coordinate was clamped.
    """
    h, w = img.shape
    yc = np.clip(ys, 0.0, h - 1.0)
    xc = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(yc).astype(np.intp)
    x0 = np.floor(xc).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = yc - y0
    fx = xc - x0
    a, b = img[y0, x0], img[y0, x1]
    c, d = img[y1, x0], img[y1, x1]
    top = a + fx * (b - a)
    bot = c + fx * (d - c)
    val = top + fy * (bot - top)
    if not with_grad:
        return val
    gy = (bot - top) * ((ys >= 0) & (ys <= h - 1))
    gx = ((b - a) + fy * ((d - c) - (b - a))) * ((xs >= 0) & (xs <= w - 1))
    return val, gy, gx


def warp_plane(ref: np.ndarray, offset: Tuple[float, float], disp: np.ndarray,
               origin: Tuple[int, int] = (0, 0), with_grad: bool = False):
    """``out[i, j] = ref[oy + i + du * D[i, j], ox + j + dv * D[i, j]]``.

    ``offset`` is the angular baseline (du, dv) = p - q and ``origin`` places
    the disparity grid inside ``ref``. With ``with_grad`` the derivative of
    the output with respect to ``disp`` is returned too.
    """
    du, dv = offset
    h, w = disp.shape
    oy, ox = origin
    ii = np.arange(h, dtype=np.float64)[:, None] + oy
    jj = np.arange(w, dtype=np.float64)[None, :] + ox
    if du == 0 and dv == 0:
        val = ref[oy:oy + h, ox:ox + w].astype(np.float64)
        return (val, np.zeros_like(val)) if with_grad else val
    ys = ii + du * disp
    xs = jj + dv * disp
    if not with_grad:
        return bilinear_sample(ref, ys, xs)
    val, gy, gx = bilinear_sample(ref, ys, xs, with_grad=True)
    return val, du * gy + dv * gx


def warp_view(ref: np.ndarray, p, q, d: np.ndarray) -> np.ndarray:
    """Warp a reference luma plane at angular position ``p`` to position ``q``."""
    ref = np.asarray(ref, np.float64)
    d = np.asarray(d, np.float64)
    if d.shape != ref.shape:
        raise DimensionMismatch(f"disparity {d.shape} does not match view {ref.shape}")
    return warp_plane(ref, (p[0] - q[0], p[1] - q[1]), d)
