"""Synthetic light fields for tests and desk-scale training."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .lightfield import AngularPos, LightField, rgb_to_ycbcr420


def texture(height: int, width: int, rng: np.random.Generator, channels: int = 3,
            scales=(1.5, 3.0, 6.0)) -> np.ndarray:
    """Band-limited random texture in [20, 235], shape (H, W, C)."""
    out = np.zeros((height, width, channels))
    for c in range(channels):
        acc = np.zeros((height, width))
        for s in scales:
            n = ndimage.gaussian_filter(rng.standard_normal((height, width)), s, mode="wrap")
            acc += n / (n.std() + 1e-12)
        acc -= acc.min()
        acc /= acc.max() + 1e-12
        out[..., c] = 20 + 215 * acc
    return out


def _shifted(tex: np.ndarray, y0: float, x0: float, h: int, w: int) -> np.ndarray:
    if float(y0).is_integer() and float(x0).is_integer():
        y0, x0 = int(y0), int(x0)
        return tex[y0:y0 + h, x0:x0 + w]
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return np.stack([ndimage.map_coordinates(tex[..., c], [yy + y0, xx + x0], order=1,
                                             mode="nearest")
                     for c in range(tex.shape[2])], axis=-1)


def textured_plane(grid_rows: int = 8, grid_cols: int = 8, height: int = 64, width: int = 64,
                   disparity: float = 1.0, seed: int = 0, gray: bool = False) -> LightField:
    """Fronto-parallel textured plane seen at a constant disparity.

    ``V[u, v](y, x) = T(y - u * d, x - v * d)`` up to a fixed offset, so that
    warping view p to q by ``s + (p - q) * d`` reproduces view q exactly.
    """
    rng = np.random.default_rng(seed)
    m = int(np.ceil(abs(disparity) * max(grid_rows, grid_cols))) + 2
    tex = texture(height + 2 * m, width + 2 * m, rng, channels=1 if gray else 3)
    views = {}
    for u in range(grid_rows):
        for v in range(grid_cols):
            img = _shifted(tex, m - u * disparity, m - v * disparity, height, width)
            views[AngularPos(u, v)] = _to_view(img)
    return LightField(grid_rows, grid_cols, views)


def occlusion_scene(grid_rows: int = 8, grid_cols: int = 8, height: int = 64, width: int = 64,
                    d_background: float = 0.0, d_foreground: float = 2.0, seed: int = 0,
                    box: float = 0.4) -> LightField:
    """Textured background plane partly hidden by a textured foreground square."""
    rng = np.random.default_rng(seed)
    m = int(np.ceil(max(abs(d_background), abs(d_foreground)) * max(grid_rows, grid_cols))) + 2
    bg = texture(height + 2 * m, width + 2 * m, rng)
    fg = texture(height + 2 * m, width + 2 * m, rng, scales=(1.0, 2.0))
    side_h, side_w = int(box * height), int(box * width)
    top, left = (height - side_h) // 2, (width - side_w) // 2
    views = {}
    cu, cv = (grid_rows - 1) / 2, (grid_cols - 1) / 2
    for u in range(grid_rows):
        for v in range(grid_cols):
            img = _shifted(bg, m - u * d_background, m - v * d_background, height, width).copy()
            f = _shifted(fg, m - u * d_foreground, m - v * d_foreground, height, width)
            mask = np.zeros((height, width), bool)
            dy = int(round((u - cu) * d_foreground))
            dx = int(round((v - cv) * d_foreground))
            mask[max(top + dy, 0):max(top + dy + side_h, 0),
                 max(left + dx, 0):max(left + dx + side_w, 0)] = True
            img[mask] = f[mask]
            views[AngularPos(u, v)] = _to_view(img)
    return LightField(grid_rows, grid_cols, views)


def _to_view(img: np.ndarray):
    from .lightfield import View

    if img.shape[2] == 1:
        return View.from_luma(np.clip(np.rint(img[..., 0]), 0, 255).astype(np.uint8))
    return rgb_to_ycbcr420(np.clip(np.rint(img), 0, 255))
