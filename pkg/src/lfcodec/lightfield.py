"""Light-field data model: views, grids, lenslet demultiplexing, colour
conversion, patch extraction and manifest I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from .errors import DimensionMismatch

__all__ = [
    "AngularPos",
    "View",
    "LightField",
    "Patch",
    "demultiplex_lenslet",
    "multiplex_lenslet",
    "rgb_to_ycbcr420",
    "ycbcr420_to_rgb",
    "extract_patches",
    "patch_origins",
    "load_lightfield",
    "save_lightfield",
]


class AngularPos(NamedTuple):
    """Angular (row, column) position of a sub-aperture view, 0-based."""

    u: int
    v: int


def _frozen(a: np.ndarray, dtype=np.uint8) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


def chroma_shape(height: int, width: int) -> Tuple[int, int]:
    return (height + 1) // 2, (width + 1) // 2


@dataclass(frozen=True)
class View:
    """8-bit YCbCr 4:2:0 picture. Chroma planes are ceil(luma/2) each way."""

    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen(self.y))
        object.__setattr__(self, "cb", _frozen(self.cb))
        object.__setattr__(self, "cr", _frozen(self.cr))
        if self.y.ndim != 2:
            raise DimensionMismatch("luma plane must be 2-D")
        cshape = chroma_shape(*self.y.shape)
        if self.cb.shape != cshape or self.cr.shape != cshape:
            raise DimensionMismatch(
                f"chroma planes must be {cshape}, got {self.cb.shape} / {self.cr.shape}")

    @property
    def height(self) -> int:
        return self.y.shape[0]

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def planes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.y, self.cb, self.cr

    @classmethod
    def from_luma(cls, y, cb=None, cr=None) -> "View":
        """Build a view from a luma plane (uint8 or float in [0, 1]).

        Missing chroma planes are filled with the neutral value 128.
        """
        y = np.asarray(y)
        if np.issubdtype(y.dtype, np.floating):
            y = to_uint8(y)
        cshape = chroma_shape(*y.shape)
        if cb is None:
            cb = np.full(cshape, 128, np.uint8)
        if cr is None:
            cr = np.full(cshape, 128, np.uint8)
        return cls(y, cb, cr)

    def luma_float(self) -> np.ndarray:
        return self.y.astype(np.float64) / 255.0

    def with_luma(self, y) -> "View":
        return View.from_luma(y, self.cb, self.cr)

    def __eq__(self, other):
        if not isinstance(other, View):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.planes, other.planes))

    __hash__ = None


def to_uint8(x: np.ndarray) -> np.ndarray:
    """Float samples in [0, 1] to 8-bit, clamped and rounded to nearest."""
    return np.clip(np.rint(np.asarray(x, np.float64) * 255.0), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class LightField:
    grid_rows: int
    grid_cols: int
    views: Dict[AngularPos, View] = field(repr=False)

    def __post_init__(self):
        expected = {AngularPos(u, v) for u in range(self.grid_rows) for v in range(self.grid_cols)}
        keys = {AngularPos(*k) for k in self.views}
        if keys != expected:
            raise DimensionMismatch("light field grid is not fully populated")
        views = {AngularPos(*k): v for k, v in self.views.items()}
        dims = {(v.height, v.width) for v in views.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"views have differing dimensions: {sorted(dims)}")
        object.__setattr__(self, "views", views)

    @property
    def n_views(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def view_shape(self) -> Tuple[int, int]:
        v = self.views[AngularPos(0, 0)]
        return v.height, v.width

    def __getitem__(self, pos) -> View:
        return self.views[AngularPos(*pos)]

    def positions(self) -> Iterator[AngularPos]:
        for u in range(self.grid_rows):
            for v in range(self.grid_cols):
                yield AngularPos(u, v)

    def replace(self, updates: Dict[AngularPos, View]) -> "LightField":
        views = dict(self.views)
        views.update({AngularPos(*k): v for k, v in updates.items()})
        return LightField(self.grid_rows, self.grid_cols, views)

    def luma_array(self) -> np.ndarray:
        """Luma samples as a (rows, cols, H, W) uint8 array."""
        return np.stack([np.stack([self[u, v].y for v in range(self.grid_cols)])
                         for u in range(self.grid_rows)])


@dataclass(frozen=True)
class Patch:
    origin: Tuple[int, int]  # (x, y) = (column, row) of the top-left sample
    width: int
    height: int
    samples: np.ndarray


# --- lenslet -----------------------------------------------------------------

def demultiplex_lenslet(mi: np.ndarray, pitch_u: int, pitch_v: int) -> LightField:
    """Split a lenslet (microlens) image into sub-aperture views.

    View (u, v) collects the sample at offset (u, v) under every microlens:
    ``V[u, v][i, j] = MI[i * pitch_u + u, j * pitch_v + v]``. A 2-D input is
    treated as luma; an (H, W, 3) input as RGB.
    """
    mi = np.asarray(mi)
    if pitch_u < 1 or pitch_v < 1:
        raise DimensionMismatch("pitch must be >= 1")
    h, w = mi.shape[:2]
    if h % pitch_u or w % pitch_v:
        raise DimensionMismatch(
            f"lenslet image {h}x{w} is not divisible by pitch {pitch_u}x{pitch_v}")
    views = {}
    for u in range(pitch_u):
        for v in range(pitch_v):
            sub = mi[u::pitch_u, v::pitch_v]
            views[AngularPos(u, v)] = (rgb_to_ycbcr420(sub) if sub.ndim == 3
                                       else View.from_luma(sub.astype(np.uint8)))
    return LightField(pitch_u, pitch_v, views)


def demultiplex_array(mi: np.ndarray, pitch_u: int, pitch_v: int) -> np.ndarray:
    """Raw (pitch_u, pitch_v, H/pitch_u, W/pitch_v, ...) view stack, no colour conversion."""
    mi = np.asarray(mi)
    h, w = mi.shape[:2]
    if pitch_u < 1 or pitch_v < 1 or h % pitch_u or w % pitch_v:
        raise DimensionMismatch(
            f"lenslet image {h}x{w} is not divisible by pitch {pitch_u}x{pitch_v}")
    r = mi.reshape((h // pitch_u, pitch_u, w // pitch_v, pitch_v) + mi.shape[2:])
    return np.moveaxis(r, (1, 3), (0, 1)).copy()


def multiplex_lenslet(stack: np.ndarray) -> np.ndarray:
    """Inverse of :func:`demultiplex_array`."""
    pu, pv, hh, ww = stack.shape[:4]
    r = np.moveaxis(np.asarray(stack), (0, 1), (1, 3))
    return r.reshape((hh * pu, ww * pv) + stack.shape[4:]).copy()


# --- colour ------------------------------------------------------------------

_RGB2YCC = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
])


def _box_down2(p: np.ndarray) -> np.ndarray:
    h, w = p.shape
    p = np.pad(p, ((0, h % 2), (0, w % 2)), mode="edge")
    return p.reshape(p.shape[0] // 2, 2, p.shape[1] // 2, 2).mean(axis=(1, 3))


def rgb_to_ycbcr420(rgb: np.ndarray) -> View:
    """Full-range BT.601 RGB -> YCbCr with 2x2 box-averaged chroma."""
    rgb = np.asarray(rgb, np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionMismatch("expected an (H, W, 3) RGB image")
    ycc = rgb @ _RGB2YCC.T
    ycc[..., 1:] += 128.0
    y = np.clip(np.rint(ycc[..., 0]), 0, 255).astype(np.uint8)
    cb = np.clip(np.rint(_box_down2(ycc[..., 1])), 0, 255).astype(np.uint8)
    cr = np.clip(np.rint(_box_down2(ycc[..., 2])), 0, 255).astype(np.uint8)
    return View(y, cb, cr)


def upsample_chroma(c: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    return np.repeat(np.repeat(c, 2, axis=0), 2, axis=1)[: shape[0], : shape[1]]


def ycbcr420_to_rgb(view: View) -> np.ndarray:
    """Inverse conversion with nearest-neighbour chroma upsampling, clamped to 8 bits."""
    y = view.y.astype(np.float64)
    cb = upsample_chroma(view.cb, y.shape).astype(np.float64) - 128.0
    cr = upsample_chroma(view.cr, y.shape).astype(np.float64) - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    out = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


# --- patches -----------------------------------------------------------------

def patch_origins(length: int, size: int, stride: int) -> List[int]:
    """Raster origins along one axis; the last one is anchored to the border."""
    if size > length:
        raise DimensionMismatch(f"patch size {size} exceeds extent {length}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    origins = list(range(0, length - size + 1, stride))
    if origins[-1] != length - size:
        origins.append(length - size)
    return origins


def extract_patches(view, size: int, stride: int) -> List[Patch]:
    """Luma patches in raster order covering the whole view."""
    y = view.luma_float() if isinstance(view, View) else np.asarray(view, np.float64)
    h, w = y.shape
    if size > h or size > w:
        raise DimensionMismatch(f"patch size {size} exceeds view {h}x{w}")
    rows = patch_origins(h, size, stride)
    cols = patch_origins(w, size, stride)
    return [Patch((x, r), size, size, y[r:r + size, x:x + size].copy())
            for r in rows for x in cols]


# --- manifest I/O ------------------------------------------------------------

DEFAULT_PATTERN = "view_{u}_{v}.png"
RAW_PATTERN = "view_{u}_{v}.yuv"


def _read_image(path: Path) -> View:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("L", "I", "I;16", "1"):
            return View.from_luma(np.asarray(im.convert("L")))
        return rgb_to_ycbcr420(np.asarray(im.convert("RGB")))


def read_yuv420(path: Path, height: int, width: int) -> View:
    ch, cw = chroma_shape(height, width)
    data = np.fromfile(path, np.uint8)
    if data.size != height * width + 2 * ch * cw:
        raise DimensionMismatch(f"{path}: size does not match {width}x{height} 4:2:0")
    y = data[: height * width].reshape(height, width)
    cb = data[height * width: height * width + ch * cw].reshape(ch, cw)
    cr = data[height * width + ch * cw:].reshape(ch, cw)
    return View(y, cb, cr)


def view_to_yuv_bytes(view: View) -> bytes:
    return b"".join(p.tobytes() for p in view.planes)


def load_lightfield(manifest: str | Path) -> LightField:
    """Load a light field from a JSON manifest.

    The manifest holds ``grid_rows``, ``grid_cols`` and ``pattern`` (a
    filename template with ``{u}`` / ``{v}`` placeholders, relative to the
    manifest). Views may be PNG, PGM or PPM, or raw planar 4:2:0 when the
    pattern ends in ``.yuv`` (then ``width`` and ``height`` are required).
    """
    manifest = Path(manifest)
    if manifest.is_dir():
        manifest = manifest / "manifest.json"
    meta = json.loads(manifest.read_text())
    rows, cols = int(meta["grid_rows"]), int(meta["grid_cols"])
    pattern = meta.get("pattern", DEFAULT_PATTERN)
    views = {}
    for u in range(rows):
        for v in range(cols):
            path = manifest.parent / pattern.format(u=u, v=v)
            if path.suffix == ".yuv":
                views[AngularPos(u, v)] = read_yuv420(path, int(meta["height"]), int(meta["width"]))
            else:
                views[AngularPos(u, v)] = _read_image(path)
    return LightField(rows, cols, views)


def save_lightfield(lf: LightField, directory: str | Path, raw: bool = True,
                    extra: Optional[dict] = None) -> Path:
    """Write views and a ``manifest.json``; returns the manifest path.

    ``raw=True`` stores exact planar 4:2:0 files, otherwise RGB PNGs.
    """
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pattern = RAW_PATTERN if raw else DEFAULT_PATTERN
    for pos in lf.positions():
        view = lf[pos]
        path = directory / pattern.format(u=pos.u, v=pos.v)
        if raw:
            path.write_bytes(view_to_yuv_bytes(view))
        else:
            Image.fromarray(ycbcr420_to_rgb(view)).save(path)
    h, w = lf.view_shape
    meta = {"grid_rows": lf.grid_rows, "grid_cols": lf.grid_cols, "pattern": pattern,
            "width": w, "height": h}
    if extra:
        meta.update(extra)
    path = directory / "manifest.json"
    path.write_text(json.dumps(meta, indent=2))
    return path
