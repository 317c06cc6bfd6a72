"""Generator pair (disparity + colour CNNs), discriminators and tiled inference."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DimensionMismatch
from ..lightfield import View, patch_origins
from ..nn import modelfile
from ..nn.layers import (Conv2d, GlobalAvgPool, PReLU, Sequential, Sigmoid, Softplus,
                         param_pairs)
from .features import build_features
from .warp import warp_plane

IN_PATCH = 60
OUT_PATCH = 36
STACK_SHRINK = 12  # 7/5/3/1 valid stack: 6 + 4 + 2 + 0
MARGIN = STACK_SHRINK  # per side: 6 for each of the two stacks
COLOR_IN = 7  # 4 warped views, disparity, 2 position maps


@dataclass(frozen=True)
class D2GanConfig:
    alpha: float = 0.2
    beta: float = 0.2
    gamma: float = 0.01  # adversarial weight relative to the MSE content loss
    n_levels: int = 9
    d_max: float = 4.0
    batch_size: int = 10
    lr: float = 2e-4
    lr_min: Optional[float] = None  # cosine decay from lr to lr_min over the run when set
    warmup_steps: int = 0  # g_d-only steps on the plain average of the warped references
    freeze_disparity: bool = False  # after warm-up, train g_c only
    val_every: int = 100

    def __post_init__(self):
        if not (0 < self.alpha <= 1 and 0 < self.beta <= 1):
            raise ValueError("alpha and beta must lie in (0, 1]")
        if self.n_levels < 2:
            raise ValueError("need at least two disparity levels")


def conv_stack(in_ch: int, rng: np.random.Generator, head=None,
               first_needs_grad: bool = True) -> Sequential:
    """k7(32) / k5(64) / k3(32) / k1(1) valid convolutions with PReLU in between."""
    layers = [
        Conv2d(in_ch, 32, 7, rng=rng, need_input_grad=first_needs_grad), PReLU(32),
        Conv2d(32, 64, 5, rng=rng), PReLU(64),
        Conv2d(64, 32, 3, rng=rng), PReLU(32),
        Conv2d(32, 1, 1, rng=rng),
    ]
    if head is not None:
        layers.append(head)
    return Sequential(layers)


def discriminator(rng: np.random.Generator) -> Sequential:
    """Three stride-2 3x3 convs, global average pooling, affine head, softplus."""
    return Sequential([
        Conv2d(1, 32, 3, stride=2, rng=rng), PReLU(32),
        Conv2d(32, 64, 3, stride=2, rng=rng), PReLU(64),
        Conv2d(64, 64, 3, stride=2, rng=rng), PReLU(64),
        GlobalAvgPool(),
        Conv2d(64, 1, 1, rng=rng),
        Softplus(),
    ])


@dataclass
class SynthBatch:
    """Training/inference batch for the generator pair.

    ``feats``: (N, 2L, 60, 60) feature tiles; ``refs``: (N, 4, Hp, Wp) padded
    reference planes; ``origins``: (N, 2) tile origins inside the padded
    planes; ``offsets``: (N, 4, 2) angular baselines p_i - q; ``qpos``: (N, 2)
    target position normalised to [0, 1] within its quadrant; ``target``:
    optional (N, 1, 36, 36) ground truth.
    """

    feats: np.ndarray
    refs: np.ndarray
    origins: np.ndarray
    offsets: np.ndarray
    qpos: np.ndarray
    target: Optional[np.ndarray] = None

    def __len__(self):
        return self.feats.shape[0]


class GeneratorPair:
    """Disparity net g_d followed by warping and the colour net g_c."""

    def __init__(self, n_levels: int = 9, seed: int = 0, g_d: Sequential = None,
                 g_c: Sequential = None):
        rng = np.random.default_rng(seed)
        self.g_d = g_d or conv_stack(2 * n_levels, rng, first_needs_grad=False)
        self.g_c = g_c or conv_stack(COLOR_IN, rng, head=Sigmoid())
        self.n_levels = self.g_d.layers[0].in_ch // 2
        self.train_disparity = True
        if self.g_c.layers[0].in_ch != COLOR_IN:
            raise DimensionMismatch("colour net must take 7 input channels")

    def parameters(self):
        if not self.train_disparity:
            return param_pairs(self.g_c)
        return param_pairs(self.g_d, self.g_c)

    def disparity(self, feats: np.ndarray, train: bool = False) -> np.ndarray:
        return self.g_d.forward(feats, train)

    def _warp(self, batch: SynthBatch, train: bool):
        disp = self.g_d.forward(batch.feats, train)  # (N, 1, 48, 48)
        n, _, h, w = disp.shape
        warped = np.empty((n, 4, h, w))
        dwarp = np.empty((n, 4, h, w))
        m = STACK_SHRINK // 2
        for i in range(n):
            oy, ox = batch.origins[i]
            for r in range(4):
                warped[i, r], dwarp[i, r] = warp_plane(
                    batch.refs[i, r], tuple(batch.offsets[i, r]), disp[i, 0],
                    origin=(oy + m, ox + m), with_grad=True)
        return disp, warped, dwarp

    def forward(self, batch: SynthBatch, train: bool = False) -> np.ndarray:
        disp, warped, dwarp = self._warp(batch, train)
        n, _, h, w = disp.shape
        pos = np.broadcast_to(batch.qpos[:, :, None, None], (n, 2, h, w))
        x = np.concatenate([warped, disp, pos], axis=1)
        self._cache = (disp, warped, dwarp)
        return self.g_c.forward(x, train)

    def backward(self, gy: np.ndarray) -> None:
        disp, warped, dwarp = self._cache
        gx = self.g_c.backward(gy)
        if not self.train_disparity:
            return
        gdisp = gx[:, 4:5] + (gx[:, :4] * dwarp).sum(axis=1, keepdims=True)
        self.g_d.backward(gdisp)

    def blend(self, batch: SynthBatch, train: bool = False) -> np.ndarray:
        """Mean of the warped references over the output window, bypassing g_c."""
        disp, warped, dwarp = self._warp(batch, train)
        self._cache = (disp, warped, dwarp)
        m = STACK_SHRINK // 2
        return warped[:, :, m:-m, m:-m].mean(axis=1, keepdims=True)

    def blend_backward(self, gy: np.ndarray) -> None:
        _, _, dwarp = self._cache
        m = STACK_SHRINK // 2
        g = np.zeros((gy.shape[0], 1) + dwarp.shape[2:])
        g[:, :, m:-m, m:-m] = gy / dwarp.shape[1]
        self.g_d.backward((g * dwarp).sum(axis=1, keepdims=True))

    def nets(self) -> List[Tuple[str, Sequential]]:
        return [("g_d", self.g_d), ("g_c", self.g_c)]


class DiscriminatorPair:
    def __init__(self, seed: int = 1, d1: Sequential = None, d2: Sequential = None):
        rng = np.random.default_rng(seed)
        self.d1 = d1 or discriminator(rng)
        self.d2 = d2 or discriminator(rng)

    def nets(self) -> List[Tuple[str, Sequential]]:
        return [("D1", self.d1), ("D2", self.d2)]


def save_models(path, generator: GeneratorPair, discriminators: DiscriminatorPair = None):
    nets = generator.nets() + (discriminators.nets() if discriminators else [])
    modelfile.save(path, [(role, net.layers) for role, net in nets])


def load_models(path) -> Tuple[GeneratorPair, Optional[DiscriminatorPair]]:
    nets = modelfile.load(path)
    if "g_d" not in nets or "g_c" not in nets:
        raise modelfile.ModelFormatError("model file lacks g_d / g_c")
    gen = GeneratorPair(g_d=Sequential(nets["g_d"]), g_c=Sequential(nets["g_c"]))
    disc = None
    if "D1" in nets and "D2" in nets:
        disc = DiscriminatorPair(d1=Sequential(nets["D1"]), d2=Sequential(nets["D2"]))
    return gen, disc


# --- inference ---------------------------------------------------------------

def quadrant_geometry(q, corners: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    """Angular baselines p_i - q and q normalised within the corners' box."""
    corners = [tuple(c) for c in corners]
    offsets = np.array([(p[0] - q[0], p[1] - q[1]) for p in corners], np.float64)
    rows = [c[0] for c in corners]
    cols = [c[1] for c in corners]
    span_r = max(max(rows) - min(rows), 1)
    span_c = max(max(cols) - min(cols), 1)
    qpos = np.array([(q[0] - min(rows)) / span_r, (q[1] - min(cols)) / span_c])
    return offsets, qpos


def prepare_view(refs: Sequence[np.ndarray], positions, q, n_levels: int, d_max: float):
    """Edge-padded references and their feature volume for one target."""
    pad = MARGIN
    refs_p = np.stack([np.pad(np.asarray(r, np.float64), pad, mode="edge") for r in refs])
    feats = build_features(refs_p, positions, q, n_levels, d_max)
    return refs_p, feats


def synthesize_view(refs: Sequence[np.ndarray], positions, q, model: GeneratorPair,
                    config: D2GanConfig = D2GanConfig(),
                    tile_batch: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    """Synthesize the luma plane at ``q`` from four decoded corner references.

    ``refs`` are float luma planes in [0, 1]. Returns the view and its
    disparity map (clipped to +/- d_max), both at full view resolution.
    """
    refs = [np.asarray(r, np.float64) for r in refs]
    if len(refs) != 4:
        raise ValueError("synthesis needs exactly four references")
    h, w = refs[0].shape
    if h < OUT_PATCH or w < OUT_PATCH:
        raise DimensionMismatch(f"views must be at least {OUT_PATCH}x{OUT_PATCH}")
    if model.n_levels != config.n_levels:
        raise DimensionMismatch(
            f"model expects {model.n_levels} disparity levels, config has {config.n_levels}")
    refs_p, feats = prepare_view(refs, positions, q, config.n_levels, config.d_max)
    offsets, qpos = quadrant_geometry(q, positions)
    origins = [(r, c) for r in patch_origins(h, OUT_PATCH, OUT_PATCH)
               for c in patch_origins(w, OUT_PATCH, OUT_PATCH)]
    out = np.zeros((h, w))
    disp_out = np.zeros((h, w))
    m = STACK_SHRINK
    for start in range(0, len(origins), tile_batch):
        chunk = origins[start:start + tile_batch]
        n = len(chunk)
        batch = SynthBatch(
            feats=np.stack([feats[:, r:r + IN_PATCH, c:c + IN_PATCH] for r, c in chunk]),
            refs=np.broadcast_to(refs_p, (n,) + refs_p.shape),
            origins=np.array(chunk),
            offsets=np.broadcast_to(offsets, (n, 4, 2)),
            qpos=np.broadcast_to(qpos, (n, 2)),
        )
        pred = model.forward(batch)
        disp = model._cache[0]
        for i, (r, c) in enumerate(chunk):
            out[r:r + OUT_PATCH, c:c + OUT_PATCH] = pred[i, 0]
            disp_out[r:r + OUT_PATCH, c:c + OUT_PATCH] = disp[i, 0, m // 2:m // 2 + OUT_PATCH,
                                                               m // 2:m // 2 + OUT_PATCH]
    return out, np.clip(disp_out, -config.d_max, config.d_max)


def _half(d: np.ndarray, shape) -> np.ndarray:
    """Disparity at chroma resolution: 2x2 mean, halved in magnitude."""
    h, w = d.shape
    p = np.pad(d, ((0, h % 2), (0, w % 2)), mode="edge")
    small = 0.25 * (p[0::2, 0::2] + p[1::2, 0::2] + p[0::2, 1::2] + p[1::2, 1::2])
    return 0.5 * small[:shape[0], :shape[1]]


def synthesize_color_view(refs: Sequence[View], positions, q, model: GeneratorPair,
                          config: D2GanConfig = D2GanConfig()) -> Tuple[View, np.ndarray]:
    """Synthesize a full YCbCr view from four decoded corner views.

    Luma comes from the generator; each chroma plane is the mean of the
    references warped with the generator's disparity at half scale.
    """
    luma, disp = synthesize_view([r.luma_float() for r in refs], positions, q, model, config)
    chroma = []
    for plane in ("cb", "cr"):
        stack = [getattr(r, plane).astype(np.float64) for r in refs]
        dc = _half(disp, stack[0].shape)
        acc = sum(warp_plane(s, (p[0] - q[0], p[1] - q[1]), dc) for s, p in zip(stack, positions))
        chroma.append(np.clip(np.rint(acc / len(stack)), 0, 255).astype(np.uint8))
    return View.from_luma(luma, *chroma), disp
