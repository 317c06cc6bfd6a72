"""Multi-view quality enhancement network.

Three inputs (target, central view, picked neighbour) each feed three
parallel same-padded convolutions (3x3, 5x5, 7x7; 32 filters, BN, PReLU).
The nine maps (288 channels) enter a densely connected block of five 3x3
layers where layer i sees the concatenation of all earlier block outputs.
A linear 3x3 head over all five block outputs predicts a residual that is
added to the target.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DimensionMismatch
from ..nn import modelfile
from ..nn.layers import BatchNorm2d, Conv2d, PReLU, Sequential, param_pairs

BRANCH_KERNELS = (3, 5, 7)
WIDTH = 32
N_INPUTS = 3
N_DENSE = 5
ROLE = "qenet"


def _unit(in_ch: int, k: int, rng, need_input_grad: bool = True) -> Sequential:
    conv = Conv2d(in_ch, WIDTH, k, padding="same", rng=rng, need_input_grad=need_input_grad)
    return Sequential([conv, BatchNorm2d(WIDTH), PReLU(WIDTH)])


class QeNet:
    def __init__(self, seed: int = 0, layers: Optional[Sequence] = None):
        rng = np.random.default_rng(seed)
        if layers is None:
            self.branches = [_unit(1, k, rng, False) for _ in range(N_INPUTS) for k in BRANCH_KERNELS]
            fused = WIDTH * len(self.branches)
            self.dense = [_unit(fused if i == 0 else WIDTH * i, 3, rng) for i in range(N_DENSE)]
            self.head = Conv2d(WIDTH * N_DENSE, 1, 3, padding="same", rng=rng)
            self.head.params["W"][:] = 0.0
        else:
            self._from_layers(list(layers))
        self._check_channels()

    def _from_layers(self, layers):
        nb = N_INPUTS * len(BRANCH_KERNELS)
        if len(layers) != 3 * (nb + N_DENSE) + 1:
            raise modelfile.ModelFormatError("qenet layer count mismatch")
        units = [Sequential(layers[3 * i:3 * i + 3]) for i in range(nb + N_DENSE)]
        self.branches, self.dense = units[:nb], units[nb:]
        self.head = layers[-1]

    def _check_channels(self):
        ks = [b.layers[0].k for b in self.branches]
        if ks != list(BRANCH_KERNELS) * N_INPUTS:
            raise DimensionMismatch(f"branch kernels {ks}")
        if any(b.layers[0].in_ch != 1 or b.layers[0].out_ch != WIDTH for b in self.branches):
            raise DimensionMismatch("every branch maps 1 channel to 32")
        expected = [WIDTH * len(self.branches)] + [WIDTH * i for i in range(1, N_DENSE)]
        got = [u.layers[0].in_ch for u in self.dense]
        if got != expected:
            raise DimensionMismatch(f"dense block inputs {got}, expected {expected}")
        if self.head.in_ch != WIDTH * N_DENSE or self.head.out_ch != 1:
            raise DimensionMismatch("head must map 160 channels to 1")

    @property
    def dense_inputs(self) -> List[int]:
        return [u.layers[0].in_ch for u in self.dense]

    def layers(self) -> list:
        return [l for u in self.branches + self.dense for l in u.layers] + [self.head]

    def parameters(self):
        return param_pairs(*self.branches, *self.dense, Sequential([self.head]))

    def residual(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """(N, 3, H, W) inputs (target, central, picked) -> (N, 1, H, W) residual."""
        if x.ndim != 4 or x.shape[1] != N_INPUTS:
            raise DimensionMismatch(f"expected (N, 3, H, W), got {x.shape}")
        nk = len(BRANCH_KERNELS)
        feats = [b.forward(x[:, i // nk:i // nk + 1], train) for i, b in enumerate(self.branches)]
        h = np.concatenate(feats, axis=1)
        outs = [self.dense[0].forward(h, train)]
        for u in self.dense[1:]:
            outs.append(u.forward(np.concatenate(outs, axis=1), train))
        return self.head.forward(np.concatenate(outs, axis=1), train)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        return x[:, :1] + self.residual(x, train)

    def backward(self, gy: np.ndarray) -> None:
        """Backpropagate d loss / d output (the skip path needs no parameters)."""
        g_cat = self.head.backward(gy)
        g_outs = [g_cat[:, WIDTH * i:WIDTH * (i + 1)].copy() for i in range(N_DENSE)]
        for i in range(N_DENSE - 1, 0, -1):
            g_in = self.dense[i].backward(g_outs[i])
            for j in range(i):
                g_outs[j] += g_in[:, WIDTH * j:WIDTH * (j + 1)]
        g_h = self.dense[0].backward(g_outs[0])
        for i, b in enumerate(self.branches):
            b.backward(g_h[:, WIDTH * i:WIDTH * (i + 1)])

    def save(self, path):
        modelfile.save(path, [(ROLE, self.layers())])

    @classmethod
    def load(cls, path) -> "QeNet":
        nets = modelfile.load(path)
        if ROLE not in nets:
            raise modelfile.ModelFormatError(f"model file has no {ROLE!r} network")
        return cls(layers=nets[ROLE])


def enhance_luma(model: QeNet, target: np.ndarray, central: np.ndarray,
                 picked: np.ndarray) -> np.ndarray:
    """Whole-plane enhancement of float luma in [0, 1], clamped to [0, 1]."""
    shapes = {np.shape(target), np.shape(central), np.shape(picked)}
    if len(shapes) != 1:
        raise DimensionMismatch(f"input views differ in size: {sorted(shapes)}")
    x = np.stack([target, central, picked])[None].astype(np.float64)
    return np.clip(model.forward(x)[0, 0], 0.0, 1.0)
