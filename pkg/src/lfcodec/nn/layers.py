"""Layers with hand-written reverse-mode gradients on float64 NCHW arrays.

Every layer caches what it needs during :meth:`Layer.forward` and returns the
input gradient from :meth:`Layer.backward`, storing parameter gradients in
``layer.grads``. A layer holds the cache of its most recent forward call only.
"""

from __future__ import annotations

from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DimensionMismatch

DTYPE = np.float64


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.buffers: Dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    __call__ = forward

    @property
    def dims(self) -> Tuple[int, ...]:
        return ()

    @property
    def padding(self) -> str:
        return ""

    @property
    def stride(self) -> int:
        return 1

    def state(self) -> List[Tuple[str, np.ndarray]]:
        """Parameters then buffers, in serialisation order."""
        return list(self.params.items()) + list(self.buffers.items())

    def zero_grad(self):
        for k, p in self.params.items():
            self.grads[k] = np.zeros_like(p)


def edge_pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), mode="edge")


def edge_pad_backward(g: np.ndarray, p: int) -> np.ndarray:
    """Adjoint of :func:`edge_pad`: fold border gradients onto the edge samples."""
    if p == 0:
        return g
    g = g.copy()
    g[:, :, p, :] += g[:, :, :p, :].sum(axis=2)
    g[:, :, -p - 1, :] += g[:, :, -p:, :].sum(axis=2)
    g = g[:, :, p:-p, :]
    g[:, :, :, p] += g[:, :, :, :p].sum(axis=3)
    g[:, :, :, -p - 1] += g[:, :, :, -p:].sum(axis=3)
    return np.ascontiguousarray(g[:, :, :, p:-p])


class Conv2d(Layer):
    """Cross-correlation with 'valid' or edge-replicating 'same' padding."""

    kind = "conv"

    def __init__(self, in_ch: int, out_ch: int, k: int, padding: str = "valid",
                 stride: int = 1, rng: Optional[np.random.Generator] = None,
                 need_input_grad: bool = True):
        super().__init__()
        if k % 2 == 0:
            raise ValueError("kernel size must be odd")
        if padding not in ("valid", "same"):
            raise ValueError(f"unknown padding {padding!r}")
        if padding == "same" and stride != 1:
            raise ValueError("'same' padding requires stride 1")
        self.k, self._padding, self._stride = k, padding, stride
        self.need_input_grad = need_input_grad
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = np.sqrt(6.0 / (in_ch * k * k))
        self.params["W"] = rng.uniform(-bound, bound, (out_ch, in_ch, k, k)).astype(DTYPE)
        self.params["b"] = np.zeros(out_ch, DTYPE)
        self.zero_grad()

    @property
    def dims(self):
        return self.params["W"].shape

    @property
    def padding(self):
        return self._padding

    @property
    def stride(self):
        return self._stride

    @property
    def in_ch(self) -> int:
        return self.params["W"].shape[1]

    @property
    def out_ch(self) -> int:
        return self.params["W"].shape[0]

    def _columns(self, xp: np.ndarray) -> np.ndarray:
        """(C*k*k, N*Ho*Wo) patch matrix built from k*k strided slices."""
        k, s = self.k, self._stride
        n, c, h, w = xp.shape
        ho, wo = (h - k) // s + 1, (w - k) // s + 1
        xt = xp.transpose(1, 0, 2, 3)
        cols = np.empty((c, k, k, n, ho, wo))
        for i in range(k):
            for j in range(k):
                cols[:, i, j] = xt[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s]
        return cols.reshape(c * k * k, n * ho * wo), (n, ho, wo)

    def forward(self, x, train=False):
        x = np.asarray(x, DTYPE)
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise DimensionMismatch(f"conv expects (N, {self.in_ch}, H, W), got {x.shape}")
        p = self.k // 2 if self._padding == "same" else 0
        xp = edge_pad(x, p)
        if xp.shape[2] < self.k or xp.shape[3] < self.k:
            raise DimensionMismatch(f"input {x.shape[2:]} smaller than kernel {self.k}")
        cols, (n, ho, wo) = self._columns(xp)
        self._cache = (cols, xp.shape)
        W = self.params["W"]
        out = (W.reshape(W.shape[0], -1) @ cols).reshape(W.shape[0], n, ho, wo)
        out += self.params["b"][:, None, None, None]
        return np.ascontiguousarray(out.transpose(1, 0, 2, 3))

    def backward(self, gy):
        cols, xshape = self._cache
        k, s = self.k, self._stride
        W = self.params["W"]
        o = W.shape[0]
        n, c, h, w = xshape
        ho, wo = gy.shape[2], gy.shape[3]
        g2 = gy.transpose(1, 0, 2, 3).reshape(o, -1)
        self.grads["W"] = (g2 @ cols.T).reshape(W.shape)
        self.grads["b"] = g2.sum(axis=1)
        if not self.need_input_grad:
            return None
        gcols = (W.reshape(o, -1).T @ g2).reshape(c, k, k, n, ho, wo)
        gxt = np.zeros((c, n, h, w))
        for i in range(k):
            for j in range(k):
                gxt[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s] += gcols[:, i, j]
        p = k // 2 if self._padding == "same" else 0
        return edge_pad_backward(np.ascontiguousarray(gxt.transpose(1, 0, 2, 3)), p)


class BatchNorm2d(Layer):
    """Per-channel batch normalisation; running stats use momentum 0.9."""

    kind = "bn"

    def __init__(self, ch: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.params["gamma"] = np.ones(ch, DTYPE)
        self.params["beta"] = np.zeros(ch, DTYPE)
        self.buffers["running_mean"] = np.zeros(ch, DTYPE)
        self.buffers["running_var"] = np.ones(ch, DTYPE)
        self.zero_grad()

    @property
    def dims(self):
        return self.params["gamma"].shape

    def forward(self, x, train=False):
        g, b = self.params["gamma"], self.params["beta"]
        if train:
            mu = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            m = x.size // x.shape[1]
            rm, rv = self.buffers["running_mean"], self.buffers["running_var"]
            rm *= self.momentum
            rm += (1 - self.momentum) * mu
            rv *= self.momentum
            rv += (1 - self.momentum) * var * (m / max(m - 1, 1))
        else:
            mu, var = self.buffers["running_mean"], self.buffers["running_var"]
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu[None, :, None, None]) * inv[None, :, None, None]
        self._cache = (xhat, inv, train)
        return xhat * g[None, :, None, None] + b[None, :, None, None]

    def backward(self, gy):
        xhat, inv, train = self._cache
        g = self.params["gamma"]
        self.grads["gamma"] = (gy * xhat).sum(axis=(0, 2, 3))
        self.grads["beta"] = gy.sum(axis=(0, 2, 3))
        gxhat = gy * g[None, :, None, None]
        if not train:
            return gxhat * inv[None, :, None, None]
        m = gy.size // gy.shape[1]
        s1 = gxhat.sum(axis=(0, 2, 3))[None, :, None, None]
        s2 = (gxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
        return (inv[None, :, None, None] / m) * (m * gxhat - s1 - xhat * s2)


class PReLU(Layer):
    kind = "prelu"

    def __init__(self, ch: int, init: float = 0.25):
        super().__init__()
        self.params["alpha"] = np.full(ch, init, DTYPE)
        self.zero_grad()

    @property
    def dims(self):
        return self.params["alpha"].shape

    def forward(self, x, train=False):
        self._x = x
        a = self.params["alpha"][None, :, None, None]
        return np.where(x >= 0, x, a * x)

    def backward(self, gy):
        x = self._x
        neg = x < 0
        self.grads["alpha"] = (gy * x * neg).sum(axis=(0, 2, 3))
        a = self.params["alpha"][None, :, None, None]
        return np.where(neg, a * gy, gy)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, train=False):
        self._y = 0.5 * (1.0 + np.tanh(0.5 * x))
        return self._y

    def backward(self, gy):
        return gy * self._y * (1.0 - self._y)


_TINY = np.finfo(DTYPE).tiny


def softplus(x: np.ndarray) -> np.ndarray:
    """ln(1 + e^x), linear for large x and floored at the smallest positive float."""
    return np.maximum(np.logaddexp(0.0, x), _TINY)


class Softplus(Layer):
    kind = "softplus"

    def forward(self, x, train=False):
        self._x = x
        return softplus(x)

    def backward(self, gy):
        return gy * 0.5 * (1.0 + np.tanh(0.5 * self._x))


class GlobalAvgPool(Layer):
    kind = "gap"

    def forward(self, x, train=False):
        self._shape = x.shape
        return x.mean(axis=(2, 3), keepdims=True)

    def backward(self, gy):
        n, c, h, w = self._shape
        return np.broadcast_to(gy / (h * w), self._shape).copy()


class Sequential:
    def __init__(self, layers: Sequence[Layer]):
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    __call__ = forward

    def backward(self, gy):
        for layer in reversed(self.layers):
            gy = layer.backward(gy)
            if gy is None:
                break
        return gy

    def parameters(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for layer in self.layers:
            for k, p in layer.params.items():
                yield p, layer.grads[k]

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def state(self) -> List[Tuple[str, np.ndarray]]:
        return [kv for layer in self.layers for kv in layer.state()]


def param_pairs(*nets) -> List[Tuple[np.ndarray, np.ndarray]]:
    """(param, grad) pairs of several networks; grads are looked up fresh each call."""
    return [pg for net in nets for pg in net.parameters()]


def mse(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to ``pred``."""
    d = pred - target
    return float(np.mean(d * d)), 2.0 * d / d.size


LAYER_TYPES = {
    "conv": Conv2d,
    "bn": BatchNorm2d,
    "prelu": PReLU,
    "sigmoid": Sigmoid,
    "softplus": Softplus,
    "gap": GlobalAvgPool,
}


def layer_from_descriptor(kind: str, dims: Sequence[int], padding: str, stride: int) -> Layer:
    if kind == "conv":
        o, c, k, _ = dims
        return Conv2d(c, o, k, padding=padding or "valid", stride=stride)
    if kind in ("bn", "prelu"):
        return LAYER_TYPES[kind](dims[0])
    if kind in LAYER_TYPES:
        return LAYER_TYPES[kind]()
    raise ValueError(f"unknown layer type {kind!r}")
