"""``LFNN`` model files.

Little-endian layout::

    b"LFNN" | u16 version | u8 n_nets
    per net:   str role | u16 n_layers
    per layer: str type | str padding | u8 stride | u8 n_dims | n_dims * u32
    payload:   float64 arrays of every layer (parameters, then buffers) in
               descriptor order

where ``str`` is a u8 length followed by ASCII bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .layers import Layer, layer_from_descriptor

MAGIC = b"LFNN"
VERSION = 1


class ModelFormatError(ValueError):
    pass


def _pstr(s: str) -> bytes:
    b = s.encode("ascii")
    return struct.pack("<B", len(b)) + b


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.off = data, 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.data):
            raise ModelFormatError("truncated model file")
        v = struct.unpack_from(fmt, self.data, self.off)
        self.off += size
        return v

    def pstr(self) -> str:
        (n,) = self.take("<B")
        if self.off + n > len(self.data):
            raise ModelFormatError("truncated model file")
        s = self.data[self.off:self.off + n].decode("ascii")
        self.off += n
        return s


def dumps(nets: Sequence[Tuple[str, Sequence[Layer]]]) -> bytes:
    head = [MAGIC, struct.pack("<HB", VERSION, len(nets))]
    payload = []
    for role, layers in nets:
        head.append(_pstr(role) + struct.pack("<H", len(layers)))
        for layer in layers:
            dims = tuple(int(d) for d in layer.dims)
            head.append(_pstr(layer.kind) + _pstr(layer.padding)
                        + struct.pack("<BB", layer.stride, len(dims))
                        + struct.pack(f"<{len(dims)}I", *dims))
            for _, arr in layer.state():
                payload.append(np.ascontiguousarray(arr, "<f8").tobytes())
    return b"".join(head + payload)


def loads(data: bytes) -> Dict[str, List[Layer]]:
    r = _Reader(data)
    (magic,) = r.take("<4s")
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    version, n_nets = r.take("<HB")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    nets: Dict[str, List[Layer]] = {}
    order = []
    for _ in range(n_nets):
        role = r.pstr()
        (n_layers,) = r.take("<H")
        layers = []
        for _ in range(n_layers):
            kind, padding = r.pstr(), r.pstr()
            stride, nd = r.take("<BB")
            dims = r.take(f"<{nd}I") if nd else ()
            layers.append(layer_from_descriptor(kind, dims, padding, stride))
        nets[role] = layers
        order.append(role)
    for role in order:
        for layer in nets[role]:
            for _, arr in layer.state():
                n = arr.size * 8
                if r.off + n > len(data):
                    raise ModelFormatError("truncated parameter payload")
                arr[...] = np.frombuffer(data, "<f8", arr.size, r.off).reshape(arr.shape)
                r.off += n
            layer.zero_grad()
    if r.off != len(data):
        raise ModelFormatError("trailing bytes after parameter payload")
    return nets


def save(path, nets: Sequence[Tuple[str, Sequence[Layer]]]) -> None:
    Path(path).write_bytes(dumps(nets))


def load(path) -> Dict[str, List[Layer]]:
    return loads(Path(path).read_bytes())
