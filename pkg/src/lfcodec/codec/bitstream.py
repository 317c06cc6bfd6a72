"""The ``LFD2`` light-field container.

All integers are little-endian::

    header:  b"LFD2" | u16 version | u8 grid_rows | u8 grid_cols | u8 gop_size
             | u8 codec_id | u8 base_qp | u16 width | u16 height
             | u8 n_refs | n_refs * (u8 u, u8 v)
    records: u16 poc | u8 tl | u32 payload_len | payload      (sorted by POC)

Dropped views simply have no record.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

from ..errors import CorruptStream
from ..lightfield import AngularPos
from .blockcodec import EncodedView

MAGIC = b"LFD2"
VERSION = 1
CODEC_IDS = {"builtin": 0, "external": 1}
CODEC_NAMES = {v: k for k, v in CODEC_IDS.items()}

_HEAD = struct.Struct("<4sHBBBBBHHB")
_REC = struct.Struct("<HBI")


@dataclass(frozen=True)
class StreamHeader:
    grid_rows: int
    grid_cols: int
    gop_size: int
    codec_id: str
    base_qp: int
    width: int
    height: int
    references: Tuple[AngularPos, ...]
    version: int = VERSION

    def pack(self) -> bytes:
        out = _HEAD.pack(MAGIC, self.version, self.grid_rows, self.grid_cols, self.gop_size,
                         CODEC_IDS[self.codec_id], self.base_qp, self.width, self.height,
                         len(self.references))
        return out + b"".join(struct.pack("<BB", u, v) for u, v in self.references)

    @classmethod
    def unpack(cls, data: bytes) -> Tuple["StreamHeader", int]:
        if len(data) < _HEAD.size:
            raise CorruptStream("stream shorter than its header")
        magic, ver, rows, cols, gop, cid, qp, w, h, nref = _HEAD.unpack_from(data)
        if magic != MAGIC:
            raise CorruptStream(f"bad magic {magic!r}")
        if cid not in CODEC_NAMES:
            raise CorruptStream(f"unknown codec id {cid}")
        off = _HEAD.size
        if len(data) < off + 2 * nref:
            raise CorruptStream("truncated reference list")
        refs = tuple(AngularPos(*struct.unpack_from("<BB", data, off + 2 * i)) for i in range(nref))
        return cls(rows, cols, gop, CODEC_NAMES[cid], qp, w, h, refs, ver), off + 2 * nref


@dataclass
class LfBitstream:
    header: StreamHeader
    records: List[EncodedView] = field(default_factory=list)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.poc)

    @property
    def pocs(self) -> List[int]:
        return [r.poc for r in self.records]

    def record(self, poc: int) -> EncodedView:
        for r in self.records:
            if r.poc == poc:
                return r
        raise KeyError(poc)

    def by_poc(self) -> Dict[int, EncodedView]:
        return {r.poc: r for r in self.records}

    @property
    def payload_bits(self) -> int:
        return sum(r.bit_count for r in self.records)

    def bpp(self) -> float:
        """Payload bits per light-field luma pixel."""
        h = self.header
        return self.payload_bits / (h.grid_rows * h.grid_cols * h.width * h.height)

    def to_bytes(self) -> bytes:
        parts = [self.header.pack()]
        for r in self.records:
            parts.append(_REC.pack(r.poc, r.tl, len(r.payload)))
            parts.append(r.payload)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "LfBitstream":
        header, off = StreamHeader.unpack(data)
        records = []
        seen = set()
        while off < len(data):
            if off + _REC.size > len(data):
                raise CorruptStream("truncated record header")
            poc, tl, n = _REC.unpack_from(data, off)
            off += _REC.size
            if off + n > len(data):
                raise CorruptStream(f"truncated payload for POC {poc}")
            if poc in seen:
                raise CorruptStream(f"duplicate record for POC {poc}")
            seen.add(poc)
            records.append(EncodedView(poc, tl, bytes(data[off:off + n])))
            off += n
        return cls(header, records)

    def write(self, path) -> int:
        data = self.to_bytes()
        Path(path).write_bytes(data)
        return len(data)

    @classmethod
    def read(cls, path) -> "LfBitstream":
        return cls.from_bytes(Path(path).read_bytes())
