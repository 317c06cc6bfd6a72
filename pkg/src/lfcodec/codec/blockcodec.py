"""Single-view hybrid block coder.

Each plane is cut into 8x8 blocks. Intra pictures predict every block from
the plane's rounded mean; inter pictures use full-pel block matching (SAD,
range +/-8) against one or two decoded references, with an averaged
bi-predictor as a third option. The residual goes through an orthonormal
DCT, a uniform quantiser with step ``2 ** ((qp - 4) / 6)``, a zigzag scan and
run-length/Exp-Golomb coding.

Payload layout (big-endian bit order)::

    u32 bit count | u16 width | u16 height | u8 qp | ue(n_refs)
    per plane (Y, Cb, Cr):
        intra: u8 dc predictor
        per block, raster order:
            inter: [ue(mode) if 2 refs] se(mv) pairs for the chosen mode
            ue(n_nonzero) then (ue(zero run), se(level)) per nonzero coeff
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import DimensionMismatch, MalformedPayload
from ..lightfield import View, chroma_shape
from .dct import BLOCK, ZIGZAG, forward_dct, inverse_dct
from .entropy import BitReader, BitWriter

SEARCH_RANGE = 8
MODE_REF0, MODE_REF1, MODE_BI = 0, 1, 2
_HEADER_BITS = 32


def qstep(qp: int) -> float:
    return 2.0 ** ((qp - 4) / 6.0)


def _check_qp(qp: int):
    if not 0 <= int(qp) <= 51:
        raise ValueError(f"qp {qp} out of range [0, 51]")


def _search_offsets(r: int = SEARCH_RANGE) -> List[Tuple[int, int]]:
    offs = [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    # zero vector first; among equal SAD the earliest offset wins
    return sorted(offs, key=lambda o: (abs(o[0]) + abs(o[1]), o[0], o[1]))


_OFFSETS = _search_offsets()


@dataclass(frozen=True)
class EncodedView:
    poc: int
    tl: int
    payload: bytes

    @property
    def bit_count(self) -> int:
        return 8 * len(self.payload)


def _pad_to_blocks(p: np.ndarray) -> np.ndarray:
    h, w = p.shape
    return np.pad(p, ((0, -h % BLOCK), (0, -w % BLOCK)), mode="edge")


def _to_blocks(p: np.ndarray) -> np.ndarray:
    h, w = p.shape
    return p.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).swapaxes(1, 2)


def _from_blocks(b: np.ndarray) -> np.ndarray:
    nby, nbx = b.shape[:2]
    return b.swapaxes(1, 2).reshape(nby * BLOCK, nbx * BLOCK)


def _pad_reference(ref: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Reference plane brought to the coded size, plus a search margin."""
    h, w = shape
    ref = np.pad(ref, ((0, h - ref.shape[0]), (0, w - ref.shape[1])), mode="edge")
    return np.pad(ref, SEARCH_RANGE, mode="edge").astype(np.int32)


def _motion_search(cur: np.ndarray, refpad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-block best (dy, dx) and its SAD."""
    h, w = cur.shape
    nby, nbx = h // BLOCK, w // BLOCK
    best_sad = np.full((nby, nbx), np.iinfo(np.int64).max, np.int64)
    best_mv = np.zeros((nby, nbx, 2), np.int64)
    r = SEARCH_RANGE
    for dy, dx in _OFFSETS:
        cand = refpad[r + dy:r + dy + h, r + dx:r + dx + w]
        sad = np.abs(cur - cand).reshape(nby, BLOCK, nbx, BLOCK).sum(axis=(1, 3))
        better = sad < best_sad
        if better.any():
            best_sad = np.where(better, sad, best_sad)
            best_mv[better] = (dy, dx)
    return best_mv, best_sad


def _predict(refpad: np.ndarray, mv: np.ndarray) -> np.ndarray:
    """Motion-compensated (nby, nbx, 8, 8) prediction."""
    nby, nbx = mv.shape[:2]
    r = SEARCH_RANGE
    ar = np.arange(BLOCK)
    rows = r + (np.arange(nby)[:, None] * BLOCK + mv[..., 0])[..., None] + ar
    cols = r + (np.arange(nbx)[None, :] * BLOCK + mv[..., 1])[..., None] + ar
    return refpad[rows[..., :, None], cols[..., None, :]]


def _quantize(coeffs: np.ndarray, step: float) -> np.ndarray:
    return (np.sign(coeffs) * np.floor(np.abs(coeffs) / step + 0.5)).astype(np.int64)


def _reconstruct(pred: np.ndarray, levels: np.ndarray, step: float) -> np.ndarray:
    res = inverse_dct(levels.astype(np.float64) * step)
    return np.clip(np.rint(pred + res), 0, 255).astype(np.int32)


def _write_levels(bw: BitWriter, zz: np.ndarray):
    nz = np.flatnonzero(zz)
    bw.ue(len(nz))
    prev = -1
    for i in nz:
        bw.ue(int(i - prev - 1))
        bw.se(int(zz[i]))
        prev = i


def _read_levels(br: BitReader) -> np.ndarray:
    zz = np.zeros(BLOCK * BLOCK, np.int64)
    n = br.ue()
    if n > BLOCK * BLOCK:
        raise MalformedPayload("too many coefficients in block")
    pos = -1
    for _ in range(n):
        pos += br.ue() + 1
        if pos >= BLOCK * BLOCK:
            raise MalformedPayload("coefficient run past end of block")
        zz[pos] = br.se()
    return zz


def _encode_plane(bw: BitWriter, plane: np.ndarray, refs: Sequence[np.ndarray],
                  step: float) -> np.ndarray:
    h, w = plane.shape
    cur = _pad_to_blocks(plane).astype(np.int32)
    nby, nbx = cur.shape[0] // BLOCK, cur.shape[1] // BLOCK
    modes = mvs = None
    if not refs:
        dc = int(np.clip(np.floor(plane.mean() + 0.5), 0, 255))
        bw.uint(dc, 8)
        pred = np.full((nby, nbx, BLOCK, BLOCK), dc, np.int32)
    else:
        cur_blocks = _to_blocks(cur)
        padded = [_pad_reference(r, cur.shape) for r in refs]
        found = [_motion_search(cur, rp) for rp in padded]
        preds = [_predict(rp, mv) for rp, (mv, _) in zip(padded, found)]
        sads = [sad for _, sad in found]
        if len(refs) == 2:
            bi = (preds[0] + preds[1] + 1) // 2
            preds.append(bi)
            sads.append(np.abs(cur_blocks - bi).sum(axis=(2, 3)))
        modes = np.argmin(np.stack(sads), axis=0)  # first minimum: ref0, ref1, bi
        pred = np.take_along_axis(np.stack(preds), modes[None, ..., None, None], 0)[0]
        mvs = [mv for mv, _ in found]
    levels = _quantize(forward_dct(_to_blocks(cur) - pred), step)
    zz = levels.reshape(nby, nbx, BLOCK * BLOCK)[..., ZIGZAG]
    for by in range(nby):
        for bx in range(nbx):
            if modes is not None:
                m = int(modes[by, bx])
                if len(refs) == 2:
                    bw.ue(m)
                for r in ((0, 1) if m == MODE_BI else (m,)):
                    bw.se(int(mvs[r][by, bx, 0]))
                    bw.se(int(mvs[r][by, bx, 1]))
            _write_levels(bw, zz[by, bx])
    rec = _from_blocks(_reconstruct(pred, levels, step))
    return rec[:h, :w].astype(np.uint8)


def _decode_plane(br: BitReader, shape: Tuple[int, int], refs: Sequence[np.ndarray],
                  step: float) -> np.ndarray:
    h, w = shape
    hp, wp = h + (-h % BLOCK), w + (-w % BLOCK)
    nby, nbx = hp // BLOCK, wp // BLOCK
    zz = np.zeros((nby, nbx, BLOCK * BLOCK), np.int64)
    if not refs:
        dc = br.uint(8)
        pred = np.full((nby, nbx, BLOCK, BLOCK), dc, np.int32)
        for by in range(nby):
            for bx in range(nbx):
                zz[by, bx] = _read_levels(br)
    else:
        modes = np.zeros((nby, nbx), np.int64)
        mvs = np.zeros((2, nby, nbx, 2), np.int64)
        for by in range(nby):
            for bx in range(nbx):
                m = br.ue() if len(refs) == 2 else 0
                if m > (MODE_BI if len(refs) == 2 else MODE_REF0):
                    raise MalformedPayload(f"invalid prediction mode {m}")
                for r in ((0, 1) if m == MODE_BI else (m,)):
                    dy, dx = br.se(), br.se()
                    if max(abs(dy), abs(dx)) > SEARCH_RANGE:
                        raise MalformedPayload("motion vector outside search range")
                    mvs[r, by, bx] = (dy, dx)
                modes[by, bx] = m
                zz[by, bx] = _read_levels(br)
        padded = [_pad_reference(r, (hp, wp)) for r in refs]
        preds = [_predict(rp, mvs[i]) for i, rp in enumerate(padded)]
        if len(refs) == 2:
            preds.append((preds[0] + preds[1] + 1) // 2)
        pred = np.take_along_axis(np.stack(preds), modes[None, ..., None, None], 0)[0]
    levels = np.zeros_like(zz)
    levels[..., ZIGZAG] = zz
    rec = _from_blocks(_reconstruct(pred, levels.reshape(nby, nbx, BLOCK, BLOCK), step))
    return rec[:h, :w].astype(np.uint8)


def encode_view(view: View, refs: Sequence[View], qp: int, poc: int = 0,
                tl: int = 0) -> Tuple[EncodedView, View]:
    """Code one view; returns the payload and the decoder-side reconstruction.

    ``refs`` are decoded views, best candidate first: on equal SAD the earlier
    reference is preferred, and a uni-directional predictor is preferred over
    the bi-predictor.
    """
    _check_qp(qp)
    if len(refs) > 2:
        raise ValueError("at most two references are supported")
    for r in refs:
        if (r.height, r.width) != (view.height, view.width):
            raise DimensionMismatch("reference dimensions differ from the coded view")
    step = qstep(qp)
    bw = BitWriter()
    bw.uint(view.width, 16)
    bw.uint(view.height, 16)
    bw.uint(int(qp), 8)
    bw.ue(len(refs))
    planes = [_encode_plane(bw, p, [r.planes[i] for r in refs], step)
              for i, p in enumerate(view.planes)]
    body = bw.getvalue()
    payload = (bw.nbits + _HEADER_BITS).to_bytes(4, "big") + body
    return EncodedView(poc, tl, payload), View(*planes)


def decode_view(encoded, refs: Sequence[View]) -> View:
    """Inverse of :func:`encode_view`'s reconstruction path.

    Raises :class:`MalformedPayload` on truncated or inconsistent payloads.
    """
    payload = encoded.payload if isinstance(encoded, EncodedView) else bytes(encoded)
    if len(payload) < 4:
        raise MalformedPayload("payload too short")
    nbits = int.from_bytes(payload[:4], "big") - _HEADER_BITS
    if nbits < 0 or nbits > 8 * (len(payload) - 4):
        raise MalformedPayload("payload truncated")
    br = BitReader(payload[4:], nbits)
    width, height, qp = br.uint(16), br.uint(16), br.uint(8)
    if qp > 51 or width == 0 or height == 0:
        raise MalformedPayload("invalid picture header")
    nrefs = br.ue()
    if nrefs != len(refs):
        raise MalformedPayload(f"payload expects {nrefs} references, {len(refs)} given")
    for r in refs:
        if (r.height, r.width) != (height, width):
            raise MalformedPayload("reference dimensions differ from payload")
    step = qstep(qp)
    ch = chroma_shape(height, width)
    shapes = [(height, width), ch, ch]
    planes = [_decode_plane(br, s, [r.planes[i] for r in refs], step)
              for i, s in enumerate(shapes)]
    if br.remaining:
        raise MalformedPayload("trailing bits in payload")
    return View(*planes)
