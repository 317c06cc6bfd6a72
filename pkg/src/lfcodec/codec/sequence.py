"""Pseudo-video sequence coding with the built-in block coder."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..errors import CorruptStream, MalformedPayload
from ..lightfield import LightField, View
from ..structure import DependencyGraph, PseudoVideoSequence, SeqEntry, build_sequence
from .bitstream import LfBitstream, StreamHeader
from .blockcodec import EncodedView, decode_view, encode_view

log = logging.getLogger(__name__)

KeepCallback = Callable[[SeqEntry], bool]


@dataclass(frozen=True)
class CodecConfig:
    base_qp: int = 28
    tl_qp_offsets: Tuple[int, ...] = (0, 1, 2, 3, 4)
    block_size: int = 8
    motion_search_range: int = 8
    codec_id: str = "builtin"
    ext_cmd: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if len(self.tl_qp_offsets) != 5:
            raise ValueError("tl_qp_offsets needs one entry per temporal layer (5)")
        if not 0 <= self.base_qp <= 51 or self.base_qp + max(self.tl_qp_offsets) > 51:
            raise ValueError(f"base_qp {self.base_qp} with offsets {self.tl_qp_offsets} exceeds 51")
        if self.block_size != 8 or self.motion_search_range != 8:
            raise ValueError("the built-in coder supports 8x8 blocks and a +/-8 search only")
        if self.codec_id not in ("builtin", "external"):
            raise ValueError(f"unknown codec {self.codec_id!r}")

    def qp_for(self, tl: int) -> int:
        return self.base_qp + self.tl_qp_offsets[tl]


def ordered_refs(poc: int, deps) -> List[int]:
    """Dependencies ordered nearest first, then lower POC."""
    return sorted(deps, key=lambda d: (abs(poc - d), d))


def _layers(seq: PseudoVideoSequence) -> Dict[int, List[SeqEntry]]:
    out: Dict[int, List[SeqEntry]] = {}
    for poc in seq.decode_order():
        e = seq[poc]
        out.setdefault(e.tl, []).append(e)
    return out


def make_header(seq: PseudoVideoSequence, shape, config: CodecConfig) -> StreamHeader:
    h, w = shape
    refs = tuple(seq[p].pos for p in seq.reference_pocs())
    return StreamHeader(seq.grid_rows, seq.grid_cols, seq.gop_size, config.codec_id,
                        config.base_qp, w, h, refs)


def encode_sequence(lf: LightField, seq: PseudoVideoSequence, config: CodecConfig,
                    rdo_callback: Optional[KeepCallback] = None,
                    graph: Optional[DependencyGraph] = None,
                    ) -> Tuple[LfBitstream, Dict[int, View]]:
    """Encode every kept view in decode order (lower temporal layer first).

    ``rdo_callback(entry)`` is asked for each non-reference view and returns
    True to keep it. Returns the stream and the encoder-side reconstructions
    of the kept views keyed by POC.
    """
    if graph is None:
        graph = build_sequence(seq.grid_rows, seq.grid_cols)[1]
    decoded: Dict[int, View] = {}
    records: List[EncodedView] = []

    def code(e: SeqEntry):
        deps = ordered_refs(e.poc, graph[e.poc])
        missing = [d for d in deps if d not in decoded]
        if missing:
            raise CorruptStream(f"POC {e.poc} predicts from dropped POC(s) {missing}")
        refs = [decoded[d] for d in deps]
        return encode_view(lf[e.pos], refs, config.qp_for(e.tl), poc=e.poc, tl=e.tl)

    for tl, entries in sorted(_layers(seq).items()):
        todo = [e for e in entries
                if e.is_reference or rdo_callback is None or rdo_callback(e)]
        if config.jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(config.jobs) as ex:
                results = list(ex.map(code, todo))
        else:
            results = [code(e) for e in todo]
        for e, (enc, rec) in zip(todo, results):
            records.append(enc)
            decoded[e.poc] = rec
        log.debug("TL%d: coded %d of %d views", tl, len(todo), len(entries))
    stream = LfBitstream(make_header(seq, lf.view_shape, config), records)
    return stream, decoded


def decode_sequence(stream: LfBitstream, seq: Optional[PseudoVideoSequence] = None,
                    graph: Optional[DependencyGraph] = None,
                    max_tl: int = 4) -> Dict[int, View]:
    """Decode every record (up to ``max_tl``) of a built-in stream."""
    h = stream.header
    if h.codec_id != "builtin":
        raise CorruptStream("only built-in streams can be decoded here")
    if seq is None or graph is None:
        seq, graph = build_sequence(h.grid_rows, h.grid_cols)
    recs = stream.by_poc()
    out: Dict[int, View] = {}
    for poc in seq.decode_order():
        if poc not in recs or seq[poc].tl > max_tl:
            continue
        if recs[poc].tl != seq[poc].tl:
            raise CorruptStream(f"record POC {poc} carries TL {recs[poc].tl}, expected {seq[poc].tl}")
        deps = ordered_refs(poc, graph[poc])
        missing = [d for d in deps if d not in out]
        if missing:
            raise CorruptStream(f"POC {poc} references absent POC(s) {missing}")
        try:
            view = decode_view(recs[poc], [out[d] for d in deps])
        except MalformedPayload as exc:
            raise CorruptStream(f"POC {poc}: {exc}") from exc
        if (view.height, view.width) != (h.height, h.width):
            raise CorruptStream(f"POC {poc} decodes to the wrong size")
        out[poc] = view
    return out


def keep_all(entry: SeqEntry) -> bool:
    return True


def drop_tl(*layers: int) -> KeepCallback:
    layers = set(layers)
    return lambda e: e.tl not in layers


def keep_set(pocs: Sequence[int]) -> KeepCallback:
    pocs = set(pocs)
    return lambda e: e.poc in pocs
