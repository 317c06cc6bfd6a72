"""Encoder and decoder paths over whole light fields.

Encoder: code the reference views, weigh coding against synthesis for every
TL3/TL4 view, then code the kept views. Decoder: decode what is present,
find the dropped positions from the POC gaps, synthesize them from the
quadrant corners and optionally enhance all non-reference views.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .codec.bitstream import LfBitstream
from .codec.external import external_encode
from .codec.sequence import CodecConfig, decode_sequence, drop_tl, encode_sequence, keep_set
from .enhance.qenet import QeNet
from .enhance.rvs import DEFAULT_POLICY, RvsPolicy
from .enhance.training import enhance_decoded_lf
from .errors import CorruptStream
from .lightfield import AngularPos, LightField, View
from .metrics import RdCurve, fluctuation, lf_quality
from .rdo import CandidateCost, RdoConfig, RdoDecision, decide_gop, evaluate_candidates
from .structure import build_sequence, detect_missing, rdo_triples
from .synthesis.networks import D2GanConfig, GeneratorPair, synthesize_color_view

log = logging.getLogger(__name__)

Synthesizer = Callable[[Sequence[View], Sequence[AngularPos], AngularPos], View]


def make_synthesizer(model: GeneratorPair, config: D2GanConfig = D2GanConfig()) -> Synthesizer:
    def synth(refs, positions, q):
        return synthesize_color_view(refs, positions, q, model, config)[0]
    return synth


@dataclass
class EncodeResult:
    stream: LfBitstream
    decisions: List[RdoDecision] = field(default_factory=list)
    costs: Dict[int, CandidateCost] = field(default_factory=dict)
    reconstructions: Dict[int, View] = field(default_factory=dict)

    @property
    def bpp(self) -> float:
        return self.stream.bpp()


def encode_lf(lf: LightField, codec: CodecConfig = CodecConfig(),
              synthesizer: Optional[Synthesizer] = None,
              rdo: RdoConfig = RdoConfig(), workdir=None) -> EncodeResult:
    """Encode ``lf``; without a synthesizer every view is coded."""
    seq, graph = build_sequence(lf.grid_rows, lf.grid_cols)
    if codec.codec_id == "external":
        if synthesizer is not None:
            log.warning("external codec: RDO needs closed-loop reconstructions, coding all views")
        return EncodeResult(external_encode(lf, seq, codec, workdir))
    if synthesizer is None:
        stream, rec = encode_sequence(lf, seq, codec, graph=graph)
        return EncodeResult(stream, reconstructions=rec)
    _, refs = encode_sequence(lf, seq, codec, rdo_callback=lambda e: False, graph=graph)
    costs = evaluate_candidates(lf, seq, graph, refs, codec, synthesizer, rdo, jobs=codec.jobs)
    decisions = decide_gop(rdo_triples(seq), costs)
    kept = [d.poc for d in decisions if d.keep]
    log.info("RDO keeps %d of %d non-reference views", len(kept), len(decisions))
    stream, rec = encode_sequence(lf, seq, codec, rdo_callback=keep_set(kept), graph=graph)
    return EncodeResult(stream, decisions, costs, rec)


def encode_drop_tl4(lf: LightField, codec: CodecConfig = CodecConfig()) -> EncodeResult:
    """Baseline stream without any TL4 view."""
    seq, graph = build_sequence(lf.grid_rows, lf.grid_cols)
    stream, rec = encode_sequence(lf, seq, codec, rdo_callback=drop_tl(4), graph=graph)
    return EncodeResult(stream, reconstructions=rec)


def fill_nearest(views: Dict[AngularPos, View], missing: Sequence[AngularPos], tl=None
                 ) -> Dict[AngularPos, View]:
    """Copy the nearest present view (Chebyshev, then layer, then row-major) into each gap."""
    tl = tl or {}
    views = {AngularPos(*p): v for p, v in views.items()}
    out = dict(views)
    for q in map(AngularPos._make, missing):
        src = min(views, key=lambda p: (max(abs(p.u - q.u), abs(p.v - q.v)), tl.get(p, 0),
                                        p.u, p.v))
        out[q] = views[src]
    return out


@dataclass
class DecodeResult:
    lightfield: LightField
    synthesized: List[AngularPos]
    before_enhancement: LightField
    quality_rows: List[Dict] = field(default_factory=list)


def decode_lf(stream: LfBitstream, synthesizer: Optional[Synthesizer] = None,
              qe_model: Optional[QeNet] = None, policy: RvsPolicy = DEFAULT_POLICY,
              fill: str = "synthesize", original: Optional[LightField] = None) -> DecodeResult:
    """Reconstruct a light field from ``stream``.

    Gaps are synthesized (``fill="synthesize"``) or filled with copies of the
    nearest decoded view (``fill="copy"``). Enhancement runs when a model is
    given. With ``original``, per-view enhancement rows are collected.
    """
    h = stream.header
    seq, graph = build_sequence(h.grid_rows, h.grid_cols)
    decoded = decode_sequence(stream, seq, graph)
    missing = detect_missing(decoded.keys(), seq)
    views = {seq[p].pos: v for p, v in decoded.items()}
    if missing:
        if fill == "copy":
            views = fill_nearest(views, missing, {e.pos: e.tl for e in seq})
        elif synthesizer is None:
            raise CorruptStream(f"{len(missing)} views dropped but no synthesis model given")
        else:
            for q in missing:
                corners = seq.quadrant_corners(q)
                views[q] = synthesizer([views[c] for c in corners], corners, q)
    lf = LightField(h.grid_rows, h.grid_cols, views)
    result = DecodeResult(lf, list(missing), lf)
    if qe_model is not None:
        rows: List[Dict] = []
        result.lightfield = enhance_decoded_lf(lf, seq, qe_model, policy, original, rows)
        result.quality_rows = rows
    return result


# --- RD sweeps -------------------------------------------------------------------

CONFIGURATIONS = ("proposed", "codec", "drop_tl4")


@dataclass
class SweepResult:
    """RD rows per configuration and per-view PSNR (POC order) per (configuration, qp)."""

    rows: Dict[str, List[Dict]] = field(default_factory=dict)
    per_view: Dict[Tuple[str, int], List[float]] = field(default_factory=dict)

    def curve(self, name: str, quality: str = "psnr_db") -> RdCurve:
        rows = self.rows[name]
        return RdCurve(np.array([r["rate_bpp"] for r in rows]),
                       np.array([r[quality] for r in rows]), label=name)


def run_configuration(name: str, lf: LightField, codec: CodecConfig,
                      synthesizer: Optional[Synthesizer] = None,
                      qe_model: Optional[QeNet] = None, rdo: RdoConfig = RdoConfig(),
                      policy: RvsPolicy = DEFAULT_POLICY) -> Tuple[EncodeResult, DecodeResult]:
    """Encode and decode ``lf`` under one named configuration."""
    if name == "proposed":
        enc = encode_lf(lf, codec, synthesizer, rdo)
        dec = decode_lf(enc.stream, synthesizer, qe_model, policy, original=lf)
    elif name == "codec":
        enc = encode_lf(lf, codec)
        dec = decode_lf(enc.stream)
    elif name == "drop_tl4":
        enc = encode_drop_tl4(lf, codec)
        dec = decode_lf(enc.stream, fill="copy")
    else:
        raise ValueError(f"unknown configuration {name!r}")
    return enc, dec


def rd_sweep(lf: LightField, qps: Sequence[int], synthesizer: Optional[Synthesizer] = None,
             qe_model: Optional[QeNet] = None, rdo: RdoConfig = RdoConfig(),
             configurations: Sequence[str] = CONFIGURATIONS, jobs: int = 1,
             policy: RvsPolicy = DEFAULT_POLICY) -> SweepResult:
    """Rate and light-field quality for each configuration at each base QP."""
    seq, _ = build_sequence(lf.grid_rows, lf.grid_cols)
    res = SweepResult()
    for name in configurations:
        if name == "proposed" and synthesizer is None:
            raise ValueError("the proposed configuration needs a synthesis model")
        rows = []
        for qp in qps:
            codec = CodecConfig(base_qp=qp, jobs=jobs)
            enc, dec = run_configuration(name, lf, codec, synthesizer, qe_model, rdo, policy)
            q = lf_quality(dec.lightfield, lf)
            rows.append({"config": name, "qp": qp, "rate_bpp": enc.bpp, "psnr_db": q["psnr_db"],
                         "ssim": q["ssim"], "n_dropped": len(dec.synthesized)})
            res.per_view[(name, qp)] = fluctuation(dec.lightfield, lf, seq).psnr
            log.info("%s qp %d: %.4f bpp %.2f dB", name, qp, enc.bpp, q["psnr_db"])
        res.rows[name] = rows
    return res
