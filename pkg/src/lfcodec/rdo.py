"""Encoder-side choice between coding and synthesizing each non-reference view.

Per (TL4, TL3, TL4) triple: each TL4 view is encoded unless ``J_synth < J_encode``;
the TL3 view is synthesized only if synthesis is strictly cheaper and both
TL4 views of its triple were synthesized, since an encoded TL4 view predicts
from its TL3 neighbour. Ties go to encoding.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

from .codec.blockcodec import encode_view
from .codec.sequence import CodecConfig, ordered_refs
from .errors import DomainError
from .lightfield import LightField, View
from .metrics import mse
from .structure import DependencyGraph, PseudoVideoSequence, rdo_triples

log = logging.getLogger(__name__)

ENCODE = "encode"
SYNTHESIZE = "synthesize"
DECISION_FIELDS = ("poc", "u", "v", "tl", "mode", "j_encode", "j_synth", "rate_encode_bpp")


@dataclass(frozen=True)
class RdoConfig:
    """``lam`` is used as given unless ``qp_lambda`` is set, in which case each
    candidate's multiplier follows its coding QP (see :func:`lambda_for_qp`)."""

    lam: float = 0.1
    qp_lambda: bool = False

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be non-negative")

    def lam_at(self, qp: int) -> float:
        return lambda_for_qp(qp) if self.qp_lambda else self.lam


def lambda_for_qp(qp: int, scale: float = 0.57) -> float:
    """HEVC-style multiplier for 8-bit MSE against bits per pixel."""
    return scale * 2.0 ** ((qp - 12) / 3.0)


@dataclass(frozen=True)
class RdoDecision:
    poc: int
    mode: str
    j_encode: float
    j_synth: float
    rate_encode: float = float("nan")

    @property
    def keep(self) -> bool:
        return self.mode == ENCODE


def lagrangian_cost(distortion: float, rate: float, lam: float) -> float:
    """J = D + lambda * R."""
    if distortion < 0 or rate < 0 or lam < 0:
        raise DomainError("distortion, rate and lambda must be non-negative")
    return distortion + lam * rate


def _cost(costs, poc):
    try:
        c = costs[poc]
    except KeyError:
        raise KeyError(f"no cost entry for POC {poc}") from None
    return (c.j_encode, c.j_synth) if hasattr(c, "j_encode") else (c[0], c[1])


def decide_gop(triples: Sequence[Tuple[int, int, int]],
               costs: Mapping[int, object]) -> List[RdoDecision]:
    """Decisions for each (TL4, TL3, TL4) triple, in triple order.

    ``costs[poc]`` is a ``(j_encode, j_synth)`` pair or an object with those
    attributes (and optionally ``rate_encode``).
    """
    out: List[RdoDecision] = []
    for left, mid, right in triples:
        modes = {}
        for p in (left, right):
            je, js = _cost(costs, p)
            modes[p] = ENCODE if je <= js else SYNTHESIZE
        je, js = _cost(costs, mid)
        both = modes[left] == SYNTHESIZE and modes[right] == SYNTHESIZE
        modes[mid] = SYNTHESIZE if (je > js and both) else ENCODE
        for p in (left, mid, right):
            je, js = _cost(costs, p)
            rate = getattr(costs[p], "rate_encode", float("nan"))
            out.append(RdoDecision(p, modes[p], je, js, rate))
    return out


@dataclass
class CandidateCost:
    poc: int
    j_encode: float
    j_synth: float
    mse_encode: float
    mse_synth: float
    rate_encode: float
    bits: int


def evaluate_candidates(lf: LightField, seq: PseudoVideoSequence, graph: DependencyGraph,
                        decoded: Mapping[int, View], codec: CodecConfig, synthesize,
                        config: RdoConfig = RdoConfig(), jobs: int = 1
                        ) -> Dict[int, CandidateCost]:
    """Costs of coding vs synthesizing every TL3/TL4 view.

    ``decoded`` holds the encoder-side reconstructions of the reference
    views. ``synthesize(refs, positions, q) -> View`` renders a view from the
    decoded corner views of its quadrant. Encoding a TL4 view uses the coded
    TL3 neighbour as a reference, as the real encoder would.
    """
    h, w = lf.view_shape
    npix = h * w

    def triple_costs(triple):
        local: Dict[int, View] = dict(decoded)
        res = {}
        for poc in sorted(triple, key=lambda p: (seq[p].tl, p)):
            e = seq[poc]
            refs = [local[d] for d in ordered_refs(poc, graph[poc])]
            qp = codec.qp_for(e.tl)
            enc, rec = encode_view(lf[e.pos], refs, qp, poc=poc, tl=e.tl)
            local[poc] = rec
            d_enc = mse(rec, lf[e.pos])
            rate = enc.bit_count / npix
            corners = seq.quadrant_corners(e.pos)
            syn = synthesize([decoded[seq.poc_of(c)] for c in corners], corners, e.pos)
            d_syn = mse(syn, lf[e.pos])
            lam = config.lam_at(qp)
            res[poc] = CandidateCost(poc, lagrangian_cost(d_enc, rate, lam),
                                     lagrangian_cost(d_syn, 0.0, lam),
                                     d_enc, d_syn, rate, enc.bit_count)
        return res

    triples = rdo_triples(seq)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(triple_costs, triples))
    else:
        parts = [triple_costs(t) for t in triples]
    out: Dict[int, CandidateCost] = {}
    for p in parts:
        out.update(p)
    return out


def write_decisions(path, decisions: Sequence[RdoDecision], seq: PseudoVideoSequence):
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(DECISION_FIELDS)
        for d in sorted(decisions, key=lambda d: d.poc):
            e = seq[d.poc]
            w.writerow([d.poc, e.pos.u, e.pos.v, e.tl, d.mode, repr(d.j_encode),
                        repr(d.j_synth), repr(d.rate_encode)])


def read_decisions(path) -> List[RdoDecision]:
    with Path(path).open(newline="") as f:
        return [RdoDecision(int(r["poc"]), r["mode"], float(r["j_encode"]), float(r["j_synth"]),
                            float(r["rate_encode_bpp"])) for r in csv.DictReader(f)]


def dependency_ok(decisions: Sequence[RdoDecision], triples) -> bool:
    """No encoded TL4 view next to a synthesized TL3 view."""
    mode = {d.poc: d.mode for d in decisions}
    return all(not (mode[m] == SYNTHESIZE and (mode[l] == ENCODE or mode[r] == ENCODE))
               for l, m, r in triples)
