"""Adapter for an external video encoder binary.

The views are written in POC order as planar 8-bit 4:2:0 raw video and the
configured command template is run with the placeholders ``{input_yuv}``,
``{width}``, ``{height}``, ``{frames}``, ``{qp}`` and ``{output}``. The
encoder's output stream is opaque to us: it is cut into one record per POC so
that concatenating the records in POC order gives back the stream. Record
sizes follow the per-picture bit counts in the encoder log when it prints
them (``POC <n> ... <bits> bits``), otherwise the stream is split evenly.
"""

from __future__ import annotations

import dataclasses
import re
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Dict, List, Optional

from ..errors import ProcessFailure
from ..lightfield import LightField, view_to_yuv_bytes
from ..structure import PseudoVideoSequence
from .bitstream import LfBitstream
from .blockcodec import EncodedView
from .sequence import CodecConfig, make_header

_POC_BITS = re.compile(r"POC\s+(\d+)\b.*?(\d+)\s+bits", re.IGNORECASE)


def parse_bit_log(text: str) -> Dict[int, int]:
    out: Dict[int, int] = {}
    for line in text.splitlines():
        m = _POC_BITS.search(line)
        if m:
            out[int(m.group(1))] = int(m.group(2))
    return out


def split_stream(stream: bytes, weights: List[float]) -> List[bytes]:
    """Cut ``stream`` into len(weights) consecutive pieces sized by weight."""
    n = len(weights)
    total = float(sum(weights))
    if total <= 0:
        weights, total = [1.0] * n, float(n)
    bounds = [0]
    acc = 0.0
    for w in weights[:-1]:
        acc += w
        bounds.append(int(round(len(stream) * acc / total)))
    bounds.append(len(stream))
    return [stream[a:b] for a, b in zip(bounds, bounds[1:])]


def external_encode(lf: LightField, seq: PseudoVideoSequence, config: CodecConfig,
                    workdir: Optional[str] = None, timeout: float = 3600) -> LfBitstream:
    if not config.ext_cmd:
        raise ProcessFailure("no external encoder command configured")
    h, w = lf.view_shape
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        tmp = Path(tmp)
        raw = tmp / "input.yuv"
        out = tmp / "output.bin"
        with raw.open("wb") as f:
            for e in seq:
                f.write(view_to_yuv_bytes(lf[e.pos]))
        cmd = config.ext_cmd.format(input_yuv=shlex.quote(str(raw)), width=w, height=h,
                                    frames=len(seq), qp=config.base_qp,
                                    output=shlex.quote(str(out)))
        try:
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True, timeout=timeout)
        except (OSError, subprocess.SubprocessError) as exc:
            raise ProcessFailure(f"external encoder failed to run: {exc}") from exc
        if proc.returncode != 0:
            raise ProcessFailure(
                f"external encoder exited with {proc.returncode}: {proc.stderr.strip()[-500:]}")
        if not out.exists():
            raise ProcessFailure("external encoder produced no output stream")
        stream = out.read_bytes()
        bits = parse_bit_log(proc.stdout + "\n" + proc.stderr)
    weights = [float(bits.get(e.poc, 0)) for e in seq] if bits else [1.0] * len(seq)
    pieces = split_stream(stream, weights)
    records = [EncodedView(e.poc, e.tl, p) for e, p in zip(seq, pieces)]
    cfg = dataclasses.replace(config, codec_id="external")
    return LfBitstream(make_header(seq, (h, w), cfg), records)


def external_stream_bytes(stream: LfBitstream) -> bytes:
    """Re-assemble the opaque encoder output from an external-codec container."""
    return b"".join(r.payload for r in stream.records)
