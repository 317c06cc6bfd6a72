import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfcodec.codec.bitstream import LfBitstream, StreamHeader
from lfcodec.codec.blockcodec import decode_view, encode_view, qstep
from lfcodec.codec.dct import ZIGZAG, dct_matrix, forward_dct, inverse_dct
from lfcodec.codec.entropy import BitReader, BitWriter, se_bits, ue_bits
from lfcodec.codec.external import external_encode, external_stream_bytes, split_stream
from lfcodec.codec.sequence import (CodecConfig, decode_sequence, drop_tl, encode_sequence,
                                    keep_set)
from lfcodec.errors import CorruptStream, MalformedPayload, ProcessFailure
from lfcodec.lightfield import AngularPos, View
from lfcodec.metrics import psnr
from lfcodec.structure import build_sequence
from lfcodec.synthetic import texture


@pytest.fixture(scope="module")
def image512():
    t = texture(512, 512, np.random.default_rng(7), channels=1)[..., 0]
    return View.from_luma(np.rint(t).astype(np.uint8))


@pytest.fixture(scope="module")
def coded_lf(small_lf_module):
    seq, graph = build_sequence(8, 8)
    stream, rec = encode_sequence(small_lf_module, seq, CodecConfig(base_qp=30), graph=graph)
    return small_lf_module, seq, graph, stream, rec


@pytest.fixture(scope="module")
def small_lf_module():
    from lfcodec.synthetic import textured_plane
    return textured_plane(8, 8, 32, 32, 1.0, seed=5)


# --- primitives -----------------------------------------------------------------

def test_qstep_values():
    assert qstep(4) == 1.0
    assert qstep(10) == 2.0
    assert qstep(34) == pytest.approx(32.0)


def test_exp_golomb_table():
    assert [ue_bits(k) for k in range(5)] == ["1", "010", "011", "00100", "00101"]
    assert [se_bits(k) for k in (0, 1, -1, 2, -2)] == ["1", "010", "011", "00100", "00101"]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["ue", "se", "u8"]), st.integers(-5000, 5000)),
                max_size=40))
def test_bit_roundtrip(items):
    bw = BitWriter()
    vals = []
    for kind, v in items:
        if kind == "ue":
            v = abs(v)
        elif kind == "u8":
            v = abs(v) % 256
        getattr(bw, kind if kind != "u8" else "uint")(*((v,) if kind != "u8" else (v, 8)))
        vals.append((kind, v))
    br = BitReader(bw.getvalue(), bw.nbits)
    for kind, v in vals:
        got = br.uint(8) if kind == "u8" else getattr(br, kind)()
        assert got == v
    assert br.remaining == 0


def test_reader_overrun():
    with pytest.raises(MalformedPayload):
        BitReader(b"\x00", 8).ue()


def test_dct_orthonormal():
    c = dct_matrix()
    np.testing.assert_allclose(c @ c.T, np.eye(8), atol=1e-12)
    x = np.random.default_rng(0).standard_normal((3, 8, 8))
    np.testing.assert_allclose(inverse_dct(forward_dct(x)), x, atol=1e-12)
    # DC of a constant block is 8 * value
    assert forward_dct(np.full((8, 8), 2.0))[0, 0] == pytest.approx(16.0)


def test_zigzag_start():
    assert list(ZIGZAG[:6]) == [0, 1, 8, 16, 9, 2]
    assert sorted(ZIGZAG) == list(range(64))


# --- single view ----------------------------------------------------------------

def test_rate_and_psnr_fall_with_qp(image512):
    bits, quality = [], []
    for qp in (10, 18, 26, 34):
        enc, rec = encode_view(image512, [], qp)
        bits.append(enc.bit_count)
        quality.append(psnr(rec, image512))
    assert all(a > b for a, b in zip(bits, bits[1:])), bits
    assert all(a > b for a, b in zip(quality, quality[1:])), quality


def test_view_closed_loop_and_determinism(small_lf_module):
    a, b = small_lf_module[0, 0], small_lf_module[0, 1]
    enc_a, rec_a = encode_view(a, [], 26)
    enc_b, rec_b = encode_view(b, [rec_a], 30, poc=1, tl=1)
    assert decode_view(enc_a, []) == rec_a
    assert decode_view(enc_b, [rec_a]) == rec_b
    assert encode_view(b, [rec_a], 30, poc=1, tl=1)[0].payload == enc_b.payload


def test_odd_size_view():
    rng = np.random.default_rng(1)
    v = View.from_luma(rng.integers(0, 256, (21, 35)).astype(np.uint8))
    enc, rec = encode_view(v, [], 20)
    assert (rec.height, rec.width) == (21, 35)
    assert decode_view(enc, []) == rec


def test_low_qp_near_lossless(small_lf_module):
    v = small_lf_module[2, 2]
    _, rec = encode_view(v, [], 0)
    assert psnr(rec, v) > 45


def test_payload_errors(small_lf_module):
    enc, rec = encode_view(small_lf_module[0, 0], [], 26)
    with pytest.raises(MalformedPayload):
        decode_view(enc.payload[: len(enc.payload) // 2], [])
    with pytest.raises(MalformedPayload):
        decode_view(enc, [rec])
    with pytest.raises(ValueError):
        encode_view(small_lf_module[0, 0], [], 52)


# --- sequences and container ----------------------------------------------------

def test_sequence_closed_loop(coded_lf):
    lf, seq, graph, stream, rec = coded_lf
    dec = decode_sequence(LfBitstream.from_bytes(stream.to_bytes()), seq, graph)
    assert dec.keys() == rec.keys() == set(range(64))
    assert all(dec[p] == rec[p] for p in dec)


def test_sequence_deterministic(coded_lf):
    lf, seq, graph, stream, _ = coded_lf
    again, _ = encode_sequence(lf, seq, CodecConfig(base_qp=30), graph=graph)
    assert again.to_bytes() == stream.to_bytes()


def test_parallel_jobs_same_bytes(coded_lf):
    lf, seq, graph, stream, _ = coded_lf
    par, _ = encode_sequence(lf, seq, CodecConfig(base_qp=30, jobs=3), graph=graph)
    assert par.to_bytes() == stream.to_bytes()


def test_bpp_accounting(coded_lf):
    lf, _, _, stream, _ = coded_lf
    bits = sum(8 * len(r.payload) for r in stream.records)
    assert stream.payload_bits <= bits
    assert stream.bpp() == pytest.approx(stream.payload_bits / (64 * 32 * 32))


def test_drop_tl4(coded_lf):
    lf, seq, graph, full, _ = coded_lf
    stream, rec = encode_sequence(lf, seq, CodecConfig(base_qp=30), rdo_callback=drop_tl(4),
                                  graph=graph)
    assert len(stream.records) == 32
    assert all(r.tl < 4 for r in stream.records)
    assert stream.bpp() < full.bpp()
    dec = decode_sequence(stream, seq, graph)
    assert all(dec[p] == rec[p] for p in dec)


def test_drop_reference_dependency_fails(coded_lf):
    lf, seq, graph, _, _ = coded_lf
    keep = [e.poc for e in seq if e.tl == 4]  # TL3 gone, TL4 still kept
    with pytest.raises(CorruptStream):
        encode_sequence(lf, seq, CodecConfig(base_qp=30), rdo_callback=keep_set(keep),
                        graph=graph)


def test_header_roundtrip():
    h = StreamHeader(8, 8, 16, "builtin", 27, 40, 24, (AngularPos(0, 0), AngularPos(7, 7)))
    h2, n = StreamHeader.unpack(h.pack())
    assert h2 == h and n == len(h.pack())


def test_container_corruption(coded_lf):
    _, _, _, stream, _ = coded_lf
    data = stream.to_bytes()
    with pytest.raises(CorruptStream):
        LfBitstream.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(CorruptStream):
        LfBitstream.from_bytes(data[:-3])
    recs = [r for r in stream.records if r.poc != 0]
    with pytest.raises(CorruptStream):
        decode_sequence(LfBitstream(stream.header, recs))


def test_file_roundtrip(tmp_path, coded_lf):
    _, _, _, stream, _ = coded_lf
    n = stream.write(tmp_path / "a.lfd")
    assert n == (tmp_path / "a.lfd").stat().st_size
    assert LfBitstream.read(tmp_path / "a.lfd").to_bytes() == stream.to_bytes()


def test_config_validation():
    with pytest.raises(ValueError):
        CodecConfig(base_qp=50)
    with pytest.raises(ValueError):
        CodecConfig(codec_id="vvc")
    assert CodecConfig(base_qp=22).qp_for(4) == 26


# --- external encoder adapter ---------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=200), st.lists(st.floats(0, 10), min_size=1, max_size=20))
def test_split_stream_concatenates(data, weights):
    pieces = split_stream(data, weights)
    assert len(pieces) == len(weights)
    assert b"".join(pieces) == data


def _stub(tmp_path, body):
    script = tmp_path / "stub.py"
    script.write_text(textwrap.dedent(body))
    return f"{sys.executable} {script} {{input_yuv}} {{output}} {{frames}}"


def test_external_stub(tmp_path, small_lf_module):
    cmd = _stub(tmp_path, """
        import sys
        src, dst, n = sys.argv[1], sys.argv[2], int(sys.argv[3])
        data = open(src, "rb").read()[: 10 * n]
        open(dst, "wb").write(data)
        for poc in range(n):
            print(f"POC {poc} TId: 0 ( I-SLICE, QP 30 ) {80} bits")
        """)
    seq, _ = build_sequence(8, 8)
    stream = external_encode(small_lf_module, seq, CodecConfig(codec_id="external", ext_cmd=cmd),
                             workdir=str(tmp_path))
    assert stream.header.codec_id == "external"
    assert len(stream.records) == 64
    assert all(len(r.payload) == 10 for r in stream.records)
    assert external_stream_bytes(stream) == b"".join(r.payload for r in stream.records)
    again = LfBitstream.from_bytes(stream.to_bytes())
    assert again.header.codec_id == "external"
    with pytest.raises(CorruptStream):
        decode_sequence(again)


def test_external_failure(tmp_path, small_lf_module):
    cmd = _stub(tmp_path, "import sys; sys.exit(3)\n")
    seq, _ = build_sequence(8, 8)
    with pytest.raises(ProcessFailure):
        external_encode(small_lf_module, seq, CodecConfig(codec_id="external", ext_cmd=cmd))
    with pytest.raises(ProcessFailure):
        external_encode(small_lf_module, seq, CodecConfig(codec_id="external"))
