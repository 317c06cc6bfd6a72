import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lfcodec.errors import DimensionMismatch
from lfcodec.lightfield import (AngularPos, LightField, View, demultiplex_array,
                                demultiplex_lenslet, extract_patches, load_lightfield,
                                multiplex_lenslet, patch_origins, rgb_to_ycbcr420,
                                save_lightfield, ycbcr420_to_rgb)


def test_demux_identity_pitch_one(rng):
    img = rng.integers(0, 256, (5, 7), dtype=np.uint8)
    lf = demultiplex_lenslet(img, 1, 1)
    assert (lf.grid_rows, lf.grid_cols) == (1, 1)
    np.testing.assert_array_equal(lf[0, 0].y, img)


def test_demux_index_image_matches_loop():
    img = np.arange(16, dtype=np.uint8).reshape(4, 4)
    lf = demultiplex_lenslet(img, 2, 2)
    np.testing.assert_array_equal(lf[0, 0].y, [[0, 2], [8, 10]])
    for u in range(2):
        for v in range(2):
            expect = [[img[x * 2 + u, y * 2 + v] for y in range(2)] for x in range(2)]
            np.testing.assert_array_equal(lf[u, v].y, expect)


def test_demux_rejects_indivisible():
    with pytest.raises(DimensionMismatch):
        demultiplex_lenslet(np.zeros((6, 4), np.uint8), 4, 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 5), st.integers(1, 5), st.data())
def test_remux_roundtrip(pu, pv, nh, nw, data):
    img = data.draw(arrays(np.uint8, (pu * nh, pv * nw)))
    np.testing.assert_array_equal(multiplex_lenslet(demultiplex_array(img, pu, pv)), img)


@pytest.mark.parametrize("rgb, ycc", [((0, 0, 0), (0, 128, 128)), ((255, 255, 255), (255, 128, 128))])
def test_colour_extremes(rgb, ycc):
    v = rgb_to_ycbcr420(np.broadcast_to(np.array(rgb, np.float64), (4, 4, 3)))
    assert (v.y[0, 0], v.cb[0, 0], v.cr[0, 0]) == ycc


def test_gray_ramp_roundtrip():
    g = np.arange(256, dtype=np.float64)
    rgb = np.repeat(np.stack([g, g, g], -1)[None], 2, axis=0)
    back = ycbcr420_to_rgb(rgb_to_ycbcr420(rgb)).astype(int)
    assert np.abs(back - rgb.astype(int)).max() <= 1


def test_view_invariants():
    v = View.from_luma(np.zeros((5, 7), np.uint8))
    assert v.cb.shape == (3, 4)
    with pytest.raises(DimensionMismatch):
        View(np.zeros((4, 4), np.uint8), np.zeros((3, 2), np.uint8), np.zeros((2, 2), np.uint8))
    with pytest.raises(ValueError):
        v.y[0, 0] = 1


def test_lightfield_requires_full_grid():
    v = View.from_luma(np.zeros((4, 4), np.uint8))
    with pytest.raises(DimensionMismatch):
        LightField(2, 2, {AngularPos(0, 0): v})


def test_patch_counts():
    assert len(extract_patches(np.zeros((60, 60)), 60, 16)) == 1
    assert patch_origins(100, 60, 16) == [0, 16, 32, 40]
    ps = extract_patches(np.zeros((100, 100)), 60, 16)
    assert len(ps) == 16
    assert {p.origin for p in ps} == {(x, y) for x in (0, 16, 32, 40) for y in (0, 16, 32, 40)}
    with pytest.raises(DimensionMismatch):
        extract_patches(np.zeros((32, 32)), 64, 16)


@settings(max_examples=40, deadline=None)
@given(st.integers(8, 50), st.integers(1, 8), st.integers(1, 12))
def test_patches_cover_every_pixel(length, size, stride):
    size = min(size, length)
    stride = min(stride, size)
    covered = np.zeros(length, bool)
    for o in patch_origins(length, size, stride):
        assert 0 <= o and o + size <= length
        covered[o:o + size] = True
    assert covered.all()


@pytest.mark.parametrize("raw", [True, False])
def test_manifest_roundtrip(tmp_path, small_lf, raw):
    path = save_lightfield(small_lf, tmp_path / "lf", raw=raw)
    meta = json.loads(path.read_text())
    assert meta["grid_rows"] == 8
    back = load_lightfield(tmp_path / "lf")
    if raw:
        assert all(back[p] == small_lf[p] for p in small_lf.positions())
    else:
        np.testing.assert_allclose(back[0, 0].y.astype(int), small_lf[0, 0].y.astype(int), atol=2)
