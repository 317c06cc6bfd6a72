import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfcodec.errors import DimensionMismatch
from lfcodec.lightfield import LightField, View
from lfcodec.metrics import (FluctuationStats, RdCurve, bd_psnr, bd_quality, bd_rate,
                             fluctuation, lf_quality, per_view_quality, psnr, read_rd_csv, ssim,
                             write_rd_csv)


def _img(seed, shape=(24, 24), lo=0, hi=256):
    return np.random.default_rng(seed).integers(lo, hi, shape).astype(np.uint8)


# --- PSNR / SSIM --------------------------------------------------------------------

def test_psnr_closed_forms():
    a = _img(0, lo=1, hi=255)
    assert psnr(a, a) == math.inf
    assert psnr(a, a + 1) == pytest.approx(48.1308036, abs=1e-6)
    assert psnr(View.from_luma(a), View.from_luma(a + 1)) == pytest.approx(20 * math.log10(255))


def test_psnr_loop_oracle():
    a, b = _img(1, (9, 13)), _img(2, (9, 13))
    acc = 0.0
    for i in range(9):
        for j in range(13):
            acc += (float(a[i, j]) - float(b[i, j])) ** 2
    assert psnr(a, b) == pytest.approx(10 * math.log10(255 ** 2 / (acc / (9 * 13))), abs=1e-9)


def test_psnr_decreases_with_noise():
    a = np.full((16, 16), 128.0)
    sign = np.where(np.indices((16, 16)).sum(0) % 2, 1.0, -1.0)
    vals = [psnr(a, a + k * sign) for k in (1, 2, 4, 8, 16)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(DimensionMismatch):
        ssim(np.zeros((10, 10)), np.zeros((10, 10)))


def _ssim_loop(a, b):
    r = np.arange(11) - 5
    g = np.exp(-r * r / (2 * 1.5 ** 2))
    w = np.outer(g, g) / np.outer(g, g).sum()
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    a, b = a.astype(float), b.astype(float)
    vals = []
    for i in range(a.shape[0] - 10):
        for j in range(a.shape[1] - 10):
            x, y = a[i:i + 11, j:j + 11], b[i:i + 11, j:j + 11]
            mx, my = (w * x).sum(), (w * y).sum()
            vx = (w * (x - mx) ** 2).sum()
            vy = (w * (y - my) ** 2).sum()
            cxy = (w * (x - mx) * (y - my)).sum()
            vals.append((2 * mx * my + c1) * (2 * cxy + c2)
                        / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def test_ssim_window_oracle():
    a = _img(3, (17, 19))
    b = np.clip(a.astype(int) + np.random.default_rng(4).integers(-20, 21, a.shape), 0, 255)
    assert ssim(a, b) == pytest.approx(_ssim_loop(a, b), abs=1e-9)


def test_ssim_properties():
    a = _img(5, lo=0, hi=100)
    assert ssim(a, a) == pytest.approx(1.0)
    assert ssim(a, 255 - a) < 0.5
    b = _img(6)
    assert ssim(a, b) == pytest.approx(ssim(b, a))


# --- BD metrics ---------------------------------------------------------------------

ANCHOR = RdCurve(np.array([0.1, 0.2, 0.4, 0.8]), np.array([30.0, 33.0, 35.5, 37.0]))


def test_bd_identical():
    assert abs(bd_rate(ANCHOR, ANCHOR)) < 1e-6
    assert abs(bd_quality(ANCHOR, ANCHOR)) < 1e-9
    assert bd_psnr is bd_quality


def test_bd_rate_halved():
    half = RdCurve(ANCHOR.rate / 2, ANCHOR.quality)
    assert bd_rate(ANCHOR, half) == pytest.approx(-50.0, abs=0.1)
    assert bd_rate(half, ANCHOR) == pytest.approx(100.0, abs=0.1)


def test_bd_quality_shift():
    up = RdCurve(ANCHOR.rate, ANCHOR.quality + 0.7)
    assert bd_quality(ANCHOR, up) == pytest.approx(0.7, abs=1e-9)
    assert bd_rate(ANCHOR, up) < 0


def _trapezoid_gap(x1, y1, x2, y2, n=200001):
    lo, hi = max(x1.min(), x2.min()), min(x1.max(), x2.max())
    xs = np.linspace(lo, hi, n)
    f1 = np.polyval(np.polyfit(x1, y1, 3), xs)
    f2 = np.polyval(np.polyfit(x2, y2, 3), xs)
    return np.trapezoid(f2 - f1, xs) / (hi - lo) if hasattr(np, "trapezoid") \
        else np.trapz(f2 - f1, xs) / (hi - lo)


def _random_curve(rng):
    rate = np.sort(rng.uniform(0.05, 1.0, 4))
    while np.min(np.diff(rate)) < 0.02:
        rate = np.sort(rng.uniform(0.05, 1.0, 4))
    q = 25 + 4 * np.log2(rate / rate[0]) + np.cumsum(rng.uniform(0.1, 0.5, 4))
    return RdCurve(rate, q)


def test_bd_matches_trapezoid_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a, t = _random_curve(rng), _random_curve(rng)
        lo = max(a.quality.min(), t.quality.min())
        hi = min(a.quality.max(), t.quality.max())
        rlo, rhi = max(a.rate.min(), t.rate.min()), min(a.rate.max(), t.rate.max())
        if hi - lo < 0.5 or rhi <= rlo * 1.05:
            continue
        d = _trapezoid_gap(a.quality, np.log10(a.rate), t.quality, np.log10(t.rate))
        assert bd_rate(a, t) == pytest.approx(100 * (10 ** d - 1), abs=0.05)
        dq = _trapezoid_gap(np.log10(a.rate), a.quality, np.log10(t.rate), t.quality)
        assert bd_quality(a, t) == pytest.approx(dq, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.3, 3.0))
def test_bd_rate_antisymmetric_sign(scale):
    other = RdCurve(ANCHOR.rate * scale, ANCHOR.quality)
    a, b = bd_rate(ANCHOR, other), bd_rate(other, ANCHOR)
    assert a * b <= 0


def test_curve_validation():
    with pytest.raises(ValueError):
        RdCurve(np.array([0.1, 0.2, 0.3]), np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        RdCurve(np.array([0.1, 0.1, 0.2, 0.3]), np.array([1.0, 2.0, 3.0, 4.0]))
    with pytest.warns(UserWarning):
        RdCurve(np.array([0.1, 0.2, 0.3, 0.4]), np.array([1.0, 3.0, 2.0, 4.0]))
    far = RdCurve(ANCHOR.rate * 100, ANCHOR.quality + 50)
    with pytest.raises(ValueError):
        bd_rate(ANCHOR, far)


def test_curve_sorted_and_tuple_input():
    c = RdCurve(np.array([0.4, 0.1, 0.8, 0.2]), np.array([35.5, 30.0, 37.0, 33.0]))
    np.testing.assert_array_equal(c.rate, ANCHOR.rate)
    assert bd_rate(list(zip(ANCHOR.rate, ANCHOR.quality)), c) == pytest.approx(0, abs=1e-6)


def test_rd_csv_roundtrip(tmp_path):
    rows = [{"qp": qp, "rate_bpp": r, "psnr_db": q, "ssim": 0.9}
            for qp, r, q in zip((37, 32, 27, 22), ANCHOR.rate, ANCHOR.quality)]
    write_rd_csv(tmp_path / "rd.csv", rows)
    assert (tmp_path / "rd.csv").read_text().splitlines()[0] == "qp,rate_bpp,psnr_db,ssim"
    c = read_rd_csv(tmp_path / "rd.csv")
    np.testing.assert_array_equal(c.quality, ANCHOR.quality)
    assert c.label == "rd"


# --- fluctuation --------------------------------------------------------------------

def test_fluctuation_closed_forms():
    s = FluctuationStats([30.0, 40.0] * 4)
    assert (s.mean, s.std, s.min) == (35.0, 5.0, 30.0)
    s = FluctuationStats([math.inf] * 3)
    assert s.all_lossless and s.std == 0.0 and s.mean == math.inf
    s = FluctuationStats([math.inf, 30.0, 34.0])
    assert not s.all_lossless and s.mean == 32.0 and len(s) == 3


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(10, 60), min_size=1, max_size=64))
def test_fluctuation_recompute(vals):
    s = FluctuationStats(vals)
    assert s.mean == pytest.approx(sum(vals) / len(vals))
    assert s.std == pytest.approx(float(np.std(vals)), abs=1e-9)
    assert s.min == min(vals)


def test_light_field_quality(small_lf, seq8):
    seq, _ = seq8
    f = fluctuation(small_lf, small_lf, seq)
    assert f.all_lossless and len(f) == 64
    noisy = small_lf.replace({p: small_lf[p].with_luma(
        np.clip(small_lf[p].y.astype(int) + 2, 0, 255).astype(np.uint8))
        for p in small_lf.positions()})
    rows = per_view_quality(noisy, small_lf, seq)
    assert [r["poc"] for r in rows] == list(range(64))
    assert (rows[0]["u"], rows[0]["v"]) == (0, 0)
    q = lf_quality(noisy, small_lf)
    assert 40 < q["psnr_db"] < 43 and 0.9 < q["ssim"] < 1
    assert lf_quality(small_lf, small_lf)["psnr_db"] == math.inf
    with pytest.raises(DimensionMismatch):
        fluctuation(LightField(4, 4, {p: small_lf[p] for p in small_lf.positions()
                                      if p.u < 4 and p.v < 4}), small_lf)
