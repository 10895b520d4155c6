import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibrotac.events import Frame
from vibrotac.metrics import (MSNR_CAP_DB, Mask, entropy, iou, mask_from_gt, msnr, mse, quantize, rmse,
                              ssim)


# naive oracles ------------------------------------------------------------


def msnr_loop(img, region):
    h, w = img.shape
    vals = [float(img[i, j]) for i in range(h) for j in range(w) if region[i, j]]
    mu = sum(vals) / len(vals)
    num = sum(v * v for v in vals)
    den = sum((v - mu) ** 2 for v in vals)
    return 10 * math.log10(num / den * len(vals) / (h * w))


def entropy_loop(img, levels):
    counts = {}
    for v in img.ravel().tolist():
        b = min(max(math.floor(v * (levels - 1) + 0.5), 0), levels - 1)
        counts[b] = counts.get(b, 0) + 1
    n = img.size
    return -sum(c / n * math.log2(c / n) for c in counts.values())


def mse_loop(a, b, region):
    h, w = a.shape
    d = [(float(a[i, j]) - float(b[i, j])) ** 2 for i in range(h) for j in range(w) if region[i, j]]
    return sum(d) / len(d)


def rmse_loop(a, b):
    h, w = a.shape
    return math.sqrt(sum((float(a[i, j]) - float(b[i, j])) ** 2 for i in range(h) for j in range(w)) / (h * w))


def ssim_loop(a, b, win=8, k1=0.01, k2=0.03, L=1.0):
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    vals = []
    for i0 in range(0, a.shape[0] - win + 1, win):
        for j0 in range(0, a.shape[1] - win + 1, win):
            xs = [float(a[i, j]) for i in range(i0, i0 + win) for j in range(j0, j0 + win)]
            ys = [float(b[i, j]) for i in range(i0, i0 + win) for j in range(j0, j0 + win)]
            n = len(xs)
            mx, my = sum(xs) / n, sum(ys) / n
            vx = sum((x - mx) ** 2 for x in xs) / n
            vy = sum((y - my) ** 2 for y in ys) / n
            cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
            vals.append((2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return sum(vals) / len(vals)


def iou_loop(a, b):
    inter = union = 0
    for u, v in zip(a.ravel().tolist(), b.ravel().tolist()):
        inter += u and v
        union += u or v
    return 1.0 if union == 0 else inter / union


def dilate_loop(fg, r):
    h, w = fg.shape
    out = np.zeros_like(fg)
    for i in range(h):
        for j in range(w):
            out[i, j] = any(fg[a, b] for a in range(max(0, i - r), min(h, i + r + 1))
                            for b in range(max(0, j - r), min(w, j + r + 1)))
    return out


# msnr ---------------------------------------------------------------------


def test_msnr_golden_two_pixel_foreground():
    img = np.zeros((4, 4))
    img[1, 1], img[2, 3] = 0.8, 0.4
    region = np.zeros((4, 4), dtype=bool)
    region[1, 1] = region[2, 3] = True
    # exact: energy 4/5, spread 2/25, area 2/16
    ratio = Fraction(4, 5) / Fraction(2, 25) * Fraction(2, 16)
    assert ratio == Fraction(5, 4)
    assert msnr(img, Mask(region)) == pytest.approx(10 * math.log10(1.25), rel=1e-12)


def test_msnr_saturated_and_errors():
    img = np.full((4, 4), 0.3)
    r = msnr(img, Mask.full((4, 4)), return_flag=True)
    assert r.db == MSNR_CAP_DB and r.saturated
    with pytest.raises(ValueError):
        msnr(img, Mask(np.zeros((4, 4), dtype=bool)))
    with pytest.raises(ValueError):
        msnr(img, Mask.full((3, 4)))


def test_msnr_full_mask_is_plain_snr():
    rng = np.random.default_rng(3)
    img = rng.random((8, 8))
    snr = 10 * math.log10(np.sum(img ** 2) / np.sum((img - img.mean()) ** 2))
    assert msnr(img, Mask.full(img.shape)) == pytest.approx(snr, rel=1e-12)


def test_msnr_dark_foreground_is_area_term():
    region = np.zeros((4, 4), dtype=bool)
    region[:2, :2] = True
    assert msnr(np.zeros((4, 4)), Mask(region)) == pytest.approx(10 * math.log10(4 / 16))


@pytest.mark.parametrize("seed", range(10))
def test_msnr_matches_loop(seed):
    rng = np.random.default_rng(seed)
    img = rng.random((9, 7))
    region = rng.random((9, 7)) < 0.4
    region[0, 0] = region[0, 1] = True
    assert msnr(Frame(img, 0, 1, 1.0), Mask(region)) == pytest.approx(msnr_loop(img, region), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_msnr_invariances(seed):
    rng = np.random.default_rng(seed)
    img = rng.random((6, 6))
    region = rng.random((6, 6)) < 0.5
    region[0, :2] = True
    base = msnr(img, Mask(region))
    perm = img.copy()
    vals = perm[region]
    perm[region] = rng.permutation(vals)
    perm[~region] = rng.random(np.count_nonzero(~region))
    assert msnr(perm, Mask(region)) == pytest.approx(base, rel=1e-12, abs=1e-12)


# entropy ------------------------------------------------------------------


def test_entropy_golden_values():
    assert entropy(np.full((5, 5), 0.7)) == 0.0
    assert entropy(np.array([[0.0, 0.0], [0.5, 1.0]]), levels=4) == pytest.approx(1.5, abs=1e-15)
    uniform = (np.arange(256) / 255.0).reshape(16, 16)
    assert entropy(uniform) == pytest.approx(8.0, abs=1e-12)
    with pytest.raises(ValueError):
        entropy(uniform, levels=1)


def test_quantize_rounds_half_up():
    assert quantize(np.array([0.0, 0.5 / 255, 1.0, 1.2, -0.1])).tolist() == [0, 1, 255, 255, 0]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4, 16, 256]))
def test_entropy_bounds_permutation_and_oracle(seed, levels):
    rng = np.random.default_rng(seed)
    img = rng.random((7, 5))
    s = entropy(img, levels)
    assert 0.0 <= s <= math.log2(levels) + 1e-12
    assert entropy(rng.permutation(img.ravel()).reshape(img.shape), levels) == pytest.approx(s, abs=1e-12)
    assert s == pytest.approx(entropy_loop(img, levels), rel=1e-9, abs=1e-12)


# mse / rmse ----------------------------------------------------------------


def test_mse_examples():
    rng = np.random.default_rng(0)
    gt = rng.random((6, 6))
    region = rng.random((6, 6)) < 0.5
    region[0, 0] = True
    m = Mask(region)
    assert mse(gt, gt, m) == 0.0
    assert mse(gt + 0.1, gt, m) == pytest.approx(0.01, rel=1e-9)
    with pytest.raises(ValueError):
        mse(np.zeros((5, 6)), gt, m)


def test_rmse_examples():
    a = np.random.default_rng(1).random((5, 5))
    assert rmse(a, a) == 0.0
    assert rmse(a + 0.3, a) == pytest.approx(0.3, rel=1e-12)
    with pytest.raises(ValueError):
        rmse(a, a[:4])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mse_rmse_oracles_symmetry(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((6, 8)), rng.random((6, 8))
    region = rng.random((6, 8)) < 0.5
    region[2, 2] = True
    m = Mask(region)
    assert mse(a, b, m) == pytest.approx(mse_loop(a, b, region), rel=1e-12)
    assert mse(a, b, m) == pytest.approx(mse(b, a, m), rel=1e-12)
    assert rmse(a, b) == pytest.approx(rmse_loop(a, b), rel=1e-12)
    assert rmse(a, b) == rmse(b, a)
    assert rmse(a, b) ** 2 == pytest.approx(mse(a, b, Mask.full(a.shape)), rel=1e-12)


# ssim ---------------------------------------------------------------------


def test_ssim_identity_negation_and_size():
    rng = np.random.default_rng(5)
    a = rng.random((16, 16))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert ssim(a, 1 - a) < 1.0
    with pytest.raises(ValueError):
        ssim(a[:7, :7], a[:7, :7])


def test_ssim_fixed_pair_matches_literal_formula():
    yy, xx = np.mgrid[:16, :16]
    a = (xx + yy) / 30.0
    b = np.abs(np.sin(xx / 3.0)) * (yy / 15.0)
    assert ssim(a, b) == pytest.approx(ssim_loop(a, b), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([4, 8]))
def test_ssim_oracle_symmetry_range(seed, win):
    rng = np.random.default_rng(seed)
    a, b = rng.random((16, 20)), rng.random((16, 20))
    s = ssim(a, b, window=win)
    assert s == pytest.approx(ssim_loop(a, b, win), rel=1e-9, abs=1e-12)
    assert s == pytest.approx(ssim(b, a, window=win), rel=1e-12, abs=1e-15)
    assert -1.0 <= s <= 1.0


# iou ----------------------------------------------------------------------


def test_iou_examples():
    a = np.zeros((8, 8), dtype=bool)
    b = np.zeros((8, 8), dtype=bool)
    assert iou(a, b) == 1.0
    a[:4, :4] = True
    assert iou(a, a) == 1.0
    b[4:, 4:] = True
    assert iou(a, b) == 0.0
    c = np.zeros((8, 8), dtype=bool)
    c[:4, 2:6] = True  # half of a's 16 pixels overlap
    assert iou(a, c) == pytest.approx(1 / 3)
    assert iou(Mask(a), Mask(c)) == iou(c, a)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_iou_oracle(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((7, 7)) < 0.3, rng.random((7, 7)) < 0.3
    assert iou(a, b) == iou_loop(a, b) == iou(b, a)


# mask ---------------------------------------------------------------------


def test_mask_from_gt_examples():
    assert mask_from_gt(np.zeros((5, 5)), 0).n_fg == 0
    g = np.zeros((5, 5))
    g[0, 0] = 1
    assert mask_from_gt(g, 1).region.sum() == 4  # 3x3 clipped to the corner
    g[0, 0], g[2, 2] = 0, 1
    r = mask_from_gt(g, 1).region
    assert r.sum() == 9 and r[1:4, 1:4].all()
    with pytest.raises(ValueError):
        mask_from_gt(g, -1)


def test_mask_from_ring_matches_brute_force():
    yy, xx = np.mgrid[:24, :24]
    d = np.hypot(xx - 11.5, yy - 11.5)
    ring = ((d > 6) & (d < 7.5)).astype(float)
    got = mask_from_gt(ring, 2).region
    exp = dilate_loop(ring > 0, 2)
    np.testing.assert_array_equal(got, exp)
    assert mask_from_gt(ring, 2).n_fg == int(exp.sum())
