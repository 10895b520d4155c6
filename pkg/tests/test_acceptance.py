"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line."""

import math
import time
from collections import Counter

import numpy as np
import pytest
from scipy import integrate

from vibrotac.events import EventStream, ImuSeries, ReconstructionParams, data_rate, frame_data_rate, reconstruct
from vibrotac.imu_filter import IqSeries, align_peaks, calibrate, decide, filter_imu, iq_series
from vibrotac.locomotion import InclineState, RobotParams, peristaltic_cycle, phase_forces, potential_energy, \
    propulsion_force
from vibrotac.metrics import Mask, entropy, iou, mask_from_gt, msnr, mse, rmse, ssim
from vibrotac.synth import active_fraction, force_dataset, generate, make_scenario, named_scenario
from vibrotac.tactile import fit_force_model
from vibrotac.vibration import (ElastomerModel, VibrationConfig, displacement, imu_model, iq_mean, iq_model,
                                kelvin_voigt_gain)
from vibrotac.workflows import run_contact, run_pipeline

SEEDS = range(10)
P500 = ReconstructionParams.preset(500)


def dominant_frequency(values: np.ndarray, rate: float) -> tuple[float, float]:
    """Largest non-DC FFT peak and the bin width."""
    spec = np.abs(np.fft.rfft(values - values.mean()))
    freqs = np.fft.rfftfreq(values.size, 1.0 / rate)
    spec[0] = 0.0
    return float(freqs[np.argmax(spec)]), float(freqs[1])


# ---------------------------------------------------------------------------
# 1


def test_criterion_01_frequency_doubling(report, default_scene, default_output, default_mask):
    t0 = time.perf_counter()
    frames = reconstruct(default_output.events, P500, 0, int(default_scene.duration * 1e6))
    iq = iq_series(frames, default_mask)
    f_iq, bin_iq = dominant_frequency(iq.values, P500.rate)
    imu = default_output.imu
    f_imu, bin_imu = dominant_frequency(imu.acc_z, imu.nominal_rate)
    elapsed = time.perf_counter() - t0
    f_vib = default_scene.vibration.frequency
    # bin centres are float products; allow rounding on the one-bin bound
    ok = (abs(f_iq - 2 * f_vib) <= bin_iq * (1 + 1e-9) and abs(f_imu - f_vib) <= bin_imu * (1 + 1e-9)
          and elapsed < 30
          and math.isclose(f_vib, 30.0) and default_scene.duration == 5.0)
    report(1, "frequency doubling", ok,
           f"MSNR peak {f_iq:.3f} Hz (bin {bin_iq:.2f}), IMU peak {f_imu:.3f} Hz (bin {bin_imu:.3f}), "
           f"{elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 2 and 3


@pytest.fixture(scope="module")
def seeded_runs():
    """Default scene over ten seeds: calibration and gating at 500 Hz."""
    runs = []
    t0 = time.perf_counter()
    for seed in SEEDS:
        sc = named_scenario("default", seed)
        out = generate(sc)
        mask = mask_from_gt(out.gt.pixels)
        res = run_pipeline(out.events, out.imu, mask, sc.vibration.omega, P500, calibration_params=P500)
        runs.append(res)
    return runs, time.perf_counter() - t0


def test_criterion_02_calibration_regression(report):
    t0 = time.perf_counter()
    r2, ks = [], []
    for seed in SEEDS:
        sc = named_scenario("default", seed).replace(duration=2.5)
        out = generate(sc)
        cal = calibrate(out.events, out.imu, P500, sc.vibration.omega, mask_from_gt(out.gt.pixels))
        r2.append(cal.r_squared)
        ks.append(cal.k)
    elapsed = time.perf_counter() - t0
    ok = min(r2) >= 0.75 and min(ks) > 0 and elapsed < 60
    report(2, "calibration regression", ok,
           f"R^2 min {min(r2):.3f} mean {np.mean(r2):.3f}, k min {min(ks):.3f}, {elapsed:.1f} s")


def test_criterion_03_filter_improvement(report, seeded_runs):
    runs, elapsed = seeded_runs
    inc = [r.summary.mean_increase for r in runs]
    dec = [r.summary.std_decrease for r in runs]
    ret = [r.summary.retention for r in runs]
    ok = min(inc) >= 0.05 and min(dec) >= 0.10 and 0.5 <= min(ret) and max(ret) <= 0.95 and elapsed < 120
    report(3, "filter improvement", ok,
           f"mean MSNR +{min(inc):.1%}..+{max(inc):.1%}, std -{min(dec):.1%}..-{max(dec):.1%}, "
           f"retention {min(ret):.1%}..{max(ret):.1%}, {elapsed:.1f} s")


# ---------------------------------------------------------------------------
# 4


def test_criterion_04_gate_soundness_and_monotonicity(report, seeded_runs):
    runs, _ = seeded_runs
    res = runs[0]
    d, cal = res.gate.decisions, res.calibration
    sound = all(dec.retained == (abs(dec.imu_value) >= cal.imu_thresh) for dec in d)
    stat = d.imu_value
    grid = np.linspace(0.0, 1.05 * np.abs(stat).max(), 20)
    sets = [set(np.flatnonzero(decide(stat, cal.with_threshold(float(th))))) for th in grid]
    nested = all(b <= a for a, b in zip(sets, sets[1:]))
    strictly_shrinks = len(sets[0]) == len(stat) and len(sets[-1]) == 0
    report(4, "gate soundness and monotonicity", sound and nested and strictly_shrinks,
           f"{len(d)} windows checked, 20 thresholds nested ({len(sets[0])} -> {len(sets[-1])} retained)")


# ---------------------------------------------------------------------------
# 5


def test_criterion_05_reconstruction_conservation(report):
    rng = np.random.default_rng(5)
    failures = 0
    for trial in range(100):
        w, h = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        n = int(rng.integers(0, 800))
        t = np.sort(rng.integers(0, 60_000, n))
        s = EventStream(t, rng.integers(0, w, n), rng.integers(0, h, n), rng.choice([-1, 1], n), w, h)
        rate = int(rng.choice([1000, 500, 200, 100, 30]))
        params = ReconstructionParams.preset(rate)
        t_begin = int(rng.integers(-3000, 3000))
        t_end = 60_000 + int(rng.integers(0, 3000))
        frames = reconstruct(s, params, t_begin, t_end)
        # naive oracle: one pass over the events
        acc = params.accumulation_time
        per_window = Counter()
        per_pixel = Counter()
        covered = 0
        for ti, xi, yi in zip(s.t.tolist(), s.x.tolist(), s.y.tolist()):
            if t_begin <= ti < t_end:
                k = (ti - t_begin) // acc
                per_window[k] += 1
                per_pixel[(k, yi, xi)] += 1
                covered += 1
        counts = frames.counts(0, len(frames))
        expect = np.zeros_like(counts)
        for (k, yi, xi), c in per_pixel.items():
            expect[k, yi, xi] = c
        sums = frames.sums(0, len(frames))
        ok = (np.array_equal(counts, expect)
              and np.array_equal(sums, params.contribution * expect)
              and np.array_equal(frames.event_counts(), [per_window[k] for k in range(len(frames))])
              and int(frames.event_counts().sum()) == covered
              and int(counts.sum()) == covered)
        failures += not ok
    report(5, "reconstruction conservation", failures == 0,
           f"100 random streams, {failures} mismatches against the per-event oracle")


# ---------------------------------------------------------------------------
# 6


def naive_msnr(img, mask):
    fg = [img[i][j] for i in range(len(img)) for j in range(len(img[0])) if mask[i][j]]
    mu = math.fsum(fg) / len(fg)
    energy = math.fsum(v * v for v in fg)
    spread = math.fsum((v - mu) ** 2 for v in fg)
    return 10 * math.log10(energy / spread * len(fg) / (len(img) * len(img[0])))


def naive_mse(img, gt, mask):
    d = [(img[i][j] - gt[i][j]) ** 2 for i in range(len(img)) for j in range(len(img[0])) if mask[i][j]]
    return math.fsum(d) / len(d)


def naive_rmse(a, b):
    d = [(a[i][j] - b[i][j]) ** 2 for i in range(len(a)) for j in range(len(a[0]))]
    return math.sqrt(math.fsum(d) / len(d))


def naive_entropy(img, levels=256):
    hist = Counter()
    for row in img:
        for v in row:
            hist[min(max(math.floor(v * (levels - 1) + 0.5), 0), levels - 1)] += 1
    n = sum(hist.values())
    return -math.fsum(c / n * math.log2(c / n) for c in hist.values())


def naive_ssim(a, b, win=8, c1=1e-4, c2=9e-4):
    vals = []
    for ti in range(len(a) // win):
        for tj in range(len(a[0]) // win):
            xs = [a[ti * win + i][tj * win + j] for i in range(win) for j in range(win)]
            ys = [b[ti * win + i][tj * win + j] for i in range(win) for j in range(win)]
            n = len(xs)
            mx, my = math.fsum(xs) / n, math.fsum(ys) / n
            vx = math.fsum((x - mx) ** 2 for x in xs) / n
            vy = math.fsum((y - my) ** 2 for y in ys) / n
            cov = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
            vals.append((2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return math.fsum(vals) / len(vals)


def naive_iou(a, b):
    inter = union = 0
    for ra, rb in zip(a, b):
        for u, v in zip(ra, rb):
            inter += u and v
            union += u or v
    return 1.0 if union == 0 else inter / union


def test_criterion_06_metric_oracles(report):
    rng = np.random.default_rng(6)
    worst = 0.0

    def rel(a, b):
        return abs(a - b) / max(abs(b), 1e-300)

    for _ in range(50):
        h, w = int(rng.integers(8, 25)), int(rng.integers(8, 25))
        img = rng.random((h, w))
        img[rng.random((h, w)) < 0.3] = 0.0
        gt = (rng.random((h, w)) < 0.4).astype(float)
        mask = rng.random((h, w)) < 0.5
        mask[0, 0] = mask[0, 1] = True
        img[0, 0], img[0, 1] = 0.2, 0.7  # non-degenerate foreground
        a, g, m = img.tolist(), gt.tolist(), mask.tolist()
        pairs = [(msnr(img, Mask(mask)), naive_msnr(a, m)), (mse(img, gt, Mask(mask)), naive_mse(a, g, m)),
                 (rmse(img, gt), naive_rmse(a, g)), (entropy(img), naive_entropy(a)),
                 (ssim(img, gt), naive_ssim(a, g))]
        worst = max(worst, *(rel(x, y) for x, y in pairs))
        pa, pb = (rng.random((h, w)) < 0.3), (rng.random((h, w)) < 0.3)
        worst = max(worst, rel(iou(pa, pb), naive_iou(pa.tolist(), pb.tolist())))
    grey = np.arange(256.0).reshape(16, 16) / 255.0
    edge_cases = (entropy(np.full((8, 8), 0.3)) == 0.0 and entropy(grey) == 8.0
                  and 0.0 <= entropy(np.random.default_rng(1).random((32, 32))) <= 8.0
                  and iou(np.zeros((4, 4), bool), np.zeros((4, 4), bool)) == 1.0
                  and iou(np.eye(4, dtype=bool), ~np.eye(4, dtype=bool)) == 0.0
                  and iou(np.eye(4, dtype=bool), np.eye(4, dtype=bool)) == 1.0)
    report(6, "metric oracles", worst <= 1e-9 and edge_cases,
           f"50 instances, worst relative difference {worst:.2e}; entropy and IoU edge cases exact")


# ---------------------------------------------------------------------------
# 7


def test_criterion_07_vibration_analytics(report):
    rng = np.random.default_rng(7)
    worst_fd = worst_mean = worst_imu = 0.0
    for _ in range(50):
        cfg = VibrationConfig(float(rng.uniform(1e-5, 5e-4)), float(rng.uniform(2 * math.pi * 5, 2 * math.pi * 200)),
                              float(rng.uniform(-math.pi, math.pi)), float(rng.uniform(0.1, 10)))
        h = 1e-4 / cfg.omega
        for t in rng.uniform(0, 1, 5):
            fd = (-displacement(cfg, t + 2 * h) + 8 * displacement(cfg, t + h)
                  - 8 * displacement(cfg, t - h) + displacement(cfg, t - 2 * h)) / (12 * h)
            scale = abs(cfg.u) * cfg.amplitude * cfg.omega
            worst_fd = max(worst_fd, abs(iq_model(cfg, t) - abs(cfg.u * fd)) / scale)
        zeros = [((k + 0.5) * math.pi - cfg.phase) / cfg.omega for k in range(-2, 4)]
        T = cfg.period
        mean, _ = integrate.quad(lambda s: float(iq_model(cfg, s)), 0.0, T,
                                 points=[z for z in zeros if 0 < z < T], epsabs=0, epsrel=1e-13, limit=200)
        worst_mean = max(worst_mean, abs(mean / T - iq_mean(cfg)) / iq_mean(cfg))
        base = VibrationConfig(cfg.amplitude, cfg.omega)
        hh = 1e-3 / cfg.omega
        for t in rng.uniform(0, 1, 5):
            d2 = (-displacement(base, t + 2 * hh) + 16 * displacement(base, t + hh) - 30 * displacement(base, t)
                  + 16 * displacement(base, t - hh) - displacement(base, t - 2 * hh)) / (12 * hh * hh)
            worst_imu = max(worst_imu, abs(imu_model(base, t) - d2) / (cfg.amplitude * cfg.omega ** 2))
    em = ElastomerModel(0.2e6, 0.2e6 / (2 * math.pi * 50))
    w = np.linspace(0, 2 * math.pi * 400, 400)
    gain, _ = kelvin_voigt_gain(em, w)
    gain_ok = (np.allclose(gain, [1 / math.sqrt(em.E ** 2 + em.eta ** 2 * x ** 2) for x in w], rtol=1e-12, atol=0)
               and np.all(np.diff(gain) < 0))
    ok = worst_fd <= 1e-6 and worst_mean <= 1e-9 and worst_imu <= 1e-6 and gain_ok
    report(7, "vibration analytics", ok,
           f"|f'| vs FD {worst_fd:.1e}, period mean {worst_mean:.1e}, IMU vs d2x/dt2 {worst_imu:.1e}, "
           f"Kelvin-Voigt gain formula and monotone decrease {'hold' if gain_ok else 'fail'}")


# ---------------------------------------------------------------------------
# 8


def test_criterion_08_peak_alignment(report):
    vib = VibrationConfig.from_hz(200e-6, 15.0)
    quality = VibrationConfig(vib.amplitude, vib.omega, math.pi / 2)  # |quality| peaks on |IMU| peaks
    rate = 2000.0
    t_imu = np.round(np.arange(int(2.0 * rate)) * 1e6 / rate).astype(np.int64)
    t_mid = np.arange(0, 2_000_000, 1000) + 500.0
    rng = np.random.default_rng(8)
    errs = {}
    for noise in (0.0, 0.5):
        for d_ms in (-10, -3, 0, 3, 10):
            d = d_ms * 1e-3
            imu = ImuSeries(t_imu, imu_model(vib, t_imu * 1e-6, noise, rng if noise else None), rate)
            q = iq_model(quality, t_mid * 1e-6 - d)
            if noise:
                q = q + rng.normal(0, 0.02 * q.max(), q.size)
                imu = filter_imu(imu, vib.omega)
            est = align_peaks(IqSeries(t_mid, q, np.zeros(q.size, bool)), imu, vib.omega)
            errs[(noise, d_ms)] = abs(est - d) * rate  # in IMU sample periods
    clean = max(v for (n, _), v in errs.items() if n == 0)
    noisy = max(v for (n, _), v in errs.items() if n > 0)
    report(8, "peak alignment", clean <= 1 and noisy <= 2,
           f"worst error {clean:.2g} sample periods noiseless, {noisy:.2g} at default noise")


# ---------------------------------------------------------------------------
# 9


def characterisation_msnr(amplitude_um, frequency_hz, hardness):
    sc = make_scenario(amplitude_um, frequency_hz, "mid", hardness, duration=1.0)
    out = generate(sc)
    frames = reconstruct(out.events, ReconstructionParams.preset(1000), 0, 1_000_000)
    iq = iq_series(frames, mask_from_gt(out.gt.pixels))
    return float(iq.values[~iq.saturated].mean())


def test_criterion_09_characterisation_trends(report):
    t0 = time.perf_counter()
    freqs = (20, 30, 50, 100)
    table = {h: [characterisation_msnr(200, f, h) for f in freqs] for h in ("10A", "20A", "40A")}
    low_amp = characterisation_msnr(50, 50, "20A")
    elapsed = time.perf_counter() - t0
    m20 = dict(zip(freqs, table["20A"]))
    peaks = [freqs[int(np.argmax(table[h]))] for h in ("10A", "20A", "40A")]
    ok = (m20[50] > low_amp and m20[50] > m20[20] and m20[50] > m20[100]
          and peaks == sorted(peaks) and elapsed < 300)
    report(9, "characterisation trends", ok,
           f"20A at 50 Hz: 200 um {m20[50]:.2f} dB vs 50 um {low_amp:.2f} dB; "
           f"20/50/100 Hz {m20[20]:.2f}/{m20[50]:.2f}/{m20[100]:.2f} dB; peak Hz for 10A/20A/40A {peaks}; "
           f"{elapsed:.0f} s")


# ---------------------------------------------------------------------------
# 10


def test_criterion_10_contact_estimation(report):
    parts, ok = [], True
    for name in ("contact-rectangle", "contact-circle"):
        sc = named_scenario(name)
        out = generate(sc)
        run = run_contact(out.events, out.imu, mask_from_gt(out.gt.pixels), out.contact.pixels,
                          sc.vibration.omega, ReconstructionParams.preset(100))
        g_iou, g_rmse, _ = run.mean(gated=True)
        u_iou, _, _ = run.mean(gated=False)
        ok &= g_iou >= 0.8 and g_rmse <= 0.10 and g_iou > u_iou
        parts.append(f"{name.split('-')[1]} IoU {g_iou:.3f} RMSE {g_rmse:.3f} (ungated IoU {u_iou:.3f})")
    report(10, "contact estimation", ok, "; ".join(parts))


# ---------------------------------------------------------------------------
# 11


def test_criterion_11_force_pipeline(report):
    ds = force_dataset(n_segments=36, noise_fraction=0.05)
    model = fit_force_model(ds.features, ds.forces)
    fx, fy = model.loo_fx, model.loo_fy
    ok = (len(np.unique(ds.segment)) == 36 and fx.r_squared >= 0.95 and fy.r_squared >= 0.95
          and fx.mae <= 0.15 and fy.mae <= 0.15)
    report(11, "force pipeline", ok,
           f"LOO R^2 {fx.r_squared:.3f}/{fy.r_squared:.3f}, MAE {fx.mae:.3f}/{fy.mae:.3f} force units")


# ---------------------------------------------------------------------------
# 12


def test_criterion_12_locomotion_algebra(report):
    rng = np.random.default_rng(12)
    worst_ulps = worst_grad = 0.0
    order_ok, moving = True, 0
    for _ in range(1000):
        p = RobotParams(float(rng.uniform(0.005, 0.1)), float(rng.uniform(0.1, 10)), 9.81,
                        float(rng.uniform(0, 20)), float(rng.choice([0.0, rng.uniform(0.01, 20)])))
        s = InclineState(float(rng.uniform(-math.pi / 2, math.pi / 2)))
        ext, ret = phase_forces(p, s)
        # the identity is exact in real arithmetic; the two float sums each round once
        scale = max(abs(ext), abs(ret), 2 * p.F_p, abs(propulsion_force(p, s)), p.mu_eff)
        worst_ulps = max(worst_ulps, abs((ext - ret) - 2 * p.F_p) / math.ulp(scale))
        h = 1e-3
        fd = (potential_energy(p, s, 0.5 + h) - potential_energy(p, s, 0.5 - h)) / (2 * h)
        worst_grad = max(worst_grad, abs(fd - propulsion_force(p, s)) / max(1.0, p.m * p.g))
        cyc = peristaltic_cycle(p, s, float(rng.uniform(1e-3, 0.05)), float(rng.uniform(0.2, 3)))
        if p.F_p > 0 and cyc.net > 0:
            moving += 1
            order_ok &= cyc.net > cyc.baseline
    ok = worst_ulps <= 4 and worst_grad <= 1e-9 and order_ok and moving > 0
    report(12, "locomotion algebra", ok,
           f"F_ext - F_ret - 2F_p within {worst_ulps:.0f} ulp over 1000 points, dU/dl error {worst_grad:.1e}, "
           f"pushrod beats baseline in {'all' if order_ok else 'not all'} {moving} moving cases")


# ---------------------------------------------------------------------------
# 13


def test_criterion_13_data_rate(report):
    sc = named_scenario("sparse")
    out = generate(sc)
    dr = data_rate(out.events, 100_000)
    frame = frame_data_rate(sc.sensor.width, sc.sensor.height, 120.0)
    frac = active_fraction(sc)
    ok = frac < 0.01 and dr.peak < 0.10 * frame
    report(13, "data rate", ok,
           f"active pixels {frac:.2%}, peak event stream {dr.peak:.3g} B/s = {dr.peak / frame:.1%} "
           f"of {frame:.3g} B/s at 120 Hz frames")


# ---------------------------------------------------------------------------
# 14


def test_criterion_14_throughput(report, default_scene, default_output, default_mask):
    rates = []
    for _ in range(3):
        res = run_pipeline(default_output.events, default_output.imu, default_mask, default_scene.vibration.omega,
                           ReconstructionParams.preset(1000), gt=default_output.gt.pixels,
                           calibration_params=P500)
        rates.append(res.events_per_second)
    best = max(rates)
    report(14, "throughput", best >= 1e6,
           f"{len(default_output.events)} events, best of 3 runs {best:.3g} events/s "
           f"(calibration, reconstruction, gating and metrics at 1000 Hz)")
