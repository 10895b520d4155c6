import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibrotac.config import DEFAULTS, Config, ConfigError, load_config, resolve_config_path
from vibrotac.events import EventStream, Frame, ImuSeries, Sensitivity
from vibrotac.imu_filter import CalibrationResult, GateDecisions, GateMode
from vibrotac.io import (FormatError, atomic_write, fmt, int_rows_ascii, read_calibration, read_csv,
                         read_events, read_frames, read_imu, read_pgm, write_calibration, write_csv,
                         write_decisions, write_events, write_frames, write_imu, write_pgm)

# ---------------------------------------------------------------------------
# primitives


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-2**62, 2**62), st.integers(0, 10**6)), min_size=0, max_size=40))
def test_int_rows_match_python_formatting(rows):
    cols = [np.array([r[0] for r in rows], dtype=np.int64), np.array([r[1] for r in rows], dtype=np.int64)]
    expect = "".join(f"{a},{b}\n" for a, b in rows).encode()
    assert int_rows_ascii(cols) == expect


def test_fmt_nine_significant_digits():
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(12345678901.0) == "1.23456789e+10"
    assert fmt(7) == "7" and fmt(np.int64(-3)) == "-3"
    assert fmt(True) == "1" and fmt(np.bool_(False)) == "0"


def test_atomic_write_leaves_nothing_on_failure(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")
    with pytest.raises(RuntimeError):
        with atomic_write(target) as fh:
            fh.write("partial")
            raise RuntimeError("boom")
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_csv_round_trip(tmp_path):
    p = tmp_path / "a.csv"
    write_csv(p, ["i", "v", "b"], [np.arange(3), np.array([0.5, 1 / 3, -2.0]), np.array([True, False, True])])
    assert p.read_text().splitlines() == ["i,v,b", "0,0.5,1", "1,0.333333333,0", "2,-2,1"]
    d = read_csv(p)
    assert d["v"].tolist() == [0.5, 0.333333333, -2.0]
    with pytest.raises(ValueError):
        write_csv(p, ["a", "b"], [np.arange(2), np.arange(3)])


# ---------------------------------------------------------------------------
# events and IMU


def random_stream(seed, n=500):
    rng = np.random.default_rng(seed)
    return EventStream(np.sort(rng.integers(0, 10**9, n)), rng.integers(0, 640, n), rng.integers(0, 480, n),
                       rng.choice([-1, 1], n), 640, 480, Sensitivity.HIGH)


def test_events_round_trip(tmp_path):
    s = random_stream(1)
    p = tmp_path / "e.evt"
    write_events(p, s, chunk=97)
    assert p.read_text().splitlines()[0] == "EVT1 640 480 high"
    r = read_events(p)
    for name in ("t", "x", "y", "p"):
        np.testing.assert_array_equal(getattr(r, name), getattr(s, name))
    assert (r.width, r.height, r.sensitivity) == (640, 480, Sensitivity.HIGH)


def test_empty_events_round_trip(tmp_path):
    p = tmp_path / "e.evt"
    write_events(p, EventStream.empty(8, 8))
    assert len(read_events(p)) == 0


@pytest.mark.parametrize("body,what", [
    ("EVT2 8 8 mid\n", "header"),
    ("EVT1 8 8 mid\n0,1,1,0\n", "polarity"),
    ("EVT1 8 8 mid\n0,9,1,1\n", "bounds"),
    ("EVT1 8 8 mid\n5,1,1,1\n3,1,1,1\n", "order"),
    ("EVT1 8 8 mid\n0,1,1\n", "columns"),
    ("EVT1 8 8 loud\n", "sensitivity"),
])
def test_malformed_events_raise_format_error(tmp_path, body, what):
    p = tmp_path / f"{what}.evt"
    p.write_text(body)
    with pytest.raises(FormatError):
        read_events(p)


def test_event_file_may_carry_column_names(tmp_path):
    p = tmp_path / "e.evt"
    p.write_text("EVT1 8 8 mid\nt_us,x,y,p\n0,1,2,1\n10,3,4,-1\n")
    assert read_events(p).t.tolist() == [0, 10]


def test_imu_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    t = np.arange(-500, 100_000, 500)
    imu = ImuSeries(t, rng.normal(size=t.size) * 1e3, 2000.0, rng.normal(size=t.size), rng.normal(size=t.size))
    p = tmp_path / "imu.csv"
    write_imu(p, imu)
    r = read_imu(p)
    np.testing.assert_array_equal(r.t, imu.t)
    for name in ("acc_x", "acc_y", "acc_z"):
        np.testing.assert_array_equal(getattr(r, name), getattr(imu, name))
    assert r.nominal_rate == 2000.0
    p.write_text("IMU1 2000\n0.5,0,0,0\n")
    with pytest.raises(FormatError):
        read_imu(p)


# ---------------------------------------------------------------------------
# frames


def test_pgm_round_trip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (7, 5)).astype(np.uint8)
    p = tmp_path / "a.pgm"
    write_pgm(p, img)
    assert p.read_bytes().startswith(b"P5\n5 7\n255\n")
    np.testing.assert_array_equal(np.rint(read_pgm(p) * 255).astype(np.uint8), img)
    p.write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(FormatError):
        read_pgm(p)


def test_frames_round_trip(tmp_path):
    frames = [Frame(np.full((4, 6), i / 4), i * 1000, (i + 1) * 1000, 1000.0) for i in range(5)]
    paths = write_frames(tmp_path / "f", frames)
    assert paths[-1].name == "index.csv" and len(paths) == 6
    back = read_frames(tmp_path / "f")
    assert [(f.t_start, f.t_end, f.rate) for f in back] == [(f.t_start, f.t_end, 1000.0) for f in frames]
    for a, b in zip(frames, back):
        np.testing.assert_allclose(a.pixels, b.pixels, atol=0.5 / 255)


# ---------------------------------------------------------------------------
# calibration and decisions


@settings(max_examples=50, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False), st.floats(1e-300, 1e300),
       st.floats(allow_nan=False, allow_infinity=False), st.floats(0, 1e300), st.floats(0, 1),
       st.sampled_from(list(GateMode)))
def test_calibration_round_trip_is_bit_exact(tmp_path_factory, dt, k, c, thr, r2, mode):
    cal = CalibrationResult(dt, k, c, thr, c + k * thr, r2, mode, -thr, thr if thr else math.inf)
    p = tmp_path_factory.mktemp("cal") / "cal.txt"
    write_calibration(p, cal)
    assert read_calibration(p) == cal


def test_calibration_file_errors(tmp_path):
    p = tmp_path / "cal.txt"
    p.write_text("k = 1\n")
    with pytest.raises(FormatError, match="missing"):
        read_calibration(p)
    p.write_text("garbage\n")
    with pytest.raises(FormatError):
        read_calibration(p)


def test_decisions_csv(tmp_path):
    d = GateDecisions([0, 1000], [1000, 2000], [0.5, 2.0], [False, True])
    p = tmp_path / "d.csv"
    write_decisions(p, d)
    assert p.read_text().splitlines() == ["t_start_us,t_end_us,imu_value,retained", "0,1000,0.5,0",
                                         "1000,2000,2,1"]


# ---------------------------------------------------------------------------
# config


def test_defaults_and_overrides(tmp_path):
    cfg = load_config()
    assert cfg.get("bandpass.relative_bandwidth") == 0.4 and cfg.get("elastomer.E_pa") == 0.2e6
    ini = tmp_path / "c.ini"
    ini.write_text("[vibration]\nfrequency_hz = 50\n[reconstruction]\nbackground_filter = yes\n")
    cfg = load_config(ini, ["vibration.frequency_hz=40", "run.seed = 9"])
    assert cfg.get("vibration.frequency_hz") == 40.0  # flags beat the file
    assert cfg.get("reconstruction.background_filter") is True
    assert cfg.get("run.seed") == 9 and cfg.is_set("run.seed") and not cfg.is_set("run.nope")


@pytest.mark.parametrize("override,field", [
    ("synth.duration_s=0", "synth.duration_s"),
    ("sensor.width=abc", "sensor.width"),
    ("vibration.nope=1", "vibration.nope"),
    ("nosection.x=1", "nosection.x"),
    ("calibration.iq_thresh=high", "calibration.iq_thresh"),
    ("run.seed=-1", "run.seed"),
    ("steering.quant_bins=1", "steering.quant_bins"),
])
def test_config_errors_name_the_field(override, field):
    with pytest.raises(ConfigError) as e:
        load_config(None, [override])
    assert e.value.field == field


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("no section header\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_digest_is_stable_and_sensitive():
    a, b = load_config(), load_config()
    assert a.digest() == b.digest() and len(a.digest()) == 16
    int(a.digest(), 16)
    c = load_config(None, ["run.seed=1"])
    assert c.digest() != a.digest()


def test_ini_echo_round_trips(tmp_path):
    cfg = load_config(None, ["vibration.amplitude_m=1.5e-4", "calibration.iq_thresh=12.5"])
    p = tmp_path / "echo.ini"
    p.write_text(cfg.to_ini())
    again = load_config(p)
    assert again.to_dict() == cfg.to_dict()
    assert again.digest() == cfg.digest()


def test_every_default_section_has_values():
    assert all(DEFAULTS[s] for s in DEFAULTS)
    assert Config().to_dict() == DEFAULTS


def test_resolve_config_path():
    assert resolve_config_path("a.ini", {"VIBROTAC_CONFIG": "b.ini"}).name == "a.ini"
    assert resolve_config_path(None, {"VIBROTAC_CONFIG": "b.ini"}).name == "b.ini"
    assert resolve_config_path(None, {}) is None
