"""IMU-guided temporal filter: calibration against imaging quality and the
per-window gate.

Calibration reconstructs a short segment, measures MSNR per frame, aligns the
quality peaks with the peaks of the band-passed IMU magnitude, fits a line
``IQ = k |IMU(t - dt)| + c`` and turns a quality threshold into an IMU
threshold. The gate then keeps a reconstruction window iff the window-mean
of the aligned IMU magnitude reaches that threshold.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import signal

from .events import EventStream, Frame, FrameSequence, ImuSeries, ReconstructionParams, reconstruct
from .metrics import Mask, msnr_batch
from .vibration import BandpassSpec, bandpass

#: Length of the calibration segment taken from the start of the stream (us).
CALIBRATION_SEGMENT = 2_000_000


class CalibrationError(ValueError):
    """Raised when a calibration stage fails; ``stage`` names the step."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class CoverageError(ValueError):
    """IMU samples do not cover a requested interval."""

    def __init__(self, gap_start: float, gap_end: float):
        super().__init__(f"IMU data missing for [{gap_start:.0f}, {gap_end:.0f}) us")
        self.gap = (gap_start, gap_end)


class GateMode(str, enum.Enum):
    MAGNITUDE = "magnitude"
    SIGNED_BAND = "signed_band"


# ---------------------------------------------------------------------------
# quality series


@dataclass(frozen=True, eq=False)
class IqSeries:
    """Per-frame imaging quality at window midpoints (us)."""

    t: np.ndarray
    values: np.ndarray
    saturated: np.ndarray

    def __len__(self) -> int:
        return int(self.t.shape[0])


def iq_series(frames: Union[FrameSequence, Sequence[Frame]], mask: Mask,
              block: int = 512) -> IqSeries:
    """MSNR of every frame, stamped at the window midpoint."""
    if len(frames) == 0:
        raise ValueError("no frames")
    if isinstance(frames, FrameSequence):
        vals, sats = [], []
        for _, dense in frames.blocks(block):
            v, s = msnr_batch(dense, mask)
            vals.append(v)
            sats.append(s)
        return IqSeries(frames.t_mids.astype(np.float64), np.concatenate(vals),
                        np.concatenate(sats))
    v, s = msnr_batch(np.stack([f.pixels for f in frames]), mask)
    return IqSeries(np.array([f.t_mid for f in frames], dtype=np.float64), v, s)


# ---------------------------------------------------------------------------
# IMU sampling


def _abs_integral(t: np.ndarray, a: np.ndarray):
    """Knots and cumulative integral of ``|a|`` under linear interpolation.

    Zero crossings inside a segment become extra knots so that ``|a|`` is
    linear between knots and the trapezoid sums are exact.
    """
    a0, a1 = a[:-1], a[1:]
    cross = np.flatnonzero(a0 * a1 < 0)
    if cross.size:
        tz = t[cross] + (t[cross + 1] - t[cross]) * a0[cross] / (a0[cross] - a1[cross])
        t = np.insert(t, cross + 1, tz)
        a = np.insert(a, cross + 1, 0.0)
    y = np.abs(a)
    h = np.diff(t)
    return t, np.concatenate([[0.0], np.cumsum(0.5 * h * (y[1:] + y[:-1]))]), y


def _integral_at(t, y, cum, q):
    i = np.clip(np.searchsorted(t, q, side="right") - 1, 0, t.size - 2)
    h = t[i + 1] - t[i]
    tau = q - t[i]
    slope = (y[i + 1] - y[i]) / h
    return cum[i] + y[i] * tau + 0.5 * slope * tau * tau


def check_coverage(imu: ImuSeries, t_begin: float, t_end: float, max_gap_periods: float = 4.0) -> None:
    """Raise :class:`CoverageError` unless samples span ``[t_begin, t_end]`` without gaps.

    A gap is a spacing between consecutive samples larger than
    ``max_gap_periods`` nominal sample periods.
    """
    if len(imu) < 2:
        raise CoverageError(t_begin, t_end)
    if t_begin < imu.t[0]:
        raise CoverageError(t_begin, min(t_end, float(imu.t[0])))
    if t_end > imu.t[-1]:
        raise CoverageError(max(t_begin, float(imu.t[-1])), t_end)
    lo = max(int(np.searchsorted(imu.t, t_begin, side="right")) - 1, 0)
    hi = int(np.searchsorted(imu.t, t_end, side="left")) + 1
    seg = imu.t[lo:hi]
    limit = max_gap_periods * 1e6 / imu.nominal_rate
    big = np.flatnonzero(np.diff(seg) > limit)
    if big.size:
        i = int(big[0])
        raise CoverageError(float(seg[i]), float(seg[i + 1]))


def window_mean_abs(imu: ImuSeries, t_starts, t_ends, delay_us: float = 0.0) -> np.ndarray:
    """Mean of ``|acc_z|`` over each window shifted back by ``delay_us``.

    The IMU is linearly interpolated; the mean is the exact integral of the
    interpolated magnitude divided by the window length.
    """
    t0 = np.asarray(t_starts, dtype=np.float64) - delay_us
    t1 = np.asarray(t_ends, dtype=np.float64) - delay_us
    if t0.size == 0:
        return np.zeros(0)
    check_coverage(imu, float(t0.min()), float(t1.max()))
    t, cum, y = _abs_integral(imu.t.astype(np.float64), imu.acc_z)
    return (_integral_at(t, y, cum, t1) - _integral_at(t, y, cum, t0)) / (t1 - t0)


def window_mean_signed(imu: ImuSeries, t_starts, t_ends, delay_us: float = 0.0) -> np.ndarray:
    """Mean of the signed ``acc_z`` over each shifted window (linear interpolation)."""
    t0 = np.asarray(t_starts, dtype=np.float64) - delay_us
    t1 = np.asarray(t_ends, dtype=np.float64) - delay_us
    if t0.size == 0:
        return np.zeros(0)
    check_coverage(imu, float(t0.min()), float(t1.max()))
    t = imu.t.astype(np.float64)
    a = imu.acc_z
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (a[1:] + a[:-1]))])
    return (_integral_at(t, a, cum, t1) - _integral_at(t, a, cum, t0)) / (t1 - t0)


# ---------------------------------------------------------------------------
# peak alignment and regression


def _refined_peaks(t: np.ndarray, y: np.ndarray, distance: int = 1) -> np.ndarray:
    """Peak times with prominence >= 25% of the range, refined by a parabola."""
    span = float(np.ptp(y)) if y.size else 0.0
    if span <= 0:
        return np.zeros(0)
    idx, _ = signal.find_peaks(y, prominence=0.25 * span, distance=max(distance, 1))
    idx = idx[(idx > 0) & (idx < y.size - 1)]
    if idx.size == 0:
        return np.zeros(0)
    ym, y0, yp = y[idx - 1], y[idx], y[idx + 1]
    denom = ym - 2 * y0 + yp
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(denom < 0, 0.5 * (ym - yp) / denom, 0.0)
    off = np.clip(off, -0.5, 0.5)
    # samples may be unevenly spaced; interpolate the fractional index
    return np.interp(idx + off, np.arange(t.size), t)


def align_peaks(iq: IqSeries, imu: ImuSeries, omega: Optional[float] = None) -> float:
    """Mean delay (seconds) of quality peaks behind |IMU| peaks.

    ``imu`` is the band-passed series. Each |IMU| peak is paired with the
    nearest quality peak if it lies within half the |IMU| peak spacing.
    ``omega`` (rad/s) sets a minimum peak separation; without it the
    separation comes from the median |IMU| peak spacing.
    """
    ti = imu.t.astype(np.float64)
    mag = np.abs(imu.acc_z)
    imu_dist = 1
    if omega is not None:
        half_period_us = math.pi / omega * 1e6
        imu_dist = int(0.6 * half_period_us * imu.nominal_rate / 1e6)
    imu_peaks = _refined_peaks(ti, mag, imu_dist)
    if imu_peaks.size < 3:
        raise CalibrationError("align", "insufficient peaks in IMU series")
    spacing = float(np.median(np.diff(imu_peaks)))
    if omega is not None:
        spacing = math.pi / omega * 1e6

    vals = np.where(iq.saturated, np.nan, iq.values)
    if np.all(np.isnan(vals)):
        raise CalibrationError("align", "insufficient peaks in quality series")
    vals = np.where(np.isnan(vals), np.nanmax(vals), vals)
    frame_dt = float(np.median(np.diff(iq.t))) if len(iq) > 1 else spacing
    iq_peaks = _refined_peaks(iq.t, vals, int(0.6 * spacing / frame_dt))
    if iq_peaks.size < 3:
        raise CalibrationError("align", "insufficient peaks in quality series")

    pos = np.clip(np.searchsorted(iq_peaks, imu_peaks), 1, iq_peaks.size - 1)
    left, right = iq_peaks[pos - 1], iq_peaks[pos]
    nearest = np.where(np.abs(left - imu_peaks) <= np.abs(right - imu_peaks), left, right)
    d = nearest - imu_peaks
    ok = np.abs(d) <= 0.5 * spacing
    if np.count_nonzero(ok) < 3:
        raise CalibrationError("align", "insufficient peaks: fewer than 3 matched pairs")
    return float(d[ok].mean()) * 1e-6


class Regression(NamedTuple):
    k: float
    c: float
    r_squared: float


def regress_iq(iq_values, imu_abs) -> Regression:
    """Ordinary least squares of quality on aligned |IMU|."""
    y = np.asarray(iq_values, dtype=np.float64)
    x = np.asarray(imu_abs, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("iq and imu series must be 1-D with equal length")
    if x.size < 10:
        raise ValueError("regression needs at least 10 samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in regression input")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx <= 0:
        raise ValueError("degenerate regressor: |imu| has zero variance")
    k = float(np.sum((x - xm) * (y - ym)) / sxx)
    c = float(ym - k * xm)
    ss_res = float(np.sum((y - (k * x + c)) ** 2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return Regression(k, c, min(max(r2, 0.0), 1.0))


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class CalibrationResult:
    delta_t_hat: float
    k: float
    c: float
    imu_thresh: float
    iq_thresh: float
    r_squared: float
    mode: GateMode = GateMode.MAGNITUDE
    band_low: float = -math.inf
    band_high: float = math.inf

    def __post_init__(self):
        if self.imu_thresh < 0:
            raise ValueError("imu_thresh must be >= 0")
        object.__setattr__(self, "mode", GateMode(self.mode))

    def with_threshold(self, imu_thresh: float) -> "CalibrationResult":
        return CalibrationResult(self.delta_t_hat, self.k, self.c, imu_thresh, self.iq_thresh,
                                 self.r_squared, self.mode, self.band_low, self.band_high)


def filter_imu(imu: ImuSeries, omega: float, relative_bandwidth: float = 0.4) -> ImuSeries:
    return bandpass(imu, BandpassSpec(omega / (2 * math.pi), relative_bandwidth))


def calibrate(events: EventStream, imu: ImuSeries, params: ReconstructionParams, omega: float,
              mask: Mask, iq_thresh_mode: Union[str, float] = "mean",
              segment: int = CALIBRATION_SEGMENT, mode: GateMode = GateMode.MAGNITUDE,
              relative_bandwidth: float = 0.4) -> CalibrationResult:
    """Fit the quality/IMU relation on the first ``segment`` us of the stream.

    ``iq_thresh_mode`` is ``"mean"`` (mean quality of the segment) or an
    explicit threshold in dB.
    """
    if len(events) == 0:
        raise CalibrationError("reconstruct", "empty event stream")
    t0 = int(events.t[0])
    if int(events.t[-1]) - t0 + 1 < segment:
        raise CalibrationError("reconstruct", f"calibration needs {segment} us of events")
    check_coverage(imu, t0, t0 + segment)
    frames = reconstruct(events, params, t0, t0 + segment)
    try:
        iq = iq_series(frames, mask)
    except ValueError as exc:
        raise CalibrationError("iq_series", str(exc)) from exc
    try:
        filtered = filter_imu(imu, omega, relative_bandwidth)
    except ValueError as exc:
        raise CalibrationError("bandpass", str(exc)) from exc
    dt = align_peaks(iq, filtered, omega)
    dt_us = dt * 1e6

    # keep frames whose shifted window is covered by IMU samples
    ts, te = frames.t_starts - dt_us, frames.t_ends - dt_us
    covered = (ts >= filtered.t[0]) & (te <= filtered.t[-1])
    use = covered & ~iq.saturated
    if np.count_nonzero(use) < 10:
        raise CalibrationError("sample", "too few covered frames for regression")
    x = window_mean_abs(filtered, frames.t_starts[use], frames.t_ends[use], dt_us)
    try:
        reg = regress_iq(iq.values[use], x)
    except ValueError as exc:
        raise CalibrationError("regress", str(exc)) from exc
    if reg.k <= 0:
        raise CalibrationError("regress", "non-positive quality slope")

    if isinstance(iq_thresh_mode, str):
        if iq_thresh_mode != "mean":
            raise CalibrationError("threshold", f"unknown iq_thresh_mode {iq_thresh_mode!r}")
        iq_thresh = float(iq.values[~iq.saturated].mean())
    else:
        iq_thresh = float(iq_thresh_mode)
    imu_thresh = max((iq_thresh - reg.c) / reg.k, 0.0)
    band = (-imu_thresh, imu_thresh) if GateMode(mode) is GateMode.SIGNED_BAND else (-math.inf, math.inf)
    return CalibrationResult(dt, reg.k, reg.c, imu_thresh, iq_thresh, reg.r_squared,
                             mode, band[0], band[1])


# ---------------------------------------------------------------------------
# gate


@dataclass(frozen=True)
class GateDecision:
    frame_window: tuple[int, int]
    imu_value: float
    retained: bool


def decide(imu_value, cal: CalibrationResult):
    """Gate rule applied to window statistics (scalar or array)."""
    v = np.asarray(imu_value, dtype=np.float64)
    if cal.mode is GateMode.SIGNED_BAND:
        return (v > cal.band_high) | (v < cal.band_low)
    return np.abs(v) >= cal.imu_thresh


class GateDecisions(Sequence[GateDecision]):
    """Column-stored decisions for every reconstruction window."""

    def __init__(self, t_start, t_end, imu_value, retained):
        self.t_start = np.asarray(t_start, dtype=np.int64)
        self.t_end = np.asarray(t_end, dtype=np.int64)
        self.imu_value = np.asarray(imu_value, dtype=np.float64)
        self.retained = np.asarray(retained, dtype=bool)

    def __len__(self) -> int:
        return int(self.t_start.shape[0])

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return GateDecision((int(self.t_start[i]), int(self.t_end[i])),
                            float(self.imu_value[i]), bool(self.retained[i]))

    @property
    def retention(self) -> float:
        return float(self.retained.mean()) if len(self) else 0.0


class GatedFrames(Sequence[Frame]):
    """Retained frames of a reconstruction, materialised on access."""

    def __init__(self, frames: FrameSequence, retained: np.ndarray):
        self.source = frames
        self.index = np.flatnonzero(retained)

    def __len__(self) -> int:
        return int(self.index.shape[0])

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return self.source[int(self.index[i])]


class GateResult(NamedTuple):
    frames: GatedFrames
    decisions: GateDecisions
    all_frames: FrameSequence


class TemporalGate:
    """Window-by-window gate over a band-passed IMU series.

    ``decide_window`` is the streaming entry point; :func:`gate_stream`
    evaluates the same rule for all windows at once.
    """

    def __init__(self, filtered_imu: ImuSeries, cal: CalibrationResult):
        self.imu = filtered_imu
        self.cal = cal
        self._delay_us = cal.delta_t_hat * 1e6

    def statistic(self, t_starts, t_ends) -> np.ndarray:
        if self.cal.mode is GateMode.SIGNED_BAND:
            return window_mean_signed(self.imu, t_starts, t_ends, self._delay_us)
        return window_mean_abs(self.imu, t_starts, t_ends, self._delay_us)

    def decide_window(self, t_start: int, t_end: int) -> GateDecision:
        v = float(self.statistic([t_start], [t_end])[0])
        return GateDecision((int(t_start), int(t_end)), v, bool(decide(v, self.cal)))


def gate_stream(events: EventStream, imu: ImuSeries, cal: CalibrationResult,
                params: ReconstructionParams, omega: float, t_begin: Optional[int] = None,
                t_end: Optional[int] = None, relative_bandwidth: float = 0.4) -> GateResult:
    """Reconstruct ``events`` and keep the windows that pass the IMU gate."""
    frames = reconstruct(events, params, t_begin, t_end)
    filtered = filter_imu(imu, omega, relative_bandwidth)
    gate = TemporalGate(filtered, cal)
    stat = gate.statistic(frames.t_starts, frames.t_ends)
    keep = decide(stat, cal)
    decisions = GateDecisions(frames.t_starts, frames.t_ends, stat, keep)
    return GateResult(GatedFrames(frames, keep), decisions, frames)


# ---------------------------------------------------------------------------
# summary


@dataclass(frozen=True)
class GateSummary:
    mean_all: float
    std_all: float
    mean_retained: float
    std_retained: float
    retention: float

    @property
    def mean_increase(self) -> float:
        return (self.mean_retained - self.mean_all) / abs(self.mean_all)

    @property
    def std_decrease(self) -> float:
        return (self.std_all - self.std_retained) / self.std_all


def summarize_gate(iq: IqSeries, retained: np.ndarray) -> GateSummary:
    """Quality statistics of all frames versus retained frames."""
    v = iq.values
    r = np.asarray(retained, dtype=bool)
    if not r.any():
        return GateSummary(float(v.mean()), float(v.std()), math.nan, math.nan, 0.0)
    return GateSummary(float(v.mean()), float(v.std()), float(v[r].mean()),
                       float(v[r].std()), float(r.mean()))

