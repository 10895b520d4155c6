"""Event and IMU data model, background filtering and frame reconstruction.

Events are stored column-wise (struct of numpy arrays) so that a stream of a
few million events can be filtered and accumulated without Python loops.
Timestamps are integer microseconds everywhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

#: Bytes per event used by :func:`data_rate` (t: 4, x and y packed: 4, p in sign).
BYTES_PER_EVENT = 8


class Polarity(enum.IntEnum):
    NEGATIVE = -1
    POSITIVE = 1


class Sensitivity(str, enum.Enum):
    LOW = "low"
    MID = "mid"
    HIGH = "high"


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: Polarity


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-ordered events of one sensor.

    ``t`` is int64 microseconds, ``x``/``y`` int32 pixel coordinates and ``p``
    int8 polarity in {-1, +1}.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    width: int
    height: int
    sensitivity: Sensitivity = Sensitivity.MID

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        x = np.asarray(self.x, dtype=np.int32)
        y = np.asarray(self.y, dtype=np.int32)
        p = np.asarray(self.p, dtype=np.int8)
        n = t.shape[0]
        if not (x.shape[0] == y.shape[0] == p.shape[0] == n):
            raise ValueError("event columns must have equal length")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("sensor size must be positive")
        if n:
            if np.any(np.diff(t) < 0):
                raise ValueError("event timestamps must be non-decreasing")
            if t[0] < 0:
                raise ValueError("event timestamps must be non-negative")
            if x.min() < 0 or x.max() >= self.width or y.min() < 0 or y.max() >= self.height:
                raise ValueError("event coordinates outside the sensor")
            if not np.all(np.abs(p) == 1):
                raise ValueError("polarity must be +1 or -1")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "sensitivity", Sensitivity(self.sensitivity))

    @classmethod
    def empty(cls, width: int, height: int, sensitivity=Sensitivity.MID) -> "EventStream":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, width, height, sensitivity)

    @classmethod
    def from_events(cls, events: Sequence[Event], width: int, height: int,
                    sensitivity=Sensitivity.MID) -> "EventStream":
        if not events:
            return cls.empty(width, height, sensitivity)
        t, x, y, p = (np.array(col) for col in zip(*events))
        return cls(t, x, y, p, width, height, sensitivity)

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def __iter__(self) -> Iterator[Event]:
        for t, x, y, p in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(t, x, y, Polarity(p))

    def select(self, index) -> "EventStream":
        """Sub-stream from a boolean mask or a slice (order is preserved)."""
        return EventStream(self.t[index], self.x[index], self.y[index], self.p[index],
                           self.width, self.height, self.sensitivity)

    def time_slice(self, t_begin: int, t_end: int) -> "EventStream":
        """Events with ``t_begin <= t < t_end``."""
        lo, hi = np.searchsorted(self.t, [t_begin, t_end], side="left")
        return self.select(slice(lo, hi))

    @property
    def pixel_index(self) -> np.ndarray:
        return self.y.astype(np.int64) * self.width + self.x

    @property
    def duration(self) -> int:
        """Span in microseconds covered by the events, end-inclusive."""
        if len(self) == 0:
            return 0
        return int(self.t[-1] - self.t[0]) + 1


@dataclass(frozen=True)
class ImuSample:
    t: int
    acc_z: float
    acc_x: float = 0.0
    acc_y: float = 0.0


@dataclass(frozen=True, eq=False)
class ImuSeries:
    """Uniformly sampled accelerometer readings (m/s^2, timestamps in us)."""

    t: np.ndarray
    acc_z: np.ndarray
    nominal_rate: float
    acc_x: Optional[np.ndarray] = None
    acc_y: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        z = np.asarray(self.acc_z, dtype=np.float64)
        if t.shape != z.shape:
            raise ValueError("timestamps and acc_z must have equal length")
        if self.nominal_rate <= 0:
            raise ValueError("nominal_rate must be positive")
        if t.size and np.any(np.diff(t) < 0):
            raise ValueError("IMU timestamps must be non-decreasing")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "acc_z", _frozen(z))
        for name in ("acc_x", "acc_y"):
            v = getattr(self, name)
            v = np.zeros_like(z) if v is None else np.asarray(v, dtype=np.float64)
            if v.shape != z.shape:
                raise ValueError(f"{name} must match acc_z")
            object.__setattr__(self, name, _frozen(v))

    def __len__(self) -> int:
        return int(self.t.shape[0])

    @property
    def samples(self) -> list[ImuSample]:
        return [ImuSample(int(t), float(z), float(x), float(y))
                for t, z, x, y in zip(self.t, self.acc_z, self.acc_x, self.acc_y)]

    @property
    def seconds(self) -> np.ndarray:
        return self.t * 1e-6

    def time_slice(self, t_begin: int, t_end: int) -> "ImuSeries":
        lo, hi = np.searchsorted(self.t, [t_begin, t_end], side="left")
        return ImuSeries(self.t[lo:hi], self.acc_z[lo:hi], self.nominal_rate,
                         self.acc_x[lo:hi], self.acc_y[lo:hi])

    def with_acc_z(self, acc_z: np.ndarray) -> "ImuSeries":
        return ImuSeries(self.t, acc_z, self.nominal_rate, self.acc_x, self.acc_y)


@dataclass(frozen=True)
class ReconstructionParams:
    """Accumulation window (us) and per-event contribution C."""

    accumulation_time: int
    contribution: float

    def __post_init__(self):
        if self.accumulation_time <= 0:
            raise ValueError("accumulation_time must be positive")
        if not self.contribution > 0:
            raise ValueError("contribution must be positive")

    @property
    def rate(self) -> float:
        return 1e6 / self.accumulation_time

    @classmethod
    def preset(cls, rate_hz: int) -> "ReconstructionParams":
        try:
            return RECONSTRUCTION_PRESETS[rate_hz]
        except KeyError:
            raise KeyError(f"no reconstruction preset for {rate_hz} Hz; "
                           f"choose from {sorted(RECONSTRUCTION_PRESETS)}") from None


# Table of accumulation time / contribution pairs keyed by nominal rate (Hz).
# 1/30 s is stored to the microsecond so that the nominal rate holds.
RECONSTRUCTION_PRESETS = {
    1000: ReconstructionParams(1_000, 1.0),
    500: ReconstructionParams(2_000, 1.0),
    200: ReconstructionParams(5_000, 0.5),
    100: ReconstructionParams(10_000, 0.25),
    30: ReconstructionParams(33_333, 0.08),
}


@dataclass(frozen=True, eq=False)
class Frame:
    pixels: np.ndarray
    t_start: int
    t_end: int
    rate: float

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise ValueError("frame pixels must be 2-D")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def t_mid(self) -> float:
        return 0.5 * (self.t_start + self.t_end)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


# ---------------------------------------------------------------------------
# background activity filter


def filter_background(stream: EventStream, neighborhood_radius: int = 1,
                      time_window: int = 2000) -> EventStream:
    """Drop events without spatio-temporal support.

    An event is kept when another event occurred within ``time_window`` us
    (either side) at a pixel within Chebyshev distance ``neighborhood_radius``
    (its own pixel included). Support is symmetric, so the filter is
    idempotent: every kept event still supports its partner in a second pass.
    """
    if neighborhood_radius < 1:
        raise ValueError("neighborhood_radius must be >= 1")
    if time_window <= 0:
        raise ValueError("time_window must be positive")
    n = len(stream)
    if n == 0:
        return stream

    w, h = stream.width, stream.height
    t = stream.t
    x = stream.x.astype(np.int64)
    y = stream.y.astype(np.int64)
    pix = y * w + x
    span = int(t[-1]) + 2 * time_window + 2

    # Events ordered by (pixel, time); stable sort keeps stream order on ties.
    order = np.argsort(pix, kind="stable")
    keys = pix[order] * span + t[order]
    sorted_pix = pix[order]
    sorted_t = t[order]

    keep = np.zeros(n, dtype=bool)
    # Same pixel: compare with the neighbours in the sorted order.
    same = np.zeros(n, dtype=bool)
    dt_next = np.diff(sorted_t)
    ok = (np.diff(sorted_pix) == 0) & (dt_next <= time_window)
    same[:-1] |= ok
    same[1:] |= ok
    keep[order] = same

    r = neighborhood_radius
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dx == 0 and dy == 0:
                continue
            nx, ny = x + dx, y + dy
            valid = (nx >= 0) & (nx < w) & (ny >= 0) & (ny < h) & ~keep
            if not valid.any():
                continue
            idx = np.flatnonzero(valid)
            q = ny[idx] * w + nx[idx]
            pos = np.searchsorted(keys, q * span + t[idx], side="left")
            hit = np.zeros(idx.shape[0], dtype=bool)
            # first event at the neighbour with t >= t_i
            after = np.minimum(pos, n - 1)
            hit |= (pos < n) & (sorted_pix[after] == q) & (sorted_t[after] - t[idx] <= time_window)
            before = pos - 1
            bsafe = np.maximum(before, 0)
            hit |= (before >= 0) & (sorted_pix[bsafe] == q) & (t[idx] - sorted_t[bsafe] <= time_window)
            keep[idx[hit]] = True
    return stream.select(keep)


# ---------------------------------------------------------------------------
# reconstruction


class FrameSequence(Sequence[Frame]):
    """Lazily materialised frames of a reconstruction.

    Frames are computed from the event stream on access; ``dense`` returns a
    block of consecutive frames as one array for vectorised metrics.
    """

    def __init__(self, stream: EventStream, params: ReconstructionParams,
                 t_begin: int, n_frames: int):
        self.stream = stream
        self.params = params
        self.t_begin = int(t_begin)
        self.n_frames = int(n_frames)
        acc = params.accumulation_time
        self.t_starts = self.t_begin + acc * np.arange(self.n_frames, dtype=np.int64)
        self._bounds = np.searchsorted(stream.t, np.append(self.t_starts, self.t_begin + acc * self.n_frames))

    def __len__(self) -> int:
        return self.n_frames

    @property
    def t_ends(self) -> np.ndarray:
        return self.t_starts + self.params.accumulation_time

    @property
    def t_mids(self) -> np.ndarray:
        return self.t_starts + 0.5 * self.params.accumulation_time

    def event_counts(self) -> np.ndarray:
        """Number of events falling in each window."""
        return np.diff(self._bounds)

    def counts(self, start: int, stop: int) -> np.ndarray:
        """Integer event count per pixel for frames ``start:stop``."""
        stop = min(stop, self.n_frames)
        m = max(stop - start, 0)
        h, w = self.stream.height, self.stream.width
        if m == 0:
            return np.zeros((0, h, w), dtype=np.int64)
        lo, hi = self._bounds[start], self._bounds[stop]
        s = self.stream
        k = (s.t[lo:hi] - self.t_begin) // self.params.accumulation_time - start
        lin = (k * h + s.y[lo:hi]) * w + s.x[lo:hi]
        return np.bincount(lin, minlength=m * h * w).reshape(m, h, w)

    def sums(self, start: int, stop: int) -> np.ndarray:
        """Unclamped accumulator ``C * count`` for frames ``start:stop``."""
        return self.counts(start, stop) * self.params.contribution

    def dense(self, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """Clamped pixel values of frames ``start:stop`` as an (m, H, W) array."""
        stop = self.n_frames if stop is None else stop
        return np.minimum(self.sums(start, stop), 1.0)

    def blocks(self, block: int = 256) -> Iterator[tuple[int, np.ndarray]]:
        for start in range(0, self.n_frames, block):
            yield start, self.dense(start, start + block)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(self.n_frames))]
        if i < 0:
            i += self.n_frames
        if not 0 <= i < self.n_frames:
            raise IndexError(i)
        t0 = int(self.t_starts[i])
        return Frame(self.dense(i, i + 1)[0], t0, t0 + self.params.accumulation_time,
                     self.params.rate)


def reconstruct(stream: EventStream, params: ReconstructionParams,
                t_begin: Optional[int] = None, t_end: Optional[int] = None) -> FrameSequence:
    """Accumulate events into contiguous, non-overlapping frames.

    Each event adds ``params.contribution`` to its pixel regardless of
    polarity; values are clamped to 1. Windows are half-open
    ``[T_k, T_k + dT)`` starting at ``t_begin`` (default: first event). The
    frame count is ``ceil((t_end - t_begin) / dT)`` where ``t_end`` defaults
    to one tick past the last event.
    """
    if not isinstance(params, ReconstructionParams):
        raise TypeError("params must be ReconstructionParams")
    if len(stream) == 0 and (t_begin is None or t_end is None):
        return FrameSequence(stream, params, t_begin or 0, 0)
    if t_begin is None:
        t_begin = int(stream.t[0])
    if t_end is None:
        t_end = int(stream.t[-1]) + 1
    if t_end < t_begin:
        raise ValueError("t_end before t_begin")
    inside = stream.time_slice(t_begin, t_end)
    n_frames = math.ceil((t_end - t_begin) / params.accumulation_time)
    return FrameSequence(inside, params, t_begin, n_frames)


# ---------------------------------------------------------------------------
# data rate


@dataclass(frozen=True)
class DataRate:
    t_start: np.ndarray
    bytes_per_s: np.ndarray

    @property
    def peak(self) -> float:
        return float(self.bytes_per_s.max()) if self.bytes_per_s.size else 0.0

    @property
    def mean(self) -> float:
        return float(self.bytes_per_s.mean()) if self.bytes_per_s.size else 0.0


def data_rate(stream: EventStream, window: int, bytes_per_event: int = BYTES_PER_EVENT,
              t_begin: Optional[int] = None, t_end: Optional[int] = None) -> DataRate:
    """Event-stream bandwidth per window of ``window`` microseconds."""
    if window <= 0:
        raise ValueError("window must be positive")
    if t_begin is None:
        t_begin = int(stream.t[0]) if len(stream) else 0
    if t_end is None:
        t_end = int(stream.t[-1]) + 1 if len(stream) else t_begin + window
    n = max(math.ceil((t_end - t_begin) / window), 1)
    inside = stream.time_slice(t_begin, t_end)
    k = (inside.t - t_begin) // window
    counts = np.bincount(k, minlength=n)[:n]
    starts = t_begin + window * np.arange(n, dtype=np.int64)
    return DataRate(starts, counts * bytes_per_event * (1e6 / window))


def frame_data_rate(width: int, height: int, rate: float, bytes_per_pixel: int = 1) -> float:
    """Bandwidth of a conventional camera streaming full frames."""
    return float(width * height * bytes_per_pixel * rate)
