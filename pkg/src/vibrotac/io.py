"""Readers and writers for event, IMU, frame, calibration and CSV files.

Text formats:

* ``EVT1 <width> <height> <sensitivity>`` header, then ``t_us,x,y,p`` rows
* ``IMU1 <nominal_rate_hz>`` header, then ``t_us,acc_x,acc_y,acc_z`` rows
* binary PGM (P5, maxval 255) frames with an index CSV
* ``key = value`` calibration files that round-trip floats exactly

Every writer goes through :func:`atomic_write`, so a crash never leaves a
half-written file under the final name.
"""

from __future__ import annotations

import contextlib
import io
import os
import tempfile
import warnings
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .events import EventStream, Frame, ImuSeries, Sensitivity
from .imu_filter import CalibrationResult, GateDecisions, GateMode


class FormatError(ValueError):
    """Malformed input file."""


@contextlib.contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        kw = {} if "b" in mode else {"newline": "", "encoding": "utf-8"}
        with os.fdopen(fd, mode, **kw) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def fmt(value) -> str:
    """Nine significant digits; integers and booleans as-is."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9g}"


def write_csv(path, header: Sequence[str], columns: Sequence) -> None:
    """Columnar CSV with :func:`fmt` formatting."""
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    with atomic_write(path) as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(fmt(c[i].item()) for c in cols) + "\n")


def read_csv(path) -> dict[str, np.ndarray]:
    """Numeric CSV with a header row into float columns."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        body = fh.read()
    if not header or header == [""]:
        raise FormatError(f"{path}: empty file")
    data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2) if body.strip() else np.zeros((0, len(header)))
    if data.shape[1] != len(header):
        raise FormatError(f"{path}: expected {len(header)} columns")
    return {h: data[:, i] for i, h in enumerate(header)}


# ---------------------------------------------------------------------------
# events


_POW10 = 10 ** np.arange(19, dtype=np.int64)


def int_rows_ascii(columns) -> bytes:
    """Comma-separated decimal rows of integer columns, built without a Python loop per row."""
    cols = [np.asarray(c, dtype=np.int64) for c in columns]
    n = cols[0].shape[0]
    if n == 0:
        return b""
    neg = [c < 0 for c in cols]
    mag = [np.abs(c) for c in cols]
    ndig = [np.maximum(np.searchsorted(_POW10, m, side="right"), 1) for m in mag]
    row_len = sum(nd + ng for nd, ng in zip(ndig, neg)) + len(cols)
    ends = np.cumsum(row_len)
    size = int(ends[-1])
    buf = np.empty(size + 1, dtype=np.uint8)  # last byte is scratch for masked writes
    pos = ends - row_len
    for j, (m, nd, ng) in enumerate(zip(mag, ndig, neg)):
        buf[np.where(ng, pos, size)] = ord("-")
        end = pos + ng + nd
        q = m.copy()
        # digits right to left
        for k in range(int(nd.max())):
            buf[np.where(k < nd, end - 1 - k, size)] = (q % 10 + 48).astype(np.uint8)
            q //= 10
        buf[end] = ord(",") if j < len(cols) - 1 else ord("\n")
        pos = end + 1
    return buf[:size].tobytes()


def write_events(path, stream: EventStream, chunk: int = 1_000_000) -> None:
    with atomic_write(path, "wb") as fh:
        fh.write(f"EVT1 {stream.width} {stream.height} {Sensitivity(stream.sensitivity).value}\n".encode())
        p = np.where(stream.p > 0, 1, -1)
        for s in range(0, len(stream), chunk):
            sl = slice(s, s + chunk)
            fh.write(int_rows_ascii([stream.t[sl], stream.x[sl], stream.y[sl], p[sl]]))


def _parse_header(line: str, magic: str, n: int, path) -> list[str]:
    parts = line.split()
    if len(parts) != n + 1 or parts[0] != magic:
        raise FormatError(f"{path}: expected header '{magic}' with {n} fields, got {line.strip()!r}")
    return parts[1:]


def _read_rows(fh, ncols: int, dtype, path) -> np.ndarray:
    # optional column-name row
    mark = fh.tell()
    first = fh.readline()
    if not first[:1].isalpha():
        fh.seek(mark)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty body
            data = np.loadtxt(fh, delimiter=",", dtype=dtype, comments=None, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if data.size == 0:
        return np.zeros((0, ncols), dtype=dtype)
    if data.shape[1] != ncols:
        raise FormatError(f"{path}: expected {ncols} columns per row")
    return data


def read_events(path) -> EventStream:
    with open(path, encoding="utf-8") as fh:
        w, h, sens = _parse_header(fh.readline(), "EVT1", 3, path)
        try:
            width, height, sensitivity = int(w), int(h), Sensitivity(sens)
        except ValueError as exc:
            raise FormatError(f"{path}: bad header: {exc}") from None
        data = _read_rows(fh, 4, np.int64, path)
    if data.size and not np.isin(data[:, 3], (1, -1)).all():
        raise FormatError(f"{path}: polarity must be 1 or -1")
    try:
        return EventStream(data[:, 0], data[:, 1], data[:, 2], data[:, 3], width, height, sensitivity)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_imu(path, imu: ImuSeries) -> None:
    n = len(imu)
    zeros = np.zeros(n)
    ax = imu.acc_x if imu.acc_x is not None else zeros
    ay = imu.acc_y if imu.acc_y is not None else zeros
    with atomic_write(path) as fh:
        fh.write(f"IMU1 {imu.nominal_rate!r}\n")
        # repr keeps the float bit-exact
        fh.writelines(f"{int(t)},{float(a)!r},{float(b)!r},{float(c)!r}\n"
                      for t, a, b, c in zip(imu.t, ax, ay, imu.acc_z))


def read_imu(path) -> ImuSeries:
    with open(path, encoding="utf-8") as fh:
        (rate,) = _parse_header(fh.readline(), "IMU1", 1, path)
        try:
            rate = float(rate)
        except ValueError:
            raise FormatError(f"{path}: bad rate {rate!r}") from None
        data = _read_rows(fh, 4, np.float64, path)
    t = data[:, 0]
    if not np.all(t == np.round(t)):
        raise FormatError(f"{path}: timestamps must be integer microseconds")
    try:
        return ImuSeries(t.astype(np.int64), data[:, 3], rate, data[:, 1], data[:, 2])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# frames


def to_gray8(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(pixels, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, pixels: np.ndarray) -> None:
    """Binary graymap from values in [0, 1] (or uint8)."""
    img = pixels if pixels.dtype == np.uint8 else to_gray8(pixels)
    h, w = img.shape
    with atomic_write(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_pgm(path) -> np.ndarray:
    """Binary graymap as floats in [0, 1]."""
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255")
    data = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos + 1)
    return data.reshape(h, w).astype(np.float64) / 255.0


def write_frames(out_dir, frames: Iterable[Frame], prefix: str = "frame") -> list[Path]:
    """One PGM per frame plus ``index.csv``; returns every path written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths, starts, ends = [], [], []
    for i, f in enumerate(frames):
        p = out_dir / f"{prefix}_{i:06d}.pgm"
        write_pgm(p, f.pixels)
        paths.append(p)
        starts.append(f.t_start)
        ends.append(f.t_end)
    index = out_dir / "index.csv"
    write_csv(index, ["frame_id", "t_start_us", "t_end_us"],
              [np.arange(len(starts)), np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64)])
    return paths + [index]


def read_frames(out_dir, prefix: str = "frame") -> list[Frame]:
    out_dir = Path(out_dir)
    idx = read_csv(out_dir / "index.csv")
    frames = []
    for i, t0, t1 in zip(idx["frame_id"], idx["t_start_us"], idx["t_end_us"]):
        t0, t1 = int(t0), int(t1)
        frames.append(Frame(read_pgm(out_dir / f"{prefix}_{int(i):06d}.pgm"), t0, t1, 1e6 / (t1 - t0)))
    return frames


# ---------------------------------------------------------------------------
# calibration and decisions

_CAL_FLOATS = ("delta_t_hat", "k", "c", "imu_thresh", "iq_thresh", "r_squared", "band_low", "band_high")


def write_calibration(path, cal: CalibrationResult) -> None:
    with atomic_write(path) as fh:
        for name in _CAL_FLOATS:
            fh.write(f"{name} = {float(getattr(cal, name))!r}\n")
        fh.write(f"mode = {GateMode(cal.mode).value}\n")


def read_calibration(path) -> CalibrationResult:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{n}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            values[k] = v
    missing = [k for k in (*_CAL_FLOATS, "mode") if k not in values]
    if missing:
        raise FormatError(f"{path}: missing keys {missing}")
    try:
        kw = {k: float(values[k]) for k in _CAL_FLOATS}
        return CalibrationResult(mode=GateMode(values["mode"]), **kw)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_decisions(path, decisions: GateDecisions) -> None:
    write_csv(path, ["t_start_us", "t_end_us", "imu_value", "retained"],
              [decisions.t_start, decisions.t_end, decisions.imu_value, decisions.retained])
