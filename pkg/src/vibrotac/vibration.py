"""Closed-form vibration, imaging-quality, IMU and Kelvin-Voigt models.

Model time is in seconds; conversion from microsecond timestamps happens at
the data-structure boundary (:attr:`ImuSeries.seconds`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import signal

from .events import ImuSeries

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class VibrationConfig:
    """Sinusoidal excitation ``A sin(omega t + b)``.

    ``u`` scales velocity into imaging quality; it cancels in calibration.
    """

    amplitude: float
    omega: float
    phase: float = 0.0
    u: float = 1.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if not self.omega > 0:
            raise ValueError("omega must be > 0")

    @classmethod
    def from_hz(cls, amplitude: float, frequency_hz: float, phase: float = 0.0,
                u: float = 1.0) -> "VibrationConfig":
        return cls(amplitude, 2 * math.pi * frequency_hz, phase, u)

    @property
    def frequency(self) -> float:
        return self.omega / (2 * math.pi)

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega


@dataclass(frozen=True)
class ElastomerModel:
    """Kelvin-Voigt solid: ``sigma = E eps + eta d(eps)/dt``."""

    E: float
    eta: float

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("E must be > 0")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")

    @property
    def corner_omega(self) -> float:
        """Angular frequency where viscous and elastic stress are equal."""
        return math.inf if self.eta == 0 else self.E / self.eta


@dataclass(frozen=True)
class BandpassSpec:
    center: float
    relative_bandwidth: float = 0.4
    order: int = 2

    def __post_init__(self):
        if not self.center > 0:
            raise ValueError("center must be > 0")
        if not 0 < self.relative_bandwidth < 2:
            raise ValueError("relative_bandwidth must be in (0, 2)")
        if self.order < 1:
            raise ValueError("order must be >= 1")

    @property
    def band(self) -> tuple[float, float]:
        half = 0.5 * self.relative_bandwidth
        return self.center * (1 - half), self.center * (1 + half)


def displacement(cfg: VibrationConfig, t: ArrayLike) -> ArrayLike:
    return cfg.amplitude * np.sin(cfg.omega * np.asarray(t) + cfg.phase)


def velocity(cfg: VibrationConfig, t: ArrayLike) -> ArrayLike:
    return cfg.amplitude * cfg.omega * np.cos(cfg.omega * np.asarray(t) + cfg.phase)


def iq_model(cfg: VibrationConfig, t: ArrayLike) -> ArrayLike:
    """Imaging quality proportional to absolute elastomer speed."""
    return np.abs(cfg.u * velocity(cfg, t))


def iq_mean(cfg: VibrationConfig) -> float:
    """Average of :func:`iq_model` over one period, ``2|u A omega| / pi``."""
    return 2 * abs(cfg.u * cfg.amplitude * cfg.omega) / math.pi


def imu_model(cfg: VibrationConfig, t: ArrayLike, noise_sd: float = 0.0,
              rng: Optional[np.random.Generator] = None) -> ArrayLike:
    """Vertical acceleration of the vibration source, ``A w^2 sin(w t + pi)``.

    The IMU rides on the excitation, so the contact phase delay ``b`` of the
    elastomer does not appear here. ``rng`` must be supplied when
    ``noise_sd > 0``.
    """
    t = np.asarray(t, dtype=np.float64)
    a = cfg.amplitude * cfg.omega ** 2 * np.sin(cfg.omega * t + math.pi)
    if noise_sd > 0:
        if rng is None:
            raise ValueError("a random generator is required for noisy samples")
        a = a + rng.normal(0.0, noise_sd, size=np.shape(t))
    elif noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    return a


def kelvin_voigt_gain(model: ElastomerModel, omega: ArrayLike):
    """Strain amplitude per unit stress and phase lag at angular frequency ``omega``."""
    w = np.asarray(omega, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("omega must be >= 0")
    gain = 1.0 / np.hypot(model.E, model.eta * w)
    phase = np.arctan2(model.eta * w, model.E)
    if gain.ndim == 0:
        return float(gain), float(phase)
    return gain, phase


def kelvin_voigt_relative(model: ElastomerModel, omega: ArrayLike):
    """Gain normalised to the static response, ``E |G(omega)|`` in (0, 1]."""
    g, ph = kelvin_voigt_gain(model, omega)
    return g * model.E, ph


def bandpass(series: ImuSeries, spec: BandpassSpec) -> ImuSeries:
    """Zero-phase Butterworth band-pass of ``acc_z`` around ``spec.center``."""
    n = len(series)
    fs = float(series.nominal_rate)
    duration = n / fs
    if duration < 5.0 / spec.center:
        raise ValueError(f"IMU series of {duration:.4g} s is shorter than 5 periods "
                         f"of {spec.center:g} Hz")
    lo, hi = spec.band
    if hi >= fs / 2:
        raise ValueError(f"band upper edge {hi:g} Hz is above Nyquist ({fs / 2:g} Hz)")
    sos = signal.butter(spec.order, [lo, hi], btype="bandpass", fs=fs, output="sos")
    padlen = min(n - 1, int(3 * fs / spec.center))
    filtered = signal.sosfiltfilt(sos, series.acc_z, padlen=padlen)
    return series.with_acc_z(filtered)
