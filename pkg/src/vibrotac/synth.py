"""Synthetic vibrating-elastomer scenes: events, IMU and ground truth.

Forward model
-------------
Each scene has a static contrast map ``c(x, y)`` in [0, 1] rendered from the
texture edges: 1 on edge pixels, 0 on the contact (raised) side and a Gaussian
tail of width ``blur_sigma`` on the outward side. The contact pressure is
modulated by the vibration through the Kelvin-Voigt elastomer::

    s(t) = (A / A_ref) * |G_rel(w)| * |H_pix(w)| * sin(w t + b - phi(w))
    g(t) = max(0, preload + s(t))
    I(x, y, t) = base * (1 + K * c(x, y) * g(t))

``G_rel`` is the Kelvin-Voigt response normalised to its static value and
``H_pix`` a first-order low-pass standing for the photoreceptor bandwidth of
the pixels; ``phi`` is the sum of both phase lags. The product of the two
low-passes with the rate of level crossings gives an event rate that peaks
near ``sqrt(f_elastomer * f_pixel)``, so stiffer elastomers peak higher.

Pixels behave as ideal log-intensity change detectors: an event fires each
time ``log I`` moves one threshold away from the pixel's reference level,
which then steps by one threshold. Because ``g`` is a single scalar signal,
level crossings are solved in closed form per monotone half-cycle for all
pixels at once.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .events import EventStream, ImuSeries, Sensitivity
from .metrics import GroundTruthImage, GtSource
from .tactile import EdgeParams, ForceEstimate, track_tip
from .vibration import ElastomerModel, VibrationConfig, imu_model, kelvin_voigt_relative

# ---------------------------------------------------------------------------
# textures


def edges_of(height_field: np.ndarray) -> np.ndarray:
    """Raised side of every height step (pixel higher than a 4-neighbour)."""
    h = np.asarray(height_field, dtype=np.float64)
    padded = np.pad(h, 1, mode="edge")
    centre = padded[1:-1, 1:-1]
    lower = np.zeros(h.shape, dtype=bool)
    for sl in ((slice(None, -2), slice(1, -1)), (slice(2, None), slice(1, -1)),
               (slice(1, -1), slice(None, -2)), (slice(1, -1), slice(2, None))):
        lower |= padded[sl] < centre
    return lower


@dataclass(frozen=True, eq=False)
class TextureMap:
    height_field: np.ndarray
    name: str = "texture"

    def __post_init__(self):
        h = np.asarray(self.height_field, dtype=np.float64)
        if h.ndim != 2 or np.any(h < 0):
            raise ValueError("height field must be a non-negative 2-D array")
        object.__setattr__(self, "height_field", h)

    @property
    def shape(self) -> tuple[int, int]:
        return self.height_field.shape

    @property
    def edge_image(self) -> np.ndarray:
        return edges_of(self.height_field)

    @property
    def contact_region(self) -> np.ndarray:
        return self.height_field > 0


def grating(shape=(64, 64), pitch: int = 8, line_width: int = 3,
            relief: float = 0.5e-3) -> TextureMap:
    """Vertical raised lines every ``pitch`` pixels."""
    h = np.zeros(shape)
    cols = np.arange(shape[1])
    h[:, (cols % pitch) < line_width] = relief
    return TextureMap(h, "grating")


def rectangle(shape=(64, 64), box=None, relief: float = 1e-3) -> TextureMap:
    """Filled raised rectangle; ``box`` is (row0, col0, row1, col1), end-exclusive."""
    rows, cols = shape
    if box is None:
        box = (rows // 4, cols // 5, 3 * rows // 4, 4 * cols // 5)
    r0, c0, r1, c1 = box
    h = np.zeros(shape)
    h[r0:r1, c0:c1] = relief
    return TextureMap(h, "rectangle")


def circle(shape=(64, 64), center=None, radius: Optional[float] = None,
           relief: float = 1e-3) -> TextureMap:
    """Filled raised disk."""
    rows, cols = shape
    cy, cx = center if center is not None else ((rows - 1) / 2, (cols - 1) / 2)
    radius = radius if radius is not None else min(rows, cols) / 3
    yy, xx = np.mgrid[:rows, :cols]
    h = np.where((yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2, relief, 0.0)
    return TextureMap(h, "circle")


def asterisk(shape=(64, 64), arms: int = 4, arm_width: float = 2.0,
             relief: float = 1e-3) -> TextureMap:
    """Raised bars crossing at the centre (``arms`` bars, evenly rotated)."""
    rows, cols = shape
    cy, cx = (rows - 1) / 2, (cols - 1) / 2
    length = 0.4 * min(rows, cols)
    yy, xx = np.mgrid[:rows, :cols]
    h = np.zeros(shape)
    for k in range(arms):
        a = math.pi * k / arms
        along = (xx - cx) * math.cos(a) + (yy - cy) * math.sin(a)
        across = -(xx - cx) * math.sin(a) + (yy - cy) * math.cos(a)
        h[(np.abs(along) <= length) & (np.abs(across) <= arm_width)] = relief
    return TextureMap(h, "asterisk")


TEXTURES = {"grating": grating, "rectangle": rectangle, "circle": circle,
            "asterisk": asterisk}


def make_texture(name: str, shape=(64, 64), **kw) -> TextureMap:
    try:
        return TEXTURES[name](shape, **kw)
    except KeyError:
        raise ValueError(f"unknown texture {name!r}; choose from {sorted(TEXTURES)}") from None


# ---------------------------------------------------------------------------
# sensor, optics and scenario


#: Log-intensity thresholds of the three sensitivity settings.
SENSITIVITY_THRESHOLDS = {
    Sensitivity.HIGH: 0.10,
    Sensitivity.MID: 0.15,
    Sensitivity.LOW: 0.22,
}


@dataclass(frozen=True)
class SensorModel:
    width: int = 64
    height: int = 64
    threshold: float = SENSITIVITY_THRESHOLDS[Sensitivity.MID]
    refractory: int = 0
    noise_rate: float = 0.1
    threshold_mismatch: float = 0.05
    reference_jitter: float = 1.0
    sensitivity: Sensitivity = Sensitivity.MID

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if self.refractory < 0:
            raise ValueError("refractory must be >= 0")
        if self.noise_rate < 0:
            raise ValueError("noise_rate must be >= 0")

    @classmethod
    def preset(cls, sensitivity, **kw) -> "SensorModel":
        s = Sensitivity(sensitivity)
        return cls(threshold=SENSITIVITY_THRESHOLDS[s], sensitivity=s, **kw)


@dataclass(frozen=True)
class OpticsModel:
    """Pixel-level forward model constants (see module docstring)."""

    contrast_gain: float = 1.0
    preload: float = 1.0
    reference_amplitude: float = 100e-6
    pixel_bandwidth: float = 50.0
    blur_sigma: float = 2.0
    asymmetric: bool = True
    min_contrast: float = 1e-3

    def __post_init__(self):
        if self.contrast_gain <= 0 or self.reference_amplitude <= 0:
            raise ValueError("contrast_gain and reference_amplitude must be > 0")
        if self.preload < 0:
            raise ValueError("preload must be >= 0")
        if not self.pixel_bandwidth > 0 or not self.blur_sigma > 0:
            raise ValueError("pixel_bandwidth and blur_sigma must be > 0")


@dataclass(frozen=True)
class SynthScenario:
    texture: TextureMap
    vibration: VibrationConfig
    elastomer: ElastomerModel
    sensor: SensorModel = field(default_factory=SensorModel)
    duration: float = 1.0
    imu_rate: float = 2000.0
    imu_noise_sd: float = 0.5
    imu_margin: float = 0.1
    seed: int = 0
    optics: OpticsModel = field(default_factory=OpticsModel)
    name: str = ""

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be > 0")
        if self.imu_margin < 0:
            raise ValueError("imu_margin must be >= 0")
        if self.imu_rate < 4 * self.vibration.frequency:
            raise ValueError("imu_rate must be at least 4x the vibration frequency")
        if self.texture.shape != (self.sensor.height, self.sensor.width):
            raise ValueError(f"texture shape {self.texture.shape} does not match sensor "
                             f"{(self.sensor.height, self.sensor.width)}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def replace(self, **kw) -> "SynthScenario":
        return dataclasses.replace(self, **kw)

    def _streams(self):
        # independent, reproducible generators per output
        ss = np.random.SeedSequence(self.seed)
        ev, noise, imu = ss.spawn(3)
        return (np.random.default_rng(ev), np.random.default_rng(noise),
                np.random.default_rng(imu))


def contrast_map(texture: TextureMap, optics: OpticsModel) -> np.ndarray:
    """Static edge contrast in [0, 1] with a one-sided (or symmetric) blur."""
    edges = texture.edge_image
    if not edges.any():
        return np.zeros(texture.shape)
    dist = ndimage.distance_transform_edt(~edges)
    tail = np.exp(-0.5 * (dist / optics.blur_sigma) ** 2)
    if optics.asymmetric:
        # contact side (raised, not edge) stays dark: the sharp side
        tail[texture.contact_region & ~edges] = 0.0
    tail[edges] = 1.0
    tail[tail < optics.min_contrast] = 0.0
    return tail


def contact_modulation(scenario: SynthScenario, t) -> np.ndarray:
    """Normalised contact pressure ``g(t) >= 0``."""
    amp, phase = _elastomer_response(scenario)
    vib = scenario.vibration
    s = amp * np.sin(vib.omega * np.asarray(t, dtype=np.float64) + vib.phase - phase)
    return np.maximum(0.0, scenario.optics.preload + s)


def _elastomer_response(scenario: SynthScenario) -> tuple[float, float]:
    """Amplitude and phase lag of the contact modulation ``s(t)``."""
    rel, lag = kelvin_voigt_relative(scenario.elastomer, scenario.vibration.omega)
    amp = scenario.vibration.amplitude / scenario.optics.reference_amplitude * rel
    fc = scenario.optics.pixel_bandwidth
    if math.isfinite(fc):
        x = scenario.vibration.frequency / fc
        amp /= math.sqrt(1.0 + x * x)
        lag += math.atan(x)
    return float(amp), float(lag)


def render_intensity(scenario: SynthScenario, t: float) -> np.ndarray:
    """Latent image intensity at time ``t`` (seconds)."""
    if not 0 <= t <= scenario.duration:
        raise ValueError("t outside the scenario duration")
    c = contrast_map(scenario.texture, scenario.optics)
    g = float(contact_modulation(scenario, t))
    return 1.0 + scenario.optics.contrast_gain * c * g


def ground_truth(scenario: SynthScenario, kind: str = "edges") -> GroundTruthImage:
    """Edge image of the texture model, or the contact-region label."""
    if kind == "edges":
        return GroundTruthImage(scenario.texture.edge_image.astype(float),
                                GtSource.TEXTURE_MODEL_EDGES)
    if kind == "contact":
        return GroundTruthImage(scenario.texture.contact_region.astype(float),
                                GtSource.SYNTHETIC_LABEL)
    raise ValueError("kind must be 'edges' or 'contact'")


# ---------------------------------------------------------------------------
# event generation


def _segments(psi0: float, psi1: float):
    """Monotone pieces of sin(psi) over [psi0, psi1] as (m, lo, hi)."""
    m = math.floor((psi0 + math.pi / 2) / math.pi)
    lo = psi0
    while lo < psi1:
        hi = min(m * math.pi + math.pi / 2, psi1)
        if hi > lo:
            yield m, lo, hi
        m += 1
        lo = hi


def _signal_events(scenario: SynthScenario, rng: np.random.Generator):
    """Closed-form threshold crossings of all pixels; returns (t_s, pix, pol)."""
    sensor, optics, vib = scenario.sensor, scenario.optics, scenario.vibration
    c_full = contrast_map(scenario.texture, optics).ravel()
    n_pix = c_full.size
    # per-pixel state is drawn for every pixel so that draws do not depend on the texture
    mismatch = rng.standard_normal(n_pix)
    offsets = rng.random(n_pix)
    amp, lag = _elastomer_response(scenario)
    active = np.flatnonzero(c_full > 0)
    empty = (np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int8))
    if amp == 0 or active.size == 0:
        return empty

    kc = optics.contrast_gain * c_full[active]
    theta = sensor.threshold * np.maximum(1.0 + sensor.threshold_mismatch * mismatch[active], 0.2)
    p0 = optics.preload
    w = vib.omega
    shift = vib.phase - lag

    def level(sin_psi):
        g = np.maximum(0.0, p0 + amp * sin_psi)
        return np.log1p(kc * g)

    psi0 = shift
    psi1 = w * scenario.duration + shift
    # reference levels start within +-jitter/2 thresholds of the initial level
    ref = level(math.sin(psi0)) + theta * sensor.reference_jitter * (offsets[active] - 0.5)

    times, pixels, pols = [], [], []
    for m, lo, hi in _segments(psi0, psi1):
        rising = m % 2 == 0
        end = level(math.sin(hi))
        if rising:
            n = np.floor((end - ref) / theta)
        else:
            n = np.floor((ref - end) / theta)
        n = np.maximum(n, 0).astype(np.int64)
        total = int(n.sum())
        if total:
            who = np.repeat(np.arange(active.size), n)
            # 1..n within each pixel
            step = np.arange(total) - np.repeat(np.cumsum(n) - n, n) + 1
            sgn = 1.0 if rising else -1.0
            lam = ref[who] + sgn * step * theta[who]
            g_star = np.expm1(lam) / kc[who]
            v = np.clip((g_star - p0) / amp, -1.0, 1.0)
            psi = m * math.pi + (np.arcsin(v) if rising else -np.arcsin(v))
            psi = np.clip(psi, lo, hi)
            times.append((psi - shift) / w)
            pixels.append(active[who])
            pols.append(np.full(total, 1 if rising else -1, dtype=np.int8))
            ref = ref + sgn * n * theta
    if not times:
        return empty
    return np.concatenate(times), np.concatenate(pixels), np.concatenate(pols)


def _apply_refractory(t_us: np.ndarray, pix: np.ndarray, refractory: int) -> np.ndarray:
    """Boolean keep-mask dropping events within ``refractory`` us of the last kept one."""
    keep = np.ones(t_us.size, dtype=bool)
    if refractory <= 0 or t_us.size < 2:
        return keep
    order = np.lexsort((t_us, pix))
    ts, ps = t_us[order], pix[order]
    gap = np.diff(ts)
    same = np.diff(ps) == 0
    suspect = np.flatnonzero(same & (gap < refractory)) + 1
    for i in suspect:
        # walk back to the last kept event of this pixel
        j = i - 1
        while not keep[order[j]]:
            j -= 1
        if ts[i] - ts[j] < refractory:
            keep[order[i]] = False
    return keep


def generate_events(scenario: SynthScenario) -> EventStream:
    """Simulated event-camera output for the scenario (signal plus noise)."""
    rng_ev, rng_noise, _ = scenario._streams()
    sensor = scenario.sensor
    t_s, pix, pol = _signal_events(scenario, rng_ev)
    duration_us = int(round(scenario.duration * 1e6))

    n_pix = sensor.width * sensor.height
    lam = sensor.noise_rate * n_pix * scenario.duration
    n_noise = int(rng_noise.poisson(lam)) if lam > 0 else 0
    noise_t = rng_noise.random(n_noise) * scenario.duration
    noise_pix = rng_noise.integers(0, n_pix, n_noise)
    noise_pol = np.where(rng_noise.random(n_noise) < 0.5, -1, 1).astype(np.int8)

    t_all = np.concatenate([t_s, noise_t])
    t_us = np.clip(np.floor(t_all * 1e6).astype(np.int64), 0, duration_us - 1)
    pix_all = np.concatenate([pix, noise_pix]).astype(np.int64)
    pol_all = np.concatenate([pol, noise_pol])

    keep = _apply_refractory(t_us, pix_all, sensor.refractory)
    t_us, pix_all, pol_all = t_us[keep], pix_all[keep], pol_all[keep]
    order = np.lexsort((pol_all, pix_all, t_us))
    pix_all = pix_all[order]
    return EventStream(t_us[order], pix_all % sensor.width, pix_all // sensor.width,
                       pol_all[order], sensor.width, sensor.height, sensor.sensitivity)


def generate_imu(scenario: SynthScenario) -> ImuSeries:
    """IMU samples at ``imu_rate``: vibration on Z, noise only on X/Y.

    Logging starts ``imu_margin`` before the first camera timestamp and ends
    the same margin after the last, so shifted windows stay covered.
    """
    _, _, rng = scenario._streams()
    step = 1e6 / scenario.imu_rate
    first = -math.floor(scenario.imu_margin * scenario.imu_rate)
    last = math.floor((scenario.duration + scenario.imu_margin) * scenario.imu_rate)
    n = last - first + 1
    t_us = np.round(np.arange(first, last + 1) * step).astype(np.int64)
    t_s = t_us * 1e-6
    sd = scenario.imu_noise_sd
    acc_z = imu_model(scenario.vibration, t_s, sd, rng if sd > 0 else None)
    ax = rng.normal(0.0, sd, n) if sd > 0 else np.zeros(n)
    ay = rng.normal(0.0, sd, n) if sd > 0 else np.zeros(n)
    return ImuSeries(t_us, acc_z, scenario.imu_rate, ax, ay)


@dataclass(frozen=True, eq=False)
class SynthOutput:
    events: EventStream
    imu: ImuSeries
    gt: GroundTruthImage
    contact: GroundTruthImage


def generate(scenario: SynthScenario) -> SynthOutput:
    return SynthOutput(generate_events(scenario), generate_imu(scenario),
                       ground_truth(scenario, "edges"), ground_truth(scenario, "contact"))


# ---------------------------------------------------------------------------
# shear-force dataset


def tip_image(shape, center, radius: float) -> np.ndarray:
    """Frame of a conical tip seen end-on: a filled bright disk."""
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    cx, cy = center
    return ((xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2).astype(np.float64)


@dataclass(frozen=True)
class StiffnessModel:
    """Linear shear stiffness: force = k * tip offset (N per px)."""

    kx: float = 1.0 / 6.0
    ky: float = 1.0 / 6.0


@dataclass(frozen=True, eq=False)
class ForceDataset:
    features: list
    forces: list
    segment: np.ndarray
    noise_sd: tuple


def force_dataset(n_segments: int = 36, frames_per_segment: int = 10, max_offset: float = 6.0,
                  stiffness: StiffnessModel = StiffnessModel(), noise_fraction: float = 0.05,
                  shape=(64, 64), tip_radius: float = 8.0, jitter: float = 0.3,
                  seed: int = 0, edge_params: EdgeParams = EdgeParams()) -> ForceDataset:
    """Tip-tracking features and noisy shear labels for held lateral offsets.

    Offsets lie on a square grid (``n_segments`` must be a square number);
    each segment holds its offset for ``frames_per_segment`` frames with a
    small positional jitter. Features come from :func:`track_tip` on rendered
    tip frames. Labels follow the linear stiffness model plus Gaussian noise
    with a standard deviation of ``noise_fraction`` times each axis' range.
    """
    side = int(round(math.sqrt(n_segments)))
    if side * side != n_segments:
        raise ValueError("n_segments must be a square number")
    rng = np.random.default_rng(seed)
    grid = np.linspace(-max_offset, max_offset, side)
    ref = ((shape[1] - 1) / 2, (shape[0] - 1) / 2)
    sd = (noise_fraction * stiffness.kx * 2 * max_offset,
          noise_fraction * stiffness.ky * 2 * max_offset)
    feats, forces, seg = [], [], []
    for s, (oy, ox) in enumerate((oy, ox) for oy in grid for ox in grid):
        for _ in range(frames_per_segment):
            dx, dy = ox + rng.normal(0, jitter), oy + rng.normal(0, jitter)
            img = tip_image(shape, (ref[0] + dx, ref[1] + dy), tip_radius)
            feats.append(track_tip(img, ref, edge_params))
            forces.append(ForceEstimate(float(stiffness.kx * dx + rng.normal(0, sd[0])),
                                        float(stiffness.ky * dy + rng.normal(0, sd[1]))))
            seg.append(s)
    return ForceDataset(feats, forces, np.array(seg), sd)


# ---------------------------------------------------------------------------
# presets

#: Young's modulus (Pa) of the three hardness analogs. 20 A is the reference
#: elastomer; the others follow the relative Shore-A to modulus scaling of
#: Gent's relation.
HARDNESS_E = {"10A": 0.113e6, "20A": 0.2e6, "40A": 0.462e6}
#: Shared viscosity (Pa s): the 20 A elastomer's corner frequency sits at 50 Hz.
VISCOSITY = 0.2e6 / (2 * math.pi * 50.0)

GRID_AMPLITUDES_UM = (50, 100, 200, 400)
GRID_FREQUENCIES_HZ = (20, 30, 50, 100)
GRID_SENSITIVITIES = ("low", "mid", "high")
GRID_HARDNESS = ("10A", "20A", "40A")

PRESET_ALIASES = {"paper-default": "a200-f50-mid-20A"}


def elastomer(hardness: str = "20A") -> ElastomerModel:
    try:
        return ElastomerModel(HARDNESS_E[hardness], VISCOSITY)
    except KeyError:
        raise ValueError(f"unknown hardness {hardness!r}; choose from {sorted(HARDNESS_E)}") from None


def grid_name(amplitude_um: float, frequency_hz: float, sensitivity: str, hardness: str) -> str:
    return f"a{amplitude_um:g}-f{frequency_hz:g}-{sensitivity}-{hardness}"


def make_scenario(amplitude_um: float = 200, frequency_hz: float = 50, sensitivity: str = "mid",
                  hardness: str = "20A", texture: str = "grating", shape=(64, 64),
                  duration: float = 1.0, seed: int = 0, name: str = "", **kw) -> SynthScenario:
    sensor = SensorModel.preset(sensitivity, width=shape[1], height=shape[0])
    return SynthScenario(make_texture(texture, shape), VibrationConfig.from_hz(amplitude_um * 1e-6, frequency_hz),
                         elastomer(hardness), sensor, duration=duration, seed=seed,
                         name=name or grid_name(amplitude_um, frequency_hz, sensitivity, hardness), **kw)


def scenario_presets(duration: float = 1.0, seed: int = 0) -> dict[str, SynthScenario]:
    """Characterisation grid: amplitude x frequency x sensitivity x hardness."""
    out = {}
    for a in GRID_AMPLITUDES_UM:
        for f in GRID_FREQUENCIES_HZ:
            for s in GRID_SENSITIVITIES:
                for h in GRID_HARDNESS:
                    sc = make_scenario(a, f, s, h, duration=duration, seed=seed)
                    out[sc.name] = sc
    return out


def named_scenario(name: str, seed: int = 0) -> SynthScenario:
    """Grid entries by name plus the task scenes used by the pipeline and tests.

    ``default``: 30 Hz grating scene used for calibration and gating (5 s).
    ``contact-rectangle`` / ``contact-circle``: raised shapes pressed at 30 Hz.
    ``sparse``: small dot on a large sensor for bandwidth comparisons.
    """
    name = PRESET_ALIASES.get(name, name)
    if name == "default":
        return make_scenario(200, 30, duration=5.0, seed=seed, name="default")
    if name in ("contact-rectangle", "contact-circle"):
        return make_scenario(200, 30, texture=name.split("-")[1], duration=3.0, seed=seed, name=name)
    if name == "sparse":
        tex = circle((192, 192), radius=3.0)
        sensor = SensorModel.preset("low", width=192, height=192)
        return SynthScenario(tex, VibrationConfig.from_hz(100e-6, 20), elastomer("20A"), sensor,
                             duration=2.0, seed=seed, name="sparse")
    grid = scenario_presets(seed=seed)
    if name in grid:
        return grid[name]
    raise ValueError(f"unknown scenario {name!r}")


def active_fraction(scenario: SynthScenario) -> float:
    """Fraction of pixels with non-zero edge contrast."""
    c = contrast_map(scenario.texture, scenario.optics)
    return float(np.count_nonzero(c)) / c.size
