"""Imaging-quality and similarity metrics.

All images are real arrays in [0, 1]. Functions accept either a :class:`Frame`
or a bare 2-D array. The ``*_batch`` variants take an (m, H, W) stack and are
what the pipeline uses on long frame sequences.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import ndimage

from .events import Frame

#: Value reported for a foreground with zero variance (perfectly uniform).
MSNR_CAP_DB = 120.0

ImageLike = Union[Frame, np.ndarray]


def _pixels(img) -> np.ndarray:
    if isinstance(img, Frame):
        return img.pixels
    if isinstance(img, GroundTruthImage):
        return img.pixels
    return np.asarray(img, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class Mask:
    region: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.region, dtype=bool)
        if r.ndim != 2:
            raise ValueError("mask must be 2-D")
        r = np.ascontiguousarray(r)
        r.setflags(write=False)
        object.__setattr__(self, "region", r)

    @property
    def n_fg(self) -> int:
        return int(np.count_nonzero(self.region))

    @property
    def shape(self) -> tuple[int, int]:
        return self.region.shape

    @classmethod
    def full(cls, shape) -> "Mask":
        return cls(np.ones(shape, dtype=bool))


class GtSource(str, enum.Enum):
    TEXTURE_MODEL_EDGES = "texture_model_edges"
    SYNTHETIC_LABEL = "synthetic_label"


@dataclass(frozen=True, eq=False)
class GroundTruthImage:
    pixels: np.ndarray
    source: GtSource = GtSource.TEXTURE_MODEL_EDGES

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise ValueError("ground truth must be 2-D")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "source", GtSource(self.source))


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


class Msnr(NamedTuple):
    db: float
    saturated: bool


def msnr_batch(frames: np.ndarray, mask: Mask) -> tuple[np.ndarray, np.ndarray]:
    """Masked SNR in dB for a stack of frames.

    Returns ``(values, saturated)``. A foreground with zero variance but
    non-zero signal is reported as :data:`MSNR_CAP_DB` with ``saturated``
    set. An all-dark foreground carries no signal and no spread; its ratio
    term is taken as 1 (the limit of a vanishing sparse foreground), giving
    ``10 lg(N_fg / N_image)``.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        frames = frames[None]
    if frames.shape[1:] != mask.shape:
        raise ValueError(f"shape mismatch: {frames.shape[1:]} vs {mask.shape}")
    n_fg = mask.n_fg
    if n_fg < 1:
        raise ValueError("MSNR needs a non-empty foreground mask")
    fg = frames[:, mask.region]
    energy = np.einsum("ij,ij->i", fg, fg)
    mu = fg.mean(axis=1)
    dev = fg - mu[:, None]
    spread = np.einsum("ij,ij->i", dev, dev)
    area = n_fg / mask.region.size
    saturated = (spread <= 0) & (energy > 0)
    empty = energy <= 0
    ratio = np.ones_like(energy)
    ok = ~(saturated | empty)
    ratio[ok] = energy[ok] / spread[ok]
    values = 10.0 * np.log10(ratio * area)
    values[saturated] = MSNR_CAP_DB
    return values, saturated


def msnr(frame: ImageLike, mask: Mask, return_flag: bool = False):
    """Masked SNR (dB) of one frame over the foreground ``mask``."""
    v, sat = msnr_batch(_pixels(frame)[None], mask)
    if return_flag:
        return Msnr(float(v[0]), bool(sat[0]))
    return float(v[0])


def quantize(img, levels: int = 256) -> np.ndarray:
    """Map [0, 1] intensities onto ``levels`` integer bins (round half up)."""
    q = np.floor(np.asarray(img, dtype=np.float64) * (levels - 1) + 0.5)
    return np.clip(q, 0, levels - 1).astype(np.int64)


def entropy_batch(frames: np.ndarray, levels: int = 256) -> np.ndarray:
    if levels < 2:
        raise ValueError("levels must be >= 2")
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        frames = frames[None]
    m = frames.shape[0]
    q = quantize(frames.reshape(m, -1), levels)
    offs = (np.arange(m, dtype=np.int64) * levels)[:, None]
    hist = np.bincount((q + offs).ravel(), minlength=m * levels).reshape(m, levels)
    prob = hist / q.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(prob > 0, prob * np.log2(prob), 0.0)
    return np.maximum(-terms.sum(axis=1), 0.0)


def entropy(frame: ImageLike, levels: int = 256) -> float:
    """Shannon entropy in bits of the ``levels``-level histogram."""
    return float(entropy_batch(_pixels(frame)[None], levels)[0])


def mse_batch(frames: np.ndarray, gt, mask: Mask) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 2:
        frames = frames[None]
    g = _pixels(gt)
    _check_shapes(frames[0], g)
    _check_shapes(g, mask.region)
    if mask.n_fg < 1:
        raise ValueError("MSE needs a non-empty foreground mask")
    d = frames[:, mask.region] - g[mask.region]
    return np.einsum("ij,ij->i", d, d) / mask.n_fg


def mse(frame: ImageLike, gt, mask: Mask) -> float:
    """Mean squared difference to the ground truth over the foreground."""
    return float(mse_batch(_pixels(frame)[None], gt, mask)[0])


def rmse(pred, gt) -> float:
    a, b = _pixels(pred), _pixels(gt)
    _check_shapes(a, b)
    d = a - b
    return float(np.sqrt(np.mean(d * d)))


def ssim(a, b, window: int = 8, dynamic_range: float = 1.0,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM over non-overlapping ``window`` x ``window`` tiles.

    Tiles that do not fit at the right/bottom border are ignored. This differs
    from the sliding Gaussian-window variant found in most libraries.
    """
    x, y = _pixels(a), _pixels(b)
    _check_shapes(x, y)
    h, w = x.shape
    if h < window or w < window:
        raise ValueError(f"image {x.shape} smaller than the {window}x{window} window")
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    nh, nw = h // window, w // window

    def tiles(img):
        img = img[: nh * window, : nw * window]
        return img.reshape(nh, window, nw, window).transpose(0, 2, 1, 3).reshape(nh * nw, -1)

    tx, ty = tiles(x), tiles(y)
    mx, my = tx.mean(axis=1), ty.mean(axis=1)
    dx, dy = tx - mx[:, None], ty - my[:, None]
    vx, vy = (dx * dx).mean(axis=1), (dy * dy).mean(axis=1)
    cov = (dx * dy).mean(axis=1)
    s = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(s.mean())


def iou(pred, gt) -> float:
    """Intersection over union of two boolean masks; 1.0 when both are empty."""
    a = pred.region if isinstance(pred, Mask) else np.asarray(pred, dtype=bool)
    b = gt.region if isinstance(gt, Mask) else np.asarray(gt, dtype=bool)
    _check_shapes(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def mask_from_gt(gt, dilation_radius: int = 2) -> Mask:
    """Foreground = non-zero ground-truth pixels grown by a square of radius r."""
    if dilation_radius < 0:
        raise ValueError("dilation_radius must be >= 0")
    fg = _pixels(gt) > 0
    if dilation_radius == 0 or not fg.any():
        return Mask(fg)
    size = 2 * dilation_radius + 1
    return Mask(ndimage.binary_dilation(fg, structure=np.ones((size, size), dtype=bool)))
