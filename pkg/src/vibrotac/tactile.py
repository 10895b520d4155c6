"""Downstream tactile tasks on reconstructed frames.

* contact-surface recovery from asymmetric edges
* tip tracking with a minimum enclosing circle
* shear-force regression (distance-weighted k nearest neighbours)
* a fixed-length texture descriptor
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage
from skimage import feature

from .events import Frame
from .geometry import min_enclosing_circle
from .metrics import Mask

_CROSS = ndimage.generate_binary_structure(2, 1)
_SQUARE = np.ones((3, 3), dtype=bool)


def _pixels(frame) -> np.ndarray:
    return frame.pixels if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)


# ---------------------------------------------------------------------------
# contact estimation


@dataclass(frozen=True)
class ContactParams:
    lit_level: float = 0.0
    profile_depth: int = 4
    min_region: int = 12
    hole_fraction: float = 0.02


@dataclass(frozen=True, eq=False)
class ContactEstimate:
    mask: Mask
    confidence: float
    regions: tuple = ()


def _ring_profile(region: np.ndarray, img: np.ndarray, depth: int) -> np.ndarray:
    """Mean intensity on successive 1-px rings around ``region``."""
    prof = np.zeros(depth)
    inner = region
    for k in range(depth):
        outer = ndimage.binary_dilation(inner, _SQUARE)
        ring = outer & ~inner
        prof[k] = img[ring].mean() if ring.any() else 0.0
        inner = outer
    return prof


def edge_sharpness(profile: np.ndarray) -> float:
    """Intensity right next to a region relative to the band maximum.

    Close to 1 when the edge reaches full strength at the region boundary
    (sharp side), smaller when the band fades in gradually (blurred side).
    """
    top = float(profile.max())
    return float(profile[0]) / top if top > 0 else 0.0


def estimate_contact(frame, params: ContactParams = ContactParams()) -> ContactEstimate:
    """Contact region enclosed by edges whose sharp side faces inward.

    Dark regions of the frame are separated by the lit edge band. For each
    dark region that does not touch the border, the band profile seen from
    inside is compared with the profile seen from the other dark regions;
    the asymmetry score is the difference of their edge sharpness. Regions
    with a positive score are the pressed side: they are grown by the
    4-connected edge pixels around them and small holes are closed.
    """
    img = _pixels(frame)
    lit = img > params.lit_level
    shape = img.shape
    empty = ContactEstimate(Mask(np.zeros(shape, dtype=bool)), 0.0)
    if not lit.any():
        return empty

    labels, n = ndimage.label(~lit, structure=_CROSS)
    if n < 2:
        return empty
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    border = set(np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])).tolist())
    big = [i for i in range(1, n + 1) if sizes[i] >= params.min_region]

    out = np.zeros(shape, dtype=bool)
    scores = []
    for i in big:
        if i in border:
            continue
        region = labels == i
        others = np.isin(labels, [j for j in big if j != i])
        if not others.any():
            continue
        inside = edge_sharpness(_ring_profile(region, img, params.profile_depth))
        outside = edge_sharpness(_ring_profile(others, img, params.profile_depth))
        asym = inside - outside
        if asym <= 0:
            continue
        out |= ndimage.binary_dilation(region, _CROSS)
        scores.append(asym)

    if not scores:
        return empty
    out = close_small_holes(out, params.hole_fraction)
    conf = float(np.clip(np.mean(scores), 0.0, 1.0))
    return ContactEstimate(Mask(out), conf, tuple(scores))


def close_small_holes(mask: np.ndarray, fraction: float) -> np.ndarray:
    """Fill background pockets smaller than ``fraction`` of the mask area."""
    filled = ndimage.binary_fill_holes(mask)
    holes, n = ndimage.label(filled & ~mask)
    if n == 0:
        return mask
    sizes = np.bincount(holes.ravel(), minlength=n + 1)
    limit = fraction * np.count_nonzero(filled)
    small = np.flatnonzero(sizes <= limit)
    small = small[small > 0]
    return mask | np.isin(holes, small)


# ---------------------------------------------------------------------------
# tip tracking


class TipNotFound(ValueError):
    pass


@dataclass(frozen=True)
class TipFeature:
    x: float
    y: float
    r: float
    radius: float = 0.0

    @classmethod
    def at(cls, x: float, y: float, radius: float = 0.0) -> "TipFeature":
        return cls(float(x), float(y), math.hypot(x, y), float(radius))

    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.r])


@dataclass(frozen=True)
class EdgeParams:
    sigma: float = 1.5
    low: float = 0.1
    high: float = 0.3
    min_area: int = 8


def detect_edges(img: np.ndarray, params: EdgeParams = EdgeParams()) -> np.ndarray:
    """Canny edges with hysteresis thresholds relative to the strongest gradient."""
    smooth = ndimage.gaussian_filter(img, params.sigma)
    gy = ndimage.sobel(smooth, axis=0)
    gx = ndimage.sobel(smooth, axis=1)
    top = float(np.hypot(gx, gy).max())
    if top <= 0:
        return np.zeros(img.shape, dtype=bool)
    return feature.canny(img, sigma=params.sigma, low_threshold=params.low * top,
                         high_threshold=params.high * top)


def track_tip(frame, reference_center, params: EdgeParams = EdgeParams()) -> TipFeature:
    """Centre of the tip's minimum enclosing circle relative to ``reference_center``."""
    img = ndimage.median_filter(_pixels(frame), size=3, mode="nearest")
    edges = detect_edges(img, params)
    labels, n = ndimage.label(edges, structure=_SQUARE)
    if n == 0:
        raise TipNotFound("tip not found")
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    sizes[0] = 0
    best = int(np.argmax(sizes))
    if sizes[best] < params.min_area:
        raise TipNotFound("tip not found")
    yy, xx = np.nonzero(labels == best)
    circ = min_enclosing_circle(np.column_stack([xx, yy]))
    rx, ry = reference_center
    return TipFeature.at(circ.x - rx, circ.y - ry, circ.radius)


# ---------------------------------------------------------------------------
# force regression


class ForceEstimate(NamedTuple):
    fx: float
    fy: float


class AxisScore(NamedTuple):
    mae: float
    r_squared: float


def _as_features(features) -> np.ndarray:
    rows = [f.vector() if isinstance(f, TipFeature) else np.asarray(f, dtype=np.float64)
            for f in features]
    return np.atleast_2d(np.array(rows, dtype=np.float64))


def _knn_predict(train_x, train_y, query, k, exclude_self=False):
    d = np.sqrt(((query[:, None, :] - train_x[None, :, :]) ** 2).sum(axis=2))
    if exclude_self:
        np.fill_diagonal(d, np.inf)
    kk = min(k, train_x.shape[0] - (1 if exclude_self else 0))
    # stable sort keeps ties in training order
    idx = np.argsort(d, axis=1, kind="stable")[:, :kk]
    dist = np.take_along_axis(d, idx, axis=1)
    out = np.empty((query.shape[0], train_y.shape[1]))
    for i in range(query.shape[0]):
        exact = dist[i] == 0
        if exact.any():
            out[i] = train_y[idx[i][exact]].mean(axis=0)
        else:
            w = 1.0 / dist[i]
            out[i] = w @ train_y[idx[i]] / w.sum()
    return out


def _score(y, pred) -> AxisScore:
    mae = float(np.mean(np.abs(y - pred)))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - pred) ** 2))
    return AxisScore(mae, 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0)


@dataclass(frozen=True, eq=False)
class ForceModel:
    """Distance-weighted kNN from [x, y, r] to (fx, fy)."""

    x: np.ndarray
    y: np.ndarray
    k: int = 5
    loo: tuple = field(default=())

    @property
    def loo_fx(self) -> AxisScore:
        return self.loo[0]

    @property
    def loo_fy(self) -> AxisScore:
        return self.loo[1]


def fit_force_model(features: Sequence, forces: Sequence, k: int = 5) -> ForceModel:
    """Fit the regressor and report leave-one-out MAE and R^2 per axis."""
    x = _as_features(features)
    y = np.array([[f[0], f[1]] for f in forces], dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("features and forces differ in length")
    if x.shape[0] < 20:
        raise ValueError("force model needs at least 20 samples")
    if k < 1:
        raise ValueError("k must be >= 1")
    if np.all(np.ptp(x, axis=0) == 0):
        raise ValueError("degenerate features: all samples identical")
    pred = _knn_predict(x, y, x, k, exclude_self=True)
    loo = (_score(y[:, 0], pred[:, 0]), _score(y[:, 1], pred[:, 1]))
    x.setflags(write=False)
    y.setflags(write=False)
    return ForceModel(x, y, k, loo)


def loo_predictions(model: ForceModel) -> np.ndarray:
    """Leave-one-out predictions (n, 2) behind the model's reported scores."""
    return _knn_predict(model.x, model.y, model.x, model.k, exclude_self=True)


def predict_force(model: ForceModel, feature) -> ForceEstimate:
    q = _as_features([feature])
    fx, fy = _knn_predict(model.x, model.y, q, model.k)[0]
    return ForceEstimate(float(fx), float(fy))


# ---------------------------------------------------------------------------
# texture descriptor


def texture_features(frame, levels: int = 16, orientation_bins: int = 8) -> np.ndarray:
    """Normalised intensity histogram followed by a gradient-orientation histogram.

    Orientations are unsigned (mod pi) and weighted by gradient magnitude;
    the orientation part is all zeros for a flat frame.
    """
    img = _pixels(frame)
    q = np.clip(np.floor(img * (levels - 1) + 0.5), 0, levels - 1).astype(np.int64)
    hist = np.bincount(q.ravel(), minlength=levels) / q.size
    gy, gx = np.gradient(img)
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), math.pi)
    b = np.minimum((ori / math.pi * orientation_bins).astype(np.int64), orientation_bins - 1)
    oh = np.bincount(b.ravel(), weights=mag.ravel(), minlength=orientation_bins)
    total = oh.sum()
    if total > 0:
        oh = oh / total
    return np.concatenate([hist, oh])
