"""End-to-end runs composed from the library modules.

These are the computations behind the command-line tools, kept free of file
handling so they can be timed and tested directly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .events import EventStream, ImuSeries, ReconstructionParams, filter_background
from .imu_filter import (CalibrationResult, GateMode, GateResult, GateSummary, IqSeries, calibrate,
                         gate_stream, summarize_gate)
from .metrics import Mask, entropy_batch, iou, msnr_batch, mse_batch, rmse, ssim
from .tactile import ContactParams, estimate_contact


@dataclass(frozen=True, eq=False)
class FrameMetrics:
    """Per-frame quality series of one reconstruction."""

    t_start: np.ndarray
    msnr: np.ndarray
    saturated: np.ndarray
    entropy: np.ndarray
    mse: np.ndarray

    def __len__(self) -> int:
        return int(self.t_start.shape[0])

    def select(self, keep: np.ndarray) -> "FrameMetrics":
        return FrameMetrics(self.t_start[keep], self.msnr[keep], self.saturated[keep],
                            self.entropy[keep], self.mse[keep])


def frame_metrics(frames, mask: Mask, gt: Optional[np.ndarray] = None, block: int = 512) -> FrameMetrics:
    """MSNR, entropy and (with ``gt``) MSE of every frame, one block at a time."""
    msnr, sat, ent, err = [], [], [], []
    for _, dense in frames.blocks(block):
        v, s = msnr_batch(dense, mask)
        msnr.append(v)
        sat.append(s)
        ent.append(entropy_batch(dense))
        err.append(mse_batch(dense, gt, mask) if gt is not None else np.full(dense.shape[0], math.nan))
    if not msnr:
        z = np.zeros(0)
        return FrameMetrics(np.zeros(0, dtype=np.int64), z, np.zeros(0, dtype=bool), z, z)
    return FrameMetrics(frames.t_starts.copy(), np.concatenate(msnr), np.concatenate(sat),
                        np.concatenate(ent), np.concatenate(err))


@dataclass(frozen=True, eq=False)
class PipelineResult:
    calibration: CalibrationResult
    gate: GateResult
    metrics: FrameMetrics
    summary: GateSummary
    n_events: int
    seconds: float

    @property
    def events_per_second(self) -> float:
        return self.n_events / self.seconds if self.seconds > 0 else math.inf


def run_pipeline(events: EventStream, imu: ImuSeries, mask: Mask, omega: float,
                 params: ReconstructionParams, gt: Optional[np.ndarray] = None,
                 calibration_params: Optional[ReconstructionParams] = None,
                 iq_thresh: Union[str, float] = "mean", segment: int = 2_000_000,
                 mode: GateMode = GateMode.MAGNITUDE, relative_bandwidth: float = 0.4,
                 background: Optional[tuple[int, int]] = None,
                 t_begin: Optional[int] = None, t_end: Optional[int] = None) -> PipelineResult:
    """Calibrate on the first segment, gate every window, score all frames.

    ``background`` is ``(radius, window_us)`` to run the background filter
    first. Calibration uses ``calibration_params`` when given (a faster
    reconstruction rate than the gated one avoids aliasing the quality
    signal).
    """
    t_start = time.perf_counter()
    if background is not None:
        events = filter_background(events, *background)
    cal = calibrate(events, imu, calibration_params or params, omega, mask, iq_thresh, segment,
                    mode, relative_bandwidth)
    gate = gate_stream(events, imu, cal, params, omega, t_begin, t_end, relative_bandwidth)
    fm = frame_metrics(gate.all_frames, mask, gt)
    keep = gate.decisions.retained
    valid = ~fm.saturated
    summary = summarize_gate(IqSeries(fm.t_start[valid].astype(float), fm.msnr[valid], fm.saturated[valid]),
                             keep[valid])
    return PipelineResult(cal, gate, fm, summary, len(events), time.perf_counter() - t_start)


@dataclass(frozen=True, eq=False)
class ContactRun:
    """Per-window contact estimates scored against a ground-truth mask."""

    t_start: np.ndarray
    iou: np.ndarray
    rmse: np.ndarray
    ssim: np.ndarray
    confidence: np.ndarray
    retained: np.ndarray
    masks: list

    def mean(self, gated: bool) -> tuple[float, float, float]:
        sel = self.retained if gated else np.ones_like(self.retained)
        if not sel.any():
            return math.nan, math.nan, math.nan
        return float(self.iou[sel].mean()), float(self.rmse[sel].mean()), float(self.ssim[sel].mean())


def run_contact(events: EventStream, imu: ImuSeries, edge_mask: Mask, contact_gt: np.ndarray,
                omega: float, params: ReconstructionParams,
                calibration_params: ReconstructionParams = ReconstructionParams.preset(500),
                contact_params: ContactParams = ContactParams(), relative_bandwidth: float = 0.4,
                segment: int = 2_000_000, t_begin: Optional[int] = None,
                t_end: Optional[int] = None) -> ContactRun:
    """Gate the stream and estimate the contact surface in every window."""
    cal = calibrate(events, imu, calibration_params, omega, edge_mask, segment=segment,
                    relative_bandwidth=relative_bandwidth)
    gate = gate_stream(events, imu, cal, params, omega, t_begin, t_end, relative_bandwidth)
    gt = np.asarray(contact_gt) > 0
    gtf = gt.astype(np.float64)
    frames = gate.all_frames
    n = len(frames)
    ious, errs, sims, conf, masks = (np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n), [])
    for i in range(n):
        est = estimate_contact(frames[i], contact_params)
        m = est.mask.region
        pred = m.astype(np.float64)
        ious[i] = iou(m, gt)
        errs[i] = rmse(pred, gtf)
        sims[i] = ssim(pred, gtf)
        conf[i] = est.confidence
        masks.append(m)
    return ContactRun(frames.t_starts.copy(), ious, errs, sims, conf, gate.decisions.retained.copy(), masks)

