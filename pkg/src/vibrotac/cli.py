"""Command-line front end: ``vibrotac <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 calibration
failure. Outputs are written atomically and never overwrite existing files
unless ``--force`` is given. Every run writes ``manifest.json`` next to its
outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, io as vio
from .config import Config, ConfigError, load_config, resolve_config_path
from .events import ReconstructionParams, data_rate, frame_data_rate, reconstruct
from .imu_filter import CalibrationError, CoverageError, GateMode
from .locomotion import InclineState, MotionModel, RobotParams, peristaltic_cycle
from .metrics import Mask, entropy_batch, iou, mask_from_gt, msnr_batch, mse_batch, rmse, ssim
from .synth import (SensorModel, SynthScenario, force_dataset, generate, make_texture,
                    named_scenario)
from .tactile import ContactParams, EdgeParams, fit_force_model, loo_predictions
from .vibration import ElastomerModel, VibrationConfig
from .workflows import run_contact, run_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CALIBRATION = 0, 2, 3, 4


class OutputExists(OSError):
    pass


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    tool_version: str = __version__
    outputs: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return str(v)


def _jsonable(cfg: dict) -> dict:
    # json cannot carry infinities portably
    return {s: {k: (repr(v) if isinstance(v, float) and not math.isfinite(v) else v) for k, v in kv.items()}
            for s, kv in cfg.items()}


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, command: str, cfg: Config, out: Path, force: bool, inputs=()):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.force = force
        self.inputs = [str(p) for p in inputs]
        self.outputs: list[Path] = []

    def claim(self, *names: str) -> None:
        """Refuse to start if any planned output already exists."""
        if self.force:
            return
        for n in (*names, "manifest.json"):
            p = self.out / n
            if p.exists():
                raise OutputExists(f"{p} exists; use --force to overwrite")

    def path(self, name: str) -> Path:
        p = self.out / name
        self.outputs.append(p)
        return p

    def finish(self) -> Path:
        m = RunManifest(self.command, self.cfg.digest(), int(self.cfg.get("run.seed")),
                        outputs=sorted(str(p.relative_to(self.out)) for p in self.outputs),
                        inputs=self.inputs, config=_jsonable(self.cfg.to_dict()))
        path = self.out / "manifest.json"
        with vio.atomic_write(path) as fh:
            fh.write(m.to_json())
        return path


# ---------------------------------------------------------------------------
# config to domain objects


def scenario_from_config(cfg: Config) -> SynthScenario:
    """Named base scenario with every explicitly configured key applied on top."""
    seed = int(cfg.get("run.seed"))
    try:
        sc = named_scenario(cfg.get("synth.scenario"), seed=seed)
    except ValueError as exc:
        raise ConfigError("synth.scenario", str(exc)) from None
    v, e, s = cfg["vibration"], cfg["elastomer"], cfg["sensor"]
    vib = sc.vibration
    if any(cfg.is_set(f"vibration.{k}") for k in v):
        amp = v["amplitude_m"] if cfg.is_set("vibration.amplitude_m") else vib.amplitude
        f = v["frequency_hz"] if cfg.is_set("vibration.frequency_hz") else vib.frequency
        phase = v["phase_rad"] if cfg.is_set("vibration.phase_rad") else vib.phase
        u = v["u"] if cfg.is_set("vibration.u") else vib.u
        vib = VibrationConfig(amp, 2 * math.pi * f, phase, u)
    el = sc.elastomer
    if any(cfg.is_set(f"elastomer.{k}") for k in e):
        el = ElastomerModel(e["E_pa"] if cfg.is_set("elastomer.E_pa") else el.E,
                            e["eta_pas"] if cfg.is_set("elastomer.eta_pas") else el.eta)
    sensor, texture = sc.sensor, sc.texture
    if any(cfg.is_set(f"sensor.{k}") for k in s):
        pick = lambda k, cur: s[k] if cfg.is_set(f"sensor.{k}") else cur  # noqa: E731
        sensor = SensorModel.preset(pick("sensitivity", sensor.sensitivity.value),
                                    width=pick("width", sensor.width), height=pick("height", sensor.height),
                                    refractory=pick("refractory_us", sensor.refractory),
                                    noise_rate=pick("noise_rate", sensor.noise_rate))
    shape = (sensor.height, sensor.width)
    if cfg.is_set("synth.texture") or shape != texture.shape:
        name = cfg.get("synth.texture") if cfg.is_set("synth.texture") else texture.name
        try:
            texture = make_texture(name, shape)
        except ValueError as exc:
            raise ConfigError("synth.texture", str(exc)) from None
    kw = {"vibration": vib, "elastomer": el, "sensor": sensor, "texture": texture}
    for key, attr in (("duration_s", "duration"), ("imu_rate_hz", "imu_rate"), ("imu_noise_sd", "imu_noise_sd")):
        if cfg.is_set(f"synth.{key}"):
            kw[attr] = cfg.get(f"synth.{key}")
    try:
        return sc.replace(**kw)
    except ValueError as exc:
        raise ConfigError("synth", str(exc)) from None


def echo_scenario(cfg: Config, sc: SynthScenario) -> Config:
    """Copy the scenario's physical values into the config for downstream commands."""
    out = Config(cfg.to_dict(), cfg.explicit)
    for key, val in (("vibration.amplitude_m", sc.vibration.amplitude),
                     ("vibration.frequency_hz", sc.vibration.frequency),
                     ("vibration.phase_rad", sc.vibration.phase), ("vibration.u", sc.vibration.u),
                     ("elastomer.E_pa", sc.elastomer.E), ("elastomer.eta_pas", sc.elastomer.eta),
                     ("sensor.sensitivity", sc.sensor.sensitivity.value),
                     ("sensor.width", sc.sensor.width), ("sensor.height", sc.sensor.height),
                     ("sensor.refractory_us", sc.sensor.refractory),
                     ("sensor.noise_rate", sc.sensor.noise_rate), ("synth.texture", sc.texture.name),
                     ("synth.duration_s", sc.duration), ("synth.imu_rate_hz", sc.imu_rate),
                     ("synth.imu_noise_sd", sc.imu_noise_sd)):
        out.set(key, repr(val) if isinstance(val, float) else val)
    return out


def recon_params(rate_hz: int, key: str) -> ReconstructionParams:
    try:
        return ReconstructionParams.preset(rate_hz)
    except KeyError as exc:
        raise ConfigError(key, exc.args[0]) from None


def omega_of(cfg: Config) -> float:
    return 2 * math.pi * cfg.get("vibration.frequency_hz")


def iq_thresh_of(cfg: Config):
    t = cfg.get("calibration.iq_thresh")
    return t if t == "mean" else float(t)


def _gt_path(explicit: Optional[str], events_path: str, name: str) -> Optional[Path]:
    if explicit:
        return Path(explicit)
    p = Path(events_path).parent / name
    return p if p.exists() else None


def _frame_metrics_csv(path, t_starts, dense_blocks, mask: Mask, gt) -> None:
    msnr_v, ent, err = [], [], []
    for dense in dense_blocks:
        msnr_v.append(msnr_batch(dense, mask)[0])
        ent.append(entropy_batch(dense))
        err.append(mse_batch(dense, gt, mask) if gt is not None else np.full(dense.shape[0], math.nan))
    cat = (lambda xs: np.concatenate(xs) if xs else np.zeros(0))  # noqa: E731
    vio.write_csv(path, ["frame_id", "t_start_us", "msnr_db", "entropy_bits", "mse"],
                  [np.arange(len(t_starts)), np.asarray(t_starts, dtype=np.int64), cat(msnr_v), cat(ent), cat(err)])


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args, cfg: Config, run: Run) -> int:
    if args.scenario:
        cfg.set("synth.scenario", args.scenario)
    sc = scenario_from_config(cfg)
    run.cfg = echo_scenario(cfg, sc)
    run.claim("events.evt", "imu.csv", "gt_edges.pgm", "gt_contact.pgm", "scenario.ini")
    out = generate(sc)
    vio.write_events(run.path("events.evt"), out.events)
    vio.write_imu(run.path("imu.csv"), out.imu)
    vio.write_pgm(run.path("gt_edges.pgm"), out.gt.pixels)
    vio.write_pgm(run.path("gt_contact.pgm"), out.contact.pixels)
    with vio.atomic_write(run.path("scenario.ini")) as fh:
        fh.write(run.cfg.to_ini())
    print(f"{sc.name or 'scenario'}: {len(out.events)} events, {len(out.imu)} IMU samples -> {run.out}")
    return EXIT_OK


def cmd_reconstruct(args, cfg: Config, run: Run) -> int:
    if args.rate:
        cfg.set("reconstruction.rate_hz", args.rate)
    params = recon_params(cfg.get("reconstruction.rate_hz"), "reconstruction.rate_hz")
    run.claim("frames/index.csv")
    events = vio.read_events(args.events)
    frames = reconstruct(events, params)
    for p in vio.write_frames(run.out / "frames", frames):
        run.outputs.append(p)
    print(f"{len(frames)} frames at {params.rate:g} Hz -> {run.out / 'frames'}")
    return EXIT_OK


def cmd_pipeline(args, cfg: Config, run: Run) -> int:
    if args.rate:
        cfg.set("reconstruction.rate_hz", args.rate)
    params = recon_params(cfg.get("reconstruction.rate_hz"), "reconstruction.rate_hz")
    names = ["calibration.txt", "decisions.csv", "metrics_all.csv", "metrics_gated.csv", "summary.csv"]
    run.claim(*names, "frames/index.csv")
    events = vio.read_events(args.events)
    imu = vio.read_imu(args.imu)
    gt_path = _gt_path(args.gt, args.events, "gt_edges.pgm")
    gt = vio.read_pgm(gt_path) if gt_path else None
    mask = mask_from_gt(gt, cfg.get("metrics.dilation_radius")) if gt is not None else Mask.full(
        (events.height, events.width))
    rc = cfg["reconstruction"]
    background = (rc["filter_radius"], rc["filter_window_us"]) if rc["background_filter"] else None
    cal_params = recon_params(cfg.get("calibration.rate_hz"), "calibration.rate_hz")
    res = run_pipeline(events, imu, mask, omega_of(cfg), params, gt=gt, calibration_params=cal_params,
                       iq_thresh=iq_thresh_of(cfg), segment=cfg.get("calibration.segment_us"),
                       mode=GateMode(cfg.get("calibration.mode")),
                       relative_bandwidth=cfg.get("bandpass.relative_bandwidth"), background=background)
    cal = res.calibration
    if cal.mode is GateMode.SIGNED_BAND and (cfg.is_set("calibration.band_low") or cfg.is_set("calibration.band_high")):
        print("note: configured signed band overrides are applied to the calibration file only")
    vio.write_calibration(run.path("calibration.txt"), cal)
    vio.write_decisions(run.path("decisions.csv"), res.gate.decisions)
    fm = res.metrics
    keep = res.gate.decisions.retained
    header = ["frame_id", "t_start_us", "msnr_db", "entropy_bits", "mse"]
    vio.write_csv(run.path("metrics_all.csv"), header,
                  [np.arange(len(fm)), fm.t_start, fm.msnr, fm.entropy, fm.mse])
    g = fm.select(keep)
    vio.write_csv(run.path("metrics_gated.csv"), header,
                  [np.flatnonzero(keep), g.t_start, g.msnr, g.entropy, g.mse])
    s = res.summary
    vio.write_csv(run.path("summary.csv"),
                  ["frames", "retained", "retention", "msnr_mean_all", "msnr_mean_gated", "msnr_std_all",
                   "msnr_std_gated", "avg_msnr_increase", "std_msnr_decrease", "r_squared", "delta_t_s"],
                  [[len(fm)], [int(keep.sum())], [s.retention], [s.mean_all], [s.mean_retained], [s.std_all],
                   [s.std_retained], [s.mean_increase], [s.std_decrease], [cal.r_squared], [cal.delta_t_hat]])
    if not args.no_frames:
        for p in vio.write_frames(run.out / "frames", res.gate.frames):
            run.outputs.append(p)
    print(f"retained {int(keep.sum())}/{len(fm)} windows; avg MSNR {s.mean_increase:+.1%}, "
          f"std {-s.std_decrease:+.1%}; {res.events_per_second:.3g} events/s")
    return EXIT_OK


def cmd_metrics(args, cfg: Config, run: Run) -> int:
    run.claim("metrics.csv", "summary.csv")
    frames = vio.read_frames(args.frames)
    if not frames:
        raise vio.FormatError(f"{args.frames}: no frames")
    gt = vio.read_pgm(args.gt)
    mask = mask_from_gt(gt, cfg.get("metrics.dilation_radius"))
    if mask.n_fg == 0:
        mask = Mask.full(gt.shape)
    dense = np.stack([f.pixels for f in frames])
    _frame_metrics_csv(run.path("metrics.csv"), [f.t_start for f in frames], [dense], mask, gt)
    win = cfg.get("metrics.ssim_window")
    gtb = gt > 0
    vio.write_csv(run.path("summary.csv"), ["frames", "ssim_mean", "iou_mean", "rmse_mean"],
                  [[len(frames)], [np.mean([ssim(f.pixels, gt, win) for f in frames])],
                   [np.mean([iou(f.pixels > 0, gtb) for f in frames])],
                   [np.mean([rmse(f.pixels, gt) for f in frames])]])
    print(f"scored {len(frames)} frames -> {run.out}")
    return EXIT_OK


def cmd_contact(args, cfg: Config, run: Run) -> int:
    run.claim("contact.csv", "summary.csv")
    events = vio.read_events(args.events)
    imu = vio.read_imu(args.imu)
    edges_path = _gt_path(args.edges, args.events, "gt_edges.pgm")
    contact_path = _gt_path(args.contact_gt, args.events, "gt_contact.pgm")
    if edges_path is None or contact_path is None:
        raise vio.FormatError("contact needs --edges and --contact-gt (or gt_*.pgm next to the events)")
    edges = vio.read_pgm(edges_path)
    truth = vio.read_pgm(contact_path)
    c = cfg["contact"]
    cp = ContactParams(profile_depth=c["profile_depth"], min_region=c["min_region"],
                       hole_fraction=c["hole_fraction"])
    res = run_contact(events, imu, mask_from_gt(edges, cfg.get("metrics.dilation_radius")), truth,
                      omega_of(cfg), recon_params(c["rate_hz"], "contact.rate_hz"),
                      recon_params(c["calibration_rate_hz"], "contact.calibration_rate_hz"), cp,
                      cfg.get("bandpass.relative_bandwidth"), cfg.get("calibration.segment_us"))
    n = len(res.t_start)
    vio.write_csv(run.path("contact.csv"),
                  ["frame_id", "t_start_us", "retained", "iou", "rmse", "ssim", "confidence"],
                  [np.arange(n), res.t_start, res.retained, res.iou, res.rmse, res.ssim, res.confidence])
    gated = bool(c["gated"])
    iou_m, rmse_m, ssim_m = res.mean(gated)
    iou_all, rmse_all, _ = res.mean(False)
    vio.write_csv(run.path("summary.csv"),
                  ["windows", "gated", "retention", "iou", "rmse", "ssim", "iou_ungated", "rmse_ungated"],
                  [[n], [gated], [float(res.retained.mean()) if n else 0.0], [iou_m], [rmse_m], [ssim_m],
                   [iou_all], [rmse_all]])
    sel = np.flatnonzero(res.retained) if gated else np.arange(n)
    for i in sel:
        vio.write_pgm(run.path(f"masks/mask_{i:06d}.pgm"), res.masks[i].astype(np.float64))
    print(f"contact IoU {iou_m:.3f}, RMSE {rmse_m:.3f} ({'gated' if gated else 'all'} windows)")
    return EXIT_OK


def cmd_force(args, cfg: Config, run: Run) -> int:
    f = cfg["force"]
    names = ["loo.csv", "summary.csv"] + ([] if args.data else ["dataset.csv"])
    run.claim(*names)
    if args.data:
        d = vio.read_csv(args.data)
        try:
            feats = np.column_stack([d["x_px"], d["y_px"], d["r_px"]])
            forces = np.column_stack([d["fx_n"], d["fy_n"]])
        except KeyError as exc:
            raise vio.FormatError(f"{args.data}: missing column {exc}") from None
    else:
        edge = EdgeParams(f["canny_sigma"], f["canny_low"], f["canny_high"])
        try:
            ds = force_dataset(f["n_segments"], f["frames_per_segment"], f["max_offset_px"],
                               noise_fraction=f["noise_fraction"], seed=int(cfg.get("run.seed")),
                               edge_params=edge)
        except ValueError as exc:
            raise ConfigError("force", str(exc)) from None
        feats = np.array([t.vector() for t in ds.features])
        forces = np.array(ds.forces)
        vio.write_csv(run.path("dataset.csv"), ["x_px", "y_px", "r_px", "fx_n", "fy_n"],
                      [feats[:, 0], feats[:, 1], feats[:, 2], forces[:, 0], forces[:, 1]])
    try:
        model = fit_force_model(feats, forces, f["k"])
    except ValueError as exc:
        raise ConfigError("force", str(exc)) from None
    pred = loo_predictions(model)
    vio.write_csv(run.path("loo.csv"), ["fx_n", "fy_n", "fx_pred_n", "fy_pred_n"],
                  [forces[:, 0], forces[:, 1], pred[:, 0], pred[:, 1]])
    vio.write_csv(run.path("summary.csv"), ["samples", "k", "mae_fx", "r2_fx", "mae_fy", "r2_fy"],
                  [[len(forces)], [model.k], [model.loo_fx.mae], [model.loo_fx.r_squared],
                   [model.loo_fy.mae], [model.loo_fy.r_squared]])
    print(f"LOO R2 fx {model.loo_fx.r_squared:.3f} fy {model.loo_fy.r_squared:.3f}; "
          f"MAE {model.loo_fx.mae:.3f} / {model.loo_fy.mae:.3f}")
    return EXIT_OK


def locomotion_sweep(cfg: Config) -> list[tuple[float, float, float, float]]:
    lc = cfg["locomotion"]
    motion = MotionModel(lc["mobility"], lc["screw_thrust"])
    rows = []
    for alpha in np.linspace(lc["alpha_min"], lc["alpha_max"], lc["alpha_steps"]):
        for fp in np.linspace(0.0, lc["F_p_max"], lc["F_p_steps"]):
            params = RobotParams(lc["p"], lc["m"], lc["g"], lc["mu_eff"], float(fp))
            cyc = peristaltic_cycle(params, InclineState(float(alpha)), lc["stroke"], lc["cycle_time"], motion)
            rows.append((float(alpha), float(fp), cyc.net, cyc.baseline))
    return rows


def cmd_locomotion(args, cfg: Config, run: Run) -> int:
    run.claim("sweep.csv")
    try:
        rows = locomotion_sweep(cfg)
    except ValueError as exc:
        raise ConfigError("locomotion", str(exc)) from None
    cols = list(zip(*rows))
    vio.write_csv(run.path("sweep.csv"), ["alpha_rad", "F_p_n", "net_disp_m_per_cycle", "baseline_disp_m"], cols)
    print(f"{len(rows)} sweep points -> {run.out / 'sweep.csv'}")
    return EXIT_OK


def cmd_datarate(args, cfg: Config, run: Run) -> int:
    d = cfg["datarate"]
    run.claim("datarate.csv", "summary.csv")
    events = vio.read_events(args.events)
    dr = data_rate(events, d["window_us"], d["bytes_per_event"])
    frame_rate = frame_data_rate(events.width, events.height, d["frame_rate_hz"], d["bytes_per_pixel"])
    vio.write_csv(run.path("datarate.csv"), ["t_start_us", "bytes_per_s"], [dr.t_start, dr.bytes_per_s])
    vio.write_csv(run.path("summary.csv"),
                  ["peak_bytes_per_s", "mean_bytes_per_s", "frame_bytes_per_s", "peak_ratio"],
                  [[dr.peak], [dr.mean], [frame_rate], [dr.peak / frame_rate]])
    print(f"peak event rate {dr.peak:.4g} B/s = {dr.peak / frame_rate:.2%} of {d['frame_rate_hz']:g} Hz frames")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "reconstruct": cmd_reconstruct,
    "pipeline": cmd_pipeline,
    "metrics": cmd_metrics,
    "contact": cmd_contact,
    "force": cmd_force,
    "locomotion": cmd_locomotion,
    "datarate": cmd_datarate,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="INI config file (default: $VIBROTAC_CONFIG)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (u64)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: out)")
    common.add_argument("--force", action="store_true", default=argparse.SUPPRESS, help="overwrite outputs")
    common.add_argument("--set", action="append", default=argparse.SUPPRESS, metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")

    parser = argparse.ArgumentParser(prog="vibrotac", parents=[common],
                                     description="Event-based visuotactile sensing toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic event/IMU recording")
    p.add_argument("--scenario", help="preset name (grid entry, default, paper-default, contact-*, sparse)")

    p = sub.add_parser("reconstruct", parents=[common], help="accumulate events into PGM frames")
    p.add_argument("events")
    p.add_argument("--rate", type=int, help="reconstruction rate preset (Hz)")

    p = sub.add_parser("pipeline", parents=[common], help="calibrate, gate and score a recording")
    p.add_argument("events")
    p.add_argument("imu")
    p.add_argument("--gt", help="edge ground truth PGM (default: gt_edges.pgm next to the events)")
    p.add_argument("--rate", type=int, help="reconstruction rate preset (Hz)")
    p.add_argument("--no-frames", action="store_true", help="skip writing retained frames")

    p = sub.add_parser("metrics", parents=[common], help="score a frame directory against ground truth")
    p.add_argument("frames", help="directory with index.csv and frame PGMs")
    p.add_argument("gt", help="ground truth PGM")

    p = sub.add_parser("contact", parents=[common], help="estimate contact surfaces per window")
    p.add_argument("events")
    p.add_argument("imu")
    p.add_argument("--edges", help="edge ground truth PGM used for calibration")
    p.add_argument("--contact-gt", help="contact ground truth PGM")

    p = sub.add_parser("force", parents=[common], help="fit and cross-validate the shear-force model")
    p.add_argument("--data", help="CSV x_px,y_px,r_px,fx_n,fy_n (default: synthetic dataset)")

    sub.add_parser("locomotion", parents=[common], help="sweep incline and pushrod force")

    p = sub.add_parser("datarate", parents=[common], help="event byte rate against a frame camera")
    p.add_argument("events")
    return parser


def main(argv: Optional[Sequence[str]] = None, env: Optional[dict] = None) -> int:
    args = build_parser().parse_args(argv)
    env = os.environ if env is None else env
    try:
        overrides = list(getattr(args, "set", None) or ())
        if getattr(args, "seed", None) is not None:
            overrides.append(f"run.seed={args.seed}")
        cfg = load_config(resolve_config_path(getattr(args, "config", None), env), overrides)
        run = Run(args.command, cfg, Path(getattr(args, "out", "out")), getattr(args, "force", False),
                  [getattr(args, k) for k in ("events", "imu", "frames", "gt", "data") if getattr(args, k, None)])
        code = COMMANDS[args.command](args, cfg, run)
        run.finish()
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CalibrationError, CoverageError) as exc:
        stage = getattr(exc, "stage", "coverage")
        print(f"calibration failed at stage '{stage}': {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except (OSError, vio.FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
