"""Screw-peristalsis force balance, cycle kinematics and quantised steering."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .tactile import ForceEstimate


@dataclass(frozen=True)
class RobotParams:
    """Placeholder defaults; the real robot's values are not published."""

    p: float = 0.03
    m: float = 1.5
    g: float = 9.81
    mu_eff: float = 3.0
    F_p: float = 4.0

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("screw pitch p must be > 0")
        if not self.m > 0:
            raise ValueError("mass m must be > 0")
        if not self.g > 0:
            raise ValueError("g must be > 0")
        if self.mu_eff < 0:
            raise ValueError("friction mu_eff must be >= 0")
        if self.F_p < 0:
            raise ValueError("pushrod force F_p must be >= 0")


@dataclass(frozen=True)
class InclineState:
    alpha: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not -math.pi / 2 <= self.alpha <= math.pi / 2:
            raise ValueError("alpha must lie in [-pi/2, pi/2]")


def screw_displacement(params: RobotParams, theta: float) -> float:
    """Axial advance of the shell for a rotation ``theta`` (rad)."""
    return params.p * theta / (2 * math.pi)


def potential_energy(params: RobotParams, state: InclineState, l: float) -> float:
    """Gravitational energy gained by an axial displacement ``l`` up the incline."""
    return params.m * params.g * l * math.sin(state.alpha)


def propulsion_force(params: RobotParams, state: InclineState) -> float:
    """Gradient of :func:`potential_energy` along the robot axis."""
    return params.m * params.g * math.sin(state.alpha)


def phase_forces(params: RobotParams, state: InclineState) -> tuple[float, float]:
    """Net axial force during pushrod extension and retraction."""
    f = propulsion_force(params, state)
    return f + params.F_p - params.mu_eff, f - params.F_p - params.mu_eff


@dataclass(frozen=True)
class MotionModel:
    """Overdamped motion with stiction.

    Velocity is ``mobility * max(0, F)`` for the net force ``F`` of a phase
    plus a constant screw thrust. During extension, a pushrod stroke is
    transferred to the front whenever the phase force is positive (the tail
    is anchored); retraction only pulls the tail up and never moves the
    front backwards.
    """

    mobility: float = 4e-3
    screw_thrust: float = 4.0

    def __post_init__(self):
        if self.mobility < 0 or self.screw_thrust < 0:
            raise ValueError("mobility and screw_thrust must be >= 0")


@dataclass(frozen=True)
class CycleResult:
    extension: float
    retraction: float
    baseline: float

    @property
    def net(self) -> float:
        return self.extension + self.retraction


def peristaltic_cycle(params: RobotParams, state: InclineState, stroke: float, cycle_time: float,
                      motion_model: MotionModel = MotionModel()) -> CycleResult:
    """Front displacement over one extension/retraction cycle (two equal phases).

    ``baseline`` is the displacement of continuous rotation alone
    (``F_p = 0``) over the same time.
    """
    if not stroke > 0:
        raise ValueError("stroke must be > 0")
    if not cycle_time > 0:
        raise ValueError("cycle_time must be > 0")
    half = 0.5 * cycle_time
    mu, thrust = motion_model.mobility, motion_model.screw_thrust
    f_ext, f_ret = phase_forces(params, state)
    ext = mu * max(0.0, f_ext + thrust) * half
    if params.F_p > 0 and f_ext + thrust > 0:
        ext += stroke
    ret = mu * max(0.0, f_ret + thrust) * half
    f0 = propulsion_force(params, state) - params.mu_eff + thrust
    base = mu * max(0.0, f0) * cycle_time
    return CycleResult(ext, ret, base)


def traversal_time(distance: float, params: RobotParams, state: InclineState, stroke: float,
                   cycle_time: float, motion_model: MotionModel = MotionModel(),
                   pushrod: bool = True) -> float:
    """Time to cover ``distance``; infinite when the robot does not advance."""
    cyc = peristaltic_cycle(params, state, stroke, cycle_time, motion_model)
    d = cyc.net if pushrod else cyc.baseline
    return math.inf if d <= 0 else distance / d * cycle_time


# ---------------------------------------------------------------------------
# steering


class Steer(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    NONE = "none"


@dataclass(frozen=True)
class SteeringConfig:
    quant_bins: int = 8
    force_threshold: float = 0.2
    trigger_rate: float = 1.0
    step_deg: float = 30.0

    def __post_init__(self):
        if self.quant_bins < 2:
            raise ValueError("quant_bins must be >= 2")
        if self.force_threshold < 0:
            raise ValueError("force_threshold must be >= 0")


def direction_sector(angle: float, bins: int) -> int:
    """Index of the sector (centred on ``i * 2pi / bins``) containing ``angle``.

    A direction exactly on a boundary goes to the lower index; the boundary
    just below 2pi belongs to sector 0.
    """
    w = 2 * math.pi / bins
    phi = angle % (2 * math.pi)
    i = math.ceil(phi / w - 0.5)
    return 0 if i >= bins or (i == bins - 1 and phi == (bins - 0.5) * w) else i


def steer_command(force: ForceEstimate, motor_angle: float, quant_bins: int = 8,
                  force_threshold: float = 0.2) -> Steer:
    """Left/right command from a sensor-frame shear force.

    The force is rotated by ``-motor_angle`` into the world frame (x right,
    y forward) and its direction quantised; sectors right of the forward
    axis map to RIGHT, left of it to LEFT, and the forward/backward sectors
    to NONE.
    """
    if quant_bins < 2:
        raise ValueError("quant_bins must be >= 2")
    fx, fy = force
    if math.hypot(fx, fy) < force_threshold or (fx == 0 and fy == 0):
        return Steer.NONE
    angle = math.atan2(fy, fx) - motor_angle
    i = direction_sector(angle, quant_bins)
    q = 4 * i
    if q == quant_bins or q == 3 * quant_bins:
        return Steer.NONE
    if quant_bins < q < 3 * quant_bins:
        return Steer.LEFT
    return Steer.RIGHT


def servo_angles(commands, config: SteeringConfig = SteeringConfig()) -> list[float]:
    """Accumulated servo angle (deg) after each trigger (one command per trigger)."""
    angle, out = 0.0, []
    for c in commands:
        c = Steer(c)
        if c is Steer.RIGHT:
            angle += config.step_deg
        elif c is Steer.LEFT:
            angle -= config.step_deg
        out.append(angle)
    return out
