"""Actuator/exoskeleton coupling: pressure to joint angles, hysteresis, blocked force.

The actuator runs along the finger at an offset (moment arm) ``r_j`` from
each joint axis. Its elongation is taken up by joint rotation,

    L0 (lz - 1) = sum_j theta_j r_j,

and its net drive force ``T`` loads every joint spring, ``k_j theta_j = T r_j``.
Eliminating the angles leaves one scalar equation in the actuator stretch,
solved by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import actuator as act
from . import exoskeleton as exo
from .actuator import ActuatorSpec
from .errors import SaturationError
from .exoskeleton import ExoskeletonSpec
from .rootfind import bisect


@dataclass(frozen=True)
class HysteresisParameters:
    """Two-branch rate-independent hysteresis.

    ``inflate_gain`` scales the backbone to give the inflating branch.
    ``deflate_offset`` (Pa) shifts the deflating branch: it is the backbone
    evaluated at ``p + deflate_offset * (1 - exp(-p / deflate_offset))``.
    ``transition_slope`` (rad/Pa) is how fast the angle falls right after a
    pressure maximum, before it meets the deflating branch.
    """

    inflate_gain: float = 1.0
    deflate_offset: float = 10.0e3
    transition_slope: float = 4.0e-6

    def __post_init__(self):
        if self.deflate_offset < 0 or self.transition_slope < 0 or self.inflate_gain <= 0:
            raise ValueError("hysteresis parameters must be non-negative (gain positive)")


@dataclass(frozen=True)
class FingerSpec:
    actuator: ActuatorSpec = field(default_factory=ActuatorSpec)
    exoskeleton: ExoskeletonSpec = field(default_factory=ExoskeletonSpec)
    # defaults are the shipped calibration (95 deg at 75 kPa, plateau at 80 kPa)
    moment_arms: tuple[float, float, float] = (11.79e-3, 8.839e-3, 5.893e-3)
    hysteresis: HysteresisParameters = field(default_factory=HysteresisParameters)
    # multiplies the standalone exoskeleton joint stiffness once the actuator is inside
    stiffness_scale: float = 0.4898
    # largest axial force the shell can take from the actuator before it slips
    drive_force_limit: float = 4.857
    max_pressure: float = 100.0e3

    def __post_init__(self):
        if len(self.moment_arms) != 3 or any(r <= 0 for r in self.moment_arms):
            raise ValueError("moment_arms must be three positive offsets")
        if self.stiffness_scale <= 0:
            raise ValueError("stiffness_scale must be positive")
        if self.drive_force_limit <= 0:
            raise ValueError("drive_force_limit must be positive")

    @property
    def joint_stiffnesses(self):
        return tuple(self.stiffness_scale * k for k in self.exoskeleton.joint_stiffnesses)

    @property
    def compliance(self):
        """Actuator-end compliance of the joint chain, ``sum r_j^2 / k_j`` (m/N)."""
        return sum(r * r / k for r, k in zip(self.moment_arms, self.joint_stiffnesses))


@dataclass(frozen=True)
class Reversal:
    pressure: float
    angle: float


@dataclass(frozen=True)
class FingerState:
    pressure: float
    joint_angles: tuple[float, float, float]
    bending_angle: float
    fingertip_displacement: float
    actuator_stretch: float = 1.0
    drive_force: float = 0.0
    branch: str = "backbone"
    branch_memory: Optional[Reversal] = None


def _angles_for_force(spec: FingerSpec, force):
    return tuple(force * r / k for r, k in zip(spec.moment_arms, spec.joint_stiffnesses))


def _state_from_angles(spec, p, angles, stretch, force, branch="backbone", memory=None):
    _, y = exo.forward_kinematics(spec.exoskeleton, angles)
    return FingerState(
        pressure=p,
        joint_angles=tuple(float(a) for a in angles),
        bending_angle=float(sum(angles)),
        fingertip_displacement=-y,
        actuator_stretch=stretch,
        drive_force=force,
        branch=branch,
        branch_memory=memory,
    )


def coupled_stretch(spec: FingerSpec, p_gauge: float, xtol: float = 1e-13) -> float:
    """Actuator stretch at which drive force and joint-chain reaction agree."""
    if p_gauge == 0:
        return 1.0
    a = spec.actuator
    free = act.axial_stretch_for_pressure(a, p_gauge).axial_stretch
    chain = a.rest_length / spec.compliance

    def residual(lz):
        return act.drive_force(a, p_gauge, lz) - chain * (lz - 1.0)

    if residual(free) >= 0:
        # free stretch is within its own tolerance of the answer
        return free
    return bisect(residual, 1.0, free, xtol=xtol)


def equilibrium_bend(spec: FingerSpec, p_gauge: float) -> FingerState:
    """Hysteresis-free equilibrium (backbone) at gauge pressure ``p_gauge``."""
    if not 0 <= p_gauge <= spec.max_pressure:
        raise ValueError(f"pressure {p_gauge} Pa outside [0, {spec.max_pressure}]")
    if p_gauge == 0:
        return _state_from_angles(spec, 0.0, (0.0, 0.0, 0.0), 1.0, 0.0)
    stretch = coupled_stretch(spec, p_gauge)
    # bisection leaves a residual of order xtol; never let it pull the joints backwards
    force = max(act.drive_force(spec.actuator, p_gauge, stretch), 0.0)
    if force > spec.drive_force_limit:
        # the actuator slips in the shell; the joints only see the limit
        force = spec.drive_force_limit
    angles = _angles_for_force(spec, force)
    if any(not 0 <= a <= math.pi for a in angles):
        raise SaturationError(f"joint angle outside [0, pi] at {p_gauge / 1e3:.2f} kPa", pressure=p_gauge)
    return _state_from_angles(spec, p_gauge, angles, stretch, force)


def compatibility_error(spec: FingerSpec, state: FingerState) -> float:
    """``|actuator elongation - sum theta_j r_j|`` in metres."""
    elongation = spec.actuator.rest_length * (state.actuator_stretch - 1.0)
    return abs(elongation - sum(t * r for t, r in zip(state.joint_angles, spec.moment_arms)))


# ---------------------------------------------------------------------------
# hysteresis


def deflate_shift(params: HysteresisParameters, p: float) -> float:
    if params.deflate_offset == 0:
        return 0.0
    return params.deflate_offset * -math.expm1(-p / params.deflate_offset)


class HysteresisTracker:
    """Streams pressures and returns the bending angle on the current branch.

    The only memory is the last pressure reversal, so the output depends on
    the sequence of pressure extrema alone: repeated or in-between samples
    do not change it.
    """

    def __init__(self, backbone: Callable[[float], float], params: HysteresisParameters, p_max: float):
        self.backbone = backbone
        self.params = params
        self.p_max = p_max
        self.last_pressure = 0.0
        self.direction = 0
        self.reversal = Reversal(0.0, 0.0)
        self.angle = 0.0

    def lower(self, p):
        return self.params.inflate_gain * self.backbone(min(max(p, 0.0), self.p_max))

    def upper(self, p):
        p = max(p, 0.0)
        return self.params.inflate_gain * self.backbone(min(p + deflate_shift(self.params, p), self.p_max))

    def branch_angle(self, p):
        rev = self.reversal
        lo = self.lower(p)
        if self.direction >= 0:
            return max(lo, min(self.upper(p), rev.angle))
        line = rev.angle - self.params.transition_slope * (rev.pressure - p)
        return max(lo, min(self.upper(p), line))

    def update(self, p: float) -> float:
        if p == self.last_pressure:
            return self.angle
        direction = 1 if p > self.last_pressure else -1
        if direction != self.direction:
            self.reversal = Reversal(self.last_pressure, self.angle)
            self.direction = direction
        self.last_pressure = p
        self.angle = self.branch_angle(p)
        return self.angle


def _backbone_angle(spec):
    return lambda p: equilibrium_bend(spec, p).bending_angle


def _state_for_angle(spec: FingerSpec, p, angle, branch, memory):
    """Joint configuration on the backbone that produces ``angle``."""
    gain = spec.hysteresis.inflate_gain
    target = angle / gain
    if target <= 0:
        return _state_from_angles(spec, p, (0.0, 0.0, 0.0), 1.0, 0.0, branch, memory)
    top = equilibrium_bend(spec, spec.max_pressure).bending_angle
    if target >= top:
        p_eq = spec.max_pressure
    else:
        p_eq = bisect(lambda q: equilibrium_bend(spec, q).bending_angle - target, 0.0, spec.max_pressure, xtol=1e-9)
    base = equilibrium_bend(spec, p_eq)
    angles = tuple(gain * a for a in base.joint_angles)
    return _state_from_angles(spec, p, angles, base.actuator_stretch, base.drive_force, branch, memory)


def bend_with_hysteresis(spec: FingerSpec, pressure_history) -> FingerState:
    """Finger state after following ``pressure_history`` (Pa, starting at 0)."""
    history = list(pressure_history)
    if not history or history[0] != 0:
        raise ValueError("pressure history must start at 0 Pa")
    tracker = HysteresisTracker(_backbone_angle(spec), spec.hysteresis, spec.max_pressure)
    for p in history:
        tracker.update(p)
    if tracker.direction < 0:
        branch = "deflating"
    elif tracker.direction > 0:
        branch = "inflating"
    else:
        branch = "backbone"
    return _state_for_angle(spec, tracker.last_pressure, tracker.angle, branch, tracker.reversal)


def hysteresis_loop(spec: FingerSpec, p_peak: float, step: float = 1.0e3):
    """Angles along the cycle 0 -> p_peak -> 0. Returns ``(pressures, angles, branch)``."""
    n = int(round(p_peak / step))
    up = np.linspace(0.0, p_peak, n + 1)
    down = up[::-1][1:]
    tracker = HysteresisTracker(_backbone_angle(spec), spec.hysteresis, spec.max_pressure)
    pressures, angles, branches = [], [], []
    for p, name in [(p, "inflating") for p in up] + [(p, "deflating") for p in down]:
        pressures.append(float(p))
        angles.append(tracker.update(float(p)))
        branches.append(name)
    return np.array(pressures), np.array(angles), branches


def loop_area(pressures, angles):
    """Signed area enclosed by a closed pressure-angle loop (Pa rad); positive
    when the return path lies above the outgoing one."""
    p = np.asarray(pressures)
    a = np.asarray(angles)
    return float(-0.5 * np.sum((p[1:] - p[:-1]) * (a[1:] + a[:-1])))


class BackboneTable:
    """Piecewise-linear lookup of the backbone, for the time-stepped plant."""

    def __init__(self, spec: FingerSpec, step: float = 250.0):
        n = int(round(spec.max_pressure / step))
        self.pressures = np.linspace(0.0, spec.max_pressure, n + 1)
        states = [equilibrium_bend(spec, float(p)) for p in self.pressures]
        self.angles = np.array([s.bending_angle for s in states])
        self.stretches = np.array([s.actuator_stretch for s in states])
        self.step = float(self.pressures[1] - self.pressures[0])
        self._p = self.pressures.tolist()
        self._a = self.angles.tolist()
        self._s = self.stretches.tolist()

    def _interp(self, values, p):
        if p <= 0.0:
            return values[0]
        i = int(p / self.step)
        if i >= len(values) - 1:
            return values[-1]
        f = (p - self._p[i]) / self.step
        return values[i] + f * (values[i + 1] - values[i])

    def angle(self, p):
        return self._interp(self._a, p)

    def stretch(self, p):
        return self._interp(self._s, p)


# ---------------------------------------------------------------------------
# blocked force


@dataclass(frozen=True)
class ContactResult:
    force: float
    reachable: bool
    contact_pressure: Optional[float] = None


def fingertip_drop(spec: FingerSpec, p_gauge: float) -> float:
    return equilibrium_bend(spec, p_gauge).fingertip_displacement


def contact_pressure(spec: FingerSpec, obstacle_distance: float) -> Optional[float]:
    """Pressure at which the free fingertip first touches a surface
    ``obstacle_distance`` below the straight finger; ``None`` if never."""
    if fingertip_drop(spec, spec.max_pressure) < obstacle_distance:
        return None
    return bisect(lambda p: fingertip_drop(spec, p) - obstacle_distance, 0.0, spec.max_pressure, xtol=1e-6)


def fingertip_force(spec: FingerSpec, p_gauge: float, obstacle_distance: float = 40.0e-3, p_contact=None) -> ContactResult:
    """Blocked fingertip force (N) against a rigid surface below the finger.

    Below the contact pressure the finger bends freely and the force is
    zero. Past contact the configuration is held; the extra actuator drive
    force above its value at contact is passed to the surface through the
    joint moment arms (least-squares torque balance), and stops growing once
    the drive force reaches ``drive_force_limit``.
    """
    if obstacle_distance <= 0:
        raise ValueError("obstacle_distance must be positive")
    if p_contact is None:
        p_contact = contact_pressure(spec, obstacle_distance)
    if p_contact is None:
        return ContactResult(0.0, False, None)
    if p_gauge <= p_contact:
        return ContactResult(0.0, True, p_contact)
    at_contact = equilibrium_bend(spec, p_contact)
    pts = exo.joint_positions(spec.exoskeleton, at_contact.joint_angles)
    levers = pts[3, 0] - pts[:3, 0]
    gain = float(np.dot(spec.moment_arms, levers) / np.dot(levers, levers))
    if gain <= 0:
        return ContactResult(0.0, True, p_contact)
    blocked = act.drive_force(spec.actuator, p_gauge, at_contact.actuator_stretch)
    blocked = min(blocked, spec.drive_force_limit)
    return ContactResult(max(0.0, blocked - at_contact.drive_force) * gain, True, p_contact)


def force_curve(spec: FingerSpec, pressures, obstacle_distance: float = 40.0e-3):
    pc = contact_pressure(spec, obstacle_distance)
    return np.array([fingertip_force(spec, float(p), obstacle_distance, p_contact=pc).force if pc is not None else 0.0 for p in pressures])


def with_updates(spec: FingerSpec, **changes) -> FingerSpec:
    return replace(spec, **changes)
