"""Pseudo-rigid-body model of the exoskeleton finger.

The printed shell is reduced to four rigid segments joined by three torsional
springs (proximal, middle, distal). The base segment is clamped horizontally;
positive joint angles bend the finger downwards. Loads are dead loads acting
vertically in the world frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import materials
from .errors import ConvergenceError
from .materials import MooneyRivlinParameters

GRAVITY = 9.81


@dataclass(frozen=True)
class HingeGeometry:
    """Rectangular flexure: ``width`` x ``thickness`` cross-section over ``length``."""

    width: float = 16.0e-3
    thickness: float = 4.0e-3
    length: float = 4.0e-3

    @property
    def second_moment(self):
        return self.width * self.thickness**3 / 12.0


DEFAULT_HINGES = (HingeGeometry(), HingeGeometry(), HingeGeometry())


def stiffness_from_material(hinges, material: MooneyRivlinParameters) -> tuple[float, float, float]:
    """Torsional stiffness ``E0 I / l`` (N m/rad) of each hinge, with the
    small-strain modulus ``E0 = 3 mu0 = 6 (c10 + c01)``."""
    e0 = 3.0 * materials.small_strain_shear_modulus(material)
    return tuple(e0 * h.second_moment / h.length for h in hinges)


def _default_stiffness():
    return stiffness_from_material(DEFAULT_HINGES, materials.preset("mr_set3"))


@dataclass(frozen=True)
class ExoskeletonSpec:
    joint_stiffnesses: tuple[float, float, float] = field(default_factory=_default_stiffness)
    # base->proximal, proximal->middle, middle->distal, distal->tip
    segment_lengths: tuple[float, float, float, float] = (20.0e-3, 45.0e-3, 27.0e-3, 22.0e-3)
    segment_masses: tuple[float, float, float, float] = (2.0e-3, 3.0e-3, 1.8e-3, 1.4e-3)
    material: MooneyRivlinParameters = field(default_factory=lambda: materials.preset("mr_set3"))

    def __post_init__(self):
        if len(self.joint_stiffnesses) != 3 or any(k <= 0 for k in self.joint_stiffnesses):
            raise ValueError("need three positive joint stiffnesses")
        if len(self.segment_lengths) != 4 or any(v <= 0 for v in self.segment_lengths):
            raise ValueError("need four positive segment lengths")
        if len(self.segment_masses) != 4 or any(m < 0 for m in self.segment_masses):
            raise ValueError("need four non-negative segment masses")

    @property
    def joint_x(self):
        """Rest x-coordinates of the proximal, middle and distal joints."""
        return tuple(np.cumsum(self.segment_lengths[:3]))

    @property
    def length(self):
        return float(sum(self.segment_lengths))


@dataclass(frozen=True)
class BendingState:
    joint_angles: tuple[float, float, float]
    fingertip_position: tuple[float, float]
    fingertip_vertical_displacement: float


def joint_positions(spec: ExoskeletonSpec, joint_angles):
    """Positions of proximal, middle, distal joints and the tip, shape (4, 2)."""
    lengths = spec.segment_lengths
    pts = np.empty((4, 2))
    x, y = lengths[0], 0.0
    pts[0] = x, y
    phi = 0.0
    for k in range(3):
        phi += joint_angles[k]
        x += lengths[k + 1] * math.cos(phi)
        y -= lengths[k + 1] * math.sin(phi)
        pts[k + 1] = x, y
    return pts


def forward_kinematics(spec: ExoskeletonSpec, joint_angles) -> tuple[float, float]:
    x, y = joint_positions(spec, joint_angles)[3]
    return float(x), float(y)


def _point_loads(spec, tip_load, include_gravity, load_at):
    """List of (segment index 1..3, fraction along segment, downward force)."""
    loads = []
    if include_gravity:
        for k in (1, 2, 3):
            loads.append((k, 0.5, spec.segment_masses[k] * GRAVITY))
    if tip_load:
        if load_at == "distal_joint":
            loads.append((2, 1.0, tip_load))
        elif load_at == "tip":
            loads.append((3, 1.0, tip_load))
        else:
            raise ValueError(f"unknown load point {load_at!r}")
    return loads


def _load_point_height(spec, theta, seg, frac):
    lengths = spec.segment_lengths
    phi = np.cumsum(theta)
    y = 0.0
    for k in range(1, seg + 1):
        ell = lengths[k] * (frac if k == seg else 1.0)
        y -= ell * math.sin(phi[k - 1])
    return y


def _energy_terms(spec, theta, loads):
    """Potential energy, gradient and Hessian with respect to the joint angles."""
    k = np.asarray(spec.joint_stiffnesses)
    lengths = spec.segment_lengths
    phi = np.cumsum(theta)
    energy = 0.5 * float(np.dot(k, theta * theta))
    grad = k * theta
    hess = np.diag(k).astype(float)
    for seg, frac, force in loads:
        ell = [lengths[m] * (frac if m == seg else 1.0) for m in range(1, seg + 1)]
        y = -sum(e * math.sin(phi[m]) for m, e in enumerate(ell))
        energy += force * y
        for j in range(seg):
            grad[j] -= force * sum(ell[m] * math.cos(phi[m]) for m in range(j, seg))
            for i in range(seg):
                lo = max(i, j)
                hess[i, j] += force * sum(ell[m] * math.sin(phi[m]) for m in range(lo, seg))
    return energy, grad, hess


def equilibrium_angles(spec: ExoskeletonSpec, loads, tol=1e-11, max_iter=100, theta0=None):
    """Minimise the potential energy by damped Newton iteration."""
    theta = np.zeros(3) if theta0 is None else np.array(theta0, dtype=float)
    if not loads:
        return theta
    energy, grad, hess = _energy_terms(spec, theta, loads)
    for _ in range(max_iter):
        if np.max(np.abs(grad)) < tol:
            return theta
        step = np.linalg.solve(hess, -grad)
        t = 1.0
        while True:
            trial = theta + t * step
            e_new, g_new, h_new = _energy_terms(spec, trial, loads)
            decreased = e_new <= energy + 1e-4 * t * float(np.dot(grad, step))
            if decreased or np.max(np.abs(g_new)) < np.max(np.abs(grad)) or t < 1e-8:
                break
            t *= 0.5
        theta, energy, grad, hess = trial, e_new, g_new, h_new
    residual = float(np.max(np.abs(grad)))
    if residual < tol:
        return theta
    raise ConvergenceError(f"exoskeleton equilibrium did not converge (residual {residual:.3e} N m)", residual)


def deflection_under_load(
    spec: ExoskeletonSpec,
    tip_load: float,
    include_gravity: bool = True,
    load_at: str = "distal_joint",
    tol: float = 1e-11,
) -> BendingState:
    """Static deflection under a hung weight ``tip_load`` (N).

    Matching the cantilever test, the weight hangs from the distal joint by
    default; the reported displacement is measured at the fingertip.
    """
    if tip_load < 0:
        raise ValueError("tip_load must be non-negative")
    loads = _point_loads(spec, tip_load, include_gravity, load_at)
    theta = equilibrium_angles(spec, loads, tol=tol)
    x, y = forward_kinematics(spec, theta)
    return BendingState(tuple(float(v) for v in theta), (x, y), -y)


def residual_torques(spec: ExoskeletonSpec, joint_angles, tip_load, include_gravity=True, load_at="distal_joint"):
    loads = _point_loads(spec, tip_load, include_gravity, load_at)
    return _energy_terms(spec, np.asarray(joint_angles, dtype=float), loads)[1]


def spring_energy(spec: ExoskeletonSpec, joint_angles) -> float:
    k = np.asarray(spec.joint_stiffnesses)
    th = np.asarray(joint_angles)
    return 0.5 * float(np.dot(k, th * th))


def loading_path_work(spec: ExoskeletonSpec, tip_load, include_gravity=True, steps=200, load_at="distal_joint"):
    """Work done by all dead loads when ramped together from zero to full value.

    The path is traced by incremental loading and integrated with the
    trapezoidal rule. Returns ``(work, spring_energy_at_end)``.
    """
    full = _point_loads(spec, tip_load, include_gravity, load_at)
    theta = np.zeros(3)
    heights = [0.0 for _ in full]
    scale_prev = 0.0
    work = 0.0
    for n in range(1, steps + 1):
        scale = n / steps
        loads = [(seg, frac, scale * f) for seg, frac, f in full]
        theta = equilibrium_angles(spec, loads, theta0=theta)
        for i, (seg, frac, f) in enumerate(full):
            h = _load_point_height(spec, theta, seg, frac)
            work += 0.5 * (scale + scale_prev) * f * (heights[i] - h)
            heights[i] = h
        scale_prev = scale
    return work, spring_energy(spec, theta)


def mass_consistency(spec: ExoskeletonSpec, printed_volume: float) -> float:
    """Ratio of the modelled segment mass to ``density * printed_volume``."""
    return sum(spec.segment_masses) / (spec.material.density * printed_volume)
