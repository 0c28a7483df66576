"""Quasi-static model of the ring-reinforced silicone actuator.

The rings lock the circumferential stretch at 1, so the wall is in the
pure-shear state ``(lz, 1, 1/lz)``. Axial force balance on the capped tube

    p * pi * r_i^2 = sigma_z(lz) * A_wall / lz

gives the axial stretch ``lz`` for a gauge pressure ``p``; ``A_wall`` is the
reference annulus area and ``1/lz`` its thinning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import materials
from .errors import SaturationError
from .materials import LinearElasticParameters, OgdenParameters
from .rootfind import bisect

MAX_STRETCH = 4.0
MIN_WALL_THICKNESS = 2.0e-3


@dataclass(frozen=True)
class ActuatorSpec:
    inner_radius: float = 5.0e-3
    wall_thickness: float = 2.0e-3
    rest_length: float = 70.0e-3
    ring_count: int = 44
    ring_cross_section_area: float = 0.25e-6
    silicone: OgdenParameters = field(default_factory=lambda: materials.preset("ogden_set3"))
    reinforcement: LinearElasticParameters = field(default_factory=lambda: materials.preset("pet"))

    def __post_init__(self):
        if self.inner_radius <= 0 or self.rest_length <= 0:
            raise ValueError("inner_radius and rest_length must be positive")
        if self.wall_thickness < MIN_WALL_THICKNESS:
            raise ValueError(
                f"wall_thickness {self.wall_thickness * 1e3:g} mm is below the 2 mm fabrication floor"
            )
        if self.ring_count < 0 or self.ring_cross_section_area <= 0:
            raise ValueError("ring_count must be >= 0 and ring area positive")

    @property
    def bore_area(self):
        return math.pi * self.inner_radius**2

    @property
    def wall_area(self):
        ro = self.inner_radius + self.wall_thickness
        return math.pi * (ro * ro - self.inner_radius**2)


@dataclass(frozen=True)
class ActuatorResponse:
    axial_stretch: float
    elongation: float
    chamber_volume: float
    wall_hoop_constraint_force: float


def axial_wall_force(spec: ActuatorSpec, stretch: float) -> float:
    """Axial force (N) carried by the wall when held at ``stretch``."""
    sigma = materials.ogden_planar_stress(spec.silicone, stretch)
    return sigma * spec.wall_area / stretch


def drive_force(spec: ActuatorSpec, p_gauge: float, stretch: float) -> float:
    """Net axial force the pressurised actuator exerts on whatever holds its
    ends at ``stretch``. Zero at the free equilibrium, positive when the
    actuator is held shorter than it wants to be."""
    return p_gauge * spec.bore_area - axial_wall_force(spec, stretch)


def chamber_volume(spec: ActuatorSpec, axial_stretch: float) -> float:
    """Chamber volume (m^3); the bore radius is locked by the rings."""
    return spec.bore_area * spec.rest_length * axial_stretch


def ring_hoop_tension(spec: ActuatorSpec, p_gauge: float, stretch: float) -> float:
    """Tension (N) carried by each ring to hold the bore radius fixed."""
    if spec.ring_count == 0:
        return 0.0
    thickness = spec.wall_thickness / stretch
    s = materials.PrincipalStretches.planar(stretch)
    tau_z, tau_theta, tau_r = materials.ogden_principal_stresses(spec.silicone, s)
    wall_hoop = (tau_theta - tau_r) * thickness
    length = spec.rest_length * stretch
    return (p_gauge * spec.inner_radius - wall_hoop) * length / spec.ring_count


def axial_stretch_for_pressure(spec: ActuatorSpec, p_gauge: float, xtol: float = 1e-12) -> ActuatorResponse:
    """Free axial stretch of the actuator at gauge pressure ``p_gauge`` (Pa)."""
    if p_gauge < 0:
        raise ValueError("gauge pressure must be non-negative")
    if p_gauge == 0:
        stretch = 1.0
    else:
        if drive_force(spec, p_gauge, MAX_STRETCH) > 0:
            raise SaturationError(
                f"no actuator equilibrium below stretch {MAX_STRETCH} at {p_gauge / 1e3:.3f} kPa",
                pressure=p_gauge,
            )
        stretch = bisect(lambda lz: drive_force(spec, p_gauge, lz), 1.0, MAX_STRETCH, xtol=xtol)
    return ActuatorResponse(
        axial_stretch=stretch,
        elongation=spec.rest_length * (stretch - 1.0),
        chamber_volume=chamber_volume(spec, stretch),
        wall_hoop_constraint_force=ring_hoop_tension(spec, p_gauge, stretch),
    )


def max_pressure(spec: ActuatorSpec) -> float:
    """Highest gauge pressure with a free equilibrium inside the stretch bracket."""
    return axial_wall_force(spec, MAX_STRETCH) / spec.bore_area


def barreling_check(spec: ActuatorSpec, p_gauge: float, rings_enabled: bool = True) -> float:
    """Radial stretch of the actuator wall.

    With rings the radius is locked and the answer is exactly 1. Without
    rings the hoop membrane balance ``p r / t = sigma(l_theta)`` is solved
    on the reference geometry, taking the hoop direction as uniaxially loaded.
    """
    if rings_enabled or p_gauge <= 0:
        return 1.0
    hoop = p_gauge * spec.inner_radius / spec.wall_thickness

    def residual(l_theta):
        return materials.ogden_uniaxial_stress(spec.silicone, l_theta) - hoop

    hi = 2.0
    while residual(hi) < 0:
        hi *= 2.0
        if hi > 1e3:
            raise SaturationError("hoop balance has no root", pressure=p_gauge)
    return bisect(residual, 1.0, hi)
