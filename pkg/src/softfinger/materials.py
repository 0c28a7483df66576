"""Constitutive models for the finger materials.

Silicone actuator: incompressible Ogden, ``W = sum_i mu_i/alpha_i (l1^a_i + l2^a_i + l3^a_i - 3)``.
TPU exoskeleton: incompressible Mooney-Rivlin, ``W = c10 (I1 - 3) + c01 (I2 - 3)``.
PET reinforcement: linear elastic.

Everything is in SI units. Table values given in MPa or g/cm^3 are converted
when the presets are built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

from .errors import ModelDomainError

MPA = 1.0e6
G_PER_CM3 = 1000.0  # -> kg/m^3


@dataclass(frozen=True)
class OgdenParameters:
    """Ogden series: ``terms`` is a tuple of ``(alpha_i, mu_i)`` pairs, ``mu_i`` in Pa.

    ``d1`` is the tabulated incompressibility value. The reduced-order models
    enforce J = 1 exactly, so it is carried for reference only.
    """

    terms: tuple[tuple[float, float], ...]
    d1: float = 1.0e5
    density: float = 1070.0
    name: str = ""

    def __post_init__(self):
        if not 1 <= len(self.terms) <= 3:
            raise ValueError("Ogden model needs 1 to 3 terms")
        for alpha, mu in self.terms:
            if alpha == 0 or not math.isfinite(alpha) or not math.isfinite(mu):
                raise ValueError(f"invalid Ogden term (alpha={alpha}, mu={mu})")
        if small_strain_shear_modulus(self) <= 0:
            raise ValueError("Ogden parameters are unstable at the identity (mu0 <= 0)")
        if self.density <= 0:
            raise ValueError("density must be positive")


@dataclass(frozen=True)
class MooneyRivlinParameters:
    c10: float
    c01: float
    density: float
    name: str = ""

    def __post_init__(self):
        if self.c10 + self.c01 <= 0:
            raise ValueError("Mooney-Rivlin parameters need c10 + c01 > 0")
        if self.density <= 0:
            raise ValueError("density must be positive")


@dataclass(frozen=True)
class LinearElasticParameters:
    youngs_modulus: float
    poisson_ratio: float
    yield_stress: float
    density: float
    name: str = ""

    def __post_init__(self):
        if self.youngs_modulus <= 0:
            raise ValueError("Young's modulus must be positive")
        if not 0 < self.poisson_ratio < 0.5:
            raise ValueError("Poisson ratio must lie in (0, 0.5)")


class PrincipalStretches(NamedTuple):
    l1: float
    l2: float
    l3: float

    @classmethod
    def uniaxial(cls, stretch):
        """Incompressible uniaxial state ``(l, 1/sqrt(l), 1/sqrt(l))``."""
        lateral = 1.0 / math.sqrt(stretch)
        return cls(stretch, lateral, lateral)

    @classmethod
    def equibiaxial(cls, stretch):
        return cls(stretch, stretch, 1.0 / (stretch * stretch))

    @classmethod
    def planar(cls, stretch):
        """Pure-shear state ``(l, 1, 1/l)``: one direction held fixed."""
        return cls(stretch, 1.0, 1.0 / stretch)


Material = Union[OgdenParameters, MooneyRivlinParameters, LinearElasticParameters]


def _check_stretches(s):
    if not all(math.isfinite(v) and v > 0 for v in s):
        raise ModelDomainError(f"stretches must be finite and positive, got {tuple(s)}")


def _finite(value, what):
    if not math.isfinite(value):
        raise ModelDomainError(f"{what} is not finite; stretch outside model validity")
    return value


def ogden_energy(p: OgdenParameters, s) -> float:
    """Strain-energy density in J/m^3 for principal stretches ``s``."""
    l1, l2, l3 = s
    _check_stretches(s)
    try:
        w = sum(mu / a * (l1**a + l2**a + l3**a - 3.0) for a, mu in p.terms)
    except OverflowError as exc:
        raise ModelDomainError("Ogden energy overflow") from exc
    return _finite(w, "Ogden energy")


def ogden_principal_stresses(p: OgdenParameters, s) -> tuple[float, float, float]:
    """Deviatoric principal Cauchy stresses ``l_i dW/dl_i``.

    The true Cauchy stresses differ from these by a common hydrostatic
    pressure fixed by the boundary conditions.
    """
    _check_stretches(s)
    out = tuple(sum(mu * li**a for a, mu in p.terms) for li in s)
    for v in out:
        _finite(v, "Ogden stress")
    return out


def ogden_uniaxial_stress(p: OgdenParameters, stretch: float) -> float:
    """Cauchy stress (Pa) in incompressible uniaxial tension/compression."""
    if not stretch > 0:
        raise ModelDomainError(f"stretch must be positive, got {stretch}")
    try:
        sigma = sum(mu * (stretch**a - stretch ** (-0.5 * a)) for a, mu in p.terms)
    except OverflowError as exc:
        raise ModelDomainError("Ogden stress overflow") from exc
    return _finite(sigma, "Ogden uniaxial stress")


def ogden_planar_stress(p: OgdenParameters, stretch: float) -> float:
    """Cauchy stress along the stretched axis of the pure-shear state ``(l, 1, 1/l)``
    with zero stress across the thin direction."""
    if not stretch > 0:
        raise ModelDomainError(f"stretch must be positive, got {stretch}")
    try:
        sigma = sum(mu * (stretch**a - stretch ** (-a)) for a, mu in p.terms)
    except OverflowError as exc:
        raise ModelDomainError("Ogden stress overflow") from exc
    return _finite(sigma, "Ogden planar stress")


def _invariants(s):
    l1, l2, l3 = (v * v for v in s)
    return l1 + l2 + l3, l1 * l2 + l2 * l3 + l1 * l3


def mr_energy(p: MooneyRivlinParameters, s) -> float:
    _check_stretches(s)
    i1, i2 = _invariants(s)
    return _finite(p.c10 * (i1 - 3.0) + p.c01 * (i2 - 3.0), "Mooney-Rivlin energy")


def mr_uniaxial_stress(p: MooneyRivlinParameters, stretch: float) -> float:
    """Cauchy stress ``2 (c10 + c01/l)(l^2 - 1/l)`` in incompressible uniaxial loading."""
    if not stretch > 0:
        raise ModelDomainError(f"stretch must be positive, got {stretch}")
    sigma = 2.0 * (p.c10 + p.c01 / stretch) * (stretch * stretch - 1.0 / stretch)
    return _finite(sigma, "Mooney-Rivlin uniaxial stress")


def small_strain_shear_modulus(model: Material) -> float:
    """Initial shear modulus mu0 (Pa) of any of the three material families."""
    if isinstance(model, OgdenParameters):
        return 0.5 * sum(a * mu for a, mu in model.terms)
    if isinstance(model, MooneyRivlinParameters):
        return 2.0 * (model.c10 + model.c01)
    if isinstance(model, LinearElasticParameters):
        return model.youngs_modulus / (2.0 * (1.0 + model.poisson_ratio))
    raise TypeError(f"unsupported material {type(model).__name__}")


def energy(model: Material, s) -> float:
    if isinstance(model, OgdenParameters):
        return ogden_energy(model, s)
    if isinstance(model, MooneyRivlinParameters):
        return mr_energy(model, s)
    raise TypeError(f"no strain-energy function for {type(model).__name__}")


def uniaxial_stress(model: Material, stretch: float) -> float:
    if isinstance(model, OgdenParameters):
        return ogden_uniaxial_stress(model, stretch)
    if isinstance(model, MooneyRivlinParameters):
        return mr_uniaxial_stress(model, stretch)
    if isinstance(model, LinearElasticParameters):
        return model.youngs_modulus * (stretch - 1.0)
    raise TypeError(f"unsupported material {type(model).__name__}")


# Silicone density is not tabulated alongside the Ogden sets; 1.07 g/cm^3 is
# the vendor figure for platinum-cure silicone of this shore hardness.
SILICONE_DENSITY = 1.07 * G_PER_CM3

PRESETS: dict[str, Material] = {
    "ogden_set1": OgdenParameters(
        terms=((1.55, 107900.00), (7.86, 21.47), (-1.91, -87100.00)),
        d1=1.0e5,
        density=SILICONE_DENSITY,
        name="ogden_set1",
    ),
    "ogden_set2": OgdenParameters(
        terms=((1.05, 1.50e5), (4.00, 60.00), (-1.60, -1300.00)),
        d1=1.0e5,
        density=SILICONE_DENSITY,
        name="ogden_set2",
    ),
    "ogden_set3": OgdenParameters(
        terms=((1.05, 1.12e5), (4.00, 45.00), (-1.60, -975.00)),
        d1=1.0e5,
        density=SILICONE_DENSITY,
        name="ogden_set3",
    ),
    "mr_set1": MooneyRivlinParameters(0.677 * MPA, 1.621 * MPA, 1.19 * G_PER_CM3, "mr_set1"),
    "mr_set2": MooneyRivlinParameters(0.300 * MPA, 0.750 * MPA, 0.83 * G_PER_CM3, "mr_set2"),
    "mr_set3": MooneyRivlinParameters(0.210 * MPA, 0.525 * MPA, 0.83 * G_PER_CM3, "mr_set3"),
    "pet": LinearElasticParameters(
        youngs_modulus=2.76e9,
        poisson_ratio=0.417,
        yield_stress=5.44e9,
        density=1541.0,
        name="pet",
    ),
}


def preset(name: str) -> Material:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown material preset {name!r}; known: {sorted(PRESETS)}") from None
