import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from softfinger import materials as m
from softfinger.errors import ModelDomainError

HYPERELASTIC = ["ogden_set1", "ogden_set2", "ogden_set3", "mr_set1", "mr_set2", "mr_set3"]

# frozen from tests/oracles.py
OGDEN3_ENERGY_UNIAXIAL_1_5 = 15915.350652109382
OGDEN3_STRESS_UNIAXIAL_1_5 = 81962.0979323736
MU0 = {
    "ogden_set1": 166887.3771,
    "ogden_set2": 79910.0,
    "ogden_set3": 59670.0,
    "mr_set1": 4.596e6,
    "mr_set2": 2.1e6,
    "mr_set3": 1.47e6,
}
MR1_ENERGY_UNIAXIAL_1_2 = 225307.7777777774
MR2_ENERGY_EQUIBIAXIAL_1_1 = 118648.45809712535
MR3_STRESS_UNIAXIAL_1_3 = 1130421.3017751481


def fd_stress(mat, lam, h=1e-6):
    """Uniaxial Cauchy stress as lam * dW/dlam, by central differences."""
    w = lambda x: m.energy(mat, m.PrincipalStretches.uniaxial(x))  # noqa: E731
    return lam * (w(lam * (1 + h)) - w(lam * (1 - h))) / (2 * lam * h)


def test_tabulated_parameters():
    s1 = m.preset("ogden_set1")
    assert s1.terms == ((1.55, 107900.0), (7.86, 21.47), (-1.91, -87100.0))
    assert s1.d1 == 1e5
    assert m.preset("ogden_set3").terms == ((1.05, 1.12e5), (4.0, 45.0), (-1.6, -975.0))
    mr1 = m.preset("mr_set1")
    assert (mr1.c10, mr1.c01, mr1.density) == (0.677e6, 1.621e6, 1190.0)
    assert m.preset("mr_set2").density == m.preset("mr_set3").density == 830.0
    pet = m.preset("pet")
    assert (pet.youngs_modulus, pet.poisson_ratio, pet.yield_stress, pet.density) == (2.76e9, 0.417, 5.44e9, 1541.0)


def test_unknown_preset_lists_known():
    with pytest.raises(KeyError, match="ogden_set1"):
        m.preset("ogden_set9")


@pytest.mark.parametrize("name", list(MU0))
def test_small_strain_modulus(name):
    assert m.small_strain_shear_modulus(m.preset(name)) == pytest.approx(MU0[name], rel=1e-12)


@pytest.mark.parametrize("name", ["ogden_set1", "ogden_set2", "ogden_set3"])
def test_mu0_matches_oracle(name):
    assert m.small_strain_shear_modulus(m.preset(name)) == pytest.approx(oracles.ogden_mu0(oracles.OGDEN[name]), rel=1e-14)


def test_frozen_ogden_values():
    mat = m.preset("ogden_set3")
    assert m.ogden_energy(mat, m.PrincipalStretches.uniaxial(1.5)) == pytest.approx(OGDEN3_ENERGY_UNIAXIAL_1_5, rel=1e-12)
    assert m.ogden_uniaxial_stress(mat, 1.5) == pytest.approx(OGDEN3_STRESS_UNIAXIAL_1_5, rel=1e-12)


def test_frozen_mooney_rivlin_values():
    assert m.mr_energy(m.preset("mr_set1"), m.PrincipalStretches.uniaxial(1.2)) == pytest.approx(MR1_ENERGY_UNIAXIAL_1_2, rel=1e-12)
    assert m.mr_energy(m.preset("mr_set2"), m.PrincipalStretches.equibiaxial(1.1)) == pytest.approx(MR2_ENERGY_EQUIBIAXIAL_1_1, rel=1e-12)
    assert m.mr_uniaxial_stress(m.preset("mr_set3"), 1.3) == pytest.approx(MR3_STRESS_UNIAXIAL_1_3, rel=1e-12)


def test_small_strain_slope_is_three_mu0():
    for name in HYPERELASTIC:
        mat = m.preset(name)
        eps = 1e-6
        assert m.uniaxial_stress(mat, 1 + eps) / eps == pytest.approx(3 * MU0[name], rel=1e-4)


@pytest.mark.parametrize("name", HYPERELASTIC)
def test_identity_is_stress_and_energy_free(name):
    mat = m.preset(name)
    assert abs(m.energy(mat, (1.0, 1.0, 1.0))) < 1e-9 * MU0[name]
    assert abs(m.uniaxial_stress(mat, 1.0)) < 1e-9 * MU0[name]


def test_planar_stress_matches_principal_difference():
    mat = m.preset("ogden_set2")
    for lam in (0.8, 1.0, 1.3, 2.2):
        s1, _, s3 = m.ogden_principal_stresses(mat, m.PrincipalStretches.planar(lam))
        assert m.ogden_planar_stress(mat, lam) == pytest.approx(s1 - s3, rel=1e-12, abs=1e-9)
        assert m.ogden_planar_stress(mat, lam) == pytest.approx(oracles.planar_stress(oracles.OGDEN["ogden_set2"], lam), rel=1e-12, abs=1e-9)


@given(name=st.sampled_from(HYPERELASTIC), lam=st.floats(0.7, 2.5))
def test_stress_is_energy_derivative(name, lam):
    mat = m.preset(name)
    analytic = m.uniaxial_stress(mat, lam)
    assert analytic == pytest.approx(fd_stress(mat, lam), rel=1e-5, abs=1e-6 * MU0[name])


@given(name=st.sampled_from(["ogden_set1", "ogden_set2", "ogden_set3"]), lam=st.floats(0.5, 3.0))
def test_ogden_uniaxial_matches_oracle(name, lam):
    ref = oracles.ogden_uniaxial(oracles.OGDEN[name], lam)
    assert m.ogden_uniaxial_stress(m.preset(name), lam) == pytest.approx(ref, rel=1e-10, abs=1e-6)


@given(name=st.sampled_from(HYPERELASTIC), lam=st.floats(1.001, 3.0))
def test_energy_positive_and_tension_positive(name, lam):
    mat = m.preset(name)
    assert m.energy(mat, m.PrincipalStretches.uniaxial(lam)) > 0
    assert m.uniaxial_stress(mat, lam) > 0
    assert m.uniaxial_stress(mat, 1.0 / lam) < 0


@given(name=st.sampled_from(HYPERELASTIC), a=st.floats(0.6, 2.5), b=st.floats(0.6, 2.5))
def test_uniaxial_stress_monotone(name, a, b):
    lo, hi = sorted((a, b))
    if hi - lo < 1e-6:
        return
    mat = m.preset(name)
    assert m.uniaxial_stress(mat, hi) > m.uniaxial_stress(mat, lo)


def test_stiffness_ordering():
    for family in ("ogden", "mr"):
        mu = [m.small_strain_shear_modulus(m.preset(f"{family}_set{i}")) for i in (1, 2, 3)]
        assert mu[0] > mu[1] > mu[2]


@pytest.mark.parametrize("bad", [(0.0, 1.0, 1.0), (-1.0, 1.0, -1.0), (math.nan, 1.0, 1.0), (math.inf, 1.0, 0.0)])
def test_invalid_stretches_raise(bad):
    with pytest.raises(ModelDomainError):
        m.ogden_energy(m.preset("ogden_set1"), bad)


def test_overflow_is_a_domain_error():
    with pytest.raises(ModelDomainError):
        m.ogden_energy(m.preset("ogden_set1"), (1e60, 1e-30, 1e-30))


def test_unstable_parameters_rejected():
    with pytest.raises(ValueError, match="unstable"):
        m.OgdenParameters(((2.0, -1000.0),))
    with pytest.raises(ValueError):
        m.MooneyRivlinParameters(-1.0, 0.5, 1000.0)


def test_linear_elastic_has_no_energy_function():
    with pytest.raises(TypeError):
        m.energy(m.preset("pet"), (1.0, 1.0, 1.0))
    assert m.uniaxial_stress(m.preset("pet"), 1.001) == pytest.approx(2.76e6)


@given(lam=st.floats(0.3, 4.0))
def test_stretch_states_are_isochoric(lam):
    for make in (m.PrincipalStretches.uniaxial, m.PrincipalStretches.equibiaxial, m.PrincipalStretches.planar):
        s = make(lam)
        assert abs(s.l1 * s.l2 * s.l3 - 1.0) < 1e-12
