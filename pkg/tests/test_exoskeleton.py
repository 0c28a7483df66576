import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from softfinger import exoskeleton as exo
from softfinger import materials

SPEC = exo.ExoskeletonSpec()
TEST_LOADS = (0.07, 0.16, 0.27, 0.40, 0.56)

# frozen from tests/oracles.py
HINGE_K_MR3 = 0.09408
DEFLECTION = {0.0: 0.003261471376689618, 0.07: 0.009224924228862869, 0.56: 0.04368877762398053}


def test_hinge_stiffness():
    assert SPEC.joint_stiffnesses == pytest.approx((HINGE_K_MR3,) * 3, rel=1e-12)
    k1 = exo.stiffness_from_material(exo.DEFAULT_HINGES, materials.preset("mr_set1"))[0]
    assert k1 / HINGE_K_MR3 == pytest.approx(oracles.hinge_k(*oracles.MR["mr_set1"]) / oracles.hinge_k(*oracles.MR["mr_set3"]), rel=1e-12)
    assert k1 / HINGE_K_MR3 == pytest.approx(3.1265306, rel=1e-6)


@pytest.mark.parametrize("load", sorted(DEFLECTION))
def test_deflection_frozen(load):
    d = exo.deflection_under_load(SPEC, load).fingertip_vertical_displacement
    assert d == pytest.approx(DEFLECTION[load], rel=1e-9)


@given(load=st.floats(0.0, 1.0), gravity=st.booleans())
def test_deflection_matches_torque_balance(load, gravity):
    state = exo.deflection_under_load(SPEC, load, include_gravity=gravity)
    ref, angles = oracles.exo_deflection(load, gravity)
    assert state.fingertip_vertical_displacement == pytest.approx(ref, rel=1e-8, abs=1e-11)
    assert state.joint_angles == pytest.approx(angles, rel=1e-8, abs=1e-10)


def test_load_sweep_strictly_increasing():
    d = [exo.deflection_under_load(SPEC, f).fingertip_vertical_displacement for f in (0.0,) + TEST_LOADS]
    assert all(b > a for a, b in zip(d, d[1:]))


def test_self_weight_deflects():
    assert exo.deflection_under_load(SPEC, 0.0).fingertip_vertical_displacement > 0
    assert exo.deflection_under_load(SPEC, 0.0, include_gravity=False).fingertip_vertical_displacement == 0.0


def test_load_at_distal_joint_leaves_distal_hinge_unloaded():
    state = exo.deflection_under_load(SPEC, 0.3, include_gravity=False)
    assert state.joint_angles[2] == 0.0
    tip = exo.deflection_under_load(SPEC, 0.3, include_gravity=False, load_at="tip")
    assert tip.joint_angles[2] > 0
    assert tip.fingertip_vertical_displacement > state.fingertip_vertical_displacement


@given(load=st.floats(0.0, 0.8))
def test_residual_torque_vanishes(load):
    state = exo.deflection_under_load(SPEC, load)
    assert np.max(np.abs(exo.residual_torques(SPEC, state.joint_angles, load))) < 1e-10


@pytest.mark.parametrize("load", TEST_LOADS)
def test_energy_balance(load):
    work, spring = exo.loading_path_work(SPEC, load)
    assert abs(work - spring) / spring < 0.02


def test_stiffer_material_deflects_less():
    k1 = exo.stiffness_from_material(exo.DEFAULT_HINGES, materials.preset("mr_set1"))
    stiff = dataclasses.replace(SPEC, joint_stiffnesses=k1)
    for f in TEST_LOADS:
        assert exo.deflection_under_load(stiff, f).fingertip_vertical_displacement < exo.deflection_under_load(SPEC, f).fingertip_vertical_displacement


def test_forward_kinematics_right_angles():
    unit = dataclasses.replace(SPEC, segment_lengths=(1.0, 1.0, 1.0, 1.0))
    x, y = exo.forward_kinematics(unit, (math.pi / 2,) * 3)
    assert (x, y) == pytest.approx((0.0, 0.0), abs=1e-12)
    assert exo.forward_kinematics(SPEC, (0.0, 0.0, 0.0)) == pytest.approx((SPEC.length, 0.0))


@given(theta=st.tuples(*[st.floats(-1.5, 1.5)] * 3))
def test_forward_kinematics_matches_oracle(theta):
    ref = oracles.chain_points(theta)
    assert np.allclose(exo.joint_positions(SPEC, theta), ref, atol=1e-15)


def test_mass_consistency():
    volume = sum(SPEC.segment_masses) / SPEC.material.density
    assert exo.mass_consistency(SPEC, volume) == pytest.approx(1.0)


def test_validation():
    with pytest.raises(ValueError):
        exo.ExoskeletonSpec(joint_stiffnesses=(1.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        exo.ExoskeletonSpec(segment_masses=(1.0, -1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        exo.deflection_under_load(SPEC, -0.1)
    with pytest.raises(ValueError):
        exo.deflection_under_load(SPEC, 0.1, load_at="elbow")


def test_response_is_not_superposable():
    d = {f: exo.deflection_under_load(SPEC, f).fingertip_vertical_displacement for f in (0.07, 0.56)}
    assert d[0.56] < 8 * d[0.07]


def test_hinge_stiffness_scales_with_modulus():
    base = materials.preset("mr_set3")
    doubled = dataclasses.replace(base, c10=2 * base.c10, c01=2 * base.c01)
    k = exo.stiffness_from_material(exo.DEFAULT_HINGES, base)
    k2 = exo.stiffness_from_material(exo.DEFAULT_HINGES, doubled)
    assert k2 == pytest.approx(tuple(2 * v for v in k), rel=1e-12)


@given(angle=st.floats(-1.5, 1.5))
def test_proximal_rotation_is_rigid(angle):
    x0 = SPEC.segment_lengths[0]
    reach = SPEC.length - x0
    x, y = exo.forward_kinematics(SPEC, (angle, 0.0, 0.0))
    assert (x, y) == pytest.approx((x0 + reach * math.cos(angle), -reach * math.sin(angle)), abs=1e-15)
