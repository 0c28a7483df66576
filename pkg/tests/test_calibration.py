import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from roundtrip import max_relative_error, synthetic
from softfinger import calibration as cal
from softfinger import finger as fm
from softfinger.errors import CalibrationError, ModelDomainError


def quadratic_binding(center=0.3):
    """One parameter, residual ``x - center`` against a zero observation."""
    return cal.Binding("quad", ("x",), lambda p: p, lambda model, inputs, obs: (model["x"] - center) * inputs.get("gain", 1.0))


def quad_obs(weights=(1.0, 2.0)):
    return cal.ObservationSet(tuple(cal.Observation({"gain": g}, "r", 0.0, w) for g, w in zip((1.0, 3.0), weights)))


def test_observation_validation():
    with pytest.raises(ValueError):
        cal.Observation({}, "x", 1.0, weight=0.0)
    with pytest.raises(ValueError):
        cal.Observation({}, "x", math.nan)
    with pytest.raises(ValueError):
        cal.ObservationSet(())


def test_csv_round_trip(tmp_path):
    obs = cal.finger_anchor_observations()
    path = tmp_path / "obs.csv"
    text = obs.to_csv(path)
    assert text.splitlines()[0] == "inputs,observable,value,weight"
    back = cal.ObservationSet.from_csv(path)
    assert back == obs


def test_one_dimensional_fit_matches_golden_section():
    binding = cal.Binding(
        "curve",
        ("x",),
        lambda p: p,
        lambda model, inputs, obs: math.exp(model["x"]) - inputs["target"],
    )
    obs = cal.ObservationSet(tuple(cal.Observation({"target": t}, "y", 0.0, w) for t, w in ((2.0, 1.0), (3.0, 0.5), (5.0, 0.25))))
    res = cal.fit(binding, {"x": (-1.0, 3.0)}, obs)
    ref = oracles.golden_section(lambda x: sum(w * (math.exp(x) - t) ** 2 for t, w in ((2.0, 1.0), (3.0, 0.5), (5.0, 0.25))), -1.0, 3.0)
    assert res.parameters["x"] == pytest.approx(ref, abs=1e-7)
    assert res.converged


def test_bounds_are_respected_and_active():
    res = cal.fit(quadratic_binding(center=5.0), {"x": (0.0, 1.0)}, quad_obs())
    assert res.parameters["x"] == pytest.approx(1.0, abs=1e-8)
    xs = [h["x"] for h in res.history]
    assert min(xs) >= 0.0 and max(xs) <= 1.0


@pytest.mark.slow
@given(factor=st.floats(1e-6, 1e6))
@settings(max_examples=25)
def test_weight_scaling_leaves_argmin_unchanged(factor):
    binding, _, bounds, obs = synthetic("finger")
    base = cal.fit(binding, bounds, obs, restarts=0)
    scaled = cal.fit(binding, bounds, obs.scaled(factor), restarts=0)
    assert scaled.parameters == base.parameters


@pytest.mark.parametrize("name", ["actuator", "finger"])
def test_round_trip(name):
    binding, truth, bounds, obs = synthetic(name)
    res = cal.fit(binding, bounds, obs)
    assert max_relative_error(truth, res.parameters) < 0.01
    assert res.residual_rms < 1e-6 * max(abs(r.value) for r in obs.records)


def test_fit_is_deterministic():
    binding, _, bounds, obs = synthetic("actuator")
    a = cal.fit(binding, bounds, obs, seed=4)
    b = cal.fit(binding, bounds, obs, seed=4)
    assert a.parameters == b.parameters and a.evaluations == b.evaluations


def test_reported_rms_matches_parameters():
    binding, _, bounds, obs = synthetic("finger")
    res = cal.fit(binding, bounds, obs, restarts=1)
    assert res.residual_rms == cal.weighted_rms(binding, res.parameters, obs)


def test_domain_failure_reports_parameters():
    def predict(model, inputs, obs):
        if model["x"] > 0.5:
            raise ModelDomainError("outside")
        return model["x"]

    binding = cal.Binding("fragile", ("x",), lambda p: p, predict)
    obs = cal.ObservationSet((cal.Observation({}, "y", 0.4),))
    with pytest.raises(CalibrationError) as info:
        cal.fit(binding, {"x": (0.0, 1.0)}, obs, restarts=0)
    assert info.value.parameters["x"] > 0.5


def test_non_finite_objective_raises():
    binding = cal.Binding("nan", ("x",), lambda p: p, lambda model, inputs, obs: math.nan)
    with pytest.raises(CalibrationError):
        cal.fit(binding, {"x": (0.0, 1.0)}, cal.ObservationSet((cal.Observation({}, "y", 0.0),)))


def test_argument_checks():
    binding = quadratic_binding()
    with pytest.raises(ValueError):
        cal.fit(binding, {"y": (0.0, 1.0)}, quad_obs())
    with pytest.raises(ValueError):
        cal.fit(binding, {"x": (1.0, 0.0)}, quad_obs())
    with pytest.raises(ValueError):
        cal.fit(binding, {"x": (0.0, math.inf)}, quad_obs())
    two = cal.Binding("two", ("x", "y"), lambda p: p, lambda m, i, o: m["x"])
    with pytest.raises(ValueError):
        cal.fit(two, {"x": (0.0, 1.0), "y": (0.0, 1.0)}, cal.ObservationSet((cal.Observation({}, "y", 0.0),)))


def test_unknown_observable():
    binding, truth, _, _ = synthetic("finger")
    with pytest.raises(KeyError):
        binding.predict(binding.build(truth), {"pressure": 1e3}, "torque")


def test_shipped_finger_calibration():
    spec, res = cal.calibrate_finger()
    assert abs(math.degrees(fm.equilibrium_bend(spec, cal.ANCHOR_PRESSURE).bending_angle) - 95.0) < 2.0
    assert res.residual_rms < 2.0
    lo, hi = cal.FINGER_BOUNDS["arm_scale"]
    assert lo < res.parameters["arm_scale"] < hi
    shipped = fm.FingerSpec()
    assert spec.moment_arms == pytest.approx(shipped.moment_arms, rel=1e-3)
    assert spec.stiffness_scale == pytest.approx(shipped.stiffness_scale, rel=1e-3)
    assert spec.drive_force_limit == pytest.approx(shipped.drive_force_limit, rel=1e-3)


def test_force_plateau_placement():
    spec = cal.calibrate_drive_force_limit(fm.FingerSpec())
    g_low = fm.fingertip_force(spec, 40e3).force - fm.fingertip_force(spec, 35e3).force
    g_high = fm.fingertip_force(spec, 85e3).force - fm.fingertip_force(spec, 80e3).force
    assert g_high < 1e-3 * g_low
    f = fm.force_curve(spec, np.array([79e3, 80e3, 81e3]))
    assert f[0] < f[1] == pytest.approx(f[2], rel=1e-9)


def test_unreachable_plateau():
    with pytest.raises(CalibrationError):
        cal.calibrate_drive_force_limit(fm.FingerSpec(), obstacle_distance=1.0)


@pytest.mark.parametrize("name", ["actuator", "finger"])
def test_fit_beats_box_midpoint(name):
    binding, _, bounds, obs = synthetic(name)
    res = cal.fit(binding, bounds, obs, restarts=1)
    middle = {k: 0.5 * (lo + hi) for k, (lo, hi) in bounds.items()}
    assert res.residual_rms <= cal.weighted_rms(binding, middle, obs)
