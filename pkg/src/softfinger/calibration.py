"""Bounded least-squares calibration of the reduced-order models.

A :class:`Binding` says how to build a model from named free parameters and
how to predict each observable from it. :func:`fit` minimises the weighted
squared residuals with Nelder-Mead inside a box, working in a unit cube so
that every coordinate has the same scale.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from . import actuator as act
from . import exoskeleton as exo
from . import finger as fm
from . import pneumatics as pn
from .errors import CalibrationError, ModelDomainError

# weights are used relative to the largest one, on a grid of this relative size,
# so a common factor on every weight cannot change any comparison
_WEIGHT_GRID = 2.0**-40


@dataclass(frozen=True)
class Observation:
    inputs: Mapping[str, float]
    observable: str
    value: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"observation weight must be positive, got {self.weight}")
        if not math.isfinite(self.value):
            raise ValueError("observation value must be finite")


@dataclass(frozen=True)
class ObservationSet:
    records: tuple[Observation, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("an observation set needs at least one record")

    def __len__(self):
        return len(self.records)

    def scaled(self, factor: float) -> "ObservationSet":
        return ObservationSet(tuple(dataclasses.replace(r, weight=r.weight * factor) for r in self.records))

    def normalized_weights(self) -> np.ndarray:
        w = np.array([r.weight for r in self.records])
        return np.round(w / w.max() / _WEIGHT_GRID) * _WEIGHT_GRID

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["inputs", "observable", "value", "weight"])
        for r in self.records:
            inputs = ";".join(f"{k}={v!r}" for k, v in r.inputs.items())
            writer.writerow([inputs, r.observable, repr(r.value), repr(r.weight)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "ObservationSet":
        """Read ``inputs,observable,value,weight`` rows; inputs are ``name=value;...``."""
        text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["inputs", "observable", "value", "weight"]:
            raise ValueError("observation CSV must start with the header inputs,observable,value,weight")
        records = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"line {lineno}: expected 4 fields, got {len(row)}")
            inputs = {}
            for item in filter(None, (s.strip() for s in row[0].split(";"))):
                name, _, value = item.partition("=")
                inputs[name.strip()] = float(value)
            records.append(Observation(inputs, row[1].strip(), float(row[2]), float(row[3])))
        return cls(tuple(records))


@dataclass(frozen=True)
class Binding:
    """Named free parameters mapped onto a model and its observables."""

    name: str
    parameters: tuple[str, ...]
    build: Callable[[dict], object]
    predict: Callable[[object, Mapping[str, float], str], float]


@dataclass
class FitResult:
    parameters: dict
    residual_rms: float
    iterations: int
    converged: bool
    evaluations: int = 0
    history: list = field(default_factory=list, repr=False)


def residuals(binding: Binding, params: Mapping[str, float], obs: ObservationSet) -> np.ndarray:
    """Unweighted ``prediction - value`` for every record."""
    model = binding.build(dict(params))
    return np.array([binding.predict(model, r.inputs, r.observable) - r.value for r in obs.records])


def weighted_rms(binding: Binding, params: Mapping[str, float], obs: ObservationSet) -> float:
    r = residuals(binding, params, obs)
    w = obs.normalized_weights()
    return float(math.sqrt(np.sum(w * r * r) / np.sum(w)))


def fit(
    binding: Binding,
    bounds: Mapping[str, tuple[float, float]],
    obs: ObservationSet,
    seed: int = 0,
    restarts: int = 3,
    max_iter: int = 400,
    xatol: float = 1e-9,
) -> FitResult:
    """Bounded Nelder-Mead with restarts.

    The first start is the centre of the box; the rest are drawn from
    ``seed``. Each restart also polishes the best point found so far.
    Termination only looks at the simplex size, so rescaling every weight
    by one constant leaves the path, and the answer, unchanged.

    Raises
    ------
    CalibrationError
        If the objective is not finite at a sampled point; the offending
        parameters are attached.
    """
    names = binding.parameters
    if set(bounds) != set(names):
        raise ValueError(f"bounds must cover exactly {names}, got {sorted(bounds)}")
    lo = np.array([float(bounds[n][0]) for n in names])
    hi = np.array([float(bounds[n][1]) for n in names])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
        raise ValueError("bounds must be finite with lower < upper")
    if len(obs) < len(names):
        raise ValueError(f"{len(obs)} observations cannot determine {len(names)} parameters")
    weights = obs.normalized_weights()
    history = []

    def to_params(u):
        x = lo + np.clip(u, 0.0, 1.0) * (hi - lo)
        return dict(zip(names, (float(v) for v in x)))

    def objective(u):
        params = to_params(u)
        history.append(params)
        try:
            r = residuals(binding, params, obs)
        except (ModelDomainError, ArithmeticError) as exc:
            raise CalibrationError(f"objective failed at {params}: {exc}", params) from exc
        value = float(np.sum(weights * r * r))
        if not math.isfinite(value):
            raise CalibrationError(f"objective is not finite at {params}", params)
        return value

    rng = np.random.default_rng(seed)
    n = len(names)
    starts = [np.full(n, 0.5)] + [rng.uniform(0.0, 1.0, n) for _ in range(restarts)]
    best_u, best_f = starts[0], objective(starts[0])
    iterations = 0
    converged = False
    opts = dict(xatol=xatol, fatol=math.inf, maxiter=max_iter * n, adaptive=n > 2)
    box = [(0.0, 1.0)] * n
    for start in starts:
        for u0 in (start, best_u):
            res = minimize(objective, u0, method="Nelder-Mead", bounds=box, options=opts)
            iterations += int(res.nit)
            u = np.clip(res.x, 0.0, 1.0)
            f = objective(u)
            if f < best_f:
                best_u, best_f = u, f
                converged = bool(res.success)
            elif f == best_f:
                converged = converged or bool(res.success)
    params = to_params(best_u)
    return FitResult(
        parameters=params,
        residual_rms=weighted_rms(binding, params, obs),
        iterations=iterations,
        converged=converged,
        evaluations=len(history),
        history=history,
    )


# ---------------------------------------------------------------------------
# model bindings


def actuator_binding(base: act.ActuatorSpec | None = None) -> Binding:
    """Free ``rest_length`` and ``wall_thickness`` (m); observables
    ``elongation`` (m) and ``stretch`` at input ``pressure`` (Pa)."""
    base = base or act.ActuatorSpec()

    def build(p):
        return dataclasses.replace(base, **p)

    def predict(spec, inputs, observable):
        r = act.axial_stretch_for_pressure(spec, inputs["pressure"])
        if observable == "elongation":
            return r.elongation
        if observable == "stretch":
            return r.axial_stretch
        raise KeyError(f"unknown actuator observable {observable!r}")

    return Binding("actuator", ("rest_length", "wall_thickness"), build, predict)


def exoskeleton_binding(base: exo.ExoskeletonSpec | None = None) -> Binding:
    """Free joint stiffnesses ``k_proximal``, ``k_middle``, ``k_distal``
    (N m/rad); observables ``deflection`` (m) and ``angle_1..3`` (rad) at
    input ``load`` (N)."""
    base = base or exo.ExoskeletonSpec()

    def build(p):
        return dataclasses.replace(base, joint_stiffnesses=(p["k_proximal"], p["k_middle"], p["k_distal"]))

    def predict(spec, inputs, observable):
        state = exo.deflection_under_load(spec, inputs["load"], include_gravity=bool(inputs.get("gravity", 1)))
        if observable == "deflection":
            return state.fingertip_vertical_displacement
        if observable.startswith("angle_"):
            return state.joint_angles[int(observable[-1]) - 1]
        raise KeyError(f"unknown exoskeleton observable {observable!r}")

    return Binding("exoskeleton", ("k_proximal", "k_middle", "k_distal"), build, predict)


# relative moment-arm profile along the finger, proximal to distal (m at scale 1)
ARM_PROFILE = (12.0e-3, 9.0e-3, 6.0e-3)


def finger_binding(base: fm.FingerSpec | None = None, profile: Sequence[float] = ARM_PROFILE) -> Binding:
    """Free ``arm_scale`` (multiplies ``profile``) and ``stiffness_scale``.

    Observables: ``bending_angle_deg`` and ``fingertip_displacement`` (m) at
    input ``pressure`` (Pa), and the geometric ``moment_arm_mean_mm`` (no
    inputs), which separates arm length from joint stiffness.
    """
    base = base or fm.FingerSpec()

    def build(p):
        arms = tuple(p["arm_scale"] * r for r in profile)
        return dataclasses.replace(base, moment_arms=arms, stiffness_scale=p["stiffness_scale"])

    def predict(spec, inputs, observable):
        if observable == "moment_arm_mean_mm":
            return 1e3 * sum(spec.moment_arms) / 3.0
        state = fm.equilibrium_bend(spec, inputs["pressure"])
        if observable == "bending_angle_deg":
            return math.degrees(state.bending_angle)
        if observable == "fingertip_displacement":
            return state.fingertip_displacement
        raise KeyError(f"unknown finger observable {observable!r}")

    return Binding("finger", ("arm_scale", "stiffness_scale"), build, predict)


def plant_binding(base: pn.PlantConfig | None = None, chamber_volume: float = 5.5e-6) -> Binding:
    """Free ``inlet_conductance`` and ``outlet_conductance`` given in units
    of 1e-11 kg/(s Pa); observables ``fill_pressure`` (inlet open from 0
    for ``time`` s) and ``vent_pressure`` (outlet open from ``start`` Pa
    for ``time`` s), both gauge Pa, against a rigid chamber."""
    base = base or pn.PlantConfig()
    volume_fn = lambda p: chamber_volume  # noqa: E731

    def build(p):
        return dataclasses.replace(
            base,
            inlet_conductance=p["inlet_conductance"] * 1e-11,
            outlet_conductance=p["outlet_conductance"] * 1e-11,
            sensor_noise=0.0,
        )

    def predict(cfg, inputs, observable):
        if observable == "fill_pressure":
            state = pn.initial_state(cfg, volume_fn, 0.0)
            cmd = pn.ValveCommand(True, False)
        elif observable == "vent_pressure":
            state = pn.initial_state(cfg, volume_fn, inputs["start"])
            cmd = pn.ValveCommand(False, True)
        else:
            raise KeyError(f"unknown plant observable {observable!r}")
        _, gauge, _ = pn.run_open_loop(cfg, state, cmd, inputs["time"], volume_fn)
        return float(gauge[-1])

    return Binding("plant", ("inlet_conductance", "outlet_conductance"), build, predict)


BINDINGS = {
    "actuator": actuator_binding,
    "exoskeleton": exoskeleton_binding,
    "finger": finger_binding,
    "plant": plant_binding,
}


# ---------------------------------------------------------------------------
# shipped finger calibration

ANCHOR_PRESSURE = 75.0e3
ANCHOR_ANGLE_DEG = 95.0
FINGER_BOUNDS = {"arm_scale": (0.5, 1.5), "stiffness_scale": (0.2, 1.0)}


# actuator centreline above the hinge axis: half the hinge thickness plus the actuator outer radius
GEOMETRIC_ARM_MM = 9.0


def finger_anchor_observations(sweep=(20.0e3, 30.0e3, 40.0e3, 50.0e3), sweep_weight=0.02) -> ObservationSet:
    """The 95 deg at 75 kPa anchor and the geometric mean moment arm, plus
    low-weight points on the straight line through the origin and the
    anchor at the tested pressures."""
    records = [
        Observation({"pressure": ANCHOR_PRESSURE}, "bending_angle_deg", ANCHOR_ANGLE_DEG, 1.0),
        Observation({}, "moment_arm_mean_mm", GEOMETRIC_ARM_MM, 1.0),
    ]
    for p in sweep:
        records.append(Observation({"pressure": p}, "bending_angle_deg", ANCHOR_ANGLE_DEG * p / ANCHOR_PRESSURE, sweep_weight))
    return ObservationSet(tuple(records))


def calibrate_drive_force_limit(spec: fm.FingerSpec, obstacle_distance=40.0e-3, plateau_pressure=80.0e3) -> fm.FingerSpec:
    """Set the slip limit to the blocked drive force at ``plateau_pressure``,
    so the fingertip force stops growing there."""
    unlimited = dataclasses.replace(spec, drive_force_limit=math.inf)
    pc = fm.contact_pressure(unlimited, obstacle_distance)
    if pc is None:
        raise CalibrationError("obstacle is out of reach; cannot place the force plateau")
    stretch = fm.equilibrium_bend(unlimited, pc).actuator_stretch
    limit = act.drive_force(spec.actuator, plateau_pressure, stretch)
    return dataclasses.replace(spec, drive_force_limit=limit)


def calibrate_finger(
    base: fm.FingerSpec | None = None,
    obs: ObservationSet | None = None,
    bounds=None,
    seed: int = 0,
    obstacle_distance=40.0e-3,
    plateau_pressure=80.0e3,
) -> tuple[fm.FingerSpec, FitResult]:
    """Fit moment arms and stiffness scale, then place the force plateau."""
    base = base or fm.FingerSpec()
    binding = finger_binding(dataclasses.replace(base, drive_force_limit=math.inf))
    result = fit(binding, bounds or FINGER_BOUNDS, obs or finger_anchor_observations(), seed=seed)
    spec = binding.build(result.parameters)
    spec = calibrate_drive_force_limit(dataclasses.replace(spec, drive_force_limit=math.inf), obstacle_distance, plateau_pressure)
    return spec, result
