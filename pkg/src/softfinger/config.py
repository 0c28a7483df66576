"""YAML configuration: loading, validation with key paths, and model assembly.

Keys are SI unless they carry a unit suffix (``_mm``, ``_mm2``, ``_kPa``,
``_g``, ``_N``, ``_s``), in which case the value is in that unit.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from . import materials
from .actuator import ActuatorSpec
from .controller import ElementConfig, scaled_plant
from .errors import ConfigError
from .exoskeleton import ExoskeletonSpec, HingeGeometry, stiffness_from_material
from .finger import FingerSpec, HysteresisParameters
from .pneumatics import PlantConfig

REQUIRED_SECTIONS = ("actuator", "exoskeleton", "finger", "plant", "controller", "hand", "scenarios")

SCENARIO_KINDS = {
    "elongation_sweep": ("pressures_kPa",),
    "deflection_sweep": ("loads_N",),
    "finger_sweep": ("pressures_kPa",),
    "force_sweep": ("pressures_kPa", "obstacle_distance_mm"),
    "hysteresis_loop": ("peak_kPa", "step_kPa"),
    "staircase": ("step_kPa", "top_kPa", "hold_s"),
    "hold": ("setpoint_kPa", "duration_s"),
    "leak_recovery": ("setpoint_kPa", "duration_s", "leak_fraction"),
}
CLOSED_LOOP_KINDS = ("staircase", "hold", "leak_recovery")

# units as powers of ten; conversion shifts the decimal exponent of the value
# as written, so 11.79 mm becomes exactly the double nearest 0.01179 m
MM = -3
MM2 = -6
GRAM = -3
KPA = 3


def _si(value, exponent):
    return float(f"{float(value)!r}e{exponent}")


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}


def _triple(item):
    return {"type": "array", "items": item, "minItems": 3, "maxItems": 3}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj(
    {
        "actuator": _obj(
            {
                "inner_radius_mm": _pos,
                "wall_thickness_mm": _pos,
                "rest_length_mm": _pos,
                "ring_count": {"type": "integer", "minimum": 0},
                "ring_cross_section_mm2": _pos,
                "silicone": {"type": "string"},
                "reinforcement": {"type": "string"},
            }
        ),
        "exoskeleton": _obj(
            {
                "material": {"type": "string"},
                "hinge": _obj({"width_mm": _pos, "thickness_mm": _pos, "length_mm": _pos}),
                "joint_stiffnesses": {"oneOf": [{"type": "null"}, _triple(_pos)]},
                "segment_lengths_mm": {"type": "array", "items": _pos, "minItems": 4, "maxItems": 4},
                "segment_masses_g": {"type": "array", "items": _nonneg, "minItems": 4, "maxItems": 4},
            }
        ),
        "finger": _obj(
            {
                "moment_arms_mm": _triple(_pos),
                "stiffness_scale": _pos,
                "drive_force_limit_N": {"oneOf": [{"type": "null"}, _pos]},
                "max_pressure_kPa": _pos,
                "hysteresis": _obj({"inflate_gain": _pos, "deflate_offset_kPa": _nonneg, "transition_slope": _nonneg}),
            }
        ),
        "plant": _obj(
            {
                "supply_pressure_kPa": _pos,
                "atmosphere": _pos,
                "temperature": _pos,
                "inlet_conductance": _nonneg,
                "outlet_conductance": _nonneg,
                "leak_conductance": _nonneg,
                "line_conductance": _pos,
                "tube_volume": _pos,
                "plant_step_s": _pos,
                "sensor_noise_kPa": _nonneg,
                "sensor_min_kPa": _num,
                "sensor_max_kPa": _num,
                "sensor_bits": {"type": "integer", "minimum": 1},
                "valve_latency_s": _nonneg,
            }
        ),
        "controller": _obj({"deadband_kPa": _nonneg, "period_s": _pos}),
        "hand": _obj(
            {
                "elements": {
                    "type": "array",
                    "minItems": 1,
                    "items": _obj(
                        {
                            "name": {"type": "string"},
                            "finger_count": {"type": "integer", "minimum": 1},
                            "conductance_scale": _pos,
                        },
                        required=("name",),
                    ),
                }
            },
            required=("elements",),
        ),
        "calibration": {
            "type": "object",
            "additionalProperties": _obj(
                {
                    "binding": {"enum": ["actuator", "exoskeleton", "finger", "plant"]},
                    "bounds": {
                        "type": "object",
                        "additionalProperties": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                    },
                    "observations": {"type": "string"},
                    "seed": {"type": "integer"},
                    "force_plateau": _obj({"obstacle_distance_mm": _pos, "plateau_pressure_kPa": _pos}),
                },
                required=("binding", "bounds", "observations"),
            ),
        },
        "scenarios": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": _obj(
                {
                    "kind": {"enum": sorted(SCENARIO_KINDS)},
                    "element": {"type": "string"},
                    "repetitions": {"type": "integer", "minimum": 1},
                    "seed": {"type": "integer", "minimum": 0},
                    "parameters": {"type": "object"},
                    "assertions": {
                        "type": "array",
                        "items": {"type": "object", "required": ["type"], "properties": {"type": {"type": "string"}}},
                    },
                },
                required=("kind",),
            ),
        },
    },
    required=REQUIRED_SECTIONS,
)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path or '<root>'}: {self.message}"


@dataclass(frozen=True)
class Assertion:
    type: str
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    parameters: dict
    repetitions: int = 5
    seed: int = 0
    element: str = "index"
    assertions: tuple[Assertion, ...] = ()


@dataclass(frozen=True)
class FitSpec:
    name: str
    binding: str
    bounds: dict
    observations: str
    seed: int = 0
    force_plateau: dict | None = None


@dataclass(frozen=True)
class Model:
    actuator: ActuatorSpec
    exoskeleton: ExoskeletonSpec
    finger: FingerSpec
    plant: PlantConfig
    deadband: float
    period: float
    elements: tuple[ElementConfig, ...]
    scenarios: dict
    fits: dict
    source: Path | None = None

    def element(self, name: str) -> ElementConfig:
        for el in self.elements:
            if el.name == name:
                return el
        raise ConfigError(f"unknown element {name!r}", key="hand.elements")


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def default_config_path() -> Path:
    return Path(str(resources.files("softfinger") / "data" / "default.yaml"))


def load_raw(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", key=str(path)) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}", key=str(path)) from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping", violations=[Violation("", "root must be a mapping")])
    return raw


def _schema_violations(raw) -> list[Violation]:
    validator = jsonschema.Draft7Validator(SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        parts = list(err.absolute_path)
        if err.validator == "required":
            missing = err.message.split("'")[1]
            out.append(Violation(_path(parts + [missing]), "required key is missing"))
        elif err.validator == "additionalProperties":
            out.append(Violation(_path(parts), err.message))
        else:
            out.append(Violation(_path(parts), err.message))
    return out


def _preset(name, key, kinds, violations):
    try:
        value = materials.preset(name)
    except KeyError:
        violations.append(Violation(key, f"unknown preset {name!r}; known: {', '.join(sorted(materials.PRESETS))}"))
        return None
    if not isinstance(value, kinds):
        violations.append(Violation(key, f"preset {name!r} is a {type(value).__name__}, not a {kinds.__name__}"))
        return None
    return value


def _build_actuator(sec, v):
    kw = {}
    scale = {"inner_radius_mm": ("inner_radius", MM), "wall_thickness_mm": ("wall_thickness", MM), "rest_length_mm": ("rest_length", MM), "ring_cross_section_mm2": ("ring_cross_section_area", MM2)}
    for key, (name, unit) in scale.items():
        if key in sec:
            kw[name] = _si(sec[key], unit)
    if "ring_count" in sec:
        kw["ring_count"] = sec["ring_count"]
    if "wall_thickness" in kw and kw["wall_thickness"] < 2.0e-3 - 1e-12:
        v.append(Violation("actuator.wall_thickness_mm", f"{sec['wall_thickness_mm']} mm is below the 2 mm minimum wall thickness"))
        kw.pop("wall_thickness")
    if "silicone" in sec:
        kw["silicone"] = _preset(sec["silicone"], "actuator.silicone", materials.OgdenParameters, v)
    if "reinforcement" in sec:
        kw["reinforcement"] = _preset(sec["reinforcement"], "actuator.reinforcement", materials.LinearElasticParameters, v)
    kw = {k: val for k, val in kw.items() if val is not None}
    try:
        return ActuatorSpec(**kw)
    except ValueError as exc:
        v.append(Violation("actuator", str(exc)))
        return ActuatorSpec()


def _build_exoskeleton(sec, v):
    material = materials.preset("mr_set3")
    if "material" in sec:
        material = _preset(sec["material"], "exoskeleton.material", materials.MooneyRivlinParameters, v) or material
    hinge = sec.get("hinge", {})
    geometry = HingeGeometry(
        width=_si(hinge.get("width_mm", 16.0), MM),
        thickness=_si(hinge.get("thickness_mm", 4.0), MM),
        length=_si(hinge.get("length_mm", 4.0), MM),
    )
    kw = {"material": material}
    if sec.get("joint_stiffnesses") is not None:
        kw["joint_stiffnesses"] = tuple(float(k) for k in sec["joint_stiffnesses"])
    else:
        kw["joint_stiffnesses"] = stiffness_from_material((geometry,) * 3, material)
    if "segment_lengths_mm" in sec:
        kw["segment_lengths"] = tuple(_si(x, MM) for x in sec["segment_lengths_mm"])
    if "segment_masses_g" in sec:
        kw["segment_masses"] = tuple(_si(x, GRAM) for x in sec["segment_masses_g"])
    try:
        return ExoskeletonSpec(**kw)
    except ValueError as exc:
        v.append(Violation("exoskeleton", str(exc)))
        return ExoskeletonSpec()


def _build_finger(sec, actuator, exoskeleton, v):
    kw = {"actuator": actuator, "exoskeleton": exoskeleton}
    if "moment_arms_mm" in sec:
        kw["moment_arms"] = tuple(_si(x, MM) for x in sec["moment_arms_mm"])
    if "stiffness_scale" in sec:
        kw["stiffness_scale"] = sec["stiffness_scale"]
    if "drive_force_limit_N" in sec:
        limit = sec["drive_force_limit_N"]
        kw["drive_force_limit"] = math.inf if limit is None else float(limit)
    if "max_pressure_kPa" in sec:
        kw["max_pressure"] = _si(sec["max_pressure_kPa"], KPA)
    h = sec.get("hysteresis", {})
    defaults = HysteresisParameters()
    kw["hysteresis"] = HysteresisParameters(
        inflate_gain=h.get("inflate_gain", defaults.inflate_gain),
        deflate_offset=_si(h.get("deflate_offset_kPa", defaults.deflate_offset / 1e3), KPA),
        transition_slope=h.get("transition_slope", defaults.transition_slope),
    )
    try:
        return FingerSpec(**kw)
    except ValueError as exc:
        v.append(Violation("finger", str(exc)))
        return FingerSpec(actuator=actuator, exoskeleton=exoskeleton)


def _build_plant(sec, period, v):
    kw = {}
    for key, (name, unit) in {
        "supply_pressure_kPa": ("supply_pressure", KPA),
        "sensor_noise_kPa": ("sensor_noise", KPA),
        "sensor_min_kPa": ("sensor_min", KPA),
        "sensor_max_kPa": ("sensor_max", KPA),
        "plant_step_s": ("plant_step", 0),
        "valve_latency_s": ("valve_latency", 0),
    }.items():
        if key in sec:
            kw[name] = _si(sec[key], unit)
    for key in ("atmosphere", "temperature", "inlet_conductance", "outlet_conductance", "leak_conductance", "line_conductance", "tube_volume", "sensor_bits"):
        if key in sec:
            kw[key] = sec[key]
    kw["sample_period"] = period
    try:
        return PlantConfig(**kw)
    except ValueError as exc:
        v.append(Violation("plant", str(exc)))
        return PlantConfig()


def _build_scenarios(raw, element_names, v):
    out = {}
    for name, sc in (raw or {}).items():
        key = f"scenarios.{name}"
        kind = sc["kind"]
        params = dict(sc.get("parameters") or {})
        for req in SCENARIO_KINDS[kind]:
            if req not in params:
                v.append(Violation(f"{key}.parameters.{req}", f"required for kind {kind!r}"))
        element = sc.get("element", "index")
        if kind in CLOSED_LOOP_KINDS and element not in element_names:
            v.append(Violation(f"{key}.element", f"unknown element {element!r}; known: {', '.join(element_names)}"))
        asserts = tuple(Assertion(a["type"], {k: val for k, val in a.items() if k != "type"}) for a in sc.get("assertions") or [])
        out[name] = Scenario(name, kind, params, sc.get("repetitions", 5), sc.get("seed", 0), element, asserts)
    return out


def validate(raw: Any) -> list[Violation]:
    """Every violated invariant of a raw config, each with its key path."""
    return _assemble(raw)[1]


def _assemble(raw):
    if not isinstance(raw, dict):
        return None, [Violation("", "config root must be a mapping")]
    v = _schema_violations(raw)
    broken = {x.path.split(".")[0].split("[")[0] for x in v}
    if "" in broken:
        return None, v

    def section(name):
        # a section with structural errors is skipped so later checks still run
        return {} if name in broken else raw.get(name, {})

    actuator = _build_actuator(section("actuator"), v)
    exoskeleton = _build_exoskeleton(section("exoskeleton"), v)
    finger = _build_finger(section("finger"), actuator, exoskeleton, v)
    ctrl = section("controller")
    deadband = _si(ctrl.get("deadband_kPa", 1.0), KPA)
    period = ctrl.get("period_s", 0.02)
    plant = _build_plant(section("plant"), period, v)
    if plant.plant_step > period / 10 + 1e-15:
        v.append(Violation("plant.plant_step_s", "must be at most a tenth of controller.period_s"))
    if deadband < plant.quantization_step:
        v.append(Violation("controller.deadband_kPa", f"must be at least the sensor quantization step ({plant.quantization_step / 1e3:.4f} kPa)"))
    elements = []
    names = []
    for i, el in enumerate(section("hand").get("elements", [])):
        if el["name"] in names:
            v.append(Violation(f"hand.elements[{i}].name", f"duplicate element name {el['name']!r}"))
        names.append(el["name"])
        count = el.get("finger_count", 1)
        el_plant = scaled_plant(plant, el.get("conductance_scale", float(count)))
        elements.append(ElementConfig(el["name"], finger, el_plant, deadband, period, count))
    fits = {}
    for name, f in (section("calibration") or {}).items():
        fits[name] = FitSpec(name, f["binding"], {k: tuple(b) for k, b in f["bounds"].items()}, f["observations"], f.get("seed", 0), f.get("force_plateau"))
        for k, (lo, hi) in fits[name].bounds.items():
            if not lo < hi:
                v.append(Violation(f"calibration.{name}.bounds.{k}", "lower bound must be below upper bound"))
    scenarios = _build_scenarios(section("scenarios"), names, v)
    model = Model(actuator, exoskeleton, finger, plant, deadband, period, tuple(elements), scenarios, fits)
    return model, v


def build(raw: dict, source=None) -> Model:
    model, violations = _assemble(raw)
    if violations:
        lines = "\n".join(f"  {x}" for x in violations)
        raise ConfigError(f"invalid configuration:\n{lines}", key=violations[0].path, violations=violations)
    return replace(model, source=Path(source) if source else None)


def load(path=None) -> Model:
    path = Path(path) if path else default_config_path()
    return build(load_raw(path), source=path)


def with_override(raw: dict, dotted_key: str, value) -> dict:
    """Copy of ``raw`` with ``a.b.c`` set to ``value``."""
    out = copy.deepcopy(raw)
    node = out
    parts = dotted_key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted_key}: {p} is not a section", key=dotted_key)
    node[parts[-1]] = value
    return out


def listing(model: Model) -> dict:
    return {
        "presets": sorted(materials.PRESETS),
        "elements": [e.name for e in model.elements],
        "scenarios": {name: s.kind for name, s in model.scenarios.items()},
        "fits": {name: f.binding for name, f in model.fits.items()},
    }
