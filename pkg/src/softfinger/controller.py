"""ON-OFF pressure controller and the two-rate closed-loop simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import pneumatics as pn
from .errors import PlantError
from .finger import BackboneTable, FingerSpec, HysteresisTracker
from .pneumatics import CLOSED, PlantConfig, ValveCommand


@dataclass(frozen=True)
class ControllerConfig:
    setpoint: float = 0.0  # gauge, Pa
    deadband: float = 1.0e3
    period: float = 0.02

    def __post_init__(self):
        if self.deadband < 0 or self.period <= 0:
            raise ValueError("deadband must be non-negative and period positive")


@dataclass
class ControllerState:
    last_command: ValveCommand = CLOSED
    last_reading: float = math.nan
    setpoint: float = 0.0


def control_step(cfg: ControllerConfig, sensed: float, previous: ValveCommand = CLOSED) -> ValveCommand:
    """Valve command for one control period from the sensed gauge pressure.

    A closed inlet opens below ``setpoint - 2*deadband``; once open it stays
    open until the reading reaches the setpoint. A closed outlet opens above
    ``setpoint + 2*deadband`` and vents down to ``setpoint - 1.5*deadband``.
    Inside the band both valves stay closed. The two valves are never open
    together.
    """
    sp, db = cfg.setpoint, cfg.deadband
    if previous.inlet:
        inlet = sensed < sp
    else:
        inlet = sensed < sp - 2.0 * db
    if previous.outlet:
        outlet = sensed > sp - 1.5 * db
    else:
        outlet = sensed > sp + 2.0 * db
    if inlet and outlet:
        # only reachable from an inconsistent previous command
        outlet = False
    return ValveCommand(inlet, outlet)


@dataclass(frozen=True)
class ElementConfig:
    """One controllable element: its valves, sensor, plant and finger(s)."""

    name: str
    finger: FingerSpec = field(default_factory=FingerSpec)
    plant: PlantConfig = field(default_factory=PlantConfig)
    deadband: float = 1.0e3
    period: float = 0.02
    finger_count: int = 1


@dataclass
class SimTrace:
    element: str
    t: np.ndarray
    setpoint: np.ndarray  # gauge Pa
    true_pressure: np.ndarray  # chamber gauge Pa
    sensed: np.ndarray  # latest sensor reading, gauge Pa
    valve_in: np.ndarray
    valve_out: np.ndarray
    angle: np.ndarray  # rad

    def rows(self):
        return zip(self.t, self.setpoint, self.true_pressure, self.sensed, self.valve_in, self.valve_out, self.angle)

    def valve_transitions(self, which="inlet"):
        v = (self.valve_in if which == "inlet" else self.valve_out).astype(np.int8)
        return int(np.count_nonzero(np.diff(v, prepend=0)))

    def activations(self, which="inlet"):
        """Number of closed-to-open switches of a valve; valves start closed."""
        v = (self.valve_in if which == "inlet" else self.valve_out).astype(np.int8)
        return int(np.count_nonzero(np.diff(v, prepend=0) == 1))

    def window(self, t0, t1):
        return (self.t >= t0) & (self.t < t1)


def setpoint_at(schedule, t):
    """Piecewise-constant schedule of ``(t_start, setpoint)`` pairs."""
    value = 0.0
    for start, sp in schedule:
        if t + 1e-12 >= start:
            value = sp
        else:
            break
    return value


class ElementSimulator:
    """Plant, finger and controller for one element, stepped on the two-rate clock."""

    def __init__(self, element: ElementConfig, rng: np.random.Generator, table: BackboneTable | None = None):
        self.element = element
        cfg = element.plant
        if element.period < 10 * cfg.plant_step - 1e-15:
            raise ValueError("plant step must be at most a tenth of the controller period")
        self.table = table or BackboneTable(element.finger)
        a = element.finger.actuator
        rest = element.finger_count * a.bore_area * a.rest_length
        stretch = self.table.stretch
        self.volume_fn = lambda p: rest * stretch(p)
        self.tracker = HysteresisTracker(self.table.angle, element.finger.hysteresis, element.finger.max_pressure)
        self.rng = rng
        self.state = pn.initial_state(cfg, self.volume_fn)
        self.controller = ControllerState()

    def run(self, schedule, duration, disturbances=()):
        el = self.element
        cfg = el.plant
        dt = cfg.plant_step
        ratio = int(round(el.period / dt))
        latency = int(round(cfg.valve_latency / dt))
        n = int(round(duration / dt))
        disturb = sorted((int(round(t / dt)), drop) for t, drop in disturbances)
        atm = cfg.atmosphere
        t_out, sp_out, p_out, s_out, vin_out, vout_out, a_out = ([] for _ in range(7))
        pending = []  # (step index at which it applies, command)
        applied = CLOSED
        sensed = math.nan
        state = self.state
        ctrl = self.controller
        for i in range(n + 1):
            while disturb and disturb[0][0] == i:
                state = pn.vent_mass(cfg, state, disturb.pop(0)[1])
            t = i * dt
            sp = setpoint_at(schedule, t)
            if i % ratio == 0:
                reading = pn.sample_sensor(cfg, state, self.rng)
                sensed = reading.value - atm
                command = control_step(ControllerConfig(sp, el.deadband, el.period), sensed, ctrl.last_command)
                ctrl.last_command, ctrl.last_reading, ctrl.setpoint = command, sensed, sp
                pending.append((i + latency, command))
            while pending and pending[0][0] <= i:
                applied = pending.pop(0)[1]
            gauge = state.chamber_pressure - atm
            t_out.append(t)
            sp_out.append(sp)
            p_out.append(gauge)
            s_out.append(sensed)
            vin_out.append(applied.inlet)
            vout_out.append(applied.outlet)
            a_out.append(self.tracker.update(gauge))
            if i == n:
                break
            try:
                state = pn.plant_step(cfg, state, applied, self.volume_fn)
            except PlantError as exc:
                raise PlantError(f"[{el.name}] {exc}", time=exc.time) from exc
        self.state = state
        return SimTrace(
            el.name,
            np.array(t_out),
            np.array(sp_out),
            np.array(p_out),
            np.array(s_out),
            np.array(vin_out, dtype=bool),
            np.array(vout_out, dtype=bool),
            np.array(a_out),
        )


def element_rngs(seed, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def run_closed_loop(
    elements: Sequence[ElementConfig],
    schedules: dict,
    duration: float,
    seed: int = 0,
    disturbances: dict | None = None,
    tables: dict | None = None,
) -> dict[str, SimTrace]:
    """Simulate every element for ``duration`` seconds.

    ``schedules`` maps element name to ``[(t_start_s, setpoint_Pa), ...]``.
    Each element gets its own random stream derived from ``seed`` and its
    position, so one element's trace never depends on another's schedule.
    """
    disturbances = disturbances or {}
    tables = tables or {}
    rngs = element_rngs(seed, len(elements))
    traces = {}
    for el, rng in zip(elements, rngs):
        sim = ElementSimulator(el, rng, tables.get(el.name))
        traces[el.name] = sim.run(schedules.get(el.name, [(0.0, 0.0)]), duration, disturbances.get(el.name, ()))
    return traces


def scaled_plant(plant: PlantConfig, factor: float) -> PlantConfig:
    """Valve, tube and leak conductances multiplied by ``factor``, for an
    element whose chamber is several actuators in parallel."""
    return replace(
        plant,
        inlet_conductance=plant.inlet_conductance * factor,
        outlet_conductance=plant.outlet_conductance * factor,
        line_conductance=plant.line_conductance * factor,
        leak_conductance=plant.leak_conductance * factor,
    )


def default_hand(finger: FingerSpec | None = None, plant: PlantConfig | None = None, deadband=1.0e3):
    """Thumb, index, and the middle/ring/little group driven by one valve pair.

    The group's plant is scaled by its finger count so that it fills at the
    same rate as a single finger.
    """
    finger = finger or FingerSpec()
    plant = plant or PlantConfig()
    return [
        ElementConfig("thumb", finger, plant, deadband),
        ElementConfig("index", finger, plant, deadband),
        ElementConfig("mrl", finger, scaled_plant(plant, 3.0), deadband, finger_count=3),
    ]


def staircase_schedule(step=15.0e3, top=45.0e3, hold=5.0, final_hold=10.0):
    """0 -> top in ``step`` increments, back down to 0, ``hold`` s per level."""
    levels = list(np.arange(0.0, top + 0.5 * step, step))
    levels = levels + levels[-2::-1]
    schedule = [(k * hold, float(v)) for k, v in enumerate(levels)]
    duration = (len(levels) - 1) * hold + final_hold
    return schedule, duration
