"""Discrete-time pneumatic plant: valves, supply line, actuator chamber, leak, sensor.

Two isothermal gas volumes are tracked. The manifold (valve block, sensor
port and tubing) connects through the tube to the actuator chamber, whose
volume follows the finger's pressure-stretch backbone. All flows are linear
in the pressure difference (conductances in kg/(s Pa)):

    inlet   C_in   (P_supply - P_manifold)   when the inlet valve is open
    outlet  C_out  (P_manifold - P_atm)      when the outlet valve is open
    tube    C_line (P_manifold - P_chamber)
    leak    C_leak (P_chamber - P_atm)

The sensor sits on the manifold, so it reads high while filling and low
while venting; pressures equalise once the valves close.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .errors import PlantError

ATMOSPHERE = 101325.0
AIR_GAS_CONSTANT = 287.05


class ValveCommand(NamedTuple):
    inlet: bool = False
    outlet: bool = False


CLOSED = ValveCommand(False, False)


@dataclass(frozen=True)
class PlantConfig:
    supply_pressure: float = 150.0e3  # gauge
    atmosphere: float = ATMOSPHERE
    temperature: float = 293.15
    gas_constant: float = AIR_GAS_CONSTANT
    inlet_conductance: float = 4.0e-11
    outlet_conductance: float = 7.0e-11
    leak_conductance: float = 0.0
    line_conductance: float = 1.85e-9
    tube_volume: float = 3.5e-6
    plant_step: float = 1.0e-3
    sensor_noise: float = 200.0
    sensor_min: float = 20.0e3
    sensor_max: float = 250.0e3
    sensor_bits: int = 10
    sample_period: float = 0.02
    valve_latency: float = 0.0

    def __post_init__(self):
        for name in ("inlet_conductance", "outlet_conductance", "leak_conductance", "line_conductance"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.tube_volume <= 0 or self.temperature <= 0:
            raise ValueError("tube_volume and temperature must be positive")
        if self.plant_step <= 0 or self.plant_step > self.sample_period / 10 + 1e-15:
            raise ValueError("plant_step must be positive and at most a tenth of the sample period")
        if self.sensor_max <= self.sensor_min or self.sensor_bits < 1:
            raise ValueError("invalid sensor span")
        if self.valve_latency < 0:
            raise ValueError("valve_latency must be non-negative")

    @property
    def rt(self):
        return self.gas_constant * self.temperature

    @property
    def supply_absolute(self):
        return self.atmosphere + self.supply_pressure

    @property
    def quantization_step(self):
        return (self.sensor_max - self.sensor_min) / (2**self.sensor_bits - 1)

    @property
    def steps_per_sample(self):
        return int(round(self.sample_period / self.plant_step))


@dataclass(frozen=True)
class PlantState:
    manifold_mass: float
    chamber_mass: float
    manifold_pressure: float  # absolute
    chamber_pressure: float  # absolute
    chamber_volume: float
    valve_in: bool = False
    valve_out: bool = False
    time: float = 0.0

    @property
    def gas_mass(self):
        return self.manifold_mass + self.chamber_mass

    def gauge(self, atmosphere=ATMOSPHERE):
        return self.chamber_pressure - atmosphere


class SensorReading(NamedTuple):
    value: float  # absolute, quantised
    sample_time: float


def initial_state(cfg: PlantConfig, volume_fn: Callable[[float], float], p_gauge: float = 0.0, time: float = 0.0) -> PlantState:
    """Both volumes at rest at gauge pressure ``p_gauge``."""
    p = cfg.atmosphere + p_gauge
    v = volume_fn(p_gauge)
    return PlantState(
        manifold_mass=p * cfg.tube_volume / cfg.rt,
        chamber_mass=p * v / cfg.rt,
        manifold_pressure=p,
        chamber_pressure=p,
        chamber_volume=v,
        time=time,
    )


def flows(cfg: PlantConfig, state: PlantState, cmd: ValveCommand):
    """Mass flow rates (kg/s): inlet, outlet, tube (manifold to chamber), leak."""
    pm, pc = state.manifold_pressure, state.chamber_pressure
    q_in = cfg.inlet_conductance * (cfg.supply_absolute - pm) if cmd.inlet else 0.0
    q_out = cfg.outlet_conductance * (pm - cfg.atmosphere) if cmd.outlet else 0.0
    q_line = cfg.line_conductance * (pm - pc)
    q_leak = cfg.leak_conductance * (pc - cfg.atmosphere)
    return q_in, q_out, q_line, q_leak


def plant_step(cfg: PlantConfig, state: PlantState, cmd: ValveCommand, volume_fn: Callable[[float], float]) -> PlantState:
    """Advance the plant by one ``cfg.plant_step`` with the valves in ``cmd``.

    ``volume_fn`` maps chamber gauge pressure to chamber volume. The
    volume/pressure coupling is resolved with one fixed-point pass.
    """
    dt = cfg.plant_step
    q_in, q_out, q_line, q_leak = flows(cfg, state, cmd)
    m_man = state.manifold_mass + (q_in - q_out - q_line) * dt
    m_ch = state.chamber_mass + (q_line - q_leak) * dt
    t = state.time + dt
    if m_man < 0 or m_ch < 0:
        raise PlantError(f"negative gas mass at t={t:.4f} s; plant step too large", time=t)
    rt = cfg.rt
    p_man = m_man * rt / cfg.tube_volume
    p_guess = m_ch * rt / state.chamber_volume
    volume = volume_fn(p_guess - cfg.atmosphere)
    p_ch = m_ch * rt / volume
    return PlantState(m_man, m_ch, p_man, p_ch, volume, cmd.inlet, cmd.outlet, t)


def vent_mass(cfg: PlantConfig, state: PlantState, drop: float) -> PlantState:
    """Instantly remove gas so both gauge pressures fall by ``drop`` Pa (a disturbance)."""

    def scaled(mass, p):
        gauge = p - cfg.atmosphere
        if gauge <= 0:
            return mass, p
        new_p = cfg.atmosphere + max(gauge - drop, 0.0)
        return mass * new_p / p, new_p

    m_man, p_man = scaled(state.manifold_mass, state.manifold_pressure)
    m_ch, p_ch = scaled(state.chamber_mass, state.chamber_pressure)
    return replace(state, manifold_mass=m_man, manifold_pressure=p_man, chamber_mass=m_ch, chamber_pressure=p_ch)


def quantize(cfg: PlantConfig, pressure: float) -> float:
    levels = 2**cfg.sensor_bits - 1
    q = cfg.quantization_step
    k = round((pressure - cfg.sensor_min) / q)
    k = min(max(k, 0), levels)
    return cfg.sensor_min + k * q


def sample_sensor(cfg: PlantConfig, state: PlantState, rng: np.random.Generator | None = None) -> SensorReading:
    """Absolute manifold pressure plus Gaussian noise, quantised to the ADC grid."""
    p = state.manifold_pressure
    if cfg.sensor_noise > 0:
        if rng is None:
            raise ValueError("a random generator is required when sensor_noise > 0")
        p += cfg.sensor_noise * rng.standard_normal()
    return SensorReading(quantize(cfg, p), state.time)


def leak_tolerable(cfg: PlantConfig, setpoint_gauge: float) -> bool:
    """True when the inlet can out-flow the leak at the setpoint."""
    return cfg.inlet_conductance * (cfg.supply_pressure - setpoint_gauge) > cfg.leak_conductance * setpoint_gauge


def critical_leak_conductance(cfg: PlantConfig, setpoint_gauge: float) -> float:
    return cfg.inlet_conductance * (cfg.supply_pressure - setpoint_gauge) / setpoint_gauge


def run_open_loop(cfg: PlantConfig, state: PlantState, cmd: ValveCommand, duration: float, volume_fn):
    """Hold ``cmd`` for ``duration`` seconds. Returns times and chamber gauge pressures."""
    n = int(round(duration / cfg.plant_step))
    times = np.empty(n + 1)
    gauge = np.empty(n + 1)
    times[0], gauge[0] = state.time, state.chamber_pressure - cfg.atmosphere
    for i in range(1, n + 1):
        state = plant_step(cfg, state, cmd, volume_fn)
        times[i] = state.time
        gauge[i] = state.chamber_pressure - cfg.atmosphere
    return times, gauge, state


def time_constant(cfg: PlantConfig, volume: float, conductance: float) -> float:
    """RC time constant (s) of a volume emptying through a linear conductance."""
    if conductance == 0:
        return math.inf
    return volume / (cfg.rt * conductance)
