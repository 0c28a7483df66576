"""Scenario runner: executes configured experiments, checks their assertions
and writes per-repetition trace CSVs plus a summary CSV."""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import actuator as act
from . import calibration as cal
from . import controller as ct
from . import exoskeleton as exo
from . import finger as fm
from . import pneumatics as pn
from .config import Model, Scenario
from .errors import ConfigError

TRACE_HEADER = "t_s,setpoint_kPa,true_kPa,sensed_kPa,valve_in,valve_out,angle_deg"
SUMMARY_HEADER = "x,mean,std,n"


@dataclass(frozen=True)
class AssertionResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class Table:
    """One repetition of a static sweep."""

    columns: tuple[str, ...]
    rows: list

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


@dataclass
class RunReport:
    scenario: Scenario
    seed: int
    traces: list
    summary_x: np.ndarray
    summary_mean: np.ndarray
    summary_std: np.ndarray
    summary_n: int
    assertions: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def summary_rows(self):
        return zip(self.summary_x, self.summary_mean, self.summary_std)


@functools.lru_cache(maxsize=8)
def backbone_table(spec: fm.FingerSpec) -> fm.BackboneTable:
    return fm.BackboneTable(spec)


def _stats(values):
    arr = np.asarray(values, dtype=float)
    return arr.mean(axis=0), arr.std(axis=0), arr.shape[0]


# ---------------------------------------------------------------------------
# static sweeps


def _sweep(model: Model, sc: Scenario):
    p = sc.parameters
    if sc.kind == "elongation_sweep":
        rows = []
        for kpa in p["pressures_kPa"]:
            r = act.axial_stretch_for_pressure(model.actuator, kpa * 1e3)
            rows.append((kpa, r.axial_stretch, r.elongation * 1e3))
        return Table(("pressure_kPa", "stretch", "elongation_mm"), rows), "elongation_mm", {}
    if sc.kind == "deflection_sweep":
        gravity = bool(p.get("gravity", True))
        rows = []
        for load in p["loads_N"]:
            s = exo.deflection_under_load(model.exoskeleton, load, include_gravity=gravity)
            rows.append((load, s.fingertip_vertical_displacement))
        work, spring = exo.loading_path_work(model.exoskeleton, max(p["loads_N"]), include_gravity=gravity)
        return Table(("load_N", "displacement_m"), rows), "displacement_m", {"work": work, "spring_energy": spring}
    if sc.kind == "finger_sweep":
        rows = []
        for kpa in p["pressures_kPa"]:
            s = fm.equilibrium_bend(model.finger, kpa * 1e3)
            rows.append((kpa, math.degrees(s.bending_angle), s.fingertip_displacement * 1e3, "backbone"))
        return Table(("pressure_kPa", "angle_deg", "displacement_mm", "branch"), rows), "angle_deg", {}
    if sc.kind == "force_sweep":
        d = p["obstacle_distance_mm"] * 1e-3
        pc = fm.contact_pressure(model.finger, d)
        rows = []
        for kpa in p["pressures_kPa"]:
            r = fm.fingertip_force(model.finger, kpa * 1e3, d, p_contact=pc) if pc is not None else fm.ContactResult(0.0, False)
            rows.append((kpa, r.force, int(r.reachable)))
        return Table(("pressure_kPa", "force_N", "reachable"), rows), "force_N", {"contact_pressure_kPa": None if pc is None else pc / 1e3}
    if sc.kind == "hysteresis_loop":
        pressures, angles, branches = fm.hysteresis_loop(model.finger, p["peak_kPa"] * 1e3, p["step_kPa"] * 1e3)
        rows = []
        for pr, a, b in zip(pressures, angles, branches):
            drop = fm.fingertip_drop(model.finger, pr) if b == "inflating" else math.nan
            rows.append((pr / 1e3, math.degrees(a), drop * 1e3, b))
        return Table(("pressure_kPa", "angle_deg", "displacement_mm", "branch"), rows), "angle_deg", {}
    raise ConfigError(f"unknown scenario kind {sc.kind!r}", key=f"scenarios.{sc.name}.kind")


# ---------------------------------------------------------------------------
# closed loop


def _closed_loop_setup(model: Model, sc: Scenario):
    p = sc.parameters
    el = model.element(sc.element)
    disturbances = ()
    if sc.kind == "staircase":
        schedule, duration = ct.staircase_schedule(
            p["step_kPa"] * 1e3, p["top_kPa"] * 1e3, p["hold_s"], p.get("final_hold_s", p["hold_s"] * 2)
        )
    elif sc.kind == "hold":
        schedule, duration = [(0.0, p["setpoint_kPa"] * 1e3)], float(p["duration_s"])
    else:
        sp = p["setpoint_kPa"] * 1e3
        leak = p["leak_fraction"] * pn.critical_leak_conductance(el.plant, sp)
        el = dataclasses.replace(el, plant=dataclasses.replace(el.plant, leak_conductance=leak))
        schedule, duration = [(0.0, sp)], float(p["duration_s"])
        if p.get("disturbance_kPa"):
            disturbances = ((float(p["disturbance_time_s"]), p["disturbance_kPa"] * 1e3),)
    return el, schedule, duration, disturbances


def _closed_loop(model: Model, sc: Scenario, seed: int):
    el, schedule, duration, disturbances = _closed_loop_setup(model, sc)
    table = backbone_table(el.finger)
    traces = []
    for rep in range(sc.repetitions):
        out = ct.run_closed_loop(
            [el], {el.name: schedule}, duration, seed=(seed, rep), disturbances={el.name: disturbances}, tables={el.name: table}
        )
        traces.append(out[el.name])
    ratio = int(round(el.period / el.plant.plant_step))
    sampled = slice(0, None, ratio)
    mean, std, n = _stats([t.sensed[sampled] / 1e3 for t in traces])
    extras = {"schedule": schedule, "duration": duration, "element": el, "disturbances": disturbances, "ratio": ratio}
    return traces, traces[0].t[sampled], mean, std, n, extras


# ---------------------------------------------------------------------------
# assertions


def _settle_time(t, y, lo, hi):
    """Time after ``t[0]`` from which ``y`` stays inside ``[lo, hi]``; inf if it ends outside."""
    outside = np.nonzero((y < lo) | (y > hi))[0]
    if len(outside) == 0:
        return 0.0
    last = outside[-1]
    if last == len(y) - 1:
        return math.inf
    return float(t[last + 1] - t[0])


def _steps(schedule, duration):
    out = []
    for k, (start, sp) in enumerate(schedule):
        end = schedule[k + 1][0] if k + 1 < len(schedule) else duration
        out.append((start, end, sp))
    return out


def _check(report: RunReport, a) -> AssertionResult:
    o = a.options
    kind = report.scenario.kind
    x, y = report.summary_x, report.summary_mean
    name = a.type
    if name == "strictly_increasing":
        d = np.diff(y)
        return AssertionResult(name, bool(np.all(d > 0)), f"min step {d.min():.6g}")
    if name == "non_decreasing":
        d = np.diff(y)
        return AssertionResult(name, bool(np.all(d >= -1e-12)), f"min step {d.min():.6g}")
    if name == "first_positive":
        return AssertionResult(name, bool(y[0] > 0), f"first value {y[0]:.6g}")
    if name == "energy_balance":
        work, spring = report.extras["work"], report.extras["spring_energy"]
        rel = abs(work - spring) / abs(work)
        return AssertionResult(name, rel < o.get("tolerance", 0.02), f"work {work:.6g} J, spring {spring:.6g} J, rel {rel:.2e}")
    if name == "anchor":
        if kind == "hysteresis_loop":
            up = [i for i, r in enumerate(report.traces[0].rows) if r[3] == "inflating"]
            value = float(np.interp(o["x"], x[up], y[up]))
        else:
            value = float(np.interp(o["x"], x, y))
        err = value - o["value"]
        return AssertionResult(name, abs(err) <= o["tolerance"], f"value {value:.4f} at x={o['x']} (target {o['value']} +- {o['tolerance']})")
    if name == "plateau":
        lo0, lo1 = (float(np.interp(v, x, y)) for v in o["low"])
        hi0, hi1 = (float(np.interp(v, x, y)) for v in o["high"])
        low_gain, high_gain = lo1 - lo0, hi1 - hi0
        ok = low_gain > 0 and high_gain < o["ratio"] * low_gain
        return AssertionResult(name, ok, f"gain {o['high']}: {high_gain:.4g}, gain {o['low']}: {low_gain:.4g}")
    if name == "loop_closes":
        err = abs(y[-1] - y[0])
        return AssertionResult(name, bool(err <= o.get("tolerance_deg", 0.5)), f"return error {err:.3g} deg")
    if name == "deflating_above_inflating":
        rows = report.traces[0].rows
        up = {r[0]: r[1] for r in rows if r[3] == "inflating"}
        gaps = [r[1] - up[r[0]] for r in rows if r[3] == "deflating" and r[0] in up]
        worst = min(gaps) if gaps else 0.0
        return AssertionResult(name, worst >= -1e-9, f"smallest deflating-inflating gap {worst:.4g} deg")
    return _check_closed_loop(report, a)


def _check_closed_loop(report: RunReport, a) -> AssertionResult:
    o = a.options
    name = a.type
    traces = report.traces
    ex = report.extras
    t, mean = report.summary_x, report.summary_mean * 1e3
    if name == "mutual_exclusion":
        both = sum(int(np.count_nonzero(tr.valve_in & tr.valve_out)) for tr in traces)
        return AssertionResult(name, both == 0, f"{both} samples with both valves open")
    if name == "valves_closed":
        opened = sum(int(np.count_nonzero(tr.valve_in | tr.valve_out)) for tr in traces)
        return AssertionResult(name, opened == 0, f"{opened} samples with a valve open")
    if name == "step_band":
        below, above = o.get("below_kPa", 2.0) * 1e3, o.get("above_kPa", 0.0) * 1e3
        worst, details, ok = 0.0, [], True
        for start, end, sp in _steps(ex["schedule"], ex["duration"]):
            if sp <= 0:
                continue
            w = (t >= start) & (t < end)
            settle = _settle_time(t[w], mean[w], sp - below, sp + above)
            worst = max(worst, settle)
            step_ok = settle <= o.get("settle_s", 2.0)
            if o.get("strictly_below") and step_ok:
                tail = mean[w][t[w] - start >= settle]
                steady = float(np.mean(tail))
                step_ok = steady < sp
                details.append(f"{sp / 1e3:g} kPa: settle {settle:.2f} s, steady {steady / 1e3:.3f}")
            else:
                details.append(f"{sp / 1e3:g} kPa: settle {settle:.2f} s")
            ok &= step_ok
        return AssertionResult(name, bool(ok), "; ".join(details))
    if name == "hold_band":
        sp = ex["schedule"][-1][1]
        lo, hi = sp - o.get("below_kPa", 2.0) * 1e3, sp + o.get("above_kPa", 2.0) * 1e3
        w = t >= o.get("settle_s", 3.0)
        ok = bool(np.all((mean[w] >= lo) & (mean[w] <= hi)))
        return AssertionResult(name, ok, f"mean sensed range [{mean[w].min() / 1e3:.3f}, {mean[w].max() / 1e3:.3f}] kPa")
    if name == "max_transition_rate":
        limit = o.get("per_s", 4.0)
        settle = o.get("settle_s", 3.0)
        worst = 0
        for tr in traces:
            changes = np.abs(np.diff(tr.valve_in.astype(np.int8))) + np.abs(np.diff(tr.valve_out.astype(np.int8)))
            times = tr.t[1:][changes > 0]
            times = times[times >= settle]
            for t0 in times:
                worst = max(worst, int(np.count_nonzero((times >= t0) & (times < t0 + 1.0))))
        return AssertionResult(name, worst < limit, f"most transitions in any 1 s window after {settle:g} s: {worst}")
    if name == "mean_within":
        sp = ex["schedule"][-1][1]
        window = o.get("window_s", 30.0)
        tol = o.get("tolerance_kPa", 2.0) * 1e3
        means = [float(np.mean(tr.true_pressure[tr.t >= ex["duration"] - window])) for tr in traces]
        ok = all(abs(m - sp) <= tol for m in means)
        return AssertionResult(name, ok, "true mean " + ", ".join(f"{m / 1e3:.3f}" for m in means) + " kPa")
    if name in ("min_inlet_activations", "max_inlet_activations"):
        counts = [tr.activations("inlet") for tr in traces]
        ok = min(counts) >= o["count"] if name.startswith("min") else max(counts) <= o["count"]
        return AssertionResult(name, ok, f"inlet activations {counts}")
    if name == "recovers":
        if not ex["disturbances"]:
            return AssertionResult(name, False, "scenario has no disturbance")
        td = ex["disturbances"][0][0]
        sp = ex["schedule"][-1][1]
        lo, hi = sp - o.get("below_kPa", 2.0) * 1e3, sp + o.get("above_kPa", 2.0) * 1e3
        times = []
        for tr in traces:
            w = tr.t >= td
            inside = np.nonzero((tr.sensed[w] >= lo) & (tr.sensed[w] <= hi))[0]
            first_out = np.nonzero((tr.sensed[w] < lo) | (tr.sensed[w] > hi))[0]
            start = tr.t[w][first_out[0]] if len(first_out) else td
            after = inside[tr.t[w][inside] > start] if len(first_out) else inside
            times.append(float(tr.t[w][after[0]] - td) if len(after) else math.inf)
        ok = max(times) <= o.get("within_s", 2.0)
        return AssertionResult(name, ok, "re-entry after " + ", ".join(f"{x:.2f}" for x in times) + " s")
    if name == "settles_below":
        sp = ex["schedule"][-1][1]
        window = o.get("window_s", 5.0)
        finals = [float(np.max(tr.true_pressure[tr.t >= ex["duration"] - window])) for tr in traces]
        ok = all(f < sp for f in finals)
        return AssertionResult(name, ok, "highest true pressure in final window " + ", ".join(f"{f / 1e3:.3f}" for f in finals) + " kPa")
    raise ConfigError(f"unknown assertion type {name!r}", key=f"scenarios.{report.scenario.name}.assertions")


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.9g}"


def trace_csv(trace: ct.SimTrace) -> str:
    buf = io.StringIO()
    buf.write(TRACE_HEADER + "\n")
    deg = np.degrees(trace.angle)
    for t, sp, p, s, vi, vo, a in zip(trace.t, trace.setpoint, trace.true_pressure, trace.sensed, trace.valve_in, trace.valve_out, deg):
        buf.write(f"{t:.3f},{sp / 1e3:.4f},{p / 1e3:.6f},{s / 1e3:.6f},{int(vi)},{int(vo)},{a:.6f}\n")
    return buf.getvalue()


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def summary_csv(report: RunReport) -> str:
    buf = io.StringIO()
    buf.write(SUMMARY_HEADER + "\n")
    for x, m, s in report.summary_rows():
        buf.write(f"{_fmt(x)},{_fmt(m)},{_fmt(s)},{report.summary_n}\n")
    return buf.getvalue()


def assertions_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["assertion", "passed", "detail"])
    for a in report.assertions:
        w.writerow([a.name, int(a.passed), a.detail])
    return buf.getvalue()


def write_report(report: RunReport, out_dir) -> list[Path]:
    folder = Path(out_dir) / report.scenario.name
    folder.mkdir(parents=True, exist_ok=True)
    files = []
    for k, tr in enumerate(report.traces, start=1):
        path = folder / f"rep{k}.csv"
        path.write_text(trace_csv(tr) if isinstance(tr, ct.SimTrace) else table_csv(tr))
        files.append(path)
    for fname, text in (("summary.csv", summary_csv(report)), ("assertions.csv", assertions_csv(report))):
        path = folder / fname
        path.write_text(text)
        files.append(path)
    report.files = files
    return files


# ---------------------------------------------------------------------------
# entry points


def run_scenario(model: Model, name: str, out_dir=None, seed: int | None = None) -> RunReport:
    """Run one configured scenario, check its assertions, optionally write CSVs."""
    if name not in model.scenarios:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(model.scenarios)}", key=f"scenarios.{name}")
    sc = model.scenarios[name]
    seed = sc.seed if seed is None else seed
    if sc.kind in ("staircase", "hold", "leak_recovery"):
        traces, x, mean, std, n, extras = _closed_loop(model, sc, seed)
    else:
        tables, extras = [], {}
        for _ in range(sc.repetitions):
            table, observable, extras = _sweep(model, sc)
            tables.append(table)
        traces = tables
        x = tables[0].column(tables[0].columns[0])
        mean, std, n = _stats([tb.column(observable) for tb in tables])
    report = RunReport(sc, seed, traces, np.asarray(x), np.asarray(mean), np.asarray(std), n, extras=extras)
    report.assertions = [_check(report, a) for a in sc.assertions]
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def _observations(spec: str, base_dir: Path | None) -> cal.ObservationSet:
    if spec == "builtin:finger_anchor":
        return cal.finger_anchor_observations()
    path = Path(spec)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    if not path.exists():
        raise ConfigError(f"observation file {path} not found", key="calibration.observations")
    return cal.ObservationSet.from_csv(path)


def run_fit(model: Model, name: str, seed: int | None = None):
    """Run a configured calibration. Returns ``(FitResult, summary dict)``."""
    if name not in model.fits:
        raise ConfigError(f"unknown fit {name!r}; known: {', '.join(model.fits)}", key=f"calibration.{name}")
    f = model.fits[name]
    seed = f.seed if seed is None else seed
    obs = _observations(f.observations, model.source.parent if model.source else None)
    base = {"actuator": model.actuator, "exoskeleton": model.exoskeleton, "finger": model.finger, "plant": model.plant}[f.binding]
    if f.binding == "finger":
        base = dataclasses.replace(base, drive_force_limit=math.inf)
    binding = cal.BINDINGS[f.binding](base)
    missing = set(binding.parameters) ^ set(f.bounds)
    if missing:
        raise ConfigError(f"bounds must name exactly {binding.parameters}", key=f"calibration.{name}.bounds")
    result = cal.fit(binding, f.bounds, obs, seed=seed)
    summary = {
        "fit": name,
        "binding": f.binding,
        "parameters": {k: float(v) for k, v in result.parameters.items()},
        "residual_rms": float(result.residual_rms),
        "iterations": int(result.iterations),
        "evaluations": int(result.evaluations),
        "converged": bool(result.converged),
    }
    if f.binding == "finger":
        spec = binding.build(result.parameters)
        if f.force_plateau:
            fp = f.force_plateau
            spec = cal.calibrate_drive_force_limit(spec, fp.get("obstacle_distance_mm", 40.0) * 1e-3, fp.get("plateau_pressure_kPa", 80.0) * 1e3)
        summary["finger"] = {
            "moment_arms_mm": [float(r * 1e3) for r in spec.moment_arms],
            "stiffness_scale": float(spec.stiffness_scale),
            "drive_force_limit_N": None if math.isinf(spec.drive_force_limit) else float(spec.drive_force_limit),
        }
        summary["anchor_angle_deg"] = float(math.degrees(fm.equilibrium_bend(spec, cal.ANCHOR_PRESSURE).bending_angle))
    return result, summary


def write_fit(summary: dict, out_dir) -> Path:
    folder = Path(out_dir)
    folder.mkdir(parents=True, exist_ok=True)
    path = folder / f"fit_{summary['fit']}.yaml"
    path.write_text(yaml.safe_dump(summary, sort_keys=False))
    return path
