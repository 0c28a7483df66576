"""Command line: ``softfinger run|validate|list|calibrate|sweep``.

Exit status: 0 pass, 1 assertion failure, 2 configuration error,
3 simulation error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from . import config, harness
from .errors import CalibrationError, ConfigError, ConvergenceError, ModelDomainError, PlantError

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_SIM = 0, 1, 2, 3


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, default=None, help="YAML config (default: the shipped one)")
    p.add_argument("--out-dir", type=Path, default=None, help="directory for CSV/YAML output")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softfinger", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run scenarios and check their assertions")
    _common(p)
    p.add_argument("--scenario", action="append", help="scenario name (repeatable; default: all)")

    p = sub.add_parser("validate", help="check a config and list every violation")
    _common(p)

    p = sub.add_parser("list", help="list presets, elements, scenarios and fits")
    _common(p)

    p = sub.add_parser("calibrate", help="run a configured calibration fit")
    _common(p)
    p.add_argument("--fit", action="append", help="fit name (repeatable; default: all)")

    p = sub.add_parser("sweep", help="run one scenario for several values of a config key")
    _common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--param", required=True, help="dotted config key, e.g. plant.supply_pressure_kPa")
    p.add_argument("--values", required=True, help="comma-separated values")
    return parser


def _load(args):
    path = args.config or config.default_config_path()
    return path, config.load_raw(path)


def _print_report(report: harness.RunReport):
    status = "PASS" if report.passed else "FAIL"
    print(f"[{status}] {report.scenario.name} ({report.scenario.kind}, {report.scenario.repetitions} rep, seed {report.seed})")
    for a in report.assertions:
        print(f"    {'ok ' if a.passed else 'BAD'} {a.name}: {a.detail}")


def cmd_run(args) -> int:
    path, raw = _load(args)
    model = config.build(raw, source=path)
    names = args.scenario or list(model.scenarios)
    ok = True
    for name in names:
        report = harness.run_scenario(model, name, out_dir=args.out_dir, seed=args.seed)
        _print_report(report)
        ok &= report.passed
    return EXIT_OK if ok else EXIT_ASSERT


def cmd_validate(args) -> int:
    _, raw = _load(args)
    violations = config.validate(raw)
    for v in violations:
        print(v)
    if violations:
        print(f"{len(violations)} violation(s)")
        return EXIT_CONFIG
    print("config is valid")
    return EXIT_OK


def cmd_list(args) -> int:
    path, raw = _load(args)
    model = config.build(raw, source=path)
    print(yaml.safe_dump(config.listing(model), sort_keys=False), end="")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    path, raw = _load(args)
    model = config.build(raw, source=path)
    names = args.fit or list(model.fits)
    if not names:
        raise ConfigError("config defines no calibration fits", key="calibration")
    for name in names:
        _, summary = harness.run_fit(model, name, seed=args.seed)
        print(yaml.safe_dump(summary, sort_keys=False), end="")
        if args.out_dir is not None:
            print(f"wrote {harness.write_fit(summary, args.out_dir)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    path, raw = _load(args)
    values = [yaml.safe_load(v) for v in args.values.split(",")]
    lines = ["value,passed"]
    ok = True
    for value in values:
        model = config.build(config.with_override(raw, args.param, value), source=path)
        out = None if args.out_dir is None else args.out_dir / f"{args.param}={value}"
        report = harness.run_scenario(model, args.scenario, out_dir=out, seed=args.seed)
        print(f"{args.param} = {value}:")
        _print_report(report)
        lines.append(f"{value},{int(report.passed)}")
        ok &= report.passed
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK if ok else EXIT_ASSERT


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "list": cmd_list, "calibrate": cmd_calibrate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlantError as exc:
        print(f"simulation error at t={exc.time} s: {exc}", file=sys.stderr)
        return EXIT_SIM
    except (ModelDomainError, ConvergenceError, CalibrationError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
