"""Command line: run a scenario, sweep one parameter, or print two-level theory.

Exit status: 0 on success, 2 on invalid input, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import theory
from .analysis import InsufficientResolution
from .config import SCHEMA, SWEEPABLE, ConfigError, Scenario, emit, parse_config
from .constants import ev_to_au
from .core import EigenSolveError
from .environments import JerkInstabilityError, KernelResampleError
from .propagation import NumericalError
from .scenarios import ScenarioResult, run_scenario

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
WORKERS_ENV = "RADREACT_WORKERS"

NUMERICAL_ERRORS = (NumericalError, EigenSolveError, InsufficientResolution, JerkInstabilityError,
                    FloatingPointError)


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path: Path, header, rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=float)) if len(rows) else np.zeros((0, len(header)))
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_number(v) for v in row) + "\n")


def write_summary(path: Path, summary: dict):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for key, value in summary.items():
            text = value if isinstance(value, str) else format_number(value)
            fh.write(f"{key} = {text}\n")


def write_result(result: ScenarioResult, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in result.tables.items():
        write_csv(out / name, header, rows)
    write_summary(out / "summary.txt", result.summary)


def load_scenario(path: str) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def execute(scenario: Scenario, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved.cfg").write_text(emit(scenario), newline="\n")
    try:
        result = run_scenario(scenario)
    except NUMERICAL_ERRORS as exc:
        (out / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, KernelResampleError, ValueError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    write_result(result, out)
    return EXIT_OK


def resolve_param(name: str) -> tuple[str, str]:
    if name in SWEEPABLE:
        return SWEEPABLE[name]
    if "." in name:
        section, key = name.split(".", 1)
        if section in SCHEMA and key in SCHEMA[section]:
            return section, key
    raise ConfigError(f"'{name}' is not sweepable; use one of {', '.join(SWEEPABLE)} or section.key")


def parse_values(text: str) -> list[float]:
    items = [v for v in text.replace(",", " ").split() if v]
    if not items:
        raise ConfigError("sweep needs at least one value")
    try:
        return [float(v) for v in items]
    except ValueError:
        raise ConfigError(f"sweep values must be numbers, got '{text}'") from None


def _sweep_one(args):
    scenario, out = args
    try:
        code = execute(scenario, out)
    except Exception as exc:  # a failed row is recorded, the sweep carries on
        (out / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n")
        code = EXIT_NUMERICAL
    summary = {}
    path = out / "summary.txt"
    if code == EXIT_OK and path.exists():
        for line in path.read_text().splitlines():
            key, _, value = line.partition(" = ")
            try:
                summary[key] = float(value)
            except ValueError:
                pass
    return code, summary


def sweep(scenario: Scenario, param: str, values, out: Path, workers: int | None = None) -> int:
    section, key = resolve_param(param)
    if not values:
        raise ConfigError("sweep needs at least one value")
    runs = []
    for v in values:
        sc = scenario.replace(section, key, v)
        runs.append((sc, out / f"{key}={format_number(v)}"))
    workers = workers or int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, runs))
    else:
        results = [_sweep_one(r) for r in runs]
    keys = sorted({k for _, summ in results for k in summ})
    header = [key, "status"] + keys
    rows = []
    for v, (code, summ) in zip(values, results):
        rows.append([v, code] + [summ.get(k, math.nan) for k in keys])
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", header, rows)
    return EXIT_OK if all(code == EXIT_OK for code, _ in results) else EXIT_NUMERICAL


def theory_report(omega_ev: float, dipole_au: float, inv_area: float, pol: float = 1.0) -> dict:
    data = theory.TwoLevelData(ev_to_au(omega_ev), dipole_au, inv_area, pol)
    return theory.theory_table(data)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radreact", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("config")
    r.add_argument("--out", default="out")
    s = sub.add_parser("sweep", help="run a scenario for several values of one parameter")
    s.add_argument("config")
    s.add_argument("--param", required=True)
    s.add_argument("--values", required=True, help="comma or space separated list")
    s.add_argument("--out", default="out")
    t = sub.add_parser("theory", help="closed-form two-level predictions")
    t.add_argument("--omega-ev", type=float, required=True)
    t.add_argument("--dipole-au", type=float, required=True)
    t.add_argument("--inv-area", type=float, required=True)
    t.add_argument("--pol", type=float, default=1.0)
    t.add_argument("--out", default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "run":
            return execute(load_scenario(args.config), Path(args.out))
        if args.command == "sweep":
            return sweep(load_scenario(args.config), args.param, parse_values(args.values), Path(args.out))
        table = theory_report(args.omega_ev, args.dipole_au, args.inv_area, args.pol)
        width = max(map(len, table))
        for k, v in table.items():
            print(f"{k:<{width}}  {format_number(v)}")
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            write_summary(Path(args.out) / "summary.txt", table)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
