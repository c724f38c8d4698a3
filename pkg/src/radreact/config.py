"""Scenario configuration: `key = value` lines in `[section]` blocks.

Values may carry a unit suffix that is converted to atomic units on parse:
`eV` for energies and frequencies, `fs` for times, `A` (or `Angstrom`) for
lengths. Every key not given in the file takes the scenario default, and
`emit` writes the fully resolved scenario back in a form `parse_config`
reads into an identical object.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from types import MappingProxyType

from .constants import angstrom_to_bohr, ev_to_au, fs_to_au

SCENARIOS = (
    "decay", "stimulated", "absorption", "eit", "hhg", "fwhm_sweep",
    "bath_convergence", "superradiance", "lamb_shift", "theory",
)

_UNITS = {
    "energy": {"ev": ev_to_au, "au": float, "ha": float, "hartree": float},
    "time": {"fs": fs_to_au, "au": float},
    "length": {"a": angstrom_to_bohr, "angstrom": angstrom_to_bohr, "au": float, "bohr": float},
}


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class Key:
    kind: type  # float, int, bool, str, or list (of floats)
    default: object
    unit: str | None = None
    choices: tuple | None = None


SCHEMA = {
    "scenario": {
        "name": Key(str, "absorption", choices=SCENARIOS),
    },
    "grid": {
        "n_points": Key(int, 301),
        "spacing": Key(float, 0.1, "length"),
        "softening": Key(float, 1.0),
        "stencil": Key(int, 3, choices=(3, 5)),
    },
    "propagator": {
        "dt": Key(float, 1e-2, "time"),
        "total_time": Key(float, 4000.0, "time"),
        "corrector_iterations": Key(int, 1),
        "stride": Key(int, 5),
        "auto_extend": Key(bool, False),
        "decay_lengths": Key(float, 8.0),
    },
    "initial": {
        "state": Key(str, "ground", choices=("ground", "excited", "superposition")),
    },
    "ensemble": {
        "n_emitters": Key(int, 1),
    },
    "waveguide": {
        "inv_area": Key(float, 1.0),
        "pol_projection": Key(float, 1.0),
        "switch_on_time": Key(float, 2.0, "time"),
        "edge_z": Key(float, 0.5),
    },
    "cavity": {
        "enabled": Key(bool, False),
        "omega_c": Key(float, ev_to_au(10.746), "energy"),
        "g_over_omega": Key(float, 0.01),
        "switch_on_time": Key(float, 0.0, "time"),
    },
    "bath": {
        "enabled": Key(bool, False),
        "inv_area": Key(float, 2.0),
        "cutoff": Key(float, 2.5, "energy"),
        "box_length": Key(float, 0.0, "length"),
        "doublings": Key(int, 3),
    },
    "al3d": {
        "enabled": Key(bool, False),
        "omega_n": Key(float, 0.0, "energy"),
        "purcell_factor": Key(float, 1.0),
        "switch_on_time": Key(float, 2.0, "time"),
    },
    "kernel": {
        "file": Key(str, ""),
        "switch_on_time": Key(float, 2.0, "time"),
    },
    "kick": {
        "enabled": Key(bool, True),
        "strength": Key(float, 1e-6),
        "center": Key(float, 1.0, "time"),
        "width_sq": Key(float, 1e-4),
    },
    "pulse": {
        "enabled": Key(bool, False),
        "amplitude": Key(float, 0.05),
        "omega": Key(float, ev_to_au(1.166), "energy"),
        "center": Key(float, fs_to_au(72.57), "time"),
        "width": Key(float, fs_to_au(24.19), "time"),
    },
    "cw": {
        "enabled": Key(bool, False),
        "amplitude": Key(float, 1e-3),
        "omega": Key(float, 0.0, "energy"),
        "ramp_periods": Key(float, 2.0),
        "t_on": Key(float, 0.0, "time"),
        "t_off": Key(float, math.inf, "time"),
    },
    "analysis": {
        "pad_factor": Key(int, 1),
        "window_lo": Key(float, ev_to_au(8.0), "energy"),
        "window_hi": Key(float, ev_to_au(13.5), "energy"),
        "max_omega": Key(float, ev_to_au(30.0), "energy"),
        "harmonics": Key(int, 15),
    },
    "sweep": {
        "values": Key(list, ()),
    },
}

# scenario-specific defaults layered over SCHEMA
PRESETS = {
    "absorption": {},
    "decay": {
        "propagator": {"total_time": 1000.0},
        "kick": {"enabled": False},
        "pulse": {"enabled": True, "amplitude": 5e-3, "omega": ev_to_au(10.746), "center": 200.0, "width": 50.0},
        "waveguide": {"switch_on_time": 0.0},
    },
    "stimulated": {
        "propagator": {"total_time": 1000.0},
        "initial": {"state": "excited"},
        "kick": {"enabled": False},
        "cw": {"enabled": True},
        "waveguide": {"switch_on_time": 0.0},
    },
    "eit": {
        "propagator": {"total_time": 20000.0},
        "cavity": {"enabled": True},
        "analysis": {"pad_factor": 4},
    },
    "hhg": {
        "grid": {"n_points": 601, "spacing": 0.05},
        "propagator": {"dt": 5e-3, "total_time": 12000.0, "stride": 10},
        "kick": {"enabled": False},
        "pulse": {"enabled": True, "amplitude": 0.02},
        "waveguide": {"inv_area": 0.1, "switch_on_time": 0.0},
        "analysis": {"max_omega": ev_to_au(40.0)},
    },
    "fwhm_sweep": {
        "propagator": {"auto_extend": True},
        "analysis": {"pad_factor": 4},
        "sweep": {"values": (1e-3, 1e-2, 1e-1, 1.0)},
    },
    "bath_convergence": {
        "propagator": {"total_time": 200.0},
        "initial": {"state": "superposition"},
        "kick": {"enabled": False},
        "bath": {"enabled": True},
        "waveguide": {"switch_on_time": 0.0},
    },
    "superradiance": {
        "waveguide": {"inv_area": 0.05},
        "propagator": {"auto_extend": True},
        "analysis": {"pad_factor": 4},
        "sweep": {"values": (1, 2, 4, 8)},
    },
    "lamb_shift": {
        "propagator": {"auto_extend": True},
        "analysis": {"pad_factor": 32},
    },
    "theory": {},
}

# short names accepted by the sweep driver
SWEEPABLE = {
    "inv_area": ("waveguide", "inv_area"),
    "n_emitters": ("ensemble", "n_emitters"),
    "g_over_omega": ("cavity", "g_over_omega"),
    "cutoff": ("bath", "cutoff"),
}


class Section:
    """Read-only attribute view of one config block."""

    def __init__(self, values: dict):
        object.__setattr__(self, "_values", MappingProxyType(dict(values)))

    def __getattr__(self, key):
        try:
            return self._values[key]
        except KeyError:
            raise AttributeError(key) from None

    def __setattr__(self, key, value):
        raise AttributeError("config sections are read-only")

    def __eq__(self, other):
        return isinstance(other, Section) and _same(dict(self._values), dict(other._values))

    def __repr__(self):
        return f"Section({dict(self._values)!r})"

    def as_dict(self) -> dict:
        return dict(self._values)


def _same(a: dict, b: dict) -> bool:
    if a.keys() != b.keys():
        return False
    for k in a:
        x, y = a[k], b[k]
        if isinstance(x, float) and isinstance(y, float) and math.isnan(x) and math.isnan(y):
            continue
        if x != y:
            return False
    return True


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    sections: MappingProxyType

    def __getattr__(self, key):
        sections = object.__getattribute__(self, "sections")
        if key in sections:
            return sections[key]
        raise AttributeError(key)

    def __eq__(self, other):
        return (isinstance(other, Scenario) and self.name == other.name
                and self.sections.keys() == other.sections.keys()
                and all(self.sections[k] == other.sections[k] for k in self.sections))

    def __reduce__(self):
        # mapping proxies do not pickle; rebuild from plain dicts (used by the sweep pool)
        return _build, (self.name, {k: v.as_dict() for k, v in self.sections.items()})

    def get(self, section: str, key: str):
        return self.sections[section].as_dict()[key]

    def replace(self, section: str, key: str, value) -> "Scenario":
        spec = SCHEMA[section][key]
        data = {s: v.as_dict() for s, v in self.sections.items()}
        data[section][key] = _coerce_value(value, spec, f"{section}.{key}")
        return _build(self.name, data)


def _coerce_value(value, spec: Key, label: str):
    if spec.kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{label} expects true/false")
        return value
    if spec.kind is int:
        if isinstance(value, bool) or not float(value).is_integer():
            raise ConfigError(f"{label} expects an integer")
        value = int(value)
    elif spec.kind is float:
        value = float(value)
    elif spec.kind is list:
        value = tuple(float(v) for v in value)
    if spec.choices is not None and value not in spec.choices:
        raise ConfigError(f"{label} must be one of {', '.join(map(str, spec.choices))}")
    return value


def _build(name: str, data: dict) -> Scenario:
    return Scenario(name, MappingProxyType({s: Section(data[s]) for s in SCHEMA}))


def defaults(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown scenario '{name}'; choose from {', '.join(SCENARIOS)}")
    data = {s: {k: spec.default for k, spec in keys.items()} for s, keys in SCHEMA.items()}
    for s, over in PRESETS[name].items():
        data[s].update(over)
    data["scenario"]["name"] = name
    return data


_NUM_UNIT = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*([A-Za-z]*)$")


def _parse_scalar(text: str, spec: Key, label: str, line: int):
    t = text.strip()
    if spec.kind is bool:
        low = t.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{label}: expected true/false, got '{t}'", line)
    if spec.kind is str:
        if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
            t = t[1:-1]
        if spec.choices is not None and t not in spec.choices:
            raise ConfigError(f"{label}: '{t}' is not one of {', '.join(spec.choices)}", line)
        return t
    m = _NUM_UNIT.match(t)
    if not m:
        raise ConfigError(f"{label}: expected a number, got '{t}'", line)
    number, unit = m.group(1), m.group(2).lower()
    if spec.kind is int:
        if unit:
            raise ConfigError(f"{label}: integers take no unit", line)
        try:
            value = int(number)
        except ValueError:
            raise ConfigError(f"{label}: expected an integer, got '{t}'", line) from None
        if spec.choices is not None and value not in spec.choices:
            raise ConfigError(f"{label}: {value} is not one of {spec.choices}", line)
        return value
    value = float(number)
    if unit:
        table = _UNITS.get(spec.unit or "", {})
        if unit not in table:
            allowed = ", ".join(sorted(table)) or "none"
            raise ConfigError(f"{label}: unit '{m.group(2)}' not accepted (allowed: {allowed})", line)
        value = float(table[unit](value))
    return value


def parse_config(text: str) -> Scenario:
    """Parse and validate a scenario; every error names its line."""
    entries = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header '{line}'", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section '{section}'", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got '{line}'", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key '{key}' in [{section}]", lineno)
        if not value and SCHEMA[section][key].kind is not list:
            raise ConfigError(f"missing value for '{section}.{key}'", lineno)
        entries.append((section, key, value, lineno))

    name = "absorption"
    for section, key, value, lineno in entries:
        if (section, key) == ("scenario", "name"):
            name = _parse_scalar(value, SCHEMA["scenario"]["name"], "scenario.name", lineno)
    data = defaults(name)
    seen = {}
    for section, key, value, lineno in entries:
        label = f"{section}.{key}"
        if label in seen:
            raise ConfigError(f"duplicate key '{label}' (first set on line {seen[label]})", lineno)
        seen[label] = lineno
        spec = SCHEMA[section][key]
        if spec.kind is list:
            items = [v for v in re.split(r"[,\s]+", value) if v]
            data[section][key] = tuple(_parse_scalar(v, Key(float, 0.0), label, lineno) for v in items)
        else:
            data[section][key] = _parse_scalar(value, spec, label, lineno)
    scenario = _build(name, data)
    validate(scenario)
    return scenario


def validate(s: Scenario):
    """Cross-field checks that do not need any computation."""
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(s.grid.n_points >= 3 and s.grid.n_points % 2 == 1, "grid.n_points must be odd and >= 3")
    need(s.grid.spacing > 0, "grid.spacing must be positive")
    need(s.grid.softening > 0, "grid.softening must be positive")
    need(s.propagator.dt > 0, "propagator.dt must be positive")
    need(s.propagator.total_time > 0, "propagator.total_time must be positive")
    need(s.propagator.corrector_iterations >= 0, "propagator.corrector_iterations must be >= 0")
    need(s.propagator.stride >= 1, "propagator.stride must be >= 1")
    need(s.ensemble.n_emitters >= 1, "ensemble.n_emitters must be >= 1")
    need(s.waveguide.inv_area >= 0, "waveguide.inv_area must be >= 0")
    need(0 < s.waveguide.edge_z < 1, "waveguide.edge_z must lie in (0, 1)")
    need(s.kick.width_sq > 0, "kick.width_sq must be positive")
    need(s.pulse.width > 0, "pulse.width must be positive")
    need(s.analysis.pad_factor >= 1, "analysis.pad_factor must be >= 1")
    need(s.analysis.window_lo < s.analysis.window_hi, "analysis.window_lo must be below window_hi")
    need(s.bath.cutoff > 0, "bath.cutoff must be positive")
    need(s.bath.doublings >= 0, "bath.doublings must be >= 0")
    need(s.cavity.omega_c > 0, "cavity.omega_c must be positive")
    if s.name in ("fwhm_sweep", "superradiance"):
        need(len(s.sweep.values) > 0, f"{s.name} needs a non-empty sweep.values list")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value) if value else '""'


def emit(s: Scenario) -> str:
    """Fully resolved scenario in atomic units; parse_config(emit(s)) == s."""
    lines = []
    for section in SCHEMA:
        lines.append(f"[{section}]")
        for key, value in s.sections[section].as_dict().items():
            lines.append(f"{key} = {_fmt(value)}")
        lines.append("")
    return "\n".join(lines)
