"""External perturbations: linear-response kick, Gaussian laser pulse, CW drive.

All drives are returned as a field E(t); the potential acting on the
electron is +x E(t). The scalar functions are numba-compiled so the
propagation loop can evaluate them without leaving compiled code, and they
remain callable from Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .constants import ev_to_au, fs_to_au


@dataclass(frozen=True)
class KickSpec:
    strength: float = 1e-6
    center: float = 1.0
    width_sq: float = 1e-4

    def __post_init__(self):
        if not self.width_sq > 0:
            raise ValueError("kick width_sq must be positive")


@dataclass(frozen=True)
class PulseSpec:
    amplitude: float = 0.05
    omega: float = ev_to_au(1.166)
    center: float = fs_to_au(72.57)
    width: float = fs_to_au(24.19)

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("pulse width must be positive")


@dataclass(frozen=True)
class CWSpec:
    amplitude: float = 1e-3
    omega: float = 0.0
    ramp_periods: float = 2.0
    t_on: float = 0.0
    t_off: float = math.inf


@njit(cache=True)
def _kick_field(t, strength, center, width_sq):
    return -strength / (math.pi * ((t - center) ** 2 + width_sq))


@njit(cache=True)
def _kick_average(t_a, t_b, strength, center, width_sq):
    # exact mean of the Lorentzian profile over [t_a, t_b]
    eta = math.sqrt(width_sq)
    if t_b <= t_a:
        return _kick_field(t_a, strength, center, width_sq)
    area = (math.atan((t_b - center) / eta) - math.atan((t_a - center) / eta)) / eta
    return -strength * area / (math.pi * (t_b - t_a))


@njit(cache=True)
def _pulse_field(t, amplitude, omega, center, width):
    return amplitude * math.sin(omega * t) * math.exp(-((t - center) / width) ** 2)


@njit(cache=True)
def _cw_field(t, amplitude, omega, ramp_periods, t_on, t_off):
    if t < t_on or t > t_off:
        return 0.0
    env = 1.0
    if ramp_periods > 0.0 and omega > 0.0:
        ramp = ramp_periods * 2.0 * math.pi / omega
        if t - t_on < ramp:
            env = math.sin(0.5 * math.pi * (t - t_on) / ramp) ** 2
    return amplitude * env * math.sin(omega * t)


def kick_potential(x, t, spec: KickSpec = KickSpec()):
    """v(x, t) = -kappa x / (pi [(t - t_c)^2 + eta^2])."""
    return np.asarray(x) * _kick_field(t, spec.strength, spec.center, spec.width_sq)


def kick_field(t, spec: KickSpec = KickSpec()) -> float:
    return _kick_field(t, spec.strength, spec.center, spec.width_sq)


def kick_impulse(spec: KickSpec = KickSpec()) -> float:
    """Integral of the kick field over all time, -kappa / eta."""
    return -spec.strength / math.sqrt(spec.width_sq)


def pulse_field(t, spec: PulseSpec) -> float:
    return _pulse_field(t, spec.amplitude, spec.omega, spec.center, spec.width)


def pulse_envelope(t, spec: PulseSpec) -> float:
    return math.exp(-(((t - spec.center) / spec.width) ** 2))


def resonant_cw(t, amplitude, omega, ramp_periods=2.0, t_on=0.0, t_off=math.inf) -> float:
    return _cw_field(t, amplitude, omega, ramp_periods, t_on, t_off)


# flat parameter layout consumed by the compiled propagation loop
N_DRIVE_PARAMS = 15


def pack_drives(kick: KickSpec | None = None, pulse: PulseSpec | None = None,
                cw: CWSpec | None = None) -> np.ndarray:
    p = np.zeros(N_DRIVE_PARAMS)
    if kick is not None:
        p[0:4] = 1.0, kick.strength, kick.center, kick.width_sq
    if pulse is not None:
        p[4:9] = 1.0, pulse.amplitude, pulse.omega, pulse.center, pulse.width
    if cw is not None:
        p[9:15] = 1.0, cw.amplitude, cw.omega, cw.ramp_periods, cw.t_on, min(cw.t_off, 1e300)
    return p


@njit(cache=True)
def drive_average(t_a, t_b, p):
    """Drive field over [t_a, t_b]: exact average for the kick, midpoint for the rest."""
    tm = 0.5 * (t_a + t_b)
    e = 0.0
    if p[0] != 0.0:
        e += _kick_average(t_a, t_b, p[1], p[2], p[3])
    if p[4] != 0.0:
        e += _pulse_field(tm, p[5], p[6], p[7], p[8])
    if p[9] != 0.0:
        e += _cw_field(tm, p[10], p[11], p[12], p[13], p[14])
    return e
