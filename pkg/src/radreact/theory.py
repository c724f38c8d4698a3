"""Closed-form two-level predictions for radiatively damped emitters.

Rates are angular frequencies (a.u. of inverse time, numerically equal to
Hartree). The radiation-reaction strength is measured by the dimensionless
x = 4 pi alpha A^-1 |pol R_eg|^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import ALPHA, C_LIGHT, FOUR_PI_ALPHA, HARTREE_EV


@dataclass(frozen=True)
class TwoLevelData:
    omega_eg: float
    r_eg: float
    inv_area: float = 1.0
    pol: float = 1.0

    def __post_init__(self):
        if not self.omega_eg > 0:
            raise ValueError(f"omega_eg must be positive, got {self.omega_eg}")
        if self.r_eg < 0:
            raise ValueError(f"r_eg must be non-negative, got {self.r_eg}")
        if self.inv_area < 0:
            raise ValueError(f"inv_area must be non-negative, got {self.inv_area}")

    @property
    def coupling_x(self) -> float:
        return FOUR_PI_ALPHA * self.inv_area * (self.pol * self.r_eg) ** 2

    def with_inv_area(self, inv_area: float) -> "TwoLevelData":
        return TwoLevelData(self.omega_eg, self.r_eg, inv_area, self.pol)


@dataclass(frozen=True)
class PolePair:
    """Poles +-omega_eg [sqrt(1 - x^2) + i x]; `overdamped` marks x > 1."""
    positive: complex
    negative: complex
    overdamped: bool

    @property
    def lamb_shift(self) -> float:
        """Re(pole) - omega_eg in Hartree (negative: red shift)."""
        return self.positive.real - abs(self.positive) if not self.overdamped else -abs(self.positive)


def casida_poles(data: TwoLevelData) -> PolePair:
    x = data.coupling_x
    w = data.omega_eg
    if x <= 1.0:
        root = complex(math.sqrt(1.0 - x * x), 0.0)
        over = False
    else:
        # continue sqrt(1 - x^2) onto the imaginary axis
        root = complex(0.0, math.sqrt(x * x - 1.0))
        over = True
    pos = w * (root + 1j * x)
    return PolePair(positive=pos, negative=-pos.conjugate() if not over else -pos, overdamped=over)


def pole_shift(data: TwoLevelData) -> float:
    """Shift of the real part of the pole, omega_eg (sqrt(1 - x^2) - 1), in Hartree."""
    x = data.coupling_x
    if x > 1.0:
        return -data.omega_eg
    return data.omega_eg * (math.sqrt(1.0 - x * x) - 1.0)


def gamma_rr(data: TwoLevelData) -> float:
    """Radiative rate omega_eg x in a.u.; equals the imaginary part of the pole."""
    return data.omega_eg * data.coupling_x


def gamma_rr_ev(data: TwoLevelData) -> float:
    return gamma_rr(data) * HARTREE_EV


def gamma_ww_1d(data: TwoLevelData) -> float:
    """Golden-rule rate into a 1D waveguide, omega |pol R|^2 A^-1 / (eps0 c)."""
    inv_eps0 = 4.0 * math.pi
    return data.omega_eg * (data.pol * data.r_eg) ** 2 * data.inv_area * inv_eps0 / C_LIGHT


def gamma_rr_3d(omega_n: float, r_n: float) -> float:
    """Abraham-Lorentz linewidth omega^3 |R|^2 / (6 pi eps0 c^3) = (2/3) omega^3 |R|^2 alpha^3."""
    return (2.0 / 3.0) * omega_n**3 * r_n**2 * ALPHA**3


def gamma_ww_3d(omega_n: float, r_n: float) -> float:
    """Free-space Wigner-Weisskopf rate omega^3 |R|^2 / (3 pi eps0 c^3)."""
    return (4.0 / 3.0) * omega_n**3 * r_n**2 * ALPHA**3


def lorentzian_imalpha(omega, data: TwoLevelData):
    """Im alpha = 2 r^2 Gamma / ((omega - Re Omega)^2 + Gamma^2) near the positive pole.

    This weight integrates to 2 pi r^2, the residues of both poles +-Omega
    folded onto the positive-frequency line. The positive-frequency line of
    alpha = R(w) / E(w) alone carries half of it, peak r^2 / Gamma.
    """
    omega = np.asarray(omega, dtype=float)
    gam = gamma_rr(data)
    center = casida_poles(data).positive.real
    return 2.0 * data.r_eg**2 * gam / ((omega - center) ** 2 + gam**2)


def damped_oscillator_imalpha(omega, data: TwoLevelData):
    """Im alpha of the full two-pole response, both signs of frequency included.

    alpha(w) = 2 r^2 W / (W^2 - w^2 - 2 i x W w). The cross section, w Im alpha,
    peaks at omega_eg exactly; the pole shift only shows up in the free decay.
    """
    omega = np.asarray(omega, dtype=float)
    w = data.omega_eg
    x = data.coupling_x
    alpha = 2.0 * data.r_eg**2 * w / (w * w - omega**2 - 2j * x * w * omega)
    return alpha.imag


def theory_table(data: TwoLevelData) -> dict:
    poles = casida_poles(data)
    return {
        "omega_eg_ev": data.omega_eg * HARTREE_EV,
        "r_eg_au": data.r_eg,
        "inv_area": data.inv_area,
        "x": data.coupling_x,
        "pole_re_ev": poles.positive.real * HARTREE_EV,
        "pole_im_ev": poles.positive.imag * HARTREE_EV,
        "pole_shift_mev": pole_shift(data) * HARTREE_EV * 1e3,
        "gamma_rr_ev": gamma_rr_ev(data),
        "gamma_ww_1d_ev": gamma_ww_1d(data) * HARTREE_EV,
        "fwhm_ev": 2.0 * gamma_rr_ev(data),
        "overdamped": poles.overdamped,
    }
