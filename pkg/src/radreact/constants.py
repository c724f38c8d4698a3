"""Physical constants and unit conversions.

Everything inside the package runs in Hartree atomic units
(hbar = e = m_e = a0 = 1, 4 pi eps0 = 1, c = 1/alpha). The conversion
factors below are only used when reading configs and writing output.
"""

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class PhysicalConstants:
    fine_structure_alpha: float = 1.0 / 137.035999
    hartree_to_ev: float = 27.211386
    au_time_to_fs: float = 0.02418884
    bohr_to_angstrom: float = 0.529177

    @property
    def speed_of_light(self) -> float:
        return 1.0 / self.fine_structure_alpha

    @property
    def inv_eps0(self) -> float:
        # 1/eps0 in a.u.
        return 4.0 * math.pi


CONSTANTS = PhysicalConstants()

ALPHA = CONSTANTS.fine_structure_alpha
C_LIGHT = CONSTANTS.speed_of_light
HARTREE_EV = CONSTANTS.hartree_to_ev
AU_TIME_FS = CONSTANTS.au_time_to_fs
BOHR_ANGSTROM = CONSTANTS.bohr_to_angstrom

# 1/(eps0 c) = 4 pi alpha in a.u.; the waveguide friction prefactor per unit 1/A
FOUR_PI_ALPHA = 4.0 * math.pi * ALPHA


def ev_to_au(energy_ev):
    return energy_ev / HARTREE_EV


def au_to_ev(energy_au):
    return energy_au * HARTREE_EV


def fs_to_au(time_fs):
    return time_fs / AU_TIME_FS


def au_to_fs(time_au):
    return time_au * AU_TIME_FS


def angstrom_to_bohr(length):
    return length / BOHR_ANGSTROM
