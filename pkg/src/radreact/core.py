"""Single-active-electron model on a uniform 1D grid.

Sign conventions used throughout the package: the electron carries charge
-1, the dipole is R = -<x>, and a field E(t) enters the Hamiltonian as the
potential +x E(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eig_banded, eigh_tridiagonal

# second-derivative finite-difference coefficients (center, +-1, +-2, ...) / dx^2
STENCILS = {
    3: np.array([-2.0, 1.0]),
    5: np.array([-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0]),
}


class EigenSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid1D:
    n_points: int = 301
    spacing: float = 0.1
    center: float = 0.0

    def __post_init__(self):
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd and >= 3, got {self.n_points}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

    @property
    def x(self) -> np.ndarray:
        i = np.arange(self.n_points)
        return self.center + (i - (self.n_points - 1) / 2) * self.spacing

    @property
    def length(self) -> float:
        return (self.n_points - 1) * self.spacing

    @property
    def center_index(self) -> int:
        return (self.n_points - 1) // 2


@dataclass
class EigenSolution:
    energies: np.ndarray
    states: np.ndarray  # shape (count, n_points), real, normalized with sum |phi|^2 dx = 1
    grid: Grid1D = field(repr=False)

    @property
    def excitation_energy(self) -> float:
        return float(self.energies[1] - self.energies[0])

    def transition_dipole(self, m: int = 0, n: int = 1) -> float:
        """<phi_m| R |phi_n> with R = -x."""
        dx = self.grid.spacing
        return float(-np.sum(self.states[m] * self.grid.x * self.states[n]) * dx)


def soft_coulomb(grid: Grid1D, softening: float = 1.0, charge: float = 1.0) -> np.ndarray:
    if not softening > 0:
        raise ValueError(f"softening must be positive, got {softening}")
    return -charge / np.sqrt(grid.x**2 + softening)


def kinetic_bands(grid: Grid1D, stencil: int = 3) -> np.ndarray:
    """Kinetic operator -1/2 d^2/dx^2 as band coefficients [t0, t1, ...].

    t0 sits on the diagonal, t_m on the m-th off-diagonals (both sides).
    """
    try:
        coeffs = STENCILS[stencil]
    except KeyError:
        raise ValueError(f"unsupported stencil {stencil}; choose from {sorted(STENCILS)}") from None
    return -0.5 * coeffs / grid.spacing**2


def apply_hamiltonian(psi: np.ndarray, potential: np.ndarray, grid: Grid1D, stencil: int = 3) -> np.ndarray:
    bands = kinetic_bands(grid, stencil)
    out = (bands[0] + potential) * psi
    for m in range(1, len(bands)):
        out[m:] += bands[m] * psi[:-m]
        out[:-m] += bands[m] * psi[m:]
    return out


def eigenstates(potential: np.ndarray, grid: Grid1D, count: int = 2, stencil: int = 3) -> EigenSolution:
    """Lowest `count` eigenpairs of T + V with hard walls at the grid ends."""
    n = grid.n_points
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (n,) or not np.all(np.isfinite(potential)):
        raise ValueError("potential must be a finite array matching the grid")
    bands = kinetic_bands(grid, stencil)
    try:
        if len(bands) == 2:
            energies, vecs = eigh_tridiagonal(
                bands[0] + potential, np.full(n - 1, bands[1]),
                select="i", select_range=(0, count - 1),
            )
        else:
            ab = np.zeros((len(bands), n))
            ab[0] = bands[0] + potential
            for m in range(1, len(bands)):
                ab[m, : n - m] = bands[m]
            energies, vecs = eig_banded(ab, lower=True, select="i", select_range=(0, count - 1))
    except LinAlgError as exc:
        # LAPACK reports the failing iteration / eigenvalue index in the message
        raise EigenSolveError(f"eigensolver did not converge: {exc}") from exc

    states = vecs.T.copy()
    # re-orthonormalize on the grid measure and fix the sign so each state starts positive
    q, _ = np.linalg.qr(states.T)
    states = q.T / np.sqrt(grid.spacing)
    for k in range(count):
        lead = states[k, np.argmax(np.abs(states[k]) > 1e-8 * np.abs(states[k]).max())]
        if lead < 0:
            states[k] *= -1
    return EigenSolution(energies=np.asarray(energies), states=states, grid=grid)


def norm(psi: np.ndarray, grid: Grid1D) -> float:
    return float(np.sum(np.abs(psi) ** 2) * grid.spacing)


def normalize(psi: np.ndarray, grid: Grid1D) -> np.ndarray:
    return psi / np.sqrt(norm(psi, grid))


def dipole(psi: np.ndarray, grid: Grid1D) -> float:
    return float(-np.sum(grid.x * np.abs(psi) ** 2) * grid.spacing)


def dipole_velocity(psi: np.ndarray, grid: Grid1D, stencil: int = 3) -> float:
    """dR/dt from the lattice current of the finite-difference kinetic operator.

    For the 3-point stencil this is -Im sum psi_i^* (psi_{i+1} - psi_{i-1}) / 2,
    which is exactly the time derivative of `dipole` under the discrete
    Schrodinger equation with any local potential.
    """
    bands = kinetic_bands(grid, stencil)
    dx = grid.spacing
    total = 0.0
    for m in range(1, len(bands)):
        total += m * bands[m] * np.sum(np.imag(np.conj(psi[:-m]) * psi[m:]))
    return float(2.0 * dx * dx * total)


def electronic_energy(psi: np.ndarray, potential: np.ndarray, grid: Grid1D, stencil: int = 3) -> float:
    hpsi = apply_hamiltonian(psi, potential, grid, stencil)
    return float(np.real(np.vdot(psi, hpsi)) * grid.spacing)
