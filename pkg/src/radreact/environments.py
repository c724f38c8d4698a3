"""Electromagnetic environments coupled through the total dipole.

Every environment produces a field E_r acting on the electrons through the
potential +x E_r(t), i.e. a "slope" of a linear-in-x potential. Signs are
fixed so that each environment removes energy from a freely oscillating
dipole: for the ideal waveguide E_r = -4 pi alpha A^-1 pol^2 dR/dt, a
friction force on the electron velocity.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .constants import ALPHA, C_LIGHT, FOUR_PI_ALPHA


class KernelResampleError(ValueError):
    pass


class JerkInstabilityError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Markovian environments: waveguide, cavity edge, 3D Abraham-Lorentz
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeSpec:
    z_ratio: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.z_ratio < 1.0:
            raise ValueError(f"z_ratio must lie in (0, 1), got {self.z_ratio}")


@dataclass(frozen=True)
class WaveguideSpec:
    inv_area: float = 1.0
    pol_projection: float = 1.0
    switch_on_time: float = 0.0
    edge: EdgeSpec | None = None

    def __post_init__(self):
        if self.inv_area < 0:
            raise ValueError("inv_area must be >= 0")
        if not -1.0 <= self.pol_projection <= 1.0:
            raise ValueError("pol_projection must lie in [-1, 1]")

    @property
    def friction(self) -> float:
        """Coefficient gamma in E_r = -gamma dR/dt."""
        g = FOUR_PI_ALPHA * self.inv_area * self.pol_projection**2
        if self.edge is not None:
            g *= edge_modulation(self.edge)
        return g


def _sinc(u):
    return 1.0 if u == 0 else math.sin(u) / u


def edge_modulation(spec: EdgeSpec | float) -> float:
    """Emission factor for a dipole at height z0 = z_ratio * L_z between two mirrors."""
    z = spec.z_ratio if isinstance(spec, EdgeSpec) else float(spec)
    if not 0.0 < z < 1.0:
        raise ValueError(f"z_ratio must lie in (0, 1), got {z}")
    return (1.0 - _sinc(2 * math.pi * z)) * (1.0 - _sinc(2 * math.pi * (1.0 - z)))


def rr_slope_1d(r_dot: float, spec: WaveguideSpec, t: float = math.inf) -> float:
    if t < spec.switch_on_time:
        return 0.0
    return -spec.friction * r_dot


def radiated_field(r_dot: float, spec: WaveguideSpec) -> float:
    """Field radiated into the waveguide at the emitter position."""
    return -spec.friction * r_dot


@dataclass(frozen=True)
class AbrahamLorentzSpec:
    omega_n: float
    mode: str = "harmonic"
    purcell_factor: float = 1.0
    switch_on_time: float = 0.0

    def __post_init__(self):
        if self.mode not in ("harmonic", "jerk"):
            raise ValueError(f"mode must be 'harmonic' or 'jerk', got {self.mode!r}")
        if self.mode == "harmonic" and not self.omega_n > 0:
            raise ValueError("harmonic mode requires omega_n > 0")

    @property
    def friction(self) -> float:
        # omega_n^2 / (6 pi eps0 c^3) in a.u.
        return self.purcell_factor * (2.0 / 3.0) * self.omega_n**2 * ALPHA**3


def al3d_slope(r_dot: float, spec: AbrahamLorentzSpec) -> float:
    """Free-space radiation reaction with the harmonic closure d2R/dt2 = -omega_n^2 R."""
    if spec.mode != "harmonic":
        raise ValueError("al3d_slope needs harmonic mode; use al3d_slope_jerk for the jerk form")
    return -spec.friction * r_dot


def _backward_weights(npts: int, order: int) -> np.ndarray:
    """Finite-difference weights for the `order`-th derivative at the last of npts samples."""
    offsets = np.arange(-(npts - 1), 1, dtype=float)
    vander = np.vander(offsets, increasing=True).T
    rhs = np.zeros(npts)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(vander, rhs)


def al3d_slope_jerk(r_history, dt: float, spec: AbrahamLorentzSpec, rough_tol: float = 0.05) -> float:
    """Abraham-Lorentz slope from the third derivative of the stored dipole.

    Unstable in general (runaway solutions); kept for documentation and
    comparison only. Raises when two third-derivative stencils disagree,
    which signals a history too noisy to differentiate three times.
    """
    r = np.asarray(r_history, dtype=float)
    if r.size < 7:
        raise ValueError("jerk mode needs at least 7 history samples")
    # one-sided 5-point and 7-point estimates at the last sample
    j5 = float(np.dot(_backward_weights(5, 3), r[-5:])) / dt**3
    j7 = float(np.dot(_backward_weights(7, 3), r[-7:])) / dt**3
    scale = max(abs(j5), abs(j7), 1e-300)
    if abs(j5 - j7) > rough_tol * scale:
        raise JerkInstabilityError(
            "third derivative of the dipole history is not resolved (runaway hazard); "
            "use mode='harmonic'"
        )
    # electron force -(2/3) alpha^3 d3R/dt3, i.e. E_r = +(2/3) alpha^3 d3R/dt3;
    # with d3R/dt3 = -omega^2 dR/dt this is the harmonic friction
    return spec.purcell_factor * (2.0 / 3.0) * ALPHA**3 * j7


# ---------------------------------------------------------------------------
# Memory kernels
# ---------------------------------------------------------------------------


@dataclass
class KernelTable:
    """Causal memory kernel K(tau_j), tau_j = j dt, with E_r(t) = -sum_j K_j dR/dt(t - tau_j) dt.

    Samples carry their quadrature weight: a smooth kernel built with
    `from_modes` stores K_0/2 (trapezoid), while `delta` stores the full
    instantaneous weight in K_0.
    """

    kernel: np.ndarray
    dt: float
    switch_on_time: float = 0.0

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=float)
        if self.kernel.ndim != 1 or self.kernel.size == 0:
            raise ValueError("kernel must be a non-empty 1D array")
        if not np.all(np.isfinite(self.kernel)):
            raise ValueError("kernel contains non-finite values")
        if not self.dt > 0:
            raise ValueError("kernel dt must be positive")

    @property
    def tau_max(self) -> float:
        return (self.kernel.size - 1) * self.dt

    @classmethod
    def delta(cls, inv_area: float, dt: float, pol: float = 1.0, switch_on_time: float = 0.0):
        """The ideal-waveguide kernel 4 pi alpha A^-1 pol^2 delta(tau)."""
        return cls(np.array([FOUR_PI_ALPHA * inv_area * pol**2 / dt]), dt, switch_on_time)

    @classmethod
    def from_modes(cls, omegas, couplings, dt: float, tau_max: float, switch_on_time: float = 0.0):
        """Cosine-sum kernel sum_k lambda_k^2 cos(omega_k tau) of a discrete mode set."""
        n = int(round(tau_max / dt)) + 1
        tau = np.arange(n) * dt
        omegas = np.asarray(omegas, dtype=float)
        lam2 = np.asarray(couplings, dtype=float) ** 2
        k = np.cos(np.outer(tau, omegas)) @ lam2
        k[0] *= 0.5
        return cls(k, dt, switch_on_time)

    @classmethod
    def from_spectral_density(cls, omegas, density, dt: float, tau_max: float, switch_on_time: float = 0.0):
        """K(tau) = int J(omega) cos(omega tau) d omega for a continuous coupling density J."""
        omegas = np.asarray(omegas, dtype=float)
        density = np.asarray(density, dtype=float)
        n = int(round(tau_max / dt)) + 1
        tau = np.arange(n) * dt
        k = np.trapezoid(density[None, :] * np.cos(np.outer(tau, omegas)), omegas, axis=1)
        k[0] *= 0.5
        return cls(k, dt, switch_on_time)

    @classmethod
    def from_file(cls, path, switch_on_time: float = 0.0, rtol: float = 1e-6):
        """Read a two-column (tau, K) text table; `#` starts a comment."""
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns, found {data.shape[1]}")
        tau, k = data[:, 0], data[:, 1]
        if tau.size == 1:
            raise ValueError(f"{path}: a single sample cannot define the spacing")
        steps = np.diff(tau)
        dt = float(steps[0])
        if abs(tau[0]) > rtol * dt or not np.allclose(steps, dt, rtol=rtol, atol=0):
            raise ValueError(f"{path}: tau must start at 0 and be uniformly spaced")
        return cls(k, dt, switch_on_time)

    def to_file(self, path):
        tau = np.arange(self.kernel.size) * self.dt
        header = "tau_au K_au"
        np.savetxt(Path(path), np.column_stack([tau, self.kernel]), fmt="%.17g", header=header)

    def resample(self, dt: float) -> "KernelTable":
        """Linear resampling of the underlying kernel onto a new spacing."""
        if self.kernel.size == 1:
            # an instantaneous kernel keeps its integrated weight
            return KernelTable(self.kernel * self.dt / dt, dt, self.switch_on_time)
        tau_old = np.arange(self.kernel.size) * self.dt
        raw = self.kernel.copy()
        raw[0] *= 2.0
        n = int(math.floor(self.tau_max / dt + 1e-9)) + 1
        new = np.interp(np.arange(n) * dt, tau_old, raw)
        new[0] *= 0.5
        return KernelTable(new, dt, self.switch_on_time)


def kernel_field(current_history, table: KernelTable, dt: float | None = None) -> float:
    """Radiated field from a causal convolution of the dR/dt history (latest sample last)."""
    if dt is not None and not math.isclose(dt, table.dt, rel_tol=1e-9):
        raise KernelResampleError(
            f"history spacing {dt} differs from kernel spacing {table.dt}; call table.resample({dt})"
        )
    h = np.asarray(current_history, dtype=float)
    m = min(h.size, table.kernel.size)
    if m == 0:
        return 0.0
    recent = h[::-1][:m]
    return float(-np.dot(table.kernel[:m], recent) * table.dt)


# ---------------------------------------------------------------------------
# Explicit modes: single cavity mode and discretized mode bath
# ---------------------------------------------------------------------------


def cavity_coupling(g_over_omega: float, omega_c: float) -> float:
    """lambda = sqrt(1/(eps0 V)) from g = e a0 sqrt(hbar omega_c / (2 eps0 V))."""
    g = g_over_omega * omega_c
    return g * math.sqrt(2.0 / omega_c)


@dataclass(frozen=True)
class CavitySpec:
    omega_c: float
    coupling_lambda: float
    switch_on_time: float = 0.0

    @classmethod
    def from_g_ratio(cls, omega_c: float, g_over_omega: float, switch_on_time: float = 0.0):
        return cls(omega_c, cavity_coupling(g_over_omega, omega_c), switch_on_time)

    @property
    def g(self) -> float:
        return self.coupling_lambda * math.sqrt(self.omega_c / 2.0)


@dataclass(frozen=True)
class CavityModeState:
    """Single mode driven by dR/dt.

    Stores the running convolutions C = int cos(w(t-t')) dR/dt' dt' and
    S = int sin(w(t-t')) dR/dt' dt'. In oscillator language
    omega_c q - lambda R = -lambda C and p = lambda S.
    """

    omega_c: float
    coupling_lambda: float
    conv_cos: float = 0.0
    conv_sin: float = 0.0
    r_dot_prev: float = 0.0

    @property
    def p(self) -> float:
        return self.coupling_lambda * self.conv_sin

    def q(self, r: float) -> float:
        return self.coupling_lambda * (r - self.conv_cos) / self.omega_c

    @property
    def energy(self) -> float:
        """Mode energy 1/2 [p^2 + (omega q - lambda R)^2]."""
        return 0.5 * self.coupling_lambda**2 * (self.conv_cos**2 + self.conv_sin**2)

    @property
    def slope(self) -> float:
        return -self.coupling_lambda**2 * self.conv_cos


def cavity_step(state: CavityModeState, r_dot: float, dt: float):
    """Advance the mode by dt (exact rotation, trapezoidal source); return (state, slope)."""
    rot = cmath.exp(1j * state.omega_c * dt)
    z = complex(state.conv_cos, state.conv_sin)
    z = rot * z + 0.5 * dt * (rot * state.r_dot_prev + r_dot)
    new = replace(state, conv_cos=z.real, conv_sin=z.imag, r_dot_prev=r_dot)
    return new, new.slope


def cavity_convolution_slope(r_dot_history, dt: float, omega_c: float, coupling_lambda: float) -> np.ndarray:
    """Direct trapezoidal evaluation of -lambda^2 int_0^t cos(w(t-t')) dR/dt' dt' at every sample.

    O(T^2) reference for `cavity_step`.
    """
    h = np.asarray(r_dot_history, dtype=float)
    n = h.size
    t = np.arange(n) * dt
    out = np.zeros(n)
    for i in range(1, n):
        w = np.full(i + 1, dt)
        w[0] = w[-1] = 0.5 * dt
        out[i] = np.sum(w * np.cos(omega_c * (t[i] - t[: i + 1])) * h[: i + 1])
    return -coupling_lambda**2 * out


@dataclass
class ModeBath:
    """Discrete set of photon modes coupled to R in the length gauge.

    Each mode obeys q'' + w^2 q = w lambda R(t); the potential slope is
    sum_k lambda_k (w_k q_k - lambda_k R), self-polarization included.
    """

    omegas: np.ndarray
    couplings: np.ndarray
    q: np.ndarray = field(default=None)
    p: np.ndarray = field(default=None)
    box_length: float = math.nan
    cutoff: float = math.nan
    r_prev: float = 0.0
    r_dot_prev: float = 0.0
    switch_on_time: float = 0.0

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)
        self.couplings = np.asarray(self.couplings, dtype=float)
        if self.omegas.shape != self.couplings.shape:
            raise ValueError("omegas and couplings must have the same shape")
        if np.any(self.omegas <= 0):
            raise ValueError("mode frequencies must be positive")
        if self.q is None:
            self.q = np.zeros_like(self.omegas)
        if self.p is None:
            self.p = np.zeros_like(self.omegas)

    @classmethod
    def waveguide(cls, inv_area: float, box_length: float, cutoff: float, pol: float = 1.0,
                  switch_on_time: float = 0.0):
        """Modes w_n = 2 pi c n / L (n = 1..N) of a periodic waveguide of cross-section A.

        The +k/-k pair at each |k| is collapsed into one mode with
        lambda^2 = 2 / (eps0 V) = 8 pi A^-1 / L.
        """
        dw = 2 * math.pi * C_LIGHT / box_length
        n_max = int(math.floor(cutoff / dw))
        if n_max < 1:
            raise ValueError("cutoff below the lowest box mode")
        omegas = dw * np.arange(1, n_max + 1)
        lam = math.sqrt(8 * math.pi * inv_area / box_length) * abs(pol)
        return cls(omegas, np.full(n_max, lam), box_length=box_length, cutoff=cutoff,
                   switch_on_time=switch_on_time)

    @property
    def n_modes(self) -> int:
        return self.omegas.size

    @property
    def markov_friction(self) -> float:
        """Friction of the continuum limit: half the delta weight of sum_k lambda_k^2 cos(w_k tau).

        The causal integral int_{t0}^t delta(t - t') f(t') dt' picks up f(t)/2.
        """
        dw = self.omegas[1] - self.omegas[0] if self.n_modes > 1 else self.omegas[0]
        return 0.5 * math.pi * float(np.mean(self.couplings**2)) / dw

    def initialize(self, r0: float) -> "ModeBath":
        """Relaxed start with no prior dynamics: q_k = lambda_k R0 / w_k, p_k = 0."""
        self.q = self.couplings * r0 / self.omegas
        self.p = np.zeros_like(self.omegas)
        self.r_prev = r0
        self.r_dot_prev = 0.0
        return self

    def slope(self, r: float) -> float:
        return float(np.sum(self.couplings * (self.omegas * self.q - self.couplings * r)))

    def energy(self, r: float) -> float:
        return float(0.5 * np.sum(self.p**2 + (self.omegas * self.q - self.couplings * r) ** 2))

    def copy(self) -> "ModeBath":
        return replace(self, q=self.q.copy(), p=self.p.copy())


def _advance_modes(z, omegas, couplings, r0, rd0, r1, rd1, h):
    """z = p + i w q under z' = i w z + w lambda R(t), over one interval of length h.

    Exact rotation; the source integral uses the trapezoid rule with the
    Euler-Maclaurin end correction built from dR/dt (fourth order).
    """
    rot = np.exp(1j * omegas * h)
    f0 = omegas * couplings * r0
    f1 = omegas * couplings * r1
    df0 = omegas * couplings * rd0 - 1j * omegas * f0
    df1 = omegas * couplings * rd1 - 1j * omegas * f1
    integral = 0.5 * h * (rot * f0 + f1) + h * h / 12.0 * (rot * df0 - df1)
    return rot * z + integral


def bath_step(bath: ModeBath, r: float, r_dot: float, dt: float):
    """Advance every mode from the previous (R, dR/dt) to (r, r_dot); return (bath, slope)."""
    z = bath.p + 1j * bath.omegas * bath.q
    z = _advance_modes(z, bath.omegas, bath.couplings, bath.r_prev, bath.r_dot_prev, r, r_dot, dt)
    new = replace(bath, q=z.imag / bath.omegas, p=z.real.copy(), r_prev=r, r_dot_prev=r_dot)
    return new, new.slope(r)
