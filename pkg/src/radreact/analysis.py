"""Frequency-domain post-processing of trajectories.

Transforms use F(w) = sum_n f(t_n) exp(i w t_n) dt with no window, so a
response R = alpha E gives Im alpha > 0 on absorption lines at positive w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import curve_fit, least_squares

from .constants import BOHR_ANGSTROM, C_LIGHT, HARTREE_EV
from .propagation import TrajectoryRecord


class InsufficientResolution(ValueError):
    """A spectral line spans too few frequency bins to measure its width."""


@dataclass
class Spectrum:
    omega: np.ndarray  # ascending, a.u.
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def omega_ev(self) -> np.ndarray:
        return self.omega * HARTREE_EV

    @property
    def resolution(self) -> float:
        return float(self.omega[1] - self.omega[0]) if self.omega.size > 1 else math.inf

    def positive(self) -> "Spectrum":
        keep = self.omega >= 0
        return Spectrum(self.omega[keep], self.values[keep], dict(self.meta))

    def window(self, lo: float, hi: float) -> "Spectrum":
        keep = (self.omega >= lo) & (self.omega <= hi)
        return Spectrum(self.omega[keep], self.values[keep], dict(self.meta))

    def at(self, omega: float):
        """Value at the bin nearest to `omega`."""
        return self.values[int(np.argmin(np.abs(self.omega - omega)))]


@dataclass(frozen=True)
class LineshapeFit:
    center: float  # eV
    fwhm: float  # eV
    gamma: float  # eV, fwhm / 2
    peak_height: float
    interp_center: float
    interp_fwhm: float
    fitted: bool
    disagreement: bool

    @property
    def center_au(self) -> float:
        return self.center / HARTREE_EV

    @property
    def gamma_au(self) -> float:
        return self.gamma / HARTREE_EV


def fourier(series, dt: float, t0: float = 0.0, pad_to: int | None = None,
            damping: float | None = None) -> Spectrum:
    """Unwindowed transform on the full symmetric frequency grid.

    `pad_to` zero-pads to that many samples; `damping` multiplies by
    exp(-damping (t - t0)) first. Both are off by default.
    """
    f = np.asarray(series)
    if f.size == 0:
        raise ValueError("cannot transform an empty series")
    if damping:
        f = f * np.exp(-damping * dt * np.arange(f.size))
    n = f.size if pad_to is None else max(int(pad_to), f.size)
    # sum_n f_n e^{+i w_k n dt} = n * ifft(f)_k
    vals = np.fft.ifft(f, n=n) * (n * dt)
    omega = 2.0 * np.pi * np.fft.fftfreq(n, d=dt)
    vals = vals * np.exp(1j * omega * t0)
    order = np.argsort(omega, kind="stable")
    return Spectrum(omega[order], vals[order])


def polarizability(record: TrajectoryRecord, pad_to: int | None = None,
                   damping: float | None = None, mask_rel: float = 1e-14) -> Spectrum:
    """alpha(w) = R_ind(w) / E(w) with R_ind = R - R(0); masked to 0 where E(w) is negligible."""
    dt = record.sample_dt
    t0 = float(record.t[0])
    r = fourier(record.dipole - record.dipole[0], dt, t0, pad_to, damping)
    e = fourier(record.drive, dt, t0, pad_to, damping)
    mag = np.abs(e.values)
    good = mag > mask_rel * mag.max() if mag.max() > 0 else np.zeros(mag.size, dtype=bool)
    alpha = np.zeros_like(r.values)
    alpha[good] = r.values[good] / e.values[good]
    return Spectrum(r.omega, alpha, {"masked": int(np.count_nonzero(~good)), "duration": record.t.size * dt})


def cross_section(alpha: Spectrum) -> Spectrum:
    """sigma = 4 pi w Im alpha / c in bohr^2; `meta['angstrom2']` holds the A^2 values."""
    sigma = 4.0 * np.pi * alpha.omega * np.imag(alpha.values) / C_LIGHT
    return Spectrum(alpha.omega, sigma, {"angstrom2": sigma * BOHR_ANGSTROM**2})


def hhg_spectrum(record: TrajectoryRecord, omega_l: float, n_harmonics: int = 15,
                 pad_to: int | None = None) -> Spectrum:
    """|E_r(w)|^2 on positive frequencies with harmonic orders n w_L in the metadata."""
    spec = fourier(record.radiated, record.sample_dt, float(record.t[0]), pad_to).positive()
    power = np.abs(spec.values) ** 2
    orders = np.arange(1, n_harmonics + 1)
    return Spectrum(spec.omega, power, {
        "omega_l": omega_l,
        "orders": orders,
        "harmonic_omega": orders * omega_l,
        "log10_power": np.log10(np.maximum(power, np.finfo(float).tiny)),
    })


def harmonic_peaks(spec: Spectrum, omega_l: float, orders, rel_halfwidth: float = 0.25) -> np.ndarray:
    """Largest |E_r|^2 within +-rel_halfwidth*w_L of each harmonic position."""
    out = []
    for n in orders:
        lo, hi = (n - rel_halfwidth) * omega_l, (n + rel_halfwidth) * omega_l
        sel = (spec.omega >= lo) & (spec.omega <= hi)
        out.append(spec.values[sel].max() if np.any(sel) else np.nan)
    return np.array(out)


def _lorentzian(w, height, center, gamma):
    return height * gamma**2 / ((w - center) ** 2 + gamma**2)


def _half_max_crossings(w, y, ipk):
    half = 0.5 * y[ipk]
    i = ipk
    while i > 0 and y[i - 1] > half:
        i -= 1
    if i == 0:
        raise InsufficientResolution("left half-maximum crossing lies outside the window")
    lo = w[i - 1] + (half - y[i - 1]) * (w[i] - w[i - 1]) / (y[i] - y[i - 1])
    j = ipk
    while j < y.size - 1 and y[j + 1] > half:
        j += 1
    if j == y.size - 1:
        raise InsufficientResolution("right half-maximum crossing lies outside the window")
    hi = w[j] + (half - y[j]) * (w[j + 1] - w[j]) / (y[j + 1] - y[j])
    return lo, hi, j - i + 1


def fwhm(spectrum: Spectrum, window: tuple[float, float] | None = None, refine: bool = True,
         min_bins: int = 3, fit_span: float = 3.0, tolerance: float = 0.1) -> LineshapeFit:
    """Width of the dominant line in `window` (a.u.), from half-max crossings and a Lorentzian fit.

    Raises InsufficientResolution when fewer than `min_bins` samples lie above half maximum.
    """
    spec = spectrum if window is None else spectrum.window(*window)
    w = spec.omega
    y = np.real(spec.values).astype(float)
    if y.size < 3:
        raise InsufficientResolution("window holds fewer than 3 bins")
    ipk = int(np.argmax(y))
    if not y[ipk] > 0:
        raise InsufficientResolution("no positive peak inside the window")
    lo, hi, n_above = _half_max_crossings(w, y, ipk)
    if n_above < min_bins:
        raise InsufficientResolution(
            f"line spans {n_above} bins above half maximum; at least {min_bins} are needed"
        )
    c_int = 0.5 * (lo + hi)
    fw_int = hi - lo
    center, width, height, fitted = c_int, fw_int, y[ipk], False
    if refine:
        sel = np.abs(w - w[ipk]) <= fit_span * fw_int
        try:
            popt, _ = curve_fit(_lorentzian, w[sel], y[sel], p0=(y[ipk], w[ipk], 0.5 * fw_int), maxfev=5000)
            if popt[2] != 0 and np.all(np.isfinite(popt)):
                height, center, width, fitted = popt[0], popt[1], 2.0 * abs(popt[2]), True
        except RuntimeError:
            pass
    disagree = abs(width - fw_int) > tolerance * fw_int
    return LineshapeFit(
        center=center * HARTREE_EV, fwhm=width * HARTREE_EV, gamma=0.5 * width * HARTREE_EV,
        peak_height=float(height), interp_center=c_int * HARTREE_EV, interp_fwhm=fw_int * HARTREE_EV,
        fitted=fitted, disagreement=bool(disagree),
    )


@dataclass(frozen=True)
class EnergyLedger:
    t: np.ndarray
    emitted: np.ndarray  # cumulative -int E_r dR/dt dt
    total: np.ndarray  # E_e + emitted
    residual: float  # max |total - total(t_off)| / |E_e(t_off)| for t >= t_off


def energy_ledger(record: TrajectoryRecord, t_off: float | None = None) -> EnergyLedger:
    """Trapezoidal emitted-energy integral and closure residual after `t_off` (default: start)."""
    integrand = -record.radiated * record.dipole_velocity
    emitted = cumulative_trapezoid(integrand, record.t, initial=0.0)
    total = record.energy + emitted
    t_off = record.t[0] if t_off is None else t_off
    after = record.t >= t_off
    if not np.any(after):
        return EnergyLedger(record.t, emitted, total, 0.0)
    i0 = int(np.argmax(after))
    ref = total[i0]
    scale = abs(record.energy[i0]) or 1.0
    residual = float(np.max(np.abs(total[after] - ref)) / scale)
    return EnergyLedger(record.t, emitted, total, residual)


@dataclass(frozen=True)
class PoleFit:
    center: float  # eV, real part of the pole
    gamma: float  # eV, minus the imaginary part
    residue: complex
    record_limited: bool = False

    @property
    def center_au(self) -> float:
        return self.center / HARTREE_EV

    @property
    def gamma_au(self) -> float:
        return self.gamma / HARTREE_EV


def fit_pole(alpha: Spectrum, window: tuple[float, float] | None = None,
             half_widths: float = 1.5) -> PoleFit:
    """Complex pole of the dominant line of a polarizability spectrum.

    Fits a / (p - w) + a* / (p* + w) + b0 + b1 (w - w_pk) with p = W - i G to
    alpha(w) within +-half_widths G of the Im alpha maximum, where G comes from
    a first Lorentzian fit of Im alpha. The pole, unlike the cross-section
    maximum, carries the radiative shift of the resonance.

    A line narrower than ~10 / duration (alpha.meta['duration']) is limited by
    the record length; its centre is then taken from the symmetric Lorentzian
    fit of Im alpha and the result is flagged `record_limited`.
    """
    im = Spectrum(alpha.omega, np.imag(alpha.values))
    first = fwhm(im, window)
    c0, g0 = first.center_au, first.gamma_au
    duration = alpha.meta.get("duration")
    if duration and g0 * duration < 10.0:
        return PoleFit(first.center, first.gamma, complex(first.peak_height * g0), record_limited=True)
    half = half_widths * g0
    spec = alpha.window(c0 - half, c0 + half)
    w, y = spec.omega, spec.values
    if w.size < 8:
        raise InsufficientResolution(f"pole fit window holds {w.size} bins; at least 8 are needed")

    def model(p):
        a = p[0] + 1j * p[1]
        pole = p[2] - 1j * p[3]
        return a / (pole - w) + np.conj(a) / (np.conj(pole) + w) + (p[4] + 1j * p[5]) + (p[6] + 1j * p[7]) * (w - c0)

    def resid(p):
        d = model(p) - y
        return np.concatenate([d.real, d.imag])

    height = float(np.max(np.imag(y)))
    sol = least_squares(resid, [height * g0, 0.0, c0, g0, 0.0, 0.0, 0.0, 0.0], x_scale="jac")
    if not sol.success or not np.all(np.isfinite(sol.x)):
        raise InsufficientResolution("complex pole fit did not converge")
    return PoleFit(sol.x[2] * HARTREE_EV, abs(sol.x[3]) * HARTREE_EV, complex(sol.x[0], sol.x[1]))


def line_center(spectrum: Spectrum, window: tuple[float, float] | None = None) -> float:
    """Line centre in eV: pole fit for complex spectra, Lorentzian fit for real ones."""
    if np.iscomplexobj(spectrum.values):
        return fit_pole(spectrum, window).center
    return fwhm(spectrum, window).center


def peak_shift(spectrum_on: Spectrum, spectrum_off: Spectrum,
               window: tuple[float, float] | None = None) -> float:
    """Fitted-centre difference (on minus off) in meV."""
    return (line_center(spectrum_on, window) - line_center(spectrum_off, window)) * 1e3
