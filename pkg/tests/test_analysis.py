import math

import numpy as np
import pytest

import oracles
from radreact import analysis
from radreact.analysis import InsufficientResolution, Spectrum
from radreact.constants import C_LIGHT, HARTREE_EV
from radreact.propagation import TrajectoryRecord


def make_record(t, dipole, drive=None, rdot=None, radiated=None, energy=None, stride=1):
    z = np.zeros_like(t)
    return TrajectoryRecord(
        t=t, dipole=dipole, dipole_velocity=z if rdot is None else rdot,
        drive=z if drive is None else drive, radiated=z if radiated is None else radiated,
        energy=z if energy is None else energy, emitted=z.copy(), norm=np.ones_like(t), work=z.copy(),
        dt=float(t[1] - t[0]) / stride, stride=stride,
    )


def test_fourier_cosine_peak():
    dt, n, w0 = 0.05, 8000, 0.4
    t = np.arange(n) * dt
    spec = analysis.fourier(np.cos(w0 * t), dt).positive()
    assert abs(spec.omega[np.argmax(np.abs(spec.values))] - w0) <= spec.resolution


def test_fourier_hermitian():
    rng = np.random.default_rng(1)
    f = rng.normal(size=256)
    spec = analysis.fourier(f, 0.1)
    vals = dict(zip(np.round(spec.omega, 12), spec.values))
    for w, v in vals.items():
        if -w in vals:
            assert vals[-w] == pytest.approx(np.conj(v), abs=1e-12)


def test_fourier_resolution_and_padding():
    spec = analysis.fourier(np.ones(100), 0.1)
    assert spec.resolution == pytest.approx(2 * math.pi / (100 * 0.1))
    padded = analysis.fourier(np.ones(100), 0.1, pad_to=400)
    assert padded.resolution == pytest.approx(spec.resolution / 4)
    with pytest.raises(ValueError):
        analysis.fourier([], 0.1)


def test_fourier_damped_cosine_is_lorentzian():
    dt, gam, w0 = 0.05, 0.01, 0.4
    t = np.arange(int(2000 / dt)) * dt
    spec = analysis.fourier(oracles.damped_cosine(t, w0, gam), dt).positive()
    fit = analysis.fwhm(Spectrum(spec.omega, spec.values.real), (0.3, 0.5))
    assert abs(fit.gamma_au - gam) <= spec.resolution


def test_polarizability_zero_response():
    t = np.arange(1000) * 0.05
    drive = np.zeros_like(t)
    drive[2] = 1.0
    alpha = analysis.polarizability(make_record(t, np.zeros_like(t), drive))
    assert np.all(alpha.values == 0)


def test_polarizability_recovers_transfer_function():
    # R = h * E for a causal damped oscillator; alpha must reproduce h(w)
    dt, n = 0.05, 200000
    t = np.arange(n) * dt
    w0, gam = 0.4, 0.01
    h = np.sin(w0 * t) * np.exp(-gam * t) / w0
    drive = np.zeros(n)
    drive[0] = 1.0 / dt
    rec = make_record(t, h, drive)
    alpha = analysis.polarizability(rec).positive()
    ref = 1.0 / (w0**2 - (alpha.omega + 1j * gam) ** 2)
    sel = (alpha.omega > 0.2) & (alpha.omega < 0.6)
    assert np.max(np.abs(alpha.values[sel] - ref[sel])) < 0.02 * np.max(np.abs(ref[sel]))


def test_cross_section_zero_cases():
    w = np.linspace(0, 1, 11)
    assert np.all(analysis.cross_section(Spectrum(w, np.ones(11, dtype=complex))).values == 0)
    sig = analysis.cross_section(Spectrum(w, np.full(11, 1 + 2j)))
    assert sig.values[0] == 0
    assert sig.values[5] == pytest.approx(4 * math.pi * 0.5 * 2 / C_LIGHT)


def test_fwhm_synthetic_lorentzian():
    w = np.linspace(9.0, 12.0, 3001) / HARTREE_EV
    g = 0.05 / HARTREE_EV
    c = 10.5 / HARTREE_EV
    y = g**2 / ((w - c) ** 2 + g**2)
    fit = analysis.fwhm(Spectrum(w, y))
    assert fit.fwhm == pytest.approx(0.10, rel=0.02)
    assert fit.gamma == pytest.approx(fit.fwhm / 2)
    assert abs(fit.center_au - w[np.argmax(y)]) <= w[1] - w[0]


def test_fwhm_refuses_unresolved_line():
    w = np.linspace(0, 1, 101)
    y = np.zeros(101)
    y[50] = 1.0
    with pytest.raises(InsufficientResolution):
        analysis.fwhm(Spectrum(w, y))
    with pytest.raises(InsufficientResolution):
        analysis.fwhm(Spectrum(w, np.exp(-w)))


def test_fit_pole_synthetic():
    p = 0.39 - 0.02j
    a = 0.7 - 0.05j
    w = np.linspace(0.2, 0.6, 4001)
    alpha = a / (p - w) + np.conj(a) / (np.conj(p) + w)
    fit = analysis.fit_pole(Spectrum(w, alpha, {"duration": 1e5}))
    assert fit.center_au == pytest.approx(p.real, rel=1e-8)
    assert fit.gamma_au == pytest.approx(-p.imag, rel=1e-6)
    assert not fit.record_limited


def test_peak_shift_identical_is_zero():
    p = 0.39 - 0.02j
    w = np.linspace(0.2, 0.6, 2001)
    alpha = Spectrum(w, 1 / (p - w) + 1 / (np.conj(p) + w), {"duration": 1e5})
    assert analysis.peak_shift(alpha, alpha) == 0.0
    shifted = Spectrum(w, 1 / (p - 0.001 - w) + 1 / (np.conj(p) - 0.001 + w), {"duration": 1e5})
    assert analysis.peak_shift(shifted, alpha) == pytest.approx(-0.001 * HARTREE_EV * 1e3, rel=1e-5)


def test_energy_ledger_static_dipole():
    t = np.arange(100) * 0.1
    rec = make_record(t, np.ones_like(t), energy=np.full_like(t, -0.5))
    led = analysis.energy_ledger(rec)
    assert np.all(led.emitted == 0)
    assert led.residual == 0.0


def test_energy_ledger_monotone_for_friction():
    t = np.arange(2000) * 0.05
    rdot = np.sin(0.4 * t) * np.exp(-0.01 * t)
    led = analysis.energy_ledger(make_record(t, np.zeros_like(t), rdot=rdot, radiated=-0.09 * rdot))
    assert np.all(np.diff(led.emitted) >= 0)


def test_hhg_spectrum_linear_regime_only_fundamental():
    dt, wl = 0.5, 0.0428
    t = np.arange(24000) * dt
    env = np.exp(-(((t - 6000) / 1500) ** 2))
    rec = make_record(t, np.zeros_like(t), radiated=1e-6 * env * np.sin(wl * t))
    spec = analysis.hhg_spectrum(rec, wl, 9)
    peaks = analysis.harmonic_peaks(spec, wl, range(1, 10), 0.1)
    assert np.all(peaks[1:] < 1e-3 * peaks[0])
    assert list(spec.meta["orders"]) == list(range(1, 10))
