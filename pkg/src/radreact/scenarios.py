"""Scenario runners: build the model from a Scenario, propagate, analyse.

Each runner returns a ScenarioResult holding summary numbers and the tables
that the command line writes to disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analysis, theory
from .config import Scenario
from .constants import C_LIGHT, FOUR_PI_ALPHA, HARTREE_EV
from .core import EigenSolution, Grid1D, eigenstates, soft_coulomb
from .driving import CWSpec, KickSpec, PulseSpec
from .environments import (
    AbrahamLorentzSpec,
    CavitySpec,
    EdgeSpec,
    KernelTable,
    ModeBath,
    WaveguideSpec,
    edge_modulation,
)
from .propagation import Drives, PropagatorConfig, RunResult, SimulationState, TrajectoryRecord, propagate

MAX_SAMPLES = 400_000


@dataclass
class ModelSystem:
    grid: Grid1D
    potential: np.ndarray
    eig: EigenSolution

    @property
    def omega_eg(self) -> float:
        return self.eig.excitation_energy

    @property
    def r_eg(self) -> float:
        return abs(self.eig.transition_dipole(0, 1))

    def two_level(self, inv_area: float, pol: float = 1.0) -> theory.TwoLevelData:
        return theory.TwoLevelData(self.omega_eg, self.r_eg, inv_area, pol)


@dataclass
class ScenarioResult:
    name: str
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # file name -> (header, rows)
    record: TrajectoryRecord | None = None


def build_system(s: Scenario) -> ModelSystem:
    grid = Grid1D(s.grid.n_points, s.grid.spacing)
    pot = soft_coulomb(grid, s.grid.softening)
    return ModelSystem(grid, pot, eigenstates(pot, grid, 2, s.grid.stencil))


def initial_state(s: Scenario, system: ModelSystem) -> np.ndarray:
    phi = system.eig.states
    if s.initial.state == "ground":
        return phi[0].astype(complex)
    if s.initial.state == "excited":
        return phi[1].astype(complex)
    return ((phi[0] + phi[1]) / math.sqrt(2.0)).astype(complex)


def waveguide_spec(s: Scenario, inv_area: float | None = None) -> WaveguideSpec:
    edge = None if s.waveguide.edge_z == 0.5 else EdgeSpec(s.waveguide.edge_z)
    return WaveguideSpec(
        inv_area=s.waveguide.inv_area if inv_area is None else inv_area,
        pol_projection=s.waveguide.pol_projection,
        switch_on_time=s.waveguide.switch_on_time,
        edge=edge,
    )


def effective_inv_area(s: Scenario) -> float:
    """A^-1 that enters the two-level rate, folding in polarization and edge factor."""
    edge = edge_modulation(s.waveguide.edge_z)
    return s.waveguide.inv_area * s.waveguide.pol_projection**2 * edge


def environments(s: Scenario, system: ModelSystem, total_time: float) -> list:
    envs = []
    if s.waveguide.inv_area > 0:
        envs.append(waveguide_spec(s))
    if s.cavity.enabled:
        envs.append(CavitySpec.from_g_ratio(s.cavity.omega_c, s.cavity.g_over_omega, s.cavity.switch_on_time))
    if s.bath.enabled:
        box = s.bath.box_length or 1.2 * total_time * C_LIGHT
        envs.append(ModeBath.waveguide(s.bath.inv_area, box, s.bath.cutoff, s.waveguide.pol_projection,
                                       switch_on_time=0.0))
    if s.al3d.enabled:
        omega_n = s.al3d.omega_n or system.omega_eg
        envs.append(AbrahamLorentzSpec(omega_n, purcell_factor=s.al3d.purcell_factor,
                                       switch_on_time=s.al3d.switch_on_time))
    if s.kernel.file:
        table = KernelTable.from_file(s.kernel.file, switch_on_time=s.kernel.switch_on_time)
        if not math.isclose(table.dt, s.propagator.dt, rel_tol=1e-9):
            table = table.resample(s.propagator.dt)
        envs.append(table)
    return envs


def drives(s: Scenario, system: ModelSystem) -> Drives:
    kick = KickSpec(s.kick.strength, s.kick.center, s.kick.width_sq) if s.kick.enabled else None
    pulse = (PulseSpec(s.pulse.amplitude, s.pulse.omega, s.pulse.center, s.pulse.width)
             if s.pulse.enabled else None)
    cw = None
    if s.cw.enabled:
        cw = CWSpec(s.cw.amplitude, s.cw.omega or system.omega_eg, s.cw.ramp_periods, s.cw.t_on, s.cw.t_off)
    return Drives(kick, pulse, cw)


def run_length(s: Scenario, system: ModelSystem) -> tuple[float, int]:
    """Total time and record stride, extended so the line decays by exp(-decay_lengths)."""
    total, stride = s.propagator.total_time, s.propagator.stride
    if s.propagator.auto_extend:
        gam = theory.gamma_rr(system.two_level(effective_inv_area(s))) * s.ensemble.n_emitters
        if gam > 0:
            total = max(total, s.propagator.decay_lengths / gam)
        n_steps = math.ceil(total / s.propagator.dt)
        stride = max(stride, math.ceil(n_steps / MAX_SAMPLES))
        total = math.ceil(n_steps / stride) * stride * s.propagator.dt
    return total, stride


def simulate(s: Scenario, system: ModelSystem | None = None, store_history: bool = False) -> RunResult:
    system = system or build_system(s)
    total, stride = run_length(s, system)
    cfg = PropagatorConfig(dt=s.propagator.dt, total_time=total,
                           corrector_iterations=s.propagator.corrector_iterations,
                           stride=stride, stencil=s.grid.stencil, store_history=store_history)
    state = SimulationState.create(initial_state(s, system), system.grid, system.potential,
                                   environments(s, system, total), cfg.dt, s.ensemble.n_emitters)
    return propagate(state, cfg, drives(s, system))


def ensemble_run(n_emitters: int, s: Scenario, system: ModelSystem | None = None) -> RunResult:
    """N identical emitters sharing every environment through R_tot."""
    if n_emitters < 1:
        raise ValueError("n_emitters must be >= 1")
    return simulate(s.replace("ensemble", "n_emitters", n_emitters), system)


# ---------------------------------------------------------------------------
# shared analysis helpers
# ---------------------------------------------------------------------------


def _pad(record: TrajectoryRecord, factor: int):
    return None if factor <= 1 else factor * len(record)


def absorption_spectra(record: TrajectoryRecord, s: Scenario):
    alpha = analysis.polarizability(record, pad_to=_pad(record, s.analysis.pad_factor)).positive()
    return alpha, analysis.cross_section(alpha)


def _window(s: Scenario):
    return s.analysis.window_lo, s.analysis.window_hi


def spectrum_table(alpha: analysis.Spectrum, sigma: analysis.Spectrum, max_omega: float):
    keep = alpha.omega <= max_omega
    rows = np.column_stack([
        alpha.omega[keep], alpha.omega_ev[keep], alpha.values.real[keep], alpha.values.imag[keep],
        sigma.meta["angstrom2"][keep],
    ])
    return ["omega_au", "omega_ev", "re_alpha", "im_alpha", "sigma"], rows


def trajectory_table(record: TrajectoryRecord):
    rows = np.column_stack([record.t, record.dipole, record.dipole_velocity, record.drive,
                            record.radiated, record.energy, record.emitted])
    return ["t", "R", "Rdot", "E_drive", "E_r", "E_e", "dE_rr"], rows


def _local_maxima(y):
    return np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1


def _base_summary(s: Scenario, system: ModelSystem) -> dict:
    return {"scenario": s.name, "omega_eg_ev": system.omega_eg * HARTREE_EV, "r_eg_au": system.r_eg}


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def run_absorption(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    system = system or build_system(s)
    run = simulate(s, system)
    rec = run.record
    alpha, sigma = absorption_spectra(rec, s)
    win = sigma.window(*_window(s))
    i = int(np.argmax(win.values))
    summary = _base_summary(s, system)
    summary.update(total_time=rec.t[-1], peak_ev=win.omega_ev[i], bin_ev=sigma.resolution * HARTREE_EV,
                   gamma_rr_ev=theory.gamma_rr_ev(system.two_level(effective_inv_area(s))))
    try:
        fit = analysis.fwhm(win)
        summary.update(fit_center_ev=fit.center, fwhm_ev=fit.fwhm, gamma_ev=fit.gamma,
                       fwhm_interp_ev=fit.interp_fwhm, fit_disagreement=fit.disagreement)
    except analysis.InsufficientResolution as exc:
        summary["fwhm_note"] = str(exc)
    summary["max_step_norm_drift"] = run.max_step_norm_drift
    return ScenarioResult(s.name, summary, {
        "trajectory.csv": trajectory_table(rec),
        "spectrum.csv": spectrum_table(alpha, sigma, s.analysis.max_omega),
    }, rec)


def pulse_end(s: Scenario) -> float:
    if s.pulse.enabled:
        return s.pulse.center + 5.0 * s.pulse.width
    if s.cw.enabled and math.isfinite(s.cw.t_off):
        return s.cw.t_off
    return s.kick.center + 1.0 if s.kick.enabled else 0.0


def run_decay(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    system = system or build_system(s)
    run = simulate(s, system)
    rec = run.record
    t_off = pulse_end(s)
    after = rec.t >= t_off
    total = rec.energy + rec.emitted
    i0 = int(np.argmax(after))
    closure = float(np.max(np.abs(total[after] - total[i0])) / abs(rec.energy[i0]))
    ledger = analysis.energy_ledger(rec, t_off)
    e0 = rec.energy[0]
    summary = _base_summary(s, system)
    summary.update(
        t_off=t_off,
        drive_work=float(rec.work[-1]),
        peak_excess_energy=float(np.max(rec.energy) - e0),
        emitted_total=float(rec.emitted[-1]),
        final_excess_energy=float(rec.energy[-1] - e0),
        # fraction of the work not accounted for by E_e change plus emission
        balance_residual=float((rec.energy[-1] - e0 + rec.emitted[-1] - rec.work[-1]) / rec.work[-1])
        if rec.work[-1] else 0.0,
        closure_residual=closure,
        ledger_residual=ledger.residual,
        emitted_monotone=bool(np.all(np.diff(rec.emitted) >= 0)),
        max_step_norm_drift=run.max_step_norm_drift,
        max_norm_drift=run.max_norm_drift,
    )
    return ScenarioResult(s.name, summary, {"trajectory.csv": trajectory_table(rec)}, rec)


def run_stimulated(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    system = system or build_system(s)
    omega = s.cw.omega or system.omega_eg
    cases = [("resonant", s.replace("cw", "omega", omega)),
             ("drive_off", s.replace("cw", "enabled", False)),
             ("half_frequency", s.replace("cw", "omega", 0.5 * omega))]
    e0, e1 = system.eig.energies[:2]
    rows, summary, traj = [], _base_summary(s, system), None
    for label, sc in cases:
        rec = simulate(sc, system).record
        # first time half of the excitation energy has left the emitter
        below = np.flatnonzero(rec.energy - e0 < 0.5 * (e1 - e0))
        t_half = float(rec.t[below[0]]) if below.size else math.inf
        w = omega if label == "resonant" else (0.0 if label == "drive_off" else 0.5 * omega)
        rows.append([w, t_half, rec.energy[-1] - e1, float(np.min(rec.energy)) - e1])
        summary[f"{label}_half_decay_time"] = t_half
        summary[f"{label}_final_minus_e1"] = rec.energy[-1] - e1
        if label == "resonant":
            traj = rec
    header = ["omega_au", "half_decay_time", "final_minus_e1", "min_minus_e1"]
    return ScenarioResult(s.name, summary, {
        "trajectory.csv": trajectory_table(traj),
        "stimulated.csv": (header, np.array(rows)),
    }, traj)


def run_eit(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    system = system or build_system(s)
    ref = simulate(s.replace("cavity", "enabled", False), system).record
    alpha_ref, sigma_ref = absorption_spectra(ref, s)
    rec = simulate(s.replace("cavity", "enabled", True), system).record
    alpha, sigma = absorption_spectra(rec, s)
    wc = s.cavity.omega_c
    ref_peak = float(np.max(sigma_ref.window(*_window(s)).values))
    # evaluate at w_c exactly rather than at the nearest bin
    at_wc = float(np.interp(wc, sigma.omega, sigma.values))
    g = s.cavity.g_over_omega * wc
    win = sigma.window(*_window(s))
    peaks = _local_maxima(win.values)
    top = peaks[np.argsort(win.values[peaks])[::-1][:2]] if peaks.size else peaks
    summary = _base_summary(s, system)
    summary.update(omega_c_ev=wc * HARTREE_EV, g_over_omega=s.cavity.g_over_omega, g_ev=g * HARTREE_EV,
                   sigma_at_omega_c=at_wc, bath_only_peak=ref_peak, dip_ratio=at_wc / ref_peak)
    if top.size == 2:
        lo, hi = np.sort(win.omega[top])
        summary.update(lower_peak_ev=lo * HARTREE_EV, upper_peak_ev=hi * HARTREE_EV,
                       splitting_ev=(hi - lo) * HARTREE_EV, splitting_over_2g=(hi - lo) / (2.0 * g))
    return ScenarioResult(s.name, summary, {
        "trajectory.csv": trajectory_table(rec),
        "spectrum.csv": spectrum_table(alpha, sigma, s.analysis.max_omega),
        "spectrum_reference.csv": spectrum_table(alpha_ref, sigma_ref, s.analysis.max_omega),
    }, rec)


def harmonic_contrast(spec: analysis.Spectrum, omega_l: float, orders=(3, 5, 7), halfwidth: float = 0.1):
    """Per odd order: (peak, max of neighbouring even positions, is local maximum)."""
    out = []
    for n in orders:
        sel = np.abs(spec.omega - n * omega_l) <= halfwidth * omega_l
        idx = np.flatnonzero(sel)
        peak = spec.values[idx].max()
        ipk = idx[np.argmax(spec.values[idx])]
        is_max = bool(0 < ipk < spec.values.size - 1 and spec.values[ipk] >= spec.values[ipk - 1]
                      and spec.values[ipk] >= spec.values[ipk + 1] and idx[0] < ipk < idx[-1])
        even = max(analysis.harmonic_peaks(spec, omega_l, [n - 1, n + 1], halfwidth))
        out.append((n, peak, even, is_max))
    return out


def run_hhg(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    system = system or build_system(s)
    rec = simulate(s, system).record
    wl = s.pulse.omega
    spec = analysis.hhg_spectrum(rec, wl, s.analysis.harmonics)
    orders = np.arange(1, s.analysis.harmonics + 1)
    power = analysis.harmonic_peaks(spec, wl, orders, 0.1)
    rows = np.column_stack([orders, orders * wl, orders * wl * HARTREE_EV, power, np.log10(power)])
    summary = _base_summary(s, system)
    summary.update(omega_l_ev=wl * HARTREE_EV, amplitude=s.pulse.amplitude, inv_area=s.waveguide.inv_area)
    for n, peak, even, is_max in harmonic_contrast(spec, wl):
        summary[f"h{n}_over_even"] = peak / even
        summary[f"h{n}_local_max"] = is_max
    keep = spec.omega <= s.analysis.max_omega
    return ScenarioResult(s.name, summary, {
        "trajectory.csv": trajectory_table(rec),
        "harmonics.csv": (["order", "omega_au", "omega_ev", "power", "log10_power"], rows),
        "hhg_spectrum.csv": (["omega_au", "omega_ev", "power"],
                             np.column_stack([spec.omega[keep], spec.omega_ev[keep], spec.values[keep]])),
    }, rec)


def linewidth(s: Scenario, system: ModelSystem) -> tuple[analysis.LineshapeFit, TrajectoryRecord]:
    rec = simulate(s, system).record
    _, sigma = absorption_spectra(rec, s)
    return analysis.fwhm(sigma, _window(s)), rec


def run_fwhm_sweep(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    system = system or build_system(s)
    rows = []
    for a in s.sweep.values:
        sc = s.replace("waveguide", "inv_area", a)
        gww = theory.gamma_ww_1d(system.two_level(effective_inv_area(sc))) * HARTREE_EV
        try:
            fit, rec = linewidth(sc, system)
            rows.append([a, rec.t[-1], fit.gamma, gww, fit.gamma / gww, fit.fwhm, float(fit.disagreement), 1.0])
        except analysis.InsufficientResolution:
            rows.append([a, math.nan, math.nan, gww, math.nan, math.nan, math.nan, 0.0])
    rows = np.array(rows)
    summary = _base_summary(s, system)
    for r in rows:
        summary[f"ratio_inv_area_{r[0]:g}"] = r[4]
    header = ["inv_area", "total_time", "gamma_sim_ev", "gamma_ww_ev", "ratio", "fwhm_sim_ev",
              "fit_disagreement", "ok"]
    return ScenarioResult(s.name, summary, {"fwhm.csv": (header, rows)})


def bath_levels(s: Scenario):
    """(box_length, cutoff) pairs; each level doubles both, i.e. the mode count grows 4x."""
    total = s.propagator.total_time
    box0 = s.bath.box_length or 1.2 * total * C_LIGHT
    return [(box0 * 2**k, s.bath.cutoff * 2**k) for k in range(s.bath.doublings + 1)]


def run_bath_convergence(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    """Explicit mode bath against the Markov limit it converges to."""
    system = system or build_system(s)
    pol = s.waveguide.pol_projection
    probe = ModeBath.waveguide(s.bath.inv_area, bath_levels(s)[0][0], s.bath.cutoff, pol)
    # friction of the bath continuum, expressed as an equivalent waveguide A^-1
    inv_area_eq = probe.markov_friction / (FOUR_PI_ALPHA * pol**2)
    base = s.replace("bath", "enabled", False).replace("cavity", "enabled", False)
    ref = simulate(base.replace("waveguide", "inv_area", inv_area_eq), system).record
    amp = float(np.max(np.abs(ref.dipole)))
    rows = []
    for k, (box, cut) in enumerate(bath_levels(s)):
        sc = base.replace("waveguide", "inv_area", 0.0).replace("bath", "enabled", True)
        sc = sc.replace("bath", "box_length", box).replace("bath", "cutoff", cut)
        rec = simulate(sc, system).record
        n_modes = int(math.floor(cut / (2 * math.pi * C_LIGHT / box)))
        err = float(np.max(np.abs(rec.dipole - ref.dipole)))
        rows.append([k, n_modes, cut, box, err, err / amp])
    rows = np.array(rows)
    summary = _base_summary(s, system)
    summary.update(equivalent_inv_area=inv_area_eq, dipole_amplitude=amp,
                   monotone=bool(np.all(np.diff(rows[:, 4]) < 0)), final_rel_error=rows[-1, 5])
    header = ["level", "n_modes", "cutoff_au", "box_length_au", "max_abs_dR", "rel_error"]
    return ScenarioResult(s.name, summary, {"convergence.csv": (header, rows)}, ref)


def run_superradiance(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    system = system or build_system(s)
    rows = []
    for n in s.sweep.values:
        sc = s.replace("ensemble", "n_emitters", int(n))
        fit, _ = linewidth(sc, system)
        rows.append([int(n), fit.gamma, fit.fwhm])
    rows = np.array(rows, dtype=float)
    g1 = rows[0, 1] / rows[0, 0]
    ratio = rows[:, 1] / rows[0, 1]
    theory_g = rows[:, 0] * theory.gamma_rr_ev(system.two_level(effective_inv_area(s)))
    slope = float(np.polyfit(rows[:, 0], rows[:, 1], 1)[0])
    table = np.column_stack([rows, ratio, theory_g])
    summary = _base_summary(s, system)
    summary.update(gamma_1_ev=g1, fit_slope_ev=slope, slope_over_gamma_1=slope / g1)
    for r in table:
        summary[f"ratio_n_{int(r[0])}"] = r[3]
    header = ["n_emitters", "gamma_ev", "fwhm_ev", "gamma_ratio", "gamma_theory_ev"]
    return ScenarioResult(s.name, summary, {"linewidth_vs_n.csv": (header, table)})


def run_lamb_shift(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    system = system or build_system(s)
    a = s.waveguide.inv_area
    off_sc = s.replace("waveguide", "inv_area", 0.0).replace("propagator", "auto_extend", False)
    off_rec = simulate(off_sc, system).record
    off = analysis.polarizability(off_rec, pad_to=_pad(off_rec, s.analysis.pad_factor)).positive()
    rows = []
    centers = {}
    win = _window(s)
    ref_center = analysis.fit_pole(off, win).center
    for inv in (a, 0.5 * a):
        rec = simulate(s.replace("waveguide", "inv_area", inv), system).record
        on = analysis.polarizability(rec, pad_to=_pad(rec, s.analysis.pad_factor)).positive()
        pole = analysis.fit_pole(on, win)
        centers[inv] = pole
        data = system.two_level(effective_inv_area(s.replace("waveguide", "inv_area", inv)))
        rows.append([inv, pole.center, pole.gamma, (pole.center - ref_center) * 1e3,
                     theory.pole_shift(data) * HARTREE_EV * 1e3])
    rows = np.array(rows)
    summary = _base_summary(s, system)
    summary.update(reference_center_ev=ref_center, shift_mev=rows[0, 3], shift_half_mev=rows[1, 3],
                   quarter_ratio=rows[0, 3] / rows[1, 3], two_level_shift_mev=rows[0, 4])
    header = ["inv_area", "pole_center_ev", "pole_gamma_ev", "shift_mev", "two_level_shift_mev"]
    return ScenarioResult(s.name, summary, {"lamb_shift.csv": (header, rows)})


def run_theory(s: Scenario, system: ModelSystem | None = None) -> ScenarioResult:
    system = system or build_system(s)
    table = theory.theory_table(system.two_level(effective_inv_area(s)))
    summary = _base_summary(s, system)
    summary.update(table)
    summary["gamma_rr_3d_ev"] = theory.gamma_rr_3d(system.omega_eg, system.r_eg) * HARTREE_EV
    summary["gamma_ww_3d_ev"] = theory.gamma_ww_3d(system.omega_eg, system.r_eg) * HARTREE_EV
    return ScenarioResult(s.name, summary, {})


RUNNERS = {
    "absorption": run_absorption,
    "decay": run_decay,
    "stimulated": run_stimulated,
    "eit": run_eit,
    "hhg": run_hhg,
    "fwhm_sweep": run_fwhm_sweep,
    "bath_convergence": run_bath_convergence,
    "superradiance": run_superradiance,
    "lamb_shift": run_lamb_shift,
    "theory": run_theory,
}


def run_scenario(s: Scenario) -> ScenarioResult:
    return RUNNERS[s.name](s)
