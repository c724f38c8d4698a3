import math

import numpy as np
import pytest

from radreact import scenarios
from radreact.config import parse_config
from radreact.constants import HARTREE_EV
from radreact.theory import gamma_rr


def preset(name, extra=""):
    return parse_config(f"[scenario]\nname = {name}\n{extra}")


@pytest.fixture(scope="module")
def system():
    return scenarios.build_system(preset("absorption"))


def test_model_system(system):
    assert system.omega_eg * HARTREE_EV == pytest.approx(10.746, abs=0.05)
    assert system.r_eg == pytest.approx(1.04792, abs=1e-5)


def test_run_length_auto_extension(system):
    s = preset("fwhm_sweep").replace("waveguide", "inv_area", 1e-3)
    total, stride = scenarios.run_length(s, system)
    gam = gamma_rr(system.two_level(1e-3))
    assert total >= s.propagator.decay_lengths / gam
    assert math.ceil(total / s.propagator.dt) / stride <= scenarios.MAX_SAMPLES + 1
    # short-lived lines keep the configured length
    assert scenarios.run_length(preset("absorption"), system) == (4000.0, 5)


def test_effective_inv_area_folds_edge_and_polarization():
    s = preset("absorption").replace("waveguide", "pol_projection", 0.5)
    assert scenarios.effective_inv_area(s) == pytest.approx(0.25)
    s = s.replace("waveguide", "edge_z", 0.5)
    assert scenarios.effective_inv_area(s) == pytest.approx(0.25)


def test_bath_levels_double_box_and_cutoff():
    levels = scenarios.bath_levels(preset("bath_convergence"))
    assert len(levels) == 4
    for (b0, c0), (b1, c1) in zip(levels, levels[1:]):
        assert b1 == pytest.approx(2 * b0) and c1 == pytest.approx(2 * c0)


def test_ensemble_of_one_is_plain_run(system):
    s = preset("absorption", "[propagator]\ntotal_time = 30\n")
    a = scenarios.simulate(s, system).record
    b = scenarios.ensemble_run(1, s, system).record
    assert np.array_equal(a.dipole, b.dipole)
    with pytest.raises(ValueError):
        scenarios.ensemble_run(0, s, system)


def test_theory_scenario_summary():
    res = scenarios.run_scenario(preset("theory"))
    assert res.summary["gamma_rr_ev"] == pytest.approx(res.summary["gamma_ww_1d_ev"])
    assert res.summary["gamma_ww_3d_ev"] == pytest.approx(2 * res.summary["gamma_rr_3d_ev"])


def test_stimulated_emission_ordering(system):
    res = scenarios.run_stimulated(preset("stimulated"), system)
    t = {k: res.summary[f"{k}_half_decay_time"] for k in ("resonant", "drive_off", "half_frequency")}
    # a resonant drive releases the excitation first
    assert t["resonant"] < t["half_frequency"]
    assert t["resonant"] < t["drive_off"]
    assert res.summary["resonant_final_minus_e1"] < 0


def test_decay_scenario_energy_balance(system):
    res = scenarios.run_decay(preset("decay"), system)
    s = res.summary
    assert s["emitted_monotone"]
    assert abs(s["balance_residual"]) < 1e-4
    assert s["drive_work"] > 0 and s["emitted_total"] > 0
