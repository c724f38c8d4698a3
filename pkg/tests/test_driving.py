import math

import numpy as np
import pytest
from scipy.integrate import quad

from radreact.constants import HARTREE_EV
from radreact.driving import (
    CWSpec,
    KickSpec,
    PulseSpec,
    drive_average,
    kick_field,
    kick_impulse,
    kick_potential,
    pack_drives,
    pulse_envelope,
    pulse_field,
    resonant_cw,
)


def test_kick_potential_peak_value():
    spec = KickSpec()
    assert kick_potential(1.0, spec.center, spec) == pytest.approx(-1e-6 / (math.pi * 1e-4))
    assert kick_potential(1.0, spec.center, spec) == pytest.approx(-3.1831e-3, rel=1e-4)


def test_kick_potential_vanishes_at_origin():
    for t in (0.0, 1.0, 5.0):
        assert kick_potential(0.0, t) == 0.0


def test_kick_impulse_matches_quadrature():
    spec = KickSpec(1e-6, 1.0, 1e-4)
    f = lambda t: kick_field(t, spec)
    num = sum(quad(f, a, b, limit=500)[0] for a, b in [(-np.inf, 0.0), (0.0, 1.0), (1.0, 2.0), (2.0, np.inf)])
    assert kick_impulse(spec) == pytest.approx(num, rel=1e-6)
    assert kick_impulse(spec) == pytest.approx(-1e-6 / 1e-2)


def test_kick_average_is_exact_mean():
    p = pack_drives(kick=KickSpec())
    a, b = 0.995, 1.005
    num, _ = quad(lambda t: kick_field(t), a, b, limit=200)
    assert drive_average(a, b, p) == pytest.approx(num / (b - a), rel=1e-10)


def test_kick_width_must_be_positive():
    with pytest.raises(ValueError):
        KickSpec(width_sq=0.0)


def test_pulse_envelope_peak_and_tail():
    spec = PulseSpec(0.05, 0.0428, 100.0, 20.0)
    assert pulse_envelope(spec.center, spec) == 1.0
    assert pulse_envelope(spec.center + 3 * spec.width, spec) == pytest.approx(math.exp(-9.0))
    assert pulse_envelope(spec.center - 3 * spec.width, spec) == pytest.approx(1.234e-4, rel=1e-3)
    assert pulse_field(spec.center, spec) == pytest.approx(spec.amplitude * math.sin(spec.omega * spec.center))


def test_pulse_defaults():
    spec = PulseSpec()
    assert spec.omega == pytest.approx(1.166 / HARTREE_EV)
    assert spec.omega == pytest.approx(0.042851, rel=1e-4)
    t = np.linspace(0, 6000, 2001)
    env = np.array([pulse_envelope(x, spec) for x in t])
    assert np.all(env > 0)
    assert t[np.argmax(env)] == pytest.approx(spec.center, abs=3.0)


def test_cw_zero_amplitude_and_window():
    assert resonant_cw(10.0, 0.0, 0.4) == 0.0
    assert resonant_cw(5.0, 1e-3, 0.4, t_on=10.0) == 0.0
    assert resonant_cw(50.0, 1e-3, 0.4, t_off=40.0) == 0.0
    # after the ramp the envelope is flat
    t = 200.0
    assert resonant_cw(t, 1e-3, 0.4) == pytest.approx(1e-3 * math.sin(0.4 * t))


def test_pack_drives_layout():
    p = pack_drives(None, None, CWSpec(2e-3, 0.3))
    assert p[0] == 0 and p[4] == 0 and p[9] == 1 and p[10] == 2e-3
    assert np.all(pack_drives() == 0)
    assert drive_average(0.0, 1.0, pack_drives()) == 0.0
