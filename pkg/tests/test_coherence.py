import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from tripletspin import coherence, fitting
from tripletspin.coherence import ClockModel, CpmgSpec, NoisePsd
from tripletspin.constants import GAMMA_EL

E_ZFS = 0.458e9
N_SWEEP = [1, 2, 4, 8, 16, 32, 64, 128, 256]


# -- clock transition ----------------------------------------------------------

def test_gamma_eff_at_clock_point_is_zero():
    assert coherence.clock_gamma_eff(0.0, E_ZFS) == 0.0


def test_gamma_eff_asymptote():
    assert coherence.clock_gamma_eff(1.0, E_ZFS) == pytest.approx(GAMMA_EL, rel=1e-3)


def test_gamma_eff_at_7mt_matches_oracle():
    frozen = 11033600628.171762  # oracles.clock_gamma(7e-3, 0.458e9)
    assert coherence.clock_gamma_eff(7e-3, E_ZFS) == pytest.approx(frozen, rel=1e-12)
    assert coherence.clock_gamma_eff(7e-3, E_ZFS) == pytest.approx(11.0e9, rel=0.01)


@given(st.floats(-1.0, 1.0, allow_nan=False), st.floats(1e6, 2e9))
def test_gamma_eff_odd_and_bounded(b, e):
    g = coherence.clock_gamma_eff(b, e)
    assert coherence.clock_gamma_eff(-b, e) == -g
    assert abs(g) <= GAMMA_EL


def test_hahn_rate_zero_field_is_baseline():
    model = ClockModel(E_ZFS, 1 / 1.5e-6, 1e-3)
    assert 1 / coherence.hahn_rate_vs_field(0.0, model) == pytest.approx(1.5e-6, rel=1e-12)


def test_clock_fit_through_anchors():
    model = coherence.fit_clock_model([0.0, 7e-3], [1.5e-6, 140e-9], E_ZFS)
    assert abs(1 / coherence.hahn_rate_vs_field(0.0, model) - 1.5e-6) < 0.2e-6
    assert abs(1 / coherence.hahn_rate_vs_field(7e-3, model) - 140e-9) < 30e-9


def test_hahn_rate_monotone_in_field():
    model = coherence.fit_clock_model([0.0, 7e-3], [1.5e-6, 140e-9], E_ZFS)
    rates = coherence.hahn_rate_vs_field(np.linspace(0, 0.1, 200), model)
    assert np.all(np.diff(rates) >= 0)


def test_clock_model_rejects_negative():
    with pytest.raises(ValueError):
        ClockModel(E_ZFS, -1.0, 0.0)


# -- filter functions ----------------------------------------------------------

def test_pulse_times_inside_window():
    times = CpmgSpec(7, 3e-6).pulse_times
    assert np.all(np.diff(times) > 0)
    assert times[0] > 0 and times[-1] < 3e-6
    np.testing.assert_allclose(times, 3e-6 * (2 * np.arange(1, 8) - 1) / 14)


def test_free_evolution_filter():
    omega = np.geomspace(1e3, 1e9, 50)
    t = 2e-6
    expected = 2 * np.sin(omega * t / 2) ** 2
    np.testing.assert_allclose(coherence.filter_function(CpmgSpec(0, t), omega), expected, atol=1e-12)


def test_hahn_filter_at_two_pi():
    t = 1e-6
    f = coherence.filter_function(CpmgSpec(1, t), 2 * math.pi / t)
    assert f == pytest.approx(oracles.hahn_filter(2 * math.pi), rel=1e-12)
    assert f == pytest.approx(8.0, rel=1e-12)


@given(st.floats(1e-3, 1e3))
def test_hahn_filter_closed_form(u):
    assert coherence.filter_function(CpmgSpec(1, 1.0), u) == pytest.approx(oracles.hahn_filter(u), abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 5, 16])
def test_echo_filters_vanish_at_least_as_omega_squared(n):
    # free evolution keeps F / u^2 -> 1/2; refocused sequences send it to zero
    t = 1e-6
    u = np.array([1e-2, 2e-2])
    f = coherence.filter_function(CpmgSpec(n, t), u / t)
    assert f[1] / f[0] >= 4 * (1 - 1e-6)
    assert f[0] / u[0] ** 2 < 1e-3
    free = coherence.filter_function(CpmgSpec(0, t), u / t)
    assert free[0] / u[0] ** 2 == pytest.approx(0.5, rel=1e-4)


def test_filter_stable_at_large_omega_t():
    f = coherence.filter_function(CpmgSpec(4, 1.0), np.array([1e6 - 0.5, 1e6]))
    assert np.all(np.isfinite(f))
    assert np.all(f >= 0) and np.all(f <= 2 * (4 + 1) ** 2)


def test_filter_rejects_nonpositive_omega():
    with pytest.raises(ValueError):
        coherence.filter_function(CpmgSpec(1, 1e-6), 0.0)


# -- decay and T2 ---------------------------------------------------------------

def test_zero_amplitude_gives_full_coherence():
    assert coherence.cpmg_coherence(NoisePsd(0.0, 0.5), CpmgSpec(4, 1e-6)) == 1.0


@pytest.mark.parametrize("n", [0, 1, 4, 32])
def test_white_noise_chi(n):
    s0, t = 3e5, 2e-6
    chi = coherence.cpmg_chi(NoisePsd(s0, 0.0), CpmgSpec(n, t))
    assert chi == pytest.approx(s0 * t / 2, rel=0.01)


def test_divergent_free_evolution_demands_cutoff():
    with pytest.raises(ValueError, match="cutoff"):
        coherence.cpmg_chi(NoisePsd(1.0, 1.2), CpmgSpec(0, 1e-6))
    chi = coherence.cpmg_chi(NoisePsd(1.0, 1.2, low_cutoff=1e3), CpmgSpec(0, 1e-6))
    assert np.isfinite(chi) and chi > 0


def test_psd_validation():
    for bad in (dict(amplitude=-1, gamma_psd=0.5), dict(amplitude=1, gamma_psd=2.5),
                dict(amplitude=1, gamma_psd=0.5, low_cutoff=10, high_cutoff=1)):
        with pytest.raises(ValueError):
            NoisePsd(**bad)


@given(st.floats(0, 2), st.floats(0, 1e8), st.integers(1, 12), st.floats(1e-8, 1e-4))
def test_coherence_bounded(gamma, amp, n, t):
    psd = NoisePsd(amp, gamma)
    chi = coherence.cpmg_chi(psd, CpmgSpec(n, t))
    w = coherence.cpmg_coherence(psd, CpmgSpec(n, t))
    assert chi >= 0
    assert 0 < w <= 1


@pytest.mark.parametrize("gamma", [1 / 3, 2 / 3])
def test_more_pulses_never_hurt(gamma):
    psd = NoisePsd(1.0, gamma)
    chi = [coherence.cpmg_chi(psd, CpmgSpec(n, 1e-5)) for n in range(1, 65)]
    assert np.all(np.diff(chi) <= 1e-12 * chi[0])


@pytest.fixture(scope="module")
def paper_psd():
    return coherence.psd_for_t2(16e-6, 240, 2 / 3)


def test_anchor_reproduced(paper_psd):
    assert coherence.solve_t2(paper_psd, 240) == pytest.approx(16e-6, rel=1e-5)


def test_solve_t2_hits_unit_chi(paper_psd):
    for n in (1, 16):
        t2 = coherence.solve_t2(paper_psd, n)
        assert abs(coherence.cpmg_chi(paper_psd, CpmgSpec(n, t2)) - 1) < 1e-5


def test_single_pulse_t2_extrapolates_to_anchor(paper_psd):
    t2_1 = coherence.solve_t2(paper_psd, 1)
    assert t2_1 * 240 ** 0.40 == pytest.approx(16e-6, rel=0.15)


def test_two_thirds_noise_scaling_exponent(paper_psd):
    t2 = coherence.t2_scaling(paper_psd, N_SWEEP)
    exponent, _ = fitting.fit_power_law(N_SWEEP, t2)
    assert 0.37 <= exponent <= 0.43


def test_white_noise_scaling_exponent():
    t2 = coherence.t2_scaling(NoisePsd(1e5, 0.0), N_SWEEP)
    exponent, _ = fitting.fit_power_law(N_SWEEP, t2)
    assert abs(exponent) < 0.01


@pytest.mark.parametrize("gamma", [1 / 3, 2 / 3, 0.99])
def test_exponent_round_trip(gamma):
    n_values = [8, 16, 32, 64, 128, 256]
    t2 = coherence.t2_scaling(NoisePsd(1e6, gamma), n_values)
    exponent, _ = fitting.fit_power_law(n_values, t2)
    assert coherence.psd_exponent_from_scaling(exponent) == pytest.approx(gamma, abs=0.05)


@pytest.mark.parametrize("n", [1, 16, 240])
def test_quadrature_converged(paper_psd, n):
    spec = CpmgSpec(n, 16e-6)
    base = coherence.cpmg_chi(paper_psd, spec)
    fine = coherence.cpmg_chi(paper_psd, spec, density=2.0)
    assert abs(fine / base - 1) < 1e-3


def test_zero_amplitude_t2_raises():
    with pytest.raises(ValueError):
        coherence.solve_t2(NoisePsd(0.0, 0.5), 1)


def test_psd_exponent_from_scaling():
    assert coherence.psd_exponent_from_scaling(0.40) == pytest.approx(0.6667, abs=1e-4)
    assert coherence.psd_exponent_from_scaling(0.5) == 1.0
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            coherence.psd_exponent_from_scaling(bad)


# -- spin-lattice relaxation -----------------------------------------------------

def test_t1_rate_at_80k():
    rate = coherence.t1_rate(80.0, 43.0, 47e-12)
    assert rate == pytest.approx(4425.66144, rel=1e-12)
    assert rate == pytest.approx(4426, rel=1e-3)
    assert 1 / rate == pytest.approx(2.26e-4, rel=0.01)


def test_t1_model_disagrees_with_measured_value():
    # the quoted amplitudes give ~226 us while 141 +- 5 us was measured at 80 K
    model = 1 / coherence.t1_rate(80.0, 43.0, 47e-12)
    assert abs(model - 141e-6) > 3 * 5e-6


def test_t1_rate_vanishes_at_low_temperature():
    assert coherence.t1_rate(1e-9, 43.0, 47e-12) < 1e-6
    with pytest.raises(ValueError):
        coherence.t1_rate(0.0, 43.0, 47e-12)


def test_t1_crossover():
    tc = coherence.t1_crossover(43.0, 47e-12)
    assert tc == pytest.approx(98.52847621094195, rel=1e-12)
    assert 43.0 * tc == pytest.approx(47e-12 * tc ** 7, rel=1e-10)


def test_t1_fit_round_trip():
    temps = np.array([20.0, 40.0, 60.0, 80.0, 100.0, 140.0, 200.0])
    t1s = 1 / coherence.t1_rate(temps, 43.0, 47e-12)
    res = fitting.fit_t1_temperature(temps, t1s)
    assert res["relax_a"] == pytest.approx(43.0, rel=1e-3)
    assert res["relax_raman"] == pytest.approx(47e-12, rel=1e-3)
