import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm as scipy_expm

import oracles
from tripletspin import photophysics as ph
from tripletspin.cli import photophysics_from, sequence_from
from tripletspin.config import load_preset
from tripletspin.photophysics import PhotoState, PhotophysicsParams

RATE_NAMES = ["k_exc", "k_fl", "k_isc_x", "k_isc_y", "k_isc_z", "k_pump912", "k_risc_x", "k_risc_y",
              "k_risc_z", "k_t2_relax", "k_trip_decay", "k_spin_relax"]


def preset(name):
    cfg = load_preset(name)
    return photophysics_from(cfg), sequence_from(cfg)[0]


def random_params(rng, scale=1e6):
    return PhotophysicsParams(**{k: float(v) for k, v in zip(RATE_NAMES, scale * rng.uniform(0, 1, 12))},
                              q_r=float(rng.uniform(0, 1)))


def test_zero_rates_zero_matrix():
    assert np.all(ph.build_rate_matrix(PhotophysicsParams(), True, True) == 0)


def test_columns_sum_to_zero():
    rng = np.random.default_rng(99)
    for _ in range(50):
        p = random_params(rng, 10 ** rng.uniform(3, 9))
        for l4 in (False, True):
            for l9 in (False, True):
                g = ph.build_rate_matrix(p, l4, l9)
                assert np.all(np.abs(g.sum(axis=0)) <= 1e-12 * np.abs(g).max())


def test_triplet_decay_exponential():
    k = 3.3e4
    g = ph.build_rate_matrix(PhotophysicsParams(k_trip_decay=k), False, False)
    pop = np.zeros(8)
    pop[PhotoState.T1x] = 1.0
    for t in (1e-6, 2e-5, 1e-4):
        out, _ = ph.propagate(pop, g, t)
        assert out[PhotoState.T1x] == pytest.approx(math.exp(-k * t), rel=1e-12)


def test_expm_matches_scipy():
    rng = np.random.default_rng(1)
    for scale in (1e-3, 1.0, 30.0):
        a = rng.normal(size=(9, 9)) * scale / 9
        np.testing.assert_allclose(ph.expm(a), scipy_expm(a), rtol=1e-10, atol=1e-13 * np.abs(scipy_expm(a)).max())


def test_expm_stiff_generator_matches_scipy():
    # rate matrices spanning many decades, as in the photophysics model
    rng = np.random.default_rng(2)
    for dt in (1e-8, 1e-5, 1e-2):
        rates = 10.0 ** rng.uniform(0, 8, size=(8, 8))
        np.fill_diagonal(rates, 0.0)
        g = rates - np.diag(rates.sum(axis=0))
        ours, ref = ph.expm(g * dt), scipy_expm(g * dt)
        np.testing.assert_allclose(ours, ref, atol=1e-10)
        np.testing.assert_allclose(ours.sum(axis=0), 1.0, atol=1e-10)


def test_zero_generator():
    pop = np.array([0.2, 0.1, 0.3, 0.1, 0.1, 0.1, 0.05, 0.05])
    out, photons = ph.propagate(pop, np.zeros((8, 8)), 1e-3, np.ones(8))
    np.testing.assert_array_equal(out, pop)
    assert photons == pytest.approx(1e-3)
    out, photons = ph.propagate(pop, np.zeros((8, 8)), 1e-3)
    assert photons == 0.0


def test_two_state_emission():
    p = PhotophysicsParams(k_fl=1e8, q_r=1.0)
    pop = np.zeros(8)
    pop[PhotoState.S1] = 1.0
    _, photons = ph.propagate(pop, ph.build_rate_matrix(p, False, False), 10e-9, ph.emission_vector(p))
    assert photons == pytest.approx(1 - math.exp(-1), rel=1e-12)
    assert photons == pytest.approx(0.6321, abs=1e-4)


@pytest.mark.parametrize("seed", [0, 1])
def test_propagate_matches_euler(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, 2e6)
    g = ph.build_rate_matrix(p, True, True)
    pop = rng.dirichlet(np.ones(8))
    em = ph.emission_vector(p) / p.k_fl if p.k_fl else ph.emission_vector(p)
    duration = 1e-6
    ref_pop, ref_em = oracles.euler_propagate(g, pop, em, duration)
    out, photons = ph.propagate(pop, g, duration, em)
    np.testing.assert_allclose(out, ref_pop, atol=1e-6)
    assert photons == pytest.approx(ref_em, abs=1e-6 * duration)


@given(st.floats(1e-9, 1e-4), st.floats(1e-9, 1e-4), st.integers(0, 1000))
def test_duration_additive(t1, t2, seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, 1e7)
    g = ph.build_rate_matrix(p, True, bool(seed % 2))
    em = ph.emission_vector(p) / 1e7
    pop = rng.dirichlet(np.ones(8))
    a, ea = ph.propagate(pop, g, t1, em)
    b, eb = ph.propagate(a, g, t2, em)
    c, ec = ph.propagate(pop, g, t1 + t2, em)
    np.testing.assert_allclose(b, c, atol=1e-9)
    assert ea + eb == pytest.approx(ec, abs=1e-9 * max(1.0, ec))


def test_mw_pulse():
    pop = np.zeros(8)
    pop[PhotoState.T1x], pop[PhotoState.T1z] = 0.7, 0.1
    out = ph.apply_mw_pulse(pop, "xz", 1.0)
    assert (out[PhotoState.T1x], out[PhotoState.T1z]) == pytest.approx((0.1, 0.7))
    np.testing.assert_array_equal(ph.apply_mw_pulse(pop, "xz", 0.0), pop)
    half = ph.apply_mw_pulse(pop, "xz", 0.5)
    assert half[PhotoState.T1x] == pytest.approx(0.4) and half[PhotoState.T1z] == pytest.approx(0.4)
    assert half.sum() == pytest.approx(pop.sum())
    with pytest.raises(ValueError):
        ph.apply_mw_pulse(pop, "xx", 1.0)


def test_init_reaches_steady_state():
    p, _ = preset("cryo-80K")
    seq = ph.PulseSequence((ph.Segment(0.2, laser488=True),))
    tr = ph.run_sequence(seq, p, windows=[], resolution=1000)
    tail = tr.populations[tr.times >= 0.99 * 0.2]
    assert np.max(np.abs(tail - tail[-1])) < 1e-9
    ss = oracles.null_space_steady_state(ph.build_rate_matrix(p, True, False))
    np.testing.assert_allclose(tr.populations[-1], ss, atol=1e-9)
    np.testing.assert_allclose(ph.steady_state(ph.build_rate_matrix(p, True, False)), ss, atol=1e-12)


def test_no_912_no_oadf():
    p, _ = preset("cryo-80K")
    seq = ph.PulseSequence((ph.Segment(100e-6, laser488=True), ph.Segment(1e-6), ph.Segment(15e-6)))
    win = (101e-6, 116e-6)
    tr = ph.run_sequence(seq, p, windows=[win], resolution=200)
    k = int(np.searchsorted(tr.times, win[0]))
    bound = p.q_r * tr.populations[k, PhotoState.S1]
    assert tr.oadf_counts[0] <= bound + 1e-15


def test_transient_decays_after_peak():
    p, seq = preset("cryo-80K")
    tr = ph.run_sequence(seq, p, resolution=500)
    w0, w1 = tr.windows[0]
    sel = (tr.times > w0) & (tr.times <= w1)
    rate = tr.emission_rate[sel]
    k = int(np.argmax(rate))
    assert np.all(np.diff(rate[k:]) <= 1e-12 * rate[k])


@pytest.mark.parametrize("name", ["cryo-80K", "ambient"])
def test_conservation_and_nonnegativity(name):
    p, seq = preset(name)
    for f in (0.0, 0.5, 1.0):
        tr = ph.run_sequence(seq.with_mw_fraction(f), p, resolution=300)
        assert np.max(np.abs(tr.populations.sum(axis=1) - 1)) < 1e-9
        assert tr.populations.min() >= -1e-12


def symmetric(**kw):
    base = dict(k_exc=1e6, k_fl=3e8, q_r=0.6, k_isc_x=3e5, k_isc_y=3e5, k_isc_z=3e5, k_pump912=2e6,
                k_risc_x=2e7, k_risc_y=2e7, k_risc_z=2e7, k_t2_relax=1e9, k_trip_decay=1e3, k_spin_relax=2e3)
    base.update(kw)
    return PhotophysicsParams(**base)


def test_no_selectivity_no_contrast():
    c = ph.oadf_contrast(symmetric(), "xz", ph.readout_sequence())
    assert abs(c) < 1e-9


def test_risc_swap_flips_sign():
    seq = ph.readout_sequence()
    a = ph.oadf_contrast(symmetric(k_isc_x=5e5, k_isc_z=1e5, k_risc_x=5e7, k_risc_z=2e6), "xz", seq)
    b = ph.oadf_contrast(symmetric(k_isc_x=5e5, k_isc_z=1e5, k_risc_x=2e6, k_risc_z=5e7), "xz", seq)
    assert a * b < 0


def test_contrast_monotone_in_risc_selectivity():
    seq = ph.readout_sequence()
    ratios = np.geomspace(1, 100, 10)
    c = [ph.oadf_contrast(symmetric(k_isc_x=2e5, k_isc_z=4.8e5, k_risc_z=1e6, k_risc_x=1e6 * r), "xz", seq)
         for r in ratios]
    d = np.diff(c)
    assert np.all(d > 0) or np.all(d < 0)


def test_fast_spin_relaxation_kills_contrast():
    p, seq = preset("cryo-80K")
    fast = p.with_(k_spin_relax=1e6 * max(p.k_isc_z, p.k_pump912, p.k_trip_decay))
    assert abs(ph.oadf_contrast(fast, "xz", seq)) < 1e-3


def test_presets_hit_calibration_targets():
    p, seq = preset("cryo-80K")
    assert ph.oadf_contrast(p, "xz", seq) >= 0.40
    p, seq = preset("ambient")
    c = ph.oadf_contrast(p, "xz", seq)
    assert -0.05 <= c <= -0.02


def test_contrast_needs_microwave_slot():
    seq = ph.PulseSequence((ph.Segment(1e-6, laser488=True), ph.Segment(1e-6, laser912=True)))
    with pytest.raises(ValueError):
        ph.oadf_contrast(symmetric(), "xz", seq)


def test_mw_event_beyond_segment():
    with pytest.raises(ValueError):
        ph.Segment(1e-6, mw=(ph.MwEvent("xz", 1.0, at=2e-6),))
