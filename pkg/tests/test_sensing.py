import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tripletspin import sensing
from tripletspin.config import load_preset
from tripletspin.constants import GAMMA_EL
from tripletspin.sensing import SensorBudget, TwoPointScheme
from tripletspin.spinham import ZfsParams

ZFS = ZfsParams(2.356e9, 0.458e9)
BIAS = 36.5e-3


def lorentzian_model(contrast, fwhm, f_center):
    def model(b, freqs):
        x = np.asarray(freqs) - (f_center + GAMMA_EL * b)
        return contrast / (1 + (2 * x / fwhm) ** 2)
    return model


def budget(**kw):
    base = dict(contrast=0.1, photons_per_shot=1e-10, t_init=20e-6, t_read=10e-6, t_evolve=1e-6,
                molecules=6.022e14)
    base.update(kw)
    return SensorBudget(**base)


@pytest.fixture(scope="module")
def scheme():
    return sensing.design_two_point(ZFS, 60e6, BIAS, 4000)


# -- two-point slope ---------------------------------------------------------------

def test_lorentzian_flank_slope():
    c, fwhm, f0 = 0.2, 10e6, 3e9
    slope = sensing.two_point_slope(lorentzian_model(c, fwhm, f0), 0.0, f0 - fwhm / 2, f0 + fwhm / 2)
    assert slope == pytest.approx(2 * c * GAMMA_EL / fwhm, rel=0.01)


def test_equal_probes_give_zero_slope():
    model = sensing.powder_model(ZFS, 60e6, 500)
    assert sensing.two_point_slope(model, BIAS, 3.5e9, 3.5e9) == 0.0


def test_clock_point_slope_vanishes():
    model = sensing.powder_model(ZFS, 60e6, 2000)
    assert sensing.two_point_slope(model, 0.0, 2.78e9, 2.85e9) == 0.0


@pytest.mark.parametrize("n_orient", [1000, 10000])
def test_bias_slope_nonzero_and_sign_stable(n_orient, scheme):
    s = sensing.design_two_point(ZFS, 60e6, BIAS, n_orient)
    assert s.slope != 0
    assert math.copysign(1, s.slope) == math.copysign(1, scheme.slope)
    assert s.f_low < s.f_high


def test_scheme_validation():
    with pytest.raises(ValueError):
        TwoPointScheme(3.0e9, 2.9e9, 1.0, BIAS)
    with pytest.raises(ValueError):
        TwoPointScheme(2.9e9, 3.0e9, 0.0, BIAS)


def test_scan_resolution_invariance():
    coarse = sensing.design_two_point(ZFS, 60e6, BIAS, 2000, step=3e6)
    fine = sensing.design_two_point(ZFS, 60e6, BIAS, 2000, step=1.5e6)
    b = budget()
    eta_c = sensing.dc_sensitivity(b, coarse)["eta"]
    eta_f = sensing.dc_sensitivity(b, fine)["eta"]
    assert eta_f == pytest.approx(eta_c, rel=0.01)


# -- DC and AC estimators -------------------------------------------------------------

@given(k=st.floats(1.1, 1e3))
def test_dc_scales_with_molecules_and_contrast(scheme, k):
    b = budget()
    base = sensing.dc_sensitivity(b, scheme)["eta"]
    more = sensing.dc_sensitivity(budget(molecules=b.molecules * k), scheme)["eta"]
    assert more * math.sqrt(k) == pytest.approx(base, rel=1e-12)
    brighter = sensing.dc_sensitivity(budget(contrast=b.contrast * min(k, 9.9)), scheme)["eta"]
    assert brighter * min(k, 9.9) == pytest.approx(base, rel=1e-12)


def test_dc_doubling_molecules_gains_root_two(scheme):
    a = sensing.dc_sensitivity(budget(), scheme)["eta"]
    b = sensing.dc_sensitivity(budget(molecules=2 * 6.022e14), scheme)["eta"]
    assert a / b == pytest.approx(math.sqrt(2), rel=1e-12)


def test_dc_molar_form(scheme):
    b = budget()
    out = sensing.dc_sensitivity(b, scheme)
    assert out["eta_molar"] == pytest.approx(out["eta"] * math.sqrt(b.moles), rel=1e-12)
    # the molar figure is independent of how many molecules are addressed
    other = sensing.dc_sensitivity(budget(molecules=17 * b.molecules), scheme)
    assert other["eta_molar"] == pytest.approx(out["eta_molar"], rel=1e-12)


def test_dc_shot_noise_formula(scheme):
    b = budget()
    n = b.photons
    expected = math.sqrt(2 * n) / (n * abs(b.contrast * scheme.slope)) * math.sqrt(b.t_shot)
    assert sensing.dc_sensitivity(b, scheme)["eta"] == pytest.approx(expected, rel=1e-12)


@given(st.floats(1.1, 1e3))
def test_ac_scales_with_molecules_and_contrast(k):
    b = budget()
    base = sensing.ac_sensitivity(b)["eta"]
    assert sensing.ac_sensitivity(budget(molecules=b.molecules * k))["eta"] * math.sqrt(k) == pytest.approx(base, rel=1e-12)
    c = min(k, 9.9)
    assert sensing.ac_sensitivity(budget(contrast=b.contrast * c))["eta"] * c == pytest.approx(base, rel=1e-12)


def test_ac_quadrupled_evolution_halves_eta():
    short = sensing.ac_sensitivity(budget(t_init=1e-15, t_read=1e-15, t_evolve=1e-6))["eta"]
    long = sensing.ac_sensitivity(budget(t_init=1e-15, t_read=1e-15, t_evolve=4e-6))["eta"]
    assert short / long == pytest.approx(2.0, rel=1e-6)


def test_ac_longer_coherence_gain():
    # t_evolve = T2 and the whole shot time scales with T2
    def eta(t2):
        return sensing.ac_sensitivity(budget(t_init=t2, t_read=t2, t_evolve=t2, t2=t2))["eta"]
    assert eta(1.5e-6) / eta(16e-6) == pytest.approx(math.sqrt(16 / 1.5), rel=1e-12)


def test_ac_rejects_evolution_beyond_t2():
    with pytest.raises(ValueError):
        sensing.ac_sensitivity(budget(t_evolve=20e-6, t2=16e-6))


@pytest.mark.parametrize("field", ["contrast", "photons_per_shot", "molecules", "t_init"])
def test_budget_rejects_nonpositive(field):
    with pytest.raises(ValueError):
        budget(**{field: 0.0})


def test_dc_example_budget_within_tenfold(scheme):
    se = load_preset("ambient")["sensing"]
    b = SensorBudget(se["contrast"], se["photons_per_shot"], se["t_init"], se["t_read"], se["t_evolve"],
                     6.022e14)
    s = sensing.design_two_point(ZFS, se["linewidth"], se["bias_field"], 10000)
    eta_molar = sensing.dc_sensitivity(b, s)["eta_molar"]
    assert 93e-12 / 10 <= eta_molar <= 98e-12 * 10


def test_ac_example_budget_order():
    se = load_preset("cryo-80K")["sensing"]
    b = SensorBudget(se["ac_contrast"], se["ac_photons_per_shot"], se["ac_t_init"], se["ac_t_read"],
                     se["ac_t_evolve"], 6.022e14, t2=se["ac_t2"])
    eta_molar = sensing.ac_sensitivity(b)["eta_molar"]
    assert 183e-15 / 10 <= eta_molar <= 183e-15 * 10


# -- dipole field and proton number ------------------------------------------------------

def test_axial_proton_field():
    assert sensing.dipole_field(5e-9) == pytest.approx(2.25696e-8, rel=1e-12)


def test_equatorial_is_half_axial():
    assert sensing.dipole_field(5e-9, axial=False) == pytest.approx(sensing.dipole_field(5e-9) / 2, rel=1e-15)


@given(st.floats(1e-10, 1e-6))
def test_dipole_inverse_cube(r):
    assert sensing.dipole_field(2 * r) * 8 == pytest.approx(sensing.dipole_field(r), rel=1e-12)


def test_dipole_rejects_zero_distance():
    with pytest.raises(ValueError):
        sensing.dipole_field(0.0)


def test_proton_number_polarization_scaling():
    full = sensing.proton_number_sensitivity(183e-15, 1.0, 20e-9)
    assert sensing.proton_number_sensitivity(183e-15, 0.01, 20e-9) == pytest.approx(100 * full, rel=1e-12)


def test_proton_number_paper_order():
    # 183 fT mol^1/2 Hz^-1/2 against 20 nT per proton: ~84 pmol per Hz
    val = sensing.proton_number_sensitivity(183e-15, 1.0, 20e-9)
    assert val == pytest.approx(83.7e-12, rel=0.01)
    assert 8e-12 <= val <= 800e-12


def test_proton_number_field_dependence():
    # squared law: half the field per proton needs four times the protons
    a = sensing.proton_number_sensitivity(183e-15, 1.0, 20e-9)
    b = sensing.proton_number_sensitivity(183e-15, 1.0, 10e-9)
    assert b / a == pytest.approx(4.0, rel=1e-12)


def test_proton_number_validation():
    with pytest.raises(ValueError):
        sensing.proton_number_sensitivity(1e-13, 0.0, 20e-9)
    with pytest.raises(ValueError):
        sensing.proton_number_sensitivity(1e-13, 1.0, 0.0)
