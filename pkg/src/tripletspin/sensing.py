"""Shot-noise-limited magnetometry estimates and dipole-field arithmetic."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import powder
from .constants import AVOGADRO, GAMMA_EL, MU0_OVER_4PI, PROTON_MOMENT
from .spinham import ZfsParams

log = logging.getLogger(__name__)

DEFAULT_DELTA = 10e-6


@dataclass(frozen=True)
class SensorBudget:
    contrast: float
    photons_per_shot: float  # detected OADF photons per molecule per sequence
    t_init: float
    t_read: float
    t_evolve: float
    molecules: float
    overhead: float = 1.0  # multiplies the per-shot time (dead time, duty cycle)
    t2: float | None = None

    def __post_init__(self):
        if not 0 < self.contrast <= 1:
            raise ValueError(f"contrast must lie in (0, 1], got {self.contrast}")
        for name in ("photons_per_shot", "t_init", "t_read", "t_evolve", "molecules", "overhead"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val}")

    @property
    def t_shot(self) -> float:
        return (self.t_init + self.t_evolve + self.t_read) * self.overhead

    @property
    def photons(self) -> float:
        return self.photons_per_shot * self.molecules

    @property
    def moles(self) -> float:
        return self.molecules / AVOGADRO


@dataclass(frozen=True)
class TwoPointScheme:
    f_low: float
    f_high: float
    slope: float  # d(signal(f_high) - signal(f_low))/dB for unit peak contrast, 1/T
    bias_field: float

    def __post_init__(self):
        if not self.f_low < self.f_high:
            raise ValueError("need f_low < f_high")
        if self.slope == 0:
            raise ValueError("two-point slope is zero; move the bias field or the probes")


SignalModel = Callable[[float, np.ndarray], np.ndarray]


def powder_model(zfs: ZfsParams, linewidth: float, n_orient=powder.DEFAULT_N_ORIENT) -> SignalModel:
    """Forward model signal(|B|, freqs) backed by the powder spectrum."""
    grid = powder._as_grid(n_orient)

    def model(b, freqs):
        return powder.powder_signal(zfs, abs(float(b)), np.asarray(freqs, dtype=float), linewidth, grid)

    return model


def two_point_slope(model: SignalModel, bias_field: float, f_low: float, f_high: float,
                    delta: float = DEFAULT_DELTA) -> float:
    """Central difference of [signal(f_high) - signal(f_low)] with respect to field.

    The model sees signed fields; powder models depend on |B| only, so a
    bias of zero returns exactly zero there.
    """
    probes = np.array([f_low, f_high], dtype=float)

    def diff(b):
        s = model(b, probes)
        return float(s[1] - s[0])

    slope = (diff(bias_field + delta) - diff(bias_field - delta)) / (2 * delta)
    if slope == 0:
        log.warning("two-point slope is zero at bias %.4g T", bias_field)
    return slope


def design_two_point(zfs: ZfsParams, linewidth: float, bias_field: float,
                     n_orient=powder.DEFAULT_N_ORIENT, delta: float = DEFAULT_DELTA,
                     step: float | None = None) -> TwoPointScheme:
    """Put one probe on each flank of the T_x-T_z feature at the bias field.

    Probes sit where the spectrum is steepest below and above the feature
    maximum, located on a scan of spacing ``step`` (default linewidth/20);
    the slope is normalized to the feature's peak height.
    """
    grid = powder._as_grid(n_orient)
    model = powder_model(zfs, linewidth, grid)
    lo, hi = powder.powder_extremes(zfs, bias_field, grid)[1]
    step = linewidth / 20 if step is None else step
    freqs = powder.freq_grid(lo - 3 * linewidth, hi + 3 * linewidth, step)
    sig = model(bias_field, freqs)
    peak = int(np.argmax(np.abs(sig)))
    height = abs(sig[peak])
    sgn = math.copysign(1.0, sig[peak])
    deriv = np.gradient(sgn * sig, freqs)
    if peak == 0 or peak == len(freqs) - 1:
        raise ValueError("feature maximum lies on the scan edge")
    f_low = float(freqs[int(np.argmax(deriv[:peak]))])
    f_high = float(freqs[peak + int(np.argmin(deriv[peak:]))])
    slope = two_point_slope(model, bias_field, f_low, f_high, delta) / height
    return TwoPointScheme(f_low, f_high, slope, bias_field)


def dc_sensitivity(budget: SensorBudget, scheme: TwoPointScheme) -> dict[str, float]:
    """Poisson-limited two-point DC sensitivity.

    Per shot the field error is sqrt(2 n) / (n |C * slope|) for n detected
    photons per probe; eta = error * sqrt(t_shot).
    """
    n = budget.photons
    if not n > 0:
        raise ValueError("photon count must be positive")
    slope = budget.contrast * scheme.slope
    sigma_b = math.sqrt(2 * n) / (n * abs(slope))
    eta = sigma_b * math.sqrt(budget.t_shot)
    return {"eta": eta, "eta_molar": eta * math.sqrt(budget.moles), "sigma_b_per_shot": sigma_b}


def ac_sensitivity(budget: SensorBudget) -> dict[str, float]:
    """Phase-slope shot-noise AC sensitivity.

    A field b accumulates phase 2 pi gamma_el b t_evolve; with contrast C and
    n photons the phase error is 1 / (C sqrt(n)), giving
    eta = sqrt(t_shot) / (2 pi gamma_el C t_evolve sqrt(n)).
    """
    if budget.t2 is not None and budget.t_evolve > budget.t2 * (1 + 1e-12):
        raise ValueError("evolution time exceeds T2")
    n = budget.photons
    eta = math.sqrt(budget.t_shot) / (2 * math.pi * GAMMA_EL * budget.contrast * budget.t_evolve * math.sqrt(n))
    return {"eta": eta, "eta_molar": eta * math.sqrt(budget.moles)}


def dipole_field(r: float, moment: float = PROTON_MOMENT, axial: bool = True) -> float:
    """Point-dipole field (T) at distance ``r`` on (axial) or perpendicular to its axis."""
    if not r > 0:
        raise ValueError("distance must be positive")
    return MU0_OVER_4PI * (2.0 if axial else 1.0) * moment / r ** 3


def proton_number_sensitivity(eta_molar: float, polarization: float, field_per_proton: float) -> float:
    """Moles of polarized protons detectable in 1 s, (1/p) (eta_molar / B_p)^2, in mol/Hz."""
    if not 0 < polarization <= 1:
        raise ValueError("polarization must lie in (0, 1]")
    if not field_per_proton > 0:
        raise ValueError("field per proton must be positive")
    return (eta_molar / field_per_proton) ** 2 / polarization
