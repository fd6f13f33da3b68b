"""Dephasing and relaxation models.

Clock-transition Hahn-echo dephasing versus field, filter-function decay of
CPMG sequences under a power-law noise spectrum, and the direct + Raman
spin-lattice relaxation law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import GAMMA_EL

POINTS_PER_DECADE = 2000
# linear node spacing (in omega * t) used once the log grid gets coarser
# than this; resolves the unit-period oscillations of the filter function
LINEAR_STEP = 2 * math.pi / 16
DEFAULT_LOW = 1e-3
DEFAULT_HIGH = 1e3
_CHUNK = 4096


@dataclass(frozen=True)
class NoisePsd:
    """S(omega) = amplitude * omega^-gamma_psd between optional cutoffs (rad/s)."""

    amplitude: float
    gamma_psd: float
    low_cutoff: float | None = None
    high_cutoff: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError("PSD amplitude must be finite and nonnegative")
        if not 0 <= self.gamma_psd <= 2:
            raise ValueError(f"PSD exponent must lie in [0, 2], got {self.gamma_psd}")
        for c in (self.low_cutoff, self.high_cutoff):
            if c is not None and not c > 0:
                raise ValueError("cutoffs must be positive")
        if self.low_cutoff is not None and self.high_cutoff is not None:
            if not self.low_cutoff < self.high_cutoff:
                raise ValueError("low cutoff must be below high cutoff")

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        s = self.amplitude * omega ** (-self.gamma_psd)
        if self.low_cutoff is not None:
            s = np.where(omega >= self.low_cutoff, s, 0.0)
        if self.high_cutoff is not None:
            s = np.where(omega <= self.high_cutoff, s, 0.0)
        return s

    def scaled(self, factor: float) -> "NoisePsd":
        return NoisePsd(self.amplitude * factor, self.gamma_psd, self.low_cutoff, self.high_cutoff)


@dataclass(frozen=True)
class CpmgSpec:
    n_pulses: int
    total_time: float

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 0:
            raise ValueError("number of pulses must be a nonnegative integer")
        if not self.total_time > 0:
            raise ValueError("total time must be positive")

    @property
    def pulse_times(self) -> np.ndarray:
        n = int(self.n_pulses)
        return self.total_time * (2 * np.arange(1, n + 1) - 1) / (2 * n) if n else np.zeros(0)


@dataclass(frozen=True)
class ClockModel:
    e: float
    baseline_rate: float
    slope_c: float

    def __post_init__(self):
        if min(self.e, self.baseline_rate, self.slope_c) < 0:
            raise ValueError("clock model parameters must be nonnegative")


# -- clock transition --------------------------------------------------------

def clock_gamma_eff(b_z, e: float):
    """Effective gyromagnetic ratio (Hz/T) of the T_x-T_z transition near zero field."""
    b_z = np.asarray(b_z, dtype=float)
    b_e = e / GAMMA_EL
    out = GAMMA_EL * b_z / np.sqrt(b_e ** 2 + b_z ** 2)
    return float(out) if out.ndim == 0 else out


def hahn_rate_vs_field(b_z, model: ClockModel):
    """Hahn-echo dephasing rate 1/T2 (1/s): baseline plus a term proportional to gamma_eff."""
    return model.baseline_rate + model.slope_c * clock_gamma_eff(np.abs(b_z), model.e)


def fit_clock_model(b_values, t2_values, e: float) -> ClockModel:
    """Least-squares (baseline, slope) through measured (field, T2) points."""
    b = np.abs(np.asarray(b_values, dtype=float))
    rates = 1.0 / np.asarray(t2_values, dtype=float)
    design = np.column_stack([np.ones_like(b), clock_gamma_eff(b, e) * np.ones_like(b)])
    (base, slope), *_ = np.linalg.lstsq(design, rates, rcond=None)
    return ClockModel(e, max(float(base), 0.0), max(float(slope), 0.0))


# -- filter functions ----------------------------------------------------------

def _switch_terms(n_pulses: int):
    """Switching times (units of total time) and jump coefficients of the toggling function."""
    n = int(n_pulses)
    times = np.concatenate([[0.0], (2 * np.arange(1, n + 1) - 1) / (2 * n) if n else [], [1.0]])
    signs = (-1.0) ** np.arange(n + 1)  # value of y on each interval
    coef = np.empty(n + 2)
    coef[0] = -signs[0]
    coef[-1] = signs[-1]
    coef[1:-1] = signs[:-1] - signs[1:]
    return times, coef


def _filter_u(n_pulses: int, u: np.ndarray) -> np.ndarray:
    """F as a function of u = omega * total_time."""
    times, coef = _switch_terms(n_pulses)
    out = np.empty(len(u))
    for k in range(0, len(u), _CHUNK):
        uc = u[k:k + _CHUNK]
        phase = np.outer(uc, times)
        re = np.cos(phase) @ coef
        im = np.sin(phase) @ coef
        out[k:k + _CHUNK] = 0.5 * (re * re + im * im)
    return out


def filter_function(spec: CpmgSpec, omega):
    """F(omega, t) = |y~(omega)|^2 omega^2 / 2 for the +-1 toggling function y.

    y~ is the Fourier transform over [0, t], evaluated in closed form as a
    sum over switching intervals. F = 2 sin^2(omega t / 2) for free
    evolution and 8 sin^4(omega t / 4) for a single echo.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    out = _filter_u(spec.n_pulses, omega * spec.total_time)
    return out if out.size > 1 else float(out[0])


def _u_nodes(u_lo: float, u_hi: float, density: float = 1.0) -> np.ndarray:
    ppd = POINTS_PER_DECADE * density
    step = LINEAR_STEP / density
    # log spacing u*ln(10)/ppd exceeds the linear step above u_cross
    u_cross = step * ppd / math.log(10)
    if u_hi <= u_cross:
        n = max(int(math.ceil(math.log10(u_hi / u_lo) * ppd)), 2)
        return np.geomspace(u_lo, u_hi, n + 1)
    parts = []
    if u_lo < u_cross:
        n = max(int(math.ceil(math.log10(u_cross / u_lo) * ppd)), 2)
        parts.append(np.geomspace(u_lo, u_cross, n + 1)[:-1])
        start = u_cross
    else:
        start = u_lo
    n = max(int(math.ceil((u_hi - start) / step)), 1)
    parts.append(np.linspace(start, u_hi, n + 1))
    return np.concatenate(parts)


@lru_cache(maxsize=64)
def _kernel(n_pulses: int, u_lo: float, u_hi: float, density: float):
    u = _u_nodes(u_lo, u_hi, density)
    base = _filter_u(n_pulses, u) / u ** 2
    base.setflags(write=False)
    u.setflags(write=False)
    return u, base


def _check_convergent(psd: NoisePsd, n_pulses: int):
    # free evolution keeps F/omega^2 finite at omega -> 0, so 1/f-like noise diverges
    if n_pulses == 0 and psd.gamma_psd >= 1 and psd.low_cutoff is None and psd.amplitude > 0:
        raise ValueError("dephasing integral diverges at low frequency for gamma_psd >= 1 "
                         "without pulses; set an explicit low_cutoff on the PSD")


def cpmg_chi(psd: NoisePsd, spec: CpmgSpec, omega_min: float | None = None,
             omega_max: float | None = None, density: float = 1.0) -> float:
    """chi = (1/pi) * integral S(omega) F(omega, t) / omega^2 d omega.

    Default limits are [1e-3 / t, 1e3 * max(N, 1) / t]; the quadrature runs on
    a log grid (2000 points per decade) that switches to linear spacing fine
    enough to resolve the filter-function oscillations.
    """
    _check_convergent(psd, spec.n_pulses)
    if psd.amplitude == 0:
        return 0.0
    t = spec.total_time
    n_eff = max(int(spec.n_pulses), 1)
    u_lo = DEFAULT_LOW if omega_min is None else omega_min * t
    u_hi = DEFAULT_HIGH * n_eff if omega_max is None else omega_max * t
    if not 0 < u_lo < u_hi:
        raise ValueError("integration limits must satisfy 0 < omega_min < omega_max")
    u, base = _kernel(int(spec.n_pulses), float(u_lo), float(u_hi), float(density))
    integrand = psd(u / t) * base
    return float(t / math.pi * np.trapezoid(integrand, u))


def cpmg_coherence(psd: NoisePsd, spec: CpmgSpec, **kw) -> float:
    """Coherence W = exp(-chi), floored at the smallest positive double."""
    return max(math.exp(-cpmg_chi(psd, spec, **kw)), 5e-324)


def coherence_curve(psd: NoisePsd, n_pulses: int, times) -> np.ndarray:
    return np.array([cpmg_coherence(psd, CpmgSpec(n_pulses, t)) for t in np.asarray(times, float)])


def solve_t2(psd: NoisePsd, n_pulses: int, guess: float = 1e-6, rtol: float = 1e-6) -> float:
    """Total time at which chi reaches 1, by bisection in log time."""
    if psd.amplitude == 0:
        raise ValueError("noise amplitude is zero; T2 is infinite")
    chi = lambda t: cpmg_chi(psd, CpmgSpec(n_pulses, t))  # noqa: E731
    lo = hi = guess
    for _ in range(200):
        if chi(hi) >= 1:
            break
        hi *= 2
    else:
        raise RuntimeError("could not bracket T2 from above")
    for _ in range(200):
        if chi(lo) <= 1:
            break
        lo /= 2
    else:
        raise RuntimeError("could not bracket T2 from below")
    lo = min(lo, hi / 2) if lo == hi else lo
    while (hi - lo) > rtol * hi:
        mid = math.sqrt(lo * hi)
        if chi(mid) < 1:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def psd_for_t2(t2: float, n_pulses: int, gamma_psd: float) -> NoisePsd:
    """Power-law PSD whose amplitude puts T2(n_pulses) at ``t2``."""
    unit = NoisePsd(1.0, gamma_psd)
    return unit.scaled(1.0 / cpmg_chi(unit, CpmgSpec(n_pulses, t2)))


def t2_scaling(psd: NoisePsd, n_values) -> np.ndarray:
    return np.array([solve_t2(psd, int(n)) for n in n_values])


def psd_exponent_from_scaling(e_scaling: float) -> float:
    """Noise exponent gamma from T2 ~ N^e, using e = gamma / (gamma + 1)."""
    if not 0 < e_scaling < 1:
        raise ValueError(f"scaling exponent must lie in (0, 1), got {e_scaling}")
    return e_scaling / (1.0 - e_scaling)


# -- spin-lattice relaxation -----------------------------------------------------

def t1_rate(temp, relax_a: float, relax_raman: float):
    """1/T1 (1/s) = relax_a * T + relax_raman * T^7."""
    temp = np.asarray(temp, dtype=float)
    if np.any(temp <= 0):
        raise ValueError("temperature must be positive")
    out = relax_a * temp + relax_raman * temp ** 7
    return float(out) if out.ndim == 0 else out


def t1_crossover(relax_a: float, relax_raman: float) -> float:
    """Temperature where direct and Raman contributions are equal."""
    return (relax_a / relax_raman) ** (1.0 / 6.0)
