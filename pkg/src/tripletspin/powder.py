"""Orientation-averaged (powder) ODMR spectra, field maps and Rabi traces."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constants import GAMMA_EL
from .spinham import SPIN_OPS, PAIRS, TransitionSet, ZfsParams, build_hamiltonian, eigensolve

DEFAULT_N_ORIENT = 10_000
# orientations are reduced in fixed-size chunks, in chunk order, so the
# result does not depend on how many worker threads were used
CHUNK = 1024
_TRUNCATE_SIGMAS = 8.0
_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
# line areas are measured in GHz so that amplitudes of order 0.01-1 give
# contrasts of order 0.1
_AREA_UNIT = 1e9


@dataclass(frozen=True)
class OrientationGrid:
    points: np.ndarray  # (count, 3) unit vectors

    @property
    def count(self) -> int:
        return len(self.points)

    def reversed(self) -> "OrientationGrid":
        return OrientationGrid(self.points[::-1].copy())


@dataclass(frozen=True)
class SpectrumGrid:
    freqs: np.ndarray
    signal: np.ndarray
    linewidth: float
    b_mag: float = 0.0


@dataclass(frozen=True)
class OdmrMap:
    b_values: np.ndarray
    freqs: np.ndarray
    signal: np.ndarray  # (len(b_values), len(freqs))
    linewidth: float

    def row(self, k: int) -> SpectrumGrid:
        return SpectrumGrid(self.freqs, self.signal[k], self.linewidth, float(self.b_values[k]))


@dataclass(frozen=True)
class RabiTrace:
    times: np.ndarray
    signal: np.ndarray
    drive_freq: float
    b1: float


def fibonacci_sphere(n: int) -> OrientationGrid:
    """Deterministic near-uniform points on the unit sphere (Fibonacci lattice)."""
    if int(n) != n or n < 1:
        raise ValueError(f"need a positive number of points, got {n}")
    n = int(n)
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * (math.pi * (3.0 - math.sqrt(5.0)))
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return OrientationGrid(pts)


def _as_grid(orient) -> OrientationGrid:
    if isinstance(orient, OrientationGrid):
        return orient
    return fibonacci_sphere(orient)


def powder_transitions(zfs: ZfsParams, b_mag: float, directions: np.ndarray) -> TransitionSet:
    """Transitions for a static field of magnitude ``b_mag`` along each direction.

    Weights are averaged over two orthogonal drive axes perpendicular to the
    static field. That average equals (sum_a |S_a|^2 - |n.S|^2) / 2 and so
    does not depend on which perpendicular pair is picked.
    """
    directions = np.asarray(directions, dtype=float)
    lv = eigensolve(build_hamiltonian(zfs, b_mag * directions))
    vecs = lv.states
    vh = np.conj(np.swapaxes(vecs, -1, -2))
    total = 0.0
    for op in SPIN_OPS:
        total = total + np.abs(vh @ op @ vecs) ** 2
    n_op = np.tensordot(directions, SPIN_OPS, axes=([-1], [0]))
    along = np.abs(vh @ n_op @ vecs) ** 2
    perp = 0.5 * (total - along)
    freqs = np.stack([lv.levels[:, j] - lv.levels[:, i] for i, j in PAIRS], axis=-1)
    weights = np.stack([perp[:, i, j] for i, j in PAIRS], axis=-1)
    return TransitionSet(freqs, np.clip(weights, 0.0, None))


def _uniform_step(freqs: np.ndarray) -> float | None:
    if len(freqs) < 2:
        return None
    steps = np.diff(freqs)
    df = (freqs[-1] - freqs[0]) / (len(freqs) - 1)
    if df > 0 and np.allclose(steps, df, rtol=1e-9, atol=0):
        return df
    return None


def _deposit(freqs: np.ndarray, centers: np.ndarray, heights: np.ndarray, sigma: float) -> np.ndarray:
    """Sum of unit-area Gaussians (area in GHz) evaluated on ``freqs``."""
    norm = _AREA_UNIT / (sigma * math.sqrt(2.0 * math.pi))
    keep = heights != 0
    centers = centers[keep]
    heights = heights[keep] * norm
    out = np.zeros(len(freqs))
    if len(centers) == 0:
        return out
    df = _uniform_step(freqs)
    half = None if df is None else int(math.ceil(_TRUNCATE_SIGMAS * sigma / df)) + 1
    if half is None or 2 * half + 1 >= len(freqs):
        x = (freqs[None, :] - centers[:, None]) / sigma
        return np.sum(heights[:, None] * np.exp(-0.5 * x * x), axis=0)
    centre_idx = np.rint((centers - freqs[0]) / df).astype(np.int64)
    idx = centre_idx[:, None] + np.arange(-half, half + 1)[None, :]
    valid = (idx >= 0) & (idx < len(freqs))
    idx_c = np.clip(idx, 0, len(freqs) - 1)
    x = (freqs[idx_c] - centers[:, None]) / sigma
    vals = heights[:, None] * np.exp(-0.5 * x * x)
    return np.bincount(idx_c[valid], weights=vals[valid], minlength=len(freqs))


def _spectrum_chunk(zfs, b_mag, dirs, freqs, sigma):
    tr = powder_transitions(zfs, b_mag, dirs)
    heights = tr.weights * zfs.amplitudes[None, :]
    return _deposit(freqs, tr.frequencies.ravel(), heights.ravel(), sigma)


def powder_signal(zfs: ZfsParams, b_mag: float, freqs, linewidth: float,
                  n_orient=DEFAULT_N_ORIENT, threads: int = 1) -> np.ndarray:
    """Orientation-averaged ODMR signal at arbitrary frequencies (Hz)."""
    freqs = np.asarray(freqs, dtype=float)
    if freqs.ndim != 1 or len(freqs) == 0:
        raise ValueError("frequency grid is empty")
    if not np.all(np.isfinite(freqs)):
        raise ValueError("frequency grid must be finite")
    if not linewidth > 0:
        raise ValueError("linewidth must be positive")
    if not (np.isfinite(b_mag) and b_mag >= 0):
        raise ValueError("field magnitude must be finite and nonnegative")
    grid = _as_grid(n_orient)
    sigma = linewidth * _FWHM_TO_SIGMA
    chunks = [grid.points[k:k + CHUNK] for k in range(0, grid.count, CHUNK)]
    job = lambda dirs: _spectrum_chunk(zfs, b_mag, dirs, freqs, sigma)  # noqa: E731
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    total = np.zeros(len(freqs))
    for part in parts:
        total += part
    return total / grid.count


def freq_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Uniform, ascending frequency grid including both ends (to rounding)."""
    if not step > 0 or not stop > start:
        raise ValueError("need start < stop and a positive step")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def synth_spectrum(zfs: ZfsParams, b_mag: float, freqs, linewidth: float,
                   n_orient=DEFAULT_N_ORIENT, threads: int = 1) -> SpectrumGrid:
    """Powder ODMR spectrum on a uniform ascending grid.

    Each orientation contributes one Gaussian per transition (FWHM
    ``linewidth``) of area amplitude x coupling weight, the amplitude taken
    from the pair's zero-field label.
    """
    freqs = np.asarray(freqs, dtype=float)
    if len(freqs) == 0:
        raise ValueError("frequency grid is empty")
    if len(freqs) > 1 and (_uniform_step(freqs) is None):
        raise ValueError("frequency grid must be uniform and strictly ascending")
    signal = powder_signal(zfs, b_mag, freqs, linewidth, n_orient, threads)
    return SpectrumGrid(freqs, signal, float(linewidth), float(b_mag))


def synth_odmr_map(zfs: ZfsParams, b_list, freqs, linewidth: float,
                   n_orient=DEFAULT_N_ORIENT, threads: int = 1) -> OdmrMap:
    b_list = np.atleast_1d(np.asarray(b_list, dtype=float))
    if len(b_list) == 0:
        raise ValueError("need at least one field value")
    rows = [synth_spectrum(zfs, b, freqs, linewidth, n_orient, threads).signal for b in b_list]
    return OdmrMap(b_list, np.asarray(freqs, dtype=float), np.vstack(rows), float(linewidth))


def powder_extremes(zfs: ZfsParams, b_mag: float, n_orient=DEFAULT_N_ORIENT) -> np.ndarray:
    """(3, 2) array of min/max transition frequency over orientations, per pair."""
    tr = powder_transitions(zfs, b_mag, _as_grid(n_orient).points)
    return np.column_stack([tr.frequencies.min(axis=0), tr.frequencies.max(axis=0)])


def rabi_two_level(omega: float, detuning, times) -> np.ndarray:
    """Rotating-wave population transfer for Rabi frequency ``omega`` (Hz)."""
    times = np.asarray(times, dtype=float)
    detuning = np.asarray(detuning, dtype=float)
    omega = np.asarray(omega, dtype=float)
    gen2 = omega ** 2 + detuning ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.where(gen2 > 0, omega ** 2 / np.where(gen2 > 0, gen2, 1.0), 0.0)
    return amp[..., None] * np.sin(np.pi * np.sqrt(gen2)[..., None] * times) ** 2


def ensemble_rabi(zfs: ZfsParams, b_mag: float, drive_freq: float, b1: float, times,
                  n_orient=DEFAULT_N_ORIENT, capture: float = 5.0) -> RabiTrace:
    """Orientation-averaged Rabi trace for a fixed drive frequency.

    Every orientation is driven on its transition nearest ``drive_freq`` with
    Rabi frequency gamma_el * b1 * sqrt(weight). Raises if no orientation has
    a transition within ``capture`` times the largest Rabi frequency.
    """
    if not b1 > 0:
        raise ValueError("b1 must be positive")
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending")
    grid = _as_grid(n_orient)
    tr = powder_transitions(zfs, b_mag, grid.points)
    nearest = np.argmin(np.abs(tr.frequencies - drive_freq), axis=1)
    rows = np.arange(grid.count)
    detuning = tr.frequencies[rows, nearest] - drive_freq
    omega = GAMMA_EL * b1 * np.sqrt(tr.weights[rows, nearest])
    window = capture * omega.max()
    if not np.any(np.abs(detuning) <= window):
        raise ValueError(
            f"no transition within {window / 1e6:.3g} MHz of the drive at {drive_freq / 1e9:.4f} GHz"
        )
    signal = np.zeros(len(times))
    for k in range(0, grid.count, CHUNK):
        signal += rabi_two_level(omega[k:k + CHUNK], detuning[k:k + CHUNK], times).sum(axis=0)
    signal /= grid.count
    return RabiTrace(times, np.clip(signal, 0.0, 1.0), float(drive_freq), float(b1))
