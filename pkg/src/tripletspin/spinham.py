"""Spin-1 zero-field-splitting + Zeeman Hamiltonian, eigensolver and transitions.

All energies are in Hz (H/h). Level labels follow the convention used
throughout the package: for d > 0 and e >= 0 the ascending levels at zero
field are T_z (-2d/3), T_y (d/3 - e) and T_x (d/3 + e), so the zero-field
transitions are T_y-T_z = d - e, T_x-T_z = d + e and T_x-T_y = 2e.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import GAMMA_EL

_R2 = 1.0 / np.sqrt(2.0)

SX = _R2 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
SY = _R2 * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
SPIN_OPS = np.stack([SX, SY, SZ])

# level-index pairs (i < j) and their labels; level 0 = T_z, 1 = T_y, 2 = T_x
PAIRS = ((0, 1), (0, 2), (1, 2))
PAIR_LABELS = ("yz", "xz", "xy")

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class ZfsParams:
    """Zero-field splitting (Hz) and relative ODMR amplitudes per transition."""

    d: float
    e: float
    amp_xz: float = 1.0
    amp_yz: float = 1.0
    amp_xy: float = 0.0

    def __post_init__(self):
        vals = (self.d, self.e, self.amp_xz, self.amp_yz, self.amp_xy)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("ZFS parameters must be finite")
        if self.d <= 0:
            raise ValueError(f"d must be positive, got {self.d}")
        if not abs(self.e) <= self.d / 3 * (1 + 1e-12):
            raise ValueError(f"|e| must not exceed d/3, got e={self.e}, d={self.d}")
        if min(self.amp_xz, self.amp_yz, self.amp_xy) < 0:
            raise ValueError("amplitudes must be nonnegative")

    @property
    def amplitudes(self) -> np.ndarray:
        """Amplitudes ordered like PAIRS (ascending-level pairs).

        Labels follow the molecular axes: for e < 0 the T_x level is the
        middle one, so the two lower pairs trade amplitudes.
        """
        if self.e < 0:
            return np.array([self.amp_xz, self.amp_yz, self.amp_xy])
        return np.array([self.amp_yz, self.amp_xz, self.amp_xy])


@dataclass(frozen=True)
class EnergyLevels:
    levels: np.ndarray  # (..., 3) ascending, Hz
    states: np.ndarray  # (..., 3, 3), column k is the eigenvector of levels[..., k]


@dataclass(frozen=True)
class TransitionSet:
    frequencies: np.ndarray  # (..., 3) ordered like PAIRS
    weights: np.ndarray  # (..., 3)

    def by_label(self, label: str) -> tuple[np.ndarray, np.ndarray]:
        k = PAIR_LABELS.index(label)
        return self.frequencies[..., k], self.weights[..., k]


def build_hamiltonian(zfs: ZfsParams, b) -> np.ndarray:
    """H/h in Hz for field ``b`` (Tesla, molecular frame).

    ``b`` may be a single 3-vector or an array of shape (..., 3); the result
    then has shape (..., 3, 3).
    """
    b = np.asarray(b, dtype=float)
    if b.shape[-1] != 3:
        raise ValueError("field must have 3 components")
    if not np.all(np.isfinite(b)):
        raise ValueError("field components must be finite")
    h0 = zfs.d * (SZ @ SZ - (2.0 / 3.0) * np.eye(3)) + zfs.e * (SX @ SX - SY @ SY)
    zeeman = np.tensordot(b, SPIN_OPS, axes=([-1], [0]))
    return h0 - GAMMA_EL * zeeman


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    # make the largest-magnitude component of every column real and positive;
    # near-ties resolve to the lowest index
    mag = np.abs(vecs)
    top = mag.max(axis=-2, keepdims=True)
    idx = np.argmax(mag >= top * (1 - 1e-9), axis=-2)
    comp = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    phase = comp / np.abs(comp)
    return vecs / phase


def eigensolve(h) -> EnergyLevels:
    """Diagonalize Hermitian 3x3 matrices by cyclic complex Jacobi rotations.

    Accepts a single matrix or a stack (..., 3, 3). Each matrix is rotated
    only until its own off-diagonal norm drops below 1e-13 of its Frobenius
    norm, so a result never depends on what else was in the batch.
    """
    a = np.array(h, dtype=complex)
    if a.shape[-2:] != (3, 3):
        raise ValueError("expected 3x3 matrices")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    batch_shape = a.shape[:-2]
    a = a.reshape(-1, 3, 3)
    n = a.shape[0]
    norm = np.linalg.norm(a, axis=(-2, -1))
    herm_err = np.linalg.norm(a - np.conj(np.swapaxes(a, -1, -2)), axis=(-2, -1))
    if np.any(herm_err > 1e-10 * np.maximum(norm, 1e-300)):
        raise ValueError("matrix is not Hermitian")
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    v = np.broadcast_to(np.eye(3, dtype=complex), (n, 3, 3)).copy()
    thresh = JACOBI_TOL * norm

    def offdiag(m):
        return np.sqrt(2 * (np.abs(m[:, 0, 1]) ** 2 + np.abs(m[:, 0, 2]) ** 2 + np.abs(m[:, 1, 2]) ** 2))

    for _ in range(JACOBI_MAX_SWEEPS):
        active = offdiag(a) >= thresh
        if not active.any():
            break
        for p, q in PAIRS:
            apq = a[:, p, q]
            r = np.abs(apq)
            # entries this small are already far below the stopping threshold
            rot = active & (r > 1e-3 * thresh)
            safe_r = np.where(rot, r, 1.0)
            phase = np.where(rot, apq / safe_r, 1.0)
            theta = np.where(rot, (a[:, q, q].real - a[:, p, p].real) / (2 * safe_r), 0.0)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            c = np.where(rot, c, 1.0)
            s = np.where(rot, s, 0.0)
            u = np.broadcast_to(np.eye(3, dtype=complex), (n, 3, 3)).copy()
            u[:, p, p] = c
            u[:, p, q] = s
            u[:, q, p] = -s * np.conj(phase)
            u[:, q, q] = c * np.conj(phase)
            a = np.conj(np.swapaxes(u, -1, -2)) @ a @ u
            v = v @ u
    else:
        if np.any(offdiag(a) >= thresh):
            raise RuntimeError("Jacobi iteration did not converge")

    levels = np.real(np.diagonal(a, axis1=-2, axis2=-1))
    order = np.argsort(levels, axis=-1, kind="stable")
    levels = np.take_along_axis(levels, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    v = _fix_phase(v)
    return EnergyLevels(levels.reshape(batch_shape + (3,)), v.reshape(batch_shape + (3, 3)))


def transition_table(lv: EnergyLevels, drive_axis) -> TransitionSet:
    """Transition frequencies and |<i| n.S |j>|^2 coupling weights.

    ``drive_axis`` is a unit vector, or an array broadcastable against the
    batch shape of ``lv`` (one axis per system).
    """
    axis = np.asarray(drive_axis, dtype=float)
    if np.any(np.abs(np.linalg.norm(axis, axis=-1) - 1) > 1e-9):
        raise ValueError("drive_axis must be a unit vector")
    op = np.tensordot(axis, SPIN_OPS, axes=([-1], [0]))
    vecs = lv.states
    m = np.conj(np.swapaxes(vecs, -1, -2)) @ op @ vecs
    freqs = np.stack([lv.levels[..., j] - lv.levels[..., i] for i, j in PAIRS], axis=-1)
    weights = np.stack([np.abs(m[..., i, j]) ** 2 for i, j in PAIRS], axis=-1)
    return TransitionSet(freqs, weights)


def zero_field_frequencies(zfs: ZfsParams) -> dict[str, float]:
    return {"yz": zfs.d - zfs.e, "xz": zfs.d + zfs.e, "xy": 2 * abs(zfs.e)}
