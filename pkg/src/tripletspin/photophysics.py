"""Rate-equation model of OADF (optically activated delayed fluorescence) spin readout.

Eight states: the singlets S0 and S1, the lowest triplet T1 and the upper
triplet T2, each triplet with x, y, z sublevels labelled as in
:mod:`tripletspin.spinham`. A 488 nm laser pumps S0 -> S1, S1 crosses into the
T1 sublevels at spin-selective rates, and a 912 nm laser lifts T1 -> T2
(spin conserving), from where spin-selective reverse intersystem crossing
returns population to S1 and produces a delayed fluorescence photon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np


class PhotoState(IntEnum):
    S0 = 0
    S1 = 1
    T1x = 2
    T1y = 3
    T1z = 4
    T2x = 5
    T2y = 6
    T2z = 7


N_STATES = len(PhotoState)
_T1 = {"x": PhotoState.T1x, "y": PhotoState.T1y, "z": PhotoState.T1z}
_T2 = {"x": PhotoState.T2x, "y": PhotoState.T2y, "z": PhotoState.T2z}

# Taylor core is used once ||A|| / 2^s <= this, where the order-6 remainder
# is below double precision
_EXPM_THETA = 2.0 ** -6
_EXPM_ORDER = 6
DEFAULT_RESOLUTION = 1000
DEFAULT_TAIL = 10e-6


@dataclass(frozen=True)
class PhotophysicsParams:
    """Transition rates in 1/s. Laser-gated channels are k_exc and k_pump912."""

    k_exc: float = 0.0
    k_fl: float = 0.0
    q_r: float = 1.0
    k_isc_x: float = 0.0
    k_isc_y: float = 0.0
    k_isc_z: float = 0.0
    k_pump912: float = 0.0
    k_risc_x: float = 0.0
    k_risc_y: float = 0.0
    k_risc_z: float = 0.0
    k_t2_relax: float = 0.0
    k_trip_decay: float = 0.0
    k_spin_relax: float = 0.0
    # optional per-sublevel (x, y, z) triplet decay, replacing k_trip_decay
    k_trip_decay_sublevel: tuple[float, float, float] | None = None

    def __post_init__(self):
        for name, val in self.rates().items():
            if not np.isfinite(val) or val < 0:
                raise ValueError(f"rate {name} must be finite and nonnegative, got {val}")
        if not 0 <= self.q_r <= 1:
            raise ValueError(f"q_r must lie in [0, 1], got {self.q_r}")

    def rates(self) -> dict[str, float]:
        out = {k: v for k, v in self.__dict__.items() if k.startswith("k_") and k != "k_trip_decay_sublevel"}
        if self.k_trip_decay_sublevel is not None:
            for ax, v in zip("xyz", self.k_trip_decay_sublevel):
                out[f"k_trip_decay_{ax}"] = v
        return out

    def isc(self, ax: str) -> float:
        return getattr(self, f"k_isc_{ax}")

    def risc(self, ax: str) -> float:
        return getattr(self, f"k_risc_{ax}")

    def trip_decay(self, ax: str) -> float:
        if self.k_trip_decay_sublevel is None:
            return self.k_trip_decay
        return self.k_trip_decay_sublevel["xyz".index(ax)]

    def with_(self, **changes) -> "PhotophysicsParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class MwEvent:
    """Instantaneous population exchange between two T1 sublevels.

    ``at`` is the offset (s) from the start of the owning segment.
    """

    pair: str
    fraction: float = 1.0
    at: float = 0.0

    def __post_init__(self):
        _pair_states(self.pair)
        if not 0 <= self.fraction <= 1:
            raise ValueError(f"transfer fraction must lie in [0, 1], got {self.fraction}")
        if self.at < 0:
            raise ValueError("microwave event offset must be nonnegative")


@dataclass(frozen=True)
class Segment:
    duration: float
    laser488: bool = False
    laser912: bool = False
    mw: tuple[MwEvent, ...] = ()

    def __post_init__(self):
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"segment duration must be positive, got {self.duration}")
        for ev in self.mw:
            if ev.at > self.duration:
                raise ValueError("microwave event lies beyond the end of its segment")


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("pulse sequence is empty")

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def starts(self) -> list[float]:
        out, t = [], 0.0
        for s in self.segments:
            out.append(t)
            t += s.duration
        return out

    def default_windows(self, tail: float = DEFAULT_TAIL) -> list[tuple[float, float]]:
        """Every 912 nm segment plus ``tail`` seconds after it."""
        end = self.duration
        return [(t0, min(t0 + s.duration + tail, end))
                for t0, s in zip(self.starts(), self.segments) if s.laser912]

    def with_mw_fraction(self, fraction: float) -> "PulseSequence":
        segs = tuple(replace(s, mw=tuple(replace(ev, fraction=fraction) for ev in s.mw))
                     for s in self.segments)
        return PulseSequence(segs)


@dataclass
class PopulationTrace:
    times: np.ndarray
    populations: np.ndarray  # (len(times), 8)
    emission_rate: np.ndarray  # photons/s per molecule
    cumulative: np.ndarray  # photons emitted since t = 0
    windows: list[tuple[float, float]]
    oadf_counts: list[float] = field(default_factory=list)

    @property
    def total_counts(self) -> float:
        return float(sum(self.oadf_counts))


def _pair_states(pair: str) -> tuple[int, int]:
    if not (isinstance(pair, str) and len(pair) == 2 and set(pair) <= set("xyz") and pair[0] != pair[1]):
        raise ValueError(f"invalid sublevel pair {pair!r}; use two of x, y, z")
    return int(_T1[pair[0]]), int(_T1[pair[1]])


def build_rate_matrix(p: PhotophysicsParams, laser488: bool, laser912: bool) -> np.ndarray:
    """Generator G with dp/dt = G p; G[to, from] is the rate of that channel."""
    g = np.zeros((N_STATES, N_STATES))

    def add(src, dst, rate):
        g[dst, src] += rate

    S0, S1 = PhotoState.S0, PhotoState.S1
    if laser488:
        add(S0, S1, p.k_exc)
    add(S1, S0, p.k_fl)
    for ax in "xyz":
        t1, t2 = _T1[ax], _T2[ax]
        add(S1, t1, p.isc(ax))
        if laser912:
            add(t1, t2, p.k_pump912)
        add(t2, t1, p.k_t2_relax)
        add(t2, S1, p.risc(ax))
        add(t1, S0, p.trip_decay(ax))
    for a, b in (("x", "y"), ("x", "z"), ("y", "z")):
        add(_T1[a], _T1[b], p.k_spin_relax)
        add(_T1[b], _T1[a], p.k_spin_relax)
    g -= np.diag(g.sum(axis=0))
    return g


def emission_vector(p: PhotophysicsParams) -> np.ndarray:
    """Row vector turning populations into detected-photon rate (q_r k_fl p_S1)."""
    w = np.zeros(N_STATES)
    w[PhotoState.S1] = p.q_r * p.k_fl
    return w


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring around an order-6 Taylor core.

    The squaring phase works on exp(A) - I (E <- 2E + E^2), which keeps the
    small off-identity part of short-step propagators from drowning in
    rounding against the identity.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix must be finite")
    norm = np.abs(a).sum(axis=0).max()
    squarings = max(0, int(math.ceil(math.log2(norm / _EXPM_THETA)))) if norm > 0 else 0
    scaled = a / 2.0 ** squarings
    eye = np.eye(len(a))
    # Horner form of sum_{k=1..6} A^k / k!
    inner = eye.copy()
    for k in range(_EXPM_ORDER, 1, -1):
        inner = eye + scaled @ inner / k
    em1 = scaled @ inner
    for _ in range(squarings):
        em1 = 2.0 * em1 + em1 @ em1
    return eye + em1


def _augmented_step(generator, emission, duration):
    n = len(generator)
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = generator
    aug[n, :n] = emission
    return expm(aug * duration)


def propagate(pop, generator, duration: float, emission=None):
    """Evolve populations for ``duration``; returns (pop', photons emitted).

    Photons are integrated exactly by carrying an extra accumulator state.
    """
    pop = np.asarray(pop, dtype=float)
    generator = np.asarray(generator, dtype=float)
    if not np.all(np.isfinite(generator)):
        raise ValueError("generator must be finite")
    if not duration > 0:
        raise ValueError("duration must be positive")
    emission = np.zeros(len(pop)) if emission is None else np.asarray(emission, dtype=float)
    step = _augmented_step(generator, emission, duration)
    out = step @ np.append(pop, 0.0)
    return out[:-1], float(out[-1])


def apply_mw_pulse(pop, pair: str, f: float) -> np.ndarray:
    """Exchange fraction ``f`` of the populations of two T1 sublevels."""
    i, j = _pair_states(pair)
    if not 0 <= f <= 1:
        raise ValueError(f"transfer fraction must lie in [0, 1], got {f}")
    out = np.array(pop, dtype=float)
    a, b = out[i], out[j]
    out[i] = a + (b - a) * f
    out[j] = b + (a - b) * f
    return out


def initial_populations() -> np.ndarray:
    pop = np.zeros(N_STATES)
    pop[PhotoState.S0] = 1.0
    return pop


def run_sequence(seq: PulseSequence, p: PhotophysicsParams, windows=None,
                 resolution: int = DEFAULT_RESOLUTION, pop0=None) -> PopulationTrace:
    """Piecewise propagation of a pulse sequence with exact photon integration.

    ``windows`` are absolute (start, stop) times; by default every 912 nm
    segment plus a 10 us tail. Segment boundaries, microwave events and window
    edges are all hit exactly; in between each segment is sampled at
    ``resolution`` evenly spaced steps.
    """
    windows = seq.default_windows() if windows is None else [tuple(map(float, w)) for w in windows]
    for w0, w1 in windows:
        if not 0 <= w0 <= w1:
            raise ValueError(f"bad readout window {(w0, w1)}")
    pop = initial_populations() if pop0 is None else np.asarray(pop0, dtype=float)
    emission = emission_vector(p)
    acc = 0.0
    times, pops, cum = [0.0], [pop.copy()], [0.0]
    generators = {}
    edges = sorted({t for w in windows for t in w})

    for t0, seg in zip(seq.starts(), seq.segments):
        key = (seg.laser488, seg.laser912)
        if key not in generators:
            generators[key] = build_rate_matrix(p, *key)
        gen = generators[key]
        events = sorted(seg.mw, key=lambda ev: ev.at)
        marks = {0.0, seg.duration}
        marks.update(ev.at for ev in events)
        marks.update(t - t0 for t in edges if t0 < t < t0 + seg.duration)
        marks = sorted(marks)
        pending = list(events)
        dt_nominal = seg.duration / resolution
        for a, b in zip(marks[:-1], marks[1:]):
            while pending and pending[0].at <= a:
                ev = pending.pop(0)
                pop = apply_mw_pulse(pop, ev.pair, ev.fraction)
            if b <= a:
                continue
            nsteps = max(1, int(round((b - a) / dt_nominal)))
            step = _augmented_step(gen, emission, (b - a) / nsteps)
            state = np.append(pop, 0.0)
            for k in range(1, nsteps + 1):
                state = step @ state
                times.append(t0 + a + (b - a) * k / nsteps)
                pops.append(state[:-1].copy())
                cum.append(acc + state[-1])
            pop, acc = state[:-1].copy(), acc + state[-1]
        for ev in pending:
            pop = apply_mw_pulse(pop, ev.pair, ev.fraction)
        if pending:
            pops[-1] = pop.copy()

    times = np.array(times)
    pops = np.array(pops)
    cum = np.array(cum)
    rate = pops @ emission

    def cum_at(t):
        # last sample at or before t; edges are always sampled exactly
        k = int(np.searchsorted(times, t, side="right")) - 1
        return cum[max(k, 0)]

    counts = [float(cum_at(w1) - cum_at(w0)) for w0, w1 in windows]
    return PopulationTrace(times, pops, rate, cum, windows, counts)


def oadf_contrast(p: PhotophysicsParams, pair: str, seq_template: PulseSequence,
                  windows=None, resolution: int = 50) -> float:
    """(counts with the microwave pulse - counts without) / counts without."""
    slots = [ev for seg in seq_template.segments for ev in seg.mw]
    if len(slots) != 1 or slots[0].pair not in (pair, pair[::-1]):
        raise ValueError(f"sequence template needs exactly one microwave slot on pair {pair!r}")
    fraction = slots[0].fraction if slots[0].fraction > 0 else 1.0
    with_pi = run_sequence(seq_template.with_mw_fraction(fraction), p, windows, resolution).total_counts
    reference = run_sequence(seq_template.with_mw_fraction(0.0), p, windows, resolution).total_counts
    if reference <= 0:
        raise ValueError("reference OADF counts are zero; contrast undefined")
    return (with_pi - reference) / reference


def readout_sequence(pair: str = "xz", t_init: float = 100e-6, t_wait: float = 1e-6,
                     t_read: float = 5e-6, t_tail: float = DEFAULT_TAIL,
                     fraction: float = 1.0) -> PulseSequence:
    """Initialise with 488 nm, wait, apply one microwave pulse, read with 912 nm."""
    return PulseSequence((
        Segment(t_init, laser488=True),
        Segment(t_wait, mw=(MwEvent(pair, fraction, at=t_wait),)),
        Segment(t_read, laser912=True),
        Segment(t_tail),
    ))


def steady_state(generator: np.ndarray) -> np.ndarray:
    """Normalized null vector of the generator (stationary populations)."""
    u, s, vh = np.linalg.svd(generator)
    v = np.abs(vh[-1])
    return v / v.sum()
