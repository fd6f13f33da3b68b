"""Derivative-free least squares and the model-specific fits built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import powder
from .powder import OdmrMap, SpectrumGrid
from .spinham import ZfsParams

MAX_EVALS = 20_000
XTOL = 1e-10
# reflection, expansion, contraction, shrink
NM_COEFFS = (1.0, 2.0, 0.5, 0.5)
HESSIAN_STEP = 1e-4
FIT_N_ORIENT = 2000
LOW_FIELD_MAX = 5e-3


class FitError(ValueError):
    pass


@dataclass
class DataSeries:
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray | None = None
    x_unit: str = ""
    y_unit: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("data must be finite")
        if self.sigma is not None:
            self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), self.y.shape).copy()
            if np.any(~np.isfinite(self.sigma)) or np.any(self.sigma <= 0):
                raise ValueError("sigma must be positive and finite")


@dataclass
class FitResult:
    params: dict[str, float]
    uncertainties: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int
    evaluations: int = 0
    init_loss: float = float("nan")
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def to_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "uncertainties": dict(self.uncertainties),
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            **({"extra": self.extra} if self.extra else {}),
        }


def nelder_mead(fun: Callable[[np.ndarray], float], x0, lower, upper, steps,
                xtol: float = XTOL, max_evals: int = MAX_EVALS, restarts: int = 1):
    """Bounded Nelder-Mead. Returns (x, f, converged, iterations, evaluations).

    Trial points are clamped coordinate-wise into [lower, upper]. Converged
    means every vertex lies within ``xtol`` (relative to max(|x_best|,
    |step|)) of the best vertex in every coordinate. After convergence the
    simplex is rebuilt around the best point up to ``restarts`` times, which
    guards against collapse onto a bound face.
    """
    alpha, gamma, rho, sigma = NM_COEFFS
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    steps = np.asarray(steps, dtype=float)
    n = len(steps)
    nevals = 0

    def clamp(x):
        return np.minimum(np.maximum(x, lower), upper)

    def f(x):
        nonlocal nevals
        nevals += 1
        val = fun(x)
        return val if np.isfinite(val) else np.inf

    def build(x):
        verts = [x.copy()]
        for i in range(n):
            v = x.copy()
            v[i] = x[i] + steps[i]
            if v[i] > upper[i]:
                v[i] = x[i] - steps[i]
            verts.append(clamp(v))
        return np.array(verts)

    x_best = clamp(np.asarray(x0, dtype=float))
    f_best = f(x_best)
    if not np.isfinite(f_best):
        raise FitError("loss is not finite at the initial point")
    scale = np.maximum(np.abs(steps), 1e-300)
    iterations = 0
    converged = False
    for attempt in range(restarts + 1):
        simplex = build(x_best)
        fvals = np.array([f_best] + [f(v) for v in simplex[1:]])
        converged = False
        while nevals < max_evals:
            order = np.argsort(fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            spread = np.abs(simplex[1:] - simplex[0]).max(axis=0)
            if np.all(spread <= xtol * np.maximum(np.abs(simplex[0]), scale)):
                converged = True
                break
            iterations += 1
            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]
            xr = clamp(centroid + alpha * (centroid - worst))
            fr = f(xr)
            if fr < fvals[0]:
                xe = clamp(centroid + gamma * (xr - centroid))
                fe = f(xe)
                if fe < fr:
                    simplex[-1], fvals[-1] = xe, fe
                else:
                    simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-2]:
                simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-1]:
                xc = clamp(centroid + rho * (xr - centroid))
                fc = f(xc)
                accept = fc <= fr
            else:
                xc = clamp(centroid + rho * (worst - centroid))
                fc = f(xc)
                accept = fc < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
                continue
            for i in range(1, n + 1):
                simplex[i] = clamp(simplex[0] + sigma * (simplex[i] - simplex[0]))
                fvals[i] = f(simplex[i])
        k = int(np.argmin(fvals))
        improved = fvals[k] < f_best
        if fvals[k] <= f_best:
            x_best, f_best = simplex[k].copy(), fvals[k]
        if not converged or not improved:
            break
    return x_best, float(f_best), converged, iterations, nevals


def _hessian(fun, x, lower, upper, h):
    n = len(x)
    # per-coordinate stencil centre, shifted inward when x sits on a bound
    centre = x.copy()
    for i in range(n):
        if x[i] - h[i] < lower[i]:
            centre[i] = x[i] + h[i]
        elif x[i] + h[i] > upper[i]:
            centre[i] = x[i] - h[i]
    f0 = fun(centre)
    hess = np.zeros((n, n))
    e = np.eye(n)
    fp = [fun(centre + h[i] * e[i]) for i in range(n)]
    fm = [fun(centre - h[i] * e[i]) for i in range(n)]
    for i in range(n):
        hess[i, i] = (fp[i] - 2 * f0 + fm[i]) / h[i] ** 2
        for j in range(i + 1, n):
            di, dj = h[i] * e[i], h[j] * e[j]
            val = (fun(centre + di + dj) - fun(centre + di - dj)
                   - fun(centre - di + dj) + fun(centre - di - dj)) / (4 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return hess


def fit_least_squares(model: Callable[[np.ndarray, np.ndarray], np.ndarray], data: DataSeries,
                      init, bounds=None, names: Sequence[str] | None = None, steps=None,
                      max_evals: int = MAX_EVALS, xtol: float = XTOL) -> FitResult:
    """Minimise sum(((y - model(x, p)) / sigma)^2) over p by bounded Nelder-Mead.

    ``init`` and ``bounds`` may be dicts keyed by parameter name or plain
    sequences. 1-sigma uncertainties come from a central-difference Hessian
    of the loss at the optimum, scaled by the reduced chi-square when no
    sigma is given.
    """
    if isinstance(init, dict):
        names = list(init) if names is None else list(names)
        x0 = np.array([init[k] for k in names], dtype=float)
    else:
        x0 = np.asarray(init, dtype=float)
        names = list(names) if names is not None else [f"p{i}" for i in range(len(x0))]
    p = len(x0)
    if bounds is None:
        lower, upper = np.full(p, -np.inf), np.full(p, np.inf)
    else:
        if isinstance(bounds, dict):
            bounds = [bounds.get(k, (-np.inf, np.inf)) for k in names]
        lower = np.array([b[0] for b in bounds], dtype=float)
        upper = np.array([b[1] for b in bounds], dtype=float)
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise FitError("initial point lies outside the bounds")
    if steps is None:
        steps = np.where(np.abs(x0) >= np.finfo(float).tiny, 0.05 * np.abs(x0), 0.00025)
    steps = np.asarray(steps, dtype=float)
    weight = 1.0 / data.sigma if data.sigma is not None else 1.0

    def loss(params):
        r = (data.y - model(data.x, params)) * weight
        return float(np.dot(r, r))

    init_loss = loss(x0)
    if not np.isfinite(init_loss):
        raise FitError("loss is not finite at the initial point")
    x, fmin, converged, iters, nevals = nelder_mead(loss, x0, lower, upper, steps, xtol, max_evals)

    # relative step, floored at the simplex scale for parameters near zero
    h = HESSIAN_STEP * np.maximum(np.abs(x), np.abs(steps))
    dof = max(len(data.y) - p, 1)
    s2 = 1.0 if data.sigma is not None else fmin / dof
    # a degenerate step (parameters underflowing to subnormals) leaves the
    # curvature undefined; those uncertainties come out infinite
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        hess = _hessian(loss, x, lower, upper, h)
        # invert in step-scaled coordinates; raw entries span many decades
        scaled = hess * np.outer(h, h)
        if np.all(np.isfinite(scaled)):
            try:
                cov = 2.0 * np.linalg.inv(scaled) * s2
            except np.linalg.LinAlgError:
                cov = 2.0 * np.linalg.pinv(scaled) * s2
        else:
            cov = np.full((p, p), np.inf)
        err = np.sqrt(np.abs(np.diag(cov))) * h
    err = np.where(np.isfinite(err), err, np.inf)
    return FitResult(
        params={k: float(v) for k, v in zip(names, x)},
        uncertainties={k: float(v) for k, v in zip(names, err)},
        residual_norm=math.sqrt(fmin),
        converged=converged,
        iterations=iters,
        evaluations=nevals,
        init_loss=init_loss,
    )


# -- spectra -----------------------------------------------------------------

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def _local_maxima(y):
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    return np.nonzero(inner)[0] + 1


def _fwhm(freqs, y, k):
    half = y[k] / 2
    lo = k
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = k
    while hi < len(y) - 1 and y[hi] > half:
        hi += 1
    return freqs[hi] - freqs[lo]


def peak_init(spec: SpectrumGrid) -> dict[str, float]:
    """Initial (d, e, linewidth, amp_xz, amp_yz) from the two dominant peaks."""
    freqs = np.asarray(spec.freqs, dtype=float)
    y = np.asarray(spec.signal, dtype=float)
    if abs(y.min()) > abs(y.max()):
        y = -y
    if len(y) >= 7:
        y = np.convolve(y, np.ones(5) / 5, mode="same")
    floor = 3 * np.median(np.abs(y))
    cand = [k for k in _local_maxima(y) if y[k] > floor]
    if not cand:
        raise FitError("no peak above 3x the median absolute signal")
    cand.sort(key=lambda k: (-y[k], k))
    first = cand[0]
    width = max(_fwhm(freqs, y, first), 2 * (freqs[1] - freqs[0]))
    others = [k for k in cand[1:] if abs(freqs[k] - freqs[first]) > width]
    if not others:
        raise FitError("fewer than two resolved peaks above 3x the median absolute signal")
    second = others[0]
    k1, k2 = sorted((first, second))
    f1, f2 = freqs[k1], freqs[k2]
    # powder-averaged coupling of each zero-field line is 1/3
    area = lambda k: 3 * y[k] * width * _FWHM_TO_SIGMA * math.sqrt(2 * math.pi) / 1e9  # noqa: E731
    return {
        "d": (f1 + f2) / 2,
        "e": (f2 - f1) / 2,
        "linewidth": width,
        "amp_xz": area(k2),
        "amp_yz": area(k1),
    }


def _low_field_rows(spectra) -> list[SpectrumGrid]:
    if isinstance(spectra, SpectrumGrid):
        return [spectra]
    if isinstance(spectra, OdmrMap):
        spectra = [spectra.row(k) for k in range(len(spectra.b_values))]
    rows = list(spectra)
    low = [s for s in rows if s.b_mag <= LOW_FIELD_MAX]
    if not low:
        raise FitError(f"no spectrum at or below {LOW_FIELD_MAX * 1e3:g} mT")
    return low


def fit_zfs(spectra, init: dict | None = None, n_orient=FIT_N_ORIENT, amp_xy: float = 0.0,
            sigma=None, threads: int = 1) -> FitResult:
    """Fit (d, e, linewidth, amp_xz, amp_yz) of the powder model to low-field spectra.

    ``spectra`` is a SpectrumGrid, a list of them, or an OdmrMap; only rows at
    or below 5 mT enter the fit. Negative-contrast data are fitted with a
    sign flip recorded in ``extra['sign']``.
    """
    rows = _low_field_rows(spectra)
    ys = np.concatenate([r.signal for r in rows])
    sign = -1.0 if abs(ys.min()) > abs(ys.max()) else 1.0
    start = dict(peak_init(rows[0]))
    if init:
        unknown = set(init) - set(start)
        if unknown:
            raise FitError(f"unknown init parameters: {sorted(unknown)}")
        start.update(init)
    names = ["d", "e", "linewidth", "amp_xz", "amp_yz"]
    x0 = np.array([start[k] for k in names], dtype=float)
    x0[1] = min(x0[1], x0[0] / 3)
    fgrid = np.concatenate([r.freqs for r in rows])
    df = min(np.min(np.diff(r.freqs)) for r in rows if len(r.freqs) > 1)
    bounds = [(0.2 * x0[0], 5 * x0[0]), (0.0, x0[0]), (df / 2, 20 * x0[2]), (0.0, np.inf), (0.0, np.inf)]
    grid = powder.fibonacci_sphere(n_orient)
    splits = np.cumsum([len(r.freqs) for r in rows])[:-1]

    def model(_x, p):
        d, e, lw, axz, ayz = p
        zfs = ZfsParams(d, min(e, d / 3), axz, ayz, amp_xy)
        parts = [powder.powder_signal(zfs, r.b_mag, r.freqs, lw, grid, threads) for r in rows]
        return sign * np.concatenate(parts)

    data = DataSeries(fgrid, ys, sigma=sigma, x_unit="Hz")
    for chunk in np.split(fgrid, splits):
        if np.any(np.diff(chunk) <= 0):
            raise FitError("spectrum frequencies must be strictly ascending")
    steps = 0.05 * np.abs(x0)
    steps[0] = steps[1] = max(0.02 * x0[1], x0[2] / 4)
    res = fit_least_squares(model, data, x0, bounds, names=names, steps=steps)
    res.extra = {"sign": sign, "n_orient": int(grid.count), "rows": [r.b_mag for r in rows]}
    return res


# -- decay and scaling laws ----------------------------------------------------

def _stretched(t, p):
    a, t2, beta = p
    return a * np.exp(-((t / t2) ** beta))


def fit_stretched_exp(data: DataSeries) -> FitResult:
    """Fit A exp(-(t/T2)^beta) with beta in [0.3, 3] and T2 > 0."""
    t, y = data.x, data.y
    if len(t) < 5:
        raise FitError("need at least 5 points")
    if np.any(t < 0):
        raise FitError("times must be nonnegative")
    amp0 = float(y[np.argmin(t)])
    decaying = amp0 > 0 and y[np.argmax(t)] < amp0 and np.polyfit(t, y, 1)[0] < 0
    below = np.nonzero(y <= amp0 / math.e)[0]
    t2_0 = float(t[below[0]]) if len(below) and t[below[0]] > 0 else float(t.max())
    if t2_0 <= 0:
        t2_0 = float(t.max()) or 1.0
    init = {"amplitude": amp0 if amp0 != 0 else 1.0, "t2": t2_0, "beta": 1.0}
    bounds = {"amplitude": (-np.inf, np.inf), "t2": (t2_0 * 1e-6, np.inf), "beta": (0.3, 3.0)}
    names = ["amplitude", "t2", "beta"]
    res = fit_least_squares(_stretched, data, init, bounds, names=names,
                            steps=[0.05 * abs(init["amplitude"]), 0.2 * t2_0, 0.2])
    if not decaying:
        res.converged = False
    return res


def fit_power_law(n_values, t2_values) -> tuple[float, float]:
    """Closed-form log-log regression: t2 = prefactor * n^exponent."""
    n = np.asarray(n_values, dtype=float)
    t2 = np.asarray(t2_values, dtype=float)
    if n.shape != t2.shape or len(n) < 2:
        raise ValueError("need at least two (n, t2) pairs of equal length")
    if np.any(n <= 0) or np.any(t2 <= 0):
        raise ValueError("power-law fit needs strictly positive values")
    lx, ly = np.log(n), np.log(t2)
    mx, my = lx.mean(), ly.mean()
    sxx = np.dot(lx - mx, lx - mx)
    if sxx == 0:
        raise ValueError("need at least two distinct n values")
    slope = np.dot(lx - mx, ly - my) / sxx
    return float(slope), float(math.exp(my - slope * mx))


def _t1_model(temps, p):
    return p[0] * temps + p[1] * temps ** 7


def fit_t1_temperature(temps, t1s, sigma_t1=None) -> FitResult:
    """Fit 1/T1 = relax_a*T + relax_raman*T^7 in rate space, both amplitudes >= 0."""
    temps = np.asarray(temps, dtype=float)
    t1s = np.asarray(t1s, dtype=float)
    if np.any(temps <= 0) or np.any(t1s <= 0):
        raise ValueError("temperatures and T1 values must be positive")
    order = np.lexsort((t1s, temps))
    temps, t1s = temps[order], t1s[order]
    rates = 1.0 / t1s
    sigma = None
    if sigma_t1 is not None:
        sigma = np.broadcast_to(np.asarray(sigma_t1, dtype=float), t1s.shape)[order] / t1s ** 2
    w = 1.0 / sigma if sigma is not None else np.ones_like(rates)
    design = np.column_stack([temps, temps ** 7]) * w[:, None]
    colscale = np.linalg.norm(design, axis=0)
    from scipy.optimize import nnls

    coef, _ = nnls(design / colscale, rates * w)
    x0 = coef / colscale
    scale = np.array([rates.mean() / temps.mean(), rates.mean() / np.mean(temps ** 7)])
    steps = np.where(x0 > 0, 0.05 * x0, 0.05 * scale)
    data = DataSeries(temps, rates, sigma=sigma, x_unit="K", y_unit="1/s")
    return fit_least_squares(_t1_model, data, x0, [(0.0, np.inf), (0.0, np.inf)],
                             names=["relax_a", "relax_raman"], steps=steps)


def _damped_cosine(t, p):
    offset, amp, rate, freq = p
    return offset - amp * np.exp(-rate * t) * np.cos(2 * np.pi * freq * t)


def fit_damped_cosine(times, signal) -> FitResult:
    """Fit offset - A exp(-rate t) cos(2 pi f t), the usual Rabi-trace model."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(signal, dtype=float)
    offset0 = float(np.mean(y[len(y) // 2:]))
    amp0 = offset0 - float(y[0]) or 0.5
    dt = t[1] - t[0]
    spec = np.abs(np.fft.rfft(y - y.mean()))
    spec[0] = 0
    fq = np.fft.rfftfreq(len(y), dt)
    freq0 = float(fq[int(np.argmax(spec))]) or 1.0 / (t[-1] - t[0])
    rate0 = 1.0 / (t[-1] - t[0])
    init = [offset0, amp0, rate0, freq0]
    bounds = [(-np.inf, np.inf), (-np.inf, np.inf), (0.0, np.inf), (0.0, np.inf)]
    steps = [0.05, 0.1 * abs(amp0), 0.5 * rate0, 0.1 * freq0]
    return fit_least_squares(_damped_cosine, DataSeries(t, y), init, bounds,
                             names=["offset", "amplitude", "rate", "freq"], steps=steps)
