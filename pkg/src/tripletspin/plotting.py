"""Static SVG figures with reproducible bytes."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "tripletspin",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (5.0, 3.4),
    "lines.linewidth": 1.2,
}


def save_svg(fig, path):
    # no date stamp, fixed id salt: identical inputs give identical files
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def _figure(ncols=1):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, ncols, figsize=(5.0 * ncols, 3.4), layout="constrained")
    return fig, np.atleast_1d(axes)


def odmr_plot(path, b_values, freqs, signal):
    """Line plot for a few fields, colour map for a field sweep."""
    with plt.rc_context(STYLE):
        fig, (ax,) = _figure()
        b_values = np.asarray(b_values)
        if len(b_values) <= 6:
            for b, row in zip(b_values, signal):
                ax.plot(freqs / 1e9, row, label=f"{b * 1e3:g} mT")
            ax.set_xlabel("frequency (GHz)")
            ax.set_ylabel("ODMR signal")
            ax.legend(frameon=False)
        else:
            mesh = ax.pcolormesh(freqs / 1e9, b_values * 1e3, signal, shading="nearest", rasterized=False)
            fig.colorbar(mesh, ax=ax, label="ODMR signal")
            ax.set_xlabel("frequency (GHz)")
            ax.set_ylabel("field (mT)")
        save_svg(fig, path)


def fit_plot(path, freqs, data, model, labels):
    with plt.rc_context(STYLE):
        fig, (ax,) = _figure()
        for y, m, lab in zip(data, model, labels):
            line, = ax.plot(freqs / 1e9, y, ".", ms=2, label=lab)
            ax.plot(freqs / 1e9, m, "-", color=line.get_color())
        ax.set_xlabel("frequency (GHz)")
        ax.set_ylabel("ODMR signal")
        ax.legend(frameon=False)
        save_svg(fig, path)


def rabi_plot(path, times, traces, labels):
    with plt.rc_context(STYLE):
        fig, (ax,) = _figure()
        for tr, lab in zip(traces, labels):
            ax.plot(times * 1e9, tr, label=lab)
        ax.set_xlabel("pulse length (ns)")
        ax.set_ylabel("transferred population")
        ax.legend(frameon=False)
        save_svg(fig, path)


def coherence_plot(path, n_values, t2, fit_t2, b_values, hahn_t2):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = _figure(2)
        ax1.loglog(n_values, t2 * 1e6, "o", ms=3)
        ax1.loglog(n_values, fit_t2 * 1e6, "-")
        ax1.set_xlabel("number of pulses")
        ax1.set_ylabel("T2 (us)")
        ax2.plot(b_values * 1e3, hahn_t2 * 1e9)
        ax2.set_xlabel("field (mT)")
        ax2.set_ylabel("Hahn-echo T2 (ns)")
        save_svg(fig, path)


def t1_plot(path, temps, t1, points_t=None, points_t1=None):
    with plt.rc_context(STYLE):
        fig, (ax,) = _figure()
        ax.loglog(temps, t1, "-")
        if points_t is not None:
            ax.loglog(points_t, points_t1, "o", ms=3)
        ax.set_xlabel("temperature (K)")
        ax.set_ylabel("T1 (s)")
        save_svg(fig, path)


def oadf_plot(path, times, ref, pi, contrast):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = _figure(2)
        ax1.plot(times * 1e6, ref, label="no pulse")
        ax1.plot(times * 1e6, pi, label="pi pulse")
        ax1.set_xlabel("time (us)")
        ax1.set_ylabel("emission rate (1/s per molecule)")
        ax1.legend(frameon=False)
        ax2.plot(times * 1e6, contrast)
        ax2.set_xlabel("time (us)")
        ax2.set_ylabel("OADF contrast")
        save_svg(fig, path)


def sense_plot(path, delta_b, diff):
    with plt.rc_context(STYLE):
        fig, (ax,) = _figure()
        ax.plot(delta_b * 1e6, diff, "-")
        ax.set_xlabel("field offset (uT)")
        ax.set_ylabel("two-point signal difference")
        save_svg(fig, path)
