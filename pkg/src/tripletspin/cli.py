"""Command-line front end: one subcommand per workflow.

Each command reads a TOML config (see ``configs/``), writes a CSV table, a
JSON result envelope and an SVG figure into ``--out``, and echoes either the
CSV or the JSON to stdout.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, coherence, fitting, io, photophysics, plotting, powder, sensing
from .config import ConfigError, config_hash, load_config, load_preset, merge, parse_config
from .spinham import ZfsParams

log = logging.getLogger("tripletspin")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
ODMR_HEADER = ["field_t", "freq_hz", "signal"]


class NumericalFailure(RuntimeError):
    pass


DEFAULTS = {
    "zfs": {"d": 2.356e9, "e": 0.458e9, "linewidth": 60e6, "amp_xz": 1.0, "amp_yz": 1.0, "amp_xy": 0.0},
    "powder": {"n_orient": powder.DEFAULT_N_ORIENT, "fields": [0.0], "freq_start": 0.5e9,
               "freq_stop": 4.5e9, "freq_step": 5e6, "noise": 0.0},
    "fit": {"n_orient": fitting.FIT_N_ORIENT, "max_field": fitting.LOW_FIELD_MAX},
    "rabi": {"field": 0.0, "drive_freq": 2.815e9, "b1": [0.25e-3, 0.5e-3, 1e-3], "t_stop": 400e-9,
             "n_times": 801, "n_orient": powder.DEFAULT_N_ORIENT},
    "coherence": {"gamma_psd": 2 / 3, "t2_ref": 16e-6, "n_ref": 240,
                  "n_pulses": [1, 2, 4, 8, 16, 32, 64, 128, 256],
                  "hahn_fields": [0.0, 7e-3], "hahn_t2": [1.5e-6, 140e-9], "e": 0.458e9},
    "t1": {"relax_a": 43.0, "relax_raman": 47e-12, "temperatures": [80.0],
           "measured_temperature": 80.0, "measured_t1": 141e-6},
    "photophysics": {"pair": "xz", "resolution": 200},
    "sensing": {"delta": sensing.DEFAULT_DELTA, "n_orient": powder.DEFAULT_N_ORIENT,
                "proton_distance": 5e-9, "polarization": 1.0, "molecules": 6.02214076e14,
                "overhead": 1.0},
}

# presets consulted when a command needs a section the config leaves out
FALLBACK_PRESET = {"oadf": "cryo-80K"}


# -- config helpers -------------------------------------------------------------

def resolve(cfg: dict, command: str) -> tuple[dict, list[str]]:
    """Layer defaults < preset < user config; report which layers were used."""
    notes = []
    preset = cfg.get("run", {}).get("preset") or FALLBACK_PRESET.get(command)
    merged = {k: dict(v) for k, v in DEFAULTS.items()}
    if command == "sense" and not cfg.get("run", {}).get("preset"):
        # DC example from the ambient preset, AC example from the cryo preset
        for name in ("ambient", "cryo-80K"):
            merged = merge(merged, {"sensing": load_preset(name).get("sensing", {})})
        notes.append("sensing budgets from presets ambient (DC) and cryo-80K (AC)")
    if preset:
        merged = merge(merged, load_preset(preset))
        notes.append(f"preset {preset}")
    merged = merge(merged, cfg)
    for section, table in cfg.items():
        notes.extend(f"config {section}.{k}" for k in sorted(table))
    return merged, notes


def zfs_from(cfg: dict) -> ZfsParams:
    z = cfg["zfs"]
    return ZfsParams(z["d"], z["e"], z.get("amp_xz", 1.0), z.get("amp_yz", 1.0), z.get("amp_xy", 0.0))


def photophysics_from(cfg: dict) -> photophysics.PhotophysicsParams:
    ph = {k: v for k, v in cfg.get("photophysics", {}).items() if k.startswith("k_") or k == "q_r"}
    sub = [ph.pop(f"k_trip_decay_{ax}", None) for ax in "xyz"]
    if any(v is not None for v in sub):
        if any(v is None for v in sub):
            raise ConfigError("photophysics: give k_trip_decay_x, _y and _z together")
        ph["k_trip_decay_sublevel"] = tuple(sub)
    if not ph:
        raise ConfigError("photophysics: no rates given (set [run] preset or the k_* keys)")
    return photophysics.PhotophysicsParams(**ph)


def sequence_from(cfg: dict) -> tuple[photophysics.PulseSequence, float]:
    seq = cfg.get("sequence", {})
    segs = seq.get("segment")
    if not segs:
        raise ConfigError("sequence: no [[sequence.segment]] tables")
    out = []
    for s in segs:
        mw = ()
        if "mw_pair" in s:
            mw = (photophysics.MwEvent(s["mw_pair"], s.get("mw_fraction", 1.0), s.get("mw_at", 0.0)),)
        elif "mw_fraction" in s or "mw_at" in s:
            raise ConfigError("sequence: mw_fraction/mw_at need mw_pair")
        out.append(photophysics.Segment(s["duration"], s.get("laser488", False), s.get("laser912", False), mw))
    return photophysics.PulseSequence(tuple(out)), seq.get("tail", photophysics.DEFAULT_TAIL)


def _as_list(v):
    return list(v) if isinstance(v, list) else [v]


def parse_init(items: list[str]) -> dict:
    """``--init d_ghz=2.3`` style overrides, unit-suffixed like config keys."""
    if not items:
        return {}
    table = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--init {item!r}: expected KEY=VALUE")
        try:
            table[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"--init {item!r}: value is not a number") from None
    return parse_config({"schema_version": 1, "fit": table})["fit"]


# -- commands ---------------------------------------------------------------------

def cmd_simulate_odmr(cfg, args):
    zfs = zfs_from(cfg)
    pw = cfg["powder"]
    lw = cfg["zfs"]["linewidth"]
    try:
        freqs = powder.freq_grid(pw["freq_start"], pw["freq_stop"], pw["freq_step"])
    except ValueError as exc:
        raise ConfigError(f"powder: empty frequency grid ({exc})") from None
    fields = np.array(_as_list(pw["fields"]), dtype=float)
    odmr = powder.synth_odmr_map(zfs, fields, freqs, lw, pw["n_orient"], args.threads)
    signal = odmr.signal
    noise = pw.get("noise", 0.0)
    if noise > 0:
        rng = np.random.default_rng(args.seed)
        signal = signal + rng.normal(0.0, noise, signal.shape)
    bb = np.repeat(fields, len(freqs))
    ff = np.tile(freqs, len(fields))
    csv_text = io.write_csv(args.out / "odmr.csv", ODMR_HEADER, io.columns_to_rows(bb, ff, signal.ravel()))
    rows = []
    for b, row in zip(fields, odmr.signal):
        ext = powder.powder_extremes(zfs, b, pw["n_orient"])
        peaks = _peak_positions(freqs, row)
        rows.append({"field_t": b, "peak_freqs_hz": peaks, "pair_ranges_hz": dict(zip(("yz", "xz", "xy"), ext))})
    payload = {
        "zfs": {"d_hz": zfs.d, "e_hz": zfs.e, "linewidth_hz": lw, "amplitudes": zfs.amplitudes},
        "n_orient": pw["n_orient"], "freq_step_hz": pw["freq_step"], "n_freqs": len(freqs),
        "noise": noise, "seed": args.seed if noise > 0 else None, "spectra": rows,
    }
    plotting.odmr_plot(args.out / "odmr.svg", fields, freqs, signal)
    return payload, csv_text


def _peak_positions(freqs, row, rel=0.2):
    """Local maxima above ``rel`` of the global maximum, ascending in frequency."""
    top = np.max(np.abs(row))
    if top == 0:
        return []
    y = np.abs(row)
    k = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] >= rel * top))[0] + 1
    return [float(freqs[i]) for i in k]


def _spectra_from_csv(path) -> list[powder.SpectrumGrid]:
    table = io.read_csv(path, ODMR_HEADER)
    spectra = []
    for b in np.unique(table[:, 0]):
        sel = table[table[:, 0] == b]
        order = np.argsort(sel[:, 1], kind="stable")
        spectra.append(powder.SpectrumGrid(sel[order, 1], sel[order, 2], 0.0, float(b)))
    return spectra


def cmd_fit_zfs(cfg, args):
    spectra = _spectra_from_csv(args.data)
    fit_cfg = cfg["fit"]
    low = [s for s in spectra if s.b_mag <= fit_cfg["max_field"]]
    if not low:
        raise ConfigError(f"no spectrum at or below {fit_cfg['max_field'] * 1e3:g} mT in {args.data}")
    init = {k: fit_cfg[k] for k in ("d", "e", "linewidth", "amp_xz", "amp_yz") if k in fit_cfg}
    init.update(parse_init(args.init))
    amp_xy = cfg["zfs"].get("amp_xy", 0.0)
    res = fitting.fit_zfs(low, init or None, fit_cfg["n_orient"], amp_xy, threads=args.threads)
    if not res.converged:
        raise NumericalFailure("ZFS fit did not converge")
    p = res.params
    zfs = ZfsParams(p["d"], min(p["e"], p["d"] / 3), p["amp_xz"], p["amp_yz"], amp_xy)
    grid = powder.fibonacci_sphere(fit_cfg["n_orient"])
    sign = res.extra["sign"]
    models = [sign * powder.powder_signal(zfs, s.b_mag, s.freqs, p["linewidth"], grid, args.threads) for s in low]
    rows = []
    for s, m in zip(low, models):
        rows.extend(zip([s.b_mag] * len(s.freqs), s.freqs.tolist(), s.signal.tolist(), m.tolist()))
    csv_text = io.write_csv(args.out / "fit_zfs.csv", ["field_t", "freq_hz", "signal", "model"], rows)
    payload = {"fit": res.to_dict(), "init": {k: float(v) for k, v in sorted(init.items())}, "data": str(Path(args.data).name)}
    plotting.fit_plot(args.out / "fit_zfs.svg", low[0].freqs, [low[0].signal], models[:1],
                      [f"{low[0].b_mag * 1e3:g} mT"])
    return payload, csv_text


def cmd_rabi(cfg, args):
    zfs = zfs_from(cfg)
    rb = cfg["rabi"]
    times = np.linspace(0.0, rb["t_stop"], rb["n_times"])
    grid = powder.fibonacci_sphere(rb["n_orient"])
    b1s = sorted(_as_list(rb["b1"]))
    traces, fits = [], []
    for b1 in b1s:
        tr = powder.ensemble_rabi(zfs, rb["field"], rb["drive_freq"], b1, times, grid)
        fit = fitting.fit_damped_cosine(times, tr.signal)
        if not fit.converged:
            raise NumericalFailure(f"damped-cosine fit did not converge at b1 = {b1:g} T")
        traces.append(tr.signal)
        fits.append({"b1_t": b1, "rate_per_s": fit["rate"], "freq_hz": fit["freq"],
                     "amplitude": fit["amplitude"], "offset": fit["offset"]})
    rates = [f["rate_per_s"] for f in fits]
    rows = [(b1, t, s) for b1, tr in zip(b1s, traces) for t, s in zip(times.tolist(), tr.tolist())]
    csv_text = io.write_csv(args.out / "rabi.csv", ["b1_t", "time_s", "signal"], rows)
    payload = {"field_t": rb["field"], "drive_freq_hz": rb["drive_freq"], "n_orient": grid.count,
               "fits": fits, "damping_increases_with_b1": bool(np.all(np.diff(rates) > 0))}
    plotting.rabi_plot(args.out / "rabi.svg", times, traces, [f"{b * 1e3:g} mT" for b in b1s])
    return payload, csv_text


def cmd_coherence(cfg, args):
    co = cfg["coherence"]
    gamma = co["gamma_psd"]
    cut = {"low_cutoff": co.get("low_cutoff"), "high_cutoff": co.get("high_cutoff")}
    if "amplitude" in co:
        psd = coherence.NoisePsd(co["amplitude"], gamma, **cut)
    else:
        unit = coherence.NoisePsd(1.0, gamma, **cut)
        psd = unit.scaled(1.0 / coherence.cpmg_chi(unit, coherence.CpmgSpec(co["n_ref"], co["t2_ref"])))
    n_values = sorted(int(n) for n in _as_list(co["n_pulses"]))
    t2 = coherence.t2_scaling(psd, n_values)
    exponent, prefactor = fitting.fit_power_law(n_values, t2) if len(n_values) > 1 else (math.nan, math.nan)
    fit_t2 = prefactor * np.asarray(n_values, float) ** exponent
    clock = coherence.fit_clock_model(co["hahn_fields"], co["hahn_t2"], co["e"])
    b_axis = np.linspace(0.0, max(_as_list(co["hahn_fields"])) * 1.5 or 10e-3, 61)
    hahn_t2 = 1.0 / coherence.hahn_rate_vs_field(b_axis, clock)
    csv_text = io.write_csv(args.out / "coherence.csv", ["n_pulses", "t2_s", "t2_fit_s"],
                            io.columns_to_rows(n_values, t2, fit_t2))
    io.write_csv(args.out / "hahn.csv", ["field_t", "t2_s"], io.columns_to_rows(b_axis, hahn_t2))
    payload = {
        "gamma_psd": gamma, "psd_amplitude": psd.amplitude,
        "points": [{"n_pulses": n, "t2_s": t} for n, t in zip(n_values, t2)],
        "exponent": exponent, "prefactor_s": prefactor,
        "gamma_from_exponent": coherence.psd_exponent_from_scaling(exponent) if 0 < exponent < 1 else None,
        "clock": {"e_hz": clock.e, "baseline_rate_per_s": clock.baseline_rate, "slope_c": clock.slope_c,
                  "gamma_eff_hz_per_t": [coherence.clock_gamma_eff(abs(b), clock.e) for b in co["hahn_fields"]],
                  "t2_model_s": [1.0 / coherence.hahn_rate_vs_field(b, clock) for b in co["hahn_fields"]]},
    }
    plotting.coherence_plot(args.out / "coherence.svg", np.asarray(n_values), t2, fit_t2, b_axis, hahn_t2)
    return payload, csv_text


def cmd_t1(cfg, args):
    t1c = cfg["t1"]
    a, b = t1c["relax_a"], t1c["relax_raman"]
    temps = [float(t) for t in _as_list(t1c["temperatures"])]
    points = [{"temp_k": t, "rate_per_s": coherence.t1_rate(t, a, b), "t1_s": 1.0 / coherence.t1_rate(t, a, b)}
              for t in temps]
    payload = {"relax_a_per_k_s": a, "relax_raman_per_k7_s": b, "t1_s": points[0]["t1_s"],
               "points": points}
    if a > 0 and b > 0:
        payload["crossover_k"] = coherence.t1_crossover(a, b)
    if "measured_t1" in t1c:
        tm = t1c["measured_temperature"]
        model = 1.0 / coherence.t1_rate(tm, a, b)
        payload["measured"] = {"temp_k": tm, "t1_s": t1c["measured_t1"], "model_t1_s": model,
                               "model_over_measured": model / t1c["measured_t1"]}
    pts_t = pts_t1 = None
    if "data_temperatures" in t1c:
        pts_t = np.asarray(_as_list(t1c["data_temperatures"]))
        pts_t1 = np.asarray(_as_list(t1c.get("data_t1", [])))
        if pts_t.shape != pts_t1.shape:
            raise ConfigError("t1: data_temperatures and data_t1 differ in length")
        fit = fitting.fit_t1_temperature(pts_t, pts_t1, t1c.get("data_sigma"))
        if not fit.converged:
            raise NumericalFailure("T1 temperature fit did not converge")
        payload["fit"] = fit.to_dict()
    sweep = np.geomspace(min(temps + [5.0]), max(temps + [300.0]), 60)
    t1_sweep = 1.0 / coherence.t1_rate(sweep, a, b)
    csv_text = io.write_csv(args.out / "t1.csv", ["temp_k", "rate_per_s", "t1_s"],
                            io.columns_to_rows(sweep, 1.0 / t1_sweep, t1_sweep))
    plotting.t1_plot(args.out / "t1.svg", sweep, t1_sweep, pts_t, pts_t1)
    return payload, csv_text


def cmd_oadf(cfg, args):
    p = photophysics_from(cfg)
    seq, tail = sequence_from(cfg)
    ph = cfg["photophysics"]
    pair = ph["pair"]
    windows = seq.default_windows(tail)
    res = ph["resolution"]
    ref = photophysics.run_sequence(seq.with_mw_fraction(0.0), p, windows, res)
    fraction = max((ev.fraction for s in seq.segments for ev in s.mw), default=1.0) or 1.0
    pi = photophysics.run_sequence(seq.with_mw_fraction(fraction), p, windows, res)
    contrast = photophysics.oadf_contrast(p, pair, seq, windows, res)
    with np.errstate(invalid="ignore", divide="ignore"):
        c_t = np.where(ref.emission_rate > 0, (pi.emission_rate - ref.emission_rate)
                       / np.where(ref.emission_rate > 0, ref.emission_rate, 1.0), 0.0)
    drift = max(float(np.max(np.abs(tr.populations.sum(axis=1) - 1.0))) for tr in (ref, pi))
    if not math.isfinite(contrast):
        raise NumericalFailure("OADF contrast is not finite")
    csv_text = io.write_csv(args.out / "oadf.csv", ["time_s", "emission_ref_per_s", "emission_pi_per_s", "contrast"],
                            io.columns_to_rows(ref.times, ref.emission_rate, pi.emission_rate, c_t))
    payload = {"pair": pair, "contrast": contrast, "counts_ref": ref.total_counts, "counts_pi": pi.total_counts,
               "windows_s": windows, "sequence_duration_s": seq.duration, "population_drift": drift,
               "rates_per_s": p.rates(), "q_r": p.q_r}
    plotting.oadf_plot(args.out / "oadf.svg", ref.times, ref.emission_rate, pi.emission_rate, c_t)
    return payload, csv_text


def _budget(se: dict, prefix: str = "") -> sensing.SensorBudget | None:
    need = ("contrast", "photons_per_shot", "t_init", "t_read", "t_evolve")
    keys = [prefix + k for k in need]
    present = [k in se for k in keys]
    if not any(present):
        return None
    if not all(present):
        missing = [k for k, ok in zip(keys, present) if not ok]
        raise ConfigError(f"sensing: incomplete budget, missing {', '.join(missing)}")
    molecules = se["amount"] * 6.02214076e23 if "amount" in se else se["molecules"]
    return sensing.SensorBudget(se[keys[0]], se[keys[1]], se[keys[2]], se[keys[3]], se[keys[4]],
                                molecules, se["overhead"], se.get(prefix + "t2"))


def cmd_sense(cfg, args):
    se = cfg["sensing"]
    zfs = zfs_from(cfg)
    dc_budget = _budget(se)
    ac_budget = _budget(se, "ac_")
    if dc_budget is None and ac_budget is None:
        raise ConfigError("sensing: no DC or AC budget given")
    payload = {}
    if dc_budget is not None:
        if "bias_field" not in se:
            raise ConfigError("sensing: DC budget needs bias_field")
        lw = se.get("linewidth", cfg["zfs"]["linewidth"])
        grid = powder.fibonacci_sphere(se["n_orient"])
        scheme = sensing.design_two_point(zfs, lw, se["bias_field"], grid, se["delta"])
        dc = sensing.dc_sensitivity(dc_budget, scheme)
        model = sensing.powder_model(zfs, lw, grid)
        probes = np.array([scheme.f_low, scheme.f_high])
        height = np.max(np.abs(model(se["bias_field"], powder.freq_grid(scheme.f_low, scheme.f_high, lw / 20))))
        offsets = np.linspace(-0.5e-3, 0.5e-3, 41)
        diff = np.array([np.diff(model(se["bias_field"] + d, probes))[0] for d in offsets]) / height
        diff = dc_budget.contrast * (diff - diff[len(diff) // 2])
        csv_text = io.write_csv(args.out / "sense.csv", ["delta_b_t", "signal_difference"],
                                io.columns_to_rows(offsets, diff))
        plotting.sense_plot(args.out / "sense.svg", offsets, diff)
        payload["dc"] = {"eta_t_per_rthz": dc["eta"], "eta_molar": dc["eta_molar"],
                         "sigma_b_per_shot_t": dc["sigma_b_per_shot"], "f_low_hz": scheme.f_low,
                         "f_high_hz": scheme.f_high, "slope_per_t": scheme.slope,
                         "bias_field_t": scheme.bias_field, "t_shot_s": dc_budget.t_shot,
                         "photons_per_shot": dc_budget.photons_per_shot, "contrast": dc_budget.contrast}
    else:
        csv_text = io.write_csv(args.out / "sense.csv", ["delta_b_t", "signal_difference"], [])
        plotting.sense_plot(args.out / "sense.svg", np.zeros(1), np.zeros(1))
    b_p = sensing.dipole_field(se["proton_distance"])
    payload["dipole"] = {"distance_m": se["proton_distance"], "axial_field_t": b_p,
                         "perpendicular_field_t": sensing.dipole_field(se["proton_distance"], axial=False)}
    if ac_budget is not None:
        ac = sensing.ac_sensitivity(ac_budget)
        payload["ac"] = {"eta_t_per_rthz": ac["eta"], "eta_molar": ac["eta_molar"], "t_shot_s": ac_budget.t_shot,
                         "photons_per_shot": ac_budget.photons_per_shot, "contrast": ac_budget.contrast}
        payload["proton_number_mol_per_hz"] = sensing.proton_number_sensitivity(
            ac["eta_molar"], se["polarization"], b_p)
    payload["molecules"] = (dc_budget or ac_budget).molecules
    return payload, csv_text


COMMANDS = {
    "simulate-odmr": (cmd_simulate_odmr, "powder ODMR spectra versus field"),
    "fit-zfs": (cmd_fit_zfs, "fit D, E, linewidth and amplitudes to low-field ODMR data"),
    "rabi": (cmd_rabi, "powder-averaged Rabi oscillations and damping rates"),
    "coherence": (cmd_coherence, "CPMG T2 scaling and clock-transition Hahn-echo model"),
    "t1": (cmd_t1, "direct + Raman spin-lattice relaxation"),
    "oadf": (cmd_oadf, "OADF readout contrast from the rate model"),
    "sense": (cmd_sense, "DC and AC shot-noise sensitivity estimates"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tripletspin", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        if name == "fit-zfs":
            sp.add_argument("data", help="CSV with columns field_t,freq_hz,signal")
            sp.add_argument("--init", action="append", metavar="KEY=VALUE",
                            help="initial value override, unit-suffixed (e.g. d_ghz=2.3)")
        sp.add_argument("--config", type=Path, help="TOML run configuration")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker cap (results do not depend on it)")
        sp.add_argument("--seed", type=int, default=0, help="seed for injected noise")
        sp.add_argument("--format", choices=("csv", "json"), default="json", help="what to echo on stdout")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        raw = load_config(args.config)
        cfg, notes = resolve(raw, args.command)
        args.out.mkdir(parents=True, exist_ok=True)
        payload, csv_text = func(cfg, args)
        if args.command == "fit-zfs":
            notes.append(f"data {Path(args.data).name}")
        env = io.ResultEnvelope(args.command, config_hash(cfg), payload, notes)
        stem = args.command.replace("-", "_")
        json_text = env.write(args.out / f"{stem}.json")
    except (ConfigError, io.DataFormatError, fitting.FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalFailure, RuntimeError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    sys.stdout.write(csv_text if args.format == "csv" else json_text)
    return EXIT_OK


def main():
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
