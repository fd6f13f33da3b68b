"""TOML run configuration with mandatory unit suffixes.

Every dimensioned key carries its unit in the name (``d_ghz``, ``field_mt``,
``duration_us``, ``k_fl_per_s``) and is converted to SI on load. Bare
dimensioned keys and unknown keys are schema errors.
"""

from __future__ import annotations

import hashlib
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
FIELD = {"t": 1.0, "mt": 1e-3, "ut": 1e-6, "nt": 1e-9}
TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
TEMP = {"k": 1.0}
RATE = {"per_s": 1.0, "per_ms": 1e3, "per_us": 1e6}
LENGTH = {"m": 1.0, "nm": 1e-9}
ANGULAR = {"rad_s": 1.0}
AMOUNT = {"mol": 1.0}
MOMENT = {"j_t": 1.0}
DIRECT = {"per_k_s": 1.0}
RAMAN = {"per_k7_s": 1.0}
PSD_AMP = {"si": 1.0}  # (rad/s)^(1 + gamma)

NUM, INT, BOOL, STR = "number", "integer", "boolean", "string"

_RATES = ("k_exc", "k_fl", "k_isc_x", "k_isc_y", "k_isc_z", "k_pump912", "k_risc_x", "k_risc_y",
          "k_risc_z", "k_t2_relax", "k_trip_decay", "k_spin_relax", "k_trip_decay_x",
          "k_trip_decay_y", "k_trip_decay_z")

SCHEMA: dict[str, dict[str, Any]] = {
    "run": {"title": STR, "notes": STR, "preset": STR},
    "zfs": {"d": FREQ, "e": FREQ, "linewidth": FREQ, "amp_xz": NUM, "amp_yz": NUM, "amp_xy": NUM},
    "powder": {"n_orient": INT, "fields": FIELD, "freq_start": FREQ, "freq_stop": FREQ,
               "freq_step": FREQ, "noise": NUM},
    "fit": {"n_orient": INT, "max_field": FIELD, "d": FREQ, "e": FREQ, "linewidth": FREQ,
            "amp_xz": NUM, "amp_yz": NUM},
    "rabi": {"field": FIELD, "drive_freq": FREQ, "b1": FIELD, "t_stop": TIME, "n_times": INT,
             "n_orient": INT},
    "coherence": {"gamma_psd": NUM, "amplitude": PSD_AMP, "t2_ref": TIME, "n_ref": INT,
                  "n_pulses": INT, "low_cutoff": ANGULAR, "high_cutoff": ANGULAR,
                  "hahn_fields": FIELD, "hahn_t2": TIME, "e": FREQ, "curve_points": INT},
    "t1": {"relax_a": DIRECT, "relax_raman": RAMAN, "temperatures": TEMP,
           "data_temperatures": TEMP, "data_t1": TIME, "data_sigma": TIME,
           "measured_temperature": TEMP, "measured_t1": TIME},
    "photophysics": {"q_r": NUM, "pair": STR, "resolution": INT,
                     **{k: RATE for k in _RATES}},
    "sequence": {"segment": "segments", "tail": TIME},
    "sensing": {"contrast": NUM, "photons_per_shot": NUM, "t_init": TIME, "t_read": TIME,
                "t_evolve": TIME, "molecules": NUM, "amount": AMOUNT, "overhead": NUM, "t2": TIME,
                "bias_field": FIELD, "delta": FIELD, "n_orient": INT, "linewidth": FREQ,
                "polarization": NUM, "proton_distance": LENGTH, "moment": MOMENT,
                "ac_contrast": NUM, "ac_photons_per_shot": NUM, "ac_t_init": TIME,
                "ac_t_read": TIME, "ac_t_evolve": TIME, "ac_t2": TIME},
}

SEGMENT_SCHEMA = {"duration": TIME, "laser488": BOOL, "laser912": BOOL, "mw_pair": STR,
                  "mw_fraction": NUM, "mw_at": TIME}


def _check_scalar(kind, val, where):
    if kind == BOOL:
        if not isinstance(val, bool):
            raise ConfigError(f"{where}: expected true/false")
        return val
    if kind == STR:
        if not isinstance(val, str):
            raise ConfigError(f"{where}: expected a string")
        return val
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}: expected a number")
    if kind == INT:
        if int(val) != val:
            raise ConfigError(f"{where}: expected an integer")
        return int(val)
    return float(val)


def _convert(kind, val, where):
    if isinstance(val, list):
        if not val:
            raise ConfigError(f"{where}: empty list")
        return [_convert(kind, v, f"{where}[{i}]") for i, v in enumerate(val)]
    if isinstance(kind, dict):
        raise AssertionError  # handled by caller
    return _check_scalar(kind, val, where)


def _parse_table(table: dict, schema: dict, where: str) -> dict:
    out = {}
    for key, val in table.items():
        loc = f"{where}.{key}"
        if key in schema and not isinstance(schema[key], dict):
            kind = schema[key]
            if kind == "segments":
                out[key] = _parse_segments(val, loc)
            else:
                out[key] = _convert(kind, val, loc)
            continue
        if key in schema:
            raise ConfigError(f"{loc}: missing unit suffix (e.g. {key}_{next(iter(schema[key]))})")
        for base, kind in schema.items():
            if isinstance(kind, dict) and key.startswith(base + "_") and key[len(base) + 1:] in kind:
                factor = kind[key[len(base) + 1:]]
                if base in out:
                    raise ConfigError(f"{loc}: {base} given twice")
                conv = _convert(NUM, val, loc)
                out[base] = [v * factor for v in conv] if isinstance(conv, list) else conv * factor
                break
        else:
            raise ConfigError(f"{loc}: unknown key")
    return out


def _parse_segments(val, where):
    if not isinstance(val, list) or not val:
        raise ConfigError(f"{where}: expected a non-empty array of tables")
    segs = []
    for i, seg in enumerate(val):
        if not isinstance(seg, dict):
            raise ConfigError(f"{where}[{i}]: expected a table")
        parsed = _parse_table(seg, SEGMENT_SCHEMA, f"{where}[{i}]")
        if "duration" not in parsed:
            raise ConfigError(f"{where}[{i}]: duration is required")
        segs.append(parsed)
    return segs


def parse_config(raw: dict) -> dict:
    """Validate a raw TOML mapping and return {section: {base_key: SI value}}."""
    raw = dict(raw)
    version = raw.pop("schema_version", None)
    if version is None:
        raise ConfigError("schema_version is required")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    out: dict[str, dict] = {}
    for section, table in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        out[section] = _parse_table(table, SCHEMA[section], section)
    return out


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw)


def load_preset(name: str) -> dict:
    """Packaged preset (photophysics rates, readout sequence, sensing budget)."""
    fname = f"{name}.toml"
    ref = resources.files("tripletspin.presets") / fname
    if not ref.is_file():
        avail = sorted(p.name[:-5] for p in resources.files("tripletspin.presets").iterdir()
                       if p.name.endswith(".toml"))
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(avail)}")
    return parse_config(tomllib.loads(ref.read_text()))


def merge(base: dict, override: dict) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for section, table in override.items():
        out.setdefault(section, {}).update(table)
    return out


def config_hash(cfg: dict) -> str:
    """sha256 over canonical JSON (sorted keys, floats in shortest repr)."""
    blob = json.dumps(_canonical(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, float)):
        f = float(obj)
        return int(f) if f.is_integer() and abs(f) < 2 ** 53 else repr(f)
    raise TypeError(f"cannot canonicalise {type(obj).__name__}")
