"""Experiment configuration: INI schema, validation, presets and model construction.

Schema (all numbers decimal; key suffixes name the unit or kind)::

    [model]
    kind = synthetic | ingest
    path = model.txt                  ; ingest only
    n_levels = 800                    ; synthetic only
    delta_energy = 1.0
    hbar_action = 1.0
    k_wavenumber = 50
    g_exponent = 1
    gamma_cl_rate = 50
    c_norm = 7.5e-4                   ; synthetic only
    omega_min_energy = 1.0            ; optional, default delta_energy
    cutoff_bandwidth_levels = 10      ; optional Gaussian cutoff
    sign_randomize = false
    diag_policy = gaussian | zeros
    wall = soft | hard
    seed = 7                          ; optional, generated and recorded if absent

    [run]
    dx_values = 0.01, 0.02            ; or dx_start / dx_step / dx_count
    preparation = eigenstate | wavepacket
    references_count = 20
    packets_count = 1
    sigma_e_energy = 10
    phase_mode = random_phase | random_sign | real_positive
    average = probability | amplitude
    curve_kind = fidelity | survival
    ldos_mode = averaged | eigenstate | wavepacket
    time_points = 512
    time_factor = 8
    time_max_time = 5.0               ; optional fixed horizon
    realizations_count = 50
    bin_width_energy = 1.0            ; optional, default delta_energy
    workers = 1
    seed = 11                         ; optional

    [output]
    directory = runs/fig1
    formats = csv
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .model import _resolve_seed, ingest_model, synthetic_model, with_meta


class ConfigError(InvalidArgumentError):
    """Schema violation, reported as ``[section] key: problem``."""

    def __init__(self, section, key, problem):
        self.section, self.key = section, key
        super().__init__(f"[{section}] {key}: {problem}")


def _float(v):
    return float(v)


def _int(v):
    x = float(v)
    if x != int(x):
        raise ValueError("not an integer")
    return int(x)


def _bool(v):
    t = v.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _choice(*options):
    def parse(v):
        v = v.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


def _float_list(v):
    vals = [float(x) for x in v.replace(";", ",").split(",") if x.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _text(v):
    return v.strip()


# key -> (parser, default); default REQUIRED means the key must be present
REQUIRED = object()
SYNTHETIC_ONLY = ("n_levels", "c_norm")

MODEL_KEYS = {
    "kind": (_choice("synthetic", "ingest"), "synthetic"),
    "path": (_text, None),
    "n_levels": (_int, REQUIRED),
    "delta_energy": (_float, REQUIRED),
    "hbar_action": (_float, REQUIRED),
    "k_wavenumber": (_float, REQUIRED),
    "g_exponent": (_float, REQUIRED),
    "gamma_cl_rate": (_float, REQUIRED),
    "c_norm": (_float, REQUIRED),
    "omega_min_energy": (_float, None),
    "cutoff_bandwidth_levels": (_float, None),
    "sign_randomize": (_bool, False),
    "diag_policy": (_choice("gaussian", "zeros"), "gaussian"),
    "wall": (_choice("soft", "hard"), "soft"),
    "seed": (_int, None),
}

RUN_KEYS = {
    "dx_values": (_float_list, None),
    "dx_start": (_float, None),
    "dx_step": (_float, None),
    "dx_count": (_int, None),
    "preparation": (_choice("eigenstate", "wavepacket"), "eigenstate"),
    "references_count": (_int, 20),
    "packets_count": (_int, 1),
    "sigma_e_energy": (_float, None),
    "phase_mode": (_choice("random_phase", "random_sign", "real_positive"), "random_phase"),
    "average": (_choice("probability", "amplitude"), "probability"),
    "curve_kind": (_choice("fidelity", "survival"), "fidelity"),
    "ldos_mode": (_choice("averaged", "eigenstate", "wavepacket"), "averaged"),
    "time_points": (_int, 512),
    "time_factor": (_float, 8.0),
    "time_max_time": (_float, None),
    "realizations_count": (_int, 50),
    "bin_width_energy": (_float, None),
    "workers": (_int, 1),
    "seed": (_int, None),
}

OUTPUT_KEYS = {
    "directory": (_text, "runs/default"),
    "formats": (_choice("csv"), "csv"),
}

SCHEMA = {"model": MODEL_KEYS, "run": RUN_KEYS, "output": OUTPUT_KEYS}


@dataclass(frozen=True)
class ExperimentConfig:
    model: dict
    run: dict
    output: dict
    base_dir: str = "."

    def as_dict(self):
        return {"model": dict(self.model), "run": dict(self.run), "output": dict(self.output)}

    def digest(self):
        text = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def dx_grid(self):
        r = self.run
        if r["dx_values"] is not None:
            return np.array(r["dx_values"], dtype=float)
        return r["dx_start"] + r["dx_step"] * np.arange(r["dx_count"])

    def model_path(self):
        p = Path(self.model["path"])
        return p if p.is_absolute() else Path(self.base_dir) / p


def _parse_section(name, raw):
    keys = SCHEMA[name]
    out = {}
    for key in raw:
        if key not in keys:
            raise ConfigError(name, key, "unknown key")
    for key, (parse, default) in keys.items():
        if key in raw and raw[key] is not None:
            value = raw[key]
            if isinstance(value, str):
                try:
                    value = parse(value)
                except ValueError as exc:
                    raise ConfigError(name, key, f"cannot parse {raw[key]!r}: {exc}") from None
            out[key] = value
        else:
            out[key] = default
    return out


def validate(sections, base_dir="."):
    """Check every key against the schema; return an :class:`ExperimentConfig`."""
    for name in sections:
        if name not in SCHEMA:
            raise ConfigError(name, "*", "unknown section")
    m = _parse_section("model", sections.get("model", {}))
    r = _parse_section("run", sections.get("run", {}))
    o = _parse_section("output", sections.get("output", {}))

    for key, (_, default) in MODEL_KEYS.items():
        if default is REQUIRED and m[key] is REQUIRED:
            if m["kind"] == "ingest" and key in SYNTHETIC_ONLY:
                m[key] = None
                continue
            raise ConfigError("model", key, "missing (physics values have no defaults)")
    for key in ("delta_energy", "hbar_action", "k_wavenumber", "gamma_cl_rate"):
        if not m[key] > 0:
            raise ConfigError("model", key, "must be positive")
    if not 0.0 <= m["g_exponent"] <= 1.0:
        raise ConfigError("model", "g_exponent", "must lie in [0, 1]")
    if m["kind"] == "synthetic":
        if m["n_levels"] < 2:
            raise ConfigError("model", "n_levels", "must be at least 2")
        if not m["c_norm"] > 0:
            raise ConfigError("model", "c_norm", "must be positive")
    else:
        if not m["path"]:
            raise ConfigError("model", "path", "required for kind = ingest")
        p = Path(m["path"])
        if not (p if p.is_absolute() else Path(base_dir) / p).is_file():
            raise ConfigError("model", "path", f"file {m['path']!r} does not exist")
    if m["omega_min_energy"] is not None and not m["omega_min_energy"] > 0:
        raise ConfigError("model", "omega_min_energy", "must be positive")
    if m["cutoff_bandwidth_levels"] is not None and not m["cutoff_bandwidth_levels"] > 0:
        raise ConfigError("model", "cutoff_bandwidth_levels", "must be positive")

    if r["dx_values"] is None:
        missing = [k for k in ("dx_start", "dx_step", "dx_count") if r[k] is None]
        if missing:
            raise ConfigError("run", "dx_values", "give a list or dx_start/dx_step/dx_count")
        if r["dx_count"] < 1 or not r["dx_step"] > 0:
            raise ConfigError("run", "dx_step", "need dx_count >= 1 and dx_step > 0")
    dx = (np.array(r["dx_values"]) if r["dx_values"] is not None
          else r["dx_start"] + r["dx_step"] * np.arange(r["dx_count"]))
    if np.any(dx < 0) or np.any(np.diff(dx) <= 0):
        raise ConfigError("run", "dx_values", "must be nonnegative and strictly ascending")
    if r["preparation"] == "wavepacket" or r["ldos_mode"] == "wavepacket":
        if r["sigma_e_energy"] is None or not r["sigma_e_energy"] > 0:
            raise ConfigError("run", "sigma_e_energy", "positive value required for wavepackets")
    for key in ("references_count", "packets_count", "realizations_count", "workers"):
        if r[key] < 1:
            raise ConfigError("run", key, "must be at least 1")
    if r["references_count"] < 10:
        raise ConfigError("run", "references_count", "averaging needs at least 10 references")
    if r["time_points"] < 16:
        raise ConfigError("run", "time_points", "must be at least 16")
    for key in ("time_factor", "time_max_time", "bin_width_energy"):
        if r[key] is not None and not r[key] > 0:
            raise ConfigError("run", key, "must be positive")
    return ExperimentConfig(m, r, o, str(base_dir))


def read_config(path):
    """Parse an INI file into a validated :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError("*", "*", f"malformed file: {exc}") from None
    sections = {s: dict(parser[s]) for s in parser.sections()}
    return validate(sections, base_dir=path.parent)


def resolve_seeds(config):
    """Copy of ``config`` with every absent seed replaced by a generated one."""
    m, r = dict(config.model), dict(config.run)
    m["seed"] = _resolve_seed(m["seed"])
    r["seed"] = _resolve_seed(r["seed"])
    return ExperimentConfig(m, r, dict(config.output), config.base_dir)


def build_model(config):
    """Model described by the ``[model]`` section (seeds must already be resolved)."""
    m = config.model
    if m["kind"] == "ingest":
        model = ingest_model(config.model_path())
        return with_meta(model, hbar=m["hbar_action"], k=m["k_wavenumber"], g=m["g_exponent"],
                         delta=m["delta_energy"], gamma_cl=m["gamma_cl_rate"])
    k, g = m["k_wavenumber"], m["g_exponent"]
    return synthetic_model(
        m["n_levels"], g, delta=m["delta_energy"], hbar=m["hbar_action"], k=k,
        strength=m["c_norm"] * k ** (3.0 + g), gamma_cl=m["gamma_cl_rate"],
        omega_min=m["omega_min_energy"], bandwidth=m["cutoff_bandwidth_levels"],
        randomize=m["sign_randomize"], diag_policy=m["diag_policy"], seed=m["seed"])


def physics_echo(config, model):
    """Every physics value actually used, including resolved defaults."""
    m = config.model
    omega_min = m["omega_min_energy"]
    if omega_min is None:
        omega_min = m["delta_energy"]
    return {
        "n_levels": model.n,
        "delta_energy": model.meta.delta,
        "hbar_action": model.meta.hbar,
        "k_wavenumber": model.meta.k,
        "g_exponent": model.meta.g,
        "gamma_cl_rate": model.meta.gamma_cl,
        "c_norm": m["c_norm"],
        "omega_min_energy": omega_min,
        "cutoff_bandwidth_levels": m["cutoff_bandwidth_levels"],
        "sign_randomize": m["sign_randomize"],
        "diag_policy": m["diag_policy"],
        "wall": m["wall"],
        "mean_spacing_measured": model.levels.mean_spacing,
        "provenance": model.b.provenance,
    }


PRESETS = {
    # time-domain decay curves on the grid dx = 0.0125 * i, i = 1..11
    "fig1": {
        "model": {"kind": "synthetic", "n_levels": "800", "delta_energy": "1.0",
                  "hbar_action": "1.0", "k_wavenumber": "50", "g_exponent": "1",
                  "gamma_cl_rate": "50", "c_norm": "7.5e-4", "wall": "hard", "seed": "20031"},
        "run": {"dx_start": "0.0125", "dx_step": "0.0125", "dx_count": "11",
                "preparation": "wavepacket", "packets_count": "4", "sigma_e_energy": "10",
                "phase_mode": "random_phase", "references_count": "20", "time_points": "512",
                "time_max_time": "2.0", "seed": "424242"},
        "output": {"directory": "runs/fig1"},
    },
    # flat bandprofile with a wide soft wall
    "wigner_g0": {
        "model": {"kind": "synthetic", "n_levels": "1000", "delta_energy": "1.0",
                  "hbar_action": "1.0", "k_wavenumber": "50", "g_exponent": "0",
                  "gamma_cl_rate": "40", "c_norm": "8e-6", "cutoff_bandwidth_levels": "200",
                  "seed": "1001"},
        "run": {"dx_values": "0.7, 0.832, 0.99, 1.18, 1.4, 1.66, 1.98, 2.35, 2.8, 3.33, 3.96, 4.71, 5.6",
                "references_count": "20", "seed": "1002"},
        "output": {"directory": "runs/wigner_g0"},
    },
    # 1/omega bandprofile without a cutoff
    "wigner_g1": {
        "model": {"kind": "synthetic", "n_levels": "1000", "delta_energy": "1.0",
                  "hbar_action": "1.0", "k_wavenumber": "50", "g_exponent": "1",
                  "gamma_cl_rate": "40", "c_norm": "1.6e-6", "seed": "1101"},
        "run": {"dx_values": "0.2, 0.257, 0.33, 0.423, 0.543, 0.697, 0.894, 1.15, 1.47, 1.89, 2.43, 3.12, 4",
                "references_count": "20", "seed": "1102"},
        "output": {"directory": "runs/wigner_g1"},
    },
    # narrow soft-wall model for the factorization diagnostic
    "mbh": {
        "model": {"kind": "synthetic", "n_levels": "400", "delta_energy": "1.0",
                  "hbar_action": "1.0", "k_wavenumber": "50", "g_exponent": "1",
                  "gamma_cl_rate": "40", "c_norm": "1.6e-6", "cutoff_bandwidth_levels": "10",
                  "seed": "2001"},
        "run": {"dx_values": "1.0", "preparation": "wavepacket", "sigma_e_energy": "20",
                "realizations_count": "50", "bin_width_energy": "1.0", "seed": "2002"},
        "output": {"directory": "runs/mbh"},
    },
    "small": {
        "model": {"kind": "synthetic", "n_levels": "60", "delta_energy": "1.0",
                  "hbar_action": "1.0", "k_wavenumber": "50", "g_exponent": "0",
                  "gamma_cl_rate": "10", "c_norm": "8e-6", "seed": "5"},
        "run": {"dx_values": "0.0, 0.2, 0.5, 1.0", "references_count": "10",
                "time_points": "128", "realizations_count": "10", "sigma_e_energy": "4",
                "seed": "6"},
        "output": {"directory": "runs/small"},
    },
}


def preset(name):
    """Validated configuration of a named preset."""
    if name not in PRESETS:
        raise InvalidArgumentError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return validate(PRESETS[name])


def preset_ini(name):
    """INI text of a preset, the same layout :func:`read_config` accepts."""
    parser = configparser.ConfigParser()
    for section, values in PRESETS[name].items():
        parser[section] = values
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
