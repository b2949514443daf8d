"""Command-line front end.

    loschmidt decay --preset fig1 --output runs/fig1
    loschmidt sweep --config configs/wigner_g0.ini
    loschmidt decay --manifest runs/fig1/manifest.json --output runs/fig1-again

Exit codes: 0 success, 2 validation, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, _io
from .analysis import (PreparationSpec, estimate_borders, factorization_diagnostic,
                       preparations, shell_references, sweep)
from .config import (ConfigError, build_model, physics_echo, preset, read_config,
                     resolve_seeds, validate)
from .dynamics import (default_time_grid, effective_ldos, ensemble_evolve, make_wavepacket,
                       write_decay_csv)
from .errors import IngestError, InvalidArgumentError, LoschmidtError, NumericFailure
from .model import export_model, randomized_partner
from .spectral import (LdosDistribution, averaged_ldos, core_width, diagonalize, eigenstate_ldos,
                       reference_indices, wavepacket_ldos, write_ldos_csv)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
OUTPUT_ENV = "LOSCHMIDT_OUTPUT_DIR"
COMMANDS = ("build", "ldos", "decay", "sweep", "borders", "diagnostic")


def derived_seed(seed, tag):
    """Deterministic child seed for a named purpose."""
    return int(np.random.SeedSequence([seed, tag]).generate_state(1)[0])


def prep_spec(config):
    r = config.run
    return PreparationSpec(kind=r["preparation"], references=r["references_count"],
                           packets=r["packets_count"], sigma_e=r["sigma_e_energy"] or 10.0,
                           phase_mode=r["phase_mode"], average=r["average"],
                           time_points=r["time_points"], time_factor=r["time_factor"],
                           time_max=r["time_max_time"])


def time_grid(config, model, dx, dec):
    r = config.run
    if r["time_max_time"] is not None:
        return np.linspace(0.0, r["time_max_time"], r["time_points"])
    refs = reference_indices(model.n, r["references_count"])
    width = core_width(averaged_ldos(model, dx, refs, decomposition=dec))
    return default_time_grid(width, model.meta.hbar, model.levels.mean_spacing,
                             r["time_points"], r["time_factor"])


# --------------------------------------------------------------------------
# commands; each returns (written paths, extra manifest entries)

def cmd_build(config, model, outdir):
    path = outdir / "model.txt"
    export_model(model, path)
    return [path, Path(str(path) + ".json")], {}


def cmd_ldos(config, model, outdir):
    r = config.run
    refs = reference_indices(model.n, r["references_count"])
    written = []
    for i, dx in enumerate(config.dx_grid(), start=1):
        dec = diagonalize(model, dx)
        if r["ldos_mode"] == "averaged":
            dist = averaged_ldos(model, dx, refs, r["bin_width_energy"], decomposition=dec)
        elif r["ldos_mode"] == "eigenstate":
            dist = eigenstate_ldos(model, dx, refs[len(refs) // 2], dec)
        else:
            e = model.levels.energies
            wp = make_wavepacket(model.levels, float(e[model.n // 2]), r["sigma_e_energy"],
                                 r["phase_mode"], r["seed"])
            dist = wavepacket_ldos(model, wp, dx, dec)
        written.append(write_ldos_csv(dist, outdir / f"ldos_{i:02d}.csv"))
    return written, {}


def cmd_decay(config, model, outdir):
    r = config.run
    spec = prep_spec(config)
    preps = preparations(model, spec, r["seed"])
    written = []
    for i, dx in enumerate(config.dx_grid(), start=1):
        dec = diagonalize(model, dx)
        t = time_grid(config, model, dx, dec)
        curve = ensemble_evolve(model, dx, preps, t, average=r["average"],
                                kind=r["curve_kind"], decomposition=dec)
        written.append(write_decay_csv(curve, outdir / f"decay_{i:02d}.csv",
                                       [f"seed={r['seed']}"]))
    return written, {}


def _sweeps(config, model, with_partner):
    r = config.run
    models = {"correlated": model}
    extra = {}
    if with_partner:
        pseed = derived_seed(config.model["seed"], 1)
        models["randomized"] = randomized_partner(model, pseed)
        extra["partner_seed"] = pseed
    res = sweep(models, config.dx_grid(), prep_spec(config), seed=r["seed"],
                workers=r["workers"])
    return res, extra


def _borders_json(res, config, outdir):
    borders = estimate_borders(res, wall=config.model["wall"])
    path = _io.atomic_write_json(outdir / "borders.json", borders.as_dict())
    return path


def cmd_sweep(config, model, outdir):
    res, extra = _sweeps(config, model, with_partner=True)
    written = [res[label].write_csv(outdir / f"sweep_{label}.csv") for label in res]
    written.append(_borders_json(res["correlated"], config, outdir))
    extra["sweeps"] = {label: res[label].manifest() for label in res}
    return written, extra


def cmd_borders(config, model, outdir):
    res, extra = _sweeps(config, model, with_partner=False)
    written = [res["correlated"].write_csv(outdir / "sweep_correlated.csv")]
    written.append(_borders_json(res["correlated"], config, outdir))
    return written, extra


def cmd_diagnostic(config, model, outdir):
    r = config.run
    h = r["bin_width_energy"] or model.levels.mean_spacing
    e = model.levels.energies
    wp = make_wavepacket(model.levels, float(e[model.n // 2]), r["sigma_e_energy"],
                         r["phase_mode"], r["seed"])
    ldos_wpk = wavepacket_ldos(model, wp)
    seeds = [derived_seed(config.model["seed"], 100 + j) for j in range(r["realizations_count"])]
    partners = [randomized_partner(model, s) for s in seeds]
    refs = shell_references(model, wp)
    written = []
    for i, dx in enumerate(config.dx_grid(), start=1):
        sets, offsets, weights = [], [], []
        for p in partners:
            dec = diagonalize(p, dx)
            sets.append(effective_ldos(p, dx, wp, dec))
            d = averaged_ldos(p, dx, refs, h, decomposition=dec)
            offsets.append(d.offsets)
            weights.append(d.weights / len(partners))
        pooled = LdosDistribution(np.concatenate(offsets), np.concatenate(weights),
                                  d.center, "averaged", float(dx))
        fd = factorization_diagnostic(sets, ldos_wpk, pooled, h, model.levels.mean_spacing)
        rows = zip(fd.centers, fd.mean_f.real, fd.mean_f.imag, fd.stderr_re, fd.stderr_im,
                   fd.mean_abs2, fd.predicted, fd.ratio)
        text = _io.csv_text(
            [f"dx={_io.fmt(dx)}", f"realizations={fd.realizations}",
             f"degenerate={fd.degenerate}"],
            ["omega", "mean_re", "mean_im", "stderr_re", "stderr_im", "mean_abs2", "predicted",
             "ratio"], rows)
        written.append(_io.atomic_write_text(outdir / f"diagnostic_{i:02d}.csv", text))
    return written, {"realization_seeds": seeds}


HANDLERS = {"build": cmd_build, "ldos": cmd_ldos, "decay": cmd_decay, "sweep": cmd_sweep,
            "borders": cmd_borders, "diagnostic": cmd_diagnostic}


# --------------------------------------------------------------------------

def load_config(args):
    sources = [x for x in (args.config, args.preset, args.manifest) if x]
    if len(sources) != 1:
        raise ConfigError("*", "*", "give exactly one of --config, --preset, --manifest")
    if args.config:
        if not Path(args.config).is_file():
            raise ConfigError("*", "*", f"config file {args.config!r} does not exist")
        return read_config(args.config)
    if args.preset:
        return preset(args.preset)
    try:
        with open(args.manifest, encoding="utf-8") as fh:
            man = json.load(fh)
    except OSError as exc:
        raise ConfigError("*", "*", f"cannot read manifest: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("*", "*", f"manifest is not valid JSON: {exc}") from None
    if man.get("command") not in (None, args.command):
        print(f"note: manifest was written by {man['command']!r}", file=sys.stderr)
    return validate(man["config"], base_dir=man.get("base_dir", "."))


def output_dir(args, config):
    if args.output:
        return Path(args.output)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    return Path(config.output["directory"])


def manifest(command, config, model, artifacts, extra):
    return {
        "command": command,
        "config": config.as_dict(),
        "config_hash": config.digest(),
        "base_dir": str(Path(config.base_dir).resolve()) if config.model["kind"] == "ingest"
        else ".",
        "seeds": {"model": config.model["seed"], "run": config.run["seed"]},
        "versions": {"loschmidt": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "physics": physics_echo(config, model),
        "model_digest": model.digest(),
        "artifacts": {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
                      for p in sorted(artifacts)},
        **extra,
    }


def run(command, config, outdir):
    """Execute ``command`` and write its artifacts plus ``manifest.json`` into ``outdir``."""
    config = resolve_seeds(config)
    model = build_model(config)
    artifacts, extra = HANDLERS[command](config, model, outdir)
    _io.atomic_write_json(outdir / "manifest.json",
                          manifest(command, config, model, [Path(a) for a in artifacts], extra))
    return artifacts


def build_parser():
    p = argparse.ArgumentParser(prog="loschmidt", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"build": "build a model and export it", "ldos": "LDOS tables per dx",
             "decay": "fidelity or survival curves per dx",
             "sweep": "Gamma/gamma sweep of a model and its sign-randomized partner",
             "borders": "regime borders from a sweep",
             "diagnostic": "factorization statistics over sign-randomized realizations"}
    for name in COMMANDS:
        s = sub.add_parser(name, help=helps[name])
        src = s.add_mutually_exclusive_group()
        src.add_argument("--config", help="INI experiment configuration")
        src.add_argument("--preset", help="built-in configuration (fig1, wigner_g0, ...)")
        src.add_argument("--manifest", help="rerun from a manifest.json")
        s.add_argument("--output", help=f"output directory (overrides ${OUTPUT_ENV})")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        outdir = output_dir(args, config)
        run(args.command, config, outdir)
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IngestError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvalidArgumentError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except LoschmidtError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {outdir}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
