"""
Parametric Hamiltonians ``H(dx) = E + dx * B``.

``E`` is an ordered diagonal matrix of unperturbed levels and ``B`` a real
symmetric perturbation matrix.  Synthetic ``B`` matrices are drawn from the
semiclassical bandprofile

    <|B_nm|^2> = (delta / 2 pi hbar) * C(|E_n - E_m| / hbar),
    C(w) = c_norm * k**(3 + g) / w**g,

and can be modified by a Gaussian cutoff in the level index (soft-wall
models) or by sign randomization of the off-diagonal elements.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import _io
from .errors import IngestError, InvalidArgumentError, ResourceLimitError

MAX_DIMENSION = 4096

PROVENANCE_TAGS = ("synthetic", "cutoff", "sign-randomized", "ingested")


def _resolve_seed(seed):
    """Return an explicit integer seed so that it can be recorded."""
    if seed is None:
        return int(np.random.SeedSequence().entropy % (2**63))
    if isinstance(seed, (int, np.integer)) and seed >= 0:
        return int(seed)
    raise InvalidArgumentError(f"seed must be a non-negative integer, got {seed!r}")


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _central_half(n):
    lo = n // 4
    hi = max(lo + 2, n - n // 4)
    return lo, min(hi, n)


@dataclass(frozen=True, eq=False)
class LevelSequence:
    """Ordered unperturbed energies with their mean level spacing."""

    energies: np.ndarray
    mean_spacing: float

    def __post_init__(self):
        e = _readonly(self.energies)
        if e.ndim != 1 or e.size < 2:
            raise InvalidArgumentError("a level sequence needs at least 2 energies")
        if not np.all(np.isfinite(e)):
            raise InvalidArgumentError("energies must be finite")
        if np.any(np.diff(e) < 0):
            raise InvalidArgumentError("energies must be nondecreasing")
        if not self.mean_spacing > 0:
            raise InvalidArgumentError("mean spacing must be positive")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "mean_spacing", float(self.mean_spacing))

    def __len__(self):
        return self.energies.size

    def central_spacing(self):
        """Mean consecutive difference over the central half of the sequence."""
        lo, hi = _central_half(len(self))
        return float(np.mean(np.diff(self.energies[lo:hi])))

    def spacing_consistent(self, rtol=0.1):
        return abs(self.central_spacing() - self.mean_spacing) <= rtol * self.mean_spacing


@dataclass(frozen=True)
class BandProfile:
    k: float
    g: float
    hbar: float
    delta: float
    c_norm: float
    omega_min: float

    def spectrum(self, omega):
        """Classical power spectrum, regularized below ``omega_min``."""
        w = np.maximum(np.abs(np.asarray(omega, dtype=float)), self.omega_min)
        return self.c_norm * self.k ** (3.0 + self.g) / w**self.g

    def variance(self, omega):
        """Variance of ``B_nm`` for a level separation ``hbar * omega``."""
        return self.delta / (2.0 * math.pi * self.hbar) * self.spectrum(omega)


@dataclass(frozen=True, eq=False)
class PerturbationMatrix:
    entries: np.ndarray
    provenance: str
    seeds: tuple = ()

    def __post_init__(self):
        b = _readonly(self.entries)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise InvalidArgumentError(f"perturbation matrix must be square, got shape {b.shape}")
        if not np.all(np.isfinite(b)):
            raise InvalidArgumentError("perturbation matrix has non-finite entries")
        if not np.array_equal(b, b.T):
            raise InvalidArgumentError("perturbation matrix is not exactly symmetric")
        for tag in self.provenance.split("+"):
            if tag not in PROVENANCE_TAGS:
                raise InvalidArgumentError(f"unknown provenance tag {tag!r}")
        object.__setattr__(self, "entries", b)
        object.__setattr__(self, "seeds", tuple(tuple(s) for s in self.seeds))

    @property
    def n(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class ModelMeta:
    hbar: float
    k: float
    g: float
    delta: float
    gamma_cl: float

    def __post_init__(self):
        for name in ("hbar", "k", "delta", "gamma_cl"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be positive and finite, got {v!r}")
        if not 0.0 <= self.g <= 1.0:
            raise InvalidArgumentError(f"g must lie in [0, 1], got {self.g!r}")

    def as_dict(self):
        return {"hbar": self.hbar, "k": self.k, "g": self.g, "delta": self.delta,
                "gamma_cl": self.gamma_cl}


@dataclass(frozen=True, eq=False)
class ParametricModel:
    levels: LevelSequence
    b: PerturbationMatrix
    meta: ModelMeta
    notes: tuple = field(default=())

    @property
    def n(self):
        return len(self.levels)

    def hamiltonian(self, dx):
        h = float(dx) * self.b.entries
        h[np.diag_indices_from(h)] += self.levels.energies
        return h

    def with_perturbation(self, b):
        return assemble(self.levels, b, self.meta)

    def digest(self):
        return _io.array_digest(self.levels.energies, self.b.entries)


def build_levels(n, delta, e_base=0.0, jitter=0.0, seed=None):
    """Picket-fence levels ``e_base + i*delta``, optionally jittered by up to ``delta/2``."""
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"need n >= 2 levels, got {n!r}")
    if not delta > 0:
        raise InvalidArgumentError(f"mean spacing must be positive, got {delta!r}")
    if not 0.0 <= jitter < 1.0:
        raise InvalidArgumentError(f"jitter must lie in [0, 1), got {jitter!r}")
    n = int(n)
    e = e_base + np.arange(n) * float(delta)
    if jitter > 0:
        rng = np.random.default_rng(_resolve_seed(seed))
        e = e + jitter * delta * rng.uniform(-0.5, 0.5, size=n)
        e.sort()
    return LevelSequence(e, delta)


def build_bandprofile(k, g, hbar, delta, c_norm=1.0, omega_min=None):
    if not 0.0 <= g <= 1.0:
        raise InvalidArgumentError(f"g must lie in [0, 1], got {g!r}")
    if omega_min is None:
        omega_min = delta / hbar
    for name, v in (("k", k), ("hbar", hbar), ("delta", delta), ("c_norm", c_norm),
                    ("omega_min", omega_min)):
        if not (np.isfinite(v) and v > 0):
            raise InvalidArgumentError(f"{name} must be positive, got {v!r}")
    return BandProfile(float(k), float(g), float(hbar), float(delta), float(c_norm),
                       float(omega_min))


def sample_perturbation(levels, profile, diag_policy="gaussian", seed=None,
                        max_dimension=MAX_DIMENSION):
    """Draw a symmetric Gaussian ``B`` whose variance follows ``profile``.

    Off-diagonal elements ``B_nm`` (n < m) are independent zero-mean normals
    with variance ``profile.variance((E_n - E_m)/hbar)``.  The diagonal is
    drawn with ``profile.variance(omega_min)`` for ``diag_policy="gaussian"``
    and set to zero for ``"zeros"``.
    """
    n = len(levels)
    if n > max_dimension:
        raise ResourceLimitError(f"dimension {n} exceeds the configured cap {max_dimension}")
    if not math.isclose(levels.mean_spacing, profile.delta, rel_tol=1e-12):
        raise InvalidArgumentError("levels and bandprofile disagree on the mean level spacing")
    if diag_policy not in ("gaussian", "zeros"):
        raise InvalidArgumentError(f"unknown diag_policy {diag_policy!r}")
    seed = _resolve_seed(seed)
    rng = np.random.default_rng(seed)
    e = levels.energies
    sigma = np.sqrt(profile.variance((e[:, None] - e[None, :]) / profile.hbar))
    upper = np.triu(rng.standard_normal((n, n)) * sigma, k=1)
    b = upper + upper.T
    if diag_policy == "gaussian":
        d = rng.standard_normal(n) * math.sqrt(profile.variance(profile.omega_min))
        b[np.diag_indices(n)] = d
    return PerturbationMatrix(b, "synthetic", (("synthetic", seed),))


def gaussian_cutoff(b, bandwidth):
    """Scale ``B_nm`` by ``exp(-(n-m)^2 / (2 bandwidth^2))``."""
    if not (np.isfinite(bandwidth) and bandwidth > 0):
        raise InvalidArgumentError(f"bandwidth must be positive, got {bandwidth!r}")
    idx = np.arange(b.n, dtype=float)
    dn = idx[:, None] - idx[None, :]
    g = np.exp(-(dn * dn) / (2.0 * float(bandwidth) ** 2))
    return PerturbationMatrix(b.entries * g, b.provenance + "+cutoff",
                              b.seeds + (("cutoff", float(bandwidth)),))


def sign_randomize(b, seed=None):
    """Flip the sign of each off-diagonal pair ``(B_nm, B_mn)`` with probability 1/2."""
    seed = _resolve_seed(seed)
    rng = np.random.default_rng(seed)
    n = b.n
    flips = np.triu(1.0 - 2.0 * rng.integers(0, 2, size=(n, n)), k=1)
    s = flips + flips.T
    s[np.diag_indices(n)] = 1.0
    return PerturbationMatrix(b.entries * s, b.provenance + "+sign-randomized",
                              b.seeds + (("sign-randomized", seed),))


def transform_perturbation(b, op, bandwidth=None, seed=None):
    """Apply ``"gaussian_cutoff"``, ``"sign_randomize"`` or ``"both"`` (cutoff first)."""
    if op == "gaussian_cutoff":
        return gaussian_cutoff(b, bandwidth)
    if op == "sign_randomize":
        return sign_randomize(b, seed)
    if op == "both":
        return sign_randomize(gaussian_cutoff(b, bandwidth), seed)
    raise InvalidArgumentError(f"unknown transform {op!r}")


def assemble(levels, b, meta, notes=()):
    if b.n != len(levels):
        raise InvalidArgumentError(
            f"perturbation is {b.n}x{b.n} but there are {len(levels)} levels")
    if not isinstance(meta, ModelMeta):
        meta = ModelMeta(**meta)
    return ParametricModel(levels, b, meta, tuple(notes))


# --------------------------------------------------------------------------
# text model files

_HEADER_KEYS = ("n", "hbar", "k", "g", "delta", "gamma_cl")
_HEADER_RE = re.compile(r"^#\s*n=")


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def export_model(model, path, extra=None):
    """Write ``model`` in the text model format plus a JSON sidecar."""
    m = model.meta
    lines = ["# n={} hbar={} k={} g={} delta={} gamma_cl={}".format(
        model.n, _io.fmt(m.hbar), _io.fmt(m.k), _io.fmt(m.g), _io.fmt(m.delta),
        _io.fmt(m.gamma_cl))]
    lines += [f"E {i} {_io.fmt(e)}" for i, e in enumerate(model.levels.energies)]
    b = model.b.entries
    rows, cols = np.nonzero(np.triu(np.ones_like(b, dtype=bool)) & (b != 0))
    lines += [f"B {r} {c} {_io.fmt(b[r, c])}" for r, c in zip(rows, cols)]
    path = _io.atomic_write_text(path, "\n".join(lines) + "\n")
    side = dict(model.meta.as_dict(), n=model.n, provenance=model.b.provenance,
                seeds=[list(s) for s in model.b.seeds], digest=model.digest())
    if extra:
        side.update(extra)
    _io.atomic_write_json(sidecar_path(path), side)
    return path


def _parse_float(tok, path, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise IngestError(f"cannot parse number {tok!r}", path, lineno) from None
    if not math.isfinite(v):
        raise IngestError(f"non-finite value {tok!r}", path, lineno)
    return v


def _parse_index(tok, n, path, lineno):
    try:
        i = int(tok)
    except ValueError:
        raise IngestError(f"cannot parse index {tok!r}", path, lineno) from None
    if not 0 <= i < n:
        raise IngestError(f"index {i} outside 0..{n - 1} (dimension mismatch)", path, lineno)
    return i


def ingest_model(path, format="text", asymmetry_tol=None):
    """Load a model written in the text model format.

    Only the upper triangle of ``B`` needs to be present.  If both ``(r, c)``
    and ``(c, r)`` are given and differ, the matrix is symmetrized as
    ``(B + B.T)/2`` and a note is recorded on the returned model.
    """
    if format != "text":
        raise InvalidArgumentError(f"unsupported model format {format!r}")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read model file: {exc}", path) from exc

    header = None
    energies = {}
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is None and _HEADER_RE.match(line):
                header = {}
                for tok in line[1:].split():
                    if "=" not in tok:
                        raise IngestError(f"malformed header token {tok!r}", path, lineno)
                    key, val = tok.split("=", 1)
                    header[key] = val
                missing = [k for k in _HEADER_KEYS if k not in header]
                if missing:
                    raise IngestError(f"header misses {', '.join(missing)}", path, lineno)
                try:
                    n = int(header["n"])
                except ValueError:
                    raise IngestError(f"bad dimension {header['n']!r}", path, lineno) from None
                if n < 2:
                    raise IngestError("dimension must be at least 2", path, lineno)
                header = {k: (n if k == "n" else _parse_float(header[k], path, lineno))
                          for k in _HEADER_KEYS}
            continue
        if header is None:
            raise IngestError("data line before the '# n=...' header", path, lineno)
        tok = line.split()
        n = header["n"]
        if tok[0] == "E":
            if len(tok) != 3:
                raise IngestError("expected 'E <index> <energy>'", path, lineno)
            i = _parse_index(tok[1], n, path, lineno)
            if i in energies:
                raise IngestError(f"duplicate energy for level {i}", path, lineno)
            energies[i] = _parse_float(tok[2], path, lineno)
        elif tok[0] == "B":
            if len(tok) != 4:
                raise IngestError("expected 'B <row> <col> <value>'", path, lineno)
            r = _parse_index(tok[1], n, path, lineno)
            c = _parse_index(tok[2], n, path, lineno)
            entries.append((r, c, _parse_float(tok[3], path, lineno), lineno))
        else:
            raise IngestError(f"unknown record type {tok[0]!r}", path, lineno)

    if header is None:
        raise IngestError("missing '# n=...' header", path)
    n = header["n"]
    if len(energies) != n:
        raise IngestError(f"header declares n={n} but {len(energies)} energies were given "
                          "(dimension mismatch)", path)

    e = np.array([energies[i] for i in range(n)])
    b = np.zeros((n, n))
    given = np.zeros((n, n), dtype=bool)
    for r, c, v, lineno in entries:
        if given[r, c]:
            raise IngestError(f"duplicate entry B[{r},{c}]", path, lineno)
        b[r, c] = v
        given[r, c] = True
    # mirror entries that were only given on one side
    only_upper = given & ~given.T
    b[only_upper.T] = b.T[only_upper.T]

    notes = []
    if not np.array_equal(b, b.T):
        scale = np.max(np.abs(b))
        asym = np.max(np.abs(b - b.T)) / (scale if scale > 0 else 1.0)
        if asymmetry_tol is not None and asym > asymmetry_tol:
            raise IngestError(f"relative asymmetry {asym:.3g} exceeds {asymmetry_tol:.3g}", path)
        b = 0.5 * (b + b.T)
        msg = f"input matrix symmetrized, relative asymmetry {asym:.3g}"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)

    try:
        levels = LevelSequence(e, header["delta"])
    except InvalidArgumentError as exc:
        raise IngestError(str(exc), path) from exc
    if not levels.spacing_consistent():
        raise IngestError(
            f"central level spacing {levels.central_spacing():.6g} differs from declared "
            f"delta={header['delta']} by more than 10%", path)

    seeds = ()
    side = sidecar_path(path)
    if side.exists():
        try:
            meta = json.loads(side.read_text(encoding="utf-8"))
            seeds = tuple(tuple(s) for s in meta.get("seeds", ()))
        except (OSError, ValueError) as exc:
            raise IngestError(f"unreadable sidecar: {exc}", side) from exc
    seeds = seeds + (("ingested", str(path)),)
    try:
        meta = ModelMeta(header["hbar"], header["k"], header["g"], header["delta"],
                         header["gamma_cl"])
    except InvalidArgumentError as exc:
        raise IngestError(str(exc), path) from exc
    return assemble(levels, PerturbationMatrix(b, "ingested", seeds), meta, notes)


def synthetic_model(n, g, *, delta=1.0, hbar=1.0, k=50.0, strength=1.0, gamma_cl=None,
                    omega_min=None, bandwidth=None, randomize=False, diag_policy="gaussian",
                    jitter=0.0, seed=None):
    """One-call construction of a synthetic model.

    ``strength`` is ``c_norm * k**(3+g)``, i.e. the value of the power
    spectrum at unit frequency; it fixes ``c_norm`` for the given ``k``.
    ``bandwidth`` applies a Gaussian cutoff (soft-wall model), ``randomize``
    flips off-diagonal signs.  ``gamma_cl`` defaults to ``k`` (ballistic
    rate scale with unit length and ``hbar = 1``).
    """
    seq = np.random.SeedSequence(_resolve_seed(seed))
    s_levels, s_matrix, s_sign = (int(s.generate_state(1)[0]) for s in seq.spawn(3))
    levels = build_levels(n, delta, jitter=jitter, seed=s_levels)
    profile = build_bandprofile(k, g, hbar, delta, c_norm=strength / k ** (3.0 + g),
                                omega_min=omega_min)
    b = sample_perturbation(levels, profile, diag_policy=diag_policy, seed=s_matrix)
    if bandwidth is not None:
        b = gaussian_cutoff(b, bandwidth)
    if randomize:
        b = sign_randomize(b, s_sign)
    meta = ModelMeta(hbar, k, g, delta, k if gamma_cl is None else gamma_cl)
    return assemble(levels, b, meta)


def randomized_partner(model, seed=None):
    """The same model with sign-randomized off-diagonal elements."""
    return model.with_perturbation(sign_randomize(model.b, seed))


def with_meta(model, **changes):
    return assemble(model.levels, model.b, replace(model.meta, **changes), model.notes)
