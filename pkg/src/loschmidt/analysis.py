"""
Decay-law fits, dx sweeps, regime borders and the factorization diagnostic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _io
from .dynamics import default_time_grid, ensemble_evolve, make_wavepacket
from .errors import (InsufficientStatisticsError, InsufficientWindowError,
                     InvalidArgumentError, LoschmidtError)
from .model import _resolve_seed
from .spectral import (averaged_ldos, bin_distribution, central_window, core_width,
                       diagonalize, eigenstate_ldos, participation_ratio, reference_indices)

PLATEAU_GUARD = 1e-12
MIN_FIT_POINTS = 16


@dataclass(frozen=True)
class FitResult:
    family: str
    rate: float
    window: tuple
    rms_log_residual: float
    plateau: float
    intercept: float = 0.0
    points: int = 0
    flag: str = "ok"

    @property
    def decayed(self):
        return self.flag == "ok"


def _fit_window(t, p, floor):
    below = np.flatnonzero(p <= 0.9)
    if below.size == 0:
        return None
    start = below[0]
    stop = start
    while stop < p.size and p[stop] >= floor:
        stop += 1
    return start, stop


def fit_decay(curve, family="exponential", upper=0.9, lower=0.1, plateau_factor=3.0,
              plateau=None):
    """Least-squares fit of ``ln(P - plateau)`` over the descent window.

    The window runs from the first sample with ``P <= upper`` down to the
    last sample above ``max(lower, plateau_factor * plateau)``.  The
    exponential family fits ``-rate * t + c``; the gaussian family fits
    ``-(rate * t)^2 + c`` so that ``rate = 1/tau``.
    """
    if family not in ("exponential", "gaussian"):
        raise InvalidArgumentError(f"unknown decay family {family!r}")
    t = np.asarray(curve.times, dtype=float)
    p = np.asarray(curve.probabilities, dtype=float)
    floor_p = curve.plateau if plateau is None else plateau
    floor = max(lower, plateau_factor * floor_p)
    if upper <= floor:
        return FitResult(family, 0.0, (0.0, 0.0), 0.0, floor_p, 0.0, 0, "no-decay")
    sel = _fit_window(t, p, floor)
    if sel is None or sel[1] == sel[0]:
        return FitResult(family, 0.0, (0.0, 0.0), 0.0, floor_p, 0.0, 0, "no-decay")
    start, stop = sel
    n_pts = stop - start
    if n_pts < MIN_FIT_POINTS:
        raise InsufficientWindowError(
            f"only {n_pts} samples inside the fit window; refine the time grid")
    tw = t[start:stop]
    y = np.log(np.maximum(p[start:stop] - floor_p, PLATEAU_GUARD))
    x = tw if family == "exponential" else tw**2
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = coef
    resid = y - design @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    rate = -slope if family == "exponential" else math.sqrt(max(-slope, 0.0))
    return FitResult(family, float(max(rate, 0.0)), (float(tw[0]), float(tw[-1])), rms,
                     float(floor_p), float(intercept), int(n_pts))


# --------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class PreparationSpec:
    """How decay curves are prepared and averaged at each sweep point.

    ``kind="eigenstate"`` uses ``references`` unperturbed eigenstates spread
    over the central window; ``kind="wavepacket"`` uses ``packets`` Gaussian
    energy-shell states of width ``sigma_e`` centred in the spectrum.
    """

    kind: str = "eigenstate"
    references: int = 20
    packets: int = 1
    sigma_e: float = 10.0
    phase_mode: str = "random_phase"
    average: str = "probability"
    time_points: int = 512
    time_factor: float = 8.0
    time_max: float | None = None

    def __post_init__(self):
        if self.kind not in ("eigenstate", "wavepacket"):
            raise InvalidArgumentError(f"unknown preparation kind {self.kind!r}")
        if self.references < 10:
            raise InvalidArgumentError("need at least 10 references for the averaged LDOS")

    def as_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class SweepResult:
    label: str
    dx: np.ndarray
    Gamma: np.ndarray
    gamma: np.ndarray
    gamma_residual: np.ndarray
    participation: np.ndarray
    flags: tuple
    meta: object
    provenance: str
    model_digest: str
    seeds: dict = field(default_factory=dict)

    @property
    def ok(self):
        return np.array([f != "gap" for f in self.flags])

    def rows(self):
        return zip(self.dx, self.gamma, self.gamma_residual, self.Gamma, self.participation,
                   self.flags)

    def to_csv(self, extra_comments=()):
        comments = [f"label={self.label}", f"provenance={self.provenance}",
                    f"model_digest={self.model_digest}", *extra_comments]
        cols = ["dx", "gamma", "gamma_residual", "Gamma", "participation", "flag"]
        return _io.csv_text(comments, cols, self.rows())

    def write_csv(self, path, extra_comments=()):
        return _io.atomic_write_text(path, self.to_csv(extra_comments))

    def manifest(self):
        return {"label": self.label, "provenance": self.provenance,
                "model_digest": self.model_digest, "seeds": self.seeds,
                "dx": [float(x) for x in self.dx], "meta": self.meta.as_dict()}


def preparations(model, spec, seed):
    """Eigenstate indices or seeded wavepackets described by ``spec``."""
    if spec.kind == "eigenstate":
        return reference_indices(model.n, spec.references)
    e = model.levels.energies
    centers = np.linspace(e[model.n // 3], e[2 * model.n // 3], spec.packets)
    seeds = np.random.SeedSequence(seed).generate_state(spec.packets)
    return [make_wavepacket(model.levels, float(c), spec.sigma_e, spec.phase_mode, int(s))
            for c, s in zip(centers, seeds)]


def sweep_point(model, dx, spec, seed=0):
    """Core width, fitted decay rate and participation at one ``dx``.

    Returns ``(Gamma, gamma, residual, participation, flag)``.
    """
    dec = diagonalize(model, dx)
    refs = reference_indices(model.n, spec.references)
    dist = averaged_ldos(model, dx, refs, decomposition=dec)
    width = core_width(dist)
    pr = float(np.mean([participation_ratio(eigenstate_ldos(model, dx, r, dec)) for r in refs]))
    hbar = model.meta.hbar
    if spec.time_max is not None:
        times = np.linspace(0.0, spec.time_max, spec.time_points)
    else:
        times = default_time_grid(width, hbar, model.levels.mean_spacing, spec.time_points,
                                  spec.time_factor)
    preps = preparations(model, spec, seed)
    curve = ensemble_evolve(model, dx, preps, times, average=spec.average, decomposition=dec)
    try:
        fit = fit_decay(curve, "exponential")
    except InsufficientWindowError:
        # resample the descent once, ending just past the window
        floor = max(0.1, 3.0 * curve.plateau)
        below = np.flatnonzero(curve.probabilities < floor)
        t_end = curve.times[below[0]] * 1.5 if below.size else curve.times[-1]
        times = np.linspace(0.0, t_end, spec.time_points)
        curve = ensemble_evolve(model, dx, preps, times, average=spec.average,
                                decomposition=dec)
        try:
            fit = fit_decay(curve, "exponential")
        except InsufficientWindowError:
            return width, math.nan, math.nan, pr, "short-window"
    return width, fit.rate, fit.rms_log_residual, pr, fit.flag


def sweep(models, dx_grid, spec=None, seed=None, workers=1):
    """Evaluate every model on the same ``dx`` grid.

    ``models`` maps labels to models (typically a correlated model and its
    sign-randomized partner).  A numeric failure at one point is recorded as
    a ``"gap"`` and the sweep continues.
    """
    spec = PreparationSpec() if spec is None else spec
    dx_grid = np.asarray(dx_grid, dtype=float)
    if dx_grid.ndim != 1 or dx_grid.size == 0 or np.any(dx_grid < 0):
        raise InvalidArgumentError("dx grid must be a nonempty list of nonnegative values")
    if np.any(np.diff(dx_grid) <= 0):
        raise InvalidArgumentError("dx grid must be ascending")
    seed = _resolve_seed(seed)

    def run(args):
        model, dx = args
        try:
            return sweep_point(model, dx, spec, seed)
        except LoschmidtError:
            return (math.nan, math.nan, math.nan, math.nan, "gap")

    results = {}
    for label, model in models.items():
        tasks = [(model, dx) for dx in dx_grid]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                points = list(pool.map(run, tasks))
        else:
            points = [run(t) for t in tasks]
        cols = list(zip(*points))
        results[label] = SweepResult(
            label, dx_grid.copy(), np.array(cols[0]), np.array(cols[1]), np.array(cols[2]),
            np.array(cols[3]), tuple(cols[4]), model.meta, model.b.provenance, model.digest(),
            {"preparation": seed, "model": [list(s) for s in model.b.seeds]})
    return results


# --------------------------------------------------------------------------
# scaling and borders

def power_law_fit(x, y):
    """Least-squares ``log y = slope * log x + intercept``."""
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def wigner_window(meta):
    return meta.delta, meta.hbar * meta.gamma_cl


def scaling_exponent(sweep_result, window=None):
    """Slope of ``log Gamma`` against ``log dx`` inside ``window`` (default: Wigner window)."""
    lo, hi = wigner_window(sweep_result.meta) if window is None else window
    g = sweep_result.Gamma
    dx = sweep_result.dx
    sel = np.isfinite(g) & (dx > 0) & (g > lo) & (g < hi)
    if np.count_nonzero(sel) < 4:
        raise InsufficientWindowError(
            f"{np.count_nonzero(sel)} points with {lo} < Gamma < {hi}; need 4")
    return power_law_fit(dx[sel], g[sel])[0]


def crossing(dx, values, target):
    """First ``dx`` where ``values`` crosses ``target``, by local power-law interpolation.

    Returns ``None`` when the data do not bracket the target.
    """
    ok = np.isfinite(values) & (values > 0) & (dx > 0)
    x, v = dx[ok], values[ok]
    for i in range(x.size - 1):
        a, b = v[i], v[i + 1]
        if a == target:
            return float(x[i])
        if (a - target) * (b - target) < 0:
            s = math.log(b / a) / math.log(x[i + 1] / x[i])
            return float(x[i] * (target / a) ** (1.0 / s))
    if x.size and v[-1] == target:
        return float(x[-1])
    return None


def nu_border_closed_form(k, g, hbar, gamma_cl):
    """Solve ``hbar*gamma_cl*(k dx)^(2/(1+g)) = hbar*gamma_cl`` for ``dx`` numerically."""
    p = 2.0 / (1.0 + g)
    target = hbar * gamma_cl

    def resid(log_dx):
        return math.log(hbar * gamma_cl * (k * math.exp(log_dx)) ** p) - math.log(target)

    lo, hi = math.log(1e-8 / k), math.log(1e8 / k)
    return math.exp(brentq(resid, lo, hi, xtol=1e-14, rtol=1e-14))


def wavelength_border(k):
    """Hard-wall estimate of the non-universal border, the de Broglie wavelength ``2 pi / k``."""
    return 2.0 * math.pi / k


def critical_scaling_exponent(g, d=2):
    """Exponent ``e`` in ``dx_c ~ k**e``."""
    return -((1.0 - g) + (1.0 + g) * d) / 2.0


def dx_c_ratio(k1, k2, g, d=2):
    """Predicted ``dx_c(k1) / dx_c(k2)``."""
    return (k1 / k2) ** critical_scaling_exponent(g, d)


@dataclass(frozen=True)
class BorderEstimates:
    dx_c: float | None
    dx_nu: float | None
    dx_nud: float | None
    dx_nu_closed_form: float
    dx_nu_wavelength: float
    wall: str = "soft"
    method: dict = field(default_factory=dict)

    @property
    def dx_nu_reported(self):
        """Measured border when resolved, else the estimate appropriate to the wall type."""
        if self.dx_nu is not None:
            return self.dx_nu
        return self.dx_nu_wavelength if self.wall == "hard" else self.dx_nu_closed_form

    def as_dict(self):
        out = dict(self.__dict__)
        out["dx_nu_reported"] = self.dx_nu_reported
        return out


def gamma_saturates(sweep_result, tail=3, rtol=0.2):
    """True when fitted rates are flat over the last ``tail`` points while Gamma still grows."""
    ok = sweep_result.ok & np.isfinite(sweep_result.gamma) & (sweep_result.gamma > 0)
    g, G = sweep_result.gamma[ok], sweep_result.Gamma[ok]
    if g.size < tail:
        return False
    g, G = g[-tail:], G[-tail:]
    return bool(np.ptp(g) <= rtol * np.mean(g) and G[-1] > 1.5 * G[0])


def estimate_borders(sweep_result=None, meta=None, wall="soft"):
    """Regime borders from a sweep plus the closed-form and hard-wall cross-checks.

    ``dx_c`` solves ``Gamma(dx) = delta`` and ``dx_nu`` solves
    ``Gamma(dx) = hbar*gamma_cl`` on the measured ``Gamma`` column.  ``dx_nud``
    is resolved only when the fitted fidelity rates saturate: it solves
    ``Gamma(dx) = hbar*gamma_sat`` with the saturated rate.  Unresolved
    borders are ``None``.  ``wall="hard"`` selects the wavelength estimate
    ``2 pi / k`` as the fallback for ``dx_nu``.
    """
    if wall not in ("soft", "hard"):
        raise InvalidArgumentError(f"unknown wall type {wall!r}")
    if meta is None:
        if sweep_result is None:
            raise InvalidArgumentError("need a sweep or model metadata")
        meta = sweep_result.meta
    closed = nu_border_closed_form(meta.k, meta.g, meta.hbar, meta.gamma_cl)
    dx_c = dx_nu = dx_nud = None
    method = {"dx_c": "absent", "dx_nu": "absent", "dx_nud": "absent",
              "closed_form": "Gamma = hbar*gamma_cl*(k dx)^(2/(1+g))",
              "wavelength": "2 pi / k"}
    if sweep_result is not None:
        dx, G = sweep_result.dx, sweep_result.Gamma
        dx_c = crossing(dx, G, meta.delta)
        dx_nu = crossing(dx, G, meta.hbar * meta.gamma_cl)
        if dx_c is not None:
            method["dx_c"] = "power-law interpolation of Gamma = delta"
        if dx_nu is not None:
            method["dx_nu"] = "power-law interpolation of Gamma = hbar*gamma_cl"
        if gamma_saturates(sweep_result):
            ok = sweep_result.ok & np.isfinite(sweep_result.gamma)
            g_sat = float(np.mean(sweep_result.gamma[ok][-3:]))
            dx_nud = crossing(dx, G, meta.hbar * g_sat)
            if dx_nud is not None:
                method["dx_nud"] = f"Gamma = hbar*gamma_sat, gamma_sat={g_sat!r}"
    return BorderEstimates(dx_c, dx_nu, dx_nud, closed, wavelength_border(meta.k), wall, method)


def tracks_wigner(sweep_result, tol=0.25, window=None):
    """Fraction of Wigner-window points with ``gamma`` within ``tol`` of ``Gamma/hbar``."""
    lo, hi = wigner_window(sweep_result.meta) if window is None else window
    G = sweep_result.Gamma
    sel = sweep_result.ok & (G > lo) & (G < hi)
    if not np.any(sel):
        return math.nan
    ratio = sweep_result.gamma[sel] * sweep_result.meta.hbar / G[sel]
    return float(np.mean(np.abs(ratio - 1.0) <= tol))


def randomization_contrast(correlated, randomized, tol=0.25):
    """Compare a correlated sweep with its sign-randomized partner.

    The contrast is meaningful only when the correlated model's rates
    saturate; ``applicable`` reports that.
    """
    if not np.array_equal(correlated.dx, randomized.dx):
        raise InvalidArgumentError("sweeps are not on the same dx grid")
    ok = correlated.ok & randomized.ok
    width_agreement = np.abs(randomized.Gamma[ok] / correlated.Gamma[ok] - 1.0)
    return {"applicable": gamma_saturates(correlated),
            "randomized_tracks_wigner": tracks_wigner(randomized, tol),
            "max_width_deviation": float(np.nanmax(width_agreement)) if width_agreement.size
            else math.nan}


# --------------------------------------------------------------------------
# factorization

@dataclass(frozen=True, eq=False)
class FactorizationResult:
    centers: np.ndarray
    mean_f: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    mean_abs2: np.ndarray
    predicted: np.ndarray
    ratio: np.ndarray
    realizations: int
    degenerate: bool = False

    def z_scores(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.mean_f.real / self.stderr_re, self.mean_f.imag / self.stderr_im

    def central(self, half_width):
        return np.abs(self.centers) <= half_width


def autoconvolution(offsets, weights, bin_width):
    """Binned distribution of ``w_j - w_i`` weighted by ``p_i p_j``."""
    d = (offsets[None, :] - offsets[:, None]).ravel()
    pw = (weights[:, None] * weights[None, :]).ravel()
    keep = pw > 0
    return bin_distribution(d[keep], pw[keep], bin_width)


def _on_grid(centers, src_centers, values, bin_width):
    out = np.zeros(centers.size)
    idx = np.rint(src_centers / bin_width).astype(np.int64) - np.rint(centers[0] / bin_width).astype(np.int64)
    ok = (idx >= 0) & (idx < centers.size)
    np.add.at(out, idx[ok], values[ok])
    return out


def factorization_diagnostic(amplitude_sets, ldos_wpk, ldos_dx, bin_width, mean_spacing,
                             span=None):
    """Binned statistics of the effective-LDOS weights ``f`` over realizations.

    For each bin the realization mean of ``sum f`` (with standard errors) and
    of ``sum |f|^2`` are returned, together with the random-phase prediction
    ``delta * rho_tilde(w) * rho(w; dx) * bin_width`` where ``rho_tilde`` is
    the auto-convolution of the wavepacket LDOS.  Both LDOS arguments are
    treated as densities after binning.
    """
    sets = list(amplitude_sets)
    if len(sets) < 10:
        raise InsufficientStatisticsError(f"need at least 10 realizations, got {len(sets)}")
    h = float(bin_width)
    if span is None:
        span = max(np.max(np.abs(s.frequencies)) for s in sets)
    jmax = int(np.ceil(span / h))
    centers = np.arange(-jmax, jmax + 1) * h

    sums = np.zeros((len(sets), centers.size), dtype=complex)
    abs2 = np.zeros((len(sets), centers.size))
    for r, s in enumerate(sets):
        idx = np.rint(s.frequencies / h).astype(np.int64) + jmax
        ok = (idx >= 0) & (idx < centers.size)
        np.add.at(sums[r], idx[ok], s.weights[ok])
        np.add.at(abs2[r], idx[ok], np.abs(s.weights[ok]) ** 2)

    degenerate = all(np.all(np.abs(s.frequencies) < 0.5 * h) for s in sets)
    nreal = len(sets)
    mean_f = sums.mean(axis=0)
    se_re = sums.real.std(axis=0, ddof=1) / math.sqrt(nreal)
    se_im = sums.imag.std(axis=0, ddof=1) / math.sqrt(nreal)
    mean_abs2 = abs2.mean(axis=0)

    if degenerate:
        nan = np.full(centers.size, np.nan)
        return FactorizationResult(centers, mean_f, se_re, se_im, mean_abs2, nan, nan, nreal, True)

    c_w, acc_w = autoconvolution(ldos_wpk.offsets, ldos_wpk.weights, h)
    rho_tilde = _on_grid(centers, c_w, acc_w, h) / (acc_w.sum() * h)
    c_x, acc_x = bin_distribution(ldos_dx.offsets, ldos_dx.weights, h)
    rho_dx = _on_grid(centers, c_x, acc_x, h) / (acc_x.sum() * h)
    predicted = mean_spacing * rho_tilde * rho_dx * h
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(predicted > 0, mean_abs2 / predicted, np.nan)
    return FactorizationResult(centers, mean_f, se_re, se_im, mean_abs2, predicted, ratio, nreal)


def shell_references(model, wavepacket, half_width=2.0):
    """Unperturbed levels within ``half_width * sigma_E`` of the wavepacket energy.

    The frozen magnitudes of a sign-randomized matrix make the LDOS vary from
    level to level, so the prediction must use references from the same
    energy shell as the wavepacket.
    """
    e = model.levels.energies
    win = central_window(model.n)
    near = np.abs(e - wavepacket.mean_energy) <= half_width * wavepacket.energy_width
    idx = [int(i) for i in np.flatnonzero(near) if i in win]
    if len(idx) < 10:
        raise InsufficientStatisticsError(f"only {len(idx)} reference levels in the energy shell")
    return idx


def kronecker_weight(model, dx, refs, decomposition=None):
    """Mean over references of the largest single LDOS weight."""
    dec = decomposition if decomposition is not None else diagonalize(model, dx)
    return float(np.mean([np.max(dec.transform[r] ** 2) for r in refs]))
