"""
Fidelity and survival amplitudes in the spectral representation.

All propagation uses the eigendecomposition of ``H(dx)`` (and the trivially
diagonal ``H0 = E``), so amplitudes are exact to eigensolver accuracy at
every sampled time.  ``oracle_propagate`` is an independent brute-force
route through a Taylor scaling-and-squaring matrix exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _io
from .errors import (InvalidArgumentError, NumericFailure, OracleScopeError, TooNarrowError)
from .model import _resolve_seed
from .spectral import central_window, diagonalize

PHASE_MODES = ("real_positive", "random_sign", "random_phase")
SUPPORT_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class Wavepacket:
    amplitudes: np.ndarray
    mean_energy: float
    energy_width: float
    phase_mode: str = "real_positive"
    seed: int | None = None

    @property
    def n(self):
        return self.amplitudes.size

    def descriptor(self):
        return {"kind": "wavepacket", "E0": self.mean_energy, "sigma_E": self.energy_width,
                "phase_mode": self.phase_mode, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class DecayCurve:
    times: np.ndarray
    amplitudes: np.ndarray
    probabilities: np.ndarray
    label: str
    dx: float
    plateau: float
    preparation: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class SpectralAmplitudeSet:
    """Frequencies ``E_n(x) - E_m(x0)`` and complex weights ``f``; ``total`` is the pre-pruning sum."""

    frequencies: np.ndarray
    weights: np.ndarray
    total: complex
    dx: float

    def amplitude(self, times):
        """Reconstruct ``m(t) = sum f exp(+i w t)``."""
        t = np.asarray(times, dtype=float)
        return np.exp(1j * np.outer(t, self.frequencies)) @ self.weights


def make_wavepacket(levels, e0_target, sigma_e, phase_mode="random_phase", seed=None,
                    min_support=8):
    """Gaussian energy-shell state ``|a_n| ~ exp(-(E_n - E0)^2 / (4 sigma_E^2))``."""
    if not sigma_e > 0:
        raise InvalidArgumentError(f"energy width must be positive, got {sigma_e!r}")
    if phase_mode not in PHASE_MODES:
        raise InvalidArgumentError(f"unknown phase mode {phase_mode!r}")
    e = levels.energies
    win = central_window(len(e))
    if not e[win.start] <= e0_target <= e[win.stop - 1]:
        raise InvalidArgumentError(f"target energy {e0_target} lies outside the central window")
    mag = np.exp(-((e - e0_target) ** 2) / (4.0 * sigma_e**2))
    mag /= np.linalg.norm(mag)
    support = int(np.count_nonzero(mag**2 > SUPPORT_FLOOR))
    if support < min_support:
        raise TooNarrowError(f"wavepacket covers {support} levels, need {min_support}")
    if phase_mode == "real_positive":
        amps = mag.astype(complex)
        seed = None
    else:
        seed = _resolve_seed(seed)
        rng = np.random.default_rng(seed)
        if phase_mode == "random_sign":
            amps = mag * (1.0 - 2.0 * rng.integers(0, 2, size=mag.size))
        else:
            amps = mag * np.exp(2j * np.pi * rng.random(mag.size))
        amps = amps.astype(complex)
    p = np.abs(amps) ** 2
    p /= p.sum()
    e_mean = float(np.dot(p, e))
    return Wavepacket(amps, e_mean, float(sigma_e), phase_mode, seed)


def _state_vector(preparation, n):
    if isinstance(preparation, Wavepacket):
        if preparation.n != n:
            raise InvalidArgumentError("wavepacket dimension does not match the model")
        return preparation.amplitudes.astype(complex), preparation.descriptor()
    if isinstance(preparation, (int, np.integer)):
        if not 0 <= preparation < n:
            raise InvalidArgumentError(f"eigenstate index {preparation} out of range")
        a = np.zeros(n, dtype=complex)
        a[preparation] = 1.0
        return a, {"kind": "eigenstate", "index": int(preparation)}
    a = np.asarray(preparation, dtype=complex)
    if a.shape != (n,):
        raise InvalidArgumentError("state vector has the wrong shape")
    return a / np.linalg.norm(a), {"kind": "vector"}


def check_time_grid(times):
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1 or t[0] != 0.0:
        raise InvalidArgumentError("time grid must be one-dimensional and start at 0")
    if np.any(np.diff(t) <= 0):
        raise InvalidArgumentError("time grid must be strictly increasing")
    return t


def default_time_grid(width, hbar=1.0, mean_spacing=None, points=512, factor=8.0):
    """Linear grid up to ``factor * hbar / width``.

    The end time is capped at the Heisenberg time ``2 pi hbar / delta`` when
    the mean spacing is given; a zero width falls back to that cap.
    """
    t_heis = None if mean_spacing is None else 2.0 * math.pi * hbar / mean_spacing
    if width > 0:
        t_max = factor * hbar / width
        if t_heis is not None:
            t_max = min(t_max, t_heis)
    elif t_heis is not None:
        t_max = t_heis
    else:
        raise InvalidArgumentError("need a positive width or a mean spacing")
    return np.linspace(0.0, t_max, points)


def _plateau(freqs, coeffs, scale):
    """Infinite-time average of ``|sum c exp(i w t)|^2``, merging equal frequencies."""
    tol = 1e-9 * max(scale, 1.0)
    keys = np.rint(np.asarray(freqs) / tol).astype(np.int64)
    _, inv = np.unique(keys, return_inverse=True)
    summed = np.zeros(inv.max() + 1, dtype=complex)
    np.add.at(summed, inv, coeffs)
    return float(np.sum(np.abs(summed) ** 2))


def fidelity_components(decomposition, energies, state):
    """Frequencies ``E_n(x) - E_m(x0)`` and weights ``<psi|n><n|m><m|psi>``.

    Rows run over perturbed eigenstates ``n``; columns over the unperturbed
    levels ``m`` in the support of ``state``.
    """
    u = decomposition.transform
    supp = np.flatnonzero(state)
    bra = np.conj(u[supp].T @ state[supp])
    f = bra[:, None] * u[supp].T * state[None, supp]
    w = decomposition.eigenvalues[:, None] - energies[None, supp]
    return w, f


def fidelity_amplitude(decomposition, energies, state, times):
    """``m(t) = <psi| exp(+iHt) exp(-iH0 t) |psi>`` on an arbitrary time array (hbar = 1 units)."""
    t = np.asarray(times, dtype=float)
    u = decomposition.transform
    supp = np.flatnonzero(state)
    bra = np.conj(u[supp].T @ state[supp])
    forward = state[supp, None] * np.exp(-1j * np.outer(energies[supp], t))
    projected = u[supp].T @ forward
    back = np.exp(1j * np.outer(decomposition.eigenvalues, t))
    return np.sum(bra[:, None] * back * projected, axis=0)


def survival_amplitude(decomposition, state, times):
    """``c(t) = <psi| exp(-iHt) |psi>`` (hbar = 1 units)."""
    t = np.asarray(times, dtype=float)
    w = np.abs(decomposition.transform.T @ state) ** 2
    return np.exp(-1j * np.outer(t, decomposition.eigenvalues)) @ w


def evolve(model, dx, preparation, times, kind="fidelity", decomposition=None):
    """Fidelity or survival decay curve of one preparation.

    ``preparation`` is an unperturbed eigenstate index or a :class:`Wavepacket`.
    ``kind="fidelity"`` gives ``m(t; dx)``; ``kind="survival"`` gives
    ``c(t; dx)`` for an eigenstate or ``c(t; wpk)`` for a wavepacket, both
    evolved with ``H(dx)``.
    """
    t = check_time_grid(times)
    hbar = model.meta.hbar
    dec = decomposition if decomposition is not None else diagonalize(model, dx)
    state, desc = _state_vector(preparation, model.n)
    e = model.levels.energies
    scale = float(np.max(np.abs(dec.eigenvalues)))
    if kind == "fidelity":
        amp = fidelity_amplitude(dec, e, state, t / hbar)
        w, f = fidelity_components(dec, e, state)
        plateau = _plateau(w.ravel(), f.ravel(), scale)
        label = "fidelity"
    elif kind == "survival":
        amp = survival_amplitude(dec, state, t / hbar)
        p = np.abs(dec.transform.T @ state) ** 2
        plateau = _plateau(dec.eigenvalues, p, scale)
        label = "survival_wavepacket" if isinstance(preparation, Wavepacket) else "survival_eigenstate"
    else:
        raise InvalidArgumentError(f"unknown curve kind {kind!r}")
    return DecayCurve(t, amp, np.abs(amp) ** 2, label, float(dx), plateau, desc)


def ensemble_evolve(model, dx, preparations, times, average="probability", kind="fidelity",
                    decomposition=None):
    """Average decay curves over several preparations.

    ``average="amplitude"`` averages ``m(t)`` first and reports ``|<m>|^2``
    (the reference-averaged amplitude of the perturbative regime);
    ``average="probability"`` reports ``<|m|^2>`` and keeps ``<m>`` as the
    amplitude column.
    """
    if average not in ("probability", "amplitude"):
        raise InvalidArgumentError(f"unknown averaging mode {average!r}")
    preparations = list(preparations)
    if not preparations:
        raise InvalidArgumentError("need at least one preparation")
    dec = decomposition if decomposition is not None else diagonalize(model, dx)
    t = check_time_grid(times)
    e = model.levels.energies
    scale = float(np.max(np.abs(dec.eigenvalues)))
    amps, probs, plateaus, freqs, coeffs = [], [], [], [], []
    for prep in preparations:
        c = evolve(model, dx, prep, t, kind=kind, decomposition=dec)
        amps.append(c.amplitudes)
        probs.append(c.probabilities)
        plateaus.append(c.plateau)
        if average == "amplitude":
            state, _ = _state_vector(prep, model.n)
            if kind == "fidelity":
                w, f = fidelity_components(dec, e, state)
            else:
                w = dec.eigenvalues
                f = np.abs(dec.transform.T @ state) ** 2
            freqs.append(np.ravel(w))
            coeffs.append(np.ravel(f) / len(preparations))
    mean_amp = np.mean(amps, axis=0)
    if average == "amplitude":
        prob = np.abs(mean_amp) ** 2
        plateau = _plateau(np.concatenate(freqs), np.concatenate(coeffs), scale)
    else:
        prob = np.mean(probs, axis=0)
        plateau = float(np.mean(plateaus))
    desc = {"kind": "ensemble", "average": average, "count": len(preparations)}
    return DecayCurve(t, mean_amp, prob, f"{kind}_averaged", float(dx), plateau, desc)


def effective_ldos(model, dx, wavepacket, decomposition=None, prune=1e-14, sum_tol=1e-10):
    """Complex spectral weights of ``m(t; dx)`` (the effective LDOS).

    The sum rule ``sum f = 1`` is checked before components with
    ``|f| < prune`` are dropped.
    """
    dec = decomposition if decomposition is not None else diagonalize(model, dx)
    state, _ = _state_vector(wavepacket, model.n)
    w, f = fidelity_components(dec, model.levels.energies, state)
    total = complex(np.sum(f))
    if abs(total - 1.0) > sum_tol:
        raise NumericFailure(f"sum rule violated: sum f = {total}", dx=dx, dimension=model.n)
    keep = np.abs(f) >= prune
    return SpectralAmplitudeSet(w[keep] / model.meta.hbar, f[keep], total, float(dx))


# --------------------------------------------------------------------------
# brute-force propagation

ORACLE_MAX_DIMENSION = 64
ORACLE_MAX_NORM = 1e7


def _expm_taylor(a, squarings):
    scaled = a / 2.0**squarings
    result = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for j in range(1, 80):
        term = term @ scaled / j
        result = result + term
        if np.max(np.abs(term)) < 1e-18 * np.max(np.abs(result)):
            break
    for _ in range(squarings):
        result = result @ result
    return result


def expm_scaling_squaring(a, check_tol=1e-11):
    """Dense matrix exponential by a scaled Taylor series and repeated squaring.

    The result is recomputed with one extra squaring (halved step) and the
    two must agree to ``check_tol`` max-abs.
    """
    a = np.asarray(a, dtype=complex)
    norm = np.max(np.sum(np.abs(a), axis=0))
    s = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0 else 0
    x = _expm_taylor(a, s)
    y = _expm_taylor(a, s + 1)
    dev = np.max(np.abs(x - y))
    if not dev <= check_tol:
        raise NumericFailure(f"matrix exponential failed the step-halving check ({dev:.2e})",
                             dimension=a.shape[0])
    return y


def oracle_state(model, dx, state, t):
    """``exp(-i H(dx) t / hbar) |state>`` without any eigendecomposition."""
    if model.n > ORACLE_MAX_DIMENSION:
        raise OracleScopeError(f"oracle accepts n <= {ORACLE_MAX_DIMENSION}, got {model.n}")
    h = model.hamiltonian(dx)
    arg = -1j * h * (t / model.meta.hbar)
    if np.max(np.abs(arg)) * model.n > ORACLE_MAX_NORM:
        raise OracleScopeError("t * |H| is too large for the Taylor oracle")
    return expm_scaling_squaring(arg) @ np.asarray(state, dtype=complex)


def oracle_propagate(model, dx, state, t, bra=None):
    """``<bra| exp(-i H(dx) t / hbar) |state>``; ``bra`` defaults to ``state``."""
    state = np.asarray(state, dtype=complex)
    bra = state if bra is None else np.asarray(bra, dtype=complex)
    return complex(np.vdot(bra, oracle_state(model, dx, state, t)))


def oracle_fidelity(model, dx, state, t):
    """``<psi| exp(+iHt) exp(-iH0 t) |psi>`` from two brute-force exponentials."""
    state = np.asarray(state, dtype=complex)
    unperturbed = oracle_state(model, 0.0, state, t)
    perturbed = oracle_state(model, dx, state, t)
    return complex(np.vdot(perturbed, unperturbed))


def decay_csv(curve, extra_comments=()):
    desc = ";".join(f"{k}={v}" for k, v in sorted(curve.preparation.items()))
    comments = [f"dx={_io.fmt(curve.dx)}", f"label={curve.label}", f"preparation={desc}",
                f"plateau={_io.fmt(curve.plateau)}", *extra_comments]
    rows = zip(curve.times, curve.amplitudes.real, curve.amplitudes.imag, curve.probabilities)
    return _io.csv_text(comments, ["t", "re_amp", "im_amp", "prob"], rows)


def write_decay_csv(curve, path, extra_comments=()):
    return _io.atomic_write_text(path, decay_csv(curve, extra_comments))
