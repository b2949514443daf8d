"""Diagonalization of ``H(dx)`` and local density of states (LDOS) functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _io
from .errors import (DegenerateDistributionError, EdgeEffectError, InvalidArgumentError,
                     NumericFailure)

EDGE_GUARD = 0.1
WEIGHT_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs of ``H(dx)``; column ``j`` of ``transform`` is ``|n_j(x)>``."""

    dx: float
    eigenvalues: np.ndarray
    transform: np.ndarray

    @property
    def n(self):
        return self.eigenvalues.size


@dataclass(frozen=True, eq=False)
class LdosDistribution:
    offsets: np.ndarray
    weights: np.ndarray
    center: float
    kind: str
    dx: float = 0.0
    bin_width: float | None = None

    def mean(self):
        return float(np.dot(self.weights, self.offsets))

    def variance(self):
        d = self.offsets - self.mean()
        return float(np.dot(self.weights, d * d))

    @property
    def support_size(self):
        return int(np.count_nonzero(self.weights > WEIGHT_FLOOR))


def diagonalize(model, dx):
    h = model.hamiltonian(dx)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigensolver failed: {exc}", dx=dx, dimension=model.n) from exc
    return SpectralDecomposition(float(dx), w, v)


def central_window(n, guard=EDGE_GUARD):
    """Index range of reference states outside the spectral guard bands."""
    g = int(np.floor(guard * n))
    return range(g, n - g)


def reference_indices(n, count, guard=EDGE_GUARD):
    """``count`` evenly spread reference indices inside the central window."""
    win = central_window(n, guard)
    if count > len(win):
        raise InvalidArgumentError(f"cannot pick {count} references from a window of {len(win)}")
    pos = np.linspace(win.start, win.stop - 1, count)
    return [int(i) for i in np.round(pos)]


def _check_reference(ref, n):
    win = central_window(n)
    if ref not in win:
        raise EdgeEffectError(
            f"reference index {ref} lies in the edge guard band; allowed {win.start}..{win.stop - 1}")


def _normalized(weights):
    return weights / weights.sum()


def eigenstate_ldos(model, dx, ref, decomposition=None):
    _check_reference(ref, model.n)
    dec = decomposition if decomposition is not None else diagonalize(model, dx)
    e0 = model.levels.energies[ref]
    w = dec.transform[ref] ** 2
    return LdosDistribution(dec.eigenvalues - e0, _normalized(w), float(e0), "eigenstate",
                            dec.dx)


def wavepacket_ldos(model, wavepacket, dx=0.0, decomposition=None):
    """LDOS of a wavepacket; by default over the unperturbed eigenbasis."""
    a = np.asarray(wavepacket.amplitudes)
    if dx == 0.0 and decomposition is None:
        energies = model.levels.energies
        w = np.abs(a) ** 2
    else:
        dec = decomposition if decomposition is not None else diagonalize(model, dx)
        energies = dec.eigenvalues
        w = np.abs(dec.transform.T @ a) ** 2
    w = _normalized(w)
    e0 = float(np.dot(w, energies))
    return LdosDistribution(energies - e0, w, e0, "wavepacket", float(dx))


def bin_distribution(offsets, weights, bin_width):
    """Accumulate point weights onto a grid of centers ``j * bin_width``."""
    idx = np.rint(np.asarray(offsets) / bin_width).astype(np.int64)
    lo = idx.min()
    acc = np.bincount(idx - lo, weights=weights)
    centers = (np.arange(acc.size) + lo) * bin_width
    return centers, acc


def averaged_ldos(model, dx, refs, bin_width=None, decomposition=None):
    """Reference-averaged LDOS on a shared grid of width ``bin_width`` (default delta/2).

    Each single-reference distribution is measured from its own unperturbed
    energy before the weights are accumulated.
    """
    refs = list(refs)
    if len(refs) < 10:
        raise InvalidArgumentError(f"averaged LDOS needs at least 10 references, got {len(refs)}")
    for r in refs:
        _check_reference(r, model.n)
    if bin_width is None:
        bin_width = model.levels.mean_spacing / 2.0
    dec = decomposition if decomposition is not None else diagonalize(model, dx)
    e = model.levels.energies
    offsets = np.concatenate([dec.eigenvalues - e[r] for r in refs])
    weights = np.concatenate([_normalized(dec.transform[r] ** 2) for r in refs])
    centers, acc = bin_distribution(offsets, weights, bin_width)
    return LdosDistribution(centers, _normalized(acc), float(np.mean(e[refs])), "averaged",
                            dec.dx, float(bin_width))


def ldos(model, mode, *, dx=0.0, ref=None, refs=None, wavepacket=None, bin_width=None,
         decomposition=None):
    """Dispatch to the eigenstate, wavepacket or averaged LDOS construction."""
    if mode == "eigenstate":
        if ref is None:
            raise InvalidArgumentError("eigenstate mode needs a reference index")
        return eigenstate_ldos(model, dx, ref, decomposition)
    if mode == "wavepacket":
        if wavepacket is None:
            raise InvalidArgumentError("wavepacket mode needs a wavepacket")
        return wavepacket_ldos(model, wavepacket, dx, decomposition)
    if mode == "averaged":
        if refs is None:
            raise InvalidArgumentError("averaged mode needs reference indices")
        return averaged_ldos(model, dx, refs, bin_width, decomposition)
    raise InvalidArgumentError(f"unknown LDOS mode {mode!r}")


def _binned_quantile(om, w, h, p):
    # cumulative weight rises linearly across each occupied bin and is flat across gaps
    c = np.concatenate([[0.0], np.cumsum(w)])
    xs = np.empty(2 * om.size)
    ys = np.empty(2 * om.size)
    xs[0::2], xs[1::2] = om - h / 2, om + h / 2
    ys[0::2], ys[1::2] = c[:-1], c[1:]
    k = min(max(int(np.searchsorted(ys, p)), 1), xs.size - 1)
    x0, x1, y0, y1 = xs[k - 1], xs[k], ys[k - 1], ys[k]
    if y1 <= y0:
        return float(x0)
    return float(x0 + (p - y0) / (y1 - y0) * (x1 - x0))


def quantile(dist, p):
    """Weight quantile of ``dist``.

    Point distributions interpolate linearly through the riser midpoints of
    the cumulative staircase.  Binned distributions spread each bin's weight
    uniformly over the bin, so a dominant bin does not borrow width from the
    gap to its neighbours.
    """
    order = np.argsort(dist.offsets, kind="stable")
    om = dist.offsets[order]
    w = dist.weights[order]
    keep = w > 0
    om, w = om[keep], w[keep]
    if om.size == 0:
        raise DegenerateDistributionError("distribution has no support")
    if dist.bin_width is not None:
        return _binned_quantile(om, w / w.sum(), dist.bin_width, p)
    mid = np.cumsum(w) - 0.5 * w
    return float(np.interp(p, mid, om))


def core_width(dist, fraction=0.7):
    """Width of the central region holding ``fraction`` of the probability.

    Computed as ``q(1/2 + fraction/2) - q(1/2 - fraction/2)``.  A single
    support point gives 0.
    """
    if dist.support_size == 0:
        raise DegenerateDistributionError("distribution has no support")
    if dist.support_size == 1:
        return 0.0
    hi = quantile(dist, 0.5 + fraction / 2.0)
    lo = quantile(dist, 0.5 - fraction / 2.0)
    return max(hi - lo, 0.0)


def participation_ratio(dist):
    return float(1.0 / np.sum(dist.weights**2))


def ldos_csv(dist, extra_comments=()):
    comments = [f"dx={_io.fmt(dist.dx)}", f"mode={dist.kind}", f"E0={_io.fmt(dist.center)}",
                f"Gamma={_io.fmt(core_width(dist))}",
                f"participation={_io.fmt(participation_ratio(dist))}", *extra_comments]
    return _io.csv_text(comments, ["omega", "weight"], zip(dist.offsets, dist.weights))


def write_ldos_csv(dist, path, extra_comments=()):
    return _io.atomic_write_text(path, ldos_csv(dist, extra_comments))
