"""Brute-force cross-checks for small models.

Nothing here calls a library eigensolver.  Eigenvalues are bracketed by
counting negative pivots of ``H - x I`` (Sylvester inertia) and refined by
bisection; eigenvectors come from inverse iteration with dense solves.
Propagation uses the Taylor matrix exponential from :mod:`dynamics`.
"""

from __future__ import annotations

import numpy as np

from .dynamics import _state_vector, evolve, oracle_fidelity, oracle_propagate
from .errors import OracleScopeError
from .spectral import eigenstate_ldos

LDOS_MAX_DIMENSION = 12
FIDELITY_MAX_DIMENSION = 64


def negative_count(h, x):
    """Number of eigenvalues of symmetric ``h`` below ``x``."""
    a = np.array(h, dtype=float) - x * np.eye(h.shape[0])
    n = a.shape[0]
    tiny = 1e-300
    count = 0
    for k in range(n):
        piv = a[k, k]
        if piv == 0.0:
            piv = tiny
        if piv < 0:
            count += 1
        if k + 1 < n:
            col = a[k + 1:, k] / piv
            a[k + 1:, k + 1:] -= np.outer(col, a[k, k + 1:])
    return count


def bisect_eigenvalues(h, tol=1e-15):
    """All eigenvalues of ``h`` in ascending order by inertia bisection."""
    n = h.shape[0]
    radius = np.max(np.sum(np.abs(h), axis=1))
    lo0, hi0 = -radius - 1.0, radius + 1.0
    vals = np.empty(n)
    for j in range(n):
        lo, hi = lo0, hi0
        while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if negative_count(h, mid) > j:
                hi = mid
            else:
                lo = mid
        vals[j] = 0.5 * (lo + hi)
    return vals


def inverse_iteration(h, eigenvalues, cluster_tol=1e-8):
    """Unit eigenvectors for the given eigenvalues, orthogonalized inside clusters."""
    n = h.shape[0]
    rng = np.random.default_rng(12345)
    vecs = np.zeros((n, n))
    scale = max(1.0, np.max(np.abs(eigenvalues)))
    for j, lam in enumerate(eigenvalues):
        shift = lam + 1e-10 * scale
        v = rng.standard_normal(n)
        peers = [i for i in range(j) if abs(eigenvalues[i] - lam) < cluster_tol * scale]
        for _ in range(6):
            for i in peers:
                v -= np.dot(vecs[:, i], v) * vecs[:, i]
            v = np.linalg.solve(h - shift * np.eye(n), v)
            v /= np.linalg.norm(v)
        for i in peers:
            v -= np.dot(vecs[:, i], v) * vecs[:, i]
        v /= np.linalg.norm(v)
        vecs[:, j] = v
    return vecs


def rayleigh(h, vecs):
    return np.einsum("ij,ik,kj->j", vecs, h, vecs)


def brute_force_ldos(model, dx, ref):
    """``(offsets, weights)`` of the eigenstate LDOS computed without ``eigh``."""
    if model.n > LDOS_MAX_DIMENSION:
        raise OracleScopeError(f"LDOS oracle accepts n <= {LDOS_MAX_DIMENSION}, got {model.n}")
    h = model.hamiltonian(dx)
    vals = bisect_eigenvalues(h)
    vecs = inverse_iteration(h, vals)
    energies = rayleigh(h, vecs)
    weights = vecs[ref] ** 2
    return energies - model.levels.energies[ref], weights / weights.sum()


def verify_ldos_small(model, dx, ref, tol=1e-8):
    """Compare the eigenstate LDOS against the brute-force path.

    Returns ``(passed, max_deviation)`` over offsets and weights.
    """
    offsets, weights = brute_force_ldos(model, dx, ref)
    dist = eigenstate_ldos(model, dx, ref)
    dev = max(float(np.max(np.abs(offsets - dist.offsets))),
              float(np.max(np.abs(weights - dist.weights))))
    return dev <= tol, dev


def verify_fidelity_small(model, dx, preparation, times, kind="fidelity", tol=1e-8):
    """Compare the spectral decay amplitude against brute-force propagation.

    Returns ``(passed, max_deviation)`` over the time grid.
    """
    if model.n > FIDELITY_MAX_DIMENSION:
        raise OracleScopeError(
            f"propagation oracle accepts n <= {FIDELITY_MAX_DIMENSION}, got {model.n}")
    curve = evolve(model, dx, preparation, times, kind=kind)
    state, _ = _state_vector(preparation, model.n)
    if kind == "fidelity":
        ref = np.array([oracle_fidelity(model, dx, state, t) for t in curve.times])
    else:
        ref = np.array([oracle_propagate(model, dx, state, t) for t in curve.times])
    dev = float(np.max(np.abs(ref - curve.amplitudes)))
    return dev <= tol, dev
