import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loschmidt.errors import DegenerateDistributionError, EdgeEffectError, InvalidArgumentError
from loschmidt.model import randomized_partner, synthetic_model
from loschmidt.spectral import (LdosDistribution, averaged_ldos, core_width, diagonalize,
                                eigenstate_ldos, ldos, ldos_csv, participation_ratio, quantile,
                                reference_indices, wavepacket_ldos)
from loschmidt.dynamics import make_wavepacket

from conftest import small_model, two_level

# closed-form 2x2: E = [0, 1], B = [[0, 1], [1, 0]], dx = 0.5
TWO_LEVEL_EIGS = (0.5 - math.sqrt(2) / 2, 0.5 + math.sqrt(2) / 2)
TWO_LEVEL_WEIGHTS = (0.5 + 0.5 / math.sqrt(2), 0.5 - 0.5 / math.sqrt(2))


def point(offsets, weights):
    w = np.asarray(weights, float)
    return LdosDistribution(np.asarray(offsets, float), w / w.sum(), 0.0, "eigenstate")


def test_two_level_eigenvalues():
    dec = diagonalize(two_level(), 0.5)
    assert dec.eigenvalues == pytest.approx(TWO_LEVEL_EIGS, abs=1e-14)
    assert TWO_LEVEL_EIGS[0] == pytest.approx(-0.2071, abs=1e-4)


def test_two_level_ldos_weights_and_participation():
    dist = eigenstate_ldos(two_level(), 0.5, 0)
    assert dist.weights == pytest.approx(TWO_LEVEL_WEIGHTS, abs=1e-12)
    assert dist.weights[0] == pytest.approx(0.8536, abs=1e-4)
    assert participation_ratio(dist) == pytest.approx(1 / (0.8536**2 + 0.1464**2), abs=1e-3)
    assert participation_ratio(dist) == pytest.approx(4.0 / 3.0, abs=1e-12)


def test_zero_perturbation_is_identity():
    m = small_model(20, seed=1)
    dec = diagonalize(m, 0.0)
    assert np.array_equal(dec.eigenvalues, m.levels.energies)
    assert np.allclose(np.abs(dec.transform), np.eye(20), atol=0)
    d = eigenstate_ldos(m, 0.0, 10)
    assert d.support_size == 1 and d.offsets[np.argmax(d.weights)] == 0.0
    assert core_width(d) == 0.0
    assert participation_ratio(d) == 1.0


def test_decomposition_invariants_large():
    m = synthetic_model(1000, 0, strength=1.0, seed=4)
    dec = diagonalize(m, 2.0)
    v = dec.transform
    assert np.max(np.abs(v.T @ v - np.eye(m.n))) <= 1e-10
    h = m.hamiltonian(2.0)
    resid = np.max(np.abs(h @ v - v * dec.eigenvalues))
    assert resid <= 1e-9 * np.max(np.sum(np.abs(h), axis=1))
    assert np.all(np.diff(dec.eigenvalues) >= 0)


def test_edge_guard():
    m = small_model(50, seed=1)
    with pytest.raises(EdgeEffectError):
        eigenstate_ldos(m, 0.3, 2)
    with pytest.raises(EdgeEffectError):
        eigenstate_ldos(m, 0.3, 45)
    eigenstate_ldos(m, 0.3, 5)


def test_averaged_needs_ten_references():
    m = small_model(50, seed=1)
    with pytest.raises(InvalidArgumentError):
        averaged_ldos(m, 0.3, range(10, 19))


def test_mode_dispatch():
    m = small_model(50, seed=1)
    wp = make_wavepacket(m.levels, 25.0, 4.0, seed=2)
    assert ldos(m, "eigenstate", dx=0.2, ref=25).kind == "eigenstate"
    assert ldos(m, "wavepacket", wavepacket=wp).kind == "wavepacket"
    assert ldos(m, "averaged", dx=0.2, refs=reference_indices(50, 10)).kind == "averaged"
    with pytest.raises(InvalidArgumentError):
        ldos(m, "eigenstate", dx=0.2)
    with pytest.raises(InvalidArgumentError):
        ldos(m, "spectral")


def test_uniform_eleven_point_core_width():
    d = point(np.arange(-5, 6), np.ones(11))
    # riser midpoints (i + 1/2)/11: q(0.85) = 3.85, q(0.15) = -3.85
    assert core_width(d) == pytest.approx(7.7, abs=1e-12)
    assert abs(core_width(d) - 7.0) <= 1.0


def test_binned_quantiles_spread_weight_over_bins():
    d = LdosDistribution(np.arange(-5.0, 6.0), np.full(11, 1 / 11), 0.0, "averaged", 0.0, 1.0)
    assert core_width(d) == pytest.approx(7.7, abs=1e-12)
    # a dominant bin with two weak neighbours across empty bins
    d = LdosDistribution(np.array([-1.0, 0.0, 1.0]), np.array([0.02, 0.96, 0.02]), 0.0,
                         "averaged", 0.0, 0.5)
    assert core_width(d) == pytest.approx(0.7 / 0.96 * 0.5, rel=1e-12)


def test_averaged_width_grows_monotonically_from_zero():
    m = synthetic_model(300, 0, strength=1.0, seed=3)
    refs = reference_indices(300, 40)
    widths = [core_width(averaged_ldos(m, dx, refs)) for dx in (0.05, 0.2, 0.5, 1.0, 2.0)]
    assert widths[0] < 0.5
    assert np.all(np.diff(widths) > 0)


def test_single_point_and_empty():
    assert core_width(point([3.0], [1.0])) == 0.0
    empty = LdosDistribution(np.array([1.0]), np.array([0.0]), 0.0, "eigenstate")
    with pytest.raises(DegenerateDistributionError):
        core_width(empty)
    with pytest.raises(DegenerateDistributionError):
        quantile(empty, 0.5)


def test_uniform_participation():
    assert participation_ratio(point(np.arange(10), np.ones(10))) == pytest.approx(10.0)


@settings(max_examples=50, deadline=None)
@given(w=st.lists(st.floats(0.01, 1.0), min_size=2, max_size=40),
       scale=st.floats(0.01, 100.0))
def test_core_width_scales_linearly(w, scale):
    offsets = np.cumsum(np.ones(len(w))) - len(w) / 2
    a = core_width(point(offsets, w))
    b = core_width(point(offsets * scale, w))
    assert b == pytest.approx(scale * a, rel=1e-12, abs=1e-12)
    assert a >= 0
    assert 1.0 <= participation_ratio(point(offsets, w)) <= len(w) + 1e-9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), dx=st.floats(0.0, 3.0), mode=st.sampled_from(
    ["eigenstate", "wavepacket", "averaged"]))
def test_completeness_all_modes(seed, dx, mode):
    m = small_model(60, seed=seed)
    wp = make_wavepacket(m.levels, 30.0, 5.0, seed=seed)
    d = ldos(m, mode, dx=dx, ref=30, refs=reference_indices(60, 12), wavepacket=wp)
    assert abs(d.weights.sum() - 1.0) <= 1e-10
    assert np.all(d.weights >= 0)


def _second_moment(m, dx, ref):
    row = m.b.entries[ref].copy()
    row[ref] = 0.0
    return dx**2 * np.sum(row**2)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), dx=st.floats(0.01, 5.0), ref=st.integers(6, 33),
       g=st.sampled_from([0.0, 1.0]))
def test_exact_second_moment(seed, dx, ref, g):
    m = synthetic_model(40, g, strength=2.0, seed=seed)
    d = eigenstate_ldos(m, dx, ref)
    assert d.variance() == pytest.approx(_second_moment(m, dx, ref), rel=1e-8)
    p = randomized_partner(m, seed + 1)
    assert _second_moment(p, dx, ref) == pytest.approx(_second_moment(m, dx, ref), rel=1e-12)
    assert eigenstate_ldos(p, dx, ref).variance() == pytest.approx(d.variance(), rel=1e-8)


def test_wavepacket_ldos_moments():
    m = small_model(200, seed=3)
    for sigma in (3.0, 6.0):
        wp = make_wavepacket(m.levels, 100.0, sigma, phase_mode="random_phase", seed=5)
        d = wavepacket_ldos(m, wp)
        assert abs(d.center - 100.0) <= 0.1
        assert d.variance() == pytest.approx(sigma**2, rel=0.1)


def test_averaged_grid_alignment():
    m = small_model(100, seed=3)
    refs = reference_indices(100, 10)
    d = averaged_ldos(m, 0.0, refs)
    assert d.support_size == 1 and d.offsets[np.argmax(d.weights)] == 0.0
    d = averaged_ldos(m, 0.5, refs, bin_width=0.5)
    assert np.allclose(d.offsets / 0.5, np.round(d.offsets / 0.5))


def test_wigner_width_quadruples_when_dx_doubles():
    m = synthetic_model(1000, 0, strength=1.0, bandwidth=200.0, gamma_cl=40.0, seed=1001)
    refs = reference_indices(m.n, 20)
    g1 = core_width(averaged_ldos(m, 1.4, refs))
    g2 = core_width(averaged_ldos(m, 2.8, refs))
    assert 1.0 < g1 and g2 < 40.0
    assert g2 / g1 == pytest.approx(4.0, rel=0.2)


def test_partner_core_width_agrees_after_averaging():
    m = synthetic_model(600, 0, strength=1.0, seed=8)
    p = randomized_partner(m, 9)
    refs = reference_indices(m.n, 100)
    for dx in (1.5, 3.0):
        a = core_width(averaged_ldos(m, dx, refs))
        b = core_width(averaged_ldos(p, dx, refs))
        assert b == pytest.approx(a, rel=0.1)


def test_csv_header():
    m = small_model(30, seed=1)
    text = ldos_csv(eigenstate_ldos(m, 0.4, 15))
    lines = text.splitlines()
    assert lines[0] == "# dx=0.4" and lines[1] == "# mode=eigenstate"
    assert lines[2].startswith("# E0=") and lines[3].startswith("# Gamma=")
    assert lines[4].startswith("# participation=")
    assert lines[5] == "omega,weight"
    assert len(lines) == 6 + 30
