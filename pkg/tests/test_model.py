import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loschmidt.errors import IngestError, InvalidArgumentError, ResourceLimitError
from loschmidt.model import (ModelMeta, PerturbationMatrix, assemble, build_bandprofile,
                             build_levels, export_model, gaussian_cutoff, ingest_model,
                             randomized_partner, sample_perturbation, sign_randomize,
                             synthetic_model, transform_perturbation)

from conftest import small_model


def test_picket_fence_levels():
    assert build_levels(3, 1.0).energies.tolist() == [0.0, 1.0, 2.0]
    assert build_levels(2, 0.5, e_base=10.0).energies.tolist() == [10.0, 10.5]


def test_jittered_levels_keep_mean_spacing():
    lev = build_levels(1000, 1.0, jitter=0.3, seed=7)
    assert np.all(np.diff(lev.energies) >= 0)
    assert abs(np.mean(np.diff(lev.energies)) - 1.0) < 0.02


@pytest.mark.parametrize("n,delta,jitter", [(1, 1.0, 0.0), (5, 0.0, 0.0), (5, -1.0, 0.0),
                                            (5, 1.0, 1.0)])
def test_bad_levels_rejected(n, delta, jitter):
    with pytest.raises(InvalidArgumentError):
        build_levels(n, delta, jitter=jitter)


def test_flat_band_for_g0():
    p = build_bandprofile(k=50, g=0, hbar=1, delta=1, c_norm=2.0)
    expected = 1.0 / (2 * math.pi) * 2.0 * 50**3
    assert np.allclose(p.variance(np.array([-30.0, 0.0, 0.3, 7.0])), expected, rtol=1e-14)


def test_inverse_frequency_band_for_g1():
    p = build_bandprofile(k=50, g=1, hbar=1, delta=1)
    assert p.variance(2 * p.omega_min) / p.variance(p.omega_min) == pytest.approx(0.5)
    assert p.variance(-3.0) == p.variance(3.0)


def test_k_scaling_for_half_integer_g():
    a = build_bandprofile(k=10, g=0.5, hbar=1, delta=1).variance(4.0)
    b = build_bandprofile(k=20, g=0.5, hbar=1, delta=1).variance(4.0)
    assert b / a == pytest.approx(2**3.5, rel=1e-12)


def test_default_frequency_floor_is_level_scale():
    assert build_bandprofile(k=5, g=1, hbar=2.0, delta=0.5).omega_min == 0.25


@pytest.mark.parametrize("g", [-0.1, 1.5])
def test_g_outside_range_rejected(g):
    with pytest.raises(InvalidArgumentError):
        build_bandprofile(k=5, g=g, hbar=1, delta=1)


def test_sampled_matrix_symmetric_and_deterministic():
    lev = build_levels(50, 1.0)
    prof = build_bandprofile(50, 1, 1, 1, c_norm=1e-6)
    a = sample_perturbation(lev, prof, seed=3)
    b = sample_perturbation(lev, prof, seed=3)
    assert np.array_equal(a.entries, a.entries.T)
    assert np.array_equal(a.entries, b.entries)
    assert a.provenance == "synthetic"


def test_zero_diagonal_policy():
    lev = build_levels(10, 1.0)
    b = sample_perturbation(lev, build_bandprofile(5, 0, 1, 1), diag_policy="zeros", seed=1)
    assert np.all(np.diag(b.entries) == 0)


def test_dimension_cap():
    lev = build_levels(20, 1.0)
    with pytest.raises(ResourceLimitError):
        sample_perturbation(lev, build_bandprofile(5, 0, 1, 1), seed=1, max_dimension=10)


def test_empirical_variance_matches_profile():
    n = 1000
    lev = build_levels(n, 1.0)
    prof = build_bandprofile(50, 1, 1, 1, c_norm=1.6e-6)
    b = sample_perturbation(lev, prof, seed=21).entries
    d = np.abs(np.subtract.outer(lev.energies, lev.energies))
    for w0 in (10.0, 40.0, 150.0):
        band = (d >= w0) & (d <= 1.1 * w0)
        emp = np.mean(b[band] ** 2)
        assert emp == pytest.approx(prof.variance(w0 * 1.05), rel=0.1)


def test_binned_bandprofile_fidelity():
    n = 1000
    lev = build_levels(n, 1.0)
    prof = build_bandprofile(50, 0.5, 1, 1, c_norm=1e-5)
    b = sample_perturbation(lev, prof, seed=5).entries
    i, j = np.triu_indices(n, k=1)
    d = np.abs(lev.energies[i] - lev.energies[j])
    edges = np.arange(1, 400, 20)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (d >= lo) & (d < hi)
        assert sel.sum() >= 200
        predicted = np.mean(prof.variance(d[sel]))
        assert np.mean(b[i[sel], j[sel]] ** 2) == pytest.approx(predicted, rel=0.1)


def test_sign_randomize_preserves_magnitudes_and_diagonal():
    m = small_model(40, seed=2)
    r = sign_randomize(m.b, seed=9)
    assert np.array_equal(np.abs(r.entries), np.abs(m.b.entries))
    assert np.array_equal(np.diag(r.entries), np.diag(m.b.entries))
    assert np.array_equal(r.entries, r.entries.T)
    assert not np.array_equal(r.entries, m.b.entries)
    assert r.provenance == "synthetic+sign-randomized"


def test_cutoff_values():
    m = small_model(30, seed=4)
    c = gaussian_cutoff(m.b, 5.0)
    assert c.entries[0, 5] == pytest.approx(m.b.entries[0, 5] * math.exp(-0.5), rel=1e-15)
    assert c.entries[3, 3] == m.b.entries[3, 3]
    wide = gaussian_cutoff(m.b, 1e6 * 30)
    assert np.allclose(wide.entries, m.b.entries, rtol=1e-9, atol=0)


def test_transform_dispatch():
    m = small_model(12, seed=4)
    both = transform_perturbation(m.b, "both", bandwidth=3.0, seed=1)
    assert both.provenance == "synthetic+cutoff+sign-randomized"
    with pytest.raises(InvalidArgumentError):
        transform_perturbation(m.b, "gaussian_cutoff", bandwidth=0.0)
    with pytest.raises(InvalidArgumentError):
        transform_perturbation(m.b, "rotate")


def test_asymmetric_matrix_rejected():
    with pytest.raises(InvalidArgumentError):
        PerturbationMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]), "synthetic")


def test_hamiltonian_linearity():
    m = small_model(10, seed=8)
    assert np.array_equal(m.hamiltonian(0.0), np.diag(m.levels.energies))
    dx = 0.37
    diff = m.hamiltonian(2 * dx) - m.hamiltonian(dx)
    off = ~np.eye(m.n, dtype=bool)
    # off-diagonal entries are exact; the diagonal carries one rounding of E + dx*B
    assert np.array_equal(diff[off], (dx * m.b.entries)[off])
    assert np.allclose(np.diag(diff), dx * np.diag(m.b.entries), rtol=0,
                       atol=4 * np.finfo(float).eps * np.max(np.abs(m.levels.energies)))


def test_meta_validation():
    with pytest.raises(InvalidArgumentError):
        ModelMeta(1.0, 50.0, 0.0, 1.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        ModelMeta(1.0, 50.0, 0.0, 1.0, -3.0)


def test_assemble_dimension_mismatch():
    m = small_model(6, seed=1)
    with pytest.raises(InvalidArgumentError):
        assemble(build_levels(5, 1.0), m.b, m.meta)


def test_export_ingest_round_trip(tmp_path):
    m = synthetic_model(20, 1, strength=10.0, bandwidth=4.0, seed=77)
    path = export_model(m, tmp_path / "m.txt")
    back = ingest_model(path)
    assert np.array_equal(back.levels.energies, m.levels.energies)
    assert np.array_equal(back.b.entries, m.b.entries)
    assert back.meta == m.meta
    assert back.b.seeds[:-1] == m.b.seeds
    assert back.b.seeds[-1][0] == "ingested"


def _write(tmp_path, text):
    p = tmp_path / "x.txt"
    p.write_text(text)
    return p


HEADER = "# n={n} hbar=1 k=50 g=0 delta=1 gamma_cl=10\n"


def test_dimension_mismatch_reported(tmp_path):
    body = HEADER.format(n=3) + "E 0 0\nE 1 1\nE 2 2\nB 0 0 1\nB 0 1 1\nB 1 1 1\nB 2 2 1\n"
    p = _write(tmp_path, HEADER.format(n=3) + "E 0 0\nE 1 1\nB 0 1 1\n")
    with pytest.raises(IngestError, match="dimension mismatch"):
        ingest_model(p)
    ingest_model(_write(tmp_path, body))


def test_parse_error_has_line_number(tmp_path):
    p = _write(tmp_path, HEADER.format(n=2) + "E 0 0\nE 1 one\n")
    with pytest.raises(IngestError) as info:
        ingest_model(p)
    assert info.value.line == 3
    assert ":3:" in str(info.value)


def test_index_out_of_range(tmp_path):
    p = _write(tmp_path, HEADER.format(n=2) + "E 0 0\nE 1 1\nB 0 5 1\n")
    with pytest.raises(IngestError, match="dimension mismatch"):
        ingest_model(p)


def test_tiny_asymmetry_symmetrized_with_warning(tmp_path):
    text = HEADER.format(n=2) + "E 0 0\nE 1 1\nB 0 1 1.0\nB 1 0 1.000000000001\n"
    p = _write(tmp_path, text)
    with pytest.warns(UserWarning, match="symmetrized"):
        m = ingest_model(p)
    assert m.b.entries[0, 1] == m.b.entries[1, 0]
    assert any("symmetrized" in note for note in m.notes)


def test_inconsistent_spacing_rejected(tmp_path):
    text = "# n=4 hbar=1 k=50 g=0 delta=1 gamma_cl=10\nE 0 0\nE 1 2\nE 2 4\nE 3 6\n"
    with pytest.raises(IngestError, match="spacing"):
        ingest_model(_write(tmp_path, text))


def test_missing_header(tmp_path):
    with pytest.raises(IngestError, match="header"):
        ingest_model(_write(tmp_path, "E 0 0\n"))


def test_partner_keeps_levels_and_meta():
    m = small_model(16, seed=3)
    p = randomized_partner(m, seed=4)
    assert p.levels is m.levels and p.meta == m.meta


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 24), seed=st.integers(0, 2**31), g=st.sampled_from([0.0, 0.5, 1.0]),
       bw=st.floats(0.5, 50.0), flip=st.integers(0, 2**31))
def test_every_constructor_keeps_exact_symmetry(n, seed, g, bw, flip):
    m = synthetic_model(n, g, strength=1.0, seed=seed)
    for b in (m.b, gaussian_cutoff(m.b, bw), sign_randomize(m.b, flip),
              transform_perturbation(m.b, "both", bandwidth=bw, seed=flip)):
        assert np.array_equal(b.entries, b.entries.T)
        assert np.all(np.isfinite(b.entries))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_determinism(seed):
    a = synthetic_model(15, 1, strength=3.0, bandwidth=3.0, randomize=True, seed=seed)
    b = synthetic_model(15, 1, strength=3.0, bandwidth=3.0, randomize=True, seed=seed)
    assert np.array_equal(a.b.entries, b.b.entries)
    assert a.digest() == b.digest()
