import numpy as np
import pytest

from loschmidt.dynamics import make_wavepacket
from loschmidt.errors import OracleScopeError
from loschmidt.oracle import (bisect_eigenvalues, brute_force_ldos, negative_count,
                              verify_fidelity_small, verify_ldos_small)

from conftest import small_model, two_level

T = np.linspace(0.0, 10.0, 41)


def test_inertia_count_on_diagonal():
    h = np.diag([0.0, 1.0, 2.0, 3.0])
    assert [negative_count(h, x) for x in (-1.0, 0.5, 2.5, 9.0)] == [0, 1, 3, 4]


def test_bisection_closed_form_two_level():
    h = two_level().hamiltonian(0.5)
    assert bisect_eigenvalues(h) == pytest.approx([0.5 - 2**-0.5, 0.5 + 2**-0.5], abs=1e-14)


def test_two_level_ldos_against_closed_form():
    m = two_level()
    offsets, weights = brute_force_ldos(m, 0.5, 0)
    assert weights == pytest.approx([0.5 + 0.5 * 2**-0.5, 0.5 - 0.5 * 2**-0.5], abs=1e-12)
    ok, dev = verify_ldos_small(m, 0.5, 0)
    assert ok and dev <= 1e-12


def test_zero_perturbation_point_mass():
    m = small_model(8, seed=2)
    offsets, weights = brute_force_ldos(m, 0.0, 4)
    assert weights[4] == pytest.approx(1.0, abs=1e-12) and offsets[4] == pytest.approx(0.0)
    assert verify_ldos_small(m, 0.0, 4)[0]


def test_fifty_random_ldos_cases():
    rng = np.random.default_rng(2024)
    results = []
    for i in range(50):
        m = small_model(8, seed=int(rng.integers(2**31)), g=float(rng.choice([0.0, 1.0])))
        dx = float(rng.uniform(0.05, 3.0))
        results.append(verify_ldos_small(m, dx, int(rng.integers(0, 8))))
    assert all(ok for ok, _ in results), max(d for _, d in results)


def test_ldos_scope():
    with pytest.raises(OracleScopeError):
        verify_ldos_small(small_model(13, seed=1), 0.2, 6)


def test_fidelity_zero_perturbation():
    m = small_model(16, seed=3)
    wp = make_wavepacket(m.levels, 8.0, 2.0, seed=1, min_support=4)
    ok, dev = verify_fidelity_small(m, 0.0, wp, T)
    assert ok and dev < 1e-10


def test_eigenstate_fidelity_equals_survival_in_both_paths():
    m = small_model(16, seed=3)
    assert verify_fidelity_small(m, 0.8, 8, T)[0]
    assert verify_fidelity_small(m, 0.8, 8, T, kind="survival")[0]


def test_ten_random_n32_cases():
    rng = np.random.default_rng(77)
    for _ in range(10):
        m = small_model(32, seed=int(rng.integers(2**31)))
        wp = make_wavepacket(m.levels, 16.0, 3.0, seed=int(rng.integers(2**31)))
        ok, dev = verify_fidelity_small(m, float(rng.uniform(0.05, 2.0)), wp, T)
        assert ok, dev


def test_fidelity_scope():
    with pytest.raises(OracleScopeError):
        verify_fidelity_small(small_model(65, seed=1), 0.2, 30, T)


def test_ldos_oracle_never_calls_library_eigensolvers(monkeypatch):
    m = small_model(8, seed=5)

    def forbidden(*a, **k):
        raise AssertionError("eigensolver called")

    for name in ("eigh", "eig", "eigvalsh", "eigvals"):
        monkeypatch.setattr(np.linalg, name, forbidden)
    offsets, weights = brute_force_ldos(m, 0.7, 3)
    assert weights.sum() == pytest.approx(1.0)
