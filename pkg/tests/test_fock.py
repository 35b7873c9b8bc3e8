import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellbeables.fock import (
    LatticeSpec,
    apply_annihilator,
    apply_creator,
    configuration_of,
    dense_mode_operators,
    enumerate_sector,
    one_body_operator,
)
from bellbeables.verify import car_violation, jordan_wigner_annihilators


def test_vacuum_sector():
    sec = enumerate_sector(LatticeSpec(1, 2), 0)
    assert sec.dim == 1
    assert int(sec.states[0]) == 0
    assert sec.configurations == [(0,)]


def test_one_quantum_two_sites():
    sec = enumerate_sector(LatticeSpec(2, 2), 1)
    assert sec.dim == 4
    assert set(sec.configurations) == {(1, 0), (0, 1)}
    assert sec.degeneracy((1, 0)) == 2
    assert sec.degeneracy((0, 1)) == 2


def test_two_quanta_d4_degeneracy_16():
    sec = enumerate_sector(LatticeSpec(2, 4), 2)
    assert sec.dim == 28
    assert sec.degeneracy((1, 1)) == 16
    assert sec.degeneracy((2, 0)) == sec.degeneracy((0, 2)) == 6


def test_sector_out_of_range():
    with pytest.raises(ValueError):
        enumerate_sector(LatticeSpec(2, 2), 5)
    with pytest.raises(ValueError):
        enumerate_sector(LatticeSpec(2, 2), -1)


def test_spec_validation():
    for bad in (dict(L=0), dict(L=2, d=3), dict(L=2, mass=0.0), dict(L=7, d=4)):
        with pytest.raises(ValueError):
            LatticeSpec(**bad)


def test_creator_examples():
    assert apply_creator(0, 0) == (1, 1)
    assert apply_creator(1, 0) is None
    assert apply_creator(0b011, 2) == (0b111, 1)
    assert apply_creator(0b001, 1) == (0b011, -1)


def test_annihilator_on_empty():
    assert apply_annihilator(0, 0) is None


@given(st.integers(0, 255), st.integers(0, 7))
def test_annihilate_after_create_is_identity(state, mu):
    if state >> mu & 1:
        return
    new, s1 = apply_creator(state, mu)
    back, s2 = apply_annihilator(new, mu)
    assert back == state
    assert s1 * s2 == 1


def test_configuration_examples():
    spec = LatticeSpec(2, 2)
    assert configuration_of(0, spec) == (0, 0)
    assert configuration_of(0b1111, spec) == (2, 2)
    assert configuration_of(0b1001, spec) == (1, 1)


def _symbolic_sign(state, mu):
    """Anticommute psi^dagger_mu past every creator of lower index, one at a time."""
    occupied = [b for b in range(8) if state >> b & 1]
    swaps = 0
    for b in occupied:
        if b < mu:
            swaps += 1
    return (-1) ** swaps


@given(st.integers(0, 15), st.integers(0, 3))
def test_creator_sign_matches_bookkeeping(state, mu):
    res = apply_creator(state, mu)
    if state >> mu & 1:
        assert res is None
    else:
        assert res == (state | 1 << mu, _symbolic_sign(state, mu))


@pytest.mark.parametrize("L,d", [(2, 2), (1, 4)])
def test_car_exact(L, d):
    M = L * d
    assert car_violation(dense_mode_operators(M)) == 0.0
    assert car_violation(jordan_wigner_annihilators(M)) == 0.0


def test_bitmask_and_kronecker_operators_agree():
    for a, b in zip(dense_mode_operators(4), jordan_wigner_annihilators(4)):
        assert np.array_equal(a, b)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.sampled_from([2]), st.data())
def test_sector_invariants(L, d, data):
    spec = LatticeSpec(L, d)
    omega = data.draw(st.integers(0, spec.n_modes))
    sec = enumerate_sector(spec, omega)
    assert np.all(np.diff(sec.states) > 0)
    assert np.all(np.bitwise_count(sec.states) == omega)
    assert sum(sec.degeneracy(c) for c in sec.configurations) == sec.dim
    for c in sec.configurations:
        assert sum(c) == omega
        assert all(0 <= v <= d for v in c)
    for i, s in enumerate(sec.states):
        assert sec.index_of(int(s)) == i


def test_one_body_operator_matches_dense_product():
    spec = LatticeSpec(2, 2)
    full = enumerate_sector(spec, None)
    a = jordan_wigner_annihilators(4)
    rng = np.random.default_rng(1)
    c = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    ref = sum(c[m, n] * a[m].T @ a[n] for m, n in itertools.product(range(4), repeat=2))
    assert np.max(np.abs(one_body_operator(full, c).toarray() - ref)) < 1e-14
