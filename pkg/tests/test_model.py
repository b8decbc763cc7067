from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rydmagnon.errors import CapacityError, ValidationError
from rydmagnon.model import (ChainGeometry, DriveParams, SectorBasis, build_ising_hamiltonian,
                             number_operator_diagonal, popcount, product_state, sector_project,
                             vdw_interaction)
from rydmagnon.units import C6_71S, from_angular, to_angular


def test_vdw_values():
    assert from_angular(vdw_interaction(4.95)) == pytest.approx(69.54, abs=0.01)
    assert from_angular(vdw_interaction(7.0)) == pytest.approx(8.695, abs=1e-3)
    assert vdw_interaction(1e6) < 1e-20
    with pytest.raises(ValidationError):
        vdw_interaction(0.0)


def test_single_atom_drive():
    h = build_ising_hamiltonian(ChainGeometry.chain(1, 5.0), DriveParams(1.0, 0.0)).toarray()
    np.testing.assert_array_equal(h, [[0, 0.5], [0.5, 0]])


def test_pure_interaction():
    geom = ChainGeometry.chain(2, 5.0)
    v = geom.interaction_matrix()[0, 1]
    h = build_ising_hamiltonian(geom, DriveParams(0.0, 0.0)).toarray()
    np.testing.assert_allclose(h, np.diag([0, 0, 0, v]))


def test_two_atom_spectrum_matches_dense():
    geom, drive = ChainGeometry.chain(2, 4.95), DriveParams.from_mhz(1.52, 5.0)
    h = build_ising_hamiltonian(geom, drive)
    v = geom.interaction_matrix()[0, 1]
    om, de = drive.omega, drive.delta
    x = np.array([[0, 1], [1, 0]])
    n = np.diag([0, 1])
    one = np.eye(2)
    dense = 0.5 * om * (np.kron(one, x) + np.kron(x, one)) - de * (np.kron(one, n) + np.kron(n, one)) \
        + v * np.kron(n, n)
    w = np.linalg.eigvalsh(h.toarray())
    np.testing.assert_allclose(w, np.linalg.eigvalsh(dense), atol=1e-10)
    assert w[-1] - w[0] == pytest.approx(np.ptp(np.linalg.eigvalsh(dense)))


def test_capacity():
    with pytest.raises(CapacityError):
        build_ising_hamiltonian(ChainGeometry.chain(15, 5.0), DriveParams(1.0, -1.0))


def test_sector_projection_examples():
    n = 4
    ident = np.eye(2**n)
    basis = SectorBasis(n, 2)
    np.testing.assert_array_equal(sector_project(ident, basis), np.eye(comb(n, 2)))
    ntot = np.diag(number_operator_diagonal(n))
    np.testing.assert_array_equal(sector_project(ntot, basis), 2 * np.eye(basis.dim))

    geom = ChainGeometry.chain(3, 5.0)
    drive = DriveParams.from_mhz(0.0, -2.0, addressing_mhz=(0.0, 1.0, -3.0))
    h = build_ising_hamiltonian(geom, drive)
    proj = sector_project(h, SectorBasis(3, 1)).toarray()
    np.testing.assert_allclose(np.diag(proj), -drive.detunings(3))


@given(st.integers(1, 12), st.data())
def test_rank_roundtrip(n, data):
    k = data.draw(st.integers(0, n))
    basis = SectorBasis(n, k)
    assert basis.dim == comb(n, k)
    assert np.all(popcount(basis.states) == k)
    assert np.all(np.diff(basis.states) > 0)
    for idx in data.draw(st.lists(st.integers(0, basis.dim - 1), min_size=1, max_size=8)):
        assert basis.rank(basis.states[idx]) == idx
        assert basis.unrank(idx) == basis.states[idx]


@given(st.integers(2, 7), st.floats(3.0, 10.0), st.floats(0.1, 5.0), st.floats(-20.0, 20.0))
def test_hermitian_and_u1_blocks(n, spacing, omega, delta):
    geom, drive = ChainGeometry.chain(n, spacing), DriveParams.from_mhz(omega, delta)
    h = build_ising_hamiltonian(geom, drive).tocsr()
    assert abs(h - h.conj().T).max() == 0
    assert h.nnz <= (n + 1) * 2**n
    coo = h.tocoo()
    dn = popcount(coo.row) - popcount(coo.col)
    off = coo.row != coo.col
    assert set(np.abs(dn[off]).tolist()) <= {1}
    diag = h.diagonal()
    nt = number_operator_diagonal(n)
    assert np.all(diag * nt - nt * diag == 0)


@given(st.floats(0.0, 50.0, allow_nan=False))
def test_unit_roundtrip(f):
    assert from_angular(to_angular(f)) == pytest.approx(f, rel=1e-15, abs=0)


def test_product_state_norm():
    psi = product_state(5, [1, 3])
    assert np.linalg.norm(psi) == 1.0
    assert psi[0b01010] == 1.0
    sec = product_state(5, [1, 3], SectorBasis(5, 2))
    assert sec.size == 10 and sec.sum() == 1


def test_geometry_rejects_coincident_sites():
    with pytest.raises(ValidationError):
        ChainGeometry(np.zeros((2, 3)), C6_71S)
    with pytest.raises(ValidationError):
        DriveParams(-1.0, 0.0)
