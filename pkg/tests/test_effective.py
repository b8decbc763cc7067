import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from rydmagnon.effective import (anisotropies, build_effective_single_magnon, build_effective_two_magnon,
                                 build_effective_sector, coeff_delta, coeff_g, coeff_j, coeff_u,
                                 critical_radius, dressing_potential, effective_coefficients,
                                 hermiticity_defect, sw_oracle, vacuum_shift)
from rydmagnon.errors import ResonanceError, ValidationError
from rydmagnon.model import ChainGeometry, DriveParams, SectorBasis
from rydmagnon.units import C6_71S, C6_71S_MHZ, from_angular, to_angular


def mhz(f):
    return to_angular(f)


class TestClosedForms:
    def test_light_shift(self):
        assert from_angular(coeff_delta(mhz(1.52), mhz(5))) == pytest.approx(0.1155, abs=1e-4)
        assert coeff_delta(0.0, 3.0) == 0.0
        assert coeff_delta(1.0, -2.0) < 0
        with pytest.raises(ResonanceError):
            coeff_delta(1.0, 0.0)

    def test_exchange(self):
        v = C6_71S / 4.95**6
        j = from_angular(coeff_j(mhz(1.52), mhz(5), v))
        assert j == pytest.approx(-0.1245, abs=5e-4)
        assert abs(abs(j) - 0.128) <= 0.008
        assert coeff_j(1.0, 2.0, 0.0) == 0.0
        assert from_angular(coeff_j(mhz(2.54), mhz(12), C6_71S / 7**6)) == pytest.approx(0.354, abs=1e-3)

    def test_exchange_facilitation_raises(self):
        with pytest.raises(ResonanceError) as err:
            coeff_j(1.0, 5.0, 5.0 * (1 + 1e-9))
        assert "facilitation" in err.value.condition
        with pytest.raises(ResonanceError) as err:
            coeff_j(1.0, 0.0, 5.0)
        assert err.value.condition == "bare resonance"

    def test_pair_hop(self):
        assert coeff_g(1.3, -2.0, 7.0, 0.0) == pytest.approx(coeff_j(1.3, -2.0, 7.0), rel=1e-15)
        g = coeff_g(mhz(2.54), mhz(12), mhz(0.1359), mhz(8.695))
        assert from_angular(g) == pytest.approx(0.0209, abs=1e-4)
        assert coeff_g(1.0, -3.0, 24.0, 0.375) == pytest.approx(0.0649, abs=1e-4)
        with pytest.raises(ResonanceError):
            coeff_g(1.0, 5.0, 1.0, 4.0)

    def test_u_two_sites_and_lattice_sum(self):
        drive = DriveParams.from_mhz(2.06, -3.0)
        g2 = ChainGeometry.chain(2, 4.95)
        v = g2.interaction_matrix()[0, 1]
        assert coeff_u(0, 1, g2, drive) == pytest.approx(v - 4 * coeff_j(drive.omega, drive.delta, v))
        g7 = ChainGeometry.chain(7, 4.95)
        c = effective_coefficients(g7, drive)
        for i, j in ((3, 4), (3, 5), (0, 6), (1, 2)):
            assert c.u[i, j] == pytest.approx(coeff_u(i, j, g7, drive), rel=1e-12)

    def test_coefficient_symmetries(self):
        c = effective_coefficients(ChainGeometry.chain(6, 6.0), DriveParams.from_mhz(2.0, -4.0))
        np.testing.assert_array_equal(c.j, c.j.T)
        np.testing.assert_array_equal(c.q, c.q.transpose(1, 0, 2))
        assert np.all(np.isfinite(c.g))
        # edges differ from the bulk, mirror symmetric
        assert c.mu[0] != pytest.approx(c.mu[2], rel=1e-6)
        np.testing.assert_allclose(c.mu, c.mu[::-1], rtol=1e-13)


class TestDressingPotential:
    def test_matches_exchange_on_grid(self):
        om = mhz(1.52)
        for de in (mhz(5), mhz(-5)):
            rs = np.linspace(4.0, 12.0, 301)
            rs = rs[np.abs(rs - critical_radius(de)) > 1e-3]
            lhs = dressing_potential(rs, om, de)
            rhs = coeff_j(om, de, C6_71S / rs**6)
            # absolute below 1 rad/us, relative above (the Delta > 0 branch diverges at r_c)
            assert np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))) < 1e-12

    def test_critical_radius(self):
        rc = critical_radius(mhz(5))
        assert rc == pytest.approx((C6_71S_MHZ / 5) ** (1 / 6))
        assert 7.6 < rc < 7.7
        with pytest.raises(ResonanceError):
            dressing_potential(rc, mhz(1.52), mhz(5))

    def test_branch_shapes(self):
        om, de = mhz(1.52), mhz(5)
        dls = coeff_delta(om, de)
        rs = np.linspace(2.0, 15.0, 400)
        jm = dressing_potential(rs, om, -de)
        assert np.all(np.diff(np.abs(jm)) < 0)
        assert np.all(np.abs(jm) <= abs(dls))
        assert abs(dressing_potential(1.0, om, -de)) == pytest.approx(abs(dls), rel=1e-3)
        rc = critical_radius(de)
        assert np.sign(dressing_potential(rc - 0.1, om, de)) != np.sign(dressing_potential(rc + 0.1, om, de))


class TestBuilders:
    def test_two_site_splitting(self):
        geom, drive = ChainGeometry.chain(2, 4.95), DriveParams.from_mhz(2.54, -5.0)
        h = build_effective_single_magnon(geom, drive)
        w = np.linalg.eigvalsh(h)
        j = coeff_j(drive.omega, drive.delta, geom.interaction_matrix()[0, 1])
        assert w[1] - w[0] == pytest.approx(2 * abs(j), abs=1e-12)

    def test_three_site_pair_hop_element(self):
        geom, drive = ChainGeometry.chain(3, 6.0), DriveParams.from_mhz(2.0, -4.0)
        h = build_effective_two_magnon(geom, drive)
        basis = SectorBasis(3, 2)
        c = effective_coefficients(geom, drive)
        a, b = basis.rank(0b101), basis.rank(0b011)
        assert h[b, a] == c.q[1, 2, 0]
        assert hermiticity_defect(h) == 0.0

    def test_hop_scale_zero_is_diagonal(self):
        geom, drive = ChainGeometry.chain(6, 7.0), DriveParams.from_mhz(2.54, -3.3)
        h = build_effective_two_magnon(geom, drive, hop_scale=0.0, interaction_range=1)
        np.testing.assert_array_equal(h, np.diag(np.diag(h)))

    def test_nonuniform_detuning_rejected(self):
        drive = DriveParams.from_mhz(1.0, -3.0, addressing_mhz=(0.0, -5.0, 0.0))
        with pytest.raises(ValidationError):
            effective_coefficients(ChainGeometry.chain(3, 5.0), drive)

    def test_sector_builder_handles_addressing(self):
        geom = ChainGeometry.chain(4, 5.5)
        drive = DriveParams.from_mhz(1.5, -5.0, addressing_mhz=(0.0, -3.0, 0.0, 0.0))
        for n_r in (1, 2, 3):
            np.testing.assert_allclose(build_effective_sector(geom, drive, n_r),
                                       sw_oracle(geom, drive, n_r, include_h0=True), atol=1e-11)


class TestAnisotropies:
    def test_theory_point(self):
        spacing = (C6_71S_MHZ / 24.0) ** (1 / 6)
        rep = anisotropies(ChainGeometry.chain(9, spacing), DriveParams.from_mhz(1.0, -3.0))
        assert rep.xi1 == pytest.approx(684, rel=0.02)
        assert rep.xi2 == pytest.approx(4, rel=0.25)
        assert rep.xi2_bare == pytest.approx(4, rel=0.25)

    def test_experiment_points(self):
        tight = anisotropies(ChainGeometry.chain(6, 7.0), DriveParams.from_mhz(2.54, 12.0))
        assert tight.xi1 == pytest.approx(-35, rel=0.05)
        loose = anisotropies(ChainGeometry.chain(7, 4.95), DriveParams.from_mhz(2.06, -3.0))
        assert loose.xi1 == pytest.approx(539, rel=0.02)
        assert loose.xi2 == pytest.approx(1.24, rel=0.10)
        free = anisotropies(ChainGeometry.chain(7, 8.5), DriveParams.from_mhz(2.06, -3.0))
        assert free.xi2 == pytest.approx(-0.52, rel=0.10)

    def test_quadratic_scaling(self):
        spacing = (C6_71S_MHZ / 24.0) ** (1 / 6)
        geom = ChainGeometry.chain(9, spacing)
        a = anisotropies(geom, DriveParams.from_mhz(1.0, -3.0)).xi1
        b = anisotropies(geom, DriveParams.from_mhz(0.5, -3.0)).xi1
        assert b / a == pytest.approx(4, rel=0.10)

    def test_short_chain(self):
        with pytest.raises(ValidationError):
            anisotropies(ChainGeometry.chain(4, 5.0), DriveParams.from_mhz(1.0, -3.0))


class TestOracle:
    def test_zero_drive(self):
        geom = ChainGeometry.chain(3, 5.0)
        np.testing.assert_array_equal(sw_oracle(geom, DriveParams(0.0, -10.0), 2), 0.0)

    def test_two_atom_exchange_element(self):
        geom, drive = ChainGeometry.chain(2, 4.95), DriveParams.from_mhz(1.52, 5.0)
        o = sw_oracle(geom, drive, 1)
        j = coeff_j(drive.omega, drive.delta, geom.interaction_matrix()[0, 1])
        assert o[0, 1] == pytest.approx(j, rel=1e-12)

    def test_three_atom_pair_hop(self):
        geom, drive = ChainGeometry.chain(3, 5.5), DriveParams.from_mhz(1.5, -4.5)
        o = sw_oracle(geom, drive, 2)
        b = SectorBasis(3, 2)
        q = effective_coefficients(geom, drive).q
        assert o[b.rank(0b011), b.rank(0b101)] == pytest.approx(q[1, 2, 0], rel=1e-12)

    @given(n=st.integers(2, 6), spacing=st.floats(4.5, 9.0), ratio=st.sampled_from([-4.0, -3.0, -2.0, -1.5, 1.5, 2.0, 3.0, 4.0]),
           omega=st.floats(0.8, 3.0), n_r=st.sampled_from([1, 2]))
    def test_closed_forms_match_oracle(self, n, spacing, ratio, omega, n_r):
        geom, drive = ChainGeometry.chain(n, spacing), DriveParams.from_mhz(omega, ratio * omega)
        try:
            oracle = sw_oracle(geom, drive, n_r, include_h0=True)
            if n_r == 1:
                closed = build_effective_single_magnon(geom, drive)
            else:
                closed = build_effective_two_magnon(geom, drive, onsite=True)
        except ResonanceError:
            assume(False)
        closed = closed + vacuum_shift(n, drive) * np.eye(len(closed))
        assert np.max(np.abs(closed - oracle)) <= 1e-10 * np.max(np.abs(oracle))
