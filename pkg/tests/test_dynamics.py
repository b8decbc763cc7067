import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from rydmagnon.config import preset
from rydmagnon.dynamics import (NoiseModel, dephasing_rates, disorder_ensemble, evolve_lindblad,
                                evolve_unitary, hrs_msd, krylov_step, run_experiment)
from rydmagnon.effective import build_effective_sector, effective_coefficients
from rydmagnon.errors import ValidationError
from rydmagnon.model import (ChainGeometry, DriveParams, SectorBasis, build_ising_hamiltonian, popcount,
                             product_state)
from rydmagnon.observables import (correlator, dominant_frequency, log_slope, observable_table,
                                   participation_ratios)
from rydmagnon.units import to_angular


def chain(n=4, spacing=5.5, omega=1.5, delta=-4.5):
    return ChainGeometry.chain(n, spacing), DriveParams.from_mhz(omega, delta)


class TestUnitary:
    def test_zero_hamiltonian(self):
        psi = product_state(3, [1])
        res = evolve_unitary(np.zeros((8, 8)), psi, np.linspace(0, 5, 6))
        np.testing.assert_array_equal(res.states, np.tile(psi, (6, 1)))

    def test_norm_over_ten_microseconds(self):
        h = build_ising_hamiltonian(*chain(6))
        res = evolve_unitary(h, product_state(6, [2, 3]), np.linspace(0, 10, 41))
        assert np.max(np.abs(np.linalg.norm(res.states, axis=1) - 1)) < 1e-9

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValidationError):
            evolve_unitary(np.array([[0, 1], [0, 0]]), np.array([1, 0]), [0, 1])

    def test_krylov_matches_eigh(self):
        h = build_ising_hamiltonian(*chain(8))
        psi = product_state(8, [3])
        t = np.linspace(0, 2, 5)
        a = evolve_unitary(h, psi, t, method="eigh").states
        b = evolve_unitary(h, psi, t, method="krylov").states
        assert np.max(np.abs(a - b)) < 1e-10
        one = krylov_step(sp.csr_matrix(h), psi.astype(complex), 0.7)
        assert np.linalg.norm(one) == pytest.approx(1.0, abs=1e-12)

    def test_two_atom_oscillation_matches_dense_spectrum(self):
        geom, drive = ChainGeometry.chain(2, 4.95), DriveParams.from_mhz(1.52, 5.0)
        h = build_ising_hamiltonian(geom, drive)
        t = np.linspace(0, 8, 321)
        p = evolve_unitary(h, product_state(2, [1]), t).populations()
        y = p[:, 1] / (p[:, 1] + p[:, 2])
        # oracle: splitting of the two dressed single-excitation eigenstates
        w, v = np.linalg.eigh(h.toarray())
        weight = np.abs(v[1]) ** 2 + np.abs(v[2]) ** 2
        top = np.sort(np.argsort(weight)[-2:])
        split = abs(w[top[1]] - w[top[0]])
        assert dominant_frequency(t, y) == pytest.approx(split, rel=1e-3)
        assert split / (2 * np.pi) == pytest.approx(0.24, abs=0.01)

    @pytest.mark.parametrize("sign", [-1.0, 1.0])
    def test_effective_tracks_exact_two_magnons(self, sign):
        geom, drive = ChainGeometry.chain(4, 6.0), DriveParams.from_mhz(1.5, sign * 6.0)
        j = abs(effective_coefficients(geom, drive).j[0, 1])
        t = np.pi / j
        basis = SectorBasis(4, 2)
        psi = product_state(4, [1, 2])
        exact = evolve_unitary(build_ising_hamiltonian(geom, drive), psi, [t]).states[0][basis.states]
        eff = evolve_unitary(build_effective_sector(geom, drive, 2), psi[basis.states], [t]).states[0]
        assert abs(np.vdot(eff, exact)) ** 2 / np.linalg.norm(exact) ** 2 >= 0.99

    def test_effective_single_magnon_fourth_order_gap(self):
        # documented: a lone magnon at |Delta/Omega| = 4 loses a few percent to O(Omega^4) terms
        geom, drive = ChainGeometry.chain(4, 6.0), DriveParams.from_mhz(1.5, -6.0)
        j = abs(effective_coefficients(geom, drive).j[0, 1])
        basis = SectorBasis(4, 1)
        psi = product_state(4, [1])
        exact = evolve_unitary(build_ising_hamiltonian(geom, drive), psi, [np.pi / j]).states[0][basis.states]
        eff = evolve_unitary(build_effective_sector(geom, drive, 1), psi[basis.states], [np.pi / j]).states[0]
        ov = abs(np.vdot(eff, exact)) ** 2 / np.linalg.norm(exact) ** 2
        assert 0.9 < ov < 0.99


class TestLindblad:
    def test_closed_limit(self):
        h = build_ising_hamiltonian(*chain(4, spacing=7.0))
        psi = product_state(4, [1])
        t = np.linspace(0, 0.5, 6)
        u = evolve_unitary(h, psi, t).states
        rho = evolve_lindblad(h, psi, NoiseModel(), t).states
        assert np.max(np.abs(rho - np.einsum("ti,tj->tij", u, u.conj()))) < 1e-8

    def test_trace_and_positivity_with_experimental_noise(self):
        h = build_ising_hamiltonian(*chain(4, spacing=7.0))
        res = evolve_lindblad(h, product_state(4, [1, 2]), NoiseModel.experimental(), np.linspace(0, 1, 11))
        tr = np.real(np.einsum("tii->t", res.states))
        assert np.max(np.abs(tr - 1)) < 1e-7
        assert min(np.linalg.eigvalsh(r).min() for r in res.states) > -1e-7
        assert np.max(np.abs(res.states - res.states.conj().transpose(0, 2, 1))) < 1e-12

    def test_two_site_pure_dephasing(self):
        gamma = 0.8
        psi = np.zeros(4)
        psi[[1, 2]] = 1 / np.sqrt(2)
        t = np.linspace(0, 3, 7)
        res = evolve_lindblad(np.zeros((4, 4)), psi, NoiseModel(gamma_ind=gamma), t)
        coh = np.abs(res.states[:, 1, 2])
        # L_j = sqrt(gamma/2) n_j on both sites: |01> and |10> differ at two sites
        np.testing.assert_allclose(coh, 0.5 * np.exp(-gamma * t / 2), rtol=1e-9)
        np.testing.assert_allclose(np.real(res.states[:, 1, 1]), 0.5, atol=1e-12)

    def test_collective_dephasing_is_decoherence_free_in_sector(self):
        n = 3
        masks = np.arange(8)
        rates = dephasing_rates(masks, n, NoiseModel(gamma_col=5.0))
        same = popcount(masks)[:, None] == popcount(masks)[None, :]
        assert np.all(rates[same] == 0)
        psi = np.zeros(8, dtype=complex)
        psi[[0b001, 0b010, 0b100]] = 1 / np.sqrt(3)
        psi_mix = psi.copy()
        psi_mix[0] = 1.0
        psi_mix /= np.linalg.norm(psi_mix)
        t = np.linspace(0, 4, 5)
        res = evolve_lindblad(np.zeros((8, 8)), psi_mix, NoiseModel(gamma_col=5.0), t)
        inside = res.states[:, [1, 2, 4]][:, :, [1, 2, 4]]
        assert np.max(np.abs(inside - inside[0])) < 1e-9
        # N_R = 0 vs N_R = 1 coherence decays at gamma_col / 4 (Delta N = 1)
        assert abs(res.states[-1, 0, 1]) == pytest.approx(abs(res.states[0, 0, 1]) * np.exp(-5.0), rel=1e-6)

    def test_split_matches_rk4(self):
        h = build_ising_hamiltonian(*chain(4))
        t = np.linspace(0, 0.5, 3)
        psi = product_state(4, [1, 2])
        a = evolve_lindblad(h, psi, NoiseModel.experimental(), t).states
        b = evolve_lindblad(h, psi, NoiseModel.experimental(), t, method="split").states
        assert np.max(np.abs(a - b)) < 1e-6

    def test_amplitude_damping_knob(self):
        noise = NoiseModel(t1_rydberg=2.0, amplitude_damping=True)
        t = np.linspace(0, 1, 5)
        res = evolve_lindblad(np.zeros((4, 4)), product_state(2, [0]), noise, t)
        p = res.populations()
        np.testing.assert_allclose(p[:, 1], np.exp(-t / 2.0), rtol=1e-8)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        with pytest.raises(ValidationError):
            evolve_lindblad(np.zeros((4, 4)), product_state(2, [0]), noise, t, method="split")


class TestHRS:
    def test_origin(self):
        assert hrs_msd(21, 1.0, 0.5, [0.0])[0] == 0.0

    def test_ballistic_start(self):
        j = 1.0
        t = np.linspace(0.01, 0.2, 20) / j
        x2 = hrs_msd(61, j, 0.0, t)
        slope = np.polyfit(np.log(t), np.log(x2), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.05)
        np.testing.assert_allclose(x2, 2 * (j * t) ** 2, rtol=0.02)

    def test_diffusive_late(self):
        gamma, j = 2.0, 0.5
        t = np.geomspace(5, 20, 7) / gamma
        x2 = hrs_msd(61, j, gamma, t, step_fraction=0.05)
        assert log_slope(t, x2)[-1] == pytest.approx(1.0, abs=0.1)


class TestDisorder:
    def test_zero_width(self):
        base = ChainGeometry.chain(4, 5.0)
        for g in disorder_ensemble(base, NoiseModel(), 3, seed=1):
            np.testing.assert_array_equal(g.positions, base.positions)

    def test_variance_converges(self):
        base = ChainGeometry.chain(2, 5.0)
        noise = NoiseModel(sigma_radial=0.1, sigma_axial=0.3)
        n = 10_000
        d = np.array([g.positions - base.positions for g in disorder_ensemble(base, noise, n, seed=3)])
        d = d.reshape(-1, 3)
        for axis, sig in enumerate((0.1, 0.1, 0.3)):
            var = d[:, axis].var(ddof=1)
            se = sig**2 * np.sqrt(2 / (len(d) - 1))
            assert abs(var - sig**2) < 3 * se

    def test_interaction_spread(self):
        a, sr, sa = 4.95, 0.1, 0.3
        base = ChainGeometry.chain(2, a)
        geoms = disorder_ensemble(base, NoiseModel(sigma_radial=sr, sigma_axial=sa), 4000, seed=5)
        v = np.array([g.interaction_matrix()[0, 1] for g in geoms])
        v0 = base.interaction_matrix()[0, 1]
        # bond along x: first order only the x (radial) offsets of both atoms enter
        predicted = 6 * np.sqrt(2) * sr / a
        assert np.std(v) / v0 == pytest.approx(predicted, rel=0.1)

    @given(st.integers(0, 2**63))
    def test_seeded(self, seed):
        base = ChainGeometry.chain(3, 5.0)
        noise = NoiseModel(sigma_radial=0.1, sigma_axial=0.3)
        a = disorder_ensemble(base, noise, 2, seed)
        b = disorder_ensemble(base, noise, 2, seed)
        assert all(np.array_equal(x.positions, y.positions) for x, y in zip(a, b))


class TestExperiments:
    def test_quantum_walk_interference(self):
        cfg = preset("quantum-walk").replace(run={"n_times": 11, "t_max_us": 1.0})
        res, shots = run_experiment(cfg)
        assert shots is None
        rows = observable_table(res, 7, origin=3, n_r=1)
        row = rows[8]
        assert row["time_us"] == pytest.approx(0.8)
        profile = np.array([row[f"n{i}"] for i in range(7)])
        assert profile.sum() == pytest.approx(1.0, abs=1e-12)
        by_dist = [profile[np.abs(np.arange(7) - 3) == d].mean() for d in range(4)]
        # a Gaussian spread would peak at the origin and fall off monotonically
        assert by_dist[0] < by_dist[1]
        assert np.any(np.diff(by_dist) < 0)

    def test_frozen_pair_stays_bound(self):
        res, _ = run_experiment(preset("tight-pair-frozen").replace(run={"n_times": 15}))
        pops = res.populations()
        for k in range(len(res.times)):
            br1, _ = participation_ratios(correlator(pops[k], 6))
            assert br1 > 0.9

    def test_thread_count_does_not_change_result(self):
        cfg = preset("tight-pair-frozen").replace(
            noise={"sigma_radial_um": 0.1, "sigma_axial_um": 0.3},
            run={"n_times": 5, "disorder_samples": 3, "shots": 50, "seed": 9})
        a, sa = run_experiment(cfg, threads=1)
        b, sb = run_experiment(cfg, threads=3)
        np.testing.assert_array_equal(a.states, b.states)
        assert all(np.array_equal(x, y) for x, y in zip(sa.records, sb.records))

    def test_leakage_single_excitation(self):
        # |Delta/Omega| = 3, adiabatically dressed: weight outside N_R = 1 below 15% up to pi/J
        geom = ChainGeometry.chain(5, 5.0)
        drive = DriveParams.from_mhz(1.5, -4.5)
        j = abs(effective_coefficients(geom, drive).j[1, 2])
        cfg = preset("quantum-walk").replace(
            geometry={"n_sites": 5, "spacing_um": 5.0}, drive={"omega_mhz": 1.5, "delta_mhz": -4.5},
            init={"excited": (2,), "addressing_mhz": ()},
            run={"t_max_us": float(np.pi / j), "n_times": 31, "dressing": "adiabatic"})
        res, _ = run_experiment(cfg)
        assert 1 - res.observable_series["sector_weight"].min() < 0.15

    def test_two_atom_sudden_leakage(self):
        res, _ = run_experiment(preset("two-atom-exchange"))
        assert 1 - res.observable_series["sector_weight"].min() < 0.15
