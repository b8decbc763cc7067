"""Second-order Schrieffer-Wolff effective model of the dressed Ising chain.

Closed-form coefficients:

    delta   = Omega^2 / (4 Delta)
    J_ij    = Omega^2 V_ij / (4 Delta (Delta - V_ij))
    G_ijk   = Omega^2 V_ij / (4 (Delta - V_ik) (Delta - V_ik - V_ij))
    Q_ijk   = (G_ijk + G_jik) / 2
    U_ij    = V_ij - 4 J_ij + sum_{l != i,j} (G_lij - J_li)
    mu_i    = -Delta - 2 delta + sum_{j != i} J_ij

``mu_i`` is measured from the (second-order shifted) vacuum energy
``n_sites * delta``; see :func:`vacuum_shift`. All functions take angular
frequencies and require a uniform global detuning unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResonanceError, ValidationError
from .model import (ChainGeometry, DriveParams, SectorBasis, drive_operator, ising_diagonal,
                    occupations, popcount)
from .units import C6_71S

RESONANCE_RTOL = 1e-6


def _check_denominator(den, delta, condition, what):
    den = np.asarray(den, dtype=float)
    if np.any(np.abs(den) < RESONANCE_RTOL * abs(delta)):
        raise ResonanceError(f"{what}: vanishing denominator ({condition})", condition=condition)


def coeff_delta(omega, delta):
    """Light shift Omega^2 / (4 Delta)."""
    if abs(delta) == 0:
        raise ResonanceError("Delta = 0: drive is resonant, perturbation theory invalid", "bare resonance")
    return omega**2 / (4.0 * delta)


def coeff_j(omega, delta, v_ij):
    """Dressing-induced exchange Omega^2 V / (4 Delta (Delta - V))."""
    if delta == 0:
        raise ResonanceError("Delta = 0: drive is resonant", "bare resonance")
    v_ij = np.asarray(v_ij, dtype=float)
    _check_denominator(delta - v_ij, delta, "facilitation Delta = V", "J")
    out = omega**2 * v_ij / (4.0 * delta * (delta - v_ij))
    return float(out) if out.ndim == 0 else out


def coeff_g(omega, delta, v_ij, v_ik):
    """Density-dependent hop i->j with site k excited."""
    v_ij = np.asarray(v_ij, dtype=float)
    v_ik = np.asarray(v_ik, dtype=float)
    _check_denominator(delta - v_ik, delta, "facilitation Delta = V_ik", "G")
    _check_denominator(delta - v_ik - v_ij, delta, "anti-blockade Delta = V_ik + V_ij", "G")
    out = omega**2 * v_ij / (4.0 * (delta - v_ik) * (delta - v_ik - v_ij))
    return float(out) if out.ndim == 0 else out


def vacuum_shift(n_sites, drive: DriveParams):
    """Second-order energy of the all-ground state, n_sites * delta."""
    return n_sites * coeff_delta(drive.omega, drive.delta)


def _require_uniform(drive):
    if not drive.is_uniform():
        raise ValidationError("closed-form coefficients assume a uniform detuning (no addressing)")


@dataclass(frozen=True)
class EffectiveCoefficients:
    delta_ls: float
    j: np.ndarray
    g: np.ndarray
    q: np.ndarray
    u: np.ndarray
    mu: np.ndarray
    v: np.ndarray

    @property
    def n_sites(self):
        return len(self.mu)


def effective_coefficients(geometry: ChainGeometry, drive: DriveParams,
                           interaction_range: int | None = None) -> EffectiveCoefficients:
    _require_uniform(drive)
    om, de = drive.omega, drive.delta
    n = geometry.n_sites
    v = geometry.interaction_matrix(interaction_range)
    dls = coeff_delta(om, de)
    j = coeff_j(om, de, v) * (1 - np.eye(n))

    i_, j_, k_ = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    distinct = (i_ != j_) & (j_ != k_) & (i_ != k_)
    vij = v[:, :, None] * np.ones((1, 1, n))
    vik = v[:, None, :] * np.ones((1, n, 1))
    g = np.zeros((n, n, n))
    if n >= 3:
        g[distinct] = coeff_g(om, de, vij[distinct], vik[distinct])
    q = 0.5 * (g + g.transpose(1, 0, 2))

    # U_ij = V_ij - 4 J_ij + sum_l (G_lij - J_li); g[l, i, j] summed over l
    gsum = np.einsum("lij->ij", g)
    jsum = j.sum(axis=0)[:, None] - j  # sum_{l != i,j} J_li
    u = (v - 4 * j + gsum - jsum) * (1 - np.eye(n))
    mu = -de - 2 * dls + j.sum(axis=1)
    return EffectiveCoefficients(dls, j, g, q, u, mu, v)


def coeff_u(i, j, geometry: ChainGeometry, drive: DriveParams, interaction_range: int | None = None):
    """U_ij by explicit term-by-term summation over the finite chain."""
    if i == j:
        raise ValidationError("U_ij needs i != j")
    _require_uniform(drive)
    om, de = drive.omega, drive.delta
    v = geometry.interaction_matrix(interaction_range)
    total = v[i, j] - 4 * coeff_j(om, de, v[i, j])
    for l in range(geometry.n_sites):
        if l in (i, j):
            continue
        total += coeff_g(om, de, v[l, i], v[l, j]) - coeff_j(om, de, v[l, i])
    return total


def critical_radius(delta, c6=C6_71S):
    """r_c = (C6 / |Delta|)^(1/6)."""
    return (c6 / abs(delta)) ** (1.0 / 6.0)


def dressing_potential(r, omega, delta, c6=C6_71S):
    """Two-atom exchange J(r) = delta / (sign(Delta) (r/r_c)^6 - 1).

    For Delta < 0 this is the soft-core curve |delta| / ((r/r_c)^6 + 1); for
    Delta > 0 it diverges at the facilitation radius r_c. Identical to
    ``coeff_j(omega, delta, c6 / r**6)``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValidationError("r must be positive")
    dls = coeff_delta(omega, delta)
    x = (r / critical_radius(delta, c6)) ** 6
    if delta > 0 and np.any(np.abs(x - 1) < RESONANCE_RTOL):
        raise ResonanceError("r = r_c: facilitation singularity, breakdown of perturbation theory "
                             "and the U(1) symmetry", "facilitation Delta = V")
    out = dls / (np.sign(delta) * x - 1)
    return float(out) if out.ndim == 0 else out


def build_effective_single_magnon(geometry: ChainGeometry, drive: DriveParams,
                                  interaction_range: int | None = None) -> np.ndarray:
    """XY model on the N_R = 1 sector: J_ij hops, mu_i on the diagonal."""
    c = effective_coefficients(geometry, drive, interaction_range)
    return c.j + np.diag(c.mu)


def bond_number(masks) -> np.ndarray:
    """Number of adjacent Rydberg pairs, sum_i n_i n_{i+1}."""
    masks = np.asarray(masks, dtype=np.int64)
    return popcount(masks & (masks >> 1))


def build_effective_two_magnon(geometry: ChainGeometry, drive: DriveParams, onsite: bool = False,
                               interaction_range: int | None = None, fold: bool = False,
                               coefficients: EffectiveCoefficients | None = None,
                               hop_scale: float = 1.0) -> np.ndarray:
    """Density-dependent hopping model on the N_R = 2 sector.

    ``onsite`` adds mu_i + mu_j to each pair energy (only its non-uniform part
    matters for dynamics). ``fold`` drops every hop that changes the bond
    number, which together with ``interaction_range=1`` gives the folded
    XXZ limit. ``hop_scale`` multiplies every Q (0 gives the Ising limit).
    """
    c = coefficients or effective_coefficients(geometry, drive, interaction_range)
    n = geometry.n_sites
    basis = SectorBasis(n, 2)
    h = np.zeros((basis.dim, basis.dim))
    bonds = bond_number(basis.states)
    for col, mask in enumerate(basis.states):
        a, b = [s for s in range(n) if mask >> s & 1]
        h[col, col] = c.u[a, b] + (c.mu[a] + c.mu[b] if onsite else 0.0)
        for mover, spectator in ((a, b), (b, a)):
            for dest in range(n):
                if dest in (a, b):
                    continue
                row = basis.rank((1 << dest) | (1 << spectator))
                if fold and bonds[row] != bonds[col]:
                    continue
                h[row, col] += hop_scale * c.q[mover, dest, spectator]
    return h


def build_effective_sector(geometry: ChainGeometry, drive: DriveParams, n_r: int,
                           interaction_range: int | None = None, fold: bool = False) -> np.ndarray:
    """Full second-order effective Hamiltonian on any N_R sector.

    Elements follow from the resolvent of the diagonal Ising energies, so
    all spectator excitations are kept (no cubic truncation) and per-site
    addressing is allowed. Energies are absolute (include vacuum shift).
    """
    n = geometry.n_sites
    v = geometry.interaction_matrix(interaction_range)
    det = drive.detunings(n)
    basis = SectorBasis(n, n_r)
    e0 = ising_diagonal(basis.states, v, det)
    occ = basis.occupations()
    w2 = 0.25 * drive.omega**2
    scale = max(np.abs(det).max(), 1e-300)
    # local field seen by each site: -Delta_i + sum_k V_ik n_k
    local = -det[None, :] + occ @ v
    gap_remove = np.where(occ > 0, local, np.nan)   # E_A - E_{A-i}
    gap_add = np.where(occ > 0, np.nan, -local)     # E_A - E_{A+j}
    for arr, cond in ((gap_remove, "resonance with N_R - 1"), (gap_add, "resonance with N_R + 1")):
        vals = arr[~np.isnan(arr)]
        if vals.size:
            _check_denominator(vals, scale, cond, "effective sector")
    h = np.diag(e0 + w2 * (np.nansum(1 / gap_remove, axis=1) + np.nansum(1 / gap_add, axis=1)))
    bonds = bond_number(basis.states)
    for col, mask in enumerate(basis.states):
        for i in np.flatnonzero(occ[col]):
            for j in np.flatnonzero(occ[col] == 0):
                new = (int(mask) & ~(1 << i)) | (1 << j)
                row = basis.rank(new)
                if fold and bonds[row] != bonds[col]:
                    continue
                # intermediates A - i and A + j, seen from both A and B = A - i + j
                e_a_rem = gap_remove[col, i]
                e_b_rem = gap_remove[row, j]
                e_a_add = gap_add[col, j]
                e_b_add = gap_add[row, i]
                h[row, col] += 0.5 * w2 * (1 / e_a_rem + 1 / e_b_rem + 1 / e_a_add + 1 / e_b_add)
    return h


@dataclass(frozen=True)
class AnisotropyReport:
    xi1: float
    xi2: float
    xi1_bare: float
    xi2_bare: float
    site: int

    def as_dict(self):
        return {"xi1": self.xi1, "xi2": self.xi2, "xi1_bare": self.xi1_bare,
                "xi2_bare": self.xi2_bare, "site": self.site}


def anisotropies(geometry: ChainGeometry, drive: DriveParams) -> AnisotropyReport:
    """xi_1 = U_{i,i+1}/Q_{i-1,i,i+1}, xi_2 = U_{i,i+2}/Q_{i-1,i,i+2} at the chain center.

    ``*_bare`` use V - 4J in place of the full U lattice sum.
    """
    n = geometry.n_sites
    if n < 5:
        raise ValidationError("anisotropies need at least 5 sites")
    if not geometry.is_uniform():
        raise ValidationError("anisotropies are reported for uniform ideal chains only")
    c = effective_coefficients(geometry, drive)
    i = n // 2
    if i + 2 >= n:
        i = n - 3
    bare = c.v - 4 * c.j
    q1 = c.q[i - 1, i, i + 1]
    q2 = c.q[i - 1, i, i + 2]
    return AnisotropyReport(c.u[i, i + 1] / q1, c.u[i, i + 2] / q2, bare[i, i + 1] / q1, bare[i, i + 2] / q2, i)


def sw_generator(geometry: ChainGeometry, drive: DriveParams, max_sites: int = 10) -> np.ndarray:
    """First-order SW generator on the full space, S_ab = <a|Omega_D|b> / (E_a - E_b).

    Solves [S, H0] + Omega_D = 0. Real antisymmetric, so exp(S) is
    orthogonal; the dressed image of a bare state |a> is exp(-S)|a>.
    """
    n = geometry.n_sites
    if n > max_sites:
        raise ValidationError(f"the dense SW generator is limited to {max_sites} sites")
    masks = np.arange(2**n)
    e = ising_diagonal(masks, geometry.interaction_matrix(), drive.detunings(n))
    om = drive_operator(n, drive.omega).toarray()
    diff = e[:, None] - e[None, :]
    coupled = om != 0
    scale = max(np.abs(drive.detunings(n)).max(), 1e-300)
    if np.any(np.abs(diff[coupled]) < RESONANCE_RTOL * scale):
        raise ResonanceError("degenerate levels coupled by the drive", "resonance")
    s = np.zeros_like(om)
    s[coupled] = om[coupled] / diff[coupled]
    return s


def sw_oracle(geometry: ChainGeometry, drive: DriveParams, n_r: int, include_h0: bool = False,
              max_sites: int = 8) -> np.ndarray:
    """Brute-force second-order SW Hamiltonian on one N_R sector.

    Builds the generator element-wise (:func:`sw_generator`) and projects
    1/2 [S, Omega_D] onto the sector. Dense; meant as a test oracle.
    """
    n = geometry.n_sites
    if n > max_sites:
        raise ValidationError(f"sw_oracle is dense and limited to {max_sites} sites")
    s = sw_generator(geometry, drive, max_sites)
    om = drive_operator(n, drive.omega).toarray()
    idx = SectorBasis(n, n_r).states
    h2 = 0.5 * (s[idx] @ om[:, idx] - om[idx] @ s[:, idx])
    if include_h0:
        e = ising_diagonal(idx, geometry.interaction_matrix(), drive.detunings(n))
        h2 = h2 + np.diag(e)
    return h2


def hermiticity_defect(h) -> float:
    h = np.asarray(h)
    return float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0


def sector_occupations(n_sites, n_r):
    return occupations(SectorBasis(n_sites, n_r).states, n_sites)
