"""Two-magnon spectrum of the infinite uniform chain, resolved by total momentum.

The pair wavefunction psi_K(i, j) = exp(iKR) phi_K(r) reduces the N_R = 2
effective model to a hard-core problem on the relative distance r >= 1. A
move of one excitation by s sites shifts the center of mass by s/2 and picks
up the phase exp(-iKs/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .effective import coeff_g, coeff_j
from .errors import CutoffError, InconclusiveError
from .model import DriveParams
from .units import C6_71S


@dataclass(frozen=True)
class UniformChainCouplings:
    """Translation-invariant couplings of the infinite chain.

    ``v1`` is the nearest-neighbour interaction; V_d = v1 / d^6.
    """

    omega: float
    delta: float
    v1: float
    hop_range: int = 3
    sum_range: int = 200

    @classmethod
    def from_spacing(cls, spacing, drive: DriveParams, c6=C6_71S, **kw):
        return cls(drive.omega, drive.delta, c6 / spacing**6, **kw)

    def v(self, d):
        d = np.abs(np.asarray(d, dtype=float))
        with np.errstate(divide="ignore"):
            return np.where(d > 0, self.v1 / np.where(d > 0, d, 1.0) ** 6, np.inf)

    def j(self, d):
        return coeff_j(self.omega, self.delta, self.v(d))

    def q(self, d, a, b):
        """Hop of length d; spectator at distance a from the origin, b from the destination."""
        vd = self.v(d)
        return 0.5 * (coeff_g(self.omega, self.delta, vd, self.v(a)) + coeff_g(self.omega, self.delta, vd, self.v(b)))

    def u(self, r):
        """Pair interaction U_r with the lattice sum over the (truncated) infinite chain."""
        r = int(r)
        ls = np.arange(-self.sum_range, r + self.sum_range + 1)
        ls = ls[(ls != 0) & (ls != r)]
        vr = float(self.v(r))
        terms = coeff_g(self.omega, self.delta, self.v(ls), self.v(ls - r)) - self.j(ls)
        return vr - 4 * coeff_j(self.omega, self.delta, vr) + float(np.sum(terms))

    def dispersion(self, k):
        """Single-magnon band 2 sum_d J_d cos(kd), uniform on-site energy dropped."""
        k = np.asarray(k, dtype=float)
        return sum(2 * self.j(d) * np.cos(k * d) for d in range(1, self.hop_range + 1))

    def u_table(self, r_max):
        return np.array([self.u(r) for r in range(1, r_max + 1)])


@lru_cache(maxsize=32)
def _hop_terms(couplings: UniformChainCouplings, r_max: int):
    """K-independent hop amplitudes as (row, col, step, value) arrays."""
    rows, cols, steps, vals = [], [], [], []
    for r in range(1, r_max + 1):
        for s in range(-couplings.hop_range, couplings.hop_range + 1):
            if s == 0:
                continue
            # left excitation moves by s (may not land on the right one), then the right one
            for rp, allowed in ((abs(r - s), s != r), (abs(r + s), s != -r)):
                if allowed and rp <= r_max:
                    rows.append(rp - 1)
                    cols.append(r - 1)
                    steps.append(s)
                    vals.append(couplings.q(abs(s), r, rp))
    return np.array(rows), np.array(cols), np.array(steps, dtype=float), np.array(vals, dtype=float)


@lru_cache(maxsize=32)
def _u_table(couplings: UniformChainCouplings, r_max: int):
    return couplings.u_table(r_max)


def relative_hamiltonian(k, couplings: UniformChainCouplings, r_max: int) -> np.ndarray:
    """H(K) on r = 1..r_max (row/column r-1)."""
    if r_max < 5:
        raise CutoffError(f"r_max = {r_max} is too small (need >= 5)")
    h = np.diag(_u_table(couplings, r_max).astype(complex))
    rows, cols, steps, vals = _hop_terms(couplings, r_max)
    np.add.at(h, (rows, cols), vals * np.exp(-0.5j * k * steps))
    return h


def k_grid(n_k):
    """n_k momenta uniformly spaced on (-pi, pi]."""
    return -np.pi + 2 * np.pi * np.arange(1, n_k + 1) / n_k


def continuum_edges(k, couplings: UniformChainCouplings, n_q=4001):
    q = np.linspace(-np.pi, np.pi, n_q)
    e = couplings.dispersion(k / 2 + q) + couplings.dispersion(k / 2 - q)
    return float(e.min()), float(e.max())


@dataclass(frozen=True)
class TwoMagnonBands:
    k_grid: np.ndarray
    bands: np.ndarray            # (n_k, r_max), ascending per K
    wavefunctions: np.ndarray    # (n_k, r_max, r_max), column n is phi_K for band n
    continuum_edges: np.ndarray  # (n_k, 2)
    couplings: UniformChainCouplings = field(repr=False)
    r_max: int = 0
    n_q: int = 4001

    @cached_property
    def probabilities(self):
        return np.abs(self.wavefunctions) ** 2


def compute_bands(couplings: UniformChainCouplings, n_k=101, r_max=60, n_q=4001, ks=None) -> TwoMagnonBands:
    ks = k_grid(n_k) if ks is None else np.asarray(ks, dtype=float)
    bands = np.empty((len(ks), r_max))
    vecs = np.empty((len(ks), r_max, r_max), dtype=complex)
    edges = np.empty((len(ks), 2))
    for n, k in enumerate(ks):
        w, v = np.linalg.eigh(relative_hamiltonian(k, couplings, r_max))
        bands[n], vecs[n] = w, v
        edges[n] = continuum_edges(k, couplings, n_q)
    return TwoMagnonBands(ks, bands, vecs, edges, couplings, r_max, n_q)


@dataclass(frozen=True)
class BoundStateSummary:
    branch: str
    k: float
    energy: float
    bond_length: float
    localization: float
    band_index: int


def _gap_tolerance(bands: TwoMagnonBands, n):
    """Smallest gap that counts as detached at grid point n.

    Covers the q-grid error of the continuum edges and the finite-box
    discretization of the continuum itself, width * (pi / r_max)^2.
    """
    c = bands.couplings
    dq = 2 * np.pi / (bands.n_q - 1)
    curvature = sum(4 * abs(c.j(d)) * d**2 for d in range(1, c.hop_range + 1))
    lo, hi = bands.continuum_edges[n]
    box = (hi - lo) * (np.pi / bands.r_max) ** 2
    return max(curvature * dq**2, box) + 1e-12 * abs(c.v1)


def classify_bound_states(bands: TwoMagnonBands, loc_threshold=0.99, cutoff_rtol=1e-3,
                          tight_bond_length=1.5, check_cutoff=True) -> list[BoundStateSummary]:
    """Flag eigenstates detached from the continuum and localized in r.

    Each candidate energy is recomputed with r_max doubled; a shift beyond
    ``cutoff_rtol`` raises :class:`InconclusiveError`.
    """
    r = np.arange(1, bands.r_max + 1)
    half = bands.r_max // 2
    out = []
    for n, k in enumerate(bands.k_grid):
        lo, hi = bands.continuum_edges[n]
        tol = _gap_tolerance(bands, n)
        prob = bands.probabilities[n]
        cand = []
        for b, e in enumerate(bands.bands[n]):
            if lo - tol < e < hi + tol:
                continue
            if prob[:half, b].sum() <= loc_threshold:
                continue
            cand.append(b)
        if cand and check_cutoff:
            w_big = np.linalg.eigvalsh(relative_hamiltonian(k, bands.couplings, 2 * bands.r_max))
            for b in cand:
                e = bands.bands[n, b]
                shift = np.min(np.abs(w_big - e))
                if shift > cutoff_rtol * max(abs(e), tol):
                    raise InconclusiveError(f"bound-state energy {e:.6g} at K={k:.4f} moves by {shift:.3g} "
                                            "when r_max is doubled")
        for b in cand:
            p = prob[:, b]
            bl = float(np.sum(r * p))
            out.append(BoundStateSummary("tight" if bl < tight_bond_length else "loose", float(k),
                                         float(bands.bands[n, b]), bl, float(p[:2].sum()), b))
    return out


def branch_energies(summaries, branch):
    """(k, energy) arrays of one branch, sorted by k."""
    sel = sorted((s.k, s.energy) for s in summaries if s.branch == branch)
    if not sel:
        return np.empty(0), np.empty(0)
    k, e = np.array(sel).T
    return k, e


def initial_overlap(sites, bands: TwoMagnonBands, summaries=None, chain_length=None) -> dict:
    """Weight of the pair state |i, j> on each bound branch.

    With ``chain_length=None`` the sum over momenta is the infinite-chain
    average over the band grid. With a chain length L the average runs over
    the L ring momenta 2 pi n / L, recomputed from the same couplings.
    """
    i, j = sites
    dist = abs(int(j) - int(i))
    if chain_length is not None:
        ks = 2 * np.pi * np.arange(int(chain_length)) / int(chain_length)
        ks = np.where(ks > np.pi, ks - 2 * np.pi, ks)
        bands = compute_bands(bands.couplings, r_max=bands.r_max, n_q=bands.n_q, ks=ks)
        summaries = None
    if summaries is None:
        summaries = classify_bound_states(bands)
    totals = {"tight": 0.0, "loose": 0.0}
    if dist > bands.r_max:
        return totals
    index = {float(k): n for n, k in enumerate(bands.k_grid)}
    for s in summaries:
        n = index[s.k]
        totals[s.branch] += bands.probabilities[n][dist - 1, s.band_index]
    n_k = len(bands.k_grid)
    return {b: v / n_k for b, v in totals.items()}


def density_of_states(bands: TwoMagnonBands, bins, exclude=()):
    """Per-K histogram of eigenvalues, optionally without bound states.

    ``exclude`` is a sequence of BoundStateSummary to drop.
    """
    drop = {(s.k, s.band_index) for s in exclude}
    hist = np.zeros((len(bands.k_grid), len(bins) - 1))
    for n, k in enumerate(bands.k_grid):
        keep = [e for b, e in enumerate(bands.bands[n]) if (float(k), b) not in drop]
        hist[n], _ = np.histogram(keep, bins=bins)
    return hist


def band_table(bands: TwoMagnonBands, summaries):
    """Rows (K, band, energy, bound, bond_length) for every eigenvalue."""
    flagged = {(s.k, s.band_index): s for s in summaries}
    r = np.arange(1, bands.r_max + 1)
    rows = []
    for n, k in enumerate(bands.k_grid):
        for b, e in enumerate(bands.bands[n]):
            s = flagged.get((float(k), b))
            bl = s.bond_length if s else float(np.sum(r * bands.probabilities[n][:, b]))
            rows.append((float(k), b, float(e), s.branch if s else "", bl))
    return rows
