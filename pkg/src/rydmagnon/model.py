"""Geometry, drive, U(1) sector bases and the microscopic Rydberg Ising model.

Basis convention: a computational basis state is an integer bitmask, bit ``i``
set means atom ``i`` is in the Rydberg state |up>. Full-space vectors are
indexed by the bitmask itself; sector vectors by the combinadic rank.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ValidationError
from .units import C6_71S, from_angular, to_angular

MAX_SITES = 14


def vdw_interaction(r, c6=C6_71S):
    """Van der Waals shift C6 / r**6 (rad/us for c6 in rad/us um^6)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValidationError(f"interatomic distance must be positive, got {r}")
    out = c6 / r_arr**6
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ChainGeometry:
    positions: np.ndarray
    c6: float = C6_71S

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValidationError("positions must have shape (n_sites, 3)")
        if self.c6 <= 0:
            raise ValidationError("c6 must be positive (repulsive vdW)")
        if len(pos) > 1:
            d = self._pair_distances(pos)
            iu = np.triu_indices(len(pos), 1)
            if np.any(d[iu] <= 0):
                raise ValidationError("two atoms share a position")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @staticmethod
    def _pair_distances(pos):
        diff = pos[:, None, :] - pos[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=-1))

    @classmethod
    def chain(cls, n_sites: int, spacing: float, c6: float = C6_71S) -> "ChainGeometry":
        """Ideal chain along x with the given spacing (um)."""
        pos = np.zeros((n_sites, 3))
        pos[:, 0] = spacing * np.arange(n_sites)
        return cls(pos, c6)

    @classmethod
    def from_spacings(cls, spacings: Sequence[float], c6: float = C6_71S) -> "ChainGeometry":
        pos = np.zeros((len(spacings) + 1, 3))
        pos[1:, 0] = np.cumsum(spacings)
        return cls(pos, c6)

    @property
    def n_sites(self) -> int:
        return len(self.positions)

    def distances(self) -> np.ndarray:
        return self._pair_distances(self.positions)

    def interaction_matrix(self, interaction_range: int | None = None) -> np.ndarray:
        """V_ij with zero diagonal.

        ``interaction_range`` keeps only pairs with ``|i - j| <= range`` (site
        index distance); ``None`` keeps the full 1/r^6 tails.
        """
        n = self.n_sites
        d = self.distances()
        np.fill_diagonal(d, np.inf)
        v = self.c6 / d**6
        if interaction_range is not None:
            idx = np.arange(n)
            v[np.abs(idx[:, None] - idx[None, :]) > interaction_range] = 0.0
        return v

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        if self.n_sites < 2:
            return True
        steps = np.diff(self.positions, axis=0)
        return bool(np.allclose(steps, steps[0], rtol=rtol, atol=rtol * np.abs(steps[0]).max()))


@dataclass(frozen=True)
class DriveParams:
    """Global drive; all values angular (rad/us)."""

    omega: float
    delta: float
    addressing: tuple = field(default=())

    def __post_init__(self):
        if self.omega < 0:
            raise ValidationError("omega must be >= 0")
        object.__setattr__(self, "addressing", tuple(float(a) for a in self.addressing))

    @classmethod
    def from_mhz(cls, omega_mhz, delta_mhz, addressing_mhz=()):
        return cls(to_angular(omega_mhz), to_angular(delta_mhz), tuple(to_angular(a) for a in addressing_mhz))

    def to_mhz(self) -> dict:
        return {
            "omega": from_angular(self.omega),
            "delta": from_angular(self.delta),
            "addressing": [from_angular(a) for a in self.addressing],
        }

    def detunings(self, n_sites: int) -> np.ndarray:
        """Per-site detuning delta + addressing[i]."""
        det = np.full(n_sites, self.delta, dtype=float)
        if self.addressing:
            if len(self.addressing) != n_sites:
                raise ValidationError(f"addressing has {len(self.addressing)} entries for {n_sites} sites")
            det += np.asarray(self.addressing)
        return det

    def is_uniform(self) -> bool:
        return not any(self.addressing)


def popcount(masks):
    masks = np.asarray(masks, dtype=np.int64)
    count = np.zeros(masks.shape, dtype=np.int64)
    m = masks.copy()
    while np.any(m):
        count += m & 1
        m >>= 1
    return count


def occupations(masks, n_sites: int) -> np.ndarray:
    """(len(masks), n_sites) 0/1 array of Rydberg occupations."""
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n_sites)) & 1).astype(float)


class SectorBasis:
    """Product states with exactly ``n_excitations`` Rydberg atoms.

    States are ordered by combinadic (colexicographic) rank, which coincides
    with ascending bitmask value, so rank/unrank are O(n_sites).
    """

    def __init__(self, n_sites: int, n_excitations: int):
        if not 0 <= n_excitations <= n_sites:
            raise ValidationError("need 0 <= n_excitations <= n_sites")
        self.n_sites = n_sites
        self.n_excitations = n_excitations
        states = [sum(1 << i for i in c) for c in itertools.combinations(range(n_sites), n_excitations)]
        self.states = np.array(sorted(states), dtype=np.int64)
        self.states.setflags(write=False)

    def __len__(self):
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def rank(self, mask: int) -> int:
        r, k, pos = 0, 0, 0
        mask = int(mask)
        if bin(mask).count("1") != self.n_excitations or mask >> self.n_sites:
            raise ValidationError(f"mask {mask:b} is not in this sector")
        while mask:
            if mask & 1:
                k += 1
                r += comb(pos, k)
            mask >>= 1
            pos += 1
        return r

    def unrank(self, index: int) -> int:
        if not 0 <= index < self.dim:
            raise ValidationError("index out of range")
        mask = 0
        for k in range(self.n_excitations, 0, -1):
            c = k - 1
            while comb(c + 1, k) <= index:
                c += 1
            index -= comb(c, k)
            mask |= 1 << c
        return mask

    def rank_many(self, masks) -> np.ndarray:
        return np.searchsorted(self.states, np.asarray(masks, dtype=np.int64))

    def occupations(self) -> np.ndarray:
        return occupations(self.states, self.n_sites)


def mask_from_sites(sites: Iterable[int]) -> int:
    return sum(1 << int(i) for i in set(sites))


def product_state(n_sites: int, excited: Iterable[int], basis: SectorBasis | None = None) -> np.ndarray:
    """Normalized product state with the given sites excited (0-based)."""
    mask = mask_from_sites(excited)
    if basis is None:
        psi = np.zeros(2**n_sites, dtype=complex)
        psi[mask] = 1.0
    else:
        psi = np.zeros(basis.dim, dtype=complex)
        psi[basis.rank(mask)] = 1.0
    return psi


def ising_diagonal(masks, v: np.ndarray, detunings: np.ndarray) -> np.ndarray:
    """Energies of product states under -sum det_i n_i + sum_{i<j} V_ij n_i n_j."""
    occ = occupations(masks, len(detunings))
    return -occ @ detunings + 0.5 * np.einsum("ai,ij,aj->a", occ, v, occ)


def build_ising_hamiltonian(geometry: ChainGeometry, drive: DriveParams, max_sites: int = MAX_SITES,
                            interaction_range: int | None = None) -> sp.csr_matrix:
    """Sparse H = (Omega/2) sum sx_i - sum (Delta + Delta_A,i) n_i + 1/2 sum_{i!=j} V_ij n_i n_j."""
    n = geometry.n_sites
    if n > max_sites:
        raise CapacityError(f"{n} sites exceeds the configured maximum of {max_sites}")
    dim = 2**n
    masks = np.arange(dim, dtype=np.int64)
    diag = ising_diagonal(masks, geometry.interaction_matrix(interaction_range), drive.detunings(n))
    rows = [masks]
    cols = [masks]
    vals = [diag]
    if drive.omega != 0:
        for j in range(n):
            rows.append(masks)
            cols.append(masks ^ (1 << j))
            vals.append(np.full(dim, 0.5 * drive.omega))
    h = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    h.sum_duplicates()
    h.eliminate_zeros()
    return h


def drive_operator(n_sites: int, omega: float) -> sp.csr_matrix:
    """Off-diagonal part (Omega/2) sum_i sx_i on the full space."""
    dim = 2**n_sites
    masks = np.arange(dim, dtype=np.int64)
    rows = np.tile(masks, n_sites)
    cols = np.concatenate([masks ^ (1 << j) for j in range(n_sites)])
    return sp.csr_matrix((np.full(rows.size, 0.5 * omega), (rows, cols)), shape=(dim, dim))


def number_operator_diagonal(n_sites: int) -> np.ndarray:
    return popcount(np.arange(2**n_sites)).astype(float)


def sector_project(op, basis: SectorBasis):
    """Restrict a full-space operator to the rows/columns of ``basis``."""
    if op.shape != (2**basis.n_sites, 2**basis.n_sites):
        raise ValidationError("operator dimension does not match 2**n_sites")
    idx = basis.states
    if sp.issparse(op):
        return op.tocsr()[idx][:, idx]
    return np.asarray(op)[np.ix_(idx, idx)]


def sector_indices(n_sites: int, n_excitations: int) -> np.ndarray:
    """Full-space indices of the states in a sector (ascending)."""
    return SectorBasis(n_sites, n_excitations).states
