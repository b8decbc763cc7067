"""Reported quantities from exact states, populations or shot sets.

Every function accepts either a probability vector over basis bitmasks
(with ``masks`` labelling a sector basis) or a :class:`ShotSet` time slice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import EstimationError, ValidationError
from .measurement import ShotSet, state_populations
from .model import occupations, popcount


def _distribution(source, n_sites=None, masks=None, time_index=0, postselect_nr=None):
    """(probabilities, masks, n_sites, n_shots) from a state, population vector or ShotSet."""
    if isinstance(source, ShotSet):
        counts = source.counts(time_index).astype(float)
        masks = np.arange(len(counts))
        n_sites = source.n_sites
        n_shots = None
    else:
        arr = np.asarray(source)
        probs = state_populations(arr) if np.iscomplexobj(arr) or arr.ndim == 2 else arr.astype(float)
        if masks is None:
            masks = np.arange(len(probs))
            if n_sites is None:
                n_sites = int(round(np.log2(len(probs))))
                if 1 << n_sites != len(probs):
                    raise ValidationError("full-space vector length must be a power of two")
        elif n_sites is None:
            raise ValidationError("n_sites is required with sector masks")
        counts, n_shots = probs, None
    masks = np.asarray(masks, dtype=np.int64)
    if postselect_nr is not None:
        keep = popcount(masks) == postselect_nr
        counts, masks = counts[keep], masks[keep]
    total = counts.sum()
    if isinstance(source, ShotSet):
        n_shots = int(total)
    if total <= 0:
        raise EstimationError("empty distribution (no shots or zero weight after postselection)")
    return counts / total, masks, n_sites, n_shots


def rydberg_density(source, n_sites=None, masks=None, time_index=0, postselect_nr=None) -> np.ndarray:
    """<n_i> per site; ``postselect_nr`` renormalizes inside one N_R sector."""
    p, masks, n, _ = _distribution(source, n_sites, masks, time_index, postselect_nr)
    return p @ occupations(masks, n)


def mean_square_displacement(density, origin: int, n_r: float | None = None) -> float:
    """sum_i (i - origin)^2 <n_i> / N_R in lattice units."""
    density = np.asarray(density, dtype=float)
    n_r = density.sum() if n_r is None else n_r
    if n_r <= 0:
        raise EstimationError("density has zero weight")
    return float(np.sum((np.arange(len(density)) - origin) ** 2 * density) / n_r)


@dataclass(frozen=True)
class CorrelatorMap:
    """Gamma_ij = <n_i n_j> on pairs i < j (upper triangle; diagonal zero)."""

    gamma: np.ndarray
    source: str = "exact"
    n_shots: int | None = None

    @property
    def total(self) -> float:
        return float(np.triu(self.gamma, 1).sum())

    def long_form(self):
        n = len(self.gamma)
        return [(i, j, float(self.gamma[i, j])) for i in range(n) for j in range(i + 1, n)]


def correlator(source, n_sites=None, masks=None, time_index=0, postselect_nr=2) -> CorrelatorMap:
    """Two-site correlator; equals the normally ordered sigma+ sigma+ sigma- sigma- on hard-core states.

    Shot data and full-space states are postselected to ``postselect_nr``
    first (pass None to skip).
    """
    p, masks, n, shots = _distribution(source, n_sites, masks, time_index, postselect_nr)
    occ = occupations(masks, n)
    g = np.triu((occ * p[:, None]).T @ occ, 1)
    return CorrelatorMap(g, "shots" if isinstance(source, ShotSet) else "exact", shots)


def participation_ratios(gamma: CorrelatorMap) -> tuple[float, float]:
    """(BR_1, BR_2): weight on NN and NNN pairs relative to Gamma_tot."""
    g = gamma.gamma if isinstance(gamma, CorrelatorMap) else np.triu(np.asarray(gamma), 1)
    tot = float(np.triu(g, 1).sum())
    if tot <= 0:
        raise EstimationError("Gamma_tot = 0; participation ratios undefined")
    return float(np.trace(g, 1) / tot), float(np.trace(g, 2) / tot)


def bond_count(source, n_sites=None, masks=None, time_index=0, postselect_nr=None) -> float:
    """<N_RR> = sum_i <n_i n_{i+1}>."""
    p, masks, n, _ = _distribution(source, n_sites, masks, time_index, postselect_nr)
    return float(p @ popcount(masks & (masks >> 1)))


def log_slope(t, y):
    """Local exponent d log y / d log t by central differences on the given grid."""
    return np.gradient(np.log(np.asarray(y, dtype=float)), np.log(np.asarray(t, dtype=float)))


def _design(t, omegas):
    cols = [np.ones_like(t)]
    for om in omegas:
        cols += [np.cos(om * t), np.sin(om * t)]
    return np.column_stack(cols)


def _fit_residual(t, y, omegas):
    a = _design(t, omegas)
    coef = np.linalg.lstsq(a, y, rcond=None)[0]
    return y - a @ coef, coef


def dominant_frequency(t, y, n_components: int = 3, pad: int = 16) -> float:
    """Angular frequency of the strongest oscillation in y(t) (uniform grid).

    Components are found one at a time from zero-padded FFT peaks of the
    running residual, then all frequencies are refined jointly by nonlinear
    least squares (amplitudes solved linearly). Fitting the weaker
    components too keeps them from biasing the dominant one.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 4 + 3 * n_components:
        raise ValidationError("too few samples for the requested number of components")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValidationError("dominant_frequency needs a uniform time grid")
    n = pad * len(t)
    w = 2 * np.pi * np.fft.rfftfreq(n, dt)
    omegas: list[float] = []
    for _ in range(n_components):
        r, _ = _fit_residual(t, y, omegas)
        spec = np.abs(np.fft.rfft(r - r.mean(), n))
        spec[0] = 0.0
        omegas.append(float(w[int(np.argmax(spec))]))
        fit = least_squares(lambda om: _fit_residual(t, y, om)[0], omegas, x_scale="jac",
                            bounds=(1e-9, w[-1]), xtol=1e-14, ftol=1e-14, gtol=1e-14)
        omegas = list(fit.x)
    _, coef = _fit_residual(t, y, omegas)
    amps = np.hypot(coef[1::2], coef[2::2])
    return float(omegas[int(np.argmax(amps))])


def krylov_dimension(h, psi0, tol: float = 1e-10, max_dim: int | None = None) -> int:
    """Dimension of span{psi0, H psi0, H^2 psi0, ...} (Gram-Schmidt rank)."""
    v = np.asarray(psi0, dtype=complex)
    v = v / np.linalg.norm(v)
    basis = [v]
    limit = h.shape[0] if max_dim is None else max_dim
    scale = max(1.0, float(abs(h).max()))
    while len(basis) < limit:
        w = h @ basis[-1]
        for q in basis:
            w = w - np.vdot(q, w) * q
        for q in basis:
            w = w - np.vdot(q, w) * q
        nrm = np.linalg.norm(w)
        if nrm < tol * scale:
            break
        basis.append(w / nrm)
    return len(basis)


def observable_table(result, n_sites: int, origin: int, n_r: int, postselect: bool = True):
    """Per-time density, <x^2>, bond count and (for N_R = 2) BR_1, BR_2 from populations."""
    pops = result.populations()
    masks = result.masks if result.masks is not None else np.arange(pops.shape[1])
    rows = []
    sel = n_r if postselect else None
    for k, t in enumerate(result.times):
        dens = rydberg_density(pops[k], n_sites, masks, postselect_nr=sel)
        row = {"time_us": float(t), "msd": mean_square_displacement(dens, origin, n_r),
               "bonds": bond_count(pops[k], n_sites, masks, postselect_nr=sel)}
        row.update({f"n{i}": float(x) for i, x in enumerate(dens)})
        if n_r == 2:
            br1, br2 = participation_ratios(correlator(pops[k], n_sites, masks, postselect_nr=2))
            row.update(br1=br1, br2=br2)
        rows.append(row)
    return rows
