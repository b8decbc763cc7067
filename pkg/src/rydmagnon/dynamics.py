"""Time evolution: closed-system propagation, dephasing master equation, HRS walk,
positional disorder and the experiment orchestration.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal, expm

from .effective import build_effective_sector, sw_generator
from .errors import IntegrationError, ValidationError
from .model import (ChainGeometry, DriveParams, SectorBasis, build_ising_hamiltonian, mask_from_sites,
                    occupations, popcount)
from .rng import component_rng
from .units import to_angular

EIGH_MAX_DIM = 4096


@dataclass(frozen=True)
class NoiseModel:
    """Rates in rad/us, lengths in um, lifetime in us."""

    gamma_ind: float = 0.0
    gamma_col: float = 0.0
    t1_rydberg: float = 43.0
    sigma_radial: float = 0.0
    sigma_axial: float = 0.0
    amplitude_damping: bool = False

    def __post_init__(self):
        if min(self.gamma_ind, self.gamma_col, self.sigma_radial, self.sigma_axial) < 0:
            raise ValidationError("noise rates and widths must be >= 0")
        if self.t1_rydberg <= 0:
            raise ValidationError("t1_rydberg must be > 0")

    @classmethod
    def experimental(cls) -> "NoiseModel":
        """Fitted experimental values: gamma_ind = 2pi x 0.2 MHz, gamma_col = 2pi x 0.4 MHz."""
        return cls(to_angular(0.2), to_angular(0.4), 43.0, 0.1, 0.3)

    @classmethod
    def from_spec(cls, spec) -> "NoiseModel":
        return cls(to_angular(spec.gamma_ind_mhz), to_angular(spec.gamma_col_mhz), spec.t1_us,
                   spec.sigma_radial_um, spec.sigma_axial_um, spec.amplitude_damping)

    @property
    def is_coherent(self) -> bool:
        return self.gamma_ind == 0 and self.gamma_col == 0 and not self.amplitude_damping

    @property
    def has_disorder(self) -> bool:
        return self.sigma_radial > 0 or self.sigma_axial > 0


@dataclass
class EvolutionResult:
    times: np.ndarray
    states: np.ndarray                       # kets (n_t, d), density matrices (n_t, d, d) or populations
    kind: str = "ket"                        # "ket", "density" or "populations"
    masks: np.ndarray | None = None          # basis labels (bitmasks) of the state index
    observable_series: dict = field(default_factory=dict)

    def populations(self) -> np.ndarray:
        if self.kind == "ket":
            return np.abs(self.states) ** 2
        if self.kind == "density":
            return np.real(np.einsum("tii->ti", self.states))
        return self.states


def _check_hermitian(h, rtol=1e-12):
    if h.shape[0] != h.shape[1]:
        raise ValidationError("Hamiltonian must be square")
    if sp.issparse(h):
        diff = abs(h - h.conj().T)
        defect = diff.max() if diff.nnz else 0.0
        scale = abs(h).max() if h.nnz else 0.0
    else:
        defect = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
        scale = np.max(np.abs(h)) if h.size else 0.0
    if defect > rtol * max(scale, 1.0):
        raise ValidationError(f"Hamiltonian is not Hermitian (defect {defect:.3g})")


def _times(times):
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValidationError("times must be non-negative and non-decreasing")
    return t


def krylov_step(h, v, dt, m=30, tol=1e-12):
    """exp(-i h dt) v by Lanczos with adaptive substeps."""
    norm = np.linalg.norm(v)
    if norm == 0 or dt == 0:
        return v.copy()
    w = v / norm
    remaining, tau = dt, dt
    while remaining > 0:
        tau = min(tau, remaining)
        basis = [w]
        alpha, beta = [], []
        q_prev, b_prev = np.zeros_like(w), 0.0
        for j in range(m):
            z = h @ basis[j]
            a = np.vdot(basis[j], z).real
            z = z - a * basis[j] - b_prev * q_prev
            for q in basis:   # full reorthogonalization; m is small
                z -= np.vdot(q, z) * q
            alpha.append(a)
            b = np.linalg.norm(z)
            beta.append(b)
            if b < 1e-14 * max(1.0, abs(a)):
                break
            q_prev, b_prev = basis[j], b
            basis.append(z / b)
        k = len(alpha)
        evals, evecs = eigh_tridiagonal(np.array(alpha), np.array(beta[:k - 1]))
        # |c[-1]| cannot resolve below roundoff, so the target has a floor
        floor = 64 * np.finfo(float).eps * beta[k - 1]
        for _ in range(200):
            c = evecs @ (np.exp(-1j * evals * tau) * evecs[0].conj())
            err = beta[k - 1] * abs(c[-1])
            if err <= max(tol * tau / dt, floor) or beta[k - 1] < 1e-14:
                break
            tau *= 0.5
        else:
            raise IntegrationError(f"Krylov step size underflow (error estimate {err:.3g})")
        w = np.array(basis[:k]).T @ c
        w /= np.linalg.norm(w)
        remaining -= tau
        tau *= 2.0
    return norm * w


def evolve_unitary(h, psi0, times, method: str = "auto", krylov_dim: int = 30, masks=None) -> EvolutionResult:
    """|psi(t)> = exp(-iHt)|psi0> on the time grid (times measured from psi0)."""
    _check_hermitian(h)
    t = _times(times)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (h.shape[0],):
        raise ValidationError("state dimension does not match the Hamiltonian")
    dim = h.shape[0]
    if method == "auto":
        method = "eigh" if dim <= EIGH_MAX_DIM else "krylov"
    if method == "eigh":
        dense = h.toarray() if sp.issparse(h) else np.asarray(h)
        e, v = np.linalg.eigh(dense)
        c = v.conj().T @ psi0
        states = (v @ (c[:, None] * np.exp(-1j * e[:, None] * t[None, :]))).T
    elif method == "krylov":
        hs = sp.csr_matrix(h)
        states = np.empty((len(t), dim), dtype=complex)
        psi, t_now = psi0, 0.0
        for n, tn in enumerate(t):
            psi = krylov_step(hs, psi, tn - t_now, krylov_dim)
            t_now = tn
            states[n] = psi
    else:
        raise ValidationError(f"unknown method {method!r}")
    return EvolutionResult(t, states, "ket", masks)


def dephasing_rates(masks, n_sites: int, noise: NoiseModel) -> np.ndarray:
    """Elementwise decay of rho_ab from L_j = sqrt(g_ind/2) n_j and L_0 = sqrt(g_col/2) sum n_j.

    Both are diagonal, so the dissipator is -Gamma_ab rho_ab with
    Gamma_ab = g_ind/4 * Hamming(a, b) + g_col/4 * (N_a - N_b)^2.
    """
    occ = occupations(masks, n_sites)
    hamming = occ @ (1 - occ).T + (1 - occ) @ occ.T
    nr = occ.sum(axis=1)
    rates = 0.25 * noise.gamma_ind * hamming + 0.25 * noise.gamma_col * (nr[:, None] - nr[None, :]) ** 2
    if noise.amplitude_damping:
        rates += 0.5 / noise.t1_rydberg * (nr[:, None] + nr[None, :])
    return rates


def spectral_spread(h) -> float:
    """Gershgorin bound on max(E) - min(E)."""
    if sp.issparse(h):
        h = sp.csr_matrix(h)
        d = np.real(h.diagonal())
        r = np.asarray(abs(h).sum(axis=1)).ravel() - np.abs(d)
    else:
        h = np.asarray(h)
        d = np.real(np.diag(h))
        r = np.abs(h).sum(axis=1) - np.abs(d)
    return float(np.max(d + r) - np.min(d - r)) if len(d) else 0.0


def _lindblad_rhs(h, rates, jumps):
    def rhs(rho):
        x = h @ rho
        out = -1j * (x - x.conj().T) - rates * rho
        for idx, tgt, k in jumps:
            out[np.ix_(tgt, tgt)] += k * rho[np.ix_(idx, idx)]
        return out
    return rhs


def _rk4(rhs, rho0, times, h_max, trace_tol, store):
    t_now, rho = 0.0, rho0.astype(complex)
    out = []
    for tn in times:
        span = tn - t_now
        n_sub = int(np.ceil(span / h_max)) if span > 0 else 0
        if n_sub:
            dt = span / n_sub
            for _ in range(n_sub):
                k1 = rhs(rho)
                k2 = rhs(rho + 0.5 * dt * k1)
                k3 = rhs(rho + 0.5 * dt * k2)
                k4 = rhs(rho + dt * k3)
                rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t_now = tn
        drift = abs(np.trace(rho).real - 1.0)
        if drift > trace_tol:
            raise IntegrationError(f"trace drifted by {drift:.3g} at t = {tn:.4g}")
        out.append(rho.copy() if store == "density" else np.real(np.diag(rho)).copy())
    return np.array(out)


def _split(h, rates, rho0, times, h_max, trace_tol, store):
    """Strang splitting: exact unitary half steps around exact elementwise decay."""
    e, v = np.linalg.eigh(h.toarray() if sp.issparse(h) else h)
    rho = rho0.astype(complex)
    t_now, out = 0.0, []
    for tn in times:
        span = tn - t_now
        n_sub = int(np.ceil(span / h_max)) if span > 0 else 0
        if n_sub:
            dt = span / n_sub
            u = (v * np.exp(-0.5j * e * dt)) @ v.conj().T
            ud = u.conj().T
            decay = np.exp(-rates * dt)
            for _ in range(n_sub):
                rho = decay * (u @ rho @ ud)
                rho = u @ rho @ ud
        t_now = tn
        drift = abs(np.trace(rho).real - 1.0)
        if drift > trace_tol:
            raise IntegrationError(f"trace drifted by {drift:.3g} at t = {tn:.4g}")
        out.append(rho.copy() if store == "density" else np.real(np.diag(rho)).copy())
    return np.array(out)


def evolve_lindblad(h, rho0, noise: NoiseModel, times, masks=None, n_sites: int | None = None,
                    step_fraction: float = 0.01, trace_tol: float = 1e-6, store: str = "density",
                    method: str = "rk4") -> EvolutionResult:
    """Dephasing master equation on a fixed step grid.

    ``masks`` labels the basis (default: full space, index = bitmask).

    ``method="rk4"``: classic RK4 with h <= step_fraction / max(spectral
    spread, largest rate). ``method="split"``: Strang splitting of the
    coherent and dephasing parts. The diagonal (Ising) part of H commutes
    with the elementwise dephasing, so the splitting error is set by the
    off-diagonal couplings only and h <= step_fraction / max(off-diagonal
    row sum, largest rate). Each split step is completely positive and
    trace preserving. Amplitude damping requires ``rk4``.
    """
    _check_hermitian(h)
    t = _times(times)
    dim = h.shape[0]
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    if rho0.shape != (dim, dim):
        raise ValidationError("density matrix dimension does not match the Hamiltonian")
    if method not in ("rk4", "split"):
        raise ValidationError(f"unknown integrator {method!r}")
    if masks is None:
        if n_sites is None:
            n_sites = int(round(np.log2(dim)))
            if 1 << n_sites != dim:
                raise ValidationError("full-space dimension must be a power of two; pass masks")
        masks = np.arange(dim, dtype=np.int64)
    else:
        masks = np.asarray(masks, dtype=np.int64)
        if n_sites is None:
            n_sites = int(masks.max()).bit_length() if masks.size else 0
    rates = dephasing_rates(masks, n_sites, noise)
    rate_max = float(rates.max()) if rates.size else 0.0
    kind = "density" if store == "density" else "populations"
    if method == "split":
        if noise.amplitude_damping:
            raise ValidationError("amplitude damping is only available with the rk4 integrator")
        hd = h.toarray() if sp.issparse(h) else np.asarray(h)
        off = np.abs(hd - np.diag(np.diag(hd))).sum(axis=1).max() if dim else 0.0
        scale = max(off, rate_max, 1e-12)
        states = _split(hd, rates, rho0, t, step_fraction / scale, trace_tol, store)
        return EvolutionResult(t, states, kind, masks)
    jumps = []
    if noise.amplitude_damping:
        index = {int(m): i for i, m in enumerate(masks)}
        for j in range(n_sites):
            src = [i for i, m in enumerate(masks) if m >> j & 1]
            try:
                tgt = [index[int(masks[i]) ^ (1 << j)] for i in src]
            except KeyError as exc:
                raise ValidationError("amplitude damping needs a basis closed under de-excitation") from exc
            jumps.append((np.array(src), np.array(tgt), 1.0 / noise.t1_rydberg))
    if sp.issparse(h) and h.nnz > 0.1 * dim * dim:
        h = h.toarray()
    elif not sp.issparse(h):
        h = np.asarray(h, dtype=complex)
    scale = max(spectral_spread(h), rate_max, 1e-12)
    states = _rk4(_lindblad_rhs(h, rates, jumps), rho0, t, step_fraction / scale, trace_tol, store)
    return EvolutionResult(t, states, kind, masks)


def hrs_msd(n_sites: int, j_hop: float, gamma: float, times, origin: int | None = None,
            step_fraction: float = 0.01) -> np.ndarray:
    """<x^2>(t) of one magnon with NN hopping and on-site dephasing (HRS model).

    Coherences between different sites decay at rate ``gamma``; the walker
    starts at ``origin`` (default: chain center) and x is measured from it.
    """
    origin = n_sites // 2 if origin is None else origin
    h = np.diag(np.full(n_sites - 1, float(j_hop)), 1)
    h = h + h.T
    rates = gamma * (1.0 - np.eye(n_sites))
    rho0 = np.zeros((n_sites, n_sites), dtype=complex)
    rho0[origin, origin] = 1.0
    scale = max(spectral_spread(h), gamma, 1e-12)
    pops = _rk4(_lindblad_rhs(h.astype(complex), rates, []), rho0, _times(times), step_fraction / scale, 1e-6,
                "populations")
    x2 = (np.arange(n_sites) - origin) ** 2
    return pops @ x2


def disorder_ensemble(base: ChainGeometry, noise: NoiseModel, n_samples: int, seed: int) -> list[ChainGeometry]:
    """Gaussian displacements: sigma_radial on x and y, sigma_axial on z (optical axis).

    The chain lies along x, so the radial widths include the bond direction.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    rng = component_rng(seed, "disorder")
    sig = np.array([noise.sigma_radial, noise.sigma_radial, noise.sigma_axial])
    out = []
    for _ in range(n_samples):
        shift = rng.standard_normal(base.positions.shape) * sig
        out.append(ChainGeometry(base.positions + shift, base.c6))
    return out


def schedule_drive(segments, t: float):
    """(omega, delta) in rad/us at time t of a piecewise-linear schedule (segments in /2pi MHz)."""
    start = 0.0
    for seg in segments:
        if t <= start + seg.duration_us or seg is segments[-1]:
            x = 0.0 if seg.duration_us == 0 else min(max((t - start) / seg.duration_us, 0.0), 1.0)
            om = seg.omega_start_mhz + x * (seg.omega_end_mhz - seg.omega_start_mhz)
            de = seg.delta_start_mhz + x * (seg.delta_end_mhz - seg.delta_start_mhz)
            return to_angular(om), to_angular(de)
        start += seg.duration_us
    raise ValidationError("empty schedule")


def evolve_schedule(geometry: ChainGeometry, segments, psi0, addressing=(), dt: float = 2e-3) -> np.ndarray:
    """Final state after a piecewise-linear (Omega(t), Delta(t)) ramp.

    Exponential midpoint rule with dense diagonalization per step;
    ``addressing`` holds per-site detuning offsets in rad/us.
    """
    total = sum(s.duration_us for s in segments)
    n_steps = max(1, int(np.ceil(total / dt)))
    step = total / n_steps
    psi = np.asarray(psi0, dtype=complex)
    for k in range(n_steps):
        om, de = schedule_drive(segments, (k + 0.5) * step)
        h = build_ising_hamiltonian(geometry, DriveParams(om, de, addressing)).toarray()
        e, v = np.linalg.eigh(h)
        psi = v @ (np.exp(-1j * e * step) * (v.conj().T @ psi))
    return psi


def _init_components(n_sites, excited, p_fail):
    """Mixture over which addressed atoms failed to be excited."""
    excited = tuple(excited)
    if p_fail == 0:
        return [(1.0, excited)]
    comps = []
    for keep in itertools.product((True, False), repeat=len(excited)):
        w = np.prod([1 - p_fail if k else p_fail for k in keep])
        if w > 0:
            comps.append((float(w), tuple(s for s, k in zip(excited, keep) if k)))
    return comps


def _initial_states(geometry, config):
    n = geometry.n_sites
    if config.init.prep == "sweep":
        addr = tuple(to_angular(a) for a in config.init.addressing_mhz) if config.init.addressing_mhz else ()
        vac = np.zeros(2**n, dtype=complex)
        vac[0] = 1.0
        return [(1.0, evolve_schedule(geometry, config.prep_schedule(), vac, addr))]
    starts = []
    for w, exc in _init_components(n, config.init.excited, config.init.p_fail):
        psi = np.zeros(2**n, dtype=complex)
        psi[mask_from_sites(exc)] = 1.0
        starts.append((w, psi))
    return starts


def _evolve_sample(geometry: ChainGeometry, config, noise: NoiseModel, times) -> np.ndarray:
    """Full-space populations (n_t, 2^N) for one geometry.

    With ``dressing = "adiabatic"`` the exact model starts from the dressed
    image exp(-S)|psi> and is read out after mapping back with exp(S),
    as for a dressing field switched on and off slowly compared with 1/Delta.
    """
    n = geometry.n_sites
    drive = config.quench_drive()
    run = config.run
    pops = np.zeros((len(times), 2**n))
    rot = None
    if run.model == "exact" and run.dressing == "adiabatic":
        rot = expm(sw_generator(geometry, drive))
    for w, psi in _initial_states(geometry, config):
        if run.model == "exact":
            blocks = [(np.arange(2**n), build_ising_hamiltonian(geometry, drive), psi)]
        else:
            # each N_R component evolves inside its own sector
            blocks = []
            nr = popcount(np.arange(2**n))
            for k in np.unique(nr[np.abs(psi) > 0]):
                masks = SectorBasis(n, int(k)).states
                blocks.append((masks, build_effective_sector(geometry, drive, int(k)), psi[masks]))
        for masks, h, vec in blocks:
            if rot is not None:
                vec = rot.T @ vec
            if noise.is_coherent:
                res = evolve_unitary(h, vec, times, masks=masks)
                if rot is not None:
                    res = EvolutionResult(res.times, res.states @ rot.T, "ket", masks)
            else:
                store = "density" if rot is not None else "populations"
                res = evolve_lindblad(h, vec, noise, times, masks=masks, n_sites=n, step_fraction=run.step_fraction,
                                      store=store, method=run.integrator)
                if rot is not None:
                    res = EvolutionResult(res.times, rot @ res.states @ rot.T, "density", masks)
            pops[:, masks] += w * res.populations()
    return pops


def run_experiment(config, noise: NoiseModel | None = None, disorder_samples: int | None = None,
                   shots: int | None = None, seed: int | None = None, threads: int | None = None):
    """Disorder-averaged evolution followed by simulated readout.

    Returns (EvolutionResult with full-space populations, ShotSet or None).
    Arguments left as None come from the config. Every disorder sample is
    independent; results are summed in sample order, so the thread count
    does not change the output.
    """
    from .measurement import DetectionModel, ShotSet, sample_from_populations

    noise = NoiseModel.from_spec(config.noise) if noise is None else noise
    n_dis = config.run.disorder_samples if disorder_samples is None else disorder_samples
    n_shots = config.run.shots if shots is None else shots
    seed = config.run.seed if seed is None else seed
    threads = config.run.threads if threads is None else threads
    times = config.times()
    base = config.build_geometry()
    geoms = disorder_ensemble(base, noise, n_dis, seed) if n_dis > 0 and noise.has_disorder else [base]

    def work(g):
        return _evolve_sample(g, config, noise, times)

    if threads > 1 and len(geoms) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, geoms))
    else:
        results = [work(g) for g in geoms]
    pops = np.zeros_like(results[0])
    for r in results:
        pops += r
    pops /= len(results)

    n = base.n_sites
    masks = np.arange(2**n)
    target = len(config.init.excited)
    nr = popcount(masks)
    result = EvolutionResult(times, pops, "populations", masks)
    result.observable_series["sector_weight"] = pops[:, nr == target].sum(axis=1)
    result.observable_series["density"] = pops @ occupations(masks, n)

    shot_set = None
    if n_shots > 0:
        det = config.detection
        recs = []
        for k, t in enumerate(times):
            if det.p_g_given_r is None:
                model = DetectionModel.from_lifetime(det.t_trap_offset_us + t, noise.t1_rydberg, det.p_r_given_g)
            else:
                model = DetectionModel(det.p_g_given_r, det.p_r_given_g)
            recs.append(sample_from_populations(pops[k], n, model, n_shots, component_rng(seed, "shots", k)))
        shot_set = ShotSet(n, times, recs, seed, config.name)
    return result, shot_set
