"""Readout emulation: projective sampling, confusion flips, postselection, SPAM correction.

Shots are stored as integer bitmasks (bit i = site i detected as Rydberg,
i.e. as atom loss). In text form a shot is a '0'/'1' string whose i-th
character is site i.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EstimationError, ValidationError
from .model import popcount


@dataclass(frozen=True)
class DetectionModel:
    """Independent per-site confusion channel."""

    p_g_given_r: float = 0.0
    p_r_given_g: float = 0.0
    t_trap: float | None = None

    def __post_init__(self):
        for p in (self.p_g_given_r, self.p_r_given_g):
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"detection probability {p} outside [0, 1]")

    @classmethod
    def from_lifetime(cls, t_trap: float, t1: float = 43.0, p_r_given_g: float = 0.01) -> "DetectionModel":
        """P(g|r) = 1 - exp(-t_trap / t1): decay back to |g> before the atom is lost."""
        if t_trap < 0 or t1 <= 0:
            raise ValidationError("need t_trap >= 0 and t1 > 0")
        return cls(float(-np.expm1(-t_trap / t1)), p_r_given_g, t_trap)

    def channel(self) -> np.ndarray:
        """M[observed, true] for one site, 0 = ground, 1 = Rydberg."""
        a, b = self.p_r_given_g, self.p_g_given_r
        return np.array([[1 - a, b], [a, 1 - b]])

    @property
    def is_perfect(self) -> bool:
        return self.p_g_given_r == 0 and self.p_r_given_g == 0


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    from .rng import component_rng
    return component_rng(0 if seed is None else seed, "shots")


def state_populations(state) -> np.ndarray:
    """Computational-basis probabilities of a ket (1D) or density matrix (2D)."""
    state = np.asarray(state)
    if state.ndim == 1:
        p = np.abs(state) ** 2
    elif state.ndim == 2 and state.shape[0] == state.shape[1]:
        p = np.real(np.diag(state)).copy()
    else:
        raise ValidationError("state must be a vector or a square density matrix")
    return p


def apply_confusion(masks, n_sites: int, detection: DetectionModel, rng) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.int64)
    if detection.is_perfect or masks.size == 0:
        return masks.copy()
    bits = (masks[:, None] >> np.arange(n_sites)) & 1
    p_flip = np.where(bits == 1, detection.p_g_given_r, detection.p_r_given_g)
    flips = rng.random(bits.shape) < p_flip
    return ((bits ^ flips) << np.arange(n_sites)).sum(axis=1).astype(np.int64)


def sample_from_populations(populations, n_sites: int, detection: DetectionModel, n_shots: int,
                            seed=None, masks=None) -> np.ndarray:
    """Draw ``n_shots`` ideal outcomes, then flip each bit through the channel."""
    if n_shots < 1:
        raise ValidationError("n_shots must be >= 1")
    p = np.clip(np.asarray(populations, dtype=float), 0.0, None)
    total = p.sum()
    if total <= 0:
        raise ValidationError("populations sum to zero")
    masks = np.arange(len(p), dtype=np.int64) if masks is None else np.asarray(masks, dtype=np.int64)
    rng = _as_rng(seed)
    ideal = rng.choice(masks, size=n_shots, p=p / total)
    return apply_confusion(ideal, n_sites, detection, rng)


@dataclass
class ShotSet:
    """Per-time collections of measured bitmasks."""

    n_sites: int
    times: np.ndarray
    records: list = field(default_factory=list)
    seed: int | None = None
    preset: str = ""

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        self.records = [np.asarray(r, dtype=np.int64) for r in self.records]
        if len(self.records) != len(self.times):
            raise ValidationError("one shot record per time point required")
        limit = 1 << self.n_sites
        for r in self.records:
            if r.size and (r.min() < 0 or r.max() >= limit):
                raise ValidationError(f"shot outside the {self.n_sites}-site register")

    def __len__(self):
        return len(self.times)

    def n_shots(self, k: int = 0) -> int:
        return int(self.records[k].size)

    def counts(self, k: int = 0) -> np.ndarray:
        return np.bincount(self.records[k], minlength=1 << self.n_sites)

    def bitstrings(self, k: int = 0) -> list[str]:
        return [mask_to_bitstring(m, self.n_sites) for m in self.records[k]]

    def concat(self, other: "ShotSet") -> "ShotSet":
        if other.n_sites != self.n_sites or not np.array_equal(other.times, self.times):
            raise ValidationError("shot sets differ in register size or time grid")
        recs = [np.concatenate([a, b]) for a, b in zip(self.records, other.records)]
        return ShotSet(self.n_sites, self.times, recs, self.seed, self.preset)


def mask_to_bitstring(mask: int, n_sites: int) -> str:
    return "".join("1" if (int(mask) >> i) & 1 else "0" for i in range(n_sites))


def bitstring_to_mask(bits: str) -> int:
    bits = bits.strip()
    if not bits or set(bits) - {"0", "1"}:
        raise ValidationError(f"bad bitstring {bits!r}")
    return sum(1 << i for i, ch in enumerate(bits) if ch == "1")


def sample_shots(state, detection: DetectionModel, n_shots: int, seed=None, n_sites: int | None = None,
                 masks=None, time: float = 0.0) -> ShotSet:
    """Projective measurement of a ket or density matrix in the computational basis.

    ``masks`` labels the basis when the state lives on a sector.
    """
    p = state_populations(state)
    if n_sites is None:
        if masks is not None:
            raise ValidationError("n_sites is required with sector masks")
        n_sites = int(round(np.log2(len(p))))
        if 1 << n_sites != len(p):
            raise ValidationError("full-space state length must be a power of two")
    rec = sample_from_populations(p, n_sites, detection, n_shots, seed, masks)
    return ShotSet(n_sites, [time], [rec], seed if isinstance(seed, int) else None)


@dataclass
class PostselectResult:
    shots: ShotSet
    retention: np.ndarray   # kept fraction per time
    empty: np.ndarray       # True where nothing survived

    @property
    def any_empty(self) -> bool:
        return bool(self.empty.any())


def postselect(shots: ShotSet, n_r: int) -> PostselectResult:
    """Keep shots with exactly ``n_r`` detected excitations."""
    kept, ret = [], []
    for r in shots.records:
        sel = r[popcount(r) == n_r]
        kept.append(sel)
        ret.append(sel.size / r.size if r.size else 0.0)
    out = ShotSet(shots.n_sites, shots.times, kept, shots.seed, shots.preset)
    return PostselectResult(out, np.array(ret), np.array([k.size == 0 for k in kept]))


def _apply_sitewise(vec, mat, n_sites):
    """(mat tensored n_sites times) @ vec; same 2x2 on every site."""
    t = vec.reshape((2,) * n_sites)
    for ax in range(n_sites):
        t = np.moveaxis(np.tensordot(mat, t, axes=([1], [ax])), 0, ax)
    return t.reshape(-1)


def forward_model(populations, detection: DetectionModel, n_sites: int) -> np.ndarray:
    """Distribution of observed bitmasks given true populations."""
    return _apply_sitewise(np.asarray(populations, dtype=float), detection.channel(), n_sites)


@dataclass(frozen=True)
class MLEResult:
    populations: np.ndarray
    log_likelihood: float
    iterations: int
    method: str   # "inversion" or "em"


def _log_likelihood(counts, q):
    nz = counts > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(counts[nz] * np.log(q[nz])))


def mle_spam_correct(shots, detection: DetectionModel, time_index: int = 0, n_sites: int | None = None,
                     max_iter: int = 10_000, tol: float = 1e-10) -> MLEResult:
    """Maximum-likelihood true populations under the per-site confusion channel.

    ``shots`` is a ShotSet (one time point is used) or an array of counts
    indexed by bitmask. When the linear inversion is already on the simplex
    it reproduces the empirical frequencies exactly and is returned as the
    MLE; otherwise expectation maximization (iterative Bayesian unfolding)
    runs from the uniform distribution, accelerated by squared extrapolation
    (SQUAREM) with a monotone safeguard.
    """
    if isinstance(shots, ShotSet):
        counts = shots.counts(time_index).astype(float)
        n_sites = shots.n_sites
    else:
        counts = np.asarray(shots, dtype=float)
        if n_sites is None:
            n_sites = int(round(np.log2(len(counts))))
    if len(counts) != 1 << n_sites:
        raise ValidationError("counts must cover all 2**n_sites outcomes")
    total = counts.sum()
    if total <= 0:
        raise EstimationError("no shots to estimate from")
    if max(detection.p_g_given_r, detection.p_r_given_g) >= 0.5:
        raise EstimationError("detection errors >= 0.5 make the channel non-identifiable")
    freq = counts / total
    m = detection.channel()

    lin = _apply_sitewise(freq, np.linalg.inv(m), n_sites)
    if lin.min() >= -1e-12:
        p = np.clip(lin, 0.0, None)
        p /= p.sum()
        return MLEResult(p, _log_likelihood(counts, _apply_sitewise(p, m, n_sites)), 0, "inversion")

    def em(p):
        q = _apply_sitewise(p, m, n_sites)
        ratio = np.divide(freq, q, out=np.zeros_like(freq), where=q > 0)
        out = p * _apply_sitewise(ratio, m.T, n_sites)
        return out / out.sum()

    def loglik(p):
        return _log_likelihood(counts, _apply_sitewise(p, m, n_sites))

    # EM with SQUAREM extrapolation; an extrapolated point is only accepted
    # when it beats the plain double EM step, so the likelihood never drops
    p = np.full(len(counts), 1.0 / len(counts))
    ll = loglik(p)
    for it in range(1, max_iter + 1):
        p1 = em(p)
        p2 = em(p1)
        cand, ll_cand = p2, loglik(p2)
        r, v = p1 - p, p2 - 2 * p1 + p
        nv = np.linalg.norm(v)
        if nv > 0:
            alpha = min(-np.linalg.norm(r) / nv, -1.0)
            x = p - 2 * alpha * r + alpha**2 * v
            if x.min() >= 0 and x.sum() > 0:
                x = em(x / x.sum())
                ll_x = loglik(x)
                if ll_x > ll_cand:
                    cand, ll_cand = x, ll_x
        gain = ll_cand - ll
        if gain < -1e-9 * max(1.0, abs(ll)):
            raise EstimationError(f"EM log-likelihood decreased by {-gain:.3g} at iteration {it}")
        p, ll = cand, ll_cand
        if gain < tol:
            return MLEResult(p, ll, it, "em")
    raise EstimationError(f"EM did not converge in {max_iter} iterations (last gain {gain:.3g}, "
                          f"log-likelihood {ll:.6g})")


def total_variation(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def write_shots(directory, shots: ShotSet, stem: str = "shots") -> list[Path]:
    """One text file per time point; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, t in enumerate(shots.times):
        path = directory / f"{stem}_t{k:03d}.txt"
        lines = [f"# time_us={float(t)!r}", f"# seed={shots.seed}", f"# n_sites={shots.n_sites}"]
        if shots.preset:
            lines.append(f"# preset={shots.preset}")
        lines.extend(shots.bitstrings(k))
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def read_shots(paths) -> ShotSet:
    """Inverse of :func:`write_shots` (files in time order)."""
    times, recs, seed, preset, n_sites = [], [], None, "", None
    for path in paths:
        meta, rec, width = {}, [], 0
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif line.strip():
                rec.append(bitstring_to_mask(line))
                width = len(line.strip())
        if "time_us" not in meta:
            raise ValidationError(f"{path}: missing '# time_us=' header")
        times.append(float(meta["time_us"]))
        recs.append(np.array(rec, dtype=np.int64))
        seed = None if meta.get("seed", "None") == "None" else int(meta["seed"])
        preset = meta.get("preset", "")
        n_sites = int(meta["n_sites"]) if "n_sites" in meta else width
    return ShotSet(n_sites, times, recs, seed, preset)


def populations_to_json(populations, n_sites: int, masks=None) -> str:
    """Estimator output: JSON map bitstring -> population, in basis order."""
    masks = range(len(populations)) if masks is None else masks
    data = {mask_to_bitstring(m, n_sites): float(v) for m, v in zip(masks, populations)}
    return json.dumps(data, indent=1)
