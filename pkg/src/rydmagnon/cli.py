"""Command-line front end.

    rydmagnon {potential,walk,bands,pair,coeffs,verify} [--preset NAME | --config PATH] [--out DIR] ...

Every run writes deterministic CSV/JSON/SVG files plus ``manifest.json``
into the output directory. Errors are reported as one JSON object on stderr
with exit codes 2 (config), 3 (numerical/resonance) and 4 (estimation).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
from math import comb
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import PRESETS, ExperimentConfig, load_config, preset
from .errors import ConfigError, NumericalError, RydmagnonError
from .units import TWO_PI, from_angular, to_angular

DEFAULT_PRESET = {
    "potential": "two-atom-exchange",
    "walk": "quantum-walk",
    "bands": "bound-state-theory",
    "pair": "tight-pair-transport",
    "coeffs": "bound-state-theory",
    "verify": "bound-state-theory",
}

# Two-atom exchange measurements: (Delta/2pi, r, Omega/2pi, J/2pi, error of J/2pi), MHz and um.
TABLE1 = (
    (5, 4.4, 1.52, 0.132, 0.009), (5, 4.95, 1.52, 0.128, 0.008), (5, 5.5, 1.52, 0.143, 0.006),
    (5, 6.05, 1.52, 0.154, 0.006), (5, 6.6, 1.52, 0.21, 0.02), (5, 7.15, 1.52, 0.21, 0.01),
    (5, 7.29, 1.52, 0.33, 0.03), (5, 7.43, 1.52, 0.35, 0.02), (5, 7.7, 1.52, 0.40, 0.03),
    (5, 7.98, 1.52, 0.42, 0.05), (5, 8.25, 1.52, 0.18, 0.03), (5, 8.8, 1.52, 0.10, 0.01),
    (5, 9.9, 1.52, 0.039, 0.006),
    (-5, 4.4, 1.86, 0.161, 0.002), (-5, 4.95, 1.86, 0.143, 0.001), (-5, 5.5, 1.52, 0.095, 0.008),
    (-5, 6.05, 1.52, 0.086, 0.009), (-5, 6.6, 1.52, 0.068, 0.006), (-5, 7.15, 1.52, 0.06, 0.01),
    (-5, 7.7, 1.86, 0.08, 0.02), (-5, 8.25, 1.91, 0.08, 0.02), (-5, 8.8, 1.91, 0.04, 0.01),
)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


class OutputWriter:
    """Writes files into one directory and remembers them for the manifest."""

    def __init__(self, out_dir, fmt="csv"):
        self.root = Path(out_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self.fmt = fmt
        self.files: list[Path] = []

    def path(self, name) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def register(self, path):
        path = Path(path)
        if path not in self.files:
            self.files.append(path)
        return path

    def table(self, name, rows):
        if self.fmt == "json":
            return self.json(f"{name}.json", rows)
        buf = io.StringIO()
        cols = list(rows[0].keys()) if rows else []
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(cols)
        for r in rows:
            wr.writerow([_fmt(r[c]) for c in cols])
        p = self.path(f"{name}.csv")
        p.write_text(buf.getvalue())
        return self.register(p)

    def json(self, name, obj):
        p = self.path(name)
        p.write_text(json.dumps(_jsonable(obj), indent=1, sort_keys=False) + "\n")
        return self.register(p)

    def text(self, name, content):
        p = self.path(name)
        p.write_text(content)
        return self.register(p)

    def manifest(self, command, cfg: ExperimentConfig):
        files = []
        for p in sorted(self.files, key=lambda q: q.relative_to(self.root).as_posix()):
            data = p.read_bytes()
            files.append({"path": p.relative_to(self.root).as_posix(),
                          "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        man = {
            "tool": "rydmagnon",
            "version": __version__,
            "subcommand": command,
            "config_hash": cfg.digest(),
            "seed": int(cfg.run.seed),
            "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
            "files": files,
            "config": _jsonable(cfg.to_dict()),
        }
        p = self.root / "manifest.json"
        p.write_text(json.dumps(man, indent=1) + "\n")
        return man


def manifest_schema() -> dict:
    return json.loads((Path(__file__).parent / "schemas" / "manifest.schema.json").read_text())


def _echo_units(cfg: ExperimentConfig, out):
    d = cfg.drive
    print(f"# config {cfg.name}: Omega/2pi = {d.omega_mhz:g} MHz (Omega = {to_angular(d.omega_mhz):.6g} rad/us), "
          f"Delta/2pi = {d.delta_mhz:g} MHz (Delta = {to_angular(d.delta_mhz):.6g} rad/us)", file=out)


# subcommands ------------------------------------------------------------------------------------

def cmd_potential(cfg, args, w: OutputWriter, out):
    from .effective import coeff_j, critical_radius, dressing_potential
    from .errors import ResonanceError
    from .plotting import line_plot

    om = to_angular(cfg.drive.omega_mhz)
    dabs = to_angular(abs(cfg.drive.delta_mhz))
    c6 = TWO_PI * cfg.geometry.c6_mhz_um6
    rs = np.linspace(args.r_min, args.r_max, args.points)

    def safe(r, delta, omega=om):
        try:
            return dressing_potential(r, omega, delta, c6)
        except ResonanceError:
            return float("nan")

    rows = []
    for r in rs:
        jp, jm = safe(r, dabs), safe(r, -dabs)
        rows.append({"r_um": r, "v_over_2pi_mhz": from_angular(c6 / r**6),
                     "j_plus_over_2pi_mhz": from_angular(jp), "j_plus_abs_over_2pi_mhz": abs(from_angular(jp)),
                     "j_plus_rad_per_us": jp,
                     "j_minus_over_2pi_mhz": from_angular(jm), "j_minus_abs_over_2pi_mhz": abs(from_angular(jm)),
                     "j_minus_rad_per_us": jm})
    w.table("potential", rows)
    rc = critical_radius(dabs, c6)
    comp = []
    for delta, r, omega, j_meas, j_err in TABLE1:
        try:
            j = abs(from_angular(coeff_j(to_angular(omega), to_angular(delta), c6 / r**6)))
        except ResonanceError:
            j = float("nan")
        comp.append({"delta_over_2pi_mhz": delta, "r_um": r, "omega_over_2pi_mhz": omega,
                     "j_measured_over_2pi_mhz": j_meas, "j_error_over_2pi_mhz": j_err,
                     "j_closed_form_abs_over_2pi_mhz": j, "within_error": bool(abs(j - j_meas) <= j_err)})
    w.table("table1_comparison", comp)
    w.json("potential_summary.json", {"r_c_um": rc, "omega_over_2pi_mhz": cfg.drive.omega_mhz,
                                      "abs_delta_over_2pi_mhz": abs(cfg.drive.delta_mhz),
                                      "delta_ls_over_2pi_mhz": from_angular(om**2 / (4 * dabs))})
    ymax = 1.5 * max(c["j_measured_over_2pi_mhz"] for c in comp)
    series = [
        {"x": rs, "y": [r["j_plus_abs_over_2pi_mhz"] for r in rows], "label": "|J+| (Delta > 0)"},
        {"x": rs, "y": [r["j_minus_abs_over_2pi_mhz"] for r in rows], "label": "|J-| (Delta < 0)"},
        {"x": [c["r_um"] for c in comp if c["delta_over_2pi_mhz"] > 0],
         "y": [c["j_measured_over_2pi_mhz"] for c in comp if c["delta_over_2pi_mhz"] > 0],
         "label": "measured, Delta > 0", "style": "points"},
        {"x": [c["r_um"] for c in comp if c["delta_over_2pi_mhz"] < 0],
         "y": [c["j_measured_over_2pi_mhz"] for c in comp if c["delta_over_2pi_mhz"] < 0],
         "label": "measured, Delta < 0", "style": "points"},
    ]
    if args.plots:
        w.register(line_plot(w.path("potential.svg"), series, "Dressing potential", "r (um)", "|J|/2pi (MHz)",
                             ylim=(0.0, ymax)))
    print(f"r_c = {rc:.4f} um", file=out)


def cmd_coeffs(cfg, args, w: OutputWriter, out):
    from .effective import anisotropies, effective_coefficients

    geom, drive = cfg.build_geometry(), cfg.quench_drive()
    c = effective_coefficients(geom, drive)
    n = geom.n_sites
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            rows.append({"i": i, "j": j, "v_over_2pi_mhz": from_angular(c.v[i, j]),
                         "j_over_2pi_mhz": from_angular(c.j[i, j]), "j_rad_per_us": c.j[i, j],
                         "u_over_2pi_mhz": from_angular(c.u[i, j]), "u_rad_per_us": c.u[i, j]})
    w.table("pairs", rows)
    qrows = []
    for k in range(n):
        for i in range(n):
            for j in range(i + 1, n):
                if k not in (i, j) and abs(c.q[i, j, k]) > 0:
                    qrows.append({"i": i, "j": j, "spectator": k, "q_over_2pi_mhz": from_angular(c.q[i, j, k]),
                                  "q_rad_per_us": c.q[i, j, k]})
    w.table("pair_hops", qrows)
    w.table("onsite", [{"site": i, "mu_over_2pi_mhz": from_angular(c.mu[i]), "mu_rad_per_us": c.mu[i]}
                       for i in range(n)])
    summary = {"delta_ls": {"over_2pi_mhz": from_angular(c.delta_ls), "rad_per_us": c.delta_ls}}
    try:
        rep = anisotropies(geom, drive)
        i = rep.site
        summary["anisotropies"] = rep.as_dict()
        summary["center"] = {
            "site": i,
            "q_nn_rad_per_us": c.q[i - 1, i + 1, i], "q_nnn_rad_per_us": c.q[i - 1, i, i + 1],
            "j_nn_rad_per_us": c.j[i, i + 1], "u_nn_rad_per_us": c.u[i, i + 1], "u_nnn_rad_per_us": c.u[i, i + 2],
        }
        print(f"xi1 = {rep.xi1:.6g}  xi2 = {rep.xi2:.6g}  (V - 4J only: xi1 = {rep.xi1_bare:.6g}, "
              f"xi2 = {rep.xi2_bare:.6g})", file=out)
    except RydmagnonError as exc:
        summary["anisotropies"] = None
        summary["anisotropies_unavailable"] = str(exc)
        print(f"anisotropies unavailable: {exc}", file=out)
    if n >= 3:
        # pair hop of the tightly bound pair |..11..> -> |..0 1 1..> across the middle site
        m = n // 2
        lo = max(m - 1, 0)
        summary["tight_pair_hop_rad_per_us"] = c.q[lo, lo + 2, lo + 1]
        print(f"|Q| tight-pair hop = {abs(c.q[lo, lo + 2, lo + 1]):.6g} rad/us", file=out)
    w.json("coeffs.json", summary)


def _uniform_spacing(cfg):
    if cfg.geometry.positions_um is not None:
        geom = cfg.build_geometry()
        if not geom.is_uniform():
            raise ConfigError("band structure needs a uniform chain")
        return float(np.linalg.norm(geom.positions[1] - geom.positions[0]))
    return cfg.geometry.spacing_um


def cmd_bands(cfg, args, w: OutputWriter, out):
    from .plotting import line_plot
    from .spectra import (UniformChainCouplings, band_table, classify_bound_states, compute_bands,
                          initial_overlap)

    couplings = UniformChainCouplings.from_spacing(_uniform_spacing(cfg), cfg.quench_drive(),
                                                   TWO_PI * cfg.geometry.c6_mhz_um6)
    bands = compute_bands(couplings, n_k=args.n_k, r_max=args.r_max)
    summ = classify_bound_states(bands)
    w.table("bands", [{"k": k, "band": b, "energy_rad_per_us": e, "bound": br, "bond_length": bl}
                      for k, b, e, br, bl in band_table(bands, summ)])
    w.table("bound_states", [{"branch": s.branch, "k": s.k, "energy_rad_per_us": s.energy,
                              "bond_length": s.bond_length, "localization": s.localization} for s in summ])
    r_show = min(20, bands.r_max)
    kidx = {float(k): n for n, k in enumerate(bands.k_grid)}
    w.table("wavefunctions", [{"branch": s.branch, "k": s.k, "r": r + 1,
                               "probability": bands.probabilities[kidx[s.k]][r, s.band_index]}
                              for s in summ for r in range(r_show)])
    edges = bands.continuum_edges
    summary = {"n_bound": len(summ), "branches": sorted({s.branch for s in summ}),
               "r_max": bands.r_max, "n_k": len(bands.k_grid)}
    for br in ("tight", "loose"):
        sel = [s for s in summ if s.branch == br]
        if sel:
            e = [s.energy for s in sel]
            summary[br] = {"n_k": len(sel), "bandwidth_rad_per_us": max(e) - min(e),
                           "max_bond_length": max(s.bond_length for s in sel)}
    if len(cfg.init.excited) == 2:
        i, j = sorted(cfg.init.excited)
        summary["overlap_infinite_chain"] = initial_overlap((i, j), bands, summ)
        summary["overlap_ring"] = initial_overlap((i, j), bands, chain_length=cfg.n_sites)
    w.json("bands_summary.json", summary)
    if args.plots:
        series = [{"x": bands.k_grid, "y": edges[:, 0], "label": "continuum", "color": "#7f7f7f"},
                  {"x": bands.k_grid, "y": edges[:, 1], "color": "#7f7f7f"}]
        for br, col in (("tight", "#d62728"), ("loose", "#1f77b4")):
            ks = [s.k for s in summ if s.branch == br]
            es = [s.energy for s in summ if s.branch == br]
            if ks:
                series.append({"x": ks, "y": es, "label": f"{br} pair", "color": col, "style": "points"})
        w.register(line_plot(w.path("bands.svg"), series, "Two-magnon spectrum", "K", "E (rad/us)"))
    print(f"{len(summ)} bound states across {len(bands.k_grid)} momenta; branches: "
          f"{', '.join(summary['branches']) or 'none'}", file=out)


def _detection_for(cfg, t, t1):
    from .measurement import DetectionModel
    det = cfg.detection
    if det.p_g_given_r is None:
        return DetectionModel.from_lifetime(det.t_trap_offset_us + t, t1, det.p_r_given_g)
    return DetectionModel(det.p_g_given_r, det.p_r_given_g)


def _write_shots(cfg, shots, w: OutputWriter):
    from .measurement import write_shots
    for p in write_shots(w.path("shots"), shots):
        w.register(p)


def _mle_rows(cfg, shots, w: OutputWriter, noise, n_r):
    """Per-time MLE populations (written as JSON) postselected to n_r."""
    from .measurement import mle_spam_correct, populations_to_json
    from .model import popcount

    n = cfg.n_sites
    out = []
    for k, t in enumerate(shots.times):
        res = mle_spam_correct(shots, _detection_for(cfg, t, noise.t1_rydberg), time_index=k)
        w.text(f"mle/populations_t{k:03d}.json", populations_to_json(res.populations, n) + "\n")
        out.append(res.populations)
    return np.array(out)


def cmd_walk(cfg, args, w: OutputWriter, out):
    from .dynamics import NoiseModel, hrs_msd, run_experiment
    from .effective import effective_coefficients
    from .measurement import postselect
    from .observables import mean_square_displacement, observable_table, rydberg_density
    from .plotting import heatmap, line_plot

    noise = NoiseModel.from_spec(cfg.noise)
    res, shots = run_experiment(cfg, noise)
    n, origin, n_r = cfg.n_sites, cfg.init.excited[0], len(cfg.init.excited)
    rows = observable_table(res, n, origin, n_r)
    geom = cfg.build_geometry()
    j_nn = abs(effective_coefficients(geom, cfg.quench_drive()).j[origin, min(origin + 1, n - 1)])
    gamma = noise.gamma_ind if noise.gamma_ind > 0 else to_angular(0.2)
    x2_hrs = hrs_msd(n, j_nn, gamma, res.times, origin)
    for r, sw, xh in zip(rows, res.observable_series["sector_weight"], x2_hrs):
        r["sector_weight"] = sw
        r["msd_hrs"] = xh
        r["msd_ballistic"] = 2 * (j_nn * r["time_us"]) ** 2
    w.table("walk", rows)
    series = [{"x": res.times, "y": [r["msd"] for r in rows], "label": "exact (postselected)"},
              {"x": res.times, "y": x2_hrs, "label": "HRS", "style": "dash"},
              {"x": res.times, "y": [r["msd_ballistic"] for r in rows], "label": "ballistic", "style": "dash"}]
    if shots is not None:
        _write_shots(cfg, shots, w)
        mle = _mle_rows(cfg, shots, w, noise, n_r)
        post = postselect(shots, n_r)
        srows = []
        for k, t in enumerate(res.times):
            row = {"time_us": t, "retention": post.retention[k]}
            dens_mle = rydberg_density(mle[k], n, postselect_nr=n_r)
            row["msd_mle"] = mean_square_displacement(dens_mle, origin, n_r)
            row.update({f"n{i}_mle": x for i, x in enumerate(dens_mle)})
            if not post.empty[k]:
                dens_raw = rydberg_density(post.shots, time_index=k)
                row["msd_raw"] = mean_square_displacement(dens_raw, origin, n_r)
            else:
                row["msd_raw"] = float("nan")
            srows.append(row)
        w.table("walk_shots", srows)
        series.append({"x": res.times, "y": [r["msd_mle"] for r in srows], "label": "shots, MLE", "style": "points"})
    if args.plots:
        dens = np.array([[r[f"n{i}"] for i in range(n)] for r in rows])
        w.register(heatmap(w.path("density.svg"), dens, np.arange(n), res.times, "Rydberg density",
                           "site", "t (us)"))
        w.register(line_plot(w.path("msd.svg"), series, "Mean square displacement", "t (us)", "<x^2>"))
    print(f"final <x^2> = {rows[-1]['msd']:.6g}, min sector weight = "
          f"{float(np.min(res.observable_series['sector_weight'])):.4f}", file=out)


def cmd_pair(cfg, args, w: OutputWriter, out):
    from .dynamics import NoiseModel, run_experiment
    from .measurement import postselect
    from .observables import bond_count, correlator, participation_ratios
    from .plotting import heatmap, line_plot

    noise = NoiseModel.from_spec(cfg.noise)
    res, shots = run_experiment(cfg, noise)
    n = cfg.n_sites
    if len(cfg.init.excited) != 2:
        raise ConfigError("the pair subcommand needs exactly two initial excitations")
    pops = res.populations()
    corr_rows, br_rows, maps = [], [], []
    for k, t in enumerate(res.times):
        cm = correlator(pops[k], n)
        maps.append(cm.gamma)
        corr_rows.extend({"time_us": t, "i": i, "j": j, "gamma": g} for i, j, g in cm.long_form())
        br1, br2 = participation_ratios(cm)
        br_rows.append({"time_us": t, "br1": br1, "br2": br2,
                        "bonds": bond_count(pops[k], n, postselect_nr=2),
                        "sector_weight": res.observable_series["sector_weight"][k]})
    w.table("correlator", corr_rows)
    w.table("participation", br_rows)
    pairs = comb(n, 2)
    baseline = {"br1": (n - 1) / pairs, "br2": (n - 2) / pairs}
    summary = {"uniform_baseline": baseline}
    series = [{"x": res.times, "y": [r["br1"] for r in br_rows], "label": "BR1"},
              {"x": res.times, "y": [r["br2"] for r in br_rows], "label": "BR2"},
              {"x": res.times, "y": [baseline["br1"]] * len(res.times), "label": "BR1 uniform", "style": "dash"},
              {"x": res.times, "y": [baseline["br2"]] * len(res.times), "label": "BR2 uniform", "style": "dash"}]
    if shots is not None:
        _write_shots(cfg, shots, w)
        mle = _mle_rows(cfg, shots, w, noise, 2)
        post = postselect(shots, 2)
        srows = []
        for k, t in enumerate(res.times):
            row = {"time_us": t, "retention": post.retention[k]}
            if post.empty[k]:
                row.update(br1_raw=float("nan"), br2_raw=float("nan"))
            else:
                row["br1_raw"], row["br2_raw"] = participation_ratios(correlator(post.shots, time_index=k))
            row["br1_mle"], row["br2_mle"] = participation_ratios(correlator(mle[k], n))
            srows.append(row)
        w.table("participation_shots", srows)
        series.append({"x": res.times, "y": [r["br1_raw"] for r in srows], "label": "BR1 shots", "style": "points"})
    w.json("pair_summary.json", summary)
    if args.plots:
        w.register(line_plot(w.path("participation.svg"), series, "Participation ratios", "t (us)", "ratio",
                             ylim=(0.0, 1.05)))
        nt = len(res.times)
        for k in sorted({0, nt // 3, (2 * nt) // 3, nt - 1}):
            g = maps[k] + maps[k].T
            w.register(heatmap(w.path(f"correlator_t{k:03d}.svg"), g, np.arange(n), np.arange(n),
                               f"Gamma_ij at t = {res.times[k]:.3g} us", "j", "i"))
    print(f"BR1 range [{min(r['br1'] for r in br_rows):.4f}, {max(r['br1'] for r in br_rows):.4f}]; "
          f"uniform baseline {baseline['br1']:.4f}", file=out)


def run_verify(seed: int = 0):
    """Quick self-checks: SW oracle equivalence and basic invariants. Returns a list of check dicts."""
    from .dynamics import NoiseModel, evolve_lindblad, evolve_unitary
    from .effective import (build_effective_single_magnon, build_effective_two_magnon, coeff_j,
                            dressing_potential, sw_oracle, vacuum_shift)
    from .errors import ResonanceError
    from .measurement import DetectionModel, mle_spam_correct
    from .model import ChainGeometry, DriveParams, build_ising_hamiltonian, popcount, product_state
    from .rng import component_rng

    checks = []
    rng = component_rng(seed, "synthetic")
    worst = 0.0
    done = 0
    while done < 12:
        n = int(rng.integers(2, 6))
        spacing = float(rng.uniform(4.5, 9.0))
        ratio = float(rng.choice([2.0, 3.0, 4.0])) * float(rng.choice([-1.0, 1.0]))
        omega = float(rng.uniform(1.0, 2.5))
        geom, drive = ChainGeometry.chain(n, spacing), DriveParams.from_mhz(omega, ratio * omega)
        try:
            shift = vacuum_shift(n, drive)
            pairs = [(build_effective_single_magnon(geom, drive) + shift * np.eye(n),
                      sw_oracle(geom, drive, 1, include_h0=True))]
            h2 = build_effective_two_magnon(geom, drive, onsite=True)
            pairs.append((h2 + shift * np.eye(len(h2)), sw_oracle(geom, drive, 2, include_h0=True)))
        except ResonanceError:
            continue
        for closed, full in pairs:
            worst = max(worst, float(np.max(np.abs(closed - full)) / np.max(np.abs(full))))
        done += 1
    checks.append({"name": "sw_oracle_equivalence", "passed": worst < 1e-10, "detail": {"max_relative": worst}})

    geom, drive = ChainGeometry.chain(4, 5.2), DriveParams.from_mhz(1.5, -4.0)
    h = build_ising_hamiltonian(geom, drive)
    herm = float(abs(h - h.conj().T).max())
    coo = h.tocoo()
    dn = np.abs(popcount(coo.row) - popcount(coo.col))
    checks.append({"name": "ising_hermitian_and_u1_blocks", "passed": herm == 0.0 and set(dn.tolist()) <= {0, 1},
                   "detail": {"hermiticity_defect": herm}})

    om, de = to_angular(1.52), to_angular(5.0)
    rs = np.linspace(4.4, 7.3, 50)
    dev = max(abs(dressing_potential(r, om, de) - coeff_j(om, de, TWO_PI * 1.023e6 / r**6)) for r in rs)
    checks.append({"name": "dressing_potential_identity", "passed": dev < 1e-12, "detail": {"max_abs": dev}})

    psi = product_state(4, [1])
    ts = np.linspace(0, 0.5, 6)
    u = evolve_unitary(h, psi, ts).states
    rho = evolve_lindblad(h, psi, NoiseModel(), ts).states
    gap = float(np.max(np.abs(rho - np.einsum("ti,tj->tij", u, u.conj()))))
    checks.append({"name": "closed_system_limit", "passed": gap < 1e-8, "detail": {"max_abs": gap}})

    det = DetectionModel(0.2, 0.03)
    counts = np.array([6200.0, 3800.0])
    est = mle_spam_correct(counts, det, n_sites=1).populations[1]
    f = counts[1] / counts.sum()
    closed = (f - 0.03) / (1 - 0.03 - 0.2)
    checks.append({"name": "single_site_inversion", "passed": abs(est - closed) < 1e-9,
                   "detail": {"abs_error": abs(est - closed)}})
    return checks


def cmd_verify(cfg, args, w: OutputWriter, out):
    checks = run_verify(cfg.run.seed)
    w.json("verify.json", checks)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}", file=out)
    failed = [c["name"] for c in checks if not c["passed"]]
    if failed:
        raise NumericalError(f"verification failed: {', '.join(failed)}")


COMMANDS = {"potential": cmd_potential, "walk": cmd_walk, "bands": cmd_bands, "pair": cmd_pair,
            "coeffs": cmd_coeffs, "verify": cmd_verify}


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", help="TOML experiment config")
    src.add_argument("--preset", help=f"one of: {', '.join(PRESETS)}")
    common.add_argument("--out", help="output directory (default: rydmagnon-out/<command>)")
    common.add_argument("--seed", type=_u64, help="master seed")
    common.add_argument("--shots", type=_nonneg, help="measurement shots per time point")
    common.add_argument("--disorder-samples", type=_nonneg, help="Monte Carlo positional-disorder samples")
    common.add_argument("--threads", type=int, help="worker threads for disorder samples")
    common.add_argument("--format", choices=("csv", "json"), help="table format")
    common.add_argument("--no-plots", dest="plots", action="store_false", default=None, help="skip SVG figures")

    p = argparse.ArgumentParser(prog="rydmagnon", description="Rydberg-dressed magnon simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    pot = sub.add_parser("potential", parents=[common], help="dressing potential J(r) for both detuning signs")
    pot.add_argument("--r-min", type=float, default=4.4)
    pot.add_argument("--r-max", type=float, default=9.9)
    pot.add_argument("--points", type=int, default=221)
    sub.add_parser("walk", parents=[common], help="single-magnon quantum walk")
    bands = sub.add_parser("bands", parents=[common], help="two-magnon spectrum and bound states")
    bands.add_argument("--n-k", type=int, default=101)
    bands.add_argument("--r-max", type=int, default=60)
    sub.add_parser("pair", parents=[common], help="pair dynamics: correlators and participation ratios")
    sub.add_parser("coeffs", parents=[common], help="effective coefficients and anisotropies")
    sub.add_parser("verify", parents=[common], help="SW-oracle and invariant self-checks")
    return p


def resolve_config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = preset(args.preset or DEFAULT_PRESET[args.command])
    run = {}
    for key, attr in (("seed", "seed"), ("shots", "shots"), ("disorder_samples", "disorder_samples"),
                      ("threads", "threads")):
        val = getattr(args, key, None)
        if val is not None:
            run[attr] = val
    outputs = {}
    if args.format:
        outputs["format"] = args.format
    if args.plots is not None:
        outputs["plots"] = args.plots
    sections = {}
    if run:
        sections["run"] = run
    if outputs:
        sections["outputs"] = outputs
    return cfg.replace(**sections).validate() if sections else cfg


def _error_payload(exc: RydmagnonError) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    if hasattr(exc, "condition"):
        payload["condition"] = exc.condition
    return payload


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        args.plots = cfg.outputs.plots
        _echo_units(cfg, out)
        w = OutputWriter(args.out or Path("rydmagnon-out") / args.command, cfg.outputs.format)
        COMMANDS[args.command](cfg, args, w, out)
        w.manifest(args.command, cfg)
    except RydmagnonError as exc:
        print(json.dumps(_error_payload(exc)), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
