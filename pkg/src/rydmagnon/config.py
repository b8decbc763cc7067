"""Experiment configuration and the presets of the published experiment tables.

Frequencies in configs are f/2pi in MHz, distances in um, times in us, sites
0-based (a "3rd and 4th atom" in 1-based counting are sites 2 and 3 here).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import ChainGeometry, DriveParams
from .units import C6_71S_MHZ, TWO_PI, to_angular

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass(frozen=True)
class GeometrySpec:
    n_sites: int = 2
    spacing_um: float = 4.95
    positions_um: tuple | None = None
    c6_mhz_um6: float = C6_71S_MHZ


@dataclass(frozen=True)
class DriveSpec:
    omega_mhz: float = 1.52
    delta_mhz: float = 5.0


@dataclass(frozen=True)
class RampSegment:
    """Linear ramp (omega, delta) start -> end over ``duration_us``."""

    duration_us: float
    omega_start_mhz: float
    omega_end_mhz: float
    delta_start_mhz: float
    delta_end_mhz: float


@dataclass(frozen=True)
class InitSpec:
    excited: tuple = (1,)
    prep: str = "ideal"            # "ideal" or "sweep"
    addressing_mhz: tuple = ()     # per-site offsets during the preparation sweep
    delta_i_mhz: float = 0.0
    delta_f_mhz: float = 0.0
    p_fail: float = 0.0            # probability an addressed atom stays in |g>
    schedule: tuple = ()           # explicit RampSegments; overrides the default sweep


@dataclass(frozen=True)
class NoiseSpec:
    gamma_ind_mhz: float = 0.0
    gamma_col_mhz: float = 0.0
    sigma_radial_um: float = 0.0
    sigma_axial_um: float = 0.0
    t1_us: float = 43.0
    amplitude_damping: bool = False


@dataclass(frozen=True)
class DetectionSpec:
    p_r_given_g: float = 0.01
    p_g_given_r: float | None = None   # None: 1 - exp(-t_trap / t1)
    t_trap_offset_us: float = 1.0      # trap-off time before the quench (preparation)


@dataclass(frozen=True)
class RunSpec:
    t_max_us: float = 4.0
    n_times: int = 81
    shots: int = 0
    disorder_samples: int = 0
    seed: int = 0
    model: str = "exact"           # "exact" Ising or "effective" sector model
    step_fraction: float = 0.01
    threads: int = 1
    integrator: str = "rk4"        # "rk4" or "split" (master equation only)
    dressing: str = "sudden"       # "sudden" quench or "adiabatic" switch of the dressing field


@dataclass(frozen=True)
class OutputSpec:
    format: str = "csv"
    plots: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "custom"
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    drive: DriveSpec = field(default_factory=DriveSpec)
    init: InitSpec = field(default_factory=InitSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    detection: DetectionSpec = field(default_factory=DetectionSpec)
    run: RunSpec = field(default_factory=RunSpec)
    outputs: OutputSpec = field(default_factory=OutputSpec)

    def build_geometry(self) -> ChainGeometry:
        g = self.geometry
        c6 = TWO_PI * g.c6_mhz_um6
        if g.positions_um is not None:
            return ChainGeometry(np.array(g.positions_um, dtype=float), c6)
        return ChainGeometry.chain(g.n_sites, g.spacing_um, c6)

    def quench_drive(self) -> DriveParams:
        return DriveParams.from_mhz(self.drive.omega_mhz, self.drive.delta_mhz)

    @property
    def n_sites(self) -> int:
        g = self.geometry
        return len(g.positions_um) if g.positions_um is not None else g.n_sites

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.run.t_max_us, self.run.n_times)

    def prep_schedule(self) -> list[RampSegment]:
        """Ramp segments of the preparation sweep (empty for ideal preparation)."""
        i = self.init
        if i.prep == "ideal":
            return []
        if i.schedule:
            return list(i.schedule)
        om = self.drive.omega_mhz
        return [RampSegment(0.1, 0.0, om, i.delta_i_mhz, i.delta_i_mhz),
                RampSegment(0.8, om, om, i.delta_i_mhz, i.delta_f_mhz),
                RampSegment(0.1, om, 0.0, i.delta_f_mhz, i.delta_f_mhz)]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with some fields of some sections replaced: ``replace(run={"shots": 10})``."""
        updates = {}
        for key, val in sections.items():
            if key == "name":
                updates[key] = val
            else:
                updates[key] = dataclasses.replace(getattr(self, key), **val)
        return dataclasses.replace(self, **updates)

    def validate(self) -> "ExperimentConfig":
        n = self.n_sites
        if n < 1:
            raise ConfigError("need at least one site")
        if any(not 0 <= s < n for s in self.init.excited):
            raise ConfigError(f"excited sites {self.init.excited} out of range for {n} sites")
        if len(set(self.init.excited)) != len(self.init.excited):
            raise ConfigError("excited sites must be distinct")
        if self.init.prep not in ("ideal", "sweep"):
            raise ConfigError("init.prep must be 'ideal' or 'sweep'")
        if self.init.addressing_mhz and len(self.init.addressing_mhz) != n:
            raise ConfigError("init.addressing_mhz needs one entry per site")
        if not 0 <= self.init.p_fail <= 1:
            raise ConfigError("init.p_fail must be a probability")
        if self.drive.omega_mhz < 0:
            raise ConfigError("drive.omega_mhz must be >= 0")
        if self.drive.delta_mhz == 0:
            raise ConfigError("drive.delta_mhz = 0 is resonant; the dressing scheme needs Delta != 0")
        nz = self.noise
        if min(nz.gamma_ind_mhz, nz.gamma_col_mhz, nz.sigma_radial_um, nz.sigma_axial_um) < 0 or nz.t1_us <= 0:
            raise ConfigError("noise rates and widths must be non-negative, t1 positive")
        d = self.detection
        for p in (d.p_r_given_g, d.p_g_given_r):
            if p is not None and not 0 <= p <= 1:
                raise ConfigError("detection probabilities must lie in [0, 1]")
        r = self.run
        if r.t_max_us < 0 or r.n_times < 1:
            raise ConfigError("run.t_max_us must be >= 0 and run.n_times >= 1")
        if r.shots < 0 or r.disorder_samples < 0:
            raise ConfigError("shots and disorder_samples must be >= 0")
        if r.model not in ("exact", "effective"):
            raise ConfigError("run.model must be 'exact' or 'effective'")
        if r.integrator not in ("rk4", "split"):
            raise ConfigError("run.integrator must be 'rk4' or 'split'")
        if r.dressing not in ("sudden", "adiabatic"):
            raise ConfigError("run.dressing must be 'sudden' or 'adiabatic'")
        if r.threads < 1:
            raise ConfigError("run.threads must be >= 1")
        if not 0 < r.step_fraction <= 1:
            raise ConfigError("run.step_fraction must lie in (0, 1]")
        if self.outputs.format not in ("csv", "json"):
            raise ConfigError("outputs.format must be csv or json")
        if self.geometry.positions_um is None and self.geometry.spacing_um <= 0:
            raise ConfigError("geometry.spacing_um must be positive")
        try:
            self.build_geometry()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


_SECTIONS = {
    "geometry": GeometrySpec, "drive": DriveSpec, "init": InitSpec, "noise": NoiseSpec,
    "detection": DetectionSpec, "run": RunSpec, "outputs": OutputSpec,
}


def _section(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    data = dict(data)
    for key in ("excited", "addressing_mhz"):
        if key in data:
            data[key] = tuple(data[key])
    if "positions_um" in data and data["positions_um"] is not None:
        data["positions_um"] = tuple(tuple(float(x) for x in p) for p in data["positions_um"])
    if "schedule" in data:
        try:
            data["schedule"] = tuple(RampSegment(**seg) for seg in data["schedule"])
        except TypeError as exc:
            raise ConfigError(f"bad schedule segment: {exc}") from exc
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config; sections missing from ``data`` come from ``base``."""
    base = base or ExperimentConfig()
    unknown = set(data) - set(_SECTIONS) - {"name", "preset"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {"name": data.get("name", base.name)}
    for name, cls in _SECTIONS.items():
        if name in data:
            merged = {**dataclasses.asdict(getattr(base, name)), **data[name]}
            if name == "init" and "schedule" in merged:
                merged["schedule"] = [dataclasses.asdict(s) if isinstance(s, RampSegment) else s
                                      for s in merged["schedule"]]
            kwargs[name] = _section(cls, merged, name)
        else:
            kwargs[name] = getattr(base, name)
    return ExperimentConfig(**kwargs).validate()


def load_config(path) -> ExperimentConfig:
    """Read a TOML config. A top-level ``preset = "name"`` seeds the defaults."""
    try:
        data = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base = preset(data["preset"]) if "preset" in data else None
    return config_from_dict(data, base)


def _j_nn(omega_mhz, delta_mhz, spacing):
    """Angular NN exchange for preset time windows."""
    w, d = to_angular(omega_mhz), to_angular(delta_mhz)
    v = TWO_PI * C6_71S_MHZ / spacing**6
    return abs(w**2 * v / (4 * d * (d - v)))


def _addressing(n, sites, values):
    out = [0.0] * n
    for s, v in zip(sites, values):
        out[s] = v
    return tuple(out)


PRESETS = (
    "two-atom-exchange",
    "quantum-walk",
    "tight-pair-transport",
    "tight-pair-frozen",
    "loose-pair-transport",
    "loose-pair-free",
    "bound-state-theory",
)


def preset(name: str) -> ExperimentConfig:
    """Config mirroring one row of the experiment tables.

    ``bound-state-theory`` is the parameter point Delta/Omega = -3,
    V_{i,i+1}/Delta = -8 used for the two-magnon spectrum; its spacing is
    chosen so that V_1/2pi = 24 MHz at Omega/2pi = 1 MHz.
    """
    if name == "two-atom-exchange":
        cfg = ExperimentConfig(
            name=name, geometry=GeometrySpec(2, 4.95), drive=DriveSpec(1.52, 5.0),
            init=InitSpec(excited=(1,)), run=RunSpec(t_max_us=8.0, n_times=161))
    elif name == "quantum-walk":
        cfg = ExperimentConfig(
            name=name, geometry=GeometrySpec(7, 4.95), drive=DriveSpec(2.54, -5.0),
            init=InitSpec(excited=(3,), addressing_mhz=_addressing(7, (3,), (-15.8,)),
                          delta_i_mhz=5.0, delta_f_mhz=30.0),
            run=RunSpec(t_max_us=2.0, n_times=81))
    elif name in ("tight-pair-transport", "tight-pair-frozen"):
        delta = 12.0 if name == "tight-pair-transport" else -3.3
        t_max = 2.8 * np.pi / _j_nn(2.54, delta, 7.0)
        cfg = ExperimentConfig(
            name=name, geometry=GeometrySpec(6, 7.0), drive=DriveSpec(2.54, delta),
            init=InitSpec(excited=(2, 3), addressing_mhz=_addressing(6, (2, 3), (-20.3, -18.6)),
                          delta_i_mhz=10.0, delta_f_mhz=35.0),
            run=RunSpec(t_max_us=float(t_max), n_times=57))
    elif name in ("loose-pair-transport", "loose-pair-free"):
        spacing = 4.95 if name == "loose-pair-transport" else 8.5
        t_max = 1.7 * np.pi / _j_nn(2.06, -3.0, spacing)
        cfg = ExperimentConfig(
            name=name, geometry=GeometrySpec(7, spacing), drive=DriveSpec(2.06, -3.0),
            init=InitSpec(excited=(2, 4), addressing_mhz=_addressing(7, (2, 4), (-7.4, -5.4)),
                          delta_i_mhz=3.0, delta_f_mhz=15.0),
            run=RunSpec(t_max_us=float(t_max), n_times=35))
    elif name == "bound-state-theory":
        spacing = (C6_71S_MHZ / 24.0) ** (1 / 6)
        cfg = ExperimentConfig(
            name=name, geometry=GeometrySpec(9, float(spacing)), drive=DriveSpec(1.0, -3.0),
            init=InitSpec(excited=(3, 4)), run=RunSpec(t_max_us=10.0, n_times=51, model="effective"))
    else:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return cfg.validate()


EXPERIMENT_NOISE = NoiseSpec(gamma_ind_mhz=0.2, gamma_col_mhz=0.4, sigma_radial_um=0.1, sigma_axial_um=0.3, t1_us=43.0)
