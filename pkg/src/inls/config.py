from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict

import yaml

from .errors import ConfigError, ParameterError
from .grid import RadialGrid, build_grid
from .params import ProblemParams
from .paths import CONFIGS


@dataclass
class ParamsConfig:
    dim: int = 3
    b: float = 0.5
    p: float = 4.0
    q: float | None = 3.5
    mu: int = 1
    mass: float | None = None


@dataclass
class GridConfig:
    n_nodes: int = 4096
    r_max: float = 12.0


@dataclass
class SolverConfig:
    tol: float = 1e-8
    newton_switch: float = 1e-4
    max_iter: int = 20000
    tau0: float = 0.1
    tau_max: float = 10.0
    tau_min: float = 1e-12
    stall_window: int = 10
    stall_tol: float = 1e-12
    energy_floor: float = 1e6
    collapse_fraction: float = 0.05
    newton_max_iter: int = 60
    level: str = "auto"  # auto | m | M | sigma


@dataclass
class DynamicsConfig:
    T: float = 1.0
    dt: float = 1e-4
    sample_every: int = 10
    initial: str = "gaussian"  # gaussian | ground-state | fiber-scaled
    width: float = 1.0
    tau: float = 1.2
    eps: float = 0.01
    blowup_factor: float = 1e3
    dt_min: float = 1e-12


@dataclass
class SweepConfig:
    kind: str = "sigma"  # sigma | m
    c_min: float = 0.5
    c_max: float = 5.0
    count: int = 8


@dataclass
class ZeroMassConfig:
    n_nodes: int = 4096
    r_max: float = 80.0
    fit_lo: float = 10.0
    fit_hi_fraction: float = 0.8


@dataclass
class RunConfig:
    project_name: str = "inls-lab"
    seed: int = 20240601
    output_dir: str | None = None
    params: ParamsConfig = field(default_factory=ParamsConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    zeromass: ZeroMassConfig = field(default_factory=ZeroMassConfig)

    # -------- validation --------

    def problem(self) -> ProblemParams:
        pc = self.params
        try:
            return ProblemParams(
                dim=int(pc.dim),
                b=float(pc.b),
                p=float(pc.p),
                q=None if pc.q is None else float(pc.q),
                mu=int(pc.mu),
                mass_target=None if pc.mass is None else float(pc.mass),
            )
        except ParameterError as e:
            name = "mass" if e.field_name == "mass_target" else e.field_name
            raise ConfigError(f"params.{name or '?'}", str(e)) from e

    def radial_grid(self, zero_mass: bool = False) -> RadialGrid:
        block, label = (self.zeromass, "zeromass") if zero_mass else (self.grid, "grid")
        try:
            return build_grid(self.problem(), block.n_nodes, float(block.r_max))
        except ConfigError:
            raise
        except ParameterError as e:
            key = "n_nodes" if "n_nodes" in str(e) else "r_max"
            raise ConfigError(f"{label}.{key}", str(e)) from e

    def validate(self) -> "RunConfig":
        self.problem()
        self.radial_grid()
        s = self.solver
        for name in ("tol", "newton_switch", "tau0", "tau_max", "tau_min", "energy_floor", "collapse_fraction"):
            if not getattr(s, name) > 0:
                raise ConfigError(f"solver.{name}", "must be positive")
        if s.level not in ("auto", "m", "M", "sigma"):
            raise ConfigError("solver.level", f"unknown level {s.level!r}")
        d = self.dynamics
        if not (d.T > 0 and d.dt > 0):
            raise ConfigError("dynamics.dt" if d.T > 0 else "dynamics.T", "T and dt must be positive")
        if d.initial not in ("gaussian", "ground-state", "fiber-scaled"):
            raise ConfigError("dynamics.initial", f"unknown recipe {d.initial!r}")
        if d.sample_every < 1:
            raise ConfigError("dynamics.sample_every", "must be >= 1")
        w = self.sweep
        if w.kind not in ("sigma", "m"):
            raise ConfigError("sweep.kind", f"unknown curve kind {w.kind!r}")
        if not (0 < w.c_min < w.c_max) or w.count < 2:
            raise ConfigError("sweep", "need 0 < c_min < c_max and count >= 2")
        return self


def _block(cls, raw: Dict[str, Any], name: str):
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a mapping")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown key")
    return cls(**raw)


def load_config(path: Path | None = None) -> RunConfig:
    cfg_path = path or (CONFIGS / "inls.yaml")
    with open(cfg_path, "r") as f:
        raw = yaml.safe_load(f) or {}
    top = {"project_name", "seed", "output_dir", "params", "grid", "solver", "dynamics", "sweep", "zeromass"}
    for key in raw:
        if key not in top:
            raise ConfigError(key, "unknown key")
    return RunConfig(
        project_name=raw.get("project_name", "inls-lab"),
        seed=int(raw.get("seed", 20240601)),
        output_dir=raw.get("output_dir"),
        params=_block(ParamsConfig, raw.get("params"), "params"),
        grid=_block(GridConfig, raw.get("grid"), "grid"),
        solver=_block(SolverConfig, raw.get("solver"), "solver"),
        dynamics=_block(DynamicsConfig, raw.get("dynamics"), "dynamics"),
        sweep=_block(SweepConfig, raw.get("sweep"), "sweep"),
        zeromass=_block(ZeroMassConfig, raw.get("zeromass"), "zeromass"),
    )
