"""
inls-lab: experiment runner

Subcommands:

    thresholds   GN constants and mass thresholds (--check cross-checks, --locate the m(c) < 0 onset)
    solve        stationary states for the configured regime and mass
    fiber-scan   E(u_t) along the fiber of a Gaussian in S(c)
    zeromass     zero-mass ground state, σ₀ and the tail fit (--scan, --saturation)
    simulate     time integration, or --experiment stability | blowup | instability
    curves       σ(c) or m(c) on a geometric range of masses
    verify       invariant suite; exits 1 on any failure

Run with:
    python -m src.inls.cli <subcommand> [--config configs/inls.yaml] [--json]
"""

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd
import yaml

from .config import RunConfig, load_config
from .errors import InlsError, ParameterError, RegimeMismatch
from .functionals import fiber_scan, gaussian
from .io import dumps, safe_filename, write_field_csv, write_frame_csv, write_json
from .params import classify_regime
from .paths import output_dir

logging.basicConfig(level=logging.INFO, format="%(asctime)s | %(levelname)s | %(message)s")
LOGGER = logging.getLogger("inls.cli")

SUBCOMMANDS = ("thresholds", "solve", "fiber-scan", "zeromass", "simulate", "curves", "verify")


####################################################
# 0. Helpers
####################################################

class Artifacts:
    """Collects the files one subcommand writes under <out>/<subcommand>_<tag>/."""

    def __init__(self, root: Path, name: str):
        self.dir = root / safe_filename(name)
        self.paths: List[str] = []

    def json(self, payload: Any, name: str = "report.json") -> Path:
        path = write_json(payload, self.dir / name)
        self.paths.append(str(path))
        return path

    def field(self, u, name: str) -> Path:
        path = write_field_csv(u, self.dir / name)
        self.paths.append(str(path))
        return path

    def frame(self, df: pd.DataFrame, name: str) -> Path:
        path = write_frame_csv(df, self.dir / name)
        self.paths.append(str(path))
        return path


def banner(title: str) -> None:
    LOGGER.info("=== %s ===", title)


####################################################
# 1. Subcommands
####################################################

def cmd_thresholds(config: RunConfig, art: Artifacts, args) -> Dict[str, Any]:
    from .thresholds import run_checks, threshold_report

    banner("Thresholds")
    params, grid = config.problem(), config.radial_grid()
    if getattr(args, "check", False):
        report = run_checks(params, grid, config.solver, seed=config.seed)
    else:
        report = threshold_report(params, grid)
    payload = report.to_dict()
    payload["failed_checks"] = [c.name for c in report.checks if c.failed]
    if getattr(args, "locate", False):
        from .thresholds import locate_mass_threshold

        sw = config.sweep
        lo, hi = locate_mass_threshold(params, sw.c_min, sw.c_max, grid, config.solver)
        payload["mass_threshold_bracket"] = [lo, hi]
    return payload


def cmd_solve(config: RunConfig, art: Artifacts, args) -> Dict[str, Any]:
    from .stationary import solve

    banner("Stationary states")
    params, grid = config.problem(), config.radial_grid()
    c = params.require_mass()
    reports = solve(params, c, grid, config.solver, level=config.solver.level)
    out = []
    for rep in reports:
        name = safe_filename(rep.level_tag.replace("(", "").replace(")", ""))
        art.field(rep.state, f"state_{name}.csv")
        out.append(rep.to_dict())
    return {"regime": classify_regime(params).to_dict(), "c": c, "states": out}


def cmd_fiber_scan(config: RunConfig, art: Artifacts, args) -> Dict[str, Any]:
    banner("Fiber scan")
    params, grid = config.problem(), config.radial_grid()
    c = params.require_mass()
    u = gaussian(grid, c, config.dynamics.width)
    scan = fiber_scan(u, params)
    art.frame(pd.DataFrame({"t": scan.t_values, "energy": scan.energies, "dE_sign": scan.derivative_signs}), "fiber.csv")
    payload = scan.to_dict()
    payload.pop("t_values")
    payload.pop("energies")
    payload.pop("derivative_signs")
    payload["c"] = c
    payload["count"] = len(scan.critical_points)
    return payload


def cmd_zeromass(config: RunConfig, art: Artifacts, args) -> Dict[str, Any]:
    from .zeromass import fit_tail, ground_state_zero_mass

    banner("Zero-mass ground state")
    params = config.problem()
    grid = config.radial_grid(zero_mass=True)
    zm = ground_state_zero_mass(params, grid)
    art.field(zm.report.state, "zero_mass_state.csv")
    fit = fit_tail(zm.report.state, params, r_lo=config.zeromass.fit_lo, hi_fraction=config.zeromass.fit_hi_fraction)
    payload = {"sigma0": zm.sigma0, "state": zm.to_dict(), "tail_fit": fit.to_dict()}
    if getattr(args, "scan", False):
        from .zeromass import resonance_scan

        rows = resonance_scan(params, grid, r_lo=config.zeromass.fit_lo)
        art.frame(pd.DataFrame(rows).drop(columns=["fit_window"]), "resonance_scan.csv")
        payload["resonance_scan"] = rows
    if getattr(args, "saturation", False):
        from .zeromass import sigma_saturation_check

        sw = config.sweep
        cs = np.geomspace(sw.c_min, sw.c_max, sw.count)
        payload["saturation"] = sigma_saturation_check(
            params, cs, config.radial_grid(), grid, config.solver, progress=not args.json
        )
    return payload


def cmd_simulate(config: RunConfig, art: Artifacts, args) -> Dict[str, Any]:
    from .dynamics import initial_data, simulate, support_label
    from .stationary import solve

    banner("Simulation")
    params, grid = config.problem(), config.radial_grid()
    d = config.dynamics
    c = params.require_mass()
    experiment = getattr(args, "experiment", None) or "run"
    if experiment != "run":
        return _experiment(experiment, config, params, grid, c)
    ground = None
    if d.initial != "gaussian":
        ground = solve(params, c, grid, config.solver, level=config.solver.level)[-1].state
    psi0 = initial_data(d.initial, grid, c, d.width, ground=ground, tau=d.tau)
    trace = simulate(psi0, d.T, d.dt, params, sample_every=d.sample_every, blowup_factor=d.blowup_factor, dt_min=d.dt_min)
    art.frame(trace.to_frame(), "trace.csv")
    art.field(trace.final_state, "final_state.csv")
    return {"initial": d.initial, "support": support_label(params), **trace.to_dict()}


def _experiment(name: str, config: RunConfig, params, grid, c: float) -> Dict[str, Any]:
    from .dynamics import blowup_experiment, instability_experiment, stability_experiment
    from .stationary import solve

    d = config.dynamics
    reports = solve(params, c, grid, config.solver, level=config.solver.level)
    # minimizers come first, the mountain-pass level last
    ground = reports[0] if name == "stability" else reports[-1]
    if name == "stability":
        out = stability_experiment(ground, d.eps, d.T, params, d.dt, d.sample_every)
    elif name == "blowup":
        out = blowup_experiment(ground, d.tau, d.T, params, d.dt, d.sample_every)
    else:
        taus = [1.0 + (d.tau - 1.0) / 2 ** k for k in range(3)]
        out = instability_experiment(ground, taus, d.T, params, d.dt)
    return {"experiment": name, "ground_level": ground.level_tag, "ground_energy": ground.energy.total, **out}


def cmd_curves(config: RunConfig, art: Artifacts, args) -> Dict[str, Any]:
    from .stationary import m_curve, sigma_curve

    banner("Level curves")
    params, grid = config.problem(), config.radial_grid()
    sw = config.sweep
    cs = np.geomspace(sw.c_min, sw.c_max, sw.count)
    runner = sigma_curve if sw.kind == "sigma" else m_curve
    points = runner(params, cs, grid, config.solver, progress=not args.json)
    rows = [dataclasses.asdict(pt) for pt in points]
    art.frame(pd.DataFrame(rows), f"{sw.kind}_curve.csv")
    return {"kind": sw.kind, "points": rows, "failed": sum(not pt.ok for pt in points)}


def cmd_verify(config: RunConfig, art: Artifacts, args) -> Dict[str, Any]:
    from .verify import run_suite

    banner("Verify")
    results = run_suite(quick=not args.full, settings=config.solver, seed=config.seed, progress=not args.json)
    failed = [r.name for r in results if r.failed]
    limited = [r.name for r in results if r.status == "resolution-limited"]
    return {"mode": "full" if args.full else "quick", "checks": [r.to_dict() for r in results], "failed": failed,
            "resolution_limited": limited}


COMMANDS = {
    "thresholds": cmd_thresholds,
    "solve": cmd_solve,
    "fiber-scan": cmd_fiber_scan,
    "zeromass": cmd_zeromass,
    "simulate": cmd_simulate,
    "curves": cmd_curves,
    "verify": cmd_verify,
}


####################################################
# 2. Runner
####################################################

def run(config: RunConfig, subcommand: str, args: argparse.Namespace | None = None) -> int:
    """Validate, run one subcommand, write its artifacts; returns the exit status."""
    if subcommand not in COMMANDS:
        raise ParameterError(f"unknown subcommand {subcommand!r}; choose from {', '.join(SUBCOMMANDS)}")
    args = args or argparse.Namespace(json=False, full=False, check=False, out=None)
    root = output_dir(getattr(args, "out", None) or config.output_dir)

    try:
        config.validate()
        tag = config.problem().tag()
    except ParameterError as e:
        LOGGER.error("invalid configuration: %s", e)
        _emit({"status": "config-error", "error": str(e), "field": e.field_name}, None, args)
        return 2

    art = Artifacts(root, f"{subcommand}_{tag}")
    try:
        payload = COMMANDS[subcommand](config, art, args)
    except (ParameterError, RegimeMismatch) as e:
        LOGGER.error("%s: %s", type(e).__name__, e)
        _emit({"status": "parameter-error", "error": str(e)}, art, args)
        return 2
    except InlsError as e:
        LOGGER.error("%s failed: %s: %s", subcommand, type(e).__name__, e)
        _emit({"status": "solver-error", "error": f"{type(e).__name__}: {e}"}, art, args)
        return 1

    failed = payload.get("failed") if subcommand == "verify" else payload.get("failed_checks")
    status = 1 if failed else 0
    payload = {"status": "ok" if status == 0 else "checks-failed", "subcommand": subcommand,
               "project": config.project_name, "seed": config.seed, **payload}
    _emit(payload, art, args)
    LOGGER.info("%s finished with status %d; artifacts in %s", subcommand, status, art.dir)
    return status


def _emit(payload: Dict[str, Any], art: Artifacts | None, args) -> None:
    if art is not None:
        art.json(payload)
    if getattr(args, "json", False):
        sys.stdout.write(dumps(payload) + "\n")


####################################################
# 3. Argument parsing
####################################################

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description="inls-lab: normalized solutions with inhomogeneous nonlinearities")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=str, default=None, help="YAML config (defaults to configs/inls.yaml)")
    ap.add_argument("--out", type=str, default=None, help="Output directory (overrides INLS_OUTPUT_DIR)")
    ap.add_argument("--json", action="store_true", help="Also write the report to stdout")
    ap.add_argument("--verbose", action="store_true", help="DEBUG logging")

    g = ap.add_argument_group("problem")
    g.add_argument("--dim", type=int, default=None)
    g.add_argument("--b", type=float, default=None)
    g.add_argument("--p", type=float, default=None)
    g.add_argument("--q", type=float, default=None)
    g.add_argument("--mu", type=int, default=None)
    g.add_argument("--c", type=float, default=None, help="Mass target")
    g.add_argument("--n", type=int, default=None, help="Grid nodes")
    g.add_argument("--r-max", type=float, default=None)
    g.add_argument("--tol", type=float, default=None)
    g.add_argument("--level", choices=("auto", "m", "M", "sigma"), default=None)

    s = ap.add_argument_group("dynamics / sweeps")
    s.add_argument("--T", type=float, default=None)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--initial", choices=("gaussian", "ground-state", "fiber-scaled"), default=None)
    s.add_argument("--tau", type=float, default=None)
    s.add_argument("--sample-every", type=int, default=None)
    s.add_argument("--kind", choices=("sigma", "m"), default=None)
    s.add_argument("--c-min", type=float, default=None)
    s.add_argument("--c-max", type=float, default=None)
    s.add_argument("--count", type=int, default=None)

    s.add_argument("--experiment", choices=("run", "stability", "blowup", "instability"), default=None,
                   help="simulate: plain run or one of the ground-state experiments")

    ap.add_argument("--check", action="store_true", help="thresholds: run behavioral cross-checks")
    ap.add_argument("--locate", action="store_true", help="thresholds: bracket where m(c) turns negative (mu=-1, p<p_c)")
    ap.add_argument("--scan", action="store_true", help="zeromass: fitted exponent around the resonant q")
    ap.add_argument("--saturation", action="store_true", help="zeromass: compare sigma(c) on the sweep range with sigma0")
    mode = ap.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true", help="verify: reduced resolution (default)")
    mode.add_argument("--full", action="store_true", help="verify: acceptance resolution")
    return ap


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    pairs = (
        (config.params, {"dim": args.dim, "b": args.b, "p": args.p, "q": args.q, "mu": args.mu, "mass": args.c}),
        (config.grid, {"n_nodes": args.n, "r_max": args.r_max}),
        (config.solver, {"tol": args.tol, "level": args.level}),
        (config.dynamics, {"T": args.T, "dt": args.dt, "initial": args.initial, "tau": args.tau, "sample_every": args.sample_every}),
        (config.sweep, {"kind": args.kind, "c_min": args.c_min, "c_max": args.c_max, "count": args.count}),
    )
    for block, values in pairs:
        for key, value in values.items():
            if value is not None:
                setattr(block, key, value)
    return config


def main(argv: List[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        config = load_config(Path(args.config) if args.config else None)
    except (OSError, yaml.YAMLError, ParameterError) as e:
        LOGGER.error("cannot load config: %s", e)
        return 2
    return run(apply_overrides(config, args), args.subcommand, args)


if __name__ == "__main__":
    sys.exit(main())
