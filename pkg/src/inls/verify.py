# src/inls/verify.py

"""
Invariant suite behind `verify`.

Each check returns CheckResult rows; a check that raises is recorded as a
failure with the exception text. Quick mode uses n = 1024 and shortened
runs; full mode uses the default resolution of the config.
"""

from dataclasses import dataclass
import logging
import math
from typing import Callable, Dict, List

import numpy as np
from tqdm import tqdm

from .config import SolverConfig
from .dynamics import BLOWUP, COMPLETED, blowup_experiment, simulate, stability_experiment
from .errors import InlsError, UnboundedBelow
from .functionals import critical_point_count, gaussian, gn_quotient, mass, seeded_fields
from .grid import Field, make_grid
from .params import ProblemParams
from .stationary import (
    STATUS_FAIL,
    STATUS_LIMITED,
    SolveReport,
    best_fiber_start,
    local_min_solve,
    mountain_pass_solve,
    normalized_gradient_flow,
    pohozaev_convergence,
    pohozaev_lower_min,
    sigma_curve,
)
from .thresholds import CheckResult, c1, c1_star, c2, c3, gn_constant, ground_state_field, hat_c2
from .zeromass import fit_tail, ground_state_zero_mass

LOGGER = logging.getLogger("inls.verify")


@dataclass(frozen=True)
class Resolution:
    n: int
    r_max: float
    zero_mass_n: int
    random_fields: int
    curve_points: int
    T_conservation: float
    dt_conservation: float
    energy_drift_tol: float
    T_stability: float
    dt_experiment: float


QUICK = Resolution(1024, 12.0, 2048, 20, 5, 0.25, 2.5e-4, 1e-5, 2.0, 2e-3)
FULL = Resolution(4096, 12.0, 4096, 100, 8, 1.0, 1e-4, 1e-6, 20.0, 1e-3)

TWO_SOLUTION = ProblemParams(dim=1, b=0.5, p=8.0, q=3.0, mu=1)
MASS_CRITICAL = ProblemParams(dim=2, b=1.0, p=3.0, q=2.5, mu=1)
GLOBAL_MIN = ProblemParams(dim=3, b=0.5, p=2.8, q=2.4, mu=1)
FOCUSING = ProblemParams(dim=3, b=0.5, p=4.0, q=3.5, mu=1)
DEFOCUSING = ProblemParams(dim=3, b=0.5, p=4.0, q=2.5, mu=-1)
DEFOCUSING_CRITICAL = ProblemParams(dim=2, b=1.0, p=3.0, q=2.5, mu=-1)
GN_CASES = ((1, 0.5, 4.0), (2, 1.0, 3.0), (3, 0.5, 4.0))
TAIL_CASES = (
    (ProblemParams(dim=3, b=0.5, p=4.0, q=2.5, mu=-1), 3.0),
    (ProblemParams(dim=3, b=0.5, p=4.5, q=4.0, mu=-1), 1.0),
)
RESONANCE = ProblemParams(dim=3, b=1.0, p=3.8, q=3.0, mu=-1)


class Suite:
    """Shared solves so that later checks reuse earlier states."""

    def __init__(self, res: Resolution, settings: SolverConfig | None = None, seed: int = 20240601):
        self.res = res
        self.settings = settings or SolverConfig()
        self.seed = seed
        self._cache: Dict[str, SolveReport] = {}

    def grid(self, params: ProblemParams, r_max: float | None = None):
        return make_grid(params.dim, params.b, self.res.n, r_max or self.res.r_max)

    def state(self, key: str, build: Callable[[], SolveReport]) -> SolveReport:
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    # -------- shared states --------

    def two_solution_states(self):
        p = TWO_SOLUTION
        g = self.grid(p)
        c = 0.5 * c2(p, g, corrected=True)
        lo = self.state("M", lambda: local_min_solve(p, c, g, self.settings))
        hi = self.state("sigma-", lambda: mountain_pass_solve(p, c, g, self.settings))
        return c, lo, hi

    def global_min_state(self) -> SolveReport:
        def build():
            p = GLOBAL_MIN.with_mass(2.0)
            g = self.grid(p)
            return normalized_gradient_flow(p, best_fiber_start(p, g, 2.0), settings=self.settings)

        return self.state("m", build)

    def critical_state(self) -> SolveReport:
        def build():
            g = self.grid(MASS_CRITICAL)
            c = 0.5 * c1(MASS_CRITICAL, g)
            p = MASS_CRITICAL.with_mass(c)
            return normalized_gradient_flow(p, best_fiber_start(p, g, c), settings=self.settings)

        return self.state("m-critical", build)

    def focusing_state(self) -> SolveReport:
        return self.state("sigma", lambda: mountain_pass_solve(FOCUSING, 2.0, self.grid(FOCUSING), self.settings))

    def defocusing_state(self) -> SolveReport:
        def build():
            g = self.grid(DEFOCUSING)
            return mountain_pass_solve(DEFOCUSING, 0.5 * c3(DEFOCUSING, g), g, self.settings)

        return self.state("sigma-defocusing", build)

    def defocusing_critical_state(self) -> SolveReport:
        def build():
            g = self.grid(DEFOCUSING_CRITICAL)
            lo, hi = c1(DEFOCUSING_CRITICAL, g), c1_star(DEFOCUSING_CRITICAL, g)
            return mountain_pass_solve(DEFOCUSING_CRITICAL, math.sqrt(lo * min(hi, 4.0 * lo)), g, self.settings)

        return self.state("sigma-critical-set", build)

    # -------- checks --------

    def pohozaev(self) -> List[CheckResult]:
        out = []
        builders = {
            "global-min": (self.global_min_state, GLOBAL_MIN),
            "critical-global": (self.critical_state, MASS_CRITICAL),
            "supercritical-focusing": (self.focusing_state, FOCUSING),
            "defocusing-supercritical": (self.defocusing_state, DEFOCUSING),
            "defocusing-critical": (self.defocusing_critical_state, DEFOCUSING_CRITICAL),
        }
        states = [(name, build(), params) for name, (build, params) in builders.items()]
        _, lo, hi = self.two_solution_states()
        states += [("two-solution local-min", lo, TWO_SOLUTION), ("two-solution mountain-pass", hi, TWO_SOLUTION)]
        for name, rep, params in states:
            if not rep.converged:
                out.append(CheckResult(f"pohozaev[{name}]", False, "solver did not converge"))
                continue
            conv = pohozaev_convergence(rep, params)
            out.append(CheckResult.graded(
                f"pohozaev[{name}]",
                conv["status"],
                f"|Q|/‖∇u‖² = {conv['coarse']:.2e} -> {conv['fine']:.2e} at 2n (gain {conv['gain']:.2f}, "
                f"extrapolated {conv['extrapolated']:.1e}, tol {conv['tol']:.0e})",
            ))
        return out

    def gn_sharpness(self) -> List[CheckResult]:
        out = []
        for n, b, p in GN_CASES:
            params = ProblemParams(dim=n, b=b, p=p)
            g = self.grid(params)
            gn = gn_constant(params, g)
            qf = ground_state_field(params, g)
            ratio = gn_quotient(qf, params) / gn.value
            fields = seeded_fields(qf.grid, self.seed, self.res.random_fields, 1.0)
            worst = max(gn_quotient(u, params) / gn.value for u in fields)
            out.append(CheckResult(f"gn[{n},{b:g},{p:g}]", abs(ratio - 1.0) <= 1e-2 and worst <= 1.0,
                                   f"Q quotient/C = {ratio:.6f}, random max = {worst:.4f}"))
        return out

    def c1_identity(self) -> List[CheckResult]:
        out = []
        for n, b, _ in GN_CASES:
            params = ProblemParams(dim=n, b=b, p=2.0 + 2.0 * (2.0 - b) / n)
            g = self.grid(params)
            value = c1(params, g)
            qm = gn_constant(params, g).q_norm_sq
            out.append(CheckResult(f"c1[{n},{b:g}]", abs(value - qm) / qm <= 1e-3, f"c1 = {value:.8g}, ‖Q‖² = {qm:.8g}"))
        return out

    def mass_critical_dichotomy(self) -> List[CheckResult]:
        rep = self.critical_state()
        below = CheckResult("critical_below_c1", rep.converged and rep.energy.total < 0, f"m(c1/2) = {rep.energy.total:.6g}")
        g = self.grid(MASS_CRITICAL)
        c = 1.5 * c1(MASS_CRITICAL, g)
        p = MASS_CRITICAL.with_mass(c)
        try:
            normalized_gradient_flow(p, best_fiber_start(p, g, c), settings=self.settings)
            above = CheckResult("critical_above_c1", False, "flow converged above c1")
        except UnboundedBelow as e:
            above = CheckResult("critical_above_c1", True, str(e))
        return [below, above]

    def two_solutions(self) -> List[CheckResult]:
        c, lo, hi = self.two_solution_states()
        dist = math.sqrt(mass(Field(lo.state.grid, lo.state.values - hi.state.values)))
        alt = self.state("P+", lambda: pohozaev_lower_min(TWO_SOLUTION, c, lo.state.grid, self.settings))
        rel = abs(alt.energy.total - lo.energy.total) / abs(lo.energy.total)
        return [
            CheckResult("local_min_signs", lo.converged and lo.energy.total < 0 and lo.psi > 0,
                        f"E = {lo.energy.total:.6g}, Ψ = {lo.psi:.4g}"),
            CheckResult("mountain_pass_signs", hi.converged and hi.energy.total > 0 and hi.psi < 0,
                        f"E = {hi.energy.total:.6g}, Ψ = {hi.psi:.4g}"),
            CheckResult("two_solutions_distinct", dist > 1e-2, f"‖u_M - u_σ‖ = {dist:.4g}"),
            CheckResult("M_matches_P_plus_minimum", rel <= 1e-4, f"M = {lo.energy.total:.8g}, inf over P₊ = {alt.energy.total:.8g}"),
        ]

    def fiber_census(self) -> List[CheckResult]:
        p = TWO_SOLUTION
        g = self.grid(p)
        c = 0.5 * c2(p, g, corrected=True)
        counts = critical_point_count(seeded_fields(g, self.seed, 10, c), p)
        c_big = 2.0 * hat_c2(p, g)
        big = critical_point_count(seeded_fields(g, self.seed, 10, c_big), p)
        return [
            CheckResult("fiber_two_critical_points", all(k == 2 for k in counts), f"counts = {counts}"),
            CheckResult("fiber_structure_lost_above_hat_c2", any(k != 2 for k in big), f"counts = {big}"),
        ]

    def multipliers(self) -> List[CheckResult]:
        _, lo, hi = self.two_solution_states()
        reps = {
            "global-min": self.global_min_state(),
            "critical-global": self.critical_state(),
            "two-solution M": lo,
            "two-solution σ-": hi,
            "supercritical-focusing": self.focusing_state(),
            "defocusing c < c3": self.defocusing_state(),
            "defocusing c1 < c < c1*": self.defocusing_critical_state(),
        }
        return [CheckResult(f"lambda_positive[{k}]", r.lam > 0, f"λ = {r.lam:.6g}") for k, r in reps.items()]

    def zero_mass(self) -> List[CheckResult]:
        out = []
        for params, alpha in TAIL_CASES:
            g = make_grid(params.dim, params.b, self.res.zero_mass_n, 80.0)
            zm = ground_state_zero_mass(params, g)
            fit = fit_tail(zm.report.state, params)
            out.append(CheckResult(f"tail_slope[q={params.q:g}]", abs(fit.slope + alpha) <= 0.05 * alpha,
                                   f"slope = {fit.slope:.4f}, expected {-alpha:g}"))
            status = zm.identity_status() if zm.sigma0 > 0 else STATUS_FAIL
            out.append(CheckResult.graded(
                f"zero_mass_pohozaev[q={params.q:g}]",
                status,
                f"|Q|/‖∇u‖² = {zm.identities['relative_pohozaev']:.2e}, tail share {zm.tail_share:.1e}, σ₀ = {zm.sigma0:.6g}",
            ))
        g = make_grid(RESONANCE.dim, RESONANCE.b, self.res.zero_mass_n, 80.0)
        fit = fit_tail(ground_state_zero_mass(RESONANCE, g).report.state, RESONANCE)
        out.append(CheckResult("resonance_log_fit", fit.log_residual is not None and fit.log_residual < fit.power_residual,
                               f"log residual {fit.log_residual:.3e} vs power {fit.power_residual:.3e}, "
                               f"ln r exponent {fit.log_slope:.4f} vs {fit.log_slope_expected:.4f} "
                               f"({fit.log_slope_deviation:.1%} off)"))
        return out

    def sigma_curve_shape(self) -> List[CheckResult]:
        g = self.grid(FOCUSING)
        cs = np.geomspace(0.5, 4.0, self.res.curve_points)
        pts = sigma_curve(FOCUSING, cs, g, self.settings, progress=False)
        levels = [pt.level for pt in pts]
        ok = all(pt.ok for pt in pts)
        mono = ok and all(b <= a + 1e-4 * max(1.0, abs(a)) for a, b in zip(levels, levels[1:]))
        growth = ok and levels[0] > levels[1] > levels[2]
        return [
            CheckResult("sigma_nonincreasing", mono, f"σ = {[round(x, 6) if x is not None else None for x in levels]}"),
            CheckResult("sigma_diverges_toward_c0", growth, "σ grows as c decreases toward 0"),
        ]

    def conservation(self) -> List[CheckResult]:
        p = FOCUSING
        g = self.grid(p)
        psi0 = gaussian(g, 1.0, 1.0)
        trace = simulate(psi0, self.res.T_conservation, self.res.dt_conservation, p, sample_every=10)
        return [
            CheckResult("run_completed", trace.outcome == COMPLETED, trace.outcome),
            CheckResult("mass_drift", trace.mass_drift <= 1e-6, f"{trace.mass_drift:.2e}"),
            CheckResult("energy_drift", trace.energy_drift <= self.res.energy_drift_tol, f"{trace.energy_drift:.2e}"),
            CheckResult("virial_identity", trace.virial_defect() <= 1e-2, f"{trace.virial_defect():.2e}"),
        ]

    def stability_blowup(self) -> List[CheckResult]:
        stable = stability_experiment(self.global_min_state(), 1e-2, self.res.T_stability, GLOBAL_MIN, dt=self.res.dt_experiment)
        blow = blowup_experiment(self.focusing_state(), 1.2, 10.0, FOCUSING, dt=self.res.dt_experiment)
        return [
            CheckResult("orbital_stability", stable["outcome"] == COMPLETED and stable["within_ten_eps"],
                        f"max deviation {stable['max_deviation']:.3e}"),
            CheckResult("fiber_scaled_blowup", blow["outcome"] == BLOWUP and blow["q_negative_throughout"],
                        f"{blow['outcome']} at t = {blow['t_end']:.4g}, class {blow['classification']}"),
        ]


CHECKS = (
    ("pohozaev", Suite.pohozaev),
    ("gn_sharpness", Suite.gn_sharpness),
    ("c1_identity", Suite.c1_identity),
    ("mass_critical_dichotomy", Suite.mass_critical_dichotomy),
    ("two_solutions", Suite.two_solutions),
    ("fiber_census", Suite.fiber_census),
    ("multipliers", Suite.multipliers),
    ("zero_mass", Suite.zero_mass),
    ("sigma_curve", Suite.sigma_curve_shape),
    ("conservation", Suite.conservation),
    ("stability_blowup", Suite.stability_blowup),
)


def run_suite(quick: bool = True, settings: SolverConfig | None = None, seed: int = 20240601, progress: bool = True) -> List[CheckResult]:
    suite = Suite(QUICK if quick else FULL, settings, seed)
    results: List[CheckResult] = []
    for name, check in tqdm(CHECKS, desc="verify", disable=not progress):
        LOGGER.info("=== %s ===", name)
        try:
            rows = check(suite)
        except InlsError as e:
            rows = [CheckResult(name, False, f"{type(e).__name__}: {e}")]
        for row in rows:
            (LOGGER.info if row.passed else LOGGER.warning)("%-40s %s  %s", row.name, row.status.upper(), row.detail)
        results.extend(rows)
    failed = sum(r.failed for r in results)
    limited = sum(r.status == STATUS_LIMITED for r in results)
    LOGGER.info("verify: %d checks, %d failed, %d resolution-limited", len(results), failed, limited)
    return results
