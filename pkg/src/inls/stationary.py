# src/inls/stationary.py

"""
Stationary solvers.

    solve_lambda_fixed        ground state at fixed frequency (shooting + Newton)
    normalized_gradient_flow  m(c): semi-implicit descent on the mass sphere
    local_min_solve           M(c): the same flow inside the ball ‖∇u‖₂ < ρ
    project_to_pohozaev       fiber projection onto P(c) (lower / upper / unique root)
    mountain_pass_solve       σ(c), σ₋(c): descent on S(c) alternated with projection
    sigma_curve, m_curve      sampled levels with warm starts
    pohozaev_convergence      Pohozaev residual under grid refinement, graded pass / resolution-limited / fail

All discrete states satisfy A u + λ W u = S g(u), with A the grid stiffness
matrix, W = diag(quad_weights), S = diag(singular_weights). Every flow hands
over to a bordered Newton iteration once its residual is small.
"""

from dataclasses import dataclass, field
import logging
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from tqdm import tqdm

from .config import SolverConfig
from .errors import (
    BranchAbsent,
    InlsError,
    NonConvergence,
    ParameterError,
    RegimeMismatch,
    TrustRegionStarvation,
    UnboundedBelow,
)
from .functionals import (
    EnergyBreakdown,
    energy,
    fiber_scale,
    fiber_scan,
    gaussian,
    grad_norm_sq,
    in_critical_set,
    mass,
    nehari_residual,
    normalize_to_mass,
    pohozaev_ph_residual,
    pohozaev_Q,
    psi_second_variation,
    resample,
)
from .grid import Field, RadialGrid, make_grid
from .params import ProblemParams, classify_regime, require_case
from .shooting import RadialOde, bisect_ground_state, separation_radius

LOGGER = logging.getLogger("inls.stationary")

LEVEL_M = "m(c)"
LEVEL_LOCAL = "M(c)"
LEVEL_SIGMA = "σ(c)"
LEVEL_SIGMA_MINUS = "σ₋(c)"
LEVEL_FIXED = "λ-fixed"
LEVEL_ZERO = "σ₀"

BRANCHES = ("lower", "upper", "unique")
PROJECTION_TOL = 1e-8
POHOZAEV_TOL = 1e-6
MIN_REFINEMENT_GAIN = 2.5


@dataclass
class SolveReport:
    state: Field
    energy: EnergyBreakdown
    lam: float
    pohozaev_residual: float
    equation_residual: float
    iterations: int
    level_tag: str
    mass: float
    grad_norm_sq: float
    psi: float
    nehari_residual: float
    converged: bool = True
    flags: List[str] = field(default_factory=list)
    energy_log: List[float] = field(default_factory=list)
    identities: Dict[str, float] = field(default_factory=dict)

    @property
    def relative_pohozaev(self) -> float:
        return abs(self.pohozaev_residual) / max(self.grad_norm_sq, 1e-300)

    @property
    def max_energy_increase(self) -> float:
        if len(self.energy_log) < 2:
            return 0.0
        return float(np.max(np.diff(self.energy_log)))

    def to_dict(self) -> dict:
        return {
            "level_tag": self.level_tag,
            "converged": self.converged,
            "energy": self.energy.to_dict(),
            "lambda": self.lam,
            "mass": self.mass,
            "grad_norm_sq": self.grad_norm_sq,
            "psi": self.psi,
            "pohozaev_residual": self.pohozaev_residual,
            "relative_pohozaev": self.relative_pohozaev,
            "equation_residual": self.equation_residual,
            "nehari_residual": self.nehari_residual,
            "iterations": self.iterations,
            "flags": list(self.flags),
            "accepted_steps": max(len(self.energy_log) - 1, 0),
            "max_energy_increase": self.max_energy_increase,
            "identities": dict(self.identities),
            "u_origin": float(np.abs(self.state.values[0])),
        }


# -------- Discrete equation --------

def _g(params: ProblemParams, v: np.ndarray) -> np.ndarray:
    av = np.abs(v)
    out = av ** (params.p - 2.0) * v
    if params.q is not None:
        out = out + params.mu * av ** (params.q - 2.0) * v
    return out


def _dg(params: ProblemParams, v: np.ndarray) -> np.ndarray:
    av = np.abs(v)
    out = (params.p - 1.0) * av ** (params.p - 2.0)
    if params.q is not None:
        out = out + params.mu * (params.q - 1.0) * av ** (params.q - 2.0)
    return out


def _weighted_residual(grid: RadialGrid, params: ProblemParams, v: np.ndarray, lam: float) -> np.ndarray:
    return grid.apply_stiffness(v) + lam * grid.quad_weights * v - grid.singular_weights * _g(params, v)


def _norm(grid: RadialGrid, weighted: np.ndarray) -> float:
    # discrete L² norm of the strong-form residual W⁻¹G
    return float(np.sqrt(np.sum(np.abs(weighted) ** 2 / grid.quad_weights)))


def multiplier(u: Field, params: ProblemParams) -> float:
    """λ = (μT_q + T_p - ∫|∇u|²)/‖u‖², read off the weak form tested against u."""
    e = energy(u, params)
    return (params.mu_eff * e.term_q + e.term_p - 2.0 * e.kinetic) / mass(u)


def equation_residual(u: Field, params: ProblemParams, lam: float | None = None) -> float:
    lam = multiplier(u, params) if lam is None else lam
    return _norm(u.grid, _weighted_residual(u.grid, params, u.values, lam))


def stationary_residuals(u: Field, params: ProblemParams, lam: float) -> Dict[str, float]:
    """Equation residual and the Nehari / Pohozaev identities, absolute and relative to ‖∇u‖²."""
    k2 = max(grad_norm_sq(u), 1e-300)
    nehari = nehari_residual(u, params, lam)
    ph = pohozaev_ph_residual(u, params, lam)
    q = pohozaev_Q(u, params)
    return {
        "equation": equation_residual(u, params, lam),
        "nehari": nehari,
        "pohozaev_ph": ph,
        "Q": q,
        "relative_nehari": abs(nehari) / k2,
        "relative_pohozaev_ph": abs(ph) / k2,
        "relative_Q": abs(q) / k2,
    }


def build_report(
    u: Field,
    params: ProblemParams,
    lam: float,
    iterations: int,
    level_tag: str,
    converged: bool = True,
    flags: Sequence[str] = (),
    energy_log: Sequence[float] = (),
) -> SolveReport:
    e = energy(u, params)
    flags = list(flags)
    vals = np.real(u.values)
    peak = float(np.max(np.abs(vals))) or 1.0
    if np.min(vals) < -1e-8 * peak:
        flags.append("sign-change")
    if np.any(np.diff(vals) > 1e-10 * peak):
        flags.append("non-monotone")
    if level_tag not in (LEVEL_FIXED, LEVEL_ZERO) and not lam > 0:
        flags.append("lambda-nonpositive")
        LOGGER.warning("multiplier λ = %.6g is not positive for %s at c = %.6g", lam, level_tag, mass(u))
    ids = stationary_residuals(u, params, lam)
    return SolveReport(
        state=u,
        energy=e,
        lam=float(lam),
        pohozaev_residual=ids["Q"],
        equation_residual=ids["equation"],
        iterations=int(iterations),
        level_tag=level_tag,
        mass=mass(u),
        grad_norm_sq=grad_norm_sq(u),
        psi=psi_second_variation(e, params),
        nehari_residual=ids["nehari"],
        converged=converged,
        flags=flags,
        energy_log=list(energy_log),
        identities=ids,
    )


# -------- Newton iterations --------

def newton_fixed_lambda(u: Field, params: ProblemParams, lam: float, tol: float = 1e-10, max_iter: int = 60):
    grid = u.grid
    diag, off = grid.stiffness_diagonals()
    w, s = grid.quad_weights, grid.singular_weights
    vals = np.real(u.values).astype(float)
    G = _weighted_residual(grid, params, vals, lam)
    norm = _norm(grid, G)
    history = [norm]
    scale = max(1.0, np.sqrt(mass(u)))

    it = 0
    while norm > tol * scale:
        if it >= max_iter:
            raise NonConvergence(f"fixed-λ Newton did not reach {tol:g} in {max_iter} iterations", history)
        J = diag + lam * w - s * _dg(params, vals)
        delta = solve_banded((1, 1), grid.banded(J, off), -G)
        step = 1.0
        while True:
            trial = vals + step * delta
            Gt = _weighted_residual(grid, params, trial, lam)
            nt = _norm(grid, Gt)
            if nt < (1.0 - 1e-4 * step) * norm:
                break
            step *= 0.5
            if step < 1e-6:
                raise NonConvergence("fixed-λ Newton line search failed", history + [nt])
        vals, G, norm = trial, Gt, nt
        history.append(norm)
        it += 1
    return Field(grid, vals), it, history


def newton_polish(u: Field, params: ProblemParams, c: float, tol: float = 1e-10, max_iter: int = 60):
    """Bordered Newton on (A u + λWu - S g(u) = 0, uᵀWu = c) in the unknowns (u, λ)."""
    grid = u.grid
    diag, off = grid.stiffness_diagonals()
    w, s = grid.quad_weights, grid.singular_weights
    vals = np.real(u.values).astype(float)
    lam = multiplier(Field(grid, vals), params)
    scale = max(1.0, np.sqrt(c))

    def merit(v, lam_):
        G_ = _weighted_residual(grid, params, v, lam_)
        h_ = float(np.dot(w, v * v)) - c
        return G_, h_, _norm(grid, G_) + abs(h_) / np.sqrt(c)

    G, h, phi = merit(vals, lam)
    history = [phi]
    it = 0
    while not (_norm(grid, G) <= tol * scale and abs(h) <= 1e-12 * c):
        if it >= max_iter:
            raise NonConvergence(f"bordered Newton did not reach {tol:g} in {max_iter} iterations", history)
        J = diag + lam * w - s * _dg(params, vals)
        ab = grid.banded(J, off)
        wv = w * vals
        x1 = solve_banded((1, 1), ab, -G)
        x2 = solve_banded((1, 1), ab, wv)
        denom = 2.0 * float(np.dot(wv, x2))
        if not np.isfinite(denom) or abs(denom) < 1e-300:
            raise NonConvergence("bordered Newton system is singular", history)
        dlam = (2.0 * float(np.dot(wv, x1)) + h) / denom
        du = x1 - dlam * x2

        step = 1.0
        while True:
            trial_v, trial_l = vals + step * du, lam + step * dlam
            Gt, ht, pt = merit(trial_v, trial_l)
            if pt < (1.0 - 1e-4 * step) * phi:
                break
            step *= 0.5
            if step < 1e-6:
                raise NonConvergence("bordered Newton line search failed", history + [pt])
        vals, lam, G, h, phi = trial_v, trial_l, Gt, ht, pt
        history.append(phi)
        it += 1

    vals = vals * np.sqrt(c / float(np.dot(w, vals * vals)))
    out = Field(grid, vals)
    return out, multiplier(out, params), it, history


def _try_polish(
    u: Field,
    params: ProblemParams,
    c: float,
    tol: float,
    settings: SolverConfig,
    reference_energy: float,
    accept: Callable[[Field, EnergyBreakdown], bool] | None = None,
):
    try:
        v, lam, k, _ = newton_polish(u, params, c, tol=tol, max_iter=settings.newton_max_iter)
    except NonConvergence as e:
        LOGGER.debug("polish rejected: %s", e)
        return None
    e = energy(v, params)
    if abs(e.total - reference_energy) > 1e-4 * max(1.0, abs(reference_energy)):
        LOGGER.debug("polish rejected: energy moved %.3e -> %.3e", reference_energy, e.total)
        return None
    peak = float(np.max(np.abs(v.values)))
    if np.min(v.values) < -1e-8 * peak:
        LOGGER.debug("polish rejected: sign change")
        return None
    if accept is not None and not accept(v, e):
        LOGGER.debug("polish rejected by branch check")
        return None
    return v, lam, k


# -------- Fixed frequency --------

def solve_lambda_fixed(
    params: ProblemParams,
    lam: float,
    grid: RadialGrid,
    tol: float = 1e-10,
    single_power: bool = True,
) -> SolveReport:
    """Positive radial solution of -Δu + λu = |x|^{-b}|u|^{p-2}u (+ μ-term unless single_power)."""
    if not lam > 0:
        raise ParameterError(f"frequency λ must be positive (got {lam})")
    work = params.pure_power() if single_power else params
    ode = RadialOde(work.dim, work.b, work.p, work.q, work.mu_eff, lam)
    r_start = min(0.5 * grid.h, 1e-3)
    bracket = bisect_ground_state(ode, r_start, grid.r_max, rel_tol=1e-13)

    nodes = grid.nodes
    k = separation_radius(bracket, nodes)
    if k < 8:
        raise NonConvergence(f"shooting profile separates after {k} nodes", bracket.widths)
    vals = np.empty(grid.n)
    vals[:k] = 0.5 * (bracket.lo.values(nodes[:k]) + bracket.hi.values(nodes[:k]))
    if k < grid.n:
        rc, uc = nodes[k - 1], vals[k - 1]
        tail = nodes[k:]
        vals[k:] = uc * np.exp(-np.sqrt(lam) * (tail - rc)) * (rc / tail) ** ((grid.dim - 1) / 2.0)
    LOGGER.debug("shooting u(0) = %.15g, profile kept on %d/%d nodes", bracket.lo.u0, k, grid.n)

    u, its, history = newton_fixed_lambda(Field(grid, vals), work, lam, tol=tol)
    report = build_report(u, work, lam, bracket.iterations + its, LEVEL_FIXED)
    LOGGER.info(
        "λ-fixed ground state (%s, λ=%g): ‖u‖² = %.10g, residual %.2e",
        work.tag(), lam, report.mass, report.equation_residual,
    )
    return report


# -------- Normalized gradient flow --------

def _implicit_step(grid, params, vals, tau, c, diag, off):
    """(W + τA) u* = W u + τ S g(u), then rescale to mass c."""
    w = grid.quad_weights
    ab = grid.banded(w + tau * diag, tau * off)
    rhs = w * vals + tau * grid.singular_weights * _g(params, vals)
    new = solve_banded((1, 1), ab, rhs, check_finite=False)
    m = float(np.dot(w, new * new))
    if not (np.isfinite(m) and m > 0 and np.all(np.isfinite(new))):
        return None
    return new * np.sqrt(c / m)


def _stalled(log: List[float], settings: SolverConfig) -> bool:
    k = settings.stall_window
    if len(log) <= k:
        return False
    recent = np.abs(np.diff(log[-(k + 1):]))
    return float(np.max(recent)) < settings.stall_tol * max(1.0, abs(log[-1]))


def _real_field(u: Field) -> Field:
    if u.is_complex:
        if np.max(np.abs(u.values.imag)) > 1e-14 * np.max(np.abs(u.values)):
            raise ParameterError("stationary solvers expect a real initial field")
        return Field(u.grid, u.values.real)
    return u


def normalized_gradient_flow(
    params: ProblemParams,
    u0: Field,
    tol: float | None = None,
    settings: SolverConfig | None = None,
    trust_radius: float | None = None,
    stop_below: float | None = None,
    polish: bool = True,
    level_tag: str = LEVEL_M,
) -> SolveReport:
    settings = settings or SolverConfig()
    tol = settings.tol if tol is None else tol
    grid = u0.grid
    c = params.mass_target or mass(u0)
    u = normalize_to_mass(_real_field(u0), c)
    vals = np.asarray(u.values, dtype=float)
    diag, off = grid.stiffness_diagonals()

    scale = max(1.0, np.sqrt(c))
    switch = max(settings.newton_switch, tol) * scale
    collapse = settings.collapse_fraction * c / grid.h ** 2
    e = energy(u, params).total
    log = [e]
    residuals = []
    tau = settings.tau0
    trust_rejections = 0
    it = 0

    LOGGER.info("gradient flow %s: %s, c = %.6g, E0 = %.6g", level_tag, params.tag(), c, e)
    while it < settings.max_iter:
        lam = multiplier(u, params)
        res = equation_residual(u, params, lam)
        residuals.append(res)
        if res <= tol * scale:
            LOGGER.info("flow converged after %d iterations: E = %.10g, λ = %.6g", it, e, lam)
            return build_report(u, params, lam, it, level_tag, energy_log=log)
        if polish and res <= switch:
            polished = _try_polish(u, params, c, tol, settings, e)
            if polished is not None:
                v, lam, k = polished
                if trust_radius is None or np.sqrt(grad_norm_sq(v)) < trust_radius:
                    LOGGER.info("flow + Newton converged after %d+%d iterations: E = %.10g", it, k, energy(v, params).total)
                    return build_report(v, params, lam, it + k, level_tag, energy_log=log)
            switch *= 0.1
        if _stalled(log, settings):
            LOGGER.info("flow stalled at E = %.6g (residual %.2e)", e, res)
            return build_report(u, params, lam, it, level_tag, converged=False, flags=["stalled"], energy_log=log)

        it += 1
        cand = _implicit_step(grid, params, vals, tau, c, diag, off)
        if cand is not None and trust_radius is not None:
            if np.sqrt(grad_norm_sq(Field(grid, cand))) >= trust_radius:
                trust_rejections += 1
                cand = None
        ec = energy(Field(grid, cand), params).total if cand is not None else np.inf
        if ec <= e + 1e-14 * max(1.0, abs(e)):
            vals, u, e = cand, Field(grid, cand), ec
            log.append(e)
            tau = min(1.25 * tau, settings.tau_max)
            k2 = grad_norm_sq(u)
            if e < -settings.energy_floor or k2 > collapse:
                raise UnboundedBelow(
                    f"energy unbounded below: E = {e:.6g}, ‖∇u‖² = {k2:.6g} (collapse level {collapse:.3g})",
                    log,
                )
            if stop_below is not None and e < stop_below:
                return build_report(u, params, lam, it, level_tag, converged=False, flags=["below-threshold"], energy_log=log)
        else:
            tau *= 0.5
            LOGGER.debug("step rejected, τ -> %.3e", tau)
            if tau < settings.tau_min:
                if trust_radius is not None and trust_rejections:
                    raise TrustRegionStarvation(
                        f"every step crosses ‖∇u‖ = ρ = {trust_radius:.6g} ({trust_rejections} rejections)"
                    )
                raise NonConvergence("gradient flow step size underflow", residuals)
    raise NonConvergence(f"gradient flow did not converge in {settings.max_iter} iterations", residuals)


def best_fiber_start(params: ProblemParams, grid: RadialGrid, c: float, width: float = 1.0) -> Field:
    """Gaussian of mass c moved to the lowest local minimum of its fiber, if the fiber has one."""
    u = gaussian(grid, c, width)
    mins = [(e, t) for t, e, m in fiber_scan(u, params).critical_points if m > 0]
    if not mins:
        return u
    _, t = min(mins)
    return normalize_to_mass(fiber_scale(u, t), c)


# -------- Local minimization on V_ρ(c) --------

def local_min_solve(
    params: ProblemParams,
    c: float,
    grid: RadialGrid,
    settings: SolverConfig | None = None,
    rho: float | None = None,
) -> SolveReport:
    require_case(params, "two-solution", what="local minimization")
    params = params.with_mass(c)
    if rho is None:
        from .thresholds import hat_c2, rho as rho_of

        limit = hat_c2(params, grid)
        if not c < limit:
            raise RegimeMismatch(f"local minimization needs c < ĉ₂ = {limit:.6g} (got c = {c:.6g})")
        rho = rho_of(params, c, grid)

    u = gaussian(grid, c)
    lower = [t for t, e, m in fiber_scan(u, params).critical_points if m > 0 and e < 0]
    t0 = lower[0] if lower else 0.5 * rho / np.sqrt(grad_norm_sq(u))
    u0 = normalize_to_mass(fiber_scale(u, t0), c)
    if np.sqrt(grad_norm_sq(u0)) >= rho:
        u0 = normalize_to_mass(fiber_scale(u, 0.5 * rho / np.sqrt(grad_norm_sq(u))), c)

    report = normalized_gradient_flow(params, u0, settings=settings, trust_radius=rho, level_tag=LEVEL_LOCAL)
    if not np.sqrt(report.grad_norm_sq) < rho:
        report.flags.append("outside-trust-region")
    report.flags.append(f"rho={rho:.12g}")
    return report


# -------- Pohozaev projection --------

def _rescaled(u: Field, t: float, c: float) -> Field:
    return normalize_to_mass(fiber_scale(u, t), c)


def _refine_root(u: Field, params: ProblemParams, t_star: float, c: float, windows: Sequence[float] = (0.02, 0.1, 0.3)) -> float:
    """Root of t -> Q(u_t) on the interpolated field, bracketed around the closed-form root."""

    def phi(t):
        return pohozaev_Q(_rescaled(u, t, c), params)

    if phi(t_star) == 0.0:
        return t_star
    for rel in windows:
        lo, hi = t_star * (1.0 - rel), t_star * (1.0 + rel)
        if phi(lo) * phi(hi) < 0:
            return float(brentq(phi, lo, hi, xtol=1e-14 * t_star, rtol=1e-15, maxiter=200))
        LOGGER.debug("no sign change of Q within ±%g of t* = %.6g", rel, t_star)
    raise NonConvergence(f"Q(u_t) has no sign change within ±{windows[-1]:g} of the closed-form root t* = {t_star:.6g}")


def project_to_pohozaev(u: Field, params: ProblemParams, branch: str) -> Tuple[float, Field]:
    if branch not in BRANCHES:
        raise ParameterError(f"branch must be one of {BRANCHES} (got {branch!r})")
    c = mass(u)
    points = fiber_scan(u, params).critical_points
    if branch == "unique":
        if len(points) != 1:
            raise BranchAbsent(f"expected a unique fiber critical point, found {len(points)}")
        t_star = points[0][0]
    elif branch == "lower":
        roots = [t for t, _, m in points if m > 0]
        if not roots:
            raise BranchAbsent(f"no local minimum on the fiber ({len(points)} critical points)")
        t_star = min(roots)
    else:
        roots = [t for t, _, m in points if m < 0]
        if not roots:
            raise BranchAbsent(f"no local maximum on the fiber ({len(points)} critical points)")
        t_star = max(roots)
    t_u = _refine_root(u, params, t_star, c)
    v = _rescaled(u, t_u, c)
    q, k2 = pohozaev_Q(v, params), grad_norm_sq(v)
    if abs(q) > PROJECTION_TOL * k2:
        raise NonConvergence(f"projection misses the Pohozaev set: |Q| = {abs(q):.3e} > {PROJECTION_TOL:g}·‖∇u‖² at t = {t_u:.6g}")
    return t_u, v


# -------- Mountain pass / manifold descent --------

def _branch_for(params: ProblemParams) -> Tuple[str, str, bool]:
    case = classify_regime(params).case
    if case == "two-solution":
        return "upper", LEVEL_SIGMA_MINUS, False
    if case in ("critical-lower", "supercritical-focusing", "defocusing-supercritical"):
        return "unique", LEVEL_SIGMA, False
    if case == "defocusing-critical":
        return "unique", LEVEL_SIGMA, True
    raise RegimeMismatch(f"{params.tag()} ({case}) has no Pohozaev-manifold minimization")


def manifold_descent(
    params: ProblemParams,
    u_start: Field,
    branch: str,
    level_tag: str,
    settings: SolverConfig | None = None,
    critical_set: bool = False,
) -> SolveReport:
    """Minimize E over one branch of P(c): descent step on S(c), then fiber projection."""
    settings = settings or SolverConfig()
    tol = settings.tol
    grid = u_start.grid
    c = mass(u_start)
    diag, off = grid.stiffness_diagonals()
    scale = max(1.0, np.sqrt(c))
    switch = 10.0 * settings.newton_switch * scale
    want_psi = 1.0 if branch == "lower" else -1.0

    def on_branch(v: Field, e: EnergyBreakdown) -> bool:
        if want_psi * psi_second_variation(e, params) <= 0:
            return False
        return in_critical_set(v, params) if critical_set else True

    _, u = project_to_pohozaev(_real_field(u_start), params, branch)
    if critical_set and not in_critical_set(u, params):
        raise RegimeMismatch("initial state is outside the critical set {∫|∇u|² < (2/p)T_p}; is c > c1?")
    vals = np.asarray(u.values, dtype=float)
    e = energy(u, params).total
    log = [e]
    residuals = []
    tau = settings.tau0
    it = 0

    LOGGER.info("manifold descent %s (%s branch): %s, c = %.6g", level_tag, branch, params.tag(), c)
    while it < settings.max_iter:
        lam = multiplier(u, params)
        res = equation_residual(u, params, lam)
        residuals.append(res)
        if res <= tol * scale:
            return build_report(u, params, lam, it, level_tag, energy_log=log)
        if res <= switch:
            polished = _try_polish(u, params, c, tol, settings, e, accept=on_branch)
            if polished is not None:
                v, lam, k = polished
                LOGGER.info("%s converged after %d+%d iterations: E = %.10g, λ = %.6g",
                            level_tag, it, k, energy(v, params).total, lam)
                return build_report(v, params, lam, it + k, level_tag, energy_log=log)
            switch *= 0.1
        if _stalled(log, settings):
            LOGGER.warning("%s descent stalled at E = %.8g (residual %.2e)", level_tag, e, res)
            return build_report(u, params, lam, it, level_tag, converged=False, flags=["stalled"], energy_log=log)

        it += 1
        cand = _implicit_step(grid, params, vals, tau, c, diag, off)
        proj = None
        if cand is not None:
            try:
                _, proj = project_to_pohozaev(Field(grid, cand), params, branch)
            except (BranchAbsent, NonConvergence):
                proj = None
            if proj is not None and critical_set and not in_critical_set(proj, params):
                proj = None
        ec = energy(proj, params).total if proj is not None else np.inf
        if ec <= e + 1e-14 * max(1.0, abs(e)):
            u, e = proj, ec
            vals = np.asarray(u.values, dtype=float)
            log.append(e)
            tau = min(1.25 * tau, settings.tau_max)
        else:
            tau *= 0.5
            if tau < settings.tau_min:
                raise NonConvergence(f"{level_tag} descent step size underflow", residuals)
    raise NonConvergence(f"{level_tag} descent did not converge in {settings.max_iter} iterations", residuals)


def ground_profile(params: ProblemParams, grid: RadialGrid, c: float) -> Field:
    """Q_{p,b} at λ = 1, rescaled to mass c."""
    report = solve_lambda_fixed(params.pure_power(), 1.0, grid)
    return normalize_to_mass(report.state, c)


def mountain_pass_solve(
    params: ProblemParams,
    c: float,
    grid: RadialGrid,
    settings: SolverConfig | None = None,
    u0: Field | None = None,
) -> SolveReport:
    branch, level, critical_set = _branch_for(params)
    params = params.with_mass(c)
    if u0 is None:
        u0 = ground_profile(params, grid, c) if critical_set else gaussian(grid, c)
    else:
        u0 = normalize_to_mass(_real_field(u0), c)
    return manifold_descent(params, u0, branch, level, settings, critical_set)


def pohozaev_lower_min(params: ProblemParams, c: float, grid: RadialGrid, settings: SolverConfig | None = None) -> SolveReport:
    """inf of E over the P₊ branch, used to cross-check M(c)."""
    require_case(params, "two-solution", what="P₊ minimization")
    params = params.with_mass(c)
    return manifold_descent(params, gaussian(grid, c), "lower", LEVEL_LOCAL, settings)


def solve(params: ProblemParams, c: float, grid: RadialGrid, settings: SolverConfig | None = None, level: str = "auto") -> List[SolveReport]:
    """Dispatch by regime: m(c) below p_c, M(c) and σ₋(c) in the two-solution regime, σ(c) otherwise."""
    case = classify_regime(params).case
    if level == "auto":
        levels = {"global-min": ["m"], "critical-global": ["m"], "two-solution": ["M", "sigma"]}.get(case, ["sigma"])
    else:
        levels = [level]
    out = []
    for lv in levels:
        if lv == "m":
            require_case(params, "global-min", "critical-global", what="global minimization")
            p = params.with_mass(c)
            out.append(normalized_gradient_flow(p, best_fiber_start(p, grid, c), settings=settings))
        elif lv == "M":
            out.append(local_min_solve(params, c, grid, settings))
        else:
            out.append(mountain_pass_solve(params, c, grid, settings))
    return out


# -------- Grid refinement --------

STATUS_PASS = "pass"
STATUS_LIMITED = "resolution-limited"
STATUS_FAIL = "fail"


def refine_solution(report: SolveReport, params: ProblemParams, factor: int = 2, tol: float = 1e-10, max_iter: int = 60) -> SolveReport:
    """Re-solve a converged state on a grid with factor·n nodes, warm-started by interpolation."""
    if report.level_tag == LEVEL_ZERO:
        raise ParameterError("zero-mass states come from shooting; refine the shooting grid instead")
    if not (isinstance(factor, int) and factor >= 2):
        raise ParameterError(f"refinement factor must be an integer ≥ 2 (got {factor!r})", "factor")
    g = report.state.grid
    fine = make_grid(g.dim, g.b, factor * g.n, g.r_max)
    u = resample(_real_field(report.state), fine)
    if report.level_tag == LEVEL_FIXED:
        v, k, _ = newton_fixed_lambda(u, params, report.lam, tol=tol, max_iter=max_iter)
        lam = report.lam
    else:
        v, lam, k, _ = newton_polish(u, params, report.mass, tol=tol, max_iter=max_iter)
    return build_report(v, params, lam, k, report.level_tag, flags=[f"refined-x{factor}"])


def pohozaev_convergence(
    report: SolveReport,
    params: ProblemParams,
    tol: float = POHOZAEV_TOL,
    factor: int = 2,
    min_gain: float = MIN_REFINEMENT_GAIN,
) -> Dict[str, float | str]:
    """|Q|/‖∇u‖² on the solve grid and on a refinement of it, graded against tol.

    pass: either grid meets tol. resolution-limited: neither does, but the
    residual drops by at least min_gain under refinement, so what is left is
    discretization error. fail: anything else, including a failed re-solve.
    """
    coarse = report.relative_pohozaev
    out: Dict[str, float | str] = {"coarse": coarse, "tol": tol}
    try:
        fine_rep = refine_solution(report, params, factor)
    except NonConvergence as e:
        LOGGER.warning("re-solve on the refined grid failed: %s", e)
        out.update(fine=float("nan"), gain=float("nan"), order=float("nan"), extrapolated=float("nan"),
                   status=STATUS_PASS if coarse <= tol else STATUS_FAIL)
        return out
    fine = fine_rep.relative_pohozaev
    gain = coarse / fine if fine > 0 else float("inf")
    # Q_h = Q_0 + C h^2
    q_extra = (factor ** 2 * fine_rep.pohozaev_residual - report.pohozaev_residual) / (factor ** 2 - 1)
    if min(coarse, fine) <= tol:
        status = STATUS_PASS
    elif gain >= min_gain:
        status = STATUS_LIMITED
    else:
        status = STATUS_FAIL
    out.update(
        fine=fine,
        gain=gain,
        order=float(np.log(gain) / np.log(factor)) if np.isfinite(gain) and gain > 0 else float("inf"),
        extrapolated=abs(q_extra) / max(fine_rep.grad_norm_sq, 1e-300),
        status=status,
    )
    LOGGER.info("%s Pohozaev residual %.2e -> %.2e under x%d refinement (%s)", report.level_tag, coarse, fine, factor, status)
    return out


# -------- Curves --------

@dataclass
class CurvePoint:
    c: float
    level: float | None
    lam: float | None
    ok: bool
    level_tag: str
    iterations: int = 0
    error: str | None = None


def _curve(
    params: ProblemParams,
    c_values: Sequence[float],
    grid: RadialGrid,
    runner: Callable[[ProblemParams, float, Field | None], SolveReport],
    label: str,
    progress: bool,
) -> Tuple[List[CurvePoint], List[SolveReport | None]]:
    points: List[CurvePoint] = []
    reports: List[SolveReport | None] = []
    warm: Field | None = None
    for c in tqdm(list(c_values), desc=label, disable=not progress):
        try:
            rep = runner(params, float(c), warm)
        except InlsError as e:
            LOGGER.warning("%s at c = %.6g failed: %s", label, c, e)
            points.append(CurvePoint(float(c), None, None, False, label, error=str(e)))
            reports.append(None)
            continue
        ok = rep.converged
        points.append(CurvePoint(float(c), rep.energy.total, rep.lam, ok, rep.level_tag, rep.iterations,
                                 None if ok else ",".join(rep.flags)))
        reports.append(rep)
        if ok:
            warm = rep.state
    return points, reports


def sigma_curve(
    params: ProblemParams,
    c_values: Sequence[float],
    grid: RadialGrid,
    settings: SolverConfig | None = None,
    progress: bool = True,
    return_reports: bool = False,
):
    def run(p, c, warm):
        return mountain_pass_solve(p, c, grid, settings, u0=warm)

    points, reports = _curve(params, c_values, grid, run, "sigma", progress)
    return (points, reports) if return_reports else points


def m_curve(
    params: ProblemParams,
    c_values: Sequence[float],
    grid: RadialGrid,
    settings: SolverConfig | None = None,
    progress: bool = True,
    return_reports: bool = False,
):
    require_case(params, "global-min", "critical-global", what="m(c) curve")

    def run(p, c, warm):
        p = p.with_mass(c)
        start = best_fiber_start(p, grid, c) if warm is None else normalize_to_mass(warm, c)
        return normalized_gradient_flow(p, start, settings=settings)

    points, reports = _curve(params, c_values, grid, run, "m", progress)
    return (points, reports) if return_reports else points
