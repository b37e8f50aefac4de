"""
Functionals on radial fields: mass, energy, the Pohozaev functional Q, the
second fiber derivative Ψ, the mass-preserving fiber map u_t = t^{N/2}u(t·),
Gagliardo-Nirenberg and interpolation quotients, and seeded test fields.

All of them are pure grid operations. Complex fields enter the nonlinear
terms through |u|.
"""

from dataclasses import dataclass, asdict, field as dc_field
from typing import Iterable, List, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import ParameterError
from .grid import Field, RadialGrid
from .params import ProblemParams


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    term_q: float
    term_p: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


# -------- Basic integrals --------

def mass(u: Field) -> float:
    return float(np.dot(u.grid.quad_weights, np.abs(u.values) ** 2))


def grad_norm_sq(u: Field) -> float:
    g = u.grid
    du = np.abs(np.diff(u.values)) ** 2
    return float(np.dot(g.face_coeffs, du) + 2.0 * g.boundary_coeff * abs(u.values[-1]) ** 2)


def weighted_power(u: Field, s: float) -> float:
    """∫|x|^{-b}|u|^s dx."""
    return float(np.dot(u.grid.singular_weights, np.abs(u.values) ** s))


def normalize_to_mass(u: Field, c: float) -> Field:
    m = mass(u)
    if not m > 0:
        raise ParameterError("cannot normalize a zero field")
    if not c > 0:
        raise ParameterError(f"mass must be positive (got {c})")
    return u.scaled(np.sqrt(c / m))


def energy(u: Field, params: ProblemParams) -> EnergyBreakdown:
    kinetic = 0.5 * grad_norm_sq(u)
    term_q = weighted_power(u, params.q) if params.q is not None else 0.0
    term_p = weighted_power(u, params.p)
    total = kinetic - params.mu_eff * term_q / (params.q or 1.0) - term_p / params.p
    return EnergyBreakdown(kinetic, term_q, term_p, total)


# -------- Fiber map in closed form --------

def _breakdown(u: Field | EnergyBreakdown, params: ProblemParams) -> EnergyBreakdown:
    return u if isinstance(u, EnergyBreakdown) else energy(u, params)


def _check_t(t: float) -> float:
    if not t > 0:
        raise ParameterError(f"fiber scale t must be positive (got {t})")
    return float(t)


def fiber_energy(u: Field | EnergyBreakdown, t: float, params: ProblemParams) -> float:
    t = _check_t(t)
    e = _breakdown(u, params)
    out = t ** 2 * e.kinetic - t ** params.a_p * e.term_p / params.p
    if params.q is not None:
        out -= params.mu * t ** params.a_q * e.term_q / params.q
    return float(out)


def fiber_derivative(u: Field | EnergyBreakdown, t: float, params: ProblemParams) -> float:
    t = _check_t(t)
    e = _breakdown(u, params)
    ap = params.a_p
    out = 2.0 * t * e.kinetic - ap * t ** (ap - 1.0) * e.term_p / params.p
    if params.q is not None:
        aq = params.a_q
        out -= params.mu * aq * t ** (aq - 1.0) * e.term_q / params.q
    return float(out)


def fiber_second_derivative(u: Field | EnergyBreakdown, t: float, params: ProblemParams) -> float:
    t = _check_t(t)
    e = _breakdown(u, params)
    ap = params.a_p
    out = 2.0 * e.kinetic - ap * (ap - 1.0) * t ** (ap - 2.0) * e.term_p / params.p
    if params.q is not None:
        aq = params.a_q
        out -= params.mu * aq * (aq - 1.0) * t ** (aq - 2.0) * e.term_q / params.q
    return float(out)


def pohozaev_Q(u: Field | EnergyBreakdown, params: ProblemParams) -> float:
    """∫|∇u|² - μ(N(q-2)+2b)/(2q)·T_q - (N(p-2)+2b)/(2p)·T_p, i.e. dE(u_t)/dt at t = 1."""
    return fiber_derivative(u, 1.0, params)


def psi_second_variation(u: Field | EnergyBreakdown, params: ProblemParams) -> float:
    return fiber_second_derivative(u, 1.0, params)


def _pchip_at(u: Field, targets: np.ndarray) -> np.ndarray:
    """Even extension of u through r = 0, zero at r_max and beyond."""
    g = u.grid
    r = g.nodes
    knots = np.concatenate([-r[::-1], r, [g.r_max]])

    def _interp(vals: np.ndarray) -> np.ndarray:
        data = np.concatenate([vals[::-1], vals, [0.0]])
        out = PchipInterpolator(knots, data, extrapolate=False)(targets)
        return np.nan_to_num(out, nan=0.0)

    if u.is_complex:
        return _interp(u.values.real) + 1j * _interp(u.values.imag)
    return _interp(np.asarray(u.values, dtype=float))


def fiber_scale(u: Field, t: float) -> Field:
    """u_t(r) = t^{N/2} u(t r) by monotone cubic interpolation; zero beyond r_max.

    The resampled profile is rescaled to mass(u): interpolation and the r_max
    cutoff lose O(h²) mass, while the continuous scaling preserves it exactly.
    """
    t = _check_t(t)
    if t == 1.0:
        return u
    g = u.grid
    out = Field(g, t ** (g.dim / 2.0) * _pchip_at(u, t * g.nodes))
    m_in, m_out = mass(u), mass(out)
    if m_in > 0 and m_out > 0:
        out = out.scaled(np.sqrt(m_in / m_out))
    return out


def resample(u: Field, grid: RadialGrid) -> Field:
    """u on another grid of the same dimension and weight, e.g. a refinement."""
    if (grid.dim, grid.b) != (u.grid.dim, u.grid.b):
        raise ParameterError(f"cannot resample from N={u.grid.dim}, b={u.grid.b} onto N={grid.dim}, b={grid.b}")
    return Field(grid, _pchip_at(u, grid.nodes))


# -------- Fiber scan --------

@dataclass
class FiberScan:
    t_values: np.ndarray
    energies: np.ndarray
    derivative_signs: np.ndarray
    critical_points: List[Tuple[float, float, int]] = dc_field(default_factory=list)

    def roots(self) -> List[float]:
        return [cp[0] for cp in self.critical_points]

    def to_dict(self) -> dict:
        return {
            "t_values": self.t_values,
            "energies": self.energies,
            "derivative_signs": self.derivative_signs,
            "critical_points": [
                {"t": t, "energy": e, "morse_sign": s} for t, e, s in self.critical_points
            ],
        }


MERGE_TOL_LOG_T = 1e-6


def fiber_scan(
    u: Field | EnergyBreakdown,
    params: ProblemParams,
    t_values: np.ndarray | None = None,
) -> FiberScan:
    """Tabulate E(u_t) on a log grid and locate the zeros of dE/dt.

    Roots are refined with brentq in log t. Two roots closer than
    MERGE_TOL_LOG_T in log t are treated as a merged (degenerate) pair and
    dropped.
    """
    e = _breakdown(u, params)
    if t_values is None:
        t_values = np.logspace(-4, 4, 2001)
    t_values = np.asarray(t_values, dtype=float)
    energies = np.array([fiber_energy(e, t, params) for t in t_values])
    derivs = np.array([fiber_derivative(e, t, params) for t in t_values])
    signs = np.sign(derivs).astype(int)

    roots = []
    for i in range(len(t_values) - 1):
        if signs[i] == 0:
            roots.append(float(t_values[i]))
            continue
        if signs[i] * signs[i + 1] < 0:
            lo, hi = np.log(t_values[i]), np.log(t_values[i + 1])
            s = brentq(lambda x: fiber_derivative(e, np.exp(x), params), lo, hi, xtol=1e-15, rtol=1e-15)
            roots.append(float(np.exp(s)))

    kept = []
    for t in roots:
        if kept and abs(np.log(t) - np.log(kept[-1])) < MERGE_TOL_LOG_T:
            kept.pop()
            continue
        kept.append(t)

    points = []
    for t in kept:
        curv = fiber_second_derivative(e, t, params)
        scale = abs(2.0 * e.kinetic) + 1e-300
        morse = 0 if abs(curv) <= 1e-12 * scale else int(np.sign(curv))
        points.append((t, fiber_energy(e, t, params), morse))
    return FiberScan(t_values, energies, signs, points)


def critical_point_count(fields: Iterable[Field], params: ProblemParams) -> List[int]:
    """Number of critical points of t -> E(u_t) for each field."""
    return [len(fiber_scan(u, params).critical_points) for u in fields]


# -------- Identities of stationary states --------

def nehari_residual(u: Field, params: ProblemParams, lam: float) -> float:
    e = energy(u, params)
    return float(2.0 * e.kinetic + lam * mass(u) - params.mu_eff * e.term_q - e.term_p)


def pohozaev_ph_residual(u: Field, params: ProblemParams, lam: float) -> float:
    n, b = params.dim, params.b
    e = energy(u, params)
    q_part = params.mu_eff * (n - b) / params.q * e.term_q if params.q is not None else 0.0
    return float(
        (n - 2.0) / 2.0 * 2.0 * e.kinetic
        + lam * n / 2.0 * mass(u)
        - q_part
        - (n - b) / params.p * e.term_p
    )


def in_critical_set(u: Field, params: ProblemParams) -> bool:
    """Membership of {∫|∇u|² < (2/p)∫|x|^{-b}|u|^p}."""
    return grad_norm_sq(u) < 2.0 / params.p * weighted_power(u, params.p)


# -------- Gagliardo-Nirenberg --------

def gn_quotient(u: Field, params: ProblemParams, p: float | None = None) -> float:
    p = params.p if p is None else p
    a = params.fiber_exponent(p)
    k2 = grad_norm_sq(u)
    m = mass(u)
    return weighted_power(u, p) / (k2 ** (a / 2.0) * m ** ((p - a) / 2.0))


def interpolation_exponent(params: ProblemParams) -> float:
    return params.two_star if params.dim >= 3 else 2.0 * params.p


def interpolation_quotient(u: Field, params: ProblemParams, r_exp: float | None = None) -> float:
    """T_p / (T_q^{1-θ} (‖∇u‖^{a_r}‖u‖^{r-a_r})^θ) with p = (1-θ)q + θr."""
    if params.q is None:
        raise ParameterError("the interpolation inequality needs a lower exponent q")
    r_exp = interpolation_exponent(params) if r_exp is None else r_exp
    if not r_exp > params.p:
        raise ParameterError(f"interpolation exponent must exceed p (got {r_exp})")
    theta = (params.p - params.q) / (r_exp - params.q)
    a_r = params.fiber_exponent(r_exp)
    k2 = grad_norm_sq(u)
    m = mass(u)
    bound = weighted_power(u, params.q) ** (1.0 - theta) * (
        k2 ** (a_r / 2.0) * m ** ((r_exp - a_r) / 2.0)
    ) ** theta
    return weighted_power(u, params.p) / bound


def calibrate_interpolation(params: ProblemParams, fields: Iterable[Field], r_exp: float | None = None) -> float:
    return max(interpolation_quotient(u, params, r_exp) for u in fields)


# -------- Test fields --------

def gaussian(grid: RadialGrid, c: float, width: float = 1.0) -> Field:
    u = Field(grid, np.exp(-grid.nodes ** 2 / (2.0 * width ** 2)))
    return normalize_to_mass(u, c)


def random_smooth_field(grid: RadialGrid, rng: np.random.Generator, c: float, max_width: float | None = None) -> Field:
    """Positive radial mixture Σ a_k (1 + β_k r²/s_k²) exp(-r²/s_k²), smooth at r = 0."""
    max_width = max_width or min(3.0, grid.r_max / 6.0)
    r = grid.nodes
    vals = np.zeros_like(r)
    for _ in range(int(rng.integers(1, 4))):
        a = rng.uniform(0.2, 1.0)
        s = rng.uniform(0.25 * max_width, max_width)
        beta = rng.uniform(0.0, 0.5)
        x = (r / s) ** 2
        vals += a * (1.0 + beta * x) * np.exp(-x)
    return normalize_to_mass(Field(grid, vals), c)


def seeded_fields(grid: RadialGrid, seed: int, count: int, c: float, max_width: float | None = None) -> List[Field]:
    rng = np.random.Generator(np.random.Philox(seed))
    return [random_smooth_field(grid, rng, c, max_width) for _ in range(count)]
