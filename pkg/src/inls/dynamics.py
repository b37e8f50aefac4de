# src/inls/dynamics.py

"""
Radial time integration of

    i∂_tψ + Δψ + μ|x|^{-b}|ψ|^{q-2}ψ + |x|^{-b}|ψ|^{p-2}ψ = 0

by Strang splitting: exact phase rotation by the local potential for dt/2,
Crank-Nicolson on the stiffness matrix for dt, phase again for dt/2. The
linear step solves (W + i dt/2 A)ψ⁺ = (W - i dt/2 A)ψ, so the discrete mass
ψ*Wψ is conserved to round-off.

Also: virial functionals, the K±(c) classification, and the stability,
blowup and instability experiments.
"""

from dataclasses import dataclass, field
import logging
from typing import Callable, Dict, List, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import solve_banded

from .errors import ParameterError
from .functionals import energy, fiber_scale, gaussian, grad_norm_sq, mass, normalize_to_mass, pohozaev_Q
from .grid import Field, RadialGrid
from .params import ProblemParams

LOGGER = logging.getLogger("inls.dynamics")

COMPLETED = "completed"
BLOWUP = "blowup_detected"
UNDERFLOW = "step_underflow"

K_PLUS = "K_plus"
K_MINUS = "K_minus"
NEITHER = "neither"


# -------- one step --------

def _potential(grid: RadialGrid, params: ProblemParams, psi: np.ndarray) -> np.ndarray:
    a = np.abs(psi)
    v = a ** (params.p - 2.0)
    if params.q is not None:
        v = v + params.mu * a ** (params.q - 2.0)
    return grid.weight_ratio * v


def linear_step(psi: Field, dt: float) -> Field:
    """Free Schrödinger step iψ_t = -Δψ by Crank-Nicolson."""
    grid = psi.grid
    diag, off = grid.stiffness_diagonals()
    w = grid.quad_weights
    vals = np.asarray(psi.values, dtype=complex)
    rhs = w * vals - 0.5j * dt * grid.apply_stiffness(vals)
    ab = grid.banded(w + 0.5j * dt * diag, (0.5j * dt) * off)
    return Field(grid, solve_banded((1, 1), ab, rhs, check_finite=False))


def step(psi: Field, dt: float, params: ProblemParams | None = None) -> Field:
    """One Strang step; params=None gives the free equation. Negative dt runs backwards."""
    if not (np.isfinite(dt) and dt != 0):
        raise ParameterError(f"time step must be finite and non-zero (got {dt})")
    if params is None:
        return linear_step(psi, dt)
    grid = psi.grid
    vals = np.asarray(psi.values, dtype=complex)
    vals = vals * np.exp(0.5j * dt * _potential(grid, params, vals))
    vals = np.asarray(linear_step(Field(grid, vals), dt).values)
    vals = vals * np.exp(0.5j * dt * _potential(grid, params, vals))
    return Field(grid, vals)


def _try_step(psi: Field, dt: float, params: ProblemParams) -> Field | None:
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            return step(psi, dt, params)
    except (ParameterError, ValueError, np.linalg.LinAlgError):
        return None


# -------- virial --------

def _face_terms(psi: Field):
    g = psi.grid
    v = np.asarray(psi.values, dtype=complex)
    faces = g.nodes[:-1] + 0.5 * g.h
    avg = 0.5 * (v[:-1] + v[1:])
    return faces, g.face_coeffs * g.h * np.conj(avg) * np.diff(v)


def virial(psi: Field) -> float:
    """V_∞ = 2 Im ∫ ψ̄ x·∇ψ, evaluated at cell faces."""
    faces, terms = _face_terms(psi)
    return float(2.0 * np.imag(np.sum(faces * terms)))


def _bridge(s: np.ndarray) -> np.ndarray:
    return (1.0 - s) ** 4 * (1.0 + 5.0 * s + 14.0 * s ** 2 + 30.0 * s ** 3)


def _bridge_prime(s: np.ndarray) -> np.ndarray:
    return (1.0 - s) ** 3 * (1.0 + 3.0 * s + 6.0 * s ** 2 - 210.0 * s ** 3)


def chi_prime(r: np.ndarray) -> np.ndarray:
    """χ' for χ = r²/2 on [0, 1], constant beyond 2, C⁴ in between with χ'' ≤ 1."""
    r = np.asarray(r, dtype=float)
    s = np.clip(r - 1.0, 0.0, 1.0)
    return np.where(r <= 1.0, r, np.where(r >= 2.0, 0.0, _bridge(s)))


def chi_second(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    s = np.clip(r - 1.0, 0.0, 1.0)
    return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, 0.0, _bridge_prime(s)))


def chi_localized(r: np.ndarray, R: float) -> np.ndarray:
    """χ_R'(r) = R χ'(r/R) for χ_R = R²χ(·/R)."""
    if not R > 0:
        raise ParameterError(f"cutoff radius must be positive (got {R})")
    return R * chi_prime(np.asarray(r) / R)


def chi_localized_second(r: np.ndarray, R: float) -> np.ndarray:
    if not R > 0:
        raise ParameterError(f"cutoff radius must be positive (got {R})")
    return chi_second(np.asarray(r) / R)


def virial_localized(psi: Field, R: float) -> float:
    faces, terms = _face_terms(psi)
    return float(2.0 * np.imag(np.sum(chi_localized(faces, R) * terms)))


# -------- classification --------

def classify_K(u: Field, params: ProblemParams, gamma_c: float) -> str:
    """K_plus / K_minus: E(u) < γ(c) with Q(u) > 0 / Q(u) < 0."""
    e = energy(u, params)
    tol = 1e-9 * max(1.0, abs(gamma_c))
    if not e.total < gamma_c - tol:
        return NEITHER
    q = pohozaev_Q(e, params)
    if q > 0:
        return K_PLUS
    if q < 0:
        return K_MINUS
    return NEITHER


def phase_distance(psi: Field, u: Field) -> float:
    """min over θ of ‖ψ - e^{iθ}u‖₂."""
    w = psi.grid.quad_weights
    overlap = abs(np.sum(w * np.conj(u.values) * psi.values))
    d2 = mass(psi) + mass(u) - 2.0 * overlap
    return float(np.sqrt(max(d2, 0.0)))


# -------- trajectories --------

@dataclass
class SimTrace:
    times: List[float] = field(default_factory=list)
    mass_series: List[float] = field(default_factory=list)
    energy_series: List[float] = field(default_factory=list)
    grad_norm_series: List[float] = field(default_factory=list)
    virial_series: List[float] = field(default_factory=list)
    q_series: List[float] = field(default_factory=list)
    boundary_series: List[float] = field(default_factory=list)
    tail_mass_series: List[float] = field(default_factory=list)
    outcome: str = COMPLETED
    steps: int = 0
    final_state: Field | None = None
    blowup_threshold: float = float("inf")
    virial_radius: float | None = None

    def record(self, t: float, psi: Field, params: ProblemParams) -> None:
        e = energy(psi, params)
        grid = psi.grid
        tail = grid.tail_mask(0.05)
        self.times.append(float(t))
        self.mass_series.append(mass(psi))
        self.energy_series.append(e.total)
        self.grad_norm_series.append(float(np.sqrt(2.0 * e.kinetic)))
        self.virial_series.append(
            virial(psi) if self.virial_radius is None else virial_localized(psi, self.virial_radius)
        )
        self.q_series.append(pohozaev_Q(e, params))
        self.boundary_series.append(float(np.max(np.abs(psi.values[tail]))))
        self.tail_mass_series.append(float(np.sum(grid.quad_weights[tail] * np.abs(psi.values[tail]) ** 2)))

    @property
    def mass_drift(self) -> float:
        m0 = self.mass_series[0]
        return float(np.max(np.abs(np.array(self.mass_series) - m0)) / m0)

    @property
    def energy_drift(self) -> float:
        e0 = self.energy_series[0]
        return float(np.max(np.abs(np.array(self.energy_series) - e0)) / max(abs(e0), 1e-300))

    def virial_defect(self) -> float:
        """max over interior samples of |ΔV/Δt - 4Q| / (1 + |4Q|), central differences."""
        t = np.array(self.times)
        v = np.array(self.virial_series)
        q = np.array(self.q_series)
        if len(t) < 3:
            return 0.0
        dv = (v[2:] - v[:-2]) / (t[2:] - t[:-2])
        target = 4.0 * q[1:-1]
        return float(np.max(np.abs(dv - target) / (1.0 + np.abs(target))))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.times,
            "mass": self.mass_series,
            "energy": self.energy_series,
            "grad_norm": self.grad_norm_series,
            "virial": self.virial_series,
            "Q": self.q_series,
            "boundary_max": self.boundary_series,
            "tail_mass": self.tail_mass_series,
        })

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "steps": self.steps,
            "t_end": self.times[-1] if self.times else 0.0,
            "samples": len(self.times),
            "mass_drift": self.mass_drift if self.times else None,
            "energy_drift": self.energy_drift if self.times else None,
            "virial_defect": self.virial_defect(),
            "blowup_threshold": self.blowup_threshold,
            "boundary": boundary_monitor(self),
        }


def boundary_monitor(trace: SimTrace) -> Dict[str, float]:
    """Largest |ψ| and mass seen in the outer 5% of the grid."""
    if not trace.times:
        return {"max_abs": 0.0, "max_tail_mass": 0.0}
    return {"max_abs": float(max(trace.boundary_series)), "max_tail_mass": float(max(trace.tail_mass_series))}


def simulate(
    psi0: Field,
    T: float,
    dt: float,
    params: ProblemParams,
    sample_every: int = 10,
    blowup_factor: float = 1e3,
    dt_min: float = 1e-12,
    observer: Callable[[float, Field], None] | None = None,
    virial_radius: float | None = None,
) -> SimTrace:
    if not (T > 0 and dt > 0):
        raise ParameterError(f"T and dt must be positive (got T={T}, dt={dt})")
    psi = Field(psi0.grid, np.asarray(psi0.values, dtype=complex))
    grid = psi.grid
    g0 = np.sqrt(grad_norm_sq(psi))
    # gradients above 0.2·√mass/h are no longer resolved by the grid
    threshold = min(blowup_factor * g0, 0.2 * np.sqrt(mass(psi)) / grid.h)
    trace = SimTrace(blowup_threshold=float(threshold), virial_radius=virial_radius)
    trace.record(0.0, psi, params)
    if observer is not None:
        observer(0.0, psi)

    t = 0.0
    k = 0
    last_sampled = 0
    while t < T * (1.0 - 1e-12):
        g = np.sqrt(grad_norm_sq(psi))
        dt_eff = min(dt * min(1.0, (g0 / g) ** 2) if g > 0 else dt, T - t)
        new = _try_step(psi, dt_eff, params)
        while new is None:
            dt_eff *= 0.5
            if dt_eff < dt_min:
                break
            new = _try_step(psi, dt_eff, params)
        if new is None:
            trace.outcome = UNDERFLOW
            LOGGER.warning("step underflow at t = %.6g (dt < %.1e)", t, dt_min)
            break
        psi = new
        t += dt_eff
        k += 1
        if np.sqrt(grad_norm_sq(psi)) > threshold:
            trace.outcome = BLOWUP
            trace.record(t, psi, params)
            last_sampled = k
            if observer is not None:
                observer(t, psi)
            LOGGER.info("blowup detected at t = %.6g after %d steps (‖∇ψ‖ > %.4g)", t, k, threshold)
            break
        if k % sample_every == 0:
            trace.record(t, psi, params)
            last_sampled = k
            if observer is not None:
                observer(t, psi)
    if last_sampled != k:
        trace.record(t, psi, params)
        if observer is not None:
            observer(t, psi)
    trace.steps = k
    trace.final_state = psi
    LOGGER.info(
        "simulation %s: t = %.6g, %d steps, mass drift %.2e, energy drift %.2e",
        trace.outcome, t, k, trace.mass_drift, trace.energy_drift,
    )
    return trace


# -------- initial data --------

def support_label(params: ProblemParams) -> str:
    if params.dim == 1:
        return "unsupported: radial blowup for N = 1 is outside the known theory"
    if params.p > 6.0:
        return "unsupported: radial blowup theory needs p ≤ 6"
    return "supported"


def perturbation_bump(grid: RadialGrid) -> Field:
    """Fixed smooth bump r² e^{-r²/4}, unit mass."""
    r = grid.nodes
    return normalize_to_mass(Field(grid, r ** 2 * np.exp(-(r ** 2) / 4.0)), 1.0)


def initial_data(
    recipe: str,
    grid: RadialGrid,
    c: float,
    width: float = 1.0,
    ground: Field | None = None,
    tau: float = 1.2,
) -> Field:
    if recipe == "gaussian":
        u = gaussian(grid, c, width)
    elif recipe in ("ground-state", "fiber-scaled"):
        if ground is None:
            raise ParameterError(f"initial recipe {recipe!r} needs a ground state")
        u = ground if recipe == "ground-state" else normalize_to_mass(fiber_scale(ground, tau), c)
    else:
        raise ParameterError(f"unknown initial recipe {recipe!r}", "initial")
    return Field(grid, np.asarray(u.values, dtype=complex))


# -------- experiments --------

def stability_experiment(ground, eps: float, T: float, params: ProblemParams, dt: float = 1e-3, sample_every: int = 10) -> dict:
    """Max over t of the phase-minimized distance to the ground state, from u + eps·bump."""
    u = ground.state
    grid = u.grid
    c = mass(u)
    bump = perturbation_bump(grid)
    psi0 = normalize_to_mass(Field(grid, u.values + eps * np.sqrt(c) * bump.values), c) if eps else u
    psi0 = Field(grid, np.asarray(psi0.values, dtype=complex))
    deviations: List[float] = []
    times: List[float] = []

    def watch(t, psi):
        times.append(t)
        deviations.append(phase_distance(psi, u))

    trace = simulate(psi0, T, dt, params, sample_every=sample_every, observer=watch)
    max_dev = float(max(deviations))
    LOGGER.info("stability: eps = %g, max deviation %.3e, outcome %s", eps, max_dev, trace.outcome)
    return {
        "eps": eps,
        "T": T,
        "outcome": trace.outcome,
        "initial_deviation": deviations[0],
        "max_deviation": max_dev,
        "within_ten_eps": max_dev < 10.0 * eps if eps else max_dev < 1e-3,
        "times": times,
        "deviations": deviations,
        "trace": trace.to_dict(),
    }


def blowup_experiment(ground, tau: float, T: float, params: ProblemParams, dt: float = 1e-3, sample_every: int = 5) -> dict:
    """Start from the fiber-scaled ground state u_τ, τ > 1, which lies in K⁻(c)."""
    if not tau > 1:
        raise ParameterError(f"tau must exceed 1 (got {tau})")
    u = ground.state
    c = mass(u)
    gamma = ground.energy.total
    psi0 = initial_data("fiber-scaled", u.grid, c, ground=u, tau=tau)
    label = classify_K(psi0, params, gamma)
    if label != K_MINUS:
        LOGGER.warning("fiber-scaled datum (τ = %g) classified %s, not K_minus", tau, label)
    e0 = energy(psi0, params).total
    trace = simulate(psi0, T, dt, params, sample_every=sample_every)
    q = np.array(trace.q_series)
    v = np.array(trace.virial_series)
    g = np.array(trace.grad_norm_series)
    tail = g[-min(10, len(g)):]
    return {
        "tau": tau,
        "classification": label,
        "support": support_label(params),
        "outcome": trace.outcome,
        "t_end": trace.times[-1],
        "gamma": gamma,
        "q_bound": e0 - gamma,
        "q_negative_throughout": bool(np.all(q < 0)),
        "q_below_bound": bool(np.all(q <= (e0 - gamma) * (1.0 - 1e-6))),
        "virial_decreasing": bool(np.all(np.diff(v) < 0)),
        "grad_growth_monotone": bool(np.all(np.diff(tail) > 0)),
        "trace": trace.to_dict(),
    }


def instability_experiment(ground, taus: Sequence[float], T: float, params: ProblemParams, dt: float = 1e-3) -> dict:
    """u_τ for τ ↓ 1 approaches the ground state and still blows up."""
    runs = []
    for tau in taus:
        rep = blowup_experiment(ground, tau, T, params, dt)
        runs.append({
            "tau": tau,
            "outcome": rep["outcome"],
            "t_end": rep["t_end"],
            "distance": phase_distance(initial_data("fiber-scaled", ground.state.grid, mass(ground.state),
                                                    ground=ground.state, tau=tau), ground.state),
        })
    return {"support": support_label(params), "all_blowup": all(r["outcome"] == BLOWUP for r in runs), "runs": runs}


def strauss_check(u: Field) -> dict:
    """|r^{(N-1)/2}u(r)| ≤ 2‖u‖^{1/2}‖∇u‖^{1/2} at every node; ratio_sharp uses (2/ω)^{1/2}."""
    g = u.grid
    if g.dim < 2:
        raise ParameterError("the radial Strauss inequality needs N ≥ 2", "dim")
    lhs = g.nodes ** ((g.dim - 1) / 2.0) * np.abs(u.values)
    scale = (mass(u) * grad_norm_sq(u)) ** 0.25
    if scale == 0:
        return {"holds": bool(np.max(lhs) == 0), "ratio": 0.0, "ratio_sharp": 0.0, "worst_radius": None}
    ratio = lhs / (2.0 * scale)
    sharp = lhs / (np.sqrt(2.0 / g.omega) * scale)
    j = int(np.argmax(ratio))
    return {
        "holds": bool(ratio[j] <= 1.0),
        "ratio": float(ratio[j]),
        "ratio_sharp": float(np.max(sharp)),
        "worst_radius": float(g.nodes[j]),
    }
