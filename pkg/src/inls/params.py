"""
Problem parameters and regime classification.

ProblemParams carries (N, b, p, q, mu, c) for

    -Δu + λu = mu |x|^{-b}|u|^{q-2}u + |x|^{-b}|u|^{p-2}u,   ||u||_2^2 = c

and knows the mass-critical exponent p_c = 2 + 2(2-b)/N, the critical
Sobolev exponent 2*_b = 2(N-b)/(N-2) (infinite for N <= 2) and the fiber
exponents a_s = N(s-2)/2 + b.

Leaving q as None gives the single-power problem used for the ground state
Q_{p,b} of the Gagliardo-Nirenberg inequality.
"""

from dataclasses import dataclass, fields, replace
import math
from typing import Iterable, List

from .errors import ParameterError, RegimeMismatch

CRITICAL_TOL = 1e-12

# case tag -> description
CASES = {
    "global-min": "q < p < p_c: global minimizer m(c) on S(c)",
    "critical-global": "q < p = p_c, mu=+1: m(c) < 0 below c1, unbounded below from c1",
    "two-solution": "q < p_c < p, mu=+1: local minimizer M(c) and mountain pass sigma_-(c)",
    "critical-lower": "q = p_c < p, mu=+1: mountain pass sigma(c) for c < c1",
    "supercritical-focusing": "p_c < q < p, mu=+1: mountain pass sigma(c) for every c",
    "defocusing-supercritical": "q < p, p_c < p, mu=-1: mountain pass sigma(c)",
    "defocusing-critical": "q < p = p_c, mu=-1: sigma(c) on the critical set for c1 < c < c1*",
    "single-power": "pure power |x|^{-b}|u|^{p-2}u (ground state Q_{p,b})",
}


def critical_sobolev(dim: int, b: float) -> float:
    if dim <= 2:
        return math.inf
    return 2.0 * (dim - b) / (dim - 2)


def mass_critical(dim: int, b: float) -> float:
    return 2.0 + 2.0 * (2.0 - b) / dim


@dataclass(frozen=True)
class ProblemParams:
    dim: int
    b: float
    p: float
    q: float | None = None
    mu: int = 1
    mass_target: float | None = None

    def __post_init__(self):
        if not isinstance(self.dim, int) or self.dim < 1:
            raise ParameterError(f"dim must be an integer N >= 1 (got {self.dim!r})", "dim")
        if not (0.0 < self.b < min(2.0, self.dim)):
            raise ParameterError(f"b must satisfy 0 < b < min(2, N) = {min(2, self.dim)} (got b={self.b})", "b")
        upper = critical_sobolev(self.dim, self.b)
        if not (2.0 < self.p < upper):
            raise ParameterError(f"p must satisfy 2 < p < 2*_b = {upper:.6g} (got p={self.p})", "p")
        if self.q is not None and not (2.0 < self.q < self.p):
            raise ParameterError(f"q must satisfy 2 < q < p (got q={self.q}, p={self.p})", "q")
        if self.mu not in (1, -1):
            raise ParameterError(f"mu must be +1 or -1 (got {self.mu!r})", "mu")
        if self.mass_target is not None:
            if not (math.isfinite(self.mass_target) and self.mass_target > 0):
                raise ParameterError(f"mass_target must be a positive finite mass c (got {self.mass_target})", "mass_target")

    # -------- derived exponents --------

    @property
    def p_c(self) -> float:
        return mass_critical(self.dim, self.b)

    @property
    def two_star(self) -> float:
        return critical_sobolev(self.dim, self.b)

    @property
    def single_power(self) -> bool:
        return self.q is None

    @property
    def mu_eff(self) -> float:
        return 0.0 if self.q is None else float(self.mu)

    def fiber_exponent(self, s: float) -> float:
        return self.dim * (s - 2.0) / 2.0 + self.b

    @property
    def a_p(self) -> float:
        return self.fiber_exponent(self.p)

    @property
    def a_q(self) -> float:
        return 0.0 if self.q is None else self.fiber_exponent(self.q)

    # -------- variants --------

    def with_mass(self, c: float) -> "ProblemParams":
        return replace(self, mass_target=float(c))

    def variants(self, field_name: str, values: Iterable[float], strict: bool = True) -> List["ProblemParams"]:
        """Copies with one field swept over values; strict=False drops combinations that fail validation."""
        names = {f.name for f in fields(self)}
        if field_name not in names:
            raise ParameterError(f"unknown parameter {field_name!r}; choose from {sorted(names)}", field_name)
        out = []
        for v in values:
            try:
                out.append(replace(self, **{field_name: v}))
            except ParameterError:
                if strict:
                    raise
        return out

    def pure_power(self, p: float | None = None) -> "ProblemParams":
        return ProblemParams(dim=self.dim, b=self.b, p=self.p if p is None else p)

    def require_mass(self, c: float | None = None) -> float:
        value = self.mass_target if c is None else c
        if value is None or not value > 0:
            raise ParameterError("a positive mass target c is required for this operation")
        return float(value)

    def tag(self) -> str:
        q = "none" if self.q is None else f"{self.q:g}"
        return f"N{self.dim}_b{self.b:g}_q{q}_p{self.p:g}_mu{self.mu:+d}"


@dataclass(frozen=True)
class Regime:
    p_c: float
    q_class: str | None
    p_class: str
    case: str

    @property
    def description(self) -> str:
        return CASES[self.case]

    def to_dict(self) -> dict:
        return {
            "p_c": self.p_c,
            "q_class": self.q_class,
            "p_class": self.p_class,
            "case": self.case,
            "description": self.description,
        }


def _against(s: float, p_c: float) -> str:
    if abs(s - p_c) <= CRITICAL_TOL * max(1.0, p_c):
        return "critical"
    return "subcritical" if s < p_c else "supercritical"


def classify_regime(params: ProblemParams) -> Regime:
    p_c = params.p_c
    p_class = _against(params.p, p_c)
    if params.q is None:
        return Regime(p_c, None, p_class, "single-power")
    q_class = _against(params.q, p_c)

    if p_class == "subcritical":
        case = "global-min"
    elif params.mu == -1:
        case = "defocusing-critical" if p_class == "critical" else "defocusing-supercritical"
    elif p_class == "critical":
        case = "critical-global"
    elif q_class == "subcritical":
        case = "two-solution"
    elif q_class == "critical":
        case = "critical-lower"
    else:
        case = "supercritical-focusing"
    return Regime(p_c, q_class, p_class, case)


def require_case(params: ProblemParams, *cases: str, what: str = "operation") -> Regime:
    regime = classify_regime(params)
    if regime.case not in cases:
        raise RegimeMismatch(
            f"{what} requires regime {' or '.join(cases)}; {params.tag()} is {regime.case} ({regime.description})"
        )
    return regime
