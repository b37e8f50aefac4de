# src/inls/shooting.py

"""
Radial shooting for positive decaying solutions of

    u'' + (N-1)/r u' = λu - r^{-b} g(u),   g(u) = μ|u|^{q-2}u + |u|^{p-2}u,
    u(0) = u0, u'(0) = 0.

With λ = 1 and no q-term this is the ground-state equation of Q_{p,b}; with
λ = 0 and μ = -1 it is the zero-mass equation. The integrator also carries
the running integrals of |u'|², r^{-b}|u|^q, r^{-b}|u|^p and u² against
ω r^{N-1} dr, so the functionals of a trajectory are known to ODE accuracy.

Classification of a shot:
    overshoot  - u reaches zero
    undershoot - u turns upward (u' = 0 from below) while positive
    reached    - neither happened before r_end
"""

from dataclasses import dataclass, field
import logging
from typing import Any, List

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BracketNotFound, TrajectoryBlowup
from .grid import sphere_area

LOGGER = logging.getLogger("inls.shooting")

OVERSHOOT = "overshoot"
UNDERSHOOT = "undershoot"
REACHED = "reached"

ESCAPE_FACTOR = 1e6


@dataclass(frozen=True)
class RadialOde:
    dim: int
    b: float
    p: float
    q: float | None
    mu: float
    lam: float
    rtol: float = 1e-10
    atol: float = 1e-14

    @property
    def omega(self) -> float:
        return sphere_area(self.dim)

    def g(self, u):
        au = np.abs(u)
        out = au ** (self.p - 2.0) * u
        if self.q is not None:
            out = out + self.mu * au ** (self.q - 2.0) * u
        return out

    def dg(self, u):
        au = np.abs(u)
        out = (self.p - 1.0) * au ** (self.p - 2.0)
        if self.q is not None:
            out = out + self.mu * (self.q - 1.0) * au ** (self.q - 2.0)
        return out

    def expansion(self, u0: float):
        """Coefficients of u ≈ u0 + A r² + B r^{2-b} + C r^{4-2b} near the origin."""
        n, b = self.dim, self.b
        A = self.lam * u0 / (2.0 * n)
        B = -self.g(u0) / ((2.0 - b) * (n - b))
        C = -self.dg(u0) * B / ((4.0 - 2.0 * b) * (n + 2.0 - 2.0 * b))
        return A, B, C

    def start(self, u0: float, r0: float) -> np.ndarray:
        n, b, w = self.dim, self.b, self.omega
        A, B, C = self.expansion(u0)
        u = u0 + A * r0 ** 2 + B * r0 ** (2.0 - b) + C * r0 ** (4.0 - 2.0 * b)
        v = 2.0 * A * r0 + (2.0 - b) * B * r0 ** (1.0 - b) + (4.0 - 2.0 * b) * C * r0 ** (3.0 - 2.0 * b)
        ik = w * (
            4.0 * A ** 2 * r0 ** (n + 2.0) / (n + 2.0)
            + 4.0 * A * (2.0 - b) * B * r0 ** (n + 2.0 - b) / (n + 2.0 - b)
            + (2.0 - b) ** 2 * B ** 2 * r0 ** (n + 2.0 - 2.0 * b) / (n + 2.0 - 2.0 * b)
        )
        iq = w * abs(u0) ** self.q * r0 ** (n - b) / (n - b) if self.q is not None else 0.0
        ip = w * abs(u0) ** self.p * r0 ** (n - b) / (n - b)
        im = w * u0 ** 2 * r0 ** n / n
        return np.array([u, v, ik, iq, ip, im])

    def rhs(self, r: float, y: np.ndarray) -> np.ndarray:
        u, v = y[0], y[1]
        au = abs(u)
        rb = r ** (-self.b)
        dv = -(self.dim - 1.0) / r * v + self.lam * u - rb * self.g(u)
        wr = self.omega * r ** (self.dim - 1.0)
        iq = rb * au ** self.q if self.q is not None else 0.0
        return np.array([v, dv, wr * v * v, wr * iq, wr * rb * au ** self.p, wr * u * u])

    def shoot(self, u0: float, r_start: float, r_end: float) -> "Shot":
        y0 = self.start(u0, r_start)
        if y0[0] <= 0.0:
            return Shot(u0, OVERSHOOT, r_start, None, y0)
        if y0[1] >= 0.0:
            return Shot(u0, UNDERSHOOT, r_start, None, y0)

        def crossing(r, y):
            return y[0]

        crossing.terminal = True
        crossing.direction = -1

        def turning(r, y):
            return y[1]

        turning.terminal = True
        turning.direction = 1

        limit = ESCAPE_FACTOR * max(1.0, u0)

        def escape(r, y):
            return limit - abs(y[0])

        escape.terminal = True

        sol = solve_ivp(
            self.rhs,
            (r_start, r_end),
            y0,
            method="DOP853",
            rtol=self.rtol,
            atol=self.atol,
            dense_output=True,
            events=(crossing, turning, escape),
        )
        if sol.status == -1:
            LOGGER.debug("integration failed at u0=%.6g: %s", u0, sol.message)
            return Shot(u0, OVERSHOOT, float(sol.t[-1]), sol.sol, sol.y[:, -1])
        if len(sol.t_events[2]):
            raise TrajectoryBlowup(float(sol.t_events[2][0]))
        if len(sol.t_events[0]):
            outcome = OVERSHOOT
        elif len(sol.t_events[1]):
            outcome = UNDERSHOOT
        else:
            outcome = REACHED
        return Shot(u0, outcome, float(sol.t[-1]), sol.sol, sol.y[:, -1])


@dataclass
class Shot:
    u0: float
    outcome: str
    r_stop: float
    dense: Any
    final_state: np.ndarray

    def state(self, r: np.ndarray) -> np.ndarray:
        return self.dense(r)

    def values(self, r: np.ndarray) -> np.ndarray:
        return self.dense(r)[0]


@dataclass
class Bracket:
    lo: Shot
    hi: Shot
    iterations: int
    widths: List[float] = field(default_factory=list)

    @property
    def relative_width(self) -> float:
        return (self.hi.u0 - self.lo.u0) / self.hi.u0


def bisect_ground_state(
    ode: RadialOde,
    r_start: float,
    r_end: float,
    u0_range: tuple[float, float] = (1e-6, 1e6),
    rel_tol: float = 1e-13,
    scan_points: int = 49,
    max_iter: int = 200,
    stop_when_reached: bool = False,
) -> Bracket:
    """Bisect u(0) between the last undershoot and the first overshoot.

    Shots that reach r_end count on the undershoot side. With
    stop_when_reached the loop ends as soon as the undershoot side reaches
    r_end.
    """
    lo_val, hi_val = u0_range
    lo_shot = None
    hi_shot = None
    for u0 in np.logspace(np.log10(lo_val), np.log10(hi_val), scan_points):
        shot = ode.shoot(float(u0), r_start, r_end)
        if shot.outcome == OVERSHOOT:
            hi_shot = shot
            break
        lo_shot = shot
    if lo_shot is None or hi_shot is None:
        raise BracketNotFound(
            f"no undershoot/overshoot change for u(0) in [{lo_val:g}, {hi_val:g}]"
        )

    widths = []
    it = 0
    while it < max_iter:
        width = (hi_shot.u0 - lo_shot.u0) / hi_shot.u0
        widths.append(width)
        if width <= rel_tol:
            break
        if stop_when_reached and lo_shot.outcome == REACHED:
            break
        mid = float(np.sqrt(lo_shot.u0 * hi_shot.u0))
        if not lo_shot.u0 < mid < hi_shot.u0:
            break
        shot = ode.shoot(mid, r_start, r_end)
        if shot.outcome == OVERSHOOT:
            hi_shot = shot
        else:
            lo_shot = shot
        it += 1
    LOGGER.debug("shooting bracket u0 in [%.15g, %.15g] after %d bisections", lo_shot.u0, hi_shot.u0, it)
    return Bracket(lo_shot, hi_shot, it, widths)


def separation_radius(bracket: Bracket, nodes: np.ndarray, sep_tol: float = 1e-6) -> int:
    """Number of leading nodes on which both bracketing shots agree to sep_tol relative."""
    lo, hi = bracket.lo, bracket.hi
    if lo.dense is None or hi.dense is None:
        return 0
    limit = min(lo.r_stop, hi.r_stop)
    k = int(np.searchsorted(nodes, limit, side="right"))
    if k == 0:
        return 0
    ulo = lo.values(nodes[:k])
    uhi = hi.values(nodes[:k])
    scale = np.maximum(np.abs(0.5 * (ulo + uhi)), 1e-300)
    bad = np.nonzero(np.abs(ulo - uhi) > sep_tol * scale)[0]
    return int(bad[0]) if len(bad) else k
