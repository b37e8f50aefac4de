# src/inls/grid.py

"""
Cell-centered radial mesh for radial functions on R^N.

Node j sits at r_j = (j + 1/2)h and owns the cell [jh, (j+1)h]. Both weight
vectors are exact cell integrals, so the |x|^{-b} factor is never evaluated
at the origin:

    quad_weights[j]     = ω_{N-1} ∫_cell r^{N-1} dr
    singular_weights[j] = ω_{N-1} ∫_cell r^{N-1-b} dr

The kinetic term lives on the faces between neighbouring nodes. The face at
the origin carries no flux (even reflection) and u vanishes at r_max through
an odd ghost node, which gives a symmetric tridiagonal stiffness matrix A with
uᵀAu = ∫|∇u|² and discrete -Δ = W⁻¹A.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gamma

from .errors import ParameterError
from .params import ProblemParams

MIN_NODES = 16


def sphere_area(dim: int) -> float:
    """ω_{N-1} = 2π^{N/2}/Γ(N/2); equals 2 for N = 1."""
    return 2.0 * math.pi ** (dim / 2.0) / gamma(dim / 2.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RadialGrid:
    dim: int
    b: float
    n: int
    r_max: float
    h: float
    nodes: np.ndarray
    quad_weights: np.ndarray
    singular_weights: np.ndarray
    face_coeffs: np.ndarray  # interior faces j+1/2, j = 0..n-2
    boundary_coeff: float  # face at r_max with the odd ghost

    @property
    def signature(self) -> tuple:
        return (self.dim, round(self.b, 14), self.n, round(self.r_max, 14))

    @property
    def weight_ratio(self) -> np.ndarray:
        """Cell-averaged |x|^{-b}: singular_weights / quad_weights."""
        return self.singular_weights / self.quad_weights

    @property
    def omega(self) -> float:
        return sphere_area(self.dim)

    def stiffness_diagonals(self) -> tuple[np.ndarray, np.ndarray]:
        """Main and off diagonal of A."""
        diag = np.zeros(self.n)
        diag[:-1] += self.face_coeffs
        diag[1:] += self.face_coeffs
        diag[-1] += 2.0 * self.boundary_coeff
        return diag, -self.face_coeffs.copy()

    def apply_stiffness(self, u: np.ndarray) -> np.ndarray:
        du = np.diff(u)
        flux = self.face_coeffs * du
        out = np.zeros_like(u)
        out[:-1] -= flux
        out[1:] += flux
        out[-1] += 2.0 * self.boundary_coeff * u[-1]
        return out

    def neg_laplacian(self, u: np.ndarray) -> np.ndarray:
        return self.apply_stiffness(u) / self.quad_weights

    def banded(self, diag: np.ndarray, off: np.ndarray) -> np.ndarray:
        """Pack a symmetric tridiagonal matrix in scipy.linalg.solve_banded (1, 1) layout."""
        ab = np.zeros((3, self.n), dtype=np.result_type(diag, off))
        ab[0, 1:] = off
        ab[1, :] = diag
        ab[2, :-1] = off
        return ab

    def tail_mask(self, fraction: float = 0.05) -> np.ndarray:
        return self.nodes >= (1.0 - fraction) * self.r_max


def build_grid(params: ProblemParams, n_nodes: int, r_max: float) -> RadialGrid:
    return make_grid(params.dim, params.b, n_nodes, r_max)


def make_grid(dim: int, b: float, n_nodes: int, r_max: float) -> RadialGrid:
    if int(n_nodes) != n_nodes or n_nodes < MIN_NODES:
        raise ParameterError(f"n_nodes must be an integer >= {MIN_NODES} (got {n_nodes})")
    if not (math.isfinite(r_max) and r_max > 0):
        raise ParameterError(f"r_max must be positive and finite (got {r_max})")
    if not (0.0 < b < min(2.0, dim)):
        raise ParameterError(f"b must satisfy 0 < b < min(2, N) (got b={b}, N={dim})")

    n = int(n_nodes)
    h = r_max / n
    omega = sphere_area(dim)
    edges = h * np.arange(n + 1)
    nodes = h * (np.arange(n) + 0.5)

    quad = omega * np.diff(edges ** dim) / dim
    singular = omega * np.diff(edges ** (dim - b)) / (dim - b)

    faces = edges[1:-1]
    face_coeffs = omega * faces ** (dim - 1) / h
    boundary = omega * r_max ** (dim - 1) / h

    return RadialGrid(
        dim=dim,
        b=float(b),
        n=n,
        r_max=float(r_max),
        h=h,
        nodes=_frozen(nodes),
        quad_weights=_frozen(quad),
        singular_weights=_frozen(singular),
        face_coeffs=_frozen(face_coeffs),
        boundary_coeff=float(boundary),
    )


def ball_volume(dim: int, radius: float) -> float:
    return sphere_area(dim) * radius ** dim / dim


@dataclass(frozen=True, eq=False)
class Field:
    """Samples u(r_j) of a radial function; real or complex, read-only."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, copy=True)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        if vals.shape != (self.grid.n,):
            raise ParameterError(f"field has {vals.shape} samples, grid has {self.grid.n} nodes")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("field samples must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def scaled(self, factor: complex | float) -> "Field":
        return Field(self.grid, self.values * factor)
