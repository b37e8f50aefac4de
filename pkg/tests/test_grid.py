import math

import numpy as np
import pytest

from src.inls.errors import ParameterError
from src.inls.functionals import grad_norm_sq, mass, weighted_power
from src.inls.grid import Field, ball_volume, make_grid, sphere_area


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2.0 * math.pi)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi)


def test_cell_centered_nodes():
    g = make_grid(3, 0.5, 16, 4.0)
    assert g.h == pytest.approx(0.25)
    assert g.nodes[:3] == pytest.approx([0.125, 0.375, 0.625])
    assert g.nodes[-1] == pytest.approx(3.875)


def test_weights_are_exact_cell_integrals():
    g = make_grid(3, 0.5, 64, 4.0)
    assert g.quad_weights.sum() == pytest.approx(ball_volume(3, 4.0), rel=1e-12)
    # ∫_{|x|<R} |x|^{-b} dx = ω R^{N-b}/(N-b)
    assert g.singular_weights.sum() == pytest.approx(4.0 * math.pi * 4.0 ** 2.5 / 2.5, rel=1e-12)
    assert np.all(np.isfinite(g.weight_ratio))


def test_stiffness_is_symmetric_and_matches_gradient():
    g = make_grid(2, 1.0, 32, 3.0)
    rng = np.random.default_rng(1)
    u, v = rng.normal(size=g.n), rng.normal(size=g.n)
    assert np.dot(v, g.apply_stiffness(u)) == pytest.approx(np.dot(u, g.apply_stiffness(v)), rel=1e-12)
    assert np.dot(u, g.apply_stiffness(u)) == pytest.approx(grad_norm_sq(Field(g, u)), rel=1e-12)

    diag, off = g.stiffness_diagonals()
    dense = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    assert dense @ u == pytest.approx(g.apply_stiffness(u), rel=1e-12, abs=1e-12)


def test_gaussian_integrals_converge():
    g = make_grid(3, 0.5, 2048, 12.0)
    u = Field(g, np.exp(-g.nodes ** 2 / 2.0))
    # ‖e^{-r²/2}‖² = π^{3/2}; ∫|∇u|² = (3/2)π^{3/2}
    assert mass(u) == pytest.approx(math.pi ** 1.5, rel=1e-4)
    assert grad_norm_sq(u) == pytest.approx(1.5 * math.pi ** 1.5, rel=1e-3)
    assert weighted_power(u, 2.0) > 0


def test_invalid_grids():
    with pytest.raises(ParameterError):
        make_grid(3, 0.5, 8, 4.0)
    with pytest.raises(ParameterError):
        make_grid(3, 0.5, 64, -1.0)
    with pytest.raises(ParameterError):
        make_grid(2, 2.0, 64, 4.0)


def test_field_is_read_only_and_checked():
    g = make_grid(3, 0.5, 16, 4.0)
    u = Field(g, np.ones(g.n))
    with pytest.raises(ValueError):
        u.values[0] = 2.0
    with pytest.raises(ParameterError):
        Field(g, np.ones(g.n + 1))
    with pytest.raises(ParameterError):
        Field(g, np.full(g.n, np.nan))
