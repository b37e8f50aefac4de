import numpy as np
import pytest

from src.inls.errors import BracketNotFound
from src.inls.grid import make_grid
from src.inls.shooting import (
    OVERSHOOT,
    UNDERSHOOT,
    RadialOde,
    bisect_ground_state,
    separation_radius,
)


@pytest.fixture(scope="module")
def ode():
    return RadialOde(dim=3, b=0.5, p=4.0, q=None, mu=0.0, lam=1.0)


def test_classification_at_the_extremes(ode):
    assert ode.shoot(1e-3, 1e-3, 12.0).outcome == UNDERSHOOT
    assert ode.shoot(50.0, 1e-3, 12.0).outcome == OVERSHOOT


def test_series_start_satisfies_the_equation(ode):
    u0, r0 = 1.3, 1e-4
    y = ode.start(u0, r0)
    A, B, _ = ode.expansion(u0)
    assert y[0] == pytest.approx(u0, rel=1e-3)
    # leading singular term balances r^{-b} g(u0)
    assert B == pytest.approx(-ode.g(u0) / (1.5 * 2.5))
    assert A == pytest.approx(u0 / 6.0)
    assert y[1] < 0


def test_bisection_brackets_the_ground_state(ode):
    bracket = bisect_ground_state(ode, 1e-3, 12.0, rel_tol=1e-12)
    assert bracket.lo.u0 < bracket.hi.u0
    assert bracket.relative_width <= 1e-12
    assert bracket.hi.outcome == OVERSHOOT
    assert bracket.lo.outcome != OVERSHOOT
    assert bracket.widths == sorted(bracket.widths, reverse=True)

    grid = make_grid(3, 0.5, 1024, 12.0)
    k = separation_radius(bracket, grid.nodes)
    assert k > grid.n // 4
    profile = bracket.lo.values(grid.nodes[:k])
    assert np.all(profile > 0)


def test_missing_bracket(ode):
    with pytest.raises(BracketNotFound):
        bisect_ground_state(ode, 1e-3, 12.0, u0_range=(1e-6, 1e-4), scan_points=5)
