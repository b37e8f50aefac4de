from types import SimpleNamespace

import numpy as np
import pytest

from src.inls.errors import ParameterError, RegimeMismatch
from src.inls.functionals import EnergyBreakdown
from src.inls.grid import Field, make_grid
from src.inls.params import ProblemParams
from src.inls.shooting import OVERSHOOT, UNDERSHOOT
from src.inls.stationary import STATUS_FAIL, STATUS_LIMITED, STATUS_PASS
from src.inls.zeromass import (
    ZERO_MASS_TOL,
    ZeroMassResult,
    fit_tail,
    ground_state_zero_mass,
    resonance_scan,
    saturation_expected,
    shoot_zero_mass,
    sigma_saturation_check,
    zero_mass_identities,
)

FAST_DECAY = ProblemParams(dim=3, b=0.5, p=4.0, q=2.5, mu=-1)      # α = (2-b)/(q-2) = 3
SLOW_DECAY = ProblemParams(dim=3, b=0.5, p=4.5, q=4.0, mu=-1)      # α = N-2 = 1
RESONANT = ProblemParams(dim=3, b=1.0, p=3.8, q=3.0, mu=-1)        # q = (2N-2-b)/(N-2)


@pytest.fixture(scope="module")
def far_grid():
    return make_grid(3, 0.5, 2048, 80.0)


def test_shots_bracket_the_ground_state(far_grid):
    assert shoot_zero_mass(FAST_DECAY, 1e-2, far_grid).outcome == UNDERSHOOT
    assert shoot_zero_mass(FAST_DECAY, 1e3, far_grid).outcome == OVERSHOOT
    with pytest.raises(ParameterError):
        shoot_zero_mass(FAST_DECAY, 0.0, far_grid)


def test_zero_mass_needs_three_dimensions():
    g = make_grid(2, 1.0, 256, 20.0)
    with pytest.raises(ParameterError):
        shoot_zero_mass(ProblemParams(dim=2, b=1.0, p=3.0, q=2.5, mu=-1), 1.0, g)


def test_fit_recovers_power_law(far_grid):
    u = Field(far_grid, far_grid.nodes ** -3.0)
    fit = fit_tail(u, FAST_DECAY)
    assert fit.slope == pytest.approx(-3.0, rel=1e-10)
    assert fit.alpha_expected == pytest.approx(3.0)
    assert fit.relative_error <= 1e-10
    assert fit.nodes_used >= 50


def test_fit_prefers_log_correction_at_resonance():
    g = make_grid(3, 1.0, 2048, 80.0)
    r = g.nodes
    u = Field(g, 1.0 / (r * np.log(r)))
    fit = fit_tail(u, RESONANT)
    assert fit.log_corrected
    assert fit.log_residual < 1e-10 < fit.power_residual
    # u r = (ln r)^{-1}: exponent (2-N)/(2-b) = -1
    assert fit.log_slope_expected == pytest.approx(-1.0)
    assert fit.log_slope == pytest.approx(-1.0, rel=1e-10)
    assert fit.log_slope_deviation <= 1e-10
    assert fit.to_dict()["log_slope_deviation"] == fit.log_slope_deviation


def test_power_fit_has_no_log_slope(far_grid):
    fit = fit_tail(Field(far_grid, far_grid.nodes ** -3.0), FAST_DECAY)
    assert fit.log_slope is None
    assert fit.log_slope_deviation is None


def test_fit_window_too_small():
    g = make_grid(3, 0.5, 256, 12.0)
    with pytest.raises(ParameterError):
        fit_tail(Field(g, g.nodes ** -3.0), FAST_DECAY)


def test_saturation_expectation():
    assert saturation_expected(FAST_DECAY)
    assert not saturation_expected(ProblemParams(dim=3, b=0.5, p=4.0, q=3.5, mu=-1))


@pytest.mark.slow
@pytest.mark.parametrize("params, alpha, finite", [(FAST_DECAY, 3.0, True), (SLOW_DECAY, 1.0, False)])
def test_zero_mass_ground_state(far_grid, params, alpha, finite):
    zm = ground_state_zero_mass(params, far_grid)
    assert zm.sigma0 > 0
    assert zm.identity_status() != STATUS_FAIL
    assert zm.identities["relative_pohozaev"] <= max(ZERO_MASS_TOL, zm.tail_share)
    assert zm.identities["relative_nehari"] <= max(ZERO_MASS_TOL, zm.tail_share)
    assert zm.mass_finite is finite
    fit = fit_tail(zm.report.state, params)
    assert fit.slope == pytest.approx(-alpha, rel=0.05)


# N = 3, b = 0.5, q = 2.5, p = 4 with ‖∇u‖² = 1: Nehari and Pohozaev fix T_q = 1/3, T_p = 4/3
BALANCED = EnergyBreakdown(0.5, 1.0 / 3.0, 4.0 / 3.0, 0.5 + (1.0 / 3.0) / 2.5 - (4.0 / 3.0) / 4.0)


def test_zero_mass_identities_of_balanced_integrals():
    ids = zero_mass_identities(FAST_DECAY, BALANCED)
    for key in ("nehari", "derrick", "pohozaev", "relative_pohozaev", "relative_nehari"):
        assert ids[key] == pytest.approx(0.0, abs=1e-12)
    off = EnergyBreakdown(BALANCED.kinetic, BALANCED.term_q, BALANCED.term_p + 0.1, BALANCED.total)
    ids = zero_mass_identities(FAST_DECAY, off)
    assert ids["nehari"] == pytest.approx(-0.1)
    assert ids["relative_nehari"] == pytest.approx(0.1)


def _synthetic(residual, tail_k2):
    report = SimpleNamespace(grad_norm_sq=1.0, energy=BALANCED)
    tail = {"K2": tail_k2, "Tq": 0.0, "Tp": 0.0, "M": 0.0}
    ids = {"relative_pohozaev": residual, "relative_nehari": 0.0}
    return ZeroMassResult(report, 1.0, 1e-12, 40.0, 1.0, tail, 1.0, ids)


def test_identity_status_is_graded_against_the_tail():
    assert _synthetic(1e-7, 0.0).identity_status() == STATUS_PASS
    assert _synthetic(1e-4, 1e-3).identity_status() == STATUS_LIMITED
    assert _synthetic(1e-3, 1e-5).identity_status() == STATUS_FAIL
    assert _synthetic(1e-3, float("inf")).identity_status() == STATUS_FAIL
    assert _synthetic(1e-4, 1e-3).tail_share == pytest.approx(1e-3)


def test_resonance_scan_needs_three_dimensions():
    g = make_grid(2, 1.0, 256, 20.0)
    with pytest.raises(ParameterError):
        resonance_scan(ProblemParams(dim=2, b=1.0, p=3.0, q=2.5, mu=-1), g)


@pytest.mark.slow
def test_resonance_scan():
    g = make_grid(3, 1.0, 2048, 80.0)
    # q = 3 - 1.5 is below 2 and dropped
    rows = resonance_scan(RESONANT, g, offsets=(-1.5, 0.0, 0.5))
    assert [row["q"] for row in rows] == pytest.approx([3.0, 3.5])
    at, above = rows
    assert at["offset"] == pytest.approx(0.0, abs=1e-12)
    assert at["log_corrected"] and not above["log_corrected"]
    assert at["log_residual"] < at["power_residual"]
    assert at["log_slope_expected"] == pytest.approx(-1.0)
    assert above["alpha_expected"] == pytest.approx(1.0)


def test_saturation_check_needs_defocusing_supercritical():
    g = make_grid(3, 0.5, 256, 12.0)
    with pytest.raises(RegimeMismatch):
        sigma_saturation_check(ProblemParams(dim=3, b=0.5, p=4.0, q=3.5, mu=1), [1.0], g, g, progress=False)


@pytest.mark.slow
def test_saturation_check(far_grid):
    g = make_grid(3, 0.5, 1024, 12.0)
    out = sigma_saturation_check(FAST_DECAY, [0.5, 1.0], g, far_grid, progress=False)
    assert out["sigma0"] > 0
    assert out["alpha"] == pytest.approx(3.0)
    assert out["mass_finite"]
    assert out["saturation_expected"]
    assert [row["c"] for row in out["points"]] == [0.5, 1.0]
    assert all(row["ok"] for row in out["points"])
    assert all(row["sigma"] > 0 for row in out["points"])
