import math

import pytest

from src.inls import stationary, thresholds
from src.inls.config import SolverConfig
from src.inls.errors import BracketNotFound, NonConvergence, ParameterError, RegimeMismatch
from src.inls.functionals import gaussian, gn_quotient, seeded_fields
from src.inls.grid import make_grid
from src.inls.params import ProblemParams
from src.inls.thresholds import (
    CheckResult,
    c0,
    c1,
    c1_star,
    c2,
    c3,
    closed_form_tu,
    decay_alpha,
    g_lower_bound,
    gn_constant,
    ground_state_field,
    hat_c2,
    locate_mass_threshold,
    resonance_exponent,
    rho,
    threshold_report,
    tilde_c2,
)

TWO_SOLUTION = ProblemParams(dim=1, b=0.5, p=8.0, q=3.0, mu=1)
MASS_CRITICAL = ProblemParams(dim=2, b=1.0, p=3.0, q=2.5, mu=1)
DEFOCUSING_CRITICAL = ProblemParams(dim=2, b=1.0, p=3.0, q=2.5, mu=-1)
CRITICAL_LOWER = ProblemParams(dim=3, b=0.5, p=4.0, q=3.0, mu=1)
FOCUSING = ProblemParams(dim=3, b=0.5, p=4.0, q=3.5, mu=1)
DEFOCUSING = ProblemParams(dim=3, b=0.5, p=4.0, q=2.5, mu=-1)
DEFOCUSING_SUBCRITICAL = ProblemParams(dim=3, b=0.5, p=2.8, q=2.4, mu=-1)


def grid_for(params, n=1024, r_max=12.0):
    return make_grid(params.dim, params.b, n, r_max)


@pytest.mark.parametrize("dim, b, p", [(1, 0.5, 4.0), (3, 0.5, 4.0)])
def test_gn_constant_is_attained_by_Q(dim, b, p):
    params = ProblemParams(dim=dim, b=b, p=p)
    g = grid_for(params)
    gn = gn_constant(params, g)
    qf = ground_state_field(params, g)
    assert gn.value > 0
    assert gn.residual <= 1e-8
    assert gn_quotient(qf, params) / gn.value == pytest.approx(1.0, abs=1e-2)
    for u in seeded_fields(g, 11, 10, 1.0):
        assert gn_quotient(u, params) <= gn.value


def test_gn_constant_is_memoized():
    params = ProblemParams(dim=3, b=0.5, p=4.0)
    g = grid_for(params)
    assert gn_constant(params, g) is gn_constant(params, grid_for(params))
    with pytest.raises(ParameterError):
        gn_constant(params, g, p=6.0)


def test_c1_equals_mass_of_critical_ground_state():
    g = grid_for(MASS_CRITICAL)
    value = c1(MASS_CRITICAL, g)
    qm = gn_constant(MASS_CRITICAL, g, p=MASS_CRITICAL.p_c).q_norm_sq
    assert value == pytest.approx(qm, rel=1e-3)
    with pytest.raises(RegimeMismatch):
        c1(FOCUSING, grid_for(FOCUSING))


def test_two_solution_threshold_ordering():
    g = grid_for(TWO_SOLUTION)
    value = c2(TWO_SOLUTION, g, corrected=True)
    assert 0 < value < min(tilde_c2(TWO_SOLUTION, g), hat_c2(TWO_SOLUTION, g))
    printed = c2(TWO_SOLUTION, g)
    assert printed > 0
    assert printed != pytest.approx(value)


def test_lower_bound_changes_sign_at_hat_c2():
    g = grid_for(TWO_SOLUTION)
    hat = hat_c2(TWO_SOLUTION, g)
    assert g_lower_bound(TWO_SOLUTION, 0.9 * hat, rho(TWO_SOLUTION, 0.9 * hat, g), g) > 0
    assert g_lower_bound(TWO_SOLUTION, 1.1 * hat, rho(TWO_SOLUTION, 1.1 * hat, g), g) < 0
    radii = [rho(TWO_SOLUTION, f * hat, g) for f in (0.25, 0.5, 0.75)]
    assert radii == sorted(radii, reverse=True)


def test_defocusing_critical_window():
    g = grid_for(DEFOCUSING_CRITICAL)
    assert c1_star(DEFOCUSING_CRITICAL, g) > c1(DEFOCUSING_CRITICAL, g)
    assert c0(DEFOCUSING_CRITICAL, g) == pytest.approx(c1(DEFOCUSING_CRITICAL, g))


def test_c0():
    assert c0(FOCUSING, grid_for(FOCUSING)) == 0.0
    with pytest.raises(RegimeMismatch):
        c0(MASS_CRITICAL, grid_for(MASS_CRITICAL))


def test_decay_exponents():
    assert decay_alpha(ProblemParams(dim=3, b=0.5, p=4.0, q=2.5, mu=-1)) == (pytest.approx(3.0), False)
    assert decay_alpha(ProblemParams(dim=3, b=0.5, p=4.5, q=4.0, mu=-1)) == (pytest.approx(1.0), False)
    assert resonance_exponent(3, 1.0) == pytest.approx(3.0)
    assert decay_alpha(ProblemParams(dim=3, b=1.0, p=3.8, q=3.0, mu=-1))[1] is True
    with pytest.raises(ParameterError):
        decay_alpha(ProblemParams(dim=2, b=1.0, p=3.0, q=2.5, mu=-1))


def test_closed_form_tu_critical_lower():
    g = grid_for(CRITICAL_LOWER, n=2048)
    out = closed_form_tu(gaussian(g, 1.0), CRITICAL_LOWER)
    assert out["hand_solved"] == pytest.approx(out["root_found"], rel=1e-8)
    assert math.isfinite(out["printed"])
    with pytest.raises(RegimeMismatch):
        closed_form_tu(gaussian(grid_for(FOCUSING), 1.0), FOCUSING)


def test_threshold_report_two_solution():
    g = grid_for(TWO_SOLUTION)
    report = threshold_report(TWO_SOLUTION, g)
    assert report.regime == "two-solution"
    assert {"c2", "c2_corrected", "tilde_c2", "hat_c2"} <= set(report.values)
    assert set(report.values) <= set(report.provenance)
    assert report.values["c2"] == pytest.approx(c2(TWO_SOLUTION, g))
    assert report.values["c2_corrected"] == pytest.approx(c2(TWO_SOLUTION, g, corrected=True))
    assert "as printed" in report.provenance["c2"]
    assert any(d.startswith("c2:") and "c2_corrected" in d for d in report.discrepancies)
    assert {"3", "8"} <= set(report.gn)


def test_check_result_status():
    ok, bad = CheckResult("a", True), CheckResult("b", False, "detail")
    assert (ok.status, ok.failed) == ("pass", False)
    assert (bad.status, bad.failed) == ("fail", True)
    limited = CheckResult.graded("c", "resolution-limited", "1e-5 -> 2.5e-6")
    assert not limited.passed
    assert not limited.failed
    assert limited.to_dict() == {"name": "c", "passed": False, "detail": "1e-5 -> 2.5e-6", "status": "resolution-limited"}
    assert CheckResult.graded("d", "pass").passed


def test_c3_printed_and_derived():
    g = grid_for(DEFOCUSING)
    printed, derived = c3(DEFOCUSING, g), c3(DEFOCUSING, g, derived=True)
    assert printed > 0 and derived > 0
    # N(p-2)-2(2-b) over N equals 2(p-b)-N(p-2) at N = 3, p = 4, b = 0.5
    assert printed == pytest.approx(derived, rel=1e-12)
    report = threshold_report(DEFOCUSING, g)
    assert report.values["c3"] == pytest.approx(printed)
    assert report.values["c3_derived"] == pytest.approx(derived)
    assert report.values["c0"] == 0.0
    with pytest.raises(RegimeMismatch):
        c3(FOCUSING, grid_for(FOCUSING))


@pytest.mark.slow
def test_multiplier_positive_below_c3():
    from src.inls.stationary import mountain_pass_solve

    g = grid_for(DEFOCUSING)
    rep = mountain_pass_solve(DEFOCUSING, 0.5 * c3(DEFOCUSING, g), g, SolverConfig())
    assert rep.converged
    assert rep.lam > 0
    assert rep.energy.total > 0


def test_mass_threshold_bisection(monkeypatch):
    calls = []

    def sign_at_three(params, c, grid, settings):
        calls.append(c)
        return c > 3.0, 3.0 - c

    monkeypatch.setattr(thresholds, "_negative_energy", sign_at_three)
    g = grid_for(DEFOCUSING_SUBCRITICAL)
    lo, hi = locate_mass_threshold(DEFOCUSING_SUBCRITICAL, 0.5, 20.0, g, rel_width=0.01)
    assert lo <= 3.0 < hi
    assert hi / lo <= 1.01
    assert calls[:2] == [0.5, 20.0]


def test_mass_threshold_needs_a_sign_change(monkeypatch):
    monkeypatch.setattr(thresholds, "_negative_energy", lambda params, c, grid, settings: (True, -c))
    g = grid_for(DEFOCUSING_SUBCRITICAL)
    with pytest.raises(BracketNotFound):
        locate_mass_threshold(DEFOCUSING_SUBCRITICAL, 0.5, 20.0, g)
    with pytest.raises(ParameterError):
        locate_mass_threshold(DEFOCUSING_SUBCRITICAL, 20.0, 0.5, g)
    with pytest.raises(RegimeMismatch):
        locate_mass_threshold(ProblemParams(dim=3, b=0.5, p=2.8, q=2.4, mu=1), 0.5, 20.0, g)
    with pytest.raises(RegimeMismatch):
        locate_mass_threshold(FOCUSING, 0.5, 20.0, grid_for(FOCUSING))


def test_unconverged_sample_stops_the_search(monkeypatch):
    def stuck(*args, **kwargs):
        raise NonConvergence("gradient flow did not converge", [1.0, 0.5])

    monkeypatch.setattr(stationary, "normalized_gradient_flow", stuck)
    g = grid_for(DEFOCUSING_SUBCRITICAL)
    with pytest.raises(NonConvergence) as info:
        locate_mass_threshold(DEFOCUSING_SUBCRITICAL, 0.5, 20.0, g)
    assert info.value.residual_history == [1.0, 0.5]


@pytest.mark.slow
def test_mass_threshold_from_gradient_flow():
    g = make_grid(3, 0.5, 2048, 12.0)
    lo, hi = locate_mass_threshold(DEFOCUSING_SUBCRITICAL, 50.0, 1000.0, g, SolverConfig(), rel_width=0.25)
    assert 50.0 <= lo < hi <= 1000.0
    assert hi / lo <= 1.25
