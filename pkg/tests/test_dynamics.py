import numpy as np
import pytest

from src.inls.dynamics import (
    BLOWUP,
    COMPLETED,
    SimTrace,
    K_MINUS,
    K_PLUS,
    NEITHER,
    blowup_experiment,
    boundary_monitor,
    chi_localized,
    chi_localized_second,
    chi_prime,
    chi_second,
    classify_K,
    initial_data,
    instability_experiment,
    linear_step,
    phase_distance,
    simulate,
    stability_experiment,
    step,
    strauss_check,
    support_label,
    virial,
    virial_localized,
)
from src.inls.errors import ParameterError
from src.inls.functionals import energy, fiber_scale, fiber_scan, gaussian, mass, normalize_to_mass, seeded_fields
from src.inls.grid import Field, make_grid
from src.inls.params import ProblemParams
from src.inls.stationary import mountain_pass_solve, solve_lambda_fixed

FOCUSING = ProblemParams(dim=3, b=0.5, p=4.0, q=3.5, mu=1)


@pytest.fixture(scope="module")
def grid():
    return make_grid(3, 0.5, 1024, 12.0)


@pytest.fixture(scope="module")
def moving(grid):
    u = gaussian(grid, 1.0)
    # outgoing phase e^{i r²/4}
    return Field(grid, u.values * np.exp(0.25j * grid.nodes ** 2))


def test_free_step_is_unitary(moving):
    out = moving
    for _ in range(20):
        out = linear_step(out, 1e-2)
    assert mass(out) == pytest.approx(mass(moving), rel=1e-12)


def test_nonlinear_step_conserves_mass_and_reverses(moving):
    fwd = step(moving, 1e-2, FOCUSING)
    assert mass(fwd) == pytest.approx(mass(moving), rel=1e-12)
    back = step(fwd, -1e-2, FOCUSING)
    assert np.allclose(back.values, moving.values, atol=1e-10)
    with pytest.raises(ParameterError):
        step(moving, 0.0, FOCUSING)


def test_virial_of_real_field_vanishes(grid, moving):
    assert virial(gaussian(grid, 1.0)) == 0.0
    # outgoing phase has positive radial momentum
    assert virial(moving) > 0


def test_cutoff_profile():
    r = np.linspace(0.0, 3.0, 3001)
    d1, d2 = chi_prime(r), chi_second(r)
    assert np.allclose(d1[r <= 1.0], r[r <= 1.0])
    assert np.all(d1[r >= 2.0] == 0.0)
    assert np.all(d2 <= 1.0 + 1e-12)
    # χ'' is the derivative of χ'
    mid = (r[1:] + r[:-1]) / 2.0
    assert np.allclose(np.diff(d1) / np.diff(r), chi_second(mid), atol=1e-3)
    assert np.allclose(chi_localized(r, 2.0)[r <= 2.0], r[r <= 2.0])
    with pytest.raises(ParameterError):
        chi_localized(r, 0.0)


def test_classify_K(grid):
    u = gaussian(grid, 2.0)
    e = energy(u, FOCUSING).total
    assert classify_K(u, FOCUSING, e) == NEITHER
    assert classify_K(u.scaled(0.1), FOCUSING, e + 10.0) == K_PLUS
    t_star = fiber_scan(u, FOCUSING).roots()[0]
    far = normalize_to_mass(fiber_scale(u, 2.0 * t_star), 2.0)
    assert classify_K(far, FOCUSING, energy(far, FOCUSING).total + 1.0) == K_MINUS


def test_phase_distance_ignores_global_phase(grid):
    u = gaussian(grid, 1.0)
    rotated = Field(grid, np.exp(0.7j) * u.values)
    assert phase_distance(rotated, u) == pytest.approx(0.0, abs=1e-7)
    assert phase_distance(u.scaled(2.0), u) == pytest.approx(1.0, rel=1e-6)


def test_strauss_bound(grid):
    zero = strauss_check(Field(grid, np.zeros(grid.n)))
    assert zero["holds"] and zero["ratio"] == 0.0
    for u in seeded_fields(grid, 3, 10, 1.0):
        out = strauss_check(u)
        assert out["holds"]
        assert out["ratio_sharp"] <= 1.0 + 1e-2
    with pytest.raises(ParameterError):
        strauss_check(gaussian(make_grid(1, 0.5, 64, 4.0), 1.0))


def test_initial_data_recipes(grid):
    psi = initial_data("gaussian", grid, 1.5)
    assert psi.is_complex
    assert mass(psi) == pytest.approx(1.5)
    with pytest.raises(ParameterError):
        initial_data("ground-state", grid, 1.5)
    with pytest.raises(ParameterError):
        initial_data("plane-wave", grid, 1.5)


def test_support_label():
    assert support_label(FOCUSING) == "supported"
    assert support_label(ProblemParams(dim=1, b=0.5, p=8.0, q=3.0)).startswith("unsupported")


def test_short_run_conserves(grid):
    trace = simulate(initial_data("gaussian", grid, 1.0), 0.05, 1e-3, FOCUSING, sample_every=5)
    assert trace.outcome == COMPLETED
    assert trace.times[-1] == pytest.approx(0.05)
    assert trace.mass_drift <= 1e-10
    assert trace.energy_drift <= 1e-3
    frame = trace.to_frame()
    assert list(frame.columns[:3]) == ["t", "mass", "energy"]
    assert len(frame) == len(trace.times)


@pytest.mark.slow
def test_negative_energy_gaussian_blows_up():
    g = make_grid(3, 0.5, 2048, 12.0)
    psi0 = normalize_to_mass(fiber_scale(gaussian(g, 2.0), 8.0), 2.0)
    assert energy(psi0, FOCUSING).total < 0
    trace = simulate(Field(g, psi0.values.astype(complex)), 0.5, 1e-4, FOCUSING)
    assert trace.outcome == BLOWUP
    assert trace.grad_norm_series[-1] > trace.grad_norm_series[0]


def test_localized_cutoff_second_derivative():
    r = np.linspace(0.0, 10.0, 1001)
    d2 = chi_localized_second(r, 3.0)
    assert np.all(d2[r <= 3.0] == 1.0)
    assert np.all(d2[r >= 6.0] == 0.0)
    assert np.allclose(d2, chi_second(r / 3.0))
    with pytest.raises(ParameterError):
        chi_localized_second(r, -1.0)


def test_boundary_monitor(grid):
    assert boundary_monitor(SimTrace()) == {"max_abs": 0.0, "max_tail_mass": 0.0}
    trace = simulate(initial_data("gaussian", grid, 1.0), 0.02, 1e-3, FOCUSING, sample_every=5)
    out = boundary_monitor(trace)
    assert set(out) == {"max_abs", "max_tail_mass"}
    assert 0.0 <= out["max_abs"] < 1e-6
    assert out["max_tail_mass"] < 1e-10
    assert trace.to_dict()["boundary"] == out


def test_localized_virial_matches_full_inside_cutoff(grid, moving):
    full = virial(moving)
    assert full > 0
    assert virial_localized(moving, 2.0 * grid.r_max) == pytest.approx(full, rel=1e-12)
    # cutoff at R = 1 only sees the core
    assert abs(virial_localized(moving, 1.0)) < abs(full)
    trace = simulate(moving, 0.01, 1e-3, FOCUSING, sample_every=5, virial_radius=2.0 * grid.r_max)
    assert trace.virial_series[0] == pytest.approx(full, rel=1e-12)


@pytest.fixture(scope="module")
def standing(grid):
    return solve_lambda_fixed(FOCUSING, 1.0, grid)


@pytest.fixture(scope="module")
def mountain_pass(grid):
    return mountain_pass_solve(FOCUSING, 2.0, grid)


def _evolve(psi: Field, T: float, dt: float) -> Field:
    for _ in range(int(round(T / dt))):
        psi = step(psi, dt, FOCUSING)
    return psi


def _standing_wave_error(standing, T: float, dt: float) -> float:
    u = standing.state
    psi = _evolve(Field(u.grid, u.values.astype(complex)), T, dt)
    exact = Field(u.grid, np.exp(1j * standing.lam * T) * u.values)
    return float(np.sqrt(mass(Field(u.grid, psi.values - exact.values))))


def test_standing_wave_keeps_its_profile(standing):
    u = standing.state
    psi = _evolve(Field(u.grid, u.values.astype(complex)), 0.5, 5e-3)
    assert mass(psi) == pytest.approx(mass(u), rel=1e-12)
    assert phase_distance(psi, u) <= 1e-3 * np.sqrt(mass(u))
    assert _standing_wave_error(standing, 0.5, 5e-3) <= 1e-2 * np.sqrt(mass(u))


def test_strang_splitting_is_second_order(standing):
    coarse = _standing_wave_error(standing, 0.2, 2e-2)
    fine = _standing_wave_error(standing, 0.2, 1e-2)
    assert fine > 0
    assert coarse / fine >= 3.5


def test_virial_identity(grid):
    trace = simulate(initial_data("gaussian", grid, 1.0), 0.1, 5e-4, FOCUSING, sample_every=4)
    assert trace.outcome == COMPLETED
    assert len(trace.times) > 3
    assert trace.virial_defect() <= 1e-2


def test_strauss_ratio_is_not_vacuous(grid):
    r = grid.nodes
    shell = normalize_to_mass(Field(grid, np.exp(-((r - 6.0) ** 2) / (2.0 * 0.3 ** 2))), 1.0)
    out = strauss_check(shell)
    assert out["holds"]
    assert 0.2 < out["ratio_sharp"] <= 1.0
    # thin shell: (2 (π/2)^{1/2})^{-1/2}
    assert out["ratio_sharp"] == pytest.approx((2.0 * np.sqrt(np.pi / 2.0)) ** -0.5, rel=2e-2)
    assert out["worst_radius"] == pytest.approx(6.0, abs=0.1)


@pytest.mark.slow
def test_k_plus_stays_bounded(grid, mountain_pass):
    u = mountain_pass.state
    psi0 = initial_data("fiber-scaled", grid, mass(u), ground=u, tau=0.8)
    assert classify_K(psi0, FOCUSING, mountain_pass.energy.total) == K_PLUS
    trace = simulate(psi0, 2.0, 2e-3, FOCUSING)
    assert trace.outcome == COMPLETED
    assert all(q > 0 for q in trace.q_series)
    assert max(trace.grad_norm_series) < trace.blowup_threshold


@pytest.mark.slow
def test_perturbed_ground_state_is_orbitally_stable():
    from src.inls.stationary import best_fiber_start, normalized_gradient_flow

    global_min = ProblemParams(dim=3, b=0.5, p=2.8, q=2.4, mu=1).with_mass(2.0)
    g = make_grid(3, 0.5, 1024, 12.0)
    ground = normalized_gradient_flow(global_min, best_fiber_start(global_min, g, 2.0))
    out = stability_experiment(ground, 1e-2, 2.0, global_min, dt=2e-3)
    assert out["outcome"] == COMPLETED
    assert out["initial_deviation"] <= 2e-2 * np.sqrt(2.0)
    assert out["within_ten_eps"]


@pytest.mark.slow
def test_fiber_scaled_ground_state_blows_up(mountain_pass):
    out = blowup_experiment(mountain_pass, 1.2, 10.0, FOCUSING, dt=2e-3)
    assert out["classification"] == K_MINUS
    assert out["outcome"] == BLOWUP
    assert out["q_negative_throughout"]
    assert out["q_bound"] < 0


@pytest.mark.slow
def test_ground_state_is_strongly_unstable(mountain_pass):
    out = instability_experiment(mountain_pass, (1.2, 1.1), 10.0, FOCUSING, dt=2e-3)
    assert out["support"] == "supported"
    assert out["all_blowup"]
    first, second = out["runs"]
    assert second["distance"] < first["distance"]
