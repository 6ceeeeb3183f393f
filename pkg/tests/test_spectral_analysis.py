import math

import numpy as np
import pytest

from g2lab.exceptions import EigenConvergenceError, ScalingFitError, UnderresolvedGridError
from g2lab.settings import GridPolicy, NumericsSettings
from g2lab.spectral_analysis import (
    assembled_surface_spectrum,
    build_probe,
    check_holder_parameters,
    discrete_norms,
    fit_growth_exponent,
    grid_for_epsilon,
    grid_surface_spectrum,
    inverse_scaling_experiment,
    kernel_dimension,
    lambda_d,
    lambda_d_per_mode,
    lowest_mode,
    mean_free_check,
    measure_inverse_norm,
    surface_spectrum,
    theorem_bound,
    validate_epsilons,
    verify_lambda_bound,
)
from g2lab.thin_dirac import (
    BoundaryClass,
    DiscreteOperator,
    SpinorGrid,
    ThinCylinderGrid,
    TwistedBundle,
    WarpProfile,
    assemble,
    case_two_mode_solution,
    solve,
    weighted_inner,
)


def test_surface_spectrum_closed_form(half_twist: TwistedBundle) -> None:
    spectrum = surface_spectrum(half_twist, 2)
    assert len(spectrum) == 25
    assert spectrum[:4] == pytest.approx([0.125] * 4)
    assert spectrum[4] == pytest.approx(0.625)
    assert surface_spectrum(TwistedBundle(0.0, 0.0), 1)[0] == 0.0
    assert surface_spectrum(TwistedBundle(0.25, 0.0), 1)[0] == pytest.approx(1 / 64)


def test_surface_spectrum_needs_modes(half_twist: TwistedBundle) -> None:
    with pytest.raises(ValueError):
        surface_spectrum(half_twist, 0)


@pytest.mark.parametrize("which", ["minus", "plus"])
def test_assembled_surface_spectrum_matches_closed_form(
    small_grid: ThinCylinderGrid, half_twist: TwistedBundle, which: str
) -> None:
    assembled = assembled_surface_spectrum(small_grid, half_twist, which)  # type: ignore[arg-type]
    expected = grid_surface_spectrum(small_grid, half_twist)
    np.testing.assert_allclose(assembled, expected, atol=1e-10)


@pytest.mark.parametrize("h", [0.5, 1.0, 2.0, 4.0])
def test_lambda_d_for_constant_warp_is_surface_gap(
    small_grid: ThinCylinderGrid, half_twist: TwistedBundle, h: float
) -> None:
    warp = WarpProfile.constant(small_grid, h)
    operator = assemble(small_grid, half_twist, warp)
    value = lambda_d(operator)
    assert value >= theorem_bound(small_grid.epsilon, warp, 0.125) - 1e-6
    assert value == pytest.approx(0.125, rel=1e-6)
    assert value == pytest.approx(lambda_d_per_mode(small_grid, half_twist, h), rel=1e-6)


def test_lowest_mode_is_weighted_unit_minus_field(
    small_grid: ThinCylinderGrid, half_twist: TwistedBundle
) -> None:
    warp = WarpProfile.cosine(small_grid, 1.0, 0.2, 2.0)
    value, mode = lowest_mode(assemble(small_grid, half_twist, warp))
    assert mode.boundary_class == "minus"
    assert weighted_inner(mode, mode, warp).real == pytest.approx(1.0)
    assert 0.0 < value <= 0.125 + 1e-9


def test_inverse_iteration_reports_trace(
    small_grid: ThinCylinderGrid, half_twist: TwistedBundle
) -> None:
    operator = assemble(small_grid, half_twist, WarpProfile.constant(small_grid, 1.0))
    with pytest.raises(EigenConvergenceError) as info:
        lambda_d(operator, NumericsSettings(eigen_max_iter=1, eigen_tol=1e-15))
    assert len(info.value.trace) == 2


@pytest.mark.parametrize(
    ("twist", "boundary_class", "expected"),
    [((0.0, 0.0), "minus", 2), ((0.5, 0.5), "minus", 0), ((0.5, 0.5), "plus", 0)],
)
def test_kernel_dimension(
    small_grid: ThinCylinderGrid,
    twist: tuple[float, float],
    boundary_class: BoundaryClass,
    expected: int,
) -> None:
    operator = assemble(small_grid, TwistedBundle(*twist), WarpProfile.constant(small_grid, 1.0))
    assert kernel_dimension(operator, boundary_class=boundary_class) == expected


def test_theorem_bound() -> None:
    grid = ThinCylinderGrid(0.25, 8, 4, 4)
    flat = WarpProfile.constant(grid, 1.0)
    assert theorem_bound(0.25, flat, 0.125) == pytest.approx(0.125)
    assert theorem_bound(1.5, flat, 0.125) < 0
    assert theorem_bound(0.25, WarpProfile.constant(grid, 4.0), 0.125) == pytest.approx(0.03125)


@pytest.mark.parametrize("c1", [0.0, 0.2])
def test_verify_lambda_bound(
    small_grid: ThinCylinderGrid, half_twist: TwistedBundle, c1: float
) -> None:
    warp = WarpProfile.cosine(small_grid, 1.0, c1, 2.0)
    report = verify_lambda_bound(small_grid, half_twist, warp, with_kernel=True)
    assert report.passed
    assert report.lambda_surface_minus == pytest.approx(0.125)
    assert report.lambda_surface_plus == pytest.approx(0.125)
    assert report.margin >= -1e-6
    assert report.kernel_dimension == 0


@pytest.mark.parametrize("M", [16, 32])
def test_solutions_of_wall_forcing_are_mean_free(half_twist: TwistedBundle, M: int) -> None:
    grid = ThinCylinderGrid(0.25, M, 8, 8)
    exact, rhs = case_two_mode_solution(grid, half_twist, 1.0)
    assert mean_free_check(exact) <= 1e-12
    numerical = solve(assemble(grid, half_twist, WarpProfile.constant(grid, 1.0)), rhs)
    assert mean_free_check(numerical) <= 1e-12


def test_norms_of_a_twisted_phase(
    grid: ThinCylinderGrid, half_twist: TwistedBundle, flat_warp: WarpProfile
) -> None:
    u = np.broadcast_to(half_twist.phase(grid), grid.shape).astype(complex)
    field = SpinorGrid(grid, u, np.zeros(grid.shape, dtype=complex))
    norms = discrete_norms(field, flat_warp, half_twist)
    assert norms.sup == pytest.approx(1.0)
    assert norms.l2_weighted == pytest.approx(math.pi)
    assert norms.lp == pytest.approx((0.25 * 4 * math.pi**2) ** (1 / 12))
    assert norms.holder_seminorm == pytest.approx(0.0, abs=1e-12)
    assert norms.holder_alpha == pytest.approx(1.0)
    assert not norms.sampled


def test_holder_seminorm_of_linear_profile(
    grid: ThinCylinderGrid, zero_twist: TwistedBundle, flat_warp: WarpProfile
) -> None:
    u = np.broadcast_to(grid.x1[:, None, None], grid.shape).astype(complex)
    field = SpinorGrid(grid, u, np.zeros(grid.shape, dtype=complex))
    norms = discrete_norms(field, flat_warp, zero_twist)
    assert norms.holder_seminorm_x1 == pytest.approx(0.25 ** (11 / 12))
    assert norms.holder_seminorm == pytest.approx(0.25 ** (11 / 12))
    assert norms.holder_seminorm_z == 0.0


def test_large_grids_sample_holder_pairs(
    small_grid: ThinCylinderGrid, half_twist: TwistedBundle
) -> None:
    settings = NumericsSettings(holder_exact_max_points=10, holder_sample_pairs=1000)
    warp = WarpProfile.constant(small_grid, 1.0)
    probe = build_probe(small_grid, half_twist, "mixed")
    assert discrete_norms(probe, warp, half_twist, settings=settings).sampled


def test_interior_probe_has_explicit_solution(
    operator: DiscreteOperator, half_twist: TwistedBundle
) -> None:
    grid = operator.grid
    probe = build_probe(grid, half_twist, "interior")
    solution = solve(operator, probe)
    sigma = -(0.5 + 0.5j) / 2
    np.testing.assert_allclose(solution.u, probe.v / sigma, atol=1e-10)
    np.testing.assert_allclose(solution.v, 0.0, atol=1e-10)


def test_unknown_probe_kind(grid: ThinCylinderGrid, half_twist: TwistedBundle) -> None:
    with pytest.raises(ValueError):
        build_probe(grid, half_twist, "edge")  # type: ignore[arg-type]


def test_inverse_norm_covers_boundary_probe(
    operator: DiscreteOperator, half_twist: TwistedBundle
) -> None:
    probe = build_probe(operator.grid, half_twist, "boundary-hard")
    floor = solve(operator, probe).sup_norm() / probe.sup_norm()
    assert measure_inverse_norm(operator) >= floor > 0


def test_grid_for_epsilon() -> None:
    policy = GridPolicy()
    assert grid_for_epsilon(0.25, policy).M == 20
    assert grid_for_epsilon(0.05, policy).M == 8
    with pytest.raises(UnderresolvedGridError):
        grid_for_epsilon(0.5, GridPolicy(max_points=16))


def test_fit_growth_exponent() -> None:
    epsilons = [0.5, 0.25, 0.125, 0.0625]
    values = [3.0 * eps**-0.4 for eps in epsilons]
    assert fit_growth_exponent(epsilons, values) == pytest.approx(0.4)


@pytest.mark.parametrize(
    ("epsilons", "values"),
    [
        ([0.5, 0.25], [1.0, 2.0]),
        ([0.5, 0.25, 0.125], [1.0, 2.0]),
        ([0.5, 0.25, 0.1], [1.0, 0.0, 2.0]),
    ],
)
def test_fit_growth_exponent_rejects_bad_input(epsilons: list[float], values: list[float]) -> None:
    with pytest.raises(ScalingFitError):
        fit_growth_exponent(epsilons, values)


def test_epsilon_and_holder_validation() -> None:
    with pytest.raises(ValueError):
        validate_epsilons([0.5, 0.5, 0.25])
    with pytest.raises(ScalingFitError):
        validate_epsilons([0.5, 0.25])
    check_holder_parameters(12.0, 1.0 / 12.0)
    with pytest.raises(ValueError):
        check_holder_parameters(6.0, 1.0 / 12.0)


async def test_inverse_scaling_experiment_stays_below_target(half_twist: TwistedBundle) -> None:
    policy = GridPolicy(dx1_target=0.05, min_points=4, n2=4, n3=4, max_points=64)
    warp = WarpProfile.from_samples(np.ones((4, 4)))
    report = inverse_scaling_experiment([0.5, 0.25, 0.125], policy, half_twist, warp)
    assert report.grid_points == [10, 5, 4]
    assert report.target_exponent == pytest.approx(5 / 12)
    assert report.fitted_exponent <= report.target_exponent + 0.1
    assert report.passed
    assert not report.sampled
    assert set(report.probe_ratios[0]) == {"boundary-hard", "interior", "mixed"}


def test_lambda_d_decreases_along_twist_path(small_grid: ThinCylinderGrid) -> None:
    warp = WarpProfile.constant(small_grid, 1.0)
    path = [(0.5, 0.5), (0.25, 0.25), (0.1, 0.1)]
    values = [lambda_d(assemble(small_grid, TwistedBundle(*twist), warp)) for twist in path]
    assert values == sorted(values, reverse=True)
    for (alpha, beta), value in zip(path, values):
        assert value == pytest.approx(0.25 * (alpha**2 + beta**2), rel=1e-6)
