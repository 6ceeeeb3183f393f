import math

import numpy as np
import pytest

from g2lab.exceptions import (
    BoundaryClassError,
    GridMismatchError,
    InvalidGridError,
    ReflectionRangeError,
    SingularOperatorError,
)
from g2lab.thin_dirac import (
    DiscreteOperator,
    SpinorGrid,
    ThinCylinderGrid,
    TwistedBundle,
    WarpProfile,
    adjointness_residual,
    apply,
    assemble,
    case_two_mode_solution,
    extended_grid,
    extension_residual,
    green_boundary_term,
    green_identity_residual,
    kernel_field,
    manufactured_problem,
    mode_block,
    reflect_extend,
    solve,
    solve_vector,
    warp_commutator_term,
    weighted_inner,
)


def random_field(
    grid: ThinCylinderGrid, rng: np.random.Generator, boundary_class: str | None = None
) -> SpinorGrid:
    u = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    v = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    if boundary_class == "minus":
        v[[0, -1]] = 0.0
    if boundary_class == "plus":
        u[[0, -1]] = 0.0
    return SpinorGrid(grid, u, v, boundary_class)  # type: ignore[arg-type]


@pytest.mark.parametrize(
    ("epsilon", "M", "N2", "N3"),
    [(0.25, 3, 8, 8), (0.25, 16, 5, 8), (0.25, 16, 8, 2), (0.0, 16, 8, 8), (1.6, 16, 8, 8)],
)
def test_grid_invariants(epsilon: float, M: int, N2: int, N3: int) -> None:
    with pytest.raises(InvalidGridError):
        ThinCylinderGrid(epsilon, M, N2, N3)


def test_grid_geometry(grid: ThinCylinderGrid) -> None:
    assert grid.dx1 == pytest.approx(0.25 / 16)
    assert grid.shape == (17, 8, 8)
    assert grid.unknowns == 2 * 17 * 64
    assert grid.x1_weights.sum() == pytest.approx(0.25)
    assert grid.refined().M == 32


def test_twist_must_be_fractional() -> None:
    with pytest.raises(InvalidGridError):
        TwistedBundle(1.0, 0.0)
    assert TwistedBundle(0.0, 0.0).is_trivial


def test_warp_bounds(grid: ThinCylinderGrid) -> None:
    assert WarpProfile.constant(grid, 0.5).K == pytest.approx(2.0)
    with pytest.raises(InvalidGridError):
        WarpProfile.from_samples(np.full((8, 8), -1.0))
    with pytest.raises(InvalidGridError):
        WarpProfile.from_samples(np.full((8, 8), 3.0), K=2.0)
    warp = WarpProfile.cosine(grid, 1.0, 0.2, 2.0)
    assert not warp.is_constant
    assert warp.h.max() == pytest.approx(1.2)


def test_boundary_class_is_enforced(grid: ThinCylinderGrid, rng: np.random.Generator) -> None:
    field = random_field(grid, rng)
    with pytest.raises(BoundaryClassError):
        field.with_class("minus")
    with pytest.raises(GridMismatchError):
        SpinorGrid(grid, field.u[:-1], field.v[:-1])


def test_assembled_operator_has_dirichlet_rows(operator: DiscreteOperator) -> None:
    matrix = operator.matrix.tocsr()
    for row in operator.dirichlet_rows:
        start, stop = matrix.indptr[row], matrix.indptr[row + 1]
        assert list(matrix.indices[start:stop]) == [row]
        assert matrix.data[start] == 1.0
    assert operator.matrix.shape == (operator.grid.unknowns,) * 2


def test_per_mode_blocks_reproduce_operator(
    grid: ThinCylinderGrid, half_twist: TwistedBundle, operator: DiscreteOperator
) -> None:
    surface = half_twist.mode(grid, 1, -1)
    u = np.cos(grid.x1)[:, None, None] * surface
    v = np.sin(np.pi * grid.x1 / grid.epsilon)[:, None, None] * surface
    image = apply(operator, SpinorGrid(grid, u, v))

    sigma = half_twist.sigma_minus(grid)[1, -1]
    block = mode_block(grid, complex(sigma), 1.0)
    profile = np.empty(2 * (grid.M + 1), dtype=complex)
    profile[0::2] = np.cos(grid.x1)
    profile[1::2] = np.sin(np.pi * grid.x1 / grid.epsilon)
    expected = block @ profile
    np.testing.assert_allclose(image.u, expected[0::2][:, None, None] * surface, atol=1e-10)
    np.testing.assert_allclose(image.v, expected[1::2][:, None, None] * surface, atol=1e-10)


@pytest.mark.parametrize("operator_name", ["operator", "warped_operator"])
def test_solve_inverts_interior_rows(
    operator_name: str,
    grid: ThinCylinderGrid,
    rng: np.random.Generator,
    request: pytest.FixtureRequest,
) -> None:
    operator: DiscreteOperator = request.getfixturevalue(operator_name)
    rhs = random_field(grid, rng)
    solution = solve(operator, rhs)
    assert solution.boundary_class == "minus"
    target = rhs.to_vector()
    target[operator.dirichlet_rows] = 0.0
    np.testing.assert_allclose(operator.matrix @ solution.to_vector(), target, atol=1e-9)


def test_solve_rejects_zero_twist(grid: ThinCylinderGrid, flat_warp: WarpProfile) -> None:
    operator = assemble(grid, TwistedBundle(0.0, 0.0), flat_warp)
    with pytest.raises(SingularOperatorError) as info:
        solve_vector(operator, np.zeros(grid.unknowns))
    assert info.value.kernel_dimension == 2
    image = apply(operator, kernel_field(grid))
    assert image.sup_norm() == pytest.approx(0.0, abs=1e-12)


def test_solve_rejects_foreign_grid(
    operator: DiscreteOperator, small_grid: ThinCylinderGrid
) -> None:
    with pytest.raises(GridMismatchError):
        solve(operator, SpinorGrid.zeros(small_grid))


@pytest.mark.parametrize("operator_name", ["operator", "warped_operator"])
def test_solve_recovers_discrete_fields(
    operator_name: str,
    grid: ThinCylinderGrid,
    rng: np.random.Generator,
    request: pytest.FixtureRequest,
) -> None:
    operator: DiscreteOperator = request.getfixturevalue(operator_name)
    field = random_field(grid, rng, "minus")
    recovered = solve(operator, apply(operator, field))
    error = (recovered - field).sup_norm() / field.sup_norm()
    assert error <= 1e-8


def observed_orders(errors: list[float]) -> list[float]:
    return [math.log2(coarse / fine) for coarse, fine in zip(errors, errors[1:])]


async def test_case_two_solution_converges_at_second_order(half_twist: TwistedBundle) -> None:
    errors = []
    for M in (16, 32, 64):
        grid = ThinCylinderGrid(0.25, M, 8, 8)
        exact, rhs = case_two_mode_solution(grid, half_twist, 1.0)
        numerical = solve(assemble(grid, half_twist, WarpProfile.constant(grid, 1.0)), rhs)
        errors.append(float(np.max((numerical - exact).magnitude())))
    for order in observed_orders(errors):
        assert 1.8 <= order <= 2.2


def test_warped_solve_converges_at_second_order(half_twist: TwistedBundle) -> None:
    errors = []
    for M in (16, 32, 64):
        grid = ThinCylinderGrid(0.25, M, 8, 8)
        warp = WarpProfile.cosine(grid, 1.0, 0.2, 2.0)
        exact, rhs = manufactured_problem(grid, half_twist, warp)
        numerical = solve(assemble(grid, half_twist, warp), rhs)
        errors.append(float(np.max((numerical - exact).magnitude())))
    for order in observed_orders(errors):
        assert 1.8 <= order <= 2.2


def test_case_two_solution_is_odd_about_midplane(
    grid: ThinCylinderGrid, half_twist: TwistedBundle
) -> None:
    solution, _ = case_two_mode_solution(grid, half_twist, 2.0)
    np.testing.assert_allclose(solution.u, -solution.u[::-1], atol=1e-12)
    np.testing.assert_allclose(solution.v, solution.v[::-1], atol=1e-12)


def test_case_two_solution_rejects_zero_mode(grid: ThinCylinderGrid) -> None:
    with pytest.raises(SingularOperatorError):
        case_two_mode_solution(grid, TwistedBundle(0.0, 0.0), 1.0)


def test_manufactured_problem_converges_in_x1(half_twist: TwistedBundle) -> None:
    errors = []
    for M in (16, 32):
        grid = ThinCylinderGrid(0.25, M, 8, 8)
        warp = WarpProfile.cosine(grid, 1.0, 0.2, 2.0)
        exact, rhs = manufactured_problem(grid, half_twist, warp)
        residual = apply(assemble(grid, half_twist, warp), exact) - rhs
        interior = residual.magnitude()[1:-1]
        errors.append(float(interior.max()))
    assert errors[1] < errors[0] / 3


def test_green_identity_holds_for_constant_warp(
    operator: DiscreteOperator, grid: ThinCylinderGrid, rng: np.random.Generator
) -> None:
    left, right = random_field(grid, rng), random_field(grid, rng)
    assert green_identity_residual(operator, left, right) <= 1e-9


def smooth_class_field(
    grid: ThinCylinderGrid, twist: TwistedBundle, boundary_class: str
) -> SpinorGrid:
    x2, _ = grid.surface_mesh()
    shift = 1 if boundary_class == "minus" else -1
    surface = (1 + 0.5 * np.cos(x2)) * twist.mode(grid, shift, 0)
    even = np.cos(np.pi * grid.x1 / grid.epsilon)[:, None, None] * surface
    odd = np.sin(np.pi * grid.x1 / grid.epsilon)[:, None, None] * surface
    odd[[0, -1]] = 0.0
    if boundary_class == "minus":
        return SpinorGrid(grid, even, odd, "minus")
    return SpinorGrid(grid, odd, 1j * even, "plus")


def test_warp_commutator_vanishes_for_constant_warp(
    operator: DiscreteOperator, grid: ThinCylinderGrid, rng: np.random.Generator
) -> None:
    left, right = random_field(grid, rng), random_field(grid, rng)
    assert warp_commutator_term(operator, left, right) == 0.0


def test_green_identity_with_varying_warp_under_refinement(half_twist: TwistedBundle) -> None:
    commutators = []
    for M in (16, 32, 64):
        grid = ThinCylinderGrid(0.25, M, 8, 8)
        operator = assemble(grid, half_twist, WarpProfile.cosine(grid, 1.0, 0.2, 2.0))
        left = smooth_class_field(grid, half_twist, "minus")
        right = smooth_class_field(grid, half_twist, "plus")
        assert adjointness_residual(operator, left, right) <= 1e-10
        commutators.append(warp_commutator_term(operator, left, right))
    assert abs(commutators[0]) > 1e-3
    np.testing.assert_allclose(commutators[1:], commutators[0], rtol=1e-3)


def test_boundary_term_vanishes_between_classes(
    operator: DiscreteOperator, grid: ThinCylinderGrid, rng: np.random.Generator
) -> None:
    left = random_field(grid, rng, "minus")
    right = random_field(grid, rng, "plus")
    assert abs(green_boundary_term(left, right)) == 0.0
    assert adjointness_residual(operator, left, right) <= 1e-9
    with pytest.raises(BoundaryClassError):
        adjointness_residual(operator, right, left)


def test_weighted_inner_is_hermitian(
    grid: ThinCylinderGrid, cosine_warp: WarpProfile, rng: np.random.Generator
) -> None:
    a, b = random_field(grid, rng), random_field(grid, rng)
    assert weighted_inner(a, b, cosine_warp) == pytest.approx(
        np.conj(weighted_inner(b, a, cosine_warp))
    )
    assert weighted_inner(a, a, cosine_warp).real > 0


def test_reflection_range(grid: ThinCylinderGrid) -> None:
    assert extended_grid(grid, 6).epsilon == pytest.approx(1.5)
    with pytest.raises(ReflectionRangeError):
        extended_grid(grid, 7)


def test_reflected_solution_solves_extended_system(
    operator: DiscreteOperator, grid: ThinCylinderGrid, rng: np.random.Generator
) -> None:
    rhs = random_field(grid, rng)
    solution = solve(operator, rhs)
    residual = extension_residual(operator, solution, rhs, 3)
    assert residual.interior <= 1e-9
    assert residual.wall > residual.interior


def test_reflect_extend_parity(grid: ThinCylinderGrid, rng: np.random.Generator) -> None:
    field = random_field(grid, rng, "minus")
    extended = reflect_extend(field, 2)
    M = grid.M
    np.testing.assert_allclose(extended.u[M + 3], field.u[M - 3])
    np.testing.assert_allclose(extended.v[M + 3], -field.v[M - 3])
    with pytest.raises(BoundaryClassError):
        reflect_extend(random_field(grid, rng), 2)
