from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from g2lab.exceptions import (
    EigenConvergenceError,
    InvalidGridError,
    ScalingFitError,
    UnderresolvedGridError,
)
from g2lab.settings import GridPolicy, NumericsSettings
from g2lab.thin_dirac import (
    BoundaryClass,
    DiscreteOperator,
    SpinorGrid,
    ThinCylinderGrid,
    TwistedBundle,
    WarpProfile,
    assemble,
    class_columns,
    mode_block,
    quadrature_weights,
    solve,
    surface_matrix,
    weighted_inner,
)

logger = logging.getLogger(__name__)

ProbeKind = Literal["boundary-hard", "interior", "mixed"]
PROBES: tuple[ProbeKind, ...] = ("boundary-hard", "interior", "mixed")


def surface_spectrum(twist: TwistedBundle, nmodes: int) -> list[float]:
    """Closed-form eigenvalues 1/4 ((m + alpha)^2 + (n + beta)^2) for |m|, |n| <= nmodes."""
    if nmodes < 1:
        raise ValueError(f"nmodes must be at least 1, got {nmodes}")
    modes = np.arange(-nmodes, nmodes + 1)
    m, n = np.meshgrid(modes + twist.alpha, modes + twist.beta, indexing="ij")
    return sorted(float(x) for x in (0.25 * (m**2 + n**2)).ravel())


def grid_surface_spectrum(grid: ThinCylinderGrid, twist: TwistedBundle) -> list[float]:
    """Closed form restricted to the modes the torus grid carries."""
    return sorted(float(x) for x in (np.abs(twist.sigma_minus(grid)) ** 2).ravel())


def assembled_surface_spectrum(
    grid: ThinCylinderGrid, twist: TwistedBundle, which: Literal["minus", "plus"] = "minus"
) -> list[float]:
    """Eigenvalues of the assembled d+ d- (``minus``) or d- d+ (``plus``) on the torus."""
    minus = surface_matrix(grid, twist, "minus")
    plus = surface_matrix(grid, twist, "plus")
    laplacian = plus @ minus if which == "minus" else minus @ plus
    values = scipy.linalg.eigvalsh(0.5 * (laplacian + laplacian.conj().T))
    return sorted(float(x) for x in values)


def _normal_operator(
    operator: DiscreteOperator, boundary_class: BoundaryClass = "minus"
) -> tuple[sp.csc_matrix, npt.NDArray[np.float64], npt.NDArray[np.int64]]:
    columns = class_columns(operator.grid, boundary_class)
    weights = operator.weights
    restricted = operator.collocation[:, columns]
    normal = (restricted.conj().T @ sp.diags(weights) @ restricted).tocsc()
    return normal, weights[columns], columns


def lambda_d(operator: DiscreteOperator, settings: NumericsSettings | None = None) -> float:
    """Smallest weighted Rayleigh quotient of the operator over minus-class fields."""
    value, _ = lowest_mode(operator, settings)
    return value


def lowest_mode(
    operator: DiscreteOperator, settings: NumericsSettings | None = None
) -> tuple[float, SpinorGrid]:
    """lambda_D with its weighted-unit minimizer.

    Shifted inverse iteration on the weighted normal equations, started from
    the all-ones field projected to the class.
    """
    settings = settings or NumericsSettings()
    normal, mass, columns = _normal_operator(operator)
    shift = settings.eigen_shift
    solver = spla.splu((normal - shift * sp.diags(mass)).tocsc())

    x = np.ones(mass.size, dtype=complex)
    x /= math.sqrt(float(np.sum(mass * np.abs(x) ** 2)))
    mu = float(np.real(np.vdot(x, normal @ x)))
    trace = [mu]
    for iteration in range(settings.eigen_max_iter):
        x = solver.solve(mass * x)
        x /= math.sqrt(float(np.sum(mass * np.abs(x) ** 2)))
        updated = float(np.real(np.vdot(x, normal @ x)))
        trace.append(updated)
        if abs(updated - mu) <= settings.eigen_tol * max(abs(updated), abs(shift)):
            logger.debug(
                "inverse iteration converged after %d steps: %.12g", iteration + 1, updated
            )
            full = np.zeros(operator.grid.unknowns, dtype=complex)
            full[columns] = x
            return max(updated, 0.0), SpinorGrid.from_vector(operator.grid, full, "minus")
        mu = updated
    raise EigenConvergenceError(
        f"inverse iteration did not converge in {settings.eigen_max_iter} steps", trace
    )


def lambda_d_per_mode(grid: ThinCylinderGrid, twist: TwistedBundle, h: float) -> float:
    """Constant-h lambda_D from the direct sum of per-mode ODE eigenproblems."""
    n = grid.M + 1
    keep = np.ones(2 * n, dtype=bool)
    keep[[1, 2 * n - 1]] = False
    weights = np.repeat(grid.x1_weights, 2)
    best = math.inf
    for sigma in twist.sigma_minus(grid).ravel():
        block = mode_block(grid, complex(sigma), h**-0.5)[:, keep]
        normal = block.conj().T @ (weights[:, None] * block)
        lowest = scipy.linalg.eigh(
            normal, np.diag(weights[keep]), eigvals_only=True, subset_by_index=[0, 0]
        )
        best = min(best, float(lowest[0]))
    return max(best, 0.0)


def kernel_dimension(
    operator: DiscreteOperator,
    threshold: float | None = None,
    boundary_class: BoundaryClass = "minus",
    settings: NumericsSettings | None = None,
) -> int:
    """Real dimension of the numerical kernel on the given boundary class."""
    settings = settings or NumericsSettings()
    cutoff = settings.kernel_threshold if threshold is None else threshold
    columns = class_columns(operator.grid, boundary_class)
    weights = operator.weights
    scaled = (
        np.sqrt(weights)[:, None]
        * operator.collocation[:, columns].toarray()
        / np.sqrt(weights[columns])[None, :]
    )
    singular = scipy.linalg.svdvals(scaled)
    return 2 * int(np.sum(singular < cutoff * singular.max()))


def theorem_bound(epsilon: float, warp: WarpProfile, lambda_surface: float) -> float:
    K = warp.K
    return (1.0 / K) * min(lambda_surface, 2.0 / (K * epsilon**2) - K * warp.c1_hinv_sqrt**2)


@dataclass(frozen=True)
class SpectrumReport:
    epsilon: float
    twist: tuple[float, float]
    K: float
    lambda_surface_minus: float
    lambda_surface_plus: float
    lambda_D: float
    refined_lambda_D: float
    bound: float
    margin: float
    passed: bool
    kernel_dimension: int | None = None


def verify_lambda_bound(
    grid: ThinCylinderGrid,
    twist: TwistedBundle,
    warp: WarpProfile,
    settings: NumericsSettings | None = None,
    with_kernel: bool = False,
) -> SpectrumReport:
    settings = settings or NumericsSettings()
    lam_minus = assembled_surface_spectrum(grid, twist, "minus")[0]
    lam_plus = assembled_surface_spectrum(grid, twist, "plus")[0]
    operator = assemble(grid, twist, warp)
    value = lambda_d(operator, settings)
    refined = lambda_d(assemble(grid.refined(), twist, warp), settings)
    bound = theorem_bound(grid.epsilon, warp, min(lam_minus, lam_plus))
    margin = value - bound
    passed = margin >= -settings.lambda_tol and refined - bound >= -settings.lambda_tol
    logger.info(
        "lambda_D=%.6g (refined %.6g) bound=%.6g margin=%.3g", value, refined, bound, margin
    )
    return SpectrumReport(
        epsilon=grid.epsilon,
        twist=(twist.alpha, twist.beta),
        K=warp.K,
        lambda_surface_minus=max(lam_minus, 0.0),
        lambda_surface_plus=max(lam_plus, 0.0),
        lambda_D=value,
        refined_lambda_D=refined,
        bound=bound,
        margin=margin,
        passed=passed,
        kernel_dimension=kernel_dimension(operator, settings=settings) if with_kernel else None,
    )


def mean_free_check(values: SpinorGrid) -> float:
    """sup over z of the trapezoidal x1-integral of u."""
    integral = np.tensordot(values.grid.x1_weights, values.u, axes=(0, 0))
    return float(np.abs(integral).max())


@dataclass(frozen=True)
class DiscreteNorms:
    sup: float
    l2_weighted: float
    lp: float
    p: float
    alpha: float
    holder_seminorm: float
    holder_seminorm_z: float
    holder_seminorm_x1: float
    sampled: bool

    @property
    def holder_alpha(self) -> float:
        return self.sup + self.holder_seminorm


def _torus_distance(delta: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    delta = np.abs(delta) % (2 * np.pi)
    return np.minimum(delta, 2 * np.pi - delta)


def _holder_pairs(
    values: npt.NDArray[np.complex128],
    coords: npt.NDArray[np.float64],
    h: npt.NDArray[np.float64],
    alpha: float,
    left: npt.NDArray[np.int64],
    right: npt.NDArray[np.int64],
) -> tuple[float, float, float]:
    dx1 = coords[left, 0] - coords[right, 0]
    d2 = _torus_distance(coords[left, 1] - coords[right, 1])
    d3 = _torus_distance(coords[left, 2] - coords[right, 2])
    same_z = (d2 == 0) & (d3 == 0)
    same_x1 = dx1 == 0
    distance = np.sqrt(0.5 * (h[left] + h[right]) * dx1**2 + d2**2 + d3**2)
    valid = distance > 0
    diff = np.linalg.norm(values[left] - values[right], axis=-1)
    quotient = np.zeros_like(distance)
    quotient[valid] = diff[valid] / distance[valid] ** alpha
    total = float(quotient.max(initial=0.0))
    along_x1 = float(quotient[same_z & valid].max(initial=0.0))
    along_z = float(quotient[same_x1 & valid].max(initial=0.0))
    return total, along_z, along_x1


def discrete_norms(
    values: SpinorGrid,
    warp: WarpProfile,
    twist: TwistedBundle,
    p: float = 12.0,
    alpha: float = 1.0 / 12.0,
    settings: NumericsSettings | None = None,
) -> DiscreteNorms:
    """Sup, weighted L2, L^p and Holder norms of a field.

    Holder differences are taken on the periodic representative V * conj(phase)
    so the Bloch phase does not register as a jump across the torus seam.
    """
    settings = settings or NumericsSettings()
    grid = values.grid
    magnitude = values.magnitude()
    weights = quadrature_weights(grid, warp)[0::2].reshape(grid.shape)
    sup = float(magnitude.max())
    l2 = math.sqrt(max(weighted_inner(values, values, warp).real, 0.0))
    lp = float(np.sum(weights * magnitude**p) ** (1.0 / p))

    gauge = np.conj(twist.phase(grid))[None, :, :]
    stacked = np.stack([values.u * gauge, values.v * gauge], axis=-1).reshape(-1, 2)
    x1, x2, x3 = np.meshgrid(grid.x1, grid.x2, grid.x3, indexing="ij")
    coords = np.stack([x1.ravel(), x2.ravel(), x3.ravel()], axis=-1)
    h = np.broadcast_to(warp.h[None, :, :], grid.shape).ravel()

    count = stacked.shape[0]
    sampled = count > settings.holder_exact_max_points
    total = along_z = along_x1 = 0.0
    if sampled:
        logger.warning(
            "Holder seminorm over %d points uses %d sampled pairs",
            count,
            settings.holder_sample_pairs,
        )
        rng = np.random.default_rng(settings.holder_seed)
        left = rng.integers(0, count, settings.holder_sample_pairs)
        right = rng.integers(0, count, settings.holder_sample_pairs)
        total, along_z, along_x1 = _holder_pairs(stacked, coords, h, alpha, left, right)
    else:
        chunk = max(1, 2_000_000 // count)
        everything = np.arange(count)
        for start in range(0, count, chunk):
            rows = everything[start : start + chunk]
            left = np.repeat(rows, count)
            right = np.tile(everything, rows.size)
            t, z, x = _holder_pairs(stacked, coords, h, alpha, left, right)
            total, along_z, along_x1 = max(total, t), max(along_z, z), max(along_x1, x)
    return DiscreteNorms(
        sup=sup,
        l2_weighted=l2,
        lp=lp,
        p=p,
        alpha=alpha,
        holder_seminorm=total,
        holder_seminorm_z=along_z,
        holder_seminorm_x1=along_x1,
        sampled=sampled,
    )


def build_probe(grid: ThinCylinderGrid, twist: TwistedBundle, kind: ProbeKind) -> SpinorGrid:
    """Right-hand sides on the lowest twisted mode.

    ``boundary-hard`` puts w1 nonvanishing on the walls with w2 = 0;
    ``interior`` has only w2, whose exact solution is v = 0, u = w2 / sigma.
    """
    profile = np.ones(grid.M + 1)[:, None, None] * twist.mode(grid, 0, 0)
    zero = np.zeros(grid.shape, dtype=complex)
    if kind == "boundary-hard":
        return SpinorGrid(grid, profile, zero)
    if kind == "interior":
        return SpinorGrid(grid, zero, profile)
    if kind == "mixed":
        return SpinorGrid(grid, profile, 0.5 * profile)
    raise ValueError(f"unknown probe {kind!r}")


def measure_inverse_norm(
    operator: DiscreteOperator,
    probes: Iterable[SpinorGrid] = (),
    settings: NumericsSettings | None = None,
) -> float:
    """Largest ratio sup|solve(W)| / sup|W| over seeded random and supplied probes."""
    settings = settings or NumericsSettings()
    grid = operator.grid
    rng = np.random.default_rng(settings.inverse_probe_seed)
    candidates = [build_probe(grid, operator.twist, "boundary-hard")]
    for _ in range(settings.inverse_probe_count):
        u = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        v = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        candidates.append(SpinorGrid(grid, u, v))
    candidates.extend(probes)
    best = 0.0
    for rhs in candidates:
        size = rhs.sup_norm()
        if size == 0.0:
            continue
        best = max(best, solve(operator, rhs).sup_norm() / size)
    return best


def grid_for_epsilon(epsilon: float, policy: GridPolicy) -> ThinCylinderGrid:
    M = max(policy.min_points, math.ceil(epsilon / policy.dx1_target - 1e-9))
    if M > policy.max_points:
        raise UnderresolvedGridError(
            f"epsilon={epsilon} needs {M} x1 points at spacing {policy.dx1_target}, "
            f"above the limit {policy.max_points}"
        )
    return ThinCylinderGrid(epsilon, M, policy.n2, policy.n3)


@dataclass(frozen=True)
class ScalingCell:
    epsilon: float
    M: int
    sigma_min: float
    sigma_bound: float
    inverse_sup_norm: float
    inverse_holder_norm: float
    probe_ratios: dict[str, float]
    sampled: bool


def check_holder_parameters(p: float, alpha: float) -> None:
    if p <= 0 or not 0 < alpha < 1 or 3.0 / p + 3.0 * alpha > 0.5 + 1e-12:
        raise ValueError(f"need 0 < 3/p + 3*alpha <= 1/2, got p={p}, alpha={alpha}")


def scaling_cell(
    epsilon: float,
    policy: GridPolicy,
    twist: TwistedBundle,
    warp: WarpProfile,
    probes: Sequence[ProbeKind] = PROBES,
    p: float = 12.0,
    alpha: float = 1.0 / 12.0,
    settings: NumericsSettings | None = None,
) -> ScalingCell:
    settings = settings or NumericsSettings()
    grid = grid_for_epsilon(epsilon, policy)
    if not warp.matches(grid):
        raise InvalidGridError("warp samples do not match the policy torus grid")
    operator = assemble(grid, twist, warp)
    sigma_min = math.sqrt(lambda_d(operator, settings))
    lam_surface = float(np.min(np.abs(twist.sigma_minus(grid)) ** 2))
    sigma_bound = math.sqrt(max(theorem_bound(epsilon, warp, lam_surface), 0.0))

    ratios: dict[str, float] = {}
    sup_ratio = holder_ratio = 0.0
    sampled = False
    for kind in probes:
        rhs = build_probe(grid, twist, kind)
        solution = solve(operator, rhs)
        rhs_norms = discrete_norms(rhs, warp, twist, p, alpha, settings)
        solution_norms = discrete_norms(solution, warp, twist, p, alpha, settings)
        sampled = sampled or rhs_norms.sampled or solution_norms.sampled
        ratio = solution_norms.sup / rhs_norms.holder_alpha
        ratios[kind] = ratio
        sup_ratio = max(sup_ratio, ratio)
        holder_ratio = max(holder_ratio, solution_norms.holder_alpha / rhs_norms.holder_alpha)
    logger.info(
        "scaling cell eps=%g M=%d sigma_min=%.6g ratio=%.6g", epsilon, grid.M, sigma_min, sup_ratio
    )
    return ScalingCell(
        epsilon=epsilon,
        M=grid.M,
        sigma_min=sigma_min,
        sigma_bound=sigma_bound,
        inverse_sup_norm=sup_ratio,
        inverse_holder_norm=holder_ratio,
        probe_ratios=ratios,
        sampled=sampled,
    )


def fit_growth_exponent(epsilons: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(1/epsilon)."""
    if len(epsilons) != len(values):
        raise ScalingFitError("epsilon and value lists differ in length")
    if len(epsilons) < 3:
        raise ScalingFitError(
            f"fitting a growth exponent needs at least 3 epsilons, got {len(epsilons)}"
        )
    if min(values) <= 0:
        raise ScalingFitError("growth fit needs positive values")
    slope, _ = np.polyfit(-np.log(np.asarray(epsilons)), np.log(np.asarray(values)), 1)
    return float(slope)


@dataclass(frozen=True)
class ScalingReport:
    epsilons: list[float]
    grid_points: list[int]
    inverse_sup_norms: list[float]
    inverse_holder_norms: list[float]
    sigma_mins: list[float]
    sigma_bounds: list[float]
    fitted_exponent: float
    holder_fitted_exponent: float
    target_exponent: float
    passed: bool
    sampled: bool
    probe_ratios: list[dict[str, float]] = field(default_factory=list)


def assemble_scaling_report(
    cells: Sequence[ScalingCell], p: float = 12.0, alpha: float = 1.0 / 12.0
) -> ScalingReport:
    epsilons = [cell.epsilon for cell in cells]
    sup_norms = [cell.inverse_sup_norm for cell in cells]
    holder_norms = [cell.inverse_holder_norm for cell in cells]
    fitted = fit_growth_exponent(epsilons, sup_norms)
    holder_fitted = fit_growth_exponent(epsilons, holder_norms)
    target = 3.0 / p + 2.0 * alpha
    sigma_ok = all(cell.sigma_min >= cell.sigma_bound - 1e-3 for cell in cells)
    return ScalingReport(
        epsilons=epsilons,
        grid_points=[cell.M for cell in cells],
        inverse_sup_norms=sup_norms,
        inverse_holder_norms=holder_norms,
        sigma_mins=[cell.sigma_min for cell in cells],
        sigma_bounds=[cell.sigma_bound for cell in cells],
        fitted_exponent=fitted,
        holder_fitted_exponent=holder_fitted,
        target_exponent=target,
        passed=fitted <= target + 0.1 and sigma_ok,
        sampled=any(cell.sampled for cell in cells),
        probe_ratios=[cell.probe_ratios for cell in cells],
    )


def validate_epsilons(epsilons: Sequence[float]) -> None:
    if len(epsilons) < 3:
        raise ScalingFitError(
            f"fitting a growth exponent needs at least 3 epsilons, got {len(epsilons)}"
        )
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilon list must be strictly decreasing")


def inverse_scaling_experiment(
    epsilons: Sequence[float],
    policy: GridPolicy,
    twist: TwistedBundle,
    warp: WarpProfile,
    probes: Sequence[ProbeKind] = PROBES,
    p: float = 12.0,
    alpha: float = 1.0 / 12.0,
    settings: NumericsSettings | None = None,
) -> ScalingReport:
    check_holder_parameters(p, alpha)
    validate_epsilons(epsilons)
    cells = [
        scaling_cell(eps, policy, twist, warp, probes, p, alpha, settings) for eps in epsilons
    ]
    return assemble_scaling_report(cells, p, alpha)
