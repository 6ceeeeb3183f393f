"""Simplified Newton iteration with explicit existence constants.

If ||DF(0)^-1 F(0)|| <= A, ||DF(0)^-1|| <= B, ||DF(x) - DF(0)|| <= kappa |x| on
B_r, 2 kappa A B < 1 and 2A < r, then F has a unique zero in B_2A and the
frozen-derivative iteration x <- x - DF(0)^-1 F(x) converges to it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from g2lab.exceptions import GridMismatchError, InadmissibleConfigError, NewtonDivergenceError
from g2lab.settings import NumericsSettings
from g2lab.spectral_analysis import measure_inverse_norm
from g2lab.thin_dirac import DiscreteOperator, SpinorGrid, solve_vector

logger = logging.getLogger(__name__)

Vector = npt.NDArray[np.generic]
Evaluator = Callable[[Vector], Vector]
LinearSolver = Callable[[Vector], Vector]


def sup_norm(x: npt.ArrayLike) -> float:
    values = np.abs(np.asarray(x))
    return float(values.max()) if values.size else 0.0


@dataclass(kw_only=True)
class NewtonConfig:
    A: float
    B: float
    kappa: float
    r: float
    tol: float = 1e-12
    max_iter: int = 50
    full_newton: bool = False

    def __post_init__(self) -> None:
        if self.A < 0 or self.kappa < 0:
            raise ValueError("A and kappa must be nonnegative")
        if self.B <= 0 or self.r <= 0 or self.tol <= 0 or self.max_iter <= 0:
            raise ValueError("B, r, tol and max_iter must be positive")

    @property
    def admissibility_product(self) -> float:
        return 2 * self.kappa * self.A * self.B

    @property
    def admissible(self) -> bool:
        return self.admissibility_product < 1 and 2 * self.A < self.r

    @property
    def predicted_contraction(self) -> float:
        return 2 * self.kappa * self.B * (2 * self.A)

    def check(self) -> None:
        if self.admissibility_product >= 1:
            raise InadmissibleConfigError(
                f"2*kappa*A*B = {self.admissibility_product:.6g} is not below 1",
                violated="2*kappa*A*B",
                value=self.admissibility_product,
            )
        if 2 * self.A >= self.r:
            raise InadmissibleConfigError(
                f"2A = {2 * self.A:.6g} is not below r = {self.r:.6g}",
                violated="2A<r",
                value=2 * self.A,
            )


@dataclass
class NewtonResult:
    root: Vector
    iterations: int
    residual_trace: list[float]
    step_trace: list[float]
    contraction_factor: float
    predicted_contraction: float
    within_ball: bool
    converged: bool = True


def _contraction(residuals: list[float]) -> float:
    ratios = [
        residuals[k + 1] / residuals[k]
        for k in range(1, len(residuals) - 1)
        if residuals[k] > 0
    ]
    return max(ratios, default=0.0)


def quantitative_newton(
    evaluate: Evaluator,
    inverse_derivative: LinearSolver,
    cfg: NewtonConfig,
    start: npt.ArrayLike = 0.0,
    norm: Callable[[Vector], float] = sup_norm,
    jacobian_solver: Callable[[Vector], LinearSolver] | None = None,
) -> NewtonResult:
    cfg.check()
    if cfg.full_newton and jacobian_solver is None:
        raise ValueError("full Newton needs a jacobian_solver")
    x = np.array(start, copy=True)
    if norm(x) >= cfg.r:
        raise NewtonDivergenceError(f"start point lies outside B_r (r = {cfg.r:.6g})", [])

    residuals: list[float] = []
    steps: list[float] = []
    for iteration in range(cfg.max_iter + 1):
        fx = evaluate(x)
        residuals.append(norm(fx))
        logger.debug("newton iteration %d: residual %.3e", iteration, residuals[-1])
        if residuals[-1] <= cfg.tol:
            break
        if iteration == cfg.max_iter:
            raise NewtonDivergenceError(
                f"residual {residuals[-1]:.3e} above tol after {cfg.max_iter} iterations",
                residuals,
            )
        if cfg.full_newton and jacobian_solver is not None:
            step = jacobian_solver(x)(fx)
        else:
            step = inverse_derivative(fx)
        x = x - step
        steps.append(norm(step))
        if norm(x) > cfg.r:
            raise NewtonDivergenceError(
                f"iterate left B_r at step {iteration + 1} (|x| = {norm(x):.3e})", residuals
            )
    root_norm = norm(x)
    return NewtonResult(
        root=x,
        iterations=len(steps),
        residual_trace=residuals,
        step_trace=steps,
        contraction_factor=_contraction(residuals),
        predicted_contraction=cfg.predicted_contraction,
        within_ball=root_norm <= 2 * cfg.A + cfg.tol,
    )


def uniqueness_gap(
    evaluate: Evaluator,
    inverse_derivative: LinearSolver,
    cfg: NewtonConfig,
    start: npt.ArrayLike,
    norm: Callable[[Vector], float] = sup_norm,
) -> float:
    """Distance between the roots found from zero and from ``start``."""
    zero = np.zeros_like(np.asarray(start))
    reference = quantitative_newton(evaluate, inverse_derivative, cfg, zero, norm)
    perturbed = quantitative_newton(evaluate, inverse_derivative, cfg, start, norm)
    return norm(reference.root - perturbed.root)


def quadratic_term(x: Vector) -> Vector:
    """Pointwise Q(u, v) = (u v, u u) on interleaved unknowns."""
    u, v = x[0::2], x[1::2]
    out = np.empty_like(x)
    out[0::2] = u * v
    out[1::2] = u * u
    return out


def quadratic_derivative(base: Vector, direction: Vector) -> Vector:
    """DQ(base)[direction] = (u0 v + u v0, 2 u0 u)."""
    u0, v0 = base[0::2], base[1::2]
    u, v = direction[0::2], direction[1::2]
    out = np.empty(base.shape, dtype=np.result_type(base, direction))
    out[0::2] = u0 * v + u * v0
    out[1::2] = 2 * u0 * u
    return out


@dataclass
class ToyInstanton:
    solution: SpinorGrid
    newton: NewtonResult
    config: NewtonConfig
    gamma: float
    w0_sup: float


def _interior_mask(operator: DiscreteOperator) -> npt.NDArray[np.float64]:
    mask = np.ones(operator.grid.unknowns)
    mask[operator.dirichlet_rows] = 0.0
    return mask


def toy_instanton(
    operator: DiscreteOperator,
    gamma: float,
    rhs: SpinorGrid,
    settings: NumericsSettings | None = None,
    full_newton: bool = False,
) -> ToyInstanton:
    """Solve DV + gamma Q(V) = W0 with v = 0 on the walls."""
    settings = settings or NumericsSettings()
    if rhs.grid != operator.grid:
        raise GridMismatchError("right-hand side grid does not match the operator grid")
    mask = _interior_mask(operator)
    w0 = rhs.to_vector() * mask
    w0_sup = sup_norm(w0)

    B = measure_inverse_norm(operator, [rhs] if w0_sup else [], settings)
    A = B * w0_sup
    kappa = 2 * abs(gamma)
    cfg = NewtonConfig(
        A=A,
        B=B,
        kappa=kappa,
        r=4 * A + settings.newton_radius_floor,
        tol=settings.newton_tol,
        max_iter=settings.newton_max_iter,
        full_newton=full_newton,
    )
    logger.info(
        "toy instanton constants A=%.3e B=%.3e kappa=%.3e 2kAB=%.3e",
        A, B, kappa, cfg.admissibility_product,
    )

    def evaluate(x: Vector) -> Vector:
        return operator.matrix @ x + mask * (gamma * quadratic_term(x) - w0)

    def inverse_derivative(y: Vector) -> Vector:
        return solve_vector(operator, y)

    def jacobian_solver(x: Vector) -> LinearSolver:
        u, v = x[0::2], x[1::2]
        n = x.size
        rows = np.concatenate([np.arange(0, n, 2), np.arange(0, n, 2), np.arange(1, n, 2)])
        cols = np.concatenate([np.arange(0, n, 2), np.arange(1, n, 2), np.arange(0, n, 2)])
        data = gamma * np.concatenate([v, u, 2 * u]) * mask[rows]
        jacobian = operator.matrix + sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        factor = spla.splu(jacobian.tocsc())
        return factor.solve

    result = quantitative_newton(
        evaluate,
        inverse_derivative,
        cfg,
        np.zeros(operator.grid.unknowns, dtype=complex),
        jacobian_solver=jacobian_solver,
    )
    solution = result.root.copy()
    solution[operator.dirichlet_rows] = 0.0
    return ToyInstanton(
        SpinorGrid.from_vector(operator.grid, solution, "minus"),
        result,
        cfg,
        gamma,
        w0_sup,
    )


@dataclass(frozen=True)
class QuadraticDeviation:
    deviation: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.deviation <= self.bound * (1 + 1e-12) + 1e-300

    @property
    def is_equality(self) -> bool:
        return bool(np.isclose(self.deviation, self.bound, rtol=1e-12, atol=0.0))


def quadratic_deviation(
    operator: DiscreteOperator, gamma: float, base: SpinorGrid, direction: SpinorGrid
) -> QuadraticDeviation:
    """||F'(V0) V - F'(0) V||_sup for F(V) = DV + gamma Q(V) - W0, with its bilinear bound."""
    for values in (base, direction):
        if values.grid != operator.grid:
            raise GridMismatchError("field grid does not match the operator grid")
    change = abs(gamma) * sup_norm(quadratic_derivative(base.to_vector(), direction.to_vector()))
    bound = 2 * abs(gamma) * base.sup_norm() * direction.sup_norm()
    return QuadraticDeviation(change, bound)
