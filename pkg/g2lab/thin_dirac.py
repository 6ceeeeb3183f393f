"""Discrete Cauchy-Riemann system on the thin cylinder [0, eps] x T^2.

Unknowns are interleaved as index ((j * N2 + a) * N3 + b) * 2 + c with c = 0
for u and c = 1 for v. The x1 direction uses a 2-1 summation-by-parts stencil
with trapezoidal weights; the torus directions are pseudospectral on
Bloch-twisted Fourier modes. The assembled operator omits the unitary (+i, -i)
prefactors of the geometric operator.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from g2lab.exceptions import (
    BoundaryClassError,
    GridMismatchError,
    InvalidGridError,
    ReflectionRangeError,
    SingularOperatorError,
)

logger = logging.getLogger(__name__)

SCHEME_TAG = "sbp21-x1/twisted-fourier-z"
MAX_EPSILON = 1.5
MIN_DX1 = 1e-6
BOUNDARY_TOL = 1e-12

BoundaryClass = Literal["minus", "plus"]
ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True)
class ThinCylinderGrid:
    epsilon: float
    M: int
    N2: int
    N3: int

    def __post_init__(self) -> None:
        if self.M < 4:
            raise InvalidGridError(f"need M >= 4 subdivisions in x1, got {self.M}")
        for name, size in (("N2", self.N2), ("N3", self.N3)):
            if size < 4 or size % 2:
                raise InvalidGridError(f"{name} must be even and >= 4, got {size}")
        if not 0.0 < self.epsilon <= MAX_EPSILON:
            raise InvalidGridError(f"epsilon must lie in (0, {MAX_EPSILON}], got {self.epsilon}")
        if self.dx1 < MIN_DX1:
            raise InvalidGridError(f"x1 spacing {self.dx1:.3e} is below {MIN_DX1:.0e}")

    @property
    def dx1(self) -> float:
        return self.epsilon / self.M

    @property
    def x1(self) -> FloatArray:
        return np.linspace(0.0, self.epsilon, self.M + 1)

    @property
    def x2(self) -> FloatArray:
        return 2 * np.pi * np.arange(self.N2) / self.N2

    @property
    def x3(self) -> FloatArray:
        return 2 * np.pi * np.arange(self.N3) / self.N3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.M + 1, self.N2, self.N3)

    @property
    def surface_size(self) -> int:
        return self.N2 * self.N3

    @property
    def node_count(self) -> int:
        return (self.M + 1) * self.surface_size

    @property
    def unknowns(self) -> int:
        return 2 * self.node_count

    @property
    def cell_area(self) -> float:
        return (2 * np.pi / self.N2) * (2 * np.pi / self.N3)

    @property
    def x1_weights(self) -> FloatArray:
        weights = np.full(self.M + 1, self.dx1)
        weights[[0, -1]] *= 0.5
        return weights

    def surface_mesh(self) -> tuple[FloatArray, FloatArray]:
        x2, x3 = np.meshgrid(self.x2, self.x3, indexing="ij")
        return x2, x3

    def refined(self) -> ThinCylinderGrid:
        return replace(self, M=2 * self.M)


@dataclass(frozen=True)
class TwistedBundle:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not 0.0 <= value < 1.0:
                raise InvalidGridError(f"twist {name} must lie in [0, 1), got {value}")

    @property
    def is_trivial(self) -> bool:
        return self.alpha == 0.0 and self.beta == 0.0

    def wavenumbers(self, grid: ThinCylinderGrid) -> tuple[FloatArray, FloatArray]:
        m = np.fft.fftfreq(grid.N2, d=1.0 / grid.N2) + self.alpha
        n = np.fft.fftfreq(grid.N3, d=1.0 / grid.N3) + self.beta
        return np.meshgrid(m, n, indexing="ij")

    def sigma_minus(self, grid: ThinCylinderGrid) -> ComplexArray:
        k2, k3 = self.wavenumbers(grid)
        return -(k2 + 1j * k3) / 2

    def sigma_plus(self, grid: ThinCylinderGrid) -> ComplexArray:
        return np.conj(self.sigma_minus(grid))

    def phase(self, grid: ThinCylinderGrid) -> ComplexArray:
        x2, x3 = grid.surface_mesh()
        return np.exp(1j * (self.alpha * x2 + self.beta * x3))

    def mode(self, grid: ThinCylinderGrid, m: int, n: int) -> ComplexArray:
        """Twisted Fourier mode with wavenumber (m + alpha, n + beta) on the torus grid."""
        x2, x3 = grid.surface_mesh()
        return np.exp(1j * ((m + self.alpha) * x2 + (n + self.beta) * x3))


def _spectral_gradient(samples: FloatArray) -> tuple[FloatArray, FloatArray]:
    n2, n3 = samples.shape
    k2 = np.fft.fftfreq(n2, d=1.0 / n2)
    k3 = np.fft.fftfreq(n3, d=1.0 / n3)
    k2[n2 // 2] = 0.0
    k3[n3 // 2] = 0.0
    spectrum = np.fft.fft2(samples)
    d2 = np.fft.ifft2(1j * k2[:, None] * spectrum).real
    d3 = np.fft.ifft2(1j * k3[None, :] * spectrum).real
    return d2, d3


@dataclass(frozen=True, eq=False)
class WarpProfile:
    h: FloatArray
    K: float
    c1_hinv_sqrt: float

    @classmethod
    def from_samples(cls, h: npt.ArrayLike, K: float | None = None) -> WarpProfile:
        samples = np.asarray(h, dtype=float)
        if samples.ndim != 2:
            raise InvalidGridError("warp samples live on the N2 x N3 torus grid")
        if np.any(samples <= 0):
            raise InvalidGridError("warp h must be positive")
        tightest = max(float(samples.max()), 1.0 / float(samples.min()))
        bound = tightest if K is None else float(K)
        if bound < tightest * (1 - 1e-12):
            raise InvalidGridError(f"warp violates 1/K <= h <= K with K = {bound}")
        hinv_sqrt = samples**-0.5
        d2, d3 = _spectral_gradient(hinv_sqrt)
        c1 = float(hinv_sqrt.max() + np.sqrt(d2**2 + d3**2).max())
        return cls(samples, bound, c1)

    @classmethod
    def constant(cls, grid: ThinCylinderGrid, value: float) -> WarpProfile:
        return cls.from_samples(np.full((grid.N2, grid.N3), float(value)))

    @classmethod
    def cosine(cls, grid: ThinCylinderGrid, c0: float, c1: float, K: float) -> WarpProfile:
        x2, _ = grid.surface_mesh()
        return cls.from_samples(np.clip(c0 + c1 * np.cos(x2), 1.0 / K, K), K)

    @property
    def is_constant(self) -> bool:
        return bool(np.ptp(self.h) == 0.0)

    @property
    def sqrt_h(self) -> FloatArray:
        return np.sqrt(self.h)

    @property
    def hinv_sqrt(self) -> FloatArray:
        return self.h**-0.5

    def matches(self, grid: ThinCylinderGrid) -> bool:
        return self.h.shape == (grid.N2, grid.N3)


@dataclass(frozen=True, eq=False)
class SpinorGrid:
    grid: ThinCylinderGrid
    u: ComplexArray
    v: ComplexArray
    boundary_class: BoundaryClass | None = None

    def __post_init__(self) -> None:
        for name, values in (("u", self.u), ("v", self.v)):
            if values.shape != self.grid.shape:
                raise GridMismatchError(
                    f"{name} has shape {values.shape}, grid expects {self.grid.shape}"
                )
        if self.boundary_class is not None:
            violation = self.boundary_violation(self.boundary_class)
            scale = max(1.0, self.sup_norm())
            if violation > BOUNDARY_TOL * scale:
                raise BoundaryClassError(
                    f"field is not in the {self.boundary_class} class (wall value {violation:.3e})"
                )

    @classmethod
    def zeros(
        cls, grid: ThinCylinderGrid, boundary_class: BoundaryClass | None = None
    ) -> SpinorGrid:
        return cls(
            grid,
            np.zeros(grid.shape, dtype=complex),
            np.zeros(grid.shape, dtype=complex),
            boundary_class,
        )

    @classmethod
    def from_vector(
        cls,
        grid: ThinCylinderGrid,
        vector: npt.ArrayLike,
        boundary_class: BoundaryClass | None = None,
    ) -> SpinorGrid:
        values = np.asarray(vector, dtype=complex)
        if values.shape != (grid.unknowns,):
            raise GridMismatchError(f"expected {grid.unknowns} unknowns, got {values.shape}")
        return cls(
            grid,
            values[0::2].reshape(grid.shape).copy(),
            values[1::2].reshape(grid.shape).copy(),
            boundary_class,
        )

    def to_vector(self) -> ComplexArray:
        vector = np.empty(self.grid.unknowns, dtype=complex)
        vector[0::2] = self.u.ravel()
        vector[1::2] = self.v.ravel()
        return vector

    def boundary_violation(self, boundary_class: BoundaryClass) -> float:
        values = self.v if boundary_class == "minus" else self.u
        return float(max(np.abs(values[0]).max(), np.abs(values[-1]).max()))

    def with_class(self, boundary_class: BoundaryClass | None) -> SpinorGrid:
        return replace(self, boundary_class=boundary_class)

    def magnitude(self) -> FloatArray:
        return np.sqrt(np.abs(self.u) ** 2 + np.abs(self.v) ** 2)

    def sup_norm(self) -> float:
        """Largest modulus over all nodes and both components."""
        return float(max(np.abs(self.u).max(), np.abs(self.v).max()))

    def _check(self, other: SpinorGrid) -> None:
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: SpinorGrid) -> SpinorGrid:
        self._check(other)
        same = self.boundary_class if self.boundary_class == other.boundary_class else None
        return SpinorGrid(self.grid, self.u + other.u, self.v + other.v, same)

    def __sub__(self, other: SpinorGrid) -> SpinorGrid:
        return self + other * -1

    def __mul__(self, scalar: complex) -> SpinorGrid:
        return SpinorGrid(self.grid, self.u * scalar, self.v * scalar, self.boundary_class)

    __rmul__ = __mul__


def sbp_derivative(grid: ThinCylinderGrid) -> sp.csr_matrix:
    """Central differences inside, first-order one-sided rows at both ends."""
    n, h = grid.M + 1, grid.dx1
    lower = np.full(n - 1, -0.5 / h)
    upper = np.full(n - 1, 0.5 / h)
    diag = np.zeros(n)
    upper[0], diag[0] = 1.0 / h, -1.0 / h
    lower[-1], diag[-1] = -1.0 / h, 1.0 / h
    return sp.diags([lower, diag, upper], [-1, 0, 1], format="csr")


def surface_apply(values: ComplexArray, symbol: ComplexArray, phase: ComplexArray) -> ComplexArray:
    """Apply a Fourier multiplier over the last two axes of twisted samples."""
    periodic = values * np.conj(phase)
    spectrum = np.fft.fft2(periodic, axes=(-2, -1))
    return phase * np.fft.ifft2(symbol * spectrum, axes=(-2, -1))


def surface_matrix(
    grid: ThinCylinderGrid, twist: TwistedBundle, which: Literal["minus", "plus"] = "minus"
) -> ComplexArray:
    symbol = twist.sigma_minus(grid) if which == "minus" else twist.sigma_plus(grid)
    identity = np.eye(grid.surface_size, dtype=complex).reshape(-1, grid.N2, grid.N3)
    columns = surface_apply(identity, symbol, twist.phase(grid))
    return columns.reshape(grid.surface_size, grid.surface_size).T


def interleave_permutation(node_count: int) -> sp.csr_matrix:
    """Maps block-ordered (all u, then all v) vectors to interleaved ones."""
    rows = np.arange(2 * node_count)
    cols = (rows % 2) * node_count + rows // 2
    return sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(rows.size, rows.size))


def dirichlet_indices(
    grid: ThinCylinderGrid, boundary_class: BoundaryClass = "minus"
) -> npt.NDArray[np.int64]:
    offset = 1 if boundary_class == "minus" else 0
    surface = np.arange(grid.surface_size)
    last = grid.M * grid.surface_size
    nodes = np.concatenate([surface, last + surface])
    return 2 * nodes + offset


def class_columns(
    grid: ThinCylinderGrid, boundary_class: BoundaryClass = "minus"
) -> npt.NDArray[np.int64]:
    mask = np.ones(grid.unknowns, dtype=bool)
    mask[dirichlet_indices(grid, boundary_class)] = False
    return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: ThinCylinderGrid
    twist: TwistedBundle
    warp: WarpProfile
    matrix: sp.csr_matrix
    collocation: sp.csr_matrix
    scheme: str = SCHEME_TAG
    notes: tuple[str, ...] = field(
        default=("unitary (+i, -i) prefactors omitted", "v wall rows replaced by Dirichlet rows")
    )

    @property
    def dirichlet_rows(self) -> npt.NDArray[np.int64]:
        return dirichlet_indices(self.grid)

    @property
    def weights(self) -> FloatArray:
        return quadrature_weights(self.grid, self.warp)

    @functools.cached_property
    def factorization(self) -> spla.SuperLU:
        return spla.splu(self.matrix.tocsc())


def quadrature_weights(grid: ThinCylinderGrid, warp: WarpProfile) -> FloatArray:
    """Weights of the interleaved unknowns for the h^(1/2)-weighted inner product."""
    nodal = grid.x1_weights[:, None, None] * warp.sqrt_h[None, :, :] * grid.cell_area
    return np.repeat(nodal.ravel(), 2)


def assemble(grid: ThinCylinderGrid, twist: TwistedBundle, warp: WarpProfile) -> DiscreteOperator:
    if not warp.matches(grid):
        raise GridMismatchError("warp samples do not match the torus grid")
    d1 = sbp_derivative(grid)
    slab = sp.identity(grid.M + 1, format="csr")
    normal = sp.kron(d1, sp.diags(warp.hinv_sqrt.ravel()), format="csr")
    plus = sp.kron(slab, sp.csr_matrix(surface_matrix(grid, twist, "plus")), format="csr")
    minus = sp.kron(slab, sp.csr_matrix(surface_matrix(grid, twist, "minus")), format="csr")
    block = sp.bmat([[normal, plus], [minus, normal]], format="csr")

    perm = interleave_permutation(grid.node_count)
    collocation = (perm @ block @ perm.T).tocsr()

    keep = np.ones(grid.unknowns)
    keep[dirichlet_indices(grid)] = 0.0
    matrix = (sp.diags(keep) @ collocation + sp.diags(1.0 - keep)).tocsr()
    matrix.eliminate_zeros()
    logger.debug(
        "assembled %s operator: %d unknowns, %d nonzeros", SCHEME_TAG, grid.unknowns, matrix.nnz
    )
    return DiscreteOperator(grid, twist, warp, matrix, collocation)


def mode_block(
    grid: ThinCylinderGrid, sigma: complex, hinv_sqrt: float, dirichlet: bool = False
) -> ComplexArray:
    """Interleaved (u_j, v_j) block of one twisted Fourier mode for constant h."""
    n = grid.M + 1
    d1 = sbp_derivative(grid).toarray()
    block = np.zeros((2 * n, 2 * n), dtype=complex)
    block[0::2, 0::2] = hinv_sqrt * d1
    block[1::2, 1::2] = hinv_sqrt * d1
    block[0::2, 1::2] = np.conj(sigma) * np.eye(n)
    block[1::2, 0::2] = sigma * np.eye(n)
    if dirichlet:
        for row in (1, 2 * n - 1):
            block[row, :] = 0.0
            block[row, row] = 1.0
    return block


def _banded(matrix: ComplexArray, lower: int, upper: int) -> ComplexArray:
    n = matrix.shape[0]
    bands = np.zeros((lower + upper + 1, n), dtype=complex)
    for offset in range(-lower, upper + 1):
        diagonal = np.diagonal(matrix, offset)
        row = upper - offset
        if offset >= 0:
            bands[row, offset:] = diagonal
        else:
            bands[row, : n + offset] = diagonal
    return bands


def _check_grid(operator: DiscreteOperator, values: SpinorGrid) -> None:
    if values.grid != operator.grid:
        raise GridMismatchError("field grid does not match the operator grid")


def apply(operator: DiscreteOperator, values: SpinorGrid) -> SpinorGrid:
    _check_grid(operator, values)
    return SpinorGrid.from_vector(operator.grid, operator.collocation @ values.to_vector())


def _solve_per_mode(operator: DiscreteOperator, rhs: ComplexArray) -> ComplexArray:
    grid, twist = operator.grid, operator.twist
    phase = twist.phase(grid)
    w1 = rhs[0::2].reshape(grid.shape)
    w2 = rhs[1::2].reshape(grid.shape)
    w1_hat = np.fft.fft2(w1 * np.conj(phase), axes=(-2, -1))
    w2_hat = np.fft.fft2(w2 * np.conj(phase), axes=(-2, -1))
    u_hat = np.empty_like(w1_hat)
    v_hat = np.empty_like(w2_hat)
    sigma = twist.sigma_minus(grid)
    c = float(operator.warp.hinv_sqrt.flat[0])
    stacked = np.empty(2 * (grid.M + 1), dtype=complex)
    for a in range(grid.N2):
        for b in range(grid.N3):
            bands = _banded(mode_block(grid, sigma[a, b], c, dirichlet=True), 2, 2)
            stacked[0::2] = w1_hat[:, a, b]
            stacked[1::2] = w2_hat[:, a, b]
            solution = scipy.linalg.solve_banded((2, 2), bands, stacked)
            u_hat[:, a, b] = solution[0::2]
            v_hat[:, a, b] = solution[1::2]
    u = phase * np.fft.ifft2(u_hat, axes=(-2, -1))
    v = phase * np.fft.ifft2(v_hat, axes=(-2, -1))
    vector = np.empty(grid.unknowns, dtype=complex)
    vector[0::2] = u.ravel()
    vector[1::2] = v.ravel()
    return vector


def solve_vector(operator: DiscreteOperator, rhs: npt.ArrayLike) -> ComplexArray:
    """Solve ``operator.matrix @ x = rhs`` including the Dirichlet rows as given."""
    if operator.twist.is_trivial:
        raise SingularOperatorError(
            "zero twist: complex constants in u span the kernel", kernel_dimension=2
        )
    vector = np.asarray(rhs, dtype=complex)
    if operator.warp.is_constant:
        return _solve_per_mode(operator, vector)
    return operator.factorization.solve(vector)


def solve(operator: DiscreteOperator, rhs: SpinorGrid) -> SpinorGrid:
    _check_grid(operator, rhs)
    vector = rhs.to_vector()
    vector[operator.dirichlet_rows] = 0.0
    solution = solve_vector(operator, vector)
    solution[operator.dirichlet_rows] = 0.0
    return SpinorGrid.from_vector(operator.grid, solution, "minus")


def weighted_inner(left: SpinorGrid, right: SpinorGrid, warp: WarpProfile) -> complex:
    left._check(right)
    weights = quadrature_weights(left.grid, warp)
    return complex(np.sum(weights * left.to_vector() * np.conj(right.to_vector())))


def _gamma(values: SpinorGrid) -> SpinorGrid:
    return SpinorGrid(values.grid, 1j * values.u, -1j * values.v)


def green_boundary_term(left: SpinorGrid, right: SpinorGrid) -> complex:
    """i * sum_z [u conj(f) - v conj(g)] between the walls for left = (u, v), right = (f, g)."""
    left._check(right)
    area = left.grid.cell_area
    wall = left.u * np.conj(right.u) - left.v * np.conj(right.v)
    return complex(1j * area * (wall[-1].sum() - wall[0].sum()))


def warp_commutator_term(
    operator: DiscreteOperator, left: SpinorGrid, right: SpinorGrid
) -> complex:
    """Torus contribution of [h^(1/2), d+-] to the weighted Green identity.

    For left = (u, v) and right = (f, g) this is
    i * sum_x1 w [<[T, S+] v, f> - <[T, S-] u, g>] with T = h^(1/2) on the torus
    and S+- the surface operators. It vanishes when h is constant.
    """
    _check_grid(operator, left)
    _check_grid(operator, right)
    grid, twist = operator.grid, operator.twist
    if operator.warp.is_constant:
        return 0.0j
    t = operator.warp.sqrt_h.ravel()
    plus = surface_matrix(grid, twist, "plus")
    minus = surface_matrix(grid, twist, "minus")
    plus_commutator = t[:, None] * plus - plus * t[None, :]
    minus_commutator = t[:, None] * minus - minus * t[None, :]
    flat = (grid.M + 1, grid.surface_size)
    u, v = left.u.reshape(flat), left.v.reshape(flat)
    f, g = right.u.reshape(flat), right.v.reshape(flat)
    per_slab = np.sum(np.conj(f) * (v @ plus_commutator.T), axis=1) - np.sum(
        np.conj(g) * (u @ minus_commutator.T), axis=1
    )
    return complex(1j * grid.cell_area * (grid.x1_weights @ per_slab))


def green_identity_residual(
    operator: DiscreteOperator, left: SpinorGrid, right: SpinorGrid
) -> float:
    """|<G D V, W>_h - <V, G D W>_h - boundary term - commutator term| with G = diag(i, -i)."""
    _check_grid(operator, left)
    _check_grid(operator, right)
    warp = operator.warp
    forward = weighted_inner(_gamma(apply(operator, left)), right, warp)
    backward = weighted_inner(left, _gamma(apply(operator, right)), warp)
    return abs(
        forward
        - backward
        - green_boundary_term(left, right)
        - warp_commutator_term(operator, left, right)
    )


def adjointness_residual(
    operator: DiscreteOperator, left: SpinorGrid, right: SpinorGrid
) -> float:
    if left.boundary_violation("minus") > BOUNDARY_TOL * max(1.0, left.sup_norm()):
        raise BoundaryClassError("left field must satisfy v = 0 on the walls")
    if right.boundary_violation("plus") > BOUNDARY_TOL * max(1.0, right.sup_norm()):
        raise BoundaryClassError("right field must satisfy u = 0 on the walls")
    return green_identity_residual(operator, left, right)


def _reflection_index(grid: ThinCylinderGrid, k: int) -> tuple[npt.NDArray[np.int64], FloatArray]:
    n = np.arange(k * grid.M + 1)
    segment, offset = np.divmod(n, grid.M)
    odd = segment % 2 == 1
    index = np.where(odd, grid.M - offset, offset)
    sign = np.where(odd, -1.0, 1.0)
    return index, sign


def extended_grid(grid: ThinCylinderGrid, k: int) -> ThinCylinderGrid:
    if k < 1:
        raise ValueError(f"reflection count must be positive, got {k}")
    if k * grid.epsilon > MAX_EPSILON:
        raise ReflectionRangeError(
            f"extension length {k * grid.epsilon:.3f} exceeds {MAX_EPSILON}"
        )
    return ThinCylinderGrid(k * grid.epsilon, k * grid.M, grid.N2, grid.N3)


def reflect_extend(values: SpinorGrid, k: int) -> SpinorGrid:
    """Even extension of u and odd extension of v across the walls."""
    if values.boundary_violation("minus") > BOUNDARY_TOL * max(1.0, values.sup_norm()):
        raise BoundaryClassError("reflection needs a field with v = 0 on the walls")
    target = extended_grid(values.grid, k)
    index, sign = _reflection_index(values.grid, k)
    return SpinorGrid(
        target,
        values.u[index],
        sign[:, None, None] * values.v[index],
        "minus",
    )


def reflect_rhs(rhs: SpinorGrid, k: int) -> SpinorGrid:
    """Odd extension of w1 and even extension of w2."""
    target = extended_grid(rhs.grid, k)
    index, sign = _reflection_index(rhs.grid, k)
    return SpinorGrid(target, sign[:, None, None] * rhs.u[index], rhs.v[index])


@dataclass(frozen=True)
class ExtensionResidual:
    interior: float
    wall: float


def extension_residual(
    operator: DiscreteOperator, values: SpinorGrid, rhs: SpinorGrid, k: int
) -> ExtensionResidual:
    """Residual of the reflected solution in the extended system, split by wall proximity."""
    _check_grid(operator, values)
    extended = reflect_extend(values, k)
    target = extended.grid
    extended_operator = assemble(target, operator.twist, operator.warp)
    residual = apply(extended_operator, extended) - reflect_rhs(rhs, k)
    magnitude = residual.magnitude().max(axis=(1, 2))
    walls = np.zeros(target.M + 1, dtype=bool)
    walls[:: operator.grid.M] = True
    return ExtensionResidual(
        interior=float(magnitude[~walls].max()), wall=float(magnitude[walls].max())
    )


def case_two_mode_solution(
    grid: ThinCylinderGrid,
    twist: TwistedBundle,
    h: float,
    m: int = 0,
    n: int = 0,
    amplitude: complex = 1.0,
) -> tuple[SpinorGrid, SpinorGrid]:
    """Exact solution of the constant-h system with w1 = amplitude * mode and w2 = 0."""
    k2, k3 = m + twist.alpha, n + twist.beta
    sigma = -(k2 + 1j * k3) / 2
    modulus = abs(sigma)
    if modulus == 0.0:
        raise SingularOperatorError("the zero mode has no bounded solution", kernel_dimension=2)
    c = h**-0.5
    q = modulus / c
    half = grid.epsilon / 2
    x = grid.x1 - half
    profile_v = (amplitude / np.conj(sigma)) * (1 - np.cosh(q * x) / np.cosh(q * half))
    profile_u = (amplitude / modulus) * np.sinh(q * x) / np.cosh(q * half)
    profile_v[[0, -1]] = 0.0
    surface = twist.mode(grid, m, n)
    solution = SpinorGrid(
        grid, profile_u[:, None, None] * surface, profile_v[:, None, None] * surface, "minus"
    )
    rhs = SpinorGrid(
        grid,
        amplitude * np.ones(grid.M + 1)[:, None, None] * surface,
        np.zeros(grid.shape, dtype=complex),
    )
    return solution, rhs


def manufactured_problem(
    grid: ThinCylinderGrid, twist: TwistedBundle, warp: WarpProfile
) -> tuple[SpinorGrid, SpinorGrid]:
    """Smooth minus-class field and its continuum image under the operator.

    The z profiles are band-limited, so the torus derivatives are exact and the
    only discretization error left is the x1 stencil.
    """
    x1 = grid.x1
    length = grid.epsilon
    surface_u = twist.mode(grid, 0, 0) + 0.5 * twist.mode(grid, 1, 0)
    surface_v = twist.mode(grid, 0, 1) - 0.25j * twist.mode(grid, -1, 0)
    a = np.cos(np.pi * x1 / length)
    da = -(np.pi / length) * np.sin(np.pi * x1 / length)
    b = np.sin(np.pi * x1 / length)
    b[[0, -1]] = 0.0
    db = (np.pi / length) * np.cos(np.pi * x1 / length)

    phase = twist.phase(grid)
    plus_v = surface_apply(surface_v, twist.sigma_plus(grid), phase)
    minus_u = surface_apply(surface_u, twist.sigma_minus(grid), phase)
    c = warp.hinv_sqrt
    u = a[:, None, None] * surface_u
    v = b[:, None, None] * surface_v
    w1 = da[:, None, None] * c * surface_u + b[:, None, None] * plus_v
    w2 = db[:, None, None] * c * surface_v + a[:, None, None] * minus_u
    return SpinorGrid(grid, u, v, "minus"), SpinorGrid(grid, w1, w2)


def kernel_field(grid: ThinCylinderGrid, value: complex = 1.0) -> SpinorGrid:
    """u constant, v = 0; in the kernel when the twist is zero."""
    return SpinorGrid(
        grid,
        np.full(grid.shape, value, dtype=complex),
        np.zeros(grid.shape, dtype=complex),
        "minus",
    )
