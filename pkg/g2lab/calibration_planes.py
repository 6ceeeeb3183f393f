from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from g2lab.exceptions import (
    InvalidFrameError,
    NonCoassociativePlaneError,
    NonOrthonormalFrameError,
    SingularNormalError,
)
from g2lab.octo_algebra import (
    ImOcton,
    cayley_dickson_extend,
    cross_array,
    cross_tensor,
    g2_form_array,
    tau_array,
)
from g2lab.settings import NumericsSettings

logger = logging.getLogger(__name__)

VectorLike = ImOcton | npt.ArrayLike


def as_vector(value: VectorLike) -> npt.NDArray[np.float64]:
    if isinstance(value, ImOcton):
        return value.to_array()
    return np.asarray(value, dtype=float).reshape(7)


@dataclass(frozen=True)
class Frame:
    vectors: tuple[npt.NDArray[np.float64], ...]
    orthonormality_residual: float

    @classmethod
    def from_vectors(cls, vectors: list[VectorLike] | tuple[VectorLike, ...]) -> Frame:
        arrays = tuple(as_vector(v) for v in vectors)
        if len(arrays) not in (2, 3, 4, 7):
            raise ValueError(f"frames hold 2, 3, 4 or 7 vectors, got {len(arrays)}")
        gram = np.array([[a @ b for b in arrays] for a in arrays])
        residual = float(np.max(np.abs(gram - np.eye(len(arrays)))))
        return cls(arrays, residual)

    @classmethod
    def standard(cls, *indices: int) -> Frame:
        return cls.from_vectors([ImOcton.basis(i) for i in indices])

    @property
    def k(self) -> int:
        return len(self.vectors)

    @property
    def matrix(self) -> npt.NDArray[np.float64]:
        """Frame vectors as columns."""
        return np.stack(self.vectors, axis=1)

    def is_orthonormal(self, tol: float = 1e-12) -> bool:
        return self.orthonormality_residual <= tol

    def transformed(self, matrix: npt.ArrayLike) -> Frame:
        m = np.asarray(matrix, dtype=float)
        return Frame.from_vectors([m @ v for v in self.vectors])

    def structure_residual(self) -> float:
        """Largest deviation of g(W_a x W_b, W_c) from the standard structure constants."""
        if self.k != 7:
            raise ValueError("structure constants need a full frame")
        m = self.matrix
        constants = np.einsum("ia,jb,kc,ijk->abc", m, m, m, cross_tensor(), optimize=True)
        return float(np.max(np.abs(constants - cross_tensor())))


def _require_orthonormal(frame: Frame, k: int, settings: NumericsSettings) -> None:
    if frame.k != k:
        raise ValueError(f"expected a frame with {k} vectors, got {frame.k}")
    if not frame.is_orthonormal(settings.orthonormal_tol):
        raise NonOrthonormalFrameError(
            f"frame is not orthonormal (residual {frame.orthonormality_residual:.3e})"
        )


def associative_residual(
    frame: Frame, settings: NumericsSettings | None = None
) -> tuple[float, ImOcton]:
    _require_orthonormal(frame, 3, settings or NumericsSettings())
    value = tau_array(*frame.vectors)
    return float(np.linalg.norm(value)), ImOcton.from_array(value)


def coassociative_residual(frame: Frame, settings: NumericsSettings | None = None) -> float:
    _require_orthonormal(frame, 4, settings or NumericsSettings())
    return max(
        abs(float(g2_form_array(*(frame.vectors[i] for i in triple))))
        for triple in itertools.combinations(range(4), 3)
    )


def cayley_dickson_frame(
    w1: VectorLike,
    w2: VectorLike,
    w4: VectorLike,
    settings: NumericsSettings | None = None,
) -> Frame:
    settings = settings or NumericsSettings()
    a, b, n = as_vector(w1), as_vector(w2), as_vector(w4)
    w3 = cross_array(a, b)
    residuals = {
        "|W1|-1": abs(float(a @ a) - 1.0),
        "|W2|-1": abs(float(b @ b) - 1.0),
        "|W4|-1": abs(float(n @ n) - 1.0),
        "g(W1,W2)": abs(float(a @ b)),
        "g(W4,W1)": abs(float(n @ a)),
        "g(W4,W2)": abs(float(n @ b)),
        "g(W4,W1xW2)": abs(float(n @ w3)),
    }
    if max(residuals.values()) > settings.orthonormal_tol:
        worst = max(residuals, key=lambda name: residuals[name])
        raise InvalidFrameError(
            f"Cayley-Dickson seed violates {worst} ({residuals[worst]:.3e})", residuals
        )
    columns = cayley_dickson_extend(a, b, n)
    return Frame.from_vectors(list(columns.T))


class AlmostInstanton(NamedTuple):
    normal: ImOcton
    jacobian: npt.NDArray[np.float64]


def _tilted_normal_component(t: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    e = np.eye(7)
    tilted = [e[0], e[1], e[2] + t @ e[3:]]
    orthonormal: list[npt.NDArray[np.float64]] = []
    for vector in tilted:
        for basis in orthonormal:
            vector = vector - (vector @ basis) * basis
        orthonormal.append(vector / np.linalg.norm(vector))
    value = tau_array(*orthonormal)
    for basis in orthonormal:
        value = value - (value @ basis) * basis
    return value


def almost_instanton_map(
    t: npt.ArrayLike, settings: NumericsSettings | None = None, step: float | None = None
) -> AlmostInstanton:
    """Normal part of tau on A = span{e1, e2, e3 + sum t_a e_a} and its Jacobian at t = 0.

    The Jacobian rows are the e4..e7 components, columns the four tilt directions.
    """
    settings = settings or NumericsSettings()
    h = settings.jacobian_step if step is None else step
    params = np.asarray(t, dtype=float).reshape(4)
    normal = _tilted_normal_component(params)
    jacobian = np.empty((4, 4))
    for a in range(4):
        shift = np.zeros(4)
        shift[a] = h
        diff = _tilted_normal_component(shift) - _tilted_normal_component(-shift)
        jacobian[:, a] = diff[3:] / (2 * h)
    return AlmostInstanton(ImOcton.from_array(normal), jacobian)


def jacobian_sigma_min(jacobian: npt.ArrayLike) -> float:
    return float(np.linalg.svd(np.asarray(jacobian), compute_uv=False)[-1])


def jacobian_stability(step: float = 1e-4) -> tuple[float, float]:
    """sigma_min of the tilt Jacobian at ``step`` and at ``step / 2``."""
    zero = np.zeros(4)
    coarse = almost_instanton_map(zero, step=step).jacobian
    fine = almost_instanton_map(zero, step=step / 2).jacobian
    return jacobian_sigma_min(coarse), jacobian_sigma_min(fine)


def jn_apply(n: VectorLike, u: VectorLike) -> ImOcton:
    normal = as_vector(n)
    length = float(np.linalg.norm(normal))
    if length == 0.0:
        raise SingularNormalError("J_n is undefined for n = 0")
    return ImOcton.from_array(cross_array(normal, as_vector(u)) / length)


@dataclass(frozen=True)
class SelfDualForm:
    coeff: dict[tuple[int, int], float]
    basis_frame: Frame
    orientation: int
    hermitian_residual: float

    @property
    def norm(self) -> float:
        return float(np.sqrt(sum(c * c for c in self.coeff.values())))

    def value(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        if a < b:
            return self.coeff[(a, b)]
        return -self.coeff[(b, a)]

    def hodge_star(self) -> dict[tuple[int, int], float]:
        o = self.orientation
        c = self.coeff
        return {
            (0, 1): o * c[(2, 3)],
            (0, 2): -o * c[(1, 3)],
            (0, 3): o * c[(1, 2)],
            (1, 2): o * c[(0, 3)],
            (1, 3): -o * c[(0, 2)],
            (2, 3): o * c[(0, 1)],
        }

    def self_duality_residual(self) -> float:
        star = self.hodge_star()
        return max(abs(star[key] - value) for key, value in self.coeff.items())


def eta_from_normal(
    n: VectorLike, plane: Frame, settings: NumericsSettings | None = None
) -> SelfDualForm:
    settings = settings or NumericsSettings()
    residual = coassociative_residual(plane, settings)
    if residual > settings.coassociative_tol:
        raise NonCoassociativePlaneError(f"4-plane is not coassociative (residual {residual:.3e})")
    normal = as_vector(n)
    length = float(np.linalg.norm(normal))
    if length == 0.0:
        raise SingularNormalError("eta is undefined for n = 0")
    w = plane.vectors
    coeff = {
        (a, b): float(g2_form_array(normal, w[a], w[b]))
        for a, b in itertools.combinations(range(4), 2)
    }
    wedge = (
        coeff[(0, 1)] * coeff[(2, 3)]
        - coeff[(0, 2)] * coeff[(1, 3)]
        + coeff[(0, 3)] * coeff[(1, 2)]
    )
    orientation = 1 if wedge >= 0 else -1

    unit = normal / length
    hermitian = max(
        abs(float(g2_form_array(unit, w[a], w[b])) - float(cross_array(unit, w[a]) @ w[b]))
        for a, b in itertools.permutations(range(4), 2)
    )
    return SelfDualForm(coeff, plane, orientation, hermitian)


def j_holomorphic_residual(
    plane: Frame, n: VectorLike, settings: NumericsSettings | None = None
) -> float:
    settings = settings or NumericsSettings()
    _require_orthonormal(plane, 2, settings)
    t1, t2 = plane.vectors
    normal = as_vector(n)
    scale = float(np.linalg.norm(normal))
    tilt = max(abs(float(normal @ t1)), abs(float(normal @ t2)))
    if tilt > settings.orthonormal_tol * max(scale, 1.0):
        raise NonOrthonormalFrameError(f"2-plane is not orthogonal to n (overlap {tilt:.3e})")
    total = 0.0
    for vector in (t1, t2):
        image = jn_apply(n, vector).to_array()
        projected = image - (image @ t1) * t1 - (image @ t2) * t2
        total += float(projected @ projected)
    return float(np.sqrt(total))


def random_seed_frame(rng: np.random.Generator) -> Frame:
    """Cayley-Dickson frame from a random orthonormal seed."""

    def orthonormal_to(*basis: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        vector = rng.normal(size=7)
        for _ in range(2):
            for b in basis:
                vector = vector - (vector @ b) * b
        return vector / np.linalg.norm(vector)

    w1 = orthonormal_to()
    w2 = orthonormal_to(w1)
    w3 = cross_array(w1, w2)
    w4 = orthonormal_to(w1, w2, w3)
    return cayley_dickson_frame(w1, w2, w4)
