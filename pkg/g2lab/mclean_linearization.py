"""Flat-space linearization of the associator pullback along graphs.

Fields live on the periodic unit cube in Im H with values in H = span{e4..e7}.
Lattice values of Im O are returned as arrays of shape (n, n, n, 7).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt

from g2lab.calibration_planes import Frame
from g2lab.exceptions import InvalidFrameError
from g2lab.octo_algebra import cross_array, tau_array
from g2lab.settings import NumericsSettings

logger = logging.getLogger(__name__)

ORDER_TARGET = 2.0
ORDER_TOLERANCE = 0.2


@dataclass(frozen=True)
class NormalField:
    values: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        shape = self.values.shape
        if len(shape) != 4 or shape[3] != 4 or not shape[0] == shape[1] == shape[2]:
            raise ValueError(f"normal field must have shape (n, n, n, 4), got {shape}")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @classmethod
    def coordinates(cls, n: int) -> tuple[npt.NDArray[np.float64], ...]:
        axis = np.arange(n) / n
        return tuple(np.meshgrid(axis, axis, axis, indexing="ij"))

    @classmethod
    def zeros(cls, n: int) -> NormalField:
        return cls(np.zeros((n, n, n, 4)))

    @classmethod
    def constant(cls, n: int, value: npt.ArrayLike) -> NormalField:
        return cls(np.broadcast_to(np.asarray(value, dtype=float), (n, n, n, 4)).copy())

    @classmethod
    def band_limited(cls, n: int, seed: int, modes: int = 3, amplitude: float = 1.0) -> NormalField:
        """Random periodic field with at most ``modes`` Fourier modes per axis."""
        if n < 2 * modes + 2:
            raise ValueError(f"lattice of size {n} cannot resolve {modes} modes per axis")
        rng = np.random.default_rng(seed)
        x = cls.coordinates(n)
        values = np.zeros((n, n, n, 4))
        for component in range(4):
            for axis in range(3):
                for mode in range(1, modes + 1):
                    a, b = rng.normal(size=2) * amplitude / mode**2
                    phase = 2 * np.pi * mode * x[axis]
                    values[..., component] += a * np.cos(phase) + b * np.sin(phase)
        return cls(values)

    def gradient(self, method: Literal["spectral", "fd4"] = "spectral") -> npt.NDArray[np.float64]:
        """V_i^k as an array of shape (n, n, n, 3, 4)."""
        if method == "spectral":
            return self._spectral_gradient()
        if method == "fd4":
            return self._fd4_gradient()
        raise ValueError(f"unknown differentiation method {method!r}")

    def _spectral_gradient(self) -> npt.NDArray[np.float64]:
        n = self.n
        k = 2 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
        if n % 2 == 0:
            k[n // 2] = 0.0
        spectrum = np.fft.fftn(self.values, axes=(0, 1, 2))
        grad = np.empty((n, n, n, 3, 4))
        for axis in range(3):
            shape = [1, 1, 1, 1]
            shape[axis] = n
            derivative = np.fft.ifftn(1j * k.reshape(shape) * spectrum, axes=(0, 1, 2))
            grad[..., axis, :] = derivative.real
        return grad

    def _fd4_gradient(self) -> npt.NDArray[np.float64]:
        h = self.spacing
        grad = np.empty((self.n,) * 3 + (3, 4))
        for axis in range(3):
            f = self.values
            grad[..., axis, :] = (
                -np.roll(f, -2, axis) + 8 * np.roll(f, -1, axis)
                - 8 * np.roll(f, 1, axis) + np.roll(f, 2, axis)
            ) / (12 * h)
        return grad


@dataclass(frozen=True)
class JetSample:
    coefficients: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.coefficients.shape != (3, 4):
            raise ValueError("a jet holds V_i^k for i in 1..3 and k in 4..7")
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("jet coefficients must be finite")

    @classmethod
    def random(cls, rng: np.random.Generator) -> JetSample:
        return cls(rng.normal(size=(3, 4)))


def _embed_normal(values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    padded = np.zeros(values.shape[:-1] + (7,))
    padded[..., 3:] = values
    return padded


def pullback_tau_graph(field: NormalField, t: float) -> npt.NDArray[np.float64]:
    """Coefficient of dx1^dx2^dx3 in the pullback of tau along x -> (x, tV(x))."""
    grad = field.gradient()
    tangents = np.zeros(grad.shape[:3] + (3, 7))
    for i in range(3):
        tangents[..., i, i] = 1.0
        tangents[..., i, 3:] += t * grad[..., i, :]
    return tau_array(tangents[..., 0, :], tangents[..., 1, :], tangents[..., 2, :])


@dataclass(frozen=True)
class LinearizationResult:
    values: npt.NDArray[np.float64]
    steps: tuple[float, float, float]
    observed_order: float
    converged: bool


def _central_difference(field: NormalField, t: float) -> npt.NDArray[np.float64]:
    return (pullback_tau_graph(field, t) - pullback_tau_graph(field, -t)) / (2 * t)


def fd_linearization(
    field: NormalField, settings: NumericsSettings | None = None
) -> LinearizationResult:
    settings = settings or NumericsSettings()
    t1, t2, t3 = settings.richardson_steps
    d1, d2, d3 = (_central_difference(field, t) for t in (t1, t2, t3))
    ratio = t1 / t2
    extrapolated = (ratio**2 * d2 - d1) / (ratio**2 - 1)

    coarse = float(np.max(np.abs(d1 - d2)))
    fine = float(np.max(np.abs(d2 - d3)))
    scale = max(1.0, float(np.max(np.abs(d1))))
    if coarse <= 1e-12 * scale or fine <= 1e-12 * scale:
        # No t^2 term above roundoff: the central differences are already exact.
        order = float("nan")
        converged = True
    else:
        order = float(np.log(coarse / fine) / np.log(t2 / t3))
        converged = abs(order - ORDER_TARGET) <= ORDER_TOLERANCE
    if not converged:
        logger.warning(
            "Richardson order check failed: observed %.3f with steps %s", order, (t1, t2, t3)
        )
    return LinearizationResult(extrapolated, (t1, t2, t3), order, converged)


def _dirac_from_gradient(grad: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    def v(i: int, k: int) -> npt.NDArray[np.float64]:
        return grad[..., i - 1, k - 4]

    out = np.zeros(grad.shape[:-2] + (7,))
    out[..., 3] = -(v(1, 5) + v(2, 6) + v(3, 7))
    out[..., 4] = v(1, 4) + v(3, 6) - v(2, 7)
    out[..., 5] = v(2, 4) - v(3, 5) + v(1, 7)
    out[..., 6] = v(3, 4) + v(2, 5) - v(1, 6)
    return out


def twisted_dirac_flat(
    field: NormalField, method: Literal["spectral", "fd4"] = "spectral"
) -> npt.NDArray[np.float64]:
    return _dirac_from_gradient(field.gradient(method))


def twisted_dirac_cross(field: NormalField) -> npt.NDArray[np.float64]:
    """sum_i e_i x grad_i V."""
    grad = field.gradient()
    total = np.zeros(grad.shape[:3] + (7,))
    for i in range(3):
        e = np.zeros(7)
        e[i] = 1.0
        total += cross_array(e, _embed_normal(grad[..., i, :]))
    return total


def dolbeault_agreement(
    seed: Frame, jet: JetSample, settings: NumericsSettings | None = None
) -> float:
    """Largest disagreement between three evaluations of DV at a point.

    With J = W1 x (.), the tangent-side variation U splits into X_i (the
    W4, W5 part) and Y_i (the W6, W7 part). The Dolbeault side carries
    -(Y2 - J Y3) in the normal slot and X2 + J X3 in the (0,1) slot, and the
    conjugate-linear identification sends a (0,1) value Z to -(Z x W2 - (JZ) x W3)/2.
    """
    settings = settings or NumericsSettings()
    if seed.k != 7 or not seed.is_orthonormal(settings.orthonormal_tol):
        raise InvalidFrameError("Dolbeault comparison needs an orthonormal 7-frame")
    structure = seed.structure_residual()
    if structure > settings.orthonormal_tol:
        raise InvalidFrameError(
            f"frame is not a Cayley-Dickson frame (structure residual {structure:.3e})",
            {"structure": structure},
        )
    w = seed.vectors
    c = jet.coefficients

    def normal(i: int) -> npt.NDArray[np.float64]:
        return sum((c[i - 1, k - 4] * w[k - 1] for k in range(4, 8)), np.zeros(7))

    by_cross = cross_array(w[1], normal(2)) + cross_array(w[2], normal(3))

    def v(i: int, k: int) -> float:
        return float(c[i - 1, k - 4])

    closed_form = (
        -(v(2, 6) + v(3, 7)) * w[3]
        + (v(3, 6) - v(2, 7)) * w[4]
        + (v(2, 4) - v(3, 5)) * w[5]
        + (v(2, 5) + v(3, 4)) * w[6]
    )

    def j(vector: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return cross_array(w[0], vector)

    def x(i: int) -> npt.NDArray[np.float64]:
        return v(i, 4) * w[3] + v(i, 5) * w[4]

    def y(i: int) -> npt.NDArray[np.float64]:
        return v(i, 6) * w[3] + v(i, 7) * w[4]

    normal_slot = -(y(2) - j(y(3)))
    antiholomorphic_slot = x(2) + j(x(3))
    identified = -0.5 * (
        cross_array(antiholomorphic_slot, w[1]) - cross_array(j(antiholomorphic_slot), w[2])
    )
    dolbeault = normal_slot + identified

    return float(
        max(
            np.max(np.abs(by_cross - closed_form)),
            np.max(np.abs(dolbeault - closed_form)),
        )
    )
