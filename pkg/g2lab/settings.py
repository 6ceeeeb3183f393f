from __future__ import annotations

from dataclasses import dataclass


@dataclass(kw_only=True)
class NumericsSettings:
    orthonormal_tol: float = 1e-10
    coassociative_tol: float = 1e-10
    jacobian_step: float = 1e-5
    richardson_steps: tuple[float, float, float] = (1e-2, 5e-3, 2.5e-3)
    eigen_shift: float = -0.01
    eigen_tol: float = 1e-9
    eigen_max_iter: int = 500
    kernel_threshold: float = 1e-8
    kernel_max_unknowns: int = 4096
    lambda_tol: float = 1e-6
    holder_exact_max_points: int = 4096
    holder_sample_pairs: int = 200_000
    holder_seed: int = 0
    inverse_probe_count: int = 4
    inverse_probe_seed: int = 0
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    newton_radius_floor: float = 1e-12


@dataclass(kw_only=True)
class GridPolicy:
    dx1_target: float = 0.0125
    min_points: int = 8
    n2: int = 8
    n3: int = 8
    max_points: int = 256
