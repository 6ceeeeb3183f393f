from __future__ import annotations

import math
from enum import StrEnum
from importlib import metadata
from typing import Generic, Literal, TypeVar

import numpy as np
import scipy
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_serializer,
    field_validator,
    model_validator,
)
from pydantic.alias_generators import to_camel

import g2lab
from g2lab.octo_algebra import TableCheck
from g2lab.perturbation_solver import NewtonResult, ToyInstanton
from g2lab.spectral_analysis import ScalingReport, SpectrumReport
from g2lab.thin_dirac import MAX_EPSILON, ThinCylinderGrid, WarpProfile

CsvTable = tuple[list[str], list[list[object]]]


class ReportModel(BaseModel):
    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True)


class Command(StrEnum):
    ALGEBRA_SELFCHECK = "algebra-selfcheck"
    SPECTRUM = "spectrum"
    SCALING = "scaling"
    LINEARIZE = "linearize"
    NEWTON = "newton"


class WarpSpec(ReportModel):
    kind: Literal["const", "cos"]
    c0: float = Field(gt=0)
    c1: float = 0.0
    K: float | None = Field(default=None, gt=0)

    @classmethod
    def parse(cls, text: str) -> WarpSpec:
        kind, _, rest = text.partition(":")
        try:
            numbers = [float(item) for item in rest.split(",")] if rest else []
        except ValueError as error:
            raise ValueError(f"warp spec {text!r} has a non-numeric parameter") from error
        if kind == "const" and len(numbers) == 1:
            return cls(kind="const", c0=numbers[0])
        if kind == "cos" and len(numbers) == 3:
            return cls(kind="cos", c0=numbers[0], c1=numbers[1], K=numbers[2])
        raise ValueError(f"warp spec must be 'const:c' or 'cos:c0,c1,K', got {text!r}")

    def build(self, grid: ThinCylinderGrid) -> WarpProfile:
        if self.kind == "const":
            return WarpProfile.constant(grid, self.c0)
        assert self.K is not None
        return WarpProfile.cosine(grid, self.c0, self.c1, self.K)

    def __str__(self) -> str:
        if self.kind == "const":
            return f"const:{self.c0:g}"
        return f"cos:{self.c0:g},{self.c1:g},{self.K:g}"


def _grid_size(value: int) -> int:
    if value < 4 or value % 2:
        raise ValueError(f"torus grid sizes must be even and >= 4, got {value}")
    return value


def _epsilon(value: float) -> float:
    if not 0.0 < value <= MAX_EPSILON:
        raise ValueError(f"epsilon must lie in (0, {MAX_EPSILON}], got {value}")
    return value


class ExperimentConfig(ReportModel):
    model_config = ConfigDict(
        alias_generator=to_camel, populate_by_name=True, extra="forbid"
    )

    epsilon: float = 0.25
    epsilons: list[float] = Field(default_factory=lambda: [0.5, 0.25, 0.125, 0.0625])
    m: int = Field(default=16, ge=4)
    n2: int = 8
    n3: int = 8
    twist: tuple[float, float] = (0.5, 0.5)
    warp: WarpSpec = Field(default_factory=lambda: WarpSpec(kind="const", c0=1.0))
    p: float = Field(default=12.0, gt=0)
    alpha_holder: float = Field(default=1.0 / 12.0, gt=0, lt=1)
    probe: Literal["all", "boundary-hard", "interior", "mixed"] = "all"
    gamma: float = 0.1
    w0_norm: float = Field(default=0.01, ge=0)
    full_newton: bool = False
    lattice: int = Field(default=16, ge=8)
    random_cases: int = Field(default=100, ge=1)
    seed: int = 0
    format: Literal["json", "csv"] = "json"
    output: str | None = None

    @field_validator("n2", "n3")
    @classmethod
    def validate_grid_size(cls, value: int) -> int:
        return _grid_size(value)

    @field_validator("epsilon")
    @classmethod
    def validate_epsilon(cls, value: float) -> float:
        return _epsilon(value)

    @field_validator("epsilons")
    @classmethod
    def validate_epsilons(cls, value: list[float]) -> list[float]:
        for item in value:
            _epsilon(item)
        if any(b >= a for a, b in zip(value, value[1:])):
            raise ValueError("epsilon list must be strictly decreasing")
        return value

    @field_validator("twist")
    @classmethod
    def validate_twist(cls, value: tuple[float, float]) -> tuple[float, float]:
        if not all(0.0 <= item < 1.0 for item in value):
            raise ValueError(f"twist fractions must lie in [0, 1), got {value}")
        return value

    @field_validator("warp", mode="before")
    @classmethod
    def parse_warp(cls, value: object) -> object:
        if isinstance(value, str):
            return WarpSpec.parse(value)
        return value

    @field_serializer("warp")
    def serialize_warp(self, warp: WarpSpec) -> str:
        return str(warp)

    @model_validator(mode="after")
    def validate_holder_parameters(self) -> ExperimentConfig:
        if 3.0 / self.p + 3.0 * self.alpha_holder > 0.5 + 1e-12:
            raise ValueError(
                f"3/p + 3*alpha_holder must not exceed 1/2, "
                f"got {3.0 / self.p + 3.0 * self.alpha_holder:.6g}"
            )
        return self

    @property
    def probes(self) -> tuple[str, ...]:
        if self.probe == "all":
            return ("boundary-hard", "interior", "mixed")
        return (self.probe,)


class VersionsData(ReportModel):
    g2lab: str
    numpy: str
    scipy: str

    @classmethod
    def current(cls) -> VersionsData:
        try:
            installed = metadata.version("g2lab")
        except metadata.PackageNotFoundError:
            installed = g2lab.__version__
        return cls(g2lab=installed, numpy=np.__version__, scipy=scipy.__version__)


def _finite(value: float) -> float | None:
    return value if math.isfinite(value) else None


class TableCheckData(ReportModel):
    check: str
    items: int
    max_residual: float
    passed: bool
    offending: str | None = None

    @classmethod
    def from_check(cls, check: TableCheck) -> TableCheckData:
        return cls(
            check=check.name,
            items=check.items,
            max_residual=check.max_residual,
            passed=check.passed,
            offending=check.offending,
        )


class SelfcheckData(ReportModel):
    checks: list[TableCheckData]
    errata: list[str]
    signed_permutations: int
    passed: bool

    @classmethod
    def from_checks(
        cls, checks: list[TableCheck], errata: list[str], signed_permutations: int
    ) -> SelfcheckData:
        return cls(
            checks=[TableCheckData.from_check(check) for check in checks],
            errata=errata,
            signed_permutations=signed_permutations,
            passed=all(check.passed for check in checks),
        )

    def csv_table(self) -> CsvTable:
        return (
            ["check", "items", "max_residual", "passed"],
            [[c.check, c.items, c.max_residual, c.passed] for c in self.checks],
        )


class SpectrumData(ReportModel):
    epsilon: float
    m: int
    n2: int
    n3: int
    alpha: float
    beta: float
    k: float
    lambda_surface_minus: float
    lambda_surface_plus: float
    lambda_d: float
    refined_lambda_d: float
    bound: float
    margin: float
    kernel_dimension: int | None
    passed: bool
    snapshot: str | None = None

    @classmethod
    def from_report(
        cls, report: SpectrumReport, grid: ThinCylinderGrid, snapshot: str | None = None
    ) -> SpectrumData:
        return cls(
            epsilon=report.epsilon,
            m=grid.M,
            n2=grid.N2,
            n3=grid.N3,
            alpha=report.twist[0],
            beta=report.twist[1],
            k=report.K,
            lambda_surface_minus=report.lambda_surface_minus,
            lambda_surface_plus=report.lambda_surface_plus,
            lambda_d=report.lambda_D,
            refined_lambda_d=report.refined_lambda_D,
            bound=report.bound,
            margin=report.margin,
            kernel_dimension=report.kernel_dimension,
            passed=report.passed,
            snapshot=snapshot,
        )

    def csv_table(self) -> CsvTable:
        header = [
            "epsilon", "m", "n2", "n3", "alpha", "beta", "k",
            "lambda_surface_minus", "lambda_surface_plus", "lambda_d", "refined_lambda_d",
            "bound", "margin", "kernel_dimension", "passed",
        ]
        values = self.model_dump()
        row = [values[name] if values[name] is not None else "" for name in header]
        return header, [row]


class ScalingCellData(ReportModel):
    epsilon: float
    m: int
    sigma_min: float
    sigma_bound: float
    inverse_sup_norm: float
    inverse_holder_norm: float
    probe_ratios: dict[str, float]


class ScalingData(ReportModel):
    cells: list[ScalingCellData]
    fitted_exponent: float
    holder_fitted_exponent: float
    target_exponent: float
    sampled: bool
    passed: bool

    @classmethod
    def from_report(cls, report: ScalingReport) -> ScalingData:
        cells = [
            ScalingCellData(
                epsilon=eps,
                m=m,
                sigma_min=sigma,
                sigma_bound=bound,
                inverse_sup_norm=sup,
                inverse_holder_norm=holder,
                probe_ratios=ratios,
            )
            for eps, m, sigma, bound, sup, holder, ratios in zip(
                report.epsilons,
                report.grid_points,
                report.sigma_mins,
                report.sigma_bounds,
                report.inverse_sup_norms,
                report.inverse_holder_norms,
                report.probe_ratios,
            )
        ]
        return cls(
            cells=cells,
            fitted_exponent=report.fitted_exponent,
            holder_fitted_exponent=report.holder_fitted_exponent,
            target_exponent=report.target_exponent,
            sampled=report.sampled,
            passed=report.passed,
        )

    def csv_table(self) -> CsvTable:
        header = [
            "epsilon", "m", "sigma_min", "sigma_bound", "inverse_sup_norm",
            "inverse_holder_norm", "fitted_exponent", "target_exponent",
        ]
        rows: list[list[object]] = [
            [
                cell.epsilon, cell.m, cell.sigma_min, cell.sigma_bound,
                cell.inverse_sup_norm, cell.inverse_holder_norm,
                self.fitted_exponent, self.target_exponent,
            ]
            for cell in self.cells
        ]
        return header, rows


class LinearizeData(ReportModel):
    lattice: int
    max_deviation: float
    cross_form_deviation: float
    fd4_deviation: float
    observed_order: float | None
    richardson_converged: bool
    dolbeault_cases: int
    dolbeault_max_residual: float
    jacobian_sigma_min: float
    jacobian_sigma_min_half_step: float
    passed: bool

    @field_validator("observed_order", mode="before")
    @classmethod
    def drop_nan(cls, value: float | None) -> float | None:
        return None if value is None else _finite(value)

    def csv_table(self) -> CsvTable:
        values = self.model_dump()
        rows = [[name, "" if value is None else value] for name, value in values.items()]
        return ["quantity", "value"], rows


class NewtonStepData(ReportModel):
    iteration: int
    residual: float
    step: float | None


class NewtonData(ReportModel):
    a: float = Field(alias="A")
    b: float = Field(alias="B")
    kappa: float
    r: float
    admissibility_product: float
    predicted_contraction: float
    contraction_factor: float
    iterations: int
    solution_sup_norm: float
    within_ball: bool
    full_newton: bool
    trace: list[NewtonStepData]
    passed: bool

    @classmethod
    def from_result(cls, toy: ToyInstanton) -> NewtonData:
        result: NewtonResult = toy.newton
        cfg = toy.config
        steps: list[float | None] = [None, *result.step_trace]
        return cls(
            A=cfg.A,
            B=cfg.B,
            kappa=cfg.kappa,
            r=cfg.r,
            admissibility_product=cfg.admissibility_product,
            predicted_contraction=cfg.predicted_contraction,
            contraction_factor=result.contraction_factor,
            iterations=result.iterations,
            solution_sup_norm=toy.solution.sup_norm(),
            within_ball=result.within_ball,
            full_newton=cfg.full_newton,
            trace=[
                NewtonStepData(iteration=i, residual=residual, step=step)
                for i, (residual, step) in enumerate(zip(result.residual_trace, steps))
            ],
            passed=result.converged and result.within_ball,
        )

    def csv_table(self) -> CsvTable:
        rows: list[list[object]] = [
            [item.iteration, item.residual, "" if item.step is None else item.step]
            for item in self.trace
        ]
        return ["iteration", "residual", "step"], rows


AnyReportData = TypeVar(
    "AnyReportData", SelfcheckData, SpectrumData, ScalingData, LinearizeData, NewtonData
)


class Report(ReportModel, Generic[AnyReportData]):
    command: Command
    config: ExperimentConfig
    versions: VersionsData
    result: AnyReportData
