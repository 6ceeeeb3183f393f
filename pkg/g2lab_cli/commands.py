from __future__ import annotations

import asyncio
import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Generic

import numpy as np

from g2lab.calibration_planes import jacobian_stability, random_seed_frame
from g2lab.mclean_linearization import (
    JetSample,
    NormalField,
    dolbeault_agreement,
    fd_linearization,
    twisted_dirac_cross,
    twisted_dirac_flat,
)
from g2lab.octo_algebra import (
    TauKey,
    g2_signed_permutations,
    tau_table,
    tau_table_errata,
    verify_tables,
)
from g2lab.perturbation_solver import toy_instanton
from g2lab.settings import GridPolicy, NumericsSettings
from g2lab.spectral_analysis import (
    ProbeKind,
    assemble_scaling_report,
    check_holder_parameters,
    grid_for_epsilon,
    lowest_mode,
    scaling_cell,
    validate_epsilons,
    verify_lambda_bound,
)
from g2lab.thin_dirac import SpinorGrid, ThinCylinderGrid, TwistedBundle, assemble
from g2lab_cli.models import (
    AnyReportData,
    Command,
    ExperimentConfig,
    LinearizeData,
    NewtonData,
    Report,
    ScalingData,
    SelfcheckData,
    SpectrumData,
    VersionsData,
)
from g2lab_cli.snapshots import Snapshot, write_snapshot

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_NONCONVERGENCE = 2
EXIT_INADMISSIBLE = 3
EXIT_USAGE = 64

LINEARIZE_TOLERANCE = 1e-6
IDENTITY_TOLERANCE = 1e-10


@dataclass
class Outcome(Generic[AnyReportData]):
    report: Report[AnyReportData]
    summary: str

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.report.result.passed else EXIT_INVARIANT


def _report(
    command: Command, cfg: ExperimentConfig, result: AnyReportData
) -> Report[AnyReportData]:
    return Report(command=command, config=cfg, versions=VersionsData.current(), result=result)


def render(report: Report, fmt: str) -> str:
    if fmt == "json":
        return report.model_dump_json(by_alias=True, indent=2) + "\n"
    header, rows = report.result.csv_table()
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def corrupted_entry(key: TauKey) -> tuple[TauKey, int]:
    i, j, k, alpha = key
    ordered: TauKey = (*sorted((i, j, k)), alpha)  # type: ignore[assignment]
    current = tau_table().coeff.get(ordered, 0)
    return ordered, -current if current else 1


def algebra_selfcheck(
    cfg: ExperimentConfig, corrupt: TauKey | None = None
) -> Outcome[SelfcheckData]:
    table = tau_table()
    if corrupt is not None:
        key, value = corrupted_entry(corrupt)
        logger.warning("running the self-check on a table with tau%s set to %d", key, value)
        table = table.with_entry(key, value)
    checks = verify_tables(table)
    errata = [
        "tau({},{},{}; alpha={}): printed {:+d}, corrected {:+d}".format(*key, *signs)
        for key, signs in tau_table_errata().items()
    ]
    data = SelfcheckData.from_checks(checks, errata, len(g2_signed_permutations()))
    lines = [
        f"{c.check}: {c.items} items, max residual {c.max_residual:g}, "
        + ("ok" if c.passed else f"FAILED at {c.offending}")
        for c in data.checks
    ]
    return Outcome(_report(Command.ALGEBRA_SELFCHECK, cfg, data), "\n".join(lines))


def spectrum(
    cfg: ExperimentConfig, settings: NumericsSettings, snapshot: Path | None = None
) -> Outcome[SpectrumData]:
    grid = ThinCylinderGrid(cfg.epsilon, cfg.m, cfg.n2, cfg.n3)
    twist = TwistedBundle(*cfg.twist)
    warp = cfg.warp.build(grid)
    with_kernel = grid.unknowns <= settings.kernel_max_unknowns
    if not with_kernel:
        logger.warning(
            "skipping the kernel count: %d unknowns exceed %d",
            grid.unknowns,
            settings.kernel_max_unknowns,
        )
    report = verify_lambda_bound(grid, twist, warp, settings, with_kernel=with_kernel)
    if snapshot is not None:
        _, field = lowest_mode(assemble(grid, twist, warp), settings)
        write_snapshot(snapshot, Snapshot(field, twist, warp))
    data = SpectrumData.from_report(report, grid, str(snapshot) if snapshot else None)
    summary = (
        f"lambda_D = {data.lambda_d:.8g} (refined {data.refined_lambda_d:.8g}), "
        f"bound = {data.bound:.8g}, margin = {data.margin:.3g}: "
        + ("ok" if data.passed else "FAILED")
    )
    return Outcome(_report(Command.SPECTRUM, cfg, data), summary)


async def scaling(
    cfg: ExperimentConfig, settings: NumericsSettings, policy: GridPolicy
) -> Outcome[ScalingData]:
    check_holder_parameters(cfg.p, cfg.alpha_holder)
    validate_epsilons(cfg.epsilons)
    twist = TwistedBundle(*cfg.twist)
    warp = cfg.warp.build(grid_for_epsilon(cfg.epsilons[0], policy))
    probes: tuple[ProbeKind, ...] = cfg.probes  # type: ignore[assignment]
    cells = await asyncio.gather(
        *(
            asyncio.to_thread(
                scaling_cell, eps, policy, twist, warp, probes, cfg.p, cfg.alpha_holder, settings
            )
            for eps in cfg.epsilons
        )
    )
    report = assemble_scaling_report(cells, cfg.p, cfg.alpha_holder)
    data = ScalingData.from_report(report)
    summary = (
        f"fitted exponent {data.fitted_exponent:.4f} against target "
        f"{data.target_exponent:.4f} over {len(data.cells)} cells: "
        + ("ok" if data.passed else "FAILED")
    )
    return Outcome(_report(Command.SCALING, cfg, data), summary)


def linearize(cfg: ExperimentConfig, settings: NumericsSettings) -> Outcome[LinearizeData]:
    field = NormalField.band_limited(cfg.lattice, cfg.seed)
    exact = twisted_dirac_flat(field)
    finite_difference = fd_linearization(field, settings)
    deviation = float(np.max(np.abs(finite_difference.values - exact)))
    cross_form = float(np.max(np.abs(twisted_dirac_cross(field) - exact)))
    fd4 = float(np.max(np.abs(twisted_dirac_flat(field, "fd4") - exact)))

    rng = np.random.default_rng(cfg.seed)
    dolbeault = max(
        dolbeault_agreement(random_seed_frame(rng), JetSample.random(rng), settings)
        for _ in range(cfg.random_cases)
    )
    coarse, fine = jacobian_stability()
    passed = (
        deviation <= LINEARIZE_TOLERANCE
        and cross_form <= IDENTITY_TOLERANCE
        and finite_difference.converged
        and dolbeault <= IDENTITY_TOLERANCE
        and abs(coarse - fine) <= LINEARIZE_TOLERANCE
    )
    data = LinearizeData(
        lattice=cfg.lattice,
        max_deviation=deviation,
        cross_form_deviation=cross_form,
        fd4_deviation=fd4,
        observed_order=finite_difference.observed_order,
        richardson_converged=finite_difference.converged,
        dolbeault_cases=cfg.random_cases,
        dolbeault_max_residual=dolbeault,
        jacobian_sigma_min=coarse,
        jacobian_sigma_min_half_step=fine,
        passed=passed,
    )
    summary = (
        f"max |FD - D| = {deviation:.3e}, Dolbeault residual {dolbeault:.3e} "
        f"over {cfg.random_cases} cases: " + ("ok" if passed else "FAILED")
    )
    return Outcome(_report(Command.LINEARIZE, cfg, data), summary)


def _forcing(grid: ThinCylinderGrid, size: float, seed: int) -> SpinorGrid:
    if size == 0.0:
        return SpinorGrid.zeros(grid)
    rng = np.random.default_rng(seed)
    u = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    v = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    v[[0, -1]] = 0.0
    values = SpinorGrid(grid, u, v)
    return values * (size / values.sup_norm())


def newton(cfg: ExperimentConfig, settings: NumericsSettings) -> Outcome[NewtonData]:
    grid = ThinCylinderGrid(cfg.epsilon, cfg.m, cfg.n2, cfg.n3)
    twist = TwistedBundle(*cfg.twist)
    operator = assemble(grid, twist, cfg.warp.build(grid))
    toy = toy_instanton(
        operator, cfg.gamma, _forcing(grid, cfg.w0_norm, cfg.seed), settings, cfg.full_newton
    )
    data = NewtonData.from_result(toy)
    summary = (
        f"converged in {data.iterations} iterations, |V|_sup = {data.solution_sup_norm:.3e} "
        f"<= 2A = {2 * data.a:.3e}, 2*kappa*A*B = {data.admissibility_product:.3e}: "
        + ("ok" if data.passed else "FAILED")
    )
    return Outcome(_report(Command.NEWTON, cfg, data), summary)
