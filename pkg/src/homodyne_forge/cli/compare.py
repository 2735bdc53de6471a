"""Compare command: Gaussian fit against Fock-space reconstructions."""

from __future__ import annotations

import logging
from typing import Any, Optional

import click
import numpy as np
from rich.table import Table

from homodyne_forge.cli.common import (
    build_config,
    console,
    exit_on_input_error,
    finish,
    global_options,
    print_info,
    print_warnings,
    resolve_path,
)
from homodyne_forge.fock import covariance_from_rho, hs_distance, truncation_population
from homodyne_forge.mle import degradation_factor
from homodyne_forge.models import (
    CompareConfig,
    ComparisonReport,
    CovarianceDelta,
    DensityMatrix,
    EstimatorReport,
    HomodyneForgeError,
    HSDistanceRow,
)
from homodyne_forge.parsers import load_density_matrix, load_gaussian_report
from homodyne_forge.serializer import OutputWriter

logger = logging.getLogger(__name__)

TRUNCATION_WARNING = 1e-3

FockInput = tuple[DensityMatrix, dict[str, Any]]


class ComparisonError(HomodyneForgeError):
    """Raised when comparison inputs are missing or incompatible."""

    pass


def _fock_ll_per_sample(extras: dict[str, Any], label: str) -> tuple[float, int]:
    try:
        ll = float(extras["log_likelihood"])
        n = int(extras["n_samples"])
    except (KeyError, TypeError, ValueError):
        raise ComparisonError(f"{label} lacks 'log_likelihood'/'n_samples' diagnostics")
    if n < 1:
        raise ComparisonError(f"{label} reports no samples")
    return ll / n, n


def build_comparison(
    gaussian: Optional[EstimatorReport],
    fock: list[FockInput],
    against_gaussian: Optional[EstimatorReport] = None,
    against_fock: Optional[FockInput] = None,
) -> ComparisonReport:
    """HS distances to the largest-N state, Fock-vs-Gaussian covariance deltas
    and per-model likelihood degradation factors.

    Raises:
        ComparisonError: If nothing is supplied or the inputs do not fit together
    """
    if gaussian is None and not fock:
        raise ComparisonError("Supply a Gaussian report, Fock states, or both")
    if against_gaussian is not None and gaussian is None:
        raise ComparisonError("A second Gaussian report needs a first one to compare against")
    if against_fock is not None and not fock:
        raise ComparisonError("A second density matrix needs Fock states to compare against")

    report = ComparisonReport()

    if fock:
        dims = [rho.dim for rho, _ in fock]
        reference_index = max(range(len(fock)), key=lambda i: (dims[i], i))
        reference = fock[reference_index][0]
        report.reference_dim = reference.dim
        rows = [HSDistanceRow(dim=rho.dim, distance=hs_distance(rho, reference)) for rho, _ in fock]
        report.hs_distances = sorted(rows, key=lambda row: row.dim)

    if gaussian is not None and fock:
        if gaussian.covariance.mode_count != 1:
            raise ComparisonError("Fock states can only be compared with a single-mode fit")
        G = gaussian.covariance.entries
        for rho, _ in sorted(fock, key=lambda item: item[0].dim):
            covariance, _ = covariance_from_rho(rho)
            delta = covariance.entries - G
            report.covariance_deltas.append(
                CovarianceDelta(
                    dim=rho.dim,
                    covariance=covariance.entries.tolist(),
                    delta=delta.tolist(),
                    max_abs_delta=float(np.max(np.abs(delta))),
                )
            )
            population = truncation_population(rho)
            if population > TRUNCATION_WARNING:
                report.warnings.append(
                    f"N={rho.dim}: top two Fock levels hold population {population:.3g}"
                )

    if gaussian is not None:
        report.gaussian_log_likelihood_per_sample = gaussian.log_likelihood_per_sample
        if against_gaussian is not None:
            report.degradation["gaussian"] = degradation_factor(
                gaussian.log_likelihood_per_sample * gaussian.n_samples,
                gaussian.n_samples,
                against_gaussian.log_likelihood_per_sample * against_gaussian.n_samples,
                against_gaussian.n_samples,
            )

    if fock:
        per_a, n_a = _fock_ll_per_sample(fock[reference_index][1], f"N={reference.dim} state")
        report.fock_log_likelihood_per_sample = per_a
        if against_fock is not None:
            per_b, n_b = _fock_ll_per_sample(against_fock[1], "Second density matrix")
            report.degradation["fock"] = degradation_factor(per_a * n_a, n_a, per_b * n_b, n_b)

    for message in report.warnings:
        logger.warning(message)
    return report


def _print_comparison(report: ComparisonReport) -> None:
    if report.hs_distances:
        table = Table(title=f"Hilbert-Schmidt distance to N={report.reference_dim}")
        table.add_column("N", justify="right")
        table.add_column("d_HS", justify="right")
        for row in report.hs_distances:
            table.add_row(str(row.dim), f"{row.distance:.3e}")
        console.print(table)
    if report.covariance_deltas:
        table = Table(title="Fock covariance − Ĝ")
        table.add_column("N", justify="right")
        table.add_column("ΔG₁₁", justify="right")
        table.add_column("ΔG₁₂", justify="right")
        table.add_column("ΔG₂₂", justify="right")
        table.add_column("max |Δ|", justify="right")
        for row in report.covariance_deltas:
            d = row.delta
            table.add_row(
                str(row.dim),
                f"{d[0][0]:+.4f}",
                f"{d[0][1]:+.4f}",
                f"{d[1][1]:+.4f}",
                f"{row.max_abs_delta:.4f}",
            )
        console.print(table)
    for model, factor in report.degradation.items():
        print_info(f"{model} log-likelihood degradation factor: {factor:.4f}")


@click.command()
@click.option("--gaussian", "-g", type=str, default=None, help="Gaussian report JSON.")
@click.option(
    "--fock",
    "-f",
    type=str,
    multiple=True,
    help="Density-matrix JSON from fit-fock (repeatable).",
)
@click.option(
    "--against-gaussian",
    type=str,
    default=None,
    help="Gaussian report of a second dataset for the degradation factor.",
)
@click.option(
    "--against-fock",
    type=str,
    default=None,
    help="Density-matrix JSON of a second dataset for the degradation factor.",
)
@click.option("--output", "-o", type=str, default=None, help="[default: comparison.json]")
@global_options
@click.pass_context
def compare(
    ctx: click.Context,
    gaussian: Optional[str],
    fock: tuple[str, ...],
    against_gaussian: Optional[str],
    against_fock: Optional[str],
    output: Optional[str],
) -> None:
    """Compare a Gaussian fit with Fock-space reconstructions.

    \b
    REPORTS:
    ────────
    • HS distance of each ρ̂_N to the largest-N reconstruction
    • covariance of each ρ̂_N minus Ĝ, elementwise
    • per-sample log-likelihoods, and (ll_b/n_b)/(ll_a/n_a) degradation
      factors when a second dataset's results are supplied

    \b
    EXAMPLES:
    ─────────
    $ homodyne-forge compare -g gaussian_report.json -f rho_N8.json -f rho_N25.json
    $ homodyne-forge compare -g vacuum/gaussian_report.json \\
        --against-gaussian mixture/gaussian_report.json
    """
    config = build_config(
        ctx,
        CompareConfig,
        gaussian=gaussian,
        fock=list(fock) or None,
        against_gaussian=against_gaussian,
        against_fock=against_fock,
        output=output,
    )
    with exit_on_input_error(ctx):
        report = build_comparison(
            load_gaussian_report(resolve_path(ctx, config.gaussian)) if config.gaussian else None,
            [load_density_matrix(resolve_path(ctx, path)) for path in config.fock],
            (
                load_gaussian_report(resolve_path(ctx, config.against_gaussian))
                if config.against_gaussian
                else None
            ),
            (
                load_density_matrix(resolve_path(ctx, config.against_fock))
                if config.against_fock
                else None
            ),
        )

    _print_comparison(report)
    print_warnings(report.warnings)
    writer = OutputWriter(config.out, config)
    writer.write_comparison(config.output, report)
    finish(ctx, writer.written, numerical_warning=bool(report.warnings))
