"""Fit commands: Gaussian maximum likelihood and the Fock-space baseline."""

from __future__ import annotations

from typing import Optional

import click
import numpy as np

from homodyne_forge.cli.common import (
    EXIT_NUMERICAL,
    build_config,
    console,
    exit_on_input_error,
    finish,
    global_options,
    load_dataset,
    print_error,
    print_matrix,
    print_section_header,
    print_warnings,
    with_spinner,
)
from homodyne_forge.fock import reconstruct_dataset, wigner_from_rho
from homodyne_forge.mle import IllPosedError, fit_dataset
from homodyne_forge.models import FitFockConfig, FitGaussianConfig
from homodyne_forge.serializer import OutputWriter, gaussian_report_payload, grid_frame
from homodyne_forge.utils import phase_space_grid

ERROR_REPORT = "gaussian_error.json"


# =============================================================================
# fit-gaussian
# =============================================================================


@click.command("fit-gaussian")
@click.option("--data", "-d", type=str, default=None, help="Dataset CSV.")
@click.option("--bins", type=int, default=None, help="Phase bins per setting group. [default: 31]")
@click.option("--max-iterations", type=int, default=None, help="[default: 10000]")
@click.option(
    "--residual-tolerance",
    type=float,
    default=None,
    help="Stop when ‖RG − DG‖_F / ‖DG‖_F falls below this. [default: 1e-10]",
)
@click.option(
    "--likelihood-tolerance",
    type=float,
    default=None,
    help="Relative likelihood drop that triggers damping. [default: 1e-9]",
)
@click.option("--relaxation", type=float, default=None, help="Update weight. [default: 0.5]")
@click.option("--damping", type=float, default=None, help="Damping factor. [default: 0.5]")
@click.option("--min-bin-count", type=int, default=None, help="Merge smaller bins. [default: 10]")
@click.option(
    "--centered/--raw",
    default=None,
    help="Use mean-subtracted (default) or raw squared sums.",
)
@click.option(
    "--project/--no-project",
    default=None,
    help="Project unphysical estimates onto the physical boundary. [default: on]",
)
@click.option("--output", "-o", type=str, default=None, help="Report file name.")
@global_options
@click.pass_context
def fit_gaussian(
    ctx: click.Context,
    data: Optional[str],
    bins: Optional[int],
    max_iterations: Optional[int],
    residual_tolerance: Optional[float],
    likelihood_tolerance: Optional[float],
    relaxation: Optional[float],
    damping: Optional[float],
    min_bin_count: Optional[int],
    centered: Optional[bool],
    project: Optional[bool],
    output: Optional[str],
) -> None:
    """Estimate the covariance matrix Ĝ by maximum likelihood.

    Bins the data by LO phase per setting group and iterates the extremal
    equation to convergence; two-mode datasets are detected automatically.

    \b
    OUTPUT:
    ───────
    gaussian_report.json with Ĝ, X̄, iterations, residual, likelihood trace,
    symplectic spectrum, purity and the resolved run config. When the
    settings cannot determine Ĝ, gaussian_error.json lists the missing
    directions instead.

    \b
    EXIT CODES:
    ───────────
    0 = Converged, physical estimate
    2 = Invalid input
    3 = Ill-posed settings, no convergence or unphysical estimate
    """
    config = build_config(
        ctx,
        FitGaussianConfig,
        data=data,
        bins=bins,
        max_iterations=max_iterations,
        residual_tolerance=residual_tolerance,
        likelihood_tolerance=likelihood_tolerance,
        relaxation=relaxation,
        damping=damping,
        min_bin_count=min_bin_count,
        centered=centered,
        project=project,
        output=output,
    )
    writer = OutputWriter(config.out, config)

    with exit_on_input_error(ctx):
        dataset = load_dataset(ctx, config.data, config.eta)
        estimator = config.estimator_config()
        try:
            with with_spinner("Fitting covariance matrix..."):
                report = fit_dataset(dataset, config.bins, estimator)
        except IllPosedError as e:
            print_error(str(e))
            writer.write_json(
                ERROR_REPORT,
                {
                    "error": str(e),
                    "missing_directions": [d.tolist() for d in e.missing_directions],
                },
            )
            finish(ctx, writer.written, numerical_warning=False)
            ctx.exit(EXIT_NUMERICAL)

    print_section_header("GAUSSIAN FIT")
    print_matrix("Ĝ", report.covariance.entries)
    if report.displacement is not None:
        print_matrix("X̄", report.displacement.entries[None, :])
    physicality = report.physicality
    console.print(
        f"  iterations {report.iterations_used}, residual {report.final_residual:.3e}, "
        f"converged {report.converged}"
    )
    console.print(
        f"  ν = {np.round(physicality.symplectic_eigenvalues, 4).tolist()}, "
        f"purity {physicality.purity:.4f}, physical {physicality.is_physical}"
    )
    if physicality.sqrt_det is not None:
        console.print(f"  √Det Ĝ = {physicality.sqrt_det:.4f}")
    print_warnings(report.warnings)

    writer.write_json(config.output, gaussian_report_payload(report))
    numerical = not report.converged or report.projected or not physicality.is_physical
    finish(ctx, writer.written, numerical_warning=numerical)


# =============================================================================
# fit-fock
# =============================================================================


@click.command("fit-fock")
@click.option("--data", "-d", type=str, default=None, help="Dataset CSV (one mode).")
@click.option("--dim", "-N", type=int, default=None, help="Fock truncation N, 2–64. [default: 25]")
@click.option("--phase-bins", type=int, default=None, help="[default: 31]")
@click.option("--quad-bins", type=int, default=None, help="[default: 31]")
@click.option(
    "--convolve/--no-convolve",
    default=None,
    help="Fold the efficiency kernel into the POVM. [default: on]",
)
@click.option("--max-iterations", type=int, default=None, help="[default: 5000]")
@click.option("--tolerance", type=float, default=None, help="Relative gain stop. [default: 1e-9]")
@click.option("--grid-points", type=int, default=None, help="Wigner grid size. [default: 61]")
@click.option("--grid-extent", type=float, default=None, help="Grid half-width. [default: 6]")
@global_options
@click.pass_context
def fit_fock(
    ctx: click.Context,
    data: Optional[str],
    dim: Optional[int],
    phase_bins: Optional[int],
    quad_bins: Optional[int],
    convolve: Optional[bool],
    max_iterations: Optional[int],
    tolerance: Optional[float],
    grid_points: Optional[int],
    grid_extent: Optional[float],
) -> None:
    """Reconstruct a truncated density matrix ρ̂ by the RρR iteration.

    \b
    OUTPUT:
    ───────
    rho_N<dim>.json    {"dim", "re", "im"} plus diagnostics and run config
    wigner_N<dim>.csv  x, y, w grid of the Wigner function of ρ̂

    \b
    EXIT CODES:
    ───────────
    0 = Converged
    2 = Invalid input (including two-mode data)
    3 = No convergence or regularized probabilities
    """
    config = build_config(
        ctx,
        FitFockConfig,
        data=data,
        dim=dim,
        phase_bins=phase_bins,
        quad_bins=quad_bins,
        convolve=convolve,
        max_iterations=max_iterations,
        tolerance=tolerance,
        grid_points=grid_points,
        grid_extent=grid_extent,
    )

    with exit_on_input_error(ctx):
        dataset = load_dataset(ctx, config.data, config.eta)
        with with_spinner(f"Reconstructing ρ at N={config.dim}..."):
            _, reconstruction = reconstruct_dataset(dataset, config.fock_config())

    rho = reconstruction.rho
    populations = np.real(np.diag(rho.entries))
    print_section_header(f"FOCK RECONSTRUCTION (N={rho.dim})")
    console.print(
        f"  iterations {reconstruction.iterations_used}, converged {reconstruction.converged}, "
        f"log L {reconstruction.log_likelihood:.6g}"
    )
    top_two = populations[-2:].sum()
    console.print(f"  ⟨0|ρ̂|0⟩ = {populations[0]:.4f}, top-two population {top_two:.2e}")
    print_warnings(reconstruction.warnings)

    X, Y = phase_space_grid(config.grid_points, config.grid_extent)
    writer = OutputWriter(config.out, config)
    writer.write_density(f"rho_N{rho.dim}.json", reconstruction, dataset.efficiency)
    writer.write_frame(f"wigner_N{rho.dim}.csv", grid_frame(X, Y, wigner_from_rho(rho, X, Y)))
    numerical = not reconstruction.converged or reconstruction.regularized
    finish(ctx, writer.written, numerical_warning=numerical)
