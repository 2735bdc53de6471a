"""Make-figures command: CSV inputs for HS-distance, normality and Wigner plots."""

from __future__ import annotations

from typing import Optional

import click
import numpy as np
import pandas as pd

from homodyne_forge.cli.common import (
    build_config,
    create_progress_bar,
    exit_on_input_error,
    finish,
    global_options,
    load_dataset,
    print_warnings,
)
from homodyne_forge.fock import hs_distance, reconstruct_dataset, wigner_from_rho
from homodyne_forge.gaussian import wigner_gaussian
from homodyne_forge.gaussianity import normality_report
from homodyne_forge.mle import IllPosedError, fit_dataset
from homodyne_forge.models import FiguresConfig, FockConfig, FockReconstruction
from homodyne_forge.serializer import OutputWriter, grid_frame, normality_frame
from homodyne_forge.utils import phase_space_grid


def _parse_dims(value: Optional[str]) -> Optional[list[int]]:
    if value is None:
        return None
    try:
        return [int(part) for part in value.strip().strip("[]").split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{value}'")


@click.command("make-figures")
@click.option("--data", "-d", type=str, default=None, help="Single-mode dataset CSV.")
@click.option(
    "--dims",
    type=str,
    default=None,
    help="Comma-separated Fock dimensions. [default: 8,12,16,20,25,30]",
)
@click.option("--bins", type=int, default=None, help="Phase bins (both models). [default: 31]")
@click.option("--bin-size", type=int, default=None, help="Normality bin size. [default: 10000]")
@click.option("--grid-points", type=int, default=None, help="Wigner grid size. [default: 61]")
@click.option("--grid-extent", type=float, default=None, help="Grid half-width. [default: 6]")
@click.option("--convolve/--no-convolve", default=None, help="[default: on]")
@global_options
@click.pass_context
def make_figures(
    ctx: click.Context,
    data: Optional[str],
    dims: Optional[str],
    bins: Optional[int],
    bin_size: Optional[int],
    grid_points: Optional[int],
    grid_extent: Optional[float],
    convolve: Optional[bool],
) -> None:
    """Write the data behind convergence, normality and Wigner plots.

    No plotting is done; every output is a CSV ready for any plotting tool.

    \b
    OUTPUT:
    ───────
    hs_distance.csv        N, d_HS(ρ̂_N, ρ̂_max)
    normality.csv          per-bin variance, JB and SW statistics
    wigner_gaussian.csv    x, y, w of the Gaussian fit
    wigner_N<dim>.csv      x, y, w of each Fock reconstruction
    figures.json           summary and run config
    """
    config = build_config(
        ctx,
        FiguresConfig,
        data=data,
        dims=_parse_dims(dims),
        bins=bins,
        bin_size=bin_size,
        grid_points=grid_points,
        grid_extent=grid_extent,
        convolve=convolve,
    )
    writer = OutputWriter(config.out, config)
    X, Y = phase_space_grid(config.grid_points, config.grid_extent)
    warnings: list[str] = []
    numerical = False

    with exit_on_input_error(ctx):
        dataset = load_dataset(ctx, config.data, config.eta)
        if dataset.mode_count != 1:
            raise click.UsageError("make-figures needs a single-mode dataset")

        with create_progress_bar("Reconstructing...") as progress:
            task = progress.add_task("Reconstructing...", total=len(config.dims) + 2)

            progress.update(task, description="Gaussian fit")
            try:
                gaussian = fit_dataset(dataset, config.bins)
            except IllPosedError as e:
                gaussian = None
                warnings.append(str(e))
                numerical = True
            if gaussian is not None:
                points = np.stack([X, Y], axis=-1)
                W = wigner_gaussian(gaussian.covariance, gaussian.displacement, points)
                writer.write_frame("wigner_gaussian.csv", grid_frame(X, Y, W))
                warnings.extend(gaussian.warnings)
                numerical = numerical or not gaussian.converged or gaussian.projected
            progress.update(task, advance=1)

            reconstructions: list[FockReconstruction] = []
            for dim in config.dims:
                progress.update(task, description=f"Fock N={dim}")
                fock_config = FockConfig(
                    dim=dim,
                    phase_bins=config.bins,
                    quad_bins=config.bins,
                    convolve=config.convolve,
                )
                _, reconstruction = reconstruct_dataset(dataset, fock_config)
                reconstructions.append(reconstruction)
                rho = reconstruction.rho
                writer.write_frame(
                    f"wigner_N{dim}.csv", grid_frame(X, Y, wigner_from_rho(rho, X, Y))
                )
                warnings.extend(f"N={dim}: {message}" for message in reconstruction.warnings)
                numerical = numerical or not reconstruction.converged
                progress.update(task, advance=1)

            progress.update(task, description="Normality tests")
            normality = normality_report(dataset, bin_size=config.bin_size)
            warnings.extend(normality.warnings)
            progress.update(task, advance=1)

    reference = reconstructions[-1].rho
    hs = pd.DataFrame(
        {
            "dim": [r.rho.dim for r in reconstructions],
            "distance": [hs_distance(r.rho, reference) for r in reconstructions],
        }
    )
    writer.write_frame("hs_distance.csv", hs)
    writer.write_frame("normality.csv", normality_frame(normality))
    writer.write_json(
        "figures.json",
        {
            "reference_dim": reference.dim,
            "hs_distances": hs.to_dict(orient="records"),
            "gaussian_covariance": (
                gaussian.covariance.entries.tolist() if gaussian is not None else None
            ),
            "gaussian_verdict": normality.gaussian,
            "warnings": warnings,
        },
    )
    print_warnings(warnings)
    finish(ctx, writer.written, numerical_warning=numerical)
