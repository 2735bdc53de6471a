"""Normtest command: per-bin Gaussianity tests of homodyne samples."""

from __future__ import annotations

from typing import Optional

import click
from rich.table import Table

from homodyne_forge.cli.common import (
    build_config,
    console,
    exit_on_input_error,
    finish,
    global_options,
    load_dataset,
    print_warnings,
)
from homodyne_forge.gaussianity import jb_critical_value, normality_report
from homodyne_forge.models import NormalityReport, NormtestConfig
from homodyne_forge.serializer import OutputWriter


def _print_report(report: NormalityReport) -> None:
    table = Table(title=f"Normality tests (α = {report.alpha:g})")
    for column in ("θ", "n", "variance", "W_JB", "p_JB", "W_SW", "p_SW", "reject"):
        table.add_column(column, justify="right")
    for b in report.bins:
        flags = "".join(tag for tag, hit in (("JB ", b.reject_jb), ("SW", b.reject_sw)) if hit)
        table.add_row(
            f"{b.phase_center:.4f}",
            str(b.n),
            f"{b.variance:.4f}",
            f"{b.w_jb:.3f}",
            f"{b.p_jb:.3g}",
            f"{b.w_sw:.5f}",
            f"{b.p_sw:.3g}",
            f"[red]{flags.strip()}[/red]" if flags else "",
        )
    console.print(table)
    verdict = "[green]Gaussian[/green]" if report.gaussian else "[red]non-Gaussian[/red]"
    console.print(
        f"  {report.rejected_bins}/{len(report.bins)} bins rejected "
        f"(W_JB > {jb_critical_value(report.alpha):.3g} or p_SW ≤ {report.alpha:g}); "
        f"verdict {verdict}"
    )


@click.command()
@click.option("--data", "-d", type=str, default=None, help="Dataset CSV.")
@click.option("--bin-size", type=int, default=None, help="Samples per bin. [default: 10000]")
@click.option("--alpha", type=float, default=None, help="Significance level. [default: 0.05]")
@click.option(
    "--reject-fraction",
    type=float,
    default=None,
    help="Reject Gaussianity above this fraction of rejected bins. [default: 0.2]",
)
@click.option("--output", "-o", type=str, default=None, help="Output stem. [default: normality]")
@global_options
@click.pass_context
def normtest(
    ctx: click.Context,
    data: Optional[str],
    bin_size: Optional[int],
    alpha: Optional[float],
    reject_fraction: Optional[float],
    output: Optional[str],
) -> None:
    """Run Jarque-Bera and Shapiro-Wilk tests on phase-sorted bins.

    Samples are grouped by setting, sorted by LO phase and cut into bins of
    --bin-size. Shapiro-Wilk splits bins above 5000 samples and combines
    the chunk p-values with Fisher's method.

    \b
    OUTPUT:
    ───────
    <stem>.json  summary, verdict and per-bin statistics
    <stem>.csv   per-bin table (variance, JB and SW statistics)

    The verdict is a result, not an error: the command exits 0 either way.
    """
    config = build_config(
        ctx,
        NormtestConfig,
        data=data,
        bin_size=bin_size,
        alpha=alpha,
        reject_fraction=reject_fraction,
        output=output,
    )
    with exit_on_input_error(ctx):
        dataset = load_dataset(ctx, config.data, config.eta)
        report = normality_report(
            dataset,
            bin_size=config.bin_size,
            alpha=config.alpha,
            reject_fraction=config.reject_fraction,
        )

    _print_report(report)
    print_warnings(report.warnings)

    writer = OutputWriter(config.out, config)
    writer.write_normality(config.output, report)
    finish(ctx, writer.written, numerical_warning=False)
