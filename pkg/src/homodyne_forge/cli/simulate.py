"""Simulate command: synthesize homodyne data from a Gaussian state."""

from __future__ import annotations

import json
from typing import Optional

import click
from rich.table import Table

from homodyne_forge.cli.common import (
    build_config,
    console,
    exit_on_input_error,
    finish,
    get_state,
    global_options,
    print_matrix,
)
from homodyne_forge.dataset import (
    bin_by_phase,
    per_bin_variances,
    single_mode_plan,
    synthesize,
    synthesize_mixture,
    synthesize_ramp,
    two_mode_plan,
)
from homodyne_forge.models import HomodyneDataset, SimulateConfig
from homodyne_forge.parsers import resolve_state
from homodyne_forge.serializer import OutputWriter


def _print_summary(dataset: HomodyneDataset, phases: int) -> None:
    """Per-setting sample counts and sample variances."""
    stats = bin_by_phase(dataset, phases)
    variances = per_bin_variances(stats, centered=True)
    table = Table(title=f"{len(dataset)} samples (η = {dataset.efficiency:g})")
    table.add_column("ϑ", justify="right")
    table.add_column("port", justify="right")
    table.add_column("ψ", justify="right")
    table.add_column("θ", justify="right")
    table.add_column("n", justify="right")
    table.add_column("variance", justify="right")
    for record, variance in zip(stats.bins, variances):
        s = record.setting
        table.add_row(
            f"{s.bs_angle:.4f}",
            f"b{int(s.selector)}",
            f"{s.arm_phase:.4f}",
            f"{s.phase:.4f}",
            str(record.n),
            f"{variance:.4f}",
        )
    console.print(table)


@click.command()
@click.option(
    "--state",
    type=str,
    default=None,
    help="'vacuum', 'vacuum2' or 'file:<path>' to a covariance JSON/YAML "
    "({\"modes\", \"entries\", \"mean\"?}). [default: vacuum]",
)
@click.option("--phases", type=int, default=None, help="LO phases per setting group. [default: 31]")
@click.option("--per-bin", type=int, default=None, help="Samples per phase. [default: 10000]")
@click.option(
    "--arm-phase/--no-arm-phase",
    default=None,
    help="Add the ψ = π/2 group to two-mode plans. [default: on]",
)
@click.option(
    "--ramp/--no-ramp", default=None, help="Draw LO phases uniformly (one mode). [default: off]"
)
@click.option(
    "--mixture-weight",
    type=float,
    default=None,
    help="Draw a non-Gaussian two-component mixture with this broad-component weight.",
)
@click.option("--mixture-scale", type=float, default=None, help="Broad-component variance scale.")
@click.option("--output", "-o", type=str, default=None, help="Dataset file name.")
@global_options
@click.pass_context
def simulate(
    ctx: click.Context,
    state: Optional[str],
    phases: Optional[int],
    per_bin: Optional[int],
    arm_phase: Optional[bool],
    ramp: Optional[bool],
    mixture_weight: Optional[float],
    mixture_scale: Optional[float],
    output: Optional[str],
) -> None:
    """Synthesize a homodyne dataset from a Gaussian state.

    Samples are drawn with one seeded generator (--seed) and η-rescaled, so
    each value has variance wᵀGw + (1 − η)/(2η) for its setting.

    \b
    EXAMPLES:
    ─────────
    $ homodyne-forge simulate --state vacuum --eta 1 --phases 31 --per-bin 10000 --seed 7
    $ homodyne-forge --eta 0.88 simulate --state file:conf/states/g_o.json
    $ homodyne-forge --eta 1 simulate --state file:conf/states/correlated.json
    """
    config = build_config(
        ctx,
        SimulateConfig,
        state=state,
        phases=phases,
        per_bin=per_bin,
        arm_phase=arm_phase,
        ramp=ramp,
        mixture_weight=mixture_weight,
        mixture_scale=mixture_scale,
        output=output,
    )
    if config.eta is None:
        raise click.UsageError("--eta is required for simulate")

    metadata = json.dumps(config.model_dump(mode="json"), separators=(",", ":"))
    with exit_on_input_error(ctx):
        G, mean = resolve_state(config.state, get_state(ctx).config_dir)
        if config.ramp:
            dataset = synthesize_ramp(
                G, mean, config.eta, config.phases * config.per_bin, config.seed, metadata
            )
        else:
            if G.mode_count == 1:
                plan = single_mode_plan(config.phases, config.per_bin)
            else:
                plan = two_mode_plan(config.phases, config.per_bin, config.arm_phase)
            if config.mixture_weight is not None:
                dataset = synthesize_mixture(
                    G,
                    config.eta,
                    plan,
                    config.seed,
                    weight=config.mixture_weight,
                    scale=config.mixture_scale,
                    metadata=metadata,
                )
            else:
                dataset = synthesize(G, mean, config.eta, plan, config.seed, metadata)

    print_matrix("G", G.entries)
    _print_summary(dataset, config.phases)
    writer = OutputWriter(config.out, config)
    writer.write_dataset(config.output, dataset)
    finish(ctx, writer.written, numerical_warning=False)
