"""
Command-line interface for homodyne-forge.

CLI Commands (ordered by workflow):
1. simulate: Synthesize a homodyne dataset from a Gaussian state
2. fit-gaussian: Maximum-likelihood covariance estimate
3. fit-fock: Truncated Fock-space reconstruction and Wigner grid
4. normtest: Per-bin Jarque-Bera and Shapiro-Wilk tests
5. compare: Gaussian fit against Fock reconstructions
6. make-figures: CSV inputs for HS-distance, normality and Wigner plots

Exit codes: 0 success, 2 invalid input, 3 numerical warning (outputs written).
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

import click

from homodyne_forge.__about__ import __version__
from homodyne_forge.cli.common import EXIT_VALIDATION, CliState, print_error, setup_logging
from homodyne_forge.cli.compare import compare
from homodyne_forge.cli.figures import make_figures
from homodyne_forge.cli.fit import fit_fock, fit_gaussian
from homodyne_forge.cli.normtest import normtest
from homodyne_forge.cli.simulate import simulate
from homodyne_forge.parsers import ParserError, load_run_config

GLOBAL_SECTION = "global"


class OrderedGroup(click.Group):
    """Custom Click Group that orders commands by workflow."""

    COMMAND_ORDER = [
        # Data
        "simulate",
        # Estimation
        "fit-gaussian",
        "fit-fock",
        # Diagnostics
        "normtest",
        "compare",
        "make-figures",
    ]

    def list_commands(self, ctx: click.Context) -> list[str]:
        """Return commands in workflow order."""
        ordered = [cmd for cmd in self.COMMAND_ORDER if cmd in self.commands]
        remaining = [cmd for cmd in self.commands if cmd not in ordered]
        return ordered + remaining


def _from_file(ctx: click.Context, name: str, value: Any, section: dict[str, Any]) -> Any:
    """Prefer an explicit flag over the run file's ``global`` section."""
    source = ctx.get_parameter_source(name)
    if source in (click.core.ParameterSource.DEFAULT, None) and name in section:
        return section[name]
    return value


@click.group(cls=OrderedGroup)
@click.version_option(version=__version__, prog_name="homodyne-forge")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    help="YAML/JSON run file: top-level keys are command names (plus 'global') "
    "whose values become option defaults. Flags override the file.",
)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the run's RNG.")
@click.option(
    "--out",
    type=click.Path(file_okay=False),
    default=".",
    show_default=True,
    help="Output directory.",
)
@click.option("--eta", type=float, default=None, help="Detection efficiency η ∈ (0, 1].")
@click.option("--verbose", "-v", is_flag=True, help="Show debug logging.")
@click.pass_context
def main(
    ctx: click.Context,
    config_path: Optional[str],
    seed: int,
    out: str,
    eta: Optional[float],
    verbose: bool,
) -> None:
    """homodyne-forge: Gaussian-state tomography from homodyne data.

    Estimates covariance matrices of one- and two-mode Gaussian states by
    maximum likelihood, with a truncated Fock-space reconstruction and
    normality tests as baselines.

    \b
    CORE WORKFLOW:
    ─────────────
    1. SIMULATE  → homodyne-forge --eta 0.88 simulate --state file:conf/states/g_o.json
    2. FIT       → homodyne-forge fit-gaussian --data dataset.csv
    3. BASELINE  → homodyne-forge fit-fock --data dataset.csv --dim 25
    4. TEST      → homodyne-forge normtest --data dataset.csv
    5. COMPARE   → homodyne-forge compare --gaussian gaussian_report.json --fock rho_N25.json

    \b
    RUN FILES:
    ──────────
    $ homodyne-forge --config conf/runs/opo.yaml fit-gaussian
    """
    setup_logging(verbose)
    state = CliState(seed=seed, out=out, eta=eta, verbose=verbose)

    if config_path:
        try:
            defaults = load_run_config(config_path)
        except ParserError as e:
            print_error(str(e))
            ctx.exit(EXIT_VALIDATION)
        section = defaults.pop(GLOBAL_SECTION, {})
        unknown = sorted(set(section) - {"seed", "out", "eta"})
        if unknown:
            print_error(f"Unknown option(s) in '{GLOBAL_SECTION}': {', '.join(unknown)}")
            ctx.exit(EXIT_VALIDATION)
        state.seed = _from_file(ctx, "seed", seed, section)
        state.out = _from_file(ctx, "out", out, section)
        state.eta = _from_file(ctx, "eta", eta, section)
        state.config_dir = Path(config_path).resolve().parent
        ctx.default_map = defaults

    ctx.obj = state


# Register all commands (in order)
main.add_command(simulate)
main.add_command(fit_gaussian)
main.add_command(fit_fock)
main.add_command(normtest)
main.add_command(compare)
main.add_command(make_figures)


if __name__ == "__main__":
    main()
