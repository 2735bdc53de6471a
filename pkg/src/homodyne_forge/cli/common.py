"""Common utilities shared across CLI commands."""

from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterator, Optional, Sequence, TypeVar

import click
import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)
from rich.table import Table

from homodyne_forge.models import HomodyneDataset, HomodyneForgeError, RunConfig
from homodyne_forge.parsers import ParserError, load_csv

# Shared console instance for all CLI output
console = Console()

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

ConfigT = TypeVar("ConfigT", bound=RunConfig)


@dataclass
class CliState:
    """Global options shared by every command (stored on ``ctx.obj``)."""

    seed: int = 0
    out: str = "."
    eta: Optional[float] = None
    verbose: bool = False
    config_dir: Optional[Path] = None


# =============================================================================
# Print Helpers
# =============================================================================


def print_error(message: str) -> None:
    """Print an error message."""
    console.print(f"[red]Error:[/red] {message}")


def print_success(message: str) -> None:
    """Print a success message."""
    console.print(f"[green]✓[/green] {message}")


def print_warning(message: str) -> None:
    """Print a warning message."""
    console.print(f"[yellow]⚠[/yellow] {message}")


def print_info(message: str) -> None:
    """Print an info message."""
    console.print(f"[blue]ℹ[/blue] {message}")


def print_section_header(title: str, char: str = "═") -> None:
    """Print a section header."""
    console.print()
    console.print(f"[bold]{title}[/bold]")
    console.print(char * 60)


def print_matrix(title: str, matrix: np.ndarray, digits: int = 4) -> None:
    """Print a real matrix as a rich table."""
    table = Table(title=title, show_header=False, box=None, pad_edge=False)
    for _ in range(matrix.shape[1]):
        table.add_column(justify="right")
    for row in matrix:
        table.add_row(*(f"{x:+.{digits}f}" for x in row))
    console.print(table)


def print_warnings(warnings: Sequence[str]) -> None:
    for message in warnings:
        print_warning(message)


# =============================================================================
# Logging
# =============================================================================


def setup_logging(verbose: bool) -> None:
    """Route package logs through rich; DEBUG when verbose, WARNING otherwise."""
    logger = logging.getLogger("homodyne_forge")
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(console=Console(stderr=True), show_time=False, show_path=verbose)
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


# =============================================================================
# Progress Indicators
# =============================================================================


def create_progress_bar(description: str = "Processing...") -> Progress:
    """Create a standard progress bar for multi-step commands.

    Shows: [spinner] Description [████████░░░░] 60% (3/5) 00:00:45
    """
    return Progress(
        SpinnerColumn(),
        TextColumn("[bold blue]{task.description}"),
        BarColumn(bar_width=30),
        TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
        TextColumn("({task.completed}/{task.total})"),
        TimeElapsedColumn(),
        console=console,
    )


@contextmanager
def with_spinner(message: str) -> Iterator[None]:
    """Show spinner for a single long computation."""
    with console.status(f"[bold blue]{message}"):
        yield


# =============================================================================
# Config and Input Helpers
# =============================================================================


def get_state(ctx: click.Context) -> CliState:
    state = ctx.find_object(CliState)
    return state if state is not None else CliState()


def _store_global(ctx: click.Context, param: click.Parameter, value: Any) -> None:
    """Write a command-level global option onto the shared state.

    A run-file value from the command's own section does not beat a flag
    given before the command name.
    """
    if value is None or param.name is None:
        return
    sources = click.core.ParameterSource
    if ctx.get_parameter_source(param.name) == sources.DEFAULT_MAP and ctx.parent is not None:
        if ctx.parent.get_parameter_source(param.name) == sources.COMMANDLINE:
            return
    state = ctx.find_object(CliState) or ctx.ensure_object(CliState)
    setattr(state, param.name, value)


F = TypeVar("F", bound=Callable[..., Any])


def global_options(func: F) -> F:
    """Accept ``--seed``, ``--out`` and ``--eta`` after the command name too.

    Values given here override the ones given to the group.
    """
    options = [
        click.option(
            "--seed",
            type=int,
            default=None,
            expose_value=False,
            callback=_store_global,
            help="Seed of the run's RNG (overrides the global flag).",
        ),
        click.option(
            "--out",
            type=click.Path(file_okay=False),
            default=None,
            expose_value=False,
            callback=_store_global,
            help="Output directory (overrides the global flag).",
        ),
        click.option(
            "--eta",
            type=float,
            default=None,
            expose_value=False,
            callback=_store_global,
            help="Detection efficiency η ∈ (0, 1] (overrides the global flag).",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def build_config(ctx: click.Context, model: type[ConfigT], **options: Any) -> ConfigT:
    """Validate a command's options together with the global ones.

    Exits with code 2 listing every invalid field.
    """
    state = get_state(ctx)
    values = {"seed": state.seed, "out": state.out, "eta": state.eta}
    values.update({k: v for k, v in options.items() if v is not None})
    try:
        return model(**values)
    except ValidationError as e:
        for error in e.errors():
            field = ".".join(str(part) for part in error["loc"]) or "config"
            print_error(f"{field}: {error['msg']}")
        raise click.exceptions.Exit(EXIT_VALIDATION)


def resolve_path(ctx: click.Context, path: str) -> Path:
    """Relative paths from a run file resolve against the run file's directory."""
    candidate = Path(path)
    state = get_state(ctx)
    if candidate.is_absolute() or candidate.exists() or state.config_dir is None:
        return candidate
    return state.config_dir / candidate


def load_dataset(ctx: click.Context, path: str, eta: Optional[float]) -> HomodyneDataset:
    """Load a dataset CSV and check a global ``--eta`` against its header.

    Stored values are already η-rescaled, so an ``--eta`` that differs from the
    file's ``eta`` header is rejected rather than applied.
    """
    resolved = resolve_path(ctx, path)
    dataset = load_csv(resolved)
    if eta is not None and not math.isclose(eta, dataset.efficiency, rel_tol=1e-12):
        raise ParserError(
            f"{resolved}: --eta {eta:g} differs from the file's eta={dataset.efficiency:g}; "
            "values are stored η-rescaled and cannot be re-rescaled"
        )
    return dataset


@contextmanager
def exit_on_input_error(ctx: click.Context) -> Iterator[None]:
    """Map invalid inputs (parse and precondition errors) to exit code 2."""
    try:
        yield
    except (HomodyneForgeError, ValueError) as e:
        print_error(str(e))
        ctx.exit(EXIT_VALIDATION)


def finish(ctx: click.Context, written: Sequence[Path], numerical_warning: bool) -> None:
    """List written files and exit 3 when the run carried numerical warnings."""
    for path in written:
        print_success(f"Wrote {path}")
    if numerical_warning:
        print_warning("Finished with numerical warnings")
        ctx.exit(EXIT_NUMERICAL)
