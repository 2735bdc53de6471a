"""
File parsers for homodyne-forge.

Supports:
- Dataset CSV files with ``# eta=`` / ``# modes=`` header lines
- Covariance-matrix state files (JSON or YAML)
- Density-matrix and Gaussian-report JSON files written by the serializer
- Run-configuration files with ${variable} substitution

Every error is raised as :class:`ParserError` naming the file (and the line
for CSV rows).
"""

from __future__ import annotations

import json
import logging
import os
import re
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from homodyne_forge.models import (
    CovarianceMatrix,
    DensityMatrix,
    DisplacementVector,
    EstimatorReport,
    HomodyneDataset,
    HomodyneForgeError,
)

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("phase", "bs_angle", "mode", "value")
OPTIONAL_COLUMNS = ("arm_phase",)


class ParserError(HomodyneForgeError):
    """Raised when parsing fails."""

    pass


class VariableResolver:
    """Resolves ${variable} patterns in run configuration.

    Variables are resolved from:
    1. Provided variables dict
    2. Environment variables
    """

    VAR_PATTERN = re.compile(r"\$\{([a-zA-Z_][a-zA-Z0-9_]*)\}")

    def __init__(self, variables: Optional[dict[str, str]] = None, use_env_vars: bool = True):
        self.variables = variables or {}
        self.use_env_vars = use_env_vars

    def resolve(self, value: Any) -> Any:
        """Recursively resolve variables in strings, lists and dicts."""
        if isinstance(value, str):
            return self._resolve_string(value)
        if isinstance(value, dict):
            return {k: self.resolve(v) for k, v in value.items()}
        if isinstance(value, list):
            return [self.resolve(item) for item in value]
        return value

    def _resolve_string(self, s: str) -> str:
        def replacer(match: re.Match) -> str:
            return self._get_variable(match.group(1), match.group(0))

        return self.VAR_PATTERN.sub(replacer, s)

    def _get_variable(self, name: str, default: str) -> str:
        if name in self.variables:
            return str(self.variables[name])
        if self.use_env_vars and name in os.environ:
            return os.environ[name]
        logger.warning(f"Unresolved variable: ${{{name}}}")
        return default


def load_structured_file(path: Union[str, Path]) -> Any:
    """Load a YAML or JSON file."""
    path = Path(path)
    if not path.exists():
        raise ParserError(f"File not found: {path}")
    content = path.read_text(encoding="utf-8")

    if path.suffix.lower() == ".json":
        try:
            return json.loads(content)
        except json.JSONDecodeError as e:
            raise ParserError(f"Invalid JSON in {path}: {e}")
    try:
        return yaml.safe_load(content)
    except yaml.YAMLError as e:
        raise ParserError(f"Invalid YAML in {path}: {e}")


def _require_mapping(data: Any, path: Path) -> dict[str, Any]:
    if not isinstance(data, dict):
        raise ParserError(f"{path} must contain a mapping at the top level")
    return data


# =============================================================================
# Dataset CSV
# =============================================================================


def _read_header(lines: list[str]) -> tuple[dict[str, str], int]:
    """Parse leading ``# key=value`` lines; returns (fields, number of lines)."""
    header: dict[str, str] = {}
    count = 0
    for line in lines:
        stripped = line.strip()
        if not stripped.startswith("#"):
            break
        count += 1
        body = stripped.lstrip("#").strip()
        if "=" in body:
            key, _, value = body.partition("=")
            header[key.strip()] = value.strip()
    return header, count


def load_csv(path: Union[str, Path]) -> HomodyneDataset:
    """Load a dataset CSV.

    Format::

        # eta=0.88
        # modes=1
        phase,bs_angle,mode,value[,arm_phase]
        0.1013,0,1,-0.3521

    Raises:
        ParserError: For missing η, bad header values or malformed rows
    """
    path = Path(path)
    if not path.exists():
        raise ParserError(f"Dataset file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    header, skip = _read_header(lines)

    if "eta" not in header:
        raise ParserError(f"{path}: missing '# eta=<float>' header line")
    try:
        eta = float(header["eta"])
    except ValueError:
        raise ParserError(f"{path}:{_header_line(lines, 'eta')}: eta is not a number")
    if not 0.0 < eta <= 1.0:
        raise ParserError(f"{path}: eta must lie in (0, 1], got {eta}")

    try:
        frame = pd.read_csv(path, skiprows=skip, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise ParserError(f"{path}: malformed CSV: {e}")
    except pd.errors.EmptyDataError:
        raise ParserError(f"{path}: missing column header line")

    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise ParserError(f"{path}:{skip + 1}: missing column(s) {', '.join(missing)}")
    unknown = [c for c in frame.columns if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        raise ParserError(f"{path}:{skip + 1}: unknown column(s) {', '.join(unknown)}")

    columns: dict[str, np.ndarray] = {}
    for name in frame.columns:
        numeric = pd.to_numeric(frame[name].str.strip(), errors="coerce")
        bad = np.flatnonzero(~np.isfinite(numeric.to_numpy(dtype=float)))
        if bad.size:
            row = int(bad[0])
            line = skip + 2 + row
            raise ParserError(
                f"{path}:{line}: column '{name}' has non-numeric value {frame[name].iloc[row]!r}"
            )
        columns[name] = numeric.to_numpy(dtype=float)

    modes_raw = columns["mode"]
    bad_modes = np.flatnonzero(~np.isin(modes_raw, (1.0, 2.0)))
    if bad_modes.size:
        line = skip + 2 + int(bad_modes[0])
        raise ParserError(f"{path}:{line}: mode must be 1 or 2")

    if "modes" in header:
        try:
            mode_count = int(header["modes"])
        except ValueError:
            raise ParserError(f"{path}:{_header_line(lines, 'modes')}: modes is not an integer")
    else:
        two_mode = np.any(modes_raw == 2.0) or np.any(columns["bs_angle"] != 0.0)
        mode_count = 2 if two_mode else 1

    n = len(frame)
    try:
        return HomodyneDataset(
            phases=columns["phase"],
            bs_angles=columns["bs_angle"],
            selectors=modes_raw.astype(int),
            arm_phases=columns.get("arm_phase", np.zeros(n)),
            values=columns["value"],
            efficiency=eta,
            mode_count=mode_count,
            metadata=header.get("metadata", ""),
        )
    except ValueError as e:
        raise ParserError(f"{path}: invalid dataset: {e}")


def _header_line(lines: list[str], key: str) -> int:
    for number, line in enumerate(lines, start=1):
        if line.lstrip("# ").startswith(f"{key}"):
            return number
    return 1


# =============================================================================
# States, Reports and Run Configuration
# =============================================================================


def load_covariance(
    path: Union[str, Path],
) -> tuple[CovarianceMatrix, Optional[DisplacementVector]]:
    """Load ``{"modes": M, "entries": [[...]], "mean": [...]}``; ``mean`` is optional."""
    path = Path(path)
    data = _require_mapping(load_structured_file(path), path)
    if "entries" not in data:
        raise ParserError(f"{path}: missing 'entries'")
    try:
        G = CovarianceMatrix.from_json_dict(data)
        mean = DisplacementVector(entries=data["mean"]) if data.get("mean") is not None else None
    except (ValueError, TypeError) as e:
        raise ParserError(f"{path}: invalid covariance matrix: {e}")
    if mean is not None and mean.mode_count != G.mode_count:
        raise ParserError(f"{path}: mean and covariance describe different mode counts")
    return G, mean


def load_density_matrix(path: Union[str, Path]) -> tuple[DensityMatrix, dict[str, Any]]:
    """Load a density-matrix JSON; returns the state and the remaining fields."""
    path = Path(path)
    data = _require_mapping(load_structured_file(path), path)
    for key in ("re", "im"):
        if key not in data:
            raise ParserError(f"{path}: missing '{key}'")
    try:
        rho = DensityMatrix.from_json_dict(data)
    except (ValueError, TypeError) as e:
        raise ParserError(f"{path}: invalid density matrix: {e}")
    extras = {k: v for k, v in data.items() if k not in ("dim", "re", "im")}
    return rho, extras


def load_gaussian_report(path: Union[str, Path]) -> EstimatorReport:
    """Load a Gaussian-fit report written by ``fit-gaussian``."""
    path = Path(path)
    data = _require_mapping(load_structured_file(path), path)
    try:
        return EstimatorReport.model_validate(data)
    except ValidationError as e:
        raise ParserError(f"{path}: invalid Gaussian report: {e}")


def load_run_config(
    path: Union[str, Path], variables: Optional[dict[str, str]] = None
) -> dict[str, dict[str, Any]]:
    """Load a run file mapping command names to option defaults.

    Keys may use either dashes or underscores; ${VAR} references resolve from
    ``variables`` and the environment.
    """
    path = Path(path)
    data = load_structured_file(path) or {}
    data = _require_mapping(data, path)
    resolved = VariableResolver(variables).resolve(data)

    defaults: dict[str, dict[str, Any]] = {}
    for command, options in resolved.items():
        if options is None:
            options = {}
        if not isinstance(options, dict):
            raise ParserError(f"{path}: options for '{command}' must be a mapping")
        defaults[str(command)] = {str(k).replace("-", "_"): v for k, v in options.items()}
    return defaults


def resolve_state(
    reference: str, base_dir: Optional[Path] = None
) -> tuple[CovarianceMatrix, Optional[DisplacementVector]]:
    """Resolve a state reference: ``vacuum``, ``vacuum2`` or ``file:<path>``.

    Relative file paths are taken from ``base_dir`` when given.
    """
    name = reference.strip()
    if name == "vacuum":
        return CovarianceMatrix.vacuum(1), None
    if name == "vacuum2":
        return CovarianceMatrix.vacuum(2), None
    if name.startswith("file:"):
        path = Path(name[len("file:") :])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return load_covariance(path)
    raise ParserError(f"Unknown state '{reference}'; use 'vacuum', 'vacuum2' or 'file:<path>'")
