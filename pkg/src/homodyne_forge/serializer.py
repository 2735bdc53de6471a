"""
Serializers for homodyne-forge outputs.

JSON is used for structured results and CSV for bulk samples and grids.
All writers are deterministic: keys keep insertion order, floats are written
with round-trip precision and no timestamps are recorded, so repeating a run
with the same seed and config reproduces every file byte for byte.

Dataset CSV layout::

    # eta=0.88
    # modes=1
    # metadata=simulate state=vacuum seed=7
    phase,bs_angle,mode,value[,arm_phase]

The ``arm_phase`` column is only written when some sample has ψ ≠ 0.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from homodyne_forge.gaussian import eigen_variances, squeezing_angle
from homodyne_forge.models import (
    ComparisonReport,
    EstimatorReport,
    FockReconstruction,
    HomodyneDataset,
    HomodyneForgeError,
    NormalityBin,
    NormalityReport,
    RunConfig,
)
from homodyne_forge.utils import ensure_directory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class SerializerError(HomodyneForgeError):
    """Raised when serialization fails."""

    pass


def _finite(value: Any) -> Any:
    """Replace non-finite floats with None so the JSON stays standard."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, np.generic):
        return _finite(value.item())
    return value


def to_json_text(payload: dict[str, Any]) -> str:
    """Render a payload as indented JSON with a trailing newline."""
    try:
        return json.dumps(_finite(payload), indent=2, allow_nan=False) + "\n"
    except (TypeError, ValueError) as e:
        raise SerializerError(f"Cannot serialize payload: {e}")


def dataset_frame(dataset: HomodyneDataset) -> pd.DataFrame:
    """Columns of a dataset in file order."""
    frame = pd.DataFrame(
        {
            "phase": dataset.phases,
            "bs_angle": dataset.bs_angles,
            "mode": dataset.selectors.astype(int),
            "value": dataset.values,
        }
    )
    if np.any(dataset.arm_phases != 0.0):
        frame["arm_phase"] = dataset.arm_phases
    return frame


def save_csv(dataset: HomodyneDataset, path: Union[str, Path]) -> Path:
    """Write a dataset CSV with its ``# eta=`` / ``# modes=`` header."""
    path = Path(path)
    ensure_directory(path.parent)
    lines = [f"# eta={dataset.efficiency!r}", f"# modes={dataset.mode_count}"]
    if dataset.metadata:
        lines.append(f"# metadata={' '.join(dataset.metadata.split())}")
    body = dataset_frame(dataset).to_csv(
        index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    path.write_text("\n".join(lines) + "\n" + body, encoding="utf-8")
    logger.debug("Wrote %d samples to %s", len(dataset), path)
    return path


# =============================================================================
# Report Payloads
# =============================================================================


def gaussian_report_payload(report: EstimatorReport) -> dict[str, Any]:
    """EstimatorReport fields plus one-mode eigen-variances and squeezing angle."""
    payload = report.model_dump(mode="json")
    if report.covariance.mode_count == 1:
        low, high = eigen_variances(report.covariance)
        payload["eigen_variances"] = [low, high]
        payload["squeezing_angle"] = squeezing_angle(report.covariance)
    return payload


def density_payload(reconstruction: FockReconstruction, eta: float) -> dict[str, Any]:
    """``{"dim", "re", "im"}`` of ρ̂ followed by the reconstruction diagnostics."""
    payload = reconstruction.rho.to_json_dict()
    payload.update(
        {
            "eta": eta,
            "iterations_used": reconstruction.iterations_used,
            "converged": reconstruction.converged,
            "regularized": reconstruction.regularized,
            "n_samples": reconstruction.n_samples,
            "log_likelihood": reconstruction.log_likelihood,
            "log_likelihood_trace": reconstruction.log_likelihood_trace,
            "warnings": reconstruction.warnings,
        }
    )
    return payload


def normality_frame(report: NormalityReport) -> pd.DataFrame:
    """One row per bin: phase, variance, moments and both test statistics."""
    rows = [b.model_dump() for b in report.bins]
    return pd.DataFrame(rows, columns=list(NormalityBin.model_fields))


def grid_frame(X: np.ndarray, Y: np.ndarray, W: np.ndarray) -> pd.DataFrame:
    """Long-format x, y, w table of a phase-space grid."""
    return pd.DataFrame({"x": X.reshape(-1), "y": Y.reshape(-1), "w": np.asarray(W).reshape(-1)})


# =============================================================================
# Output Writer
# =============================================================================


class OutputWriter:
    """Writes a command's outputs into one directory, embedding the run config.

    Example:
        writer = OutputWriter(config.out, config)
        writer.write_json("gaussian_report.json", payload)
        writer.write_frame("wigner.csv", frame)
    """

    def __init__(self, out_dir: Union[str, Path], config: Optional[RunConfig] = None):
        self.out_dir = ensure_directory(out_dir)
        self.config = config
        self.written: list[Path] = []

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def write_json(self, name: str, payload: Union[dict[str, Any], BaseModel]) -> Path:
        """Write a JSON document with the resolved config under ``"config"``."""
        if isinstance(payload, BaseModel):
            payload = payload.model_dump(mode="json")
        document = dict(payload)
        if self.config is not None:
            document["config"] = self.config.model_dump(mode="json")
        path = self._path(name)
        path.write_text(to_json_text(document), encoding="utf-8")
        self.written.append(path)
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._path(name)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self.written.append(path)
        return path

    def write_dataset(self, name: str, dataset: HomodyneDataset) -> Path:
        path = save_csv(dataset, self._path(name))
        self.written.append(path)
        return path

    def write_density(self, name: str, reconstruction: FockReconstruction, eta: float) -> Path:
        return self.write_json(name, density_payload(reconstruction, eta))

    def write_normality(self, stem: str, report: NormalityReport) -> tuple[Path, Path]:
        """``<stem>.json`` (summary and bins) and ``<stem>.csv`` (bins only)."""
        payload = report.model_dump(mode="json")
        payload["rejected_bins"] = report.rejected_bins
        json_path = self.write_json(f"{stem}.json", payload)
        csv_path = self.write_frame(f"{stem}.csv", normality_frame(report))
        return json_path, csv_path

    def write_comparison(self, name: str, report: ComparisonReport) -> Path:
        return self.write_json(name, report)
