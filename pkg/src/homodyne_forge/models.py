"""
Pydantic models for homodyne-forge.

Conventions shared by every model:
- Vacuum units: X = (a + a†)/√2, so the vacuum quadrature variance is 1/2.
- Quadrature ordering (X₁, Y₁, X₂, Y₂) for two-mode states.
- Homodyne values are stored η-rescaled (raw outcome divided by √η), so a projection
  ``w`` of a covariance matrix ``G`` is sampled with variance ``wᵀGw + δ_η²`` where
  ``δ_η² = (1 − η)/(2η)``.

Array-valued fields hold read-only numpy arrays and serialize to nested lists.
"""

from __future__ import annotations

import math
from enum import IntEnum
from typing import Any, Iterator, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator

SYMMETRY_TOL = 1e-9
PHYSICALITY_TOL = 1e-9


class HomodyneForgeError(Exception):
    """Base class for errors raised by homodyne-forge."""

    pass


def _frozen_array(value: Any, dtype: Any = float) -> np.ndarray:
    """Copy ``value`` into a read-only numpy array."""
    array = np.array(value, dtype=dtype)
    array.setflags(write=False)
    return array


def efficiency_noise(eta: float) -> float:
    """Added variance δ_η² = (1 − η)/(2η) of η-rescaled homodyne outcomes."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"Efficiency must lie in (0, 1], got: {eta}")
    return (1.0 - eta) / (2.0 * eta)


class ModeSelector(IntEnum):
    """Output port of the beam splitter that is homodyned."""

    B1 = 1
    B2 = 2


# =============================================================================
# Gaussian State Types
# =============================================================================


class CovarianceMatrix(BaseModel):
    """Real symmetric 2M×2M matrix of quadrature (co)variances.

    Entries are symmetrized on construction ((A + Aᵀ)/2). Inputs that are not
    symmetric to within ``SYMMETRY_TOL`` relative are rejected.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray = Field(..., description="Row-major 2M×2M covariance entries")

    @field_validator("entries", mode="before")
    @classmethod
    def symmetrize(cls, v: Any) -> np.ndarray:
        """Validate shape, finiteness, symmetry and positive diagonal."""
        matrix = np.array(v, dtype=float)
        if matrix.shape not in ((2, 2), (4, 4)):
            raise ValueError(f"Covariance matrix must be 2×2 or 4×4, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("Covariance matrix entries must be finite")
        scale = max(float(np.max(np.abs(matrix))), 1.0)
        if np.max(np.abs(matrix - matrix.T)) > SYMMETRY_TOL * scale:
            raise ValueError("Covariance matrix must be symmetric")
        if np.any(np.diag(matrix) <= 0.0):
            raise ValueError("Covariance matrix diagonal entries must be positive")
        return _frozen_array(0.5 * (matrix + matrix.T))

    @field_serializer("entries")
    def serialize_entries(self, entries: np.ndarray) -> list[list[float]]:
        return [[float(x) for x in row] for row in entries]

    @property
    def mode_count(self) -> int:
        """Number of optical modes (1 or 2)."""
        return int(self.entries.shape[0] // 2)

    @property
    def dimension(self) -> int:
        return int(self.entries.shape[0])

    @classmethod
    def vacuum(cls, mode_count: int = 1) -> CovarianceMatrix:
        """Covariance matrix of the vacuum (I/2) for one or two modes."""
        return cls(entries=0.5 * np.eye(2 * mode_count))

    def to_json_dict(self) -> dict[str, Any]:
        """Serialize as ``{"modes": M, "entries": [[...], ...]}``."""
        return {"modes": self.mode_count, "entries": self.serialize_entries(self.entries)}

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> CovarianceMatrix:
        """Inverse of :meth:`to_json_dict`; ``modes`` must agree with the entries."""
        matrix = cls(entries=data["entries"])
        modes = data.get("modes", matrix.mode_count)
        if int(modes) != matrix.mode_count:
            raise ValueError(
                f"'modes' is {modes} but entries describe {matrix.mode_count} mode(s)"
            )
        return matrix


class DisplacementVector(BaseModel):
    """Quadrature mean values in vacuum units."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray = Field(..., description="Flat vector of length 2M")

    @field_validator("entries", mode="before")
    @classmethod
    def validate_entries(cls, v: Any) -> np.ndarray:
        vector = np.array(v, dtype=float).reshape(-1)
        if vector.shape not in ((2,), (4,)):
            raise ValueError(f"Displacement must have length 2 or 4, got {vector.shape[0]}")
        if not np.all(np.isfinite(vector)):
            raise ValueError("Displacement entries must be finite")
        return _frozen_array(vector)

    @field_serializer("entries")
    def serialize_entries(self, entries: np.ndarray) -> list[float]:
        return [float(x) for x in entries]

    @property
    def mode_count(self) -> int:
        return int(self.entries.shape[0] // 2)

    @classmethod
    def zeros(cls, mode_count: int = 1) -> DisplacementVector:
        return cls(entries=np.zeros(2 * mode_count))


class Setting(BaseModel):
    """Measurement setting: LO phase, beam-splitter angle, detected port, arm phase.

    ``arm_phase`` is a phase shift applied to input mode 2 before the beam splitter;
    it is 0 for the plain beam-splitter configurations.
    """

    model_config = ConfigDict(frozen=True)

    phase: float = Field(..., description="Local-oscillator phase θ in radians")
    bs_angle: float = Field(default=0.0, description="Beam-splitter angle ϑ in radians")
    selector: ModeSelector = Field(default=ModeSelector.B1, description="Detected output port")
    arm_phase: float = Field(default=0.0, description="Phase ψ on input mode 2 in radians")

    @field_validator("phase", "bs_angle", "arm_phase")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Setting angles must be finite")
        return v

    def group_key(self) -> tuple[float, int, float]:
        """Key of the (ϑ, port, ψ) group a phase bin belongs to."""
        return (self.bs_angle, int(self.selector), self.arm_phase)

    def sort_key(self) -> tuple[float, int, float, float]:
        return (self.bs_angle, int(self.selector), self.arm_phase, self.phase)


class ProjectionVector(BaseModel):
    """Unit vector w with ``wᵀGw`` the variance detected in a given setting."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray = Field(..., description="Unit vector of length 2M")
    setting: Setting = Field(..., description="Setting the vector was built from")

    @field_validator("entries", mode="before")
    @classmethod
    def validate_unit(cls, v: Any) -> np.ndarray:
        vector = np.array(v, dtype=float).reshape(-1)
        norm = float(np.linalg.norm(vector))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"Projection vector must have unit norm, got {norm}")
        return _frozen_array(vector / norm)

    @field_serializer("entries")
    def serialize_entries(self, entries: np.ndarray) -> list[float]:
        return [float(x) for x in entries]


class PhysicalityReport(BaseModel):
    """Outcome of the uncertainty-relation check G + iΩ ≥ 0."""

    mode_count: int = Field(..., description="Number of modes")
    symplectic_eigenvalues: list[float] = Field(..., description="Ascending ν_k")
    min_symplectic_eigenvalue: float = Field(..., description="min ν_k; vacuum gives 1/2")
    sqrt_det: Optional[float] = Field(None, description="√Det G (one mode only)")
    min_eigenvalue_g_plus_i_omega: float = Field(
        ..., description="Smallest eigenvalue of the Hermitian matrix G + iΩ"
    )
    purity: float = Field(..., description="Gaussian purity 1/(2^M √Det G)")
    is_physical: bool = Field(..., description="min ν ≥ 1/2 − tolerance")
    tolerance: float = Field(default=PHYSICALITY_TOL, description="Tolerance used")


# =============================================================================
# Homodyne Data Types
# =============================================================================


class HomodyneSample(BaseModel):
    """A single η-rescaled quadrature outcome with its setting."""

    model_config = ConfigDict(frozen=True)

    setting: Setting
    value: float = Field(..., description="η-rescaled quadrature outcome")

    @field_validator("value")
    @classmethod
    def validate_finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Sample value must be finite")
        return v


class HomodyneDataset(BaseModel):
    """Phase-tagged homodyne samples plus measurement settings.

    Samples are stored column-wise for speed; :meth:`samples` yields per-sample
    models when needed.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    phases: np.ndarray = Field(..., description="LO phases reduced to [0, 2π)")
    bs_angles: np.ndarray = Field(..., description="Beam-splitter angles ϑ")
    selectors: np.ndarray = Field(..., description="Detected port per sample (1 or 2)")
    arm_phases: np.ndarray = Field(..., description="Phase ψ on input mode 2")
    values: np.ndarray = Field(..., description="η-rescaled quadrature values")
    efficiency: float = Field(..., description="Detection efficiency η ∈ (0, 1]")
    mode_count: int = Field(default=1, description="1 or 2 modes")
    metadata: str = Field(default="", description="Free-form provenance text")

    @field_validator("phases", mode="before")
    @classmethod
    def reduce_phases(cls, v: Any) -> np.ndarray:
        phases = np.array(v, dtype=float).reshape(-1)
        if not np.all(np.isfinite(phases)):
            raise ValueError("Phases must be finite")
        return _frozen_array(np.mod(phases, 2.0 * np.pi))

    @field_validator("bs_angles", "arm_phases", "values", mode="before")
    @classmethod
    def validate_column(cls, v: Any) -> np.ndarray:
        column = np.array(v, dtype=float).reshape(-1)
        if not np.all(np.isfinite(column)):
            raise ValueError("Dataset columns must be finite")
        return _frozen_array(column)

    @field_validator("selectors", mode="before")
    @classmethod
    def validate_selectors(cls, v: Any) -> np.ndarray:
        selectors = np.array(v, dtype=int).reshape(-1)
        if not np.all(np.isin(selectors, (1, 2))):
            raise ValueError("Mode selectors must be 1 or 2")
        return _frozen_array(selectors, dtype=int)

    @field_validator("efficiency")
    @classmethod
    def validate_efficiency(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"Efficiency must lie in (0, 1], got: {v}")
        return v

    @field_validator("mode_count")
    @classmethod
    def validate_mode_count(cls, v: int) -> int:
        if v not in (1, 2):
            raise ValueError(f"mode_count must be 1 or 2, got: {v}")
        return v

    def model_post_init(self, __context: Any) -> None:
        sizes = {
            len(self.phases),
            len(self.bs_angles),
            len(self.selectors),
            len(self.arm_phases),
            len(self.values),
        }
        if len(sizes) != 1:
            raise ValueError("Dataset columns must all have the same length")
        if self.mode_count == 1 and (
            np.any(self.bs_angles != 0.0) or np.any(self.selectors != 1)
        ):
            raise ValueError("Single-mode datasets must use bs_angle=0 and mode 1")

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def noise_variance(self) -> float:
        """δ_η² of this dataset."""
        return efficiency_noise(self.efficiency)

    def samples(self) -> Iterator[HomodyneSample]:
        """Iterate over samples as :class:`HomodyneSample` models."""
        for i in range(len(self)):
            yield HomodyneSample(
                setting=Setting(
                    phase=float(self.phases[i]),
                    bs_angle=float(self.bs_angles[i]),
                    selector=ModeSelector(int(self.selectors[i])),
                    arm_phase=float(self.arm_phases[i]),
                ),
                value=float(self.values[i]),
            )

    @classmethod
    def from_samples(
        cls,
        samples: list[HomodyneSample],
        efficiency: float,
        mode_count: int = 1,
        metadata: str = "",
    ) -> HomodyneDataset:
        """Build a dataset from individual samples."""
        return cls(
            phases=[s.setting.phase for s in samples],
            bs_angles=[s.setting.bs_angle for s in samples],
            selectors=[int(s.setting.selector) for s in samples],
            arm_phases=[s.setting.arm_phase for s in samples],
            values=[s.value for s in samples],
            efficiency=efficiency,
            mode_count=mode_count,
            metadata=metadata,
        )


class BinRecord(BaseModel):
    """Sufficient statistics of one phase bin."""

    model_config = ConfigDict(frozen=True)

    setting: Setting = Field(..., description="Setting with phase = bin center")
    n: int = Field(..., description="Sample count n_h")
    sum_x: float = Field(..., description="Σ x")
    y: float = Field(..., description="Σ x², the y_h of the likelihood")
    y_centered: float = Field(..., description="Σ (x − x̄_h)²")

    @field_validator("n")
    @classmethod
    def validate_count(cls, v: int) -> int:
        if v < 1:
            raise ValueError("Retained bins must hold at least one sample")
        return v

    @field_validator("y", "y_centered")
    @classmethod
    def validate_nonnegative(cls, v: float) -> float:
        if v < 0.0:
            raise ValueError("Sums of squares must be non-negative")
        return v

    @property
    def mean(self) -> float:
        return self.sum_x / self.n


class BinnedStats(BaseModel):
    """Per-setting sufficient statistics, ordered by setting."""

    bins: list[BinRecord] = Field(default_factory=list, description="Retained bins")
    mode_count: int = Field(default=1, description="1 or 2 modes")
    dropped: int = Field(default=0, description="Samples in discarded bins")
    warnings: list[str] = Field(default_factory=list, description="Binning warnings")

    @property
    def total_count(self) -> int:
        return sum(b.n for b in self.bins)

    def counts(self) -> np.ndarray:
        return np.array([b.n for b in self.bins], dtype=float)

    def squares(self, centered: bool = True) -> np.ndarray:
        """Vector of y_h (or mean-subtracted y_h′ when ``centered``)."""
        return np.array([b.y_centered if centered else b.y for b in self.bins], dtype=float)

    def settings(self) -> list[Setting]:
        return [b.setting for b in self.bins]


# =============================================================================
# Estimator Types
# =============================================================================


class EstimatorConfig(BaseModel):
    """Controls for the fixed-point covariance estimator."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    max_iterations: int = Field(default=10_000, description="Iteration cap")
    residual_tolerance: float = Field(
        default=1e-10, description="Stop when ‖RG − DG‖_F / ‖DG‖_F falls below this"
    )
    likelihood_tolerance: float = Field(
        default=1e-9, description="Allowed relative likelihood drop before damping"
    )
    initial_G: Optional[CovarianceMatrix] = Field(
        None, description="Starting matrix (vacuum when omitted)"
    )
    relaxation: float = Field(
        default=0.5, description="Weight of each fixed-point update, (0, 1]"
    )
    damping: float = Field(
        default=0.5, description="Factor applied to the update weight on a likelihood drop"
    )
    max_halvings: int = Field(default=10, description="Damping retries per step")
    centered: bool = Field(default=True, description="Use mean-subtracted y_h′")
    project_unphysical: bool = Field(
        default=True, description="Project estimates violating G ≥ Ω onto the boundary"
    )
    min_bin_count: int = Field(default=10, description="Bins below this are merged")

    @field_validator("max_iterations", "max_halvings")
    @classmethod
    def validate_positive_int(cls, v: int) -> int:
        if v < 1:
            raise ValueError("Iteration limits must be at least 1")
        return v

    @field_validator("residual_tolerance", "likelihood_tolerance")
    @classmethod
    def validate_tolerance(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError("Tolerances must be positive")
        return v

    @field_validator("relaxation", "damping")
    @classmethod
    def validate_weight(cls, v: float) -> float:
        if not 0.0 < v <= 1.0:
            raise ValueError("Update weights must lie in (0, 1]")
        return v


class EstimatorReport(BaseModel):
    """Result of a Gaussian maximum-likelihood fit."""

    covariance: CovarianceMatrix = Field(..., description="Fitted Ĝ")
    displacement: Optional[DisplacementVector] = Field(None, description="Fitted X̄")
    iterations_used: int = Field(..., description="Fixed-point iterations performed")
    converged: bool = Field(..., description="Residual tolerance reached")
    log_likelihood_trace: list[float] = Field(default_factory=list)
    final_residual: float = Field(..., description="‖RĜ − DĜ‖_F / ‖DĜ‖_F")
    physicality: PhysicalityReport
    projected: bool = Field(default=False, description="Projection fallback applied")
    eta: float = Field(..., description="Efficiency used in the fit")
    n_samples: int = Field(..., description="Samples in the retained bins")
    log_likelihood_per_sample: float = Field(
        ..., description="Full Gaussian log-likelihood per sample, including −½ log 2π"
    )
    warnings: list[str] = Field(default_factory=list)

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1] if self.log_likelihood_trace else float("nan")


# =============================================================================
# Fock-Space Types
# =============================================================================


class DensityMatrix(BaseModel):
    """Truncated Fock-space density matrix (Hermitian, unit trace, PSD)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray = Field(..., description="Complex N×N matrix")

    @field_validator("entries", mode="before")
    @classmethod
    def validate_state(cls, v: Any) -> np.ndarray:
        rho = np.array(v, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"Density matrix must be square, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise ValueError("Density matrix must be Hermitian")
        rho = 0.5 * (rho + rho.conj().T)
        trace = float(np.trace(rho).real)
        if abs(trace - 1.0) > 1e-10:
            raise ValueError(f"Density matrix must have unit trace, got {trace}")
        if float(np.min(np.linalg.eigvalsh(rho))) < -1e-10:
            raise ValueError("Density matrix must be positive semidefinite")
        return _frozen_array(rho, dtype=complex)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def to_json_dict(self) -> dict[str, Any]:
        """Serialize as ``{"dim": N, "re": [[...]], "im": [[...]]}``."""
        return {
            "dim": self.dim,
            "re": [[float(x) for x in row] for row in self.entries.real],
            "im": [[float(x) for x in row] for row in self.entries.imag],
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> DensityMatrix:
        rho = np.array(data["re"], dtype=float) + 1j * np.array(data["im"], dtype=float)
        if rho.shape[0] != int(data.get("dim", rho.shape[0])):
            raise ValueError("'dim' does not match the matrix size")
        return cls(entries=rho)

    @classmethod
    def fock(cls, k: int, dim: int) -> DensityMatrix:
        """Number state |k⟩⟨k| in a space of dimension ``dim``."""
        rho = np.zeros((dim, dim), dtype=complex)
        rho[k, k] = 1.0
        return cls(entries=rho)


class QuadraturePOVM(BaseModel):
    """Binned, efficiency-convolved quadrature projectors with observed counts.

    Element ``j`` belongs to LO phase ``phases[j]`` and the quadrature bin
    ``[lows[j], highs[j]]``; overflow bins extend to the integration cutoff.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    phases: np.ndarray = Field(..., description="Phase-bin centers φ_j")
    centers: np.ndarray = Field(..., description="Quadrature-bin centers y_j")
    widths: np.ndarray = Field(..., description="Quadrature-bin widths")
    elements: np.ndarray = Field(..., description="Stack of N×N PSD matrices")
    counts: np.ndarray = Field(..., description="Observed counts per element")
    eta: float = Field(default=1.0, description="Efficiency folded into the elements")

    @field_validator("phases", "centers", "widths", "counts", mode="before")
    @classmethod
    def validate_vector(cls, v: Any) -> np.ndarray:
        return _frozen_array(np.array(v, dtype=float).reshape(-1))

    @field_validator("elements", mode="before")
    @classmethod
    def validate_elements(cls, v: Any) -> np.ndarray:
        elements = np.array(v, dtype=complex)
        if elements.ndim != 3 or elements.shape[1] != elements.shape[2]:
            raise ValueError("POVM elements must be a stack of square matrices")
        return _frozen_array(elements, dtype=complex)

    def model_post_init(self, __context: Any) -> None:
        if np.any(self.counts < 0):
            raise ValueError("POVM counts must be non-negative")
        if not (len(self.phases) == len(self.centers) == len(self.counts) == len(self.elements)):
            raise ValueError("POVM element metadata and counts must align")

    @property
    def dim(self) -> int:
        return int(self.elements.shape[1])

    @property
    def frequencies(self) -> np.ndarray:
        total = float(np.sum(self.counts))
        return self.counts / total if total > 0 else self.counts


class FockConfig(BaseModel):
    """Controls for the truncated Fock-space reconstruction."""

    dim: int = Field(default=25, description="Truncation dimension N, 2–64")
    phase_bins: int = Field(default=31, description="Phase bins of the POVM")
    quad_bins: int = Field(default=31, description="Quadrature bins of the POVM")
    convolve: bool = Field(default=True, description="Fold the efficiency kernel into the POVM")
    max_iterations: int = Field(default=5000, description="RρR iteration cap")
    tolerance: float = Field(default=1e-9, description="Relative likelihood-gain stop")
    max_dilutions: int = Field(default=20, description="Dilution halvings per step")

    @field_validator("dim")
    @classmethod
    def validate_dim(cls, v: int) -> int:
        if not 2 <= v <= 64:
            raise ValueError(f"Fock dimension must lie in [2, 64], got: {v}")
        return v

    @field_validator("phase_bins", "quad_bins")
    @classmethod
    def validate_bins(cls, v: int) -> int:
        if v < 3:
            raise ValueError(f"At least 3 bins are required, got: {v}")
        return v

    @field_validator("max_iterations", "max_dilutions")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("Iteration limits must be at least 1")
        return v

    @field_validator("tolerance")
    @classmethod
    def validate_tolerance(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError("Tolerance must be positive")
        return v


class FockReconstruction(BaseModel):
    """Result of the truncated Fock-space ML reconstruction."""

    rho: DensityMatrix
    iterations_used: int
    converged: bool
    log_likelihood_trace: list[float] = Field(default_factory=list)
    n_samples: int = Field(..., description="Total counts in the POVM")
    regularized: bool = Field(default=False, description="Probability floor was applied")
    warnings: list[str] = Field(default_factory=list)

    @property
    def log_likelihood(self) -> float:
        """Σ_j c_j log p_j at the final state."""
        return self.log_likelihood_trace[-1] if self.log_likelihood_trace else float("nan")


# =============================================================================
# Normality Types
# =============================================================================


class NormalityBin(BaseModel):
    """Per-bin Gaussianity statistics (one row of the variance/JB/SW plot)."""

    phase_center: float
    n: int
    variance: float
    skewness: float
    kurtosis_excess: float
    w_jb: float
    p_jb: float
    w_sw: float
    p_sw: float
    reject_jb: bool
    reject_sw: bool

    @field_validator("p_jb", "p_sw")
    @classmethod
    def validate_p_value(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"p-values must lie in [0, 1], got {v}")
        return v


class NormalityReport(BaseModel):
    """Per-bin normality tests plus the overall verdict."""

    bins: list[NormalityBin] = Field(default_factory=list)
    alpha: float = Field(default=0.05, description="Significance level")
    reject_fraction: float = Field(default=0.2, description="Fraction rule threshold")
    gaussian: bool = Field(..., description="Overall verdict: data consistent with Gaussian")
    warnings: list[str] = Field(default_factory=list)

    @property
    def rejected_bins(self) -> int:
        return sum(1 for b in self.bins if b.reject_jb or b.reject_sw)


# =============================================================================
# Comparison Types
# =============================================================================


class HSDistanceRow(BaseModel):
    """Hilbert-Schmidt distance of ρ̂_N to the largest-N reconstruction."""

    dim: int
    distance: float


class CovarianceDelta(BaseModel):
    """Elementwise difference between a Fock-derived covariance and Ĝ."""

    dim: int
    covariance: list[list[float]]
    delta: list[list[float]]
    max_abs_delta: float


class ComparisonReport(BaseModel):
    """Gaussian vs Fock comparison tables."""

    reference_dim: Optional[int] = None
    hs_distances: list[HSDistanceRow] = Field(default_factory=list)
    covariance_deltas: list[CovarianceDelta] = Field(default_factory=list)
    gaussian_log_likelihood_per_sample: Optional[float] = None
    fock_log_likelihood_per_sample: Optional[float] = None
    degradation: dict[str, float] = Field(
        default_factory=dict, description="Per-model likelihood degradation factors"
    )
    warnings: list[str] = Field(default_factory=list)


# =============================================================================
# Run Configuration
# =============================================================================


class RunConfig(BaseModel):
    """Options shared by every command; recorded in each JSON output."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, description="Seed of the run's random generator")
    out: str = Field(default=".", description="Output directory")
    eta: Optional[float] = Field(None, description="Detection efficiency override")

    @field_validator("seed")
    @classmethod
    def validate_seed(cls, v: int) -> int:
        if not 0 <= v < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got: {v}")
        return v

    @field_validator("eta")
    @classmethod
    def validate_eta(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 < v <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got: {v}")
        return v


class SimulateConfig(RunConfig):
    """``simulate``: synthesize a dataset from a Gaussian state."""

    state: str = Field(
        default="vacuum",
        description="'vacuum', 'vacuum2' or 'file:<path>' to a covariance JSON",
    )
    phases: int = Field(default=31, description="LO phases per setting group")
    per_bin: int = Field(default=10_000, description="Samples per phase")
    arm_phase: bool = Field(default=True, description="Add the ψ = π/2 group for two modes")
    ramp: bool = Field(default=False, description="Draw LO phases uniformly (one mode)")
    mixture_weight: Optional[float] = Field(
        None, description="Weight of the broad component of a non-Gaussian mixture"
    )
    mixture_scale: float = Field(default=6.0, description="Variance scale of that component")
    output: str = Field(default="dataset.csv", description="Dataset file name")

    @field_validator("phases")
    @classmethod
    def validate_phases(cls, v: int) -> int:
        if v < 3:
            raise ValueError(f"At least 3 phases are required, got: {v}")
        return v

    @field_validator("per_bin")
    @classmethod
    def validate_per_bin(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"per_bin must be at least 1, got: {v}")
        return v


class FitGaussianConfig(RunConfig):
    """``fit-gaussian``: maximum-likelihood covariance estimate."""

    data: str = Field(..., description="Dataset CSV")
    bins: int = Field(default=31, description="Phase bins per setting group")
    max_iterations: int = Field(default=10_000)
    residual_tolerance: float = Field(default=1e-10)
    likelihood_tolerance: float = Field(default=1e-9)
    relaxation: float = Field(default=0.5)
    damping: float = Field(default=0.5)
    min_bin_count: int = Field(default=10)
    centered: bool = Field(default=True, description="Use mean-subtracted squared sums")
    project: bool = Field(default=True, description="Project unphysical estimates")
    output: str = Field(default="gaussian_report.json")

    @field_validator("bins")
    @classmethod
    def validate_bins(cls, v: int) -> int:
        if v < 3:
            raise ValueError(f"At least 3 phase bins are required, got: {v}")
        return v

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(
            max_iterations=self.max_iterations,
            residual_tolerance=self.residual_tolerance,
            likelihood_tolerance=self.likelihood_tolerance,
            relaxation=self.relaxation,
            damping=self.damping,
            min_bin_count=self.min_bin_count,
            centered=self.centered,
            project_unphysical=self.project,
        )


class FitFockConfig(RunConfig):
    """``fit-fock``: truncated Fock-space reconstruction plus Wigner grid."""

    data: str = Field(..., description="Dataset CSV")
    dim: int = Field(default=25)
    phase_bins: int = Field(default=31)
    quad_bins: int = Field(default=31)
    convolve: bool = Field(default=True)
    max_iterations: int = Field(default=5000)
    tolerance: float = Field(default=1e-9)
    grid_points: int = Field(default=61, description="Wigner grid points per axis")
    grid_extent: float = Field(default=6.0, description="Wigner grid half-width")

    @field_validator("grid_points")
    @classmethod
    def validate_grid_points(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"grid_points must be at least 2, got: {v}")
        return v

    @field_validator("grid_extent")
    @classmethod
    def validate_grid_extent(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError(f"grid_extent must be positive, got: {v}")
        return v

    def fock_config(self) -> FockConfig:
        return FockConfig(
            dim=self.dim,
            phase_bins=self.phase_bins,
            quad_bins=self.quad_bins,
            convolve=self.convolve,
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
        )


class NormtestConfig(RunConfig):
    """``normtest``: per-bin Jarque-Bera and Shapiro-Wilk tests."""

    data: str = Field(..., description="Dataset CSV")
    bin_size: int = Field(default=10_000)
    alpha: float = Field(default=0.05)
    reject_fraction: float = Field(default=0.2)
    output: str = Field(default="normality")

    @field_validator("alpha", "reject_fraction")
    @classmethod
    def validate_fraction(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"Value must lie in (0, 1), got: {v}")
        return v


class CompareConfig(RunConfig):
    """``compare``: Gaussian fit against Fock reconstructions."""

    gaussian: Optional[str] = Field(None, description="Gaussian report JSON")
    fock: list[str] = Field(default_factory=list, description="Density-matrix JSON files")
    against_gaussian: Optional[str] = Field(None, description="Second Gaussian report")
    against_fock: Optional[str] = Field(None, description="Second density-matrix JSON")
    output: str = Field(default="comparison.json")


class FiguresConfig(RunConfig):
    """``make-figures``: CSV inputs for HS-distance, normality and Wigner plots."""

    data: str = Field(..., description="Dataset CSV")
    dims: list[int] = Field(default_factory=lambda: [8, 12, 16, 20, 25, 30])
    bins: int = Field(default=31)
    bin_size: int = Field(default=10_000)
    grid_points: int = Field(default=61)
    grid_extent: float = Field(default=6.0)
    convolve: bool = Field(default=True)

    @field_validator("dims")
    @classmethod
    def validate_dims(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("At least one Fock dimension is required")
        for dim in v:
            if not 2 <= dim <= 64:
                raise ValueError(f"Fock dimensions must lie in [2, 64], got: {dim}")
        return sorted(set(v))
