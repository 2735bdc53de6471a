"""
Homodyne datasets: synthesis, phase binning and sufficient statistics.

Samples are η-rescaled: a setting with projection vector w yields normal
outcomes with mean wᵀX̄ and variance wᵀGw + δ_η², δ_η² = (1 − η)/(2η).

All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), so a
given seed reproduces a dataset bit for bit.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from homodyne_forge.gaussian import check_physical, projection_vector
from homodyne_forge.models import (
    BinnedStats,
    BinRecord,
    CovarianceMatrix,
    DisplacementVector,
    HomodyneDataset,
    HomodyneForgeError,
    ModeSelector,
    Setting,
    efficiency_noise,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class DatasetError(HomodyneForgeError):
    """Raised for invalid datasets or synthesis requests."""

    pass


# =============================================================================
# Measurement Plans
# =============================================================================


def phase_centers(n_bins: int) -> np.ndarray:
    """Midpoints of ``n_bins`` equal intervals of [0, 2π)."""
    return (np.arange(n_bins) + 0.5) * TWO_PI / n_bins


def single_mode_plan(n_phases: int, per_bin: int) -> list[tuple[Setting, int]]:
    """Equally spaced LO phases (at the bin midpoints) with ``per_bin`` samples each."""
    return [(Setting(phase=float(p)), per_bin) for p in phase_centers(n_phases)]


def two_mode_plan(
    n_phases: int, per_bin: int, include_arm_phase: bool = True
) -> list[tuple[Setting, int]]:
    """Beam-splitter plan reaching all ten entries of a two-mode covariance.

    Uncoupled detection of both ports (ϑ = 0) plus the balanced beam splitter
    (ϑ = π/4) on both ports. With ``include_arm_phase`` a fifth group adds a
    π/2 phase on input mode 2 before the balanced beam splitter (port b₂),
    which makes the antisymmetric cross term G₁₄ − G₂₃ visible.
    """
    groups: list[tuple[float, ModeSelector, float]] = [
        (0.0, ModeSelector.B1, 0.0),
        (0.0, ModeSelector.B2, 0.0),
        (np.pi / 4, ModeSelector.B1, 0.0),
        (np.pi / 4, ModeSelector.B2, 0.0),
    ]
    if include_arm_phase:
        groups.append((np.pi / 4, ModeSelector.B2, np.pi / 2))

    plan = []
    for bs_angle, selector, arm_phase in groups:
        for phase in phase_centers(n_phases):
            setting = Setting(
                phase=float(phase), bs_angle=bs_angle, selector=selector, arm_phase=arm_phase
            )
            plan.append((setting, per_bin))
    return plan


# =============================================================================
# Synthesis
# =============================================================================


def _validate_request(G: CovarianceMatrix, eta: float, plan: Sequence[tuple[Setting, int]]) -> None:
    if not 0.0 < eta <= 1.0:
        raise DatasetError(f"Efficiency must lie in (0, 1], got: {eta}")
    if not check_physical(G).is_physical:
        raise DatasetError("Cannot synthesize data from an unphysical covariance matrix")
    if not plan:
        raise DatasetError("At least one measurement setting is required")
    for setting, n in plan:
        if n < 1:
            raise DatasetError(f"Setting {setting} requests {n} samples; at least 1 is required")


def _columns(plan: Sequence[tuple[Setting, int]]) -> dict[str, np.ndarray]:
    counts = [n for _, n in plan]
    return {
        "phases": np.repeat([s.phase for s, _ in plan], counts),
        "bs_angles": np.repeat([s.bs_angle for s, _ in plan], counts),
        "selectors": np.repeat([int(s.selector) for s, _ in plan], counts),
        "arm_phases": np.repeat([s.arm_phase for s, _ in plan], counts),
    }


def synthesize(
    G: CovarianceMatrix,
    mean: Optional[DisplacementVector],
    eta: float,
    plan: Sequence[tuple[Setting, int]],
    seed: int,
    metadata: str = "",
) -> HomodyneDataset:
    """Draw η-rescaled homodyne samples from a Gaussian state.

    Args:
        G: Physical covariance matrix of the state
        mean: Displacement (zero when omitted)
        eta: Detection efficiency in (0, 1]
        plan: ``(setting, n)`` pairs, sampled in order
        seed: Generator seed

    Raises:
        DatasetError: If G is unphysical, η is out of range or a count is < 1
    """
    _validate_request(G, eta, plan)
    modes = G.mode_count
    centre = np.zeros(2 * modes) if mean is None else mean.entries
    noise = efficiency_noise(eta)
    rng = np.random.default_rng(seed)

    chunks = []
    for setting, n in plan:
        w = projection_vector(setting, modes).entries
        sigma = np.sqrt(float(w @ G.entries @ w) + noise)
        chunks.append(rng.normal(float(w @ centre), sigma, size=n))

    logger.debug("Synthesized %d samples over %d settings", sum(n for _, n in plan), len(plan))
    return HomodyneDataset(
        values=np.concatenate(chunks),
        efficiency=eta,
        mode_count=modes,
        metadata=metadata,
        **_columns(plan),
    )


def synthesize_ramp(
    G: CovarianceMatrix,
    mean: Optional[DisplacementVector],
    eta: float,
    n_samples: int,
    seed: int,
    metadata: str = "",
) -> HomodyneDataset:
    """Single-mode samples with LO phases drawn uniformly from [0, 2π).

    Mimics a continuously scanned LO phase rather than discrete settings.
    """
    if n_samples < 1:
        raise DatasetError("At least one sample is required")
    if G.mode_count != 1:
        raise DatasetError("Phase-ramp synthesis supports single-mode states only")
    _validate_request(G, eta, [(Setting(phase=0.0), n_samples)])
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, TWO_PI, size=n_samples)
    u = np.stack([np.cos(phases), np.sin(phases)], axis=1)
    centre = np.zeros(2) if mean is None else mean.entries
    variances = np.einsum("ni,ij,nj->n", u, G.entries, u) + efficiency_noise(eta)
    values = u @ centre + np.sqrt(variances) * rng.standard_normal(n_samples)
    return HomodyneDataset(
        phases=phases,
        bs_angles=np.zeros(n_samples),
        selectors=np.ones(n_samples, dtype=int),
        arm_phases=np.zeros(n_samples),
        values=values,
        efficiency=eta,
        mode_count=1,
        metadata=metadata,
    )


def synthesize_mixture(
    G: CovarianceMatrix,
    eta: float,
    plan: Sequence[tuple[Setting, int]],
    seed: int,
    weight: float = 0.3,
    scale: float = 6.0,
    metadata: str = "",
) -> HomodyneDataset:
    """Two-component Gaussian mixture used as a non-Gaussian test fixture.

    With probability ``weight`` a sample has variance ``scale·wᵀGw + δ_η²``,
    otherwise ``wᵀGw + δ_η²``. Both components are centred at zero.
    """
    if not 0.0 < weight < 1.0:
        raise DatasetError(f"Mixture weight must lie in (0, 1), got: {weight}")
    if scale <= 0.0:
        raise DatasetError(f"Mixture scale must be positive, got: {scale}")
    _validate_request(G, eta, plan)
    noise = efficiency_noise(eta)
    rng = np.random.default_rng(seed)

    chunks = []
    for setting, n in plan:
        w = projection_vector(setting, G.mode_count).entries
        base = float(w @ G.entries @ w)
        wide = rng.random(n) < weight
        sigma = np.where(wide, np.sqrt(scale * base + noise), np.sqrt(base + noise))
        chunks.append(sigma * rng.standard_normal(n))

    return HomodyneDataset(
        values=np.concatenate(chunks),
        efficiency=eta,
        mode_count=G.mode_count,
        metadata=metadata,
        **_columns(plan),
    )


# =============================================================================
# Binning
# =============================================================================


def _group_indices(dataset: HomodyneDataset) -> list[tuple[tuple[float, int, float], np.ndarray]]:
    """Sample indices per (ϑ, port, ψ) group, groups in ascending key order."""
    keys = np.stack(
        [dataset.bs_angles, dataset.selectors.astype(float), dataset.arm_phases], axis=1
    )
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    groups = []
    for g, key in enumerate(unique):
        groups.append(((float(key[0]), int(key[1]), float(key[2])), np.flatnonzero(inverse == g)))
    return groups


def phase_bin_index(phases: np.ndarray, n_bins: int) -> np.ndarray:
    """Index of the equal-width [0, 2π) interval each phase falls into."""
    index = np.floor(np.mod(phases, TWO_PI) / (TWO_PI / n_bins)).astype(int)
    return np.clip(index, 0, n_bins - 1)


def bin_by_phase(dataset: HomodyneDataset, n_bins: int) -> BinnedStats:
    """Group samples into equal-width phase bins per (ϑ, port, ψ) group.

    Empty bins are dropped with a warning. Bins are ordered by group, then phase.

    Raises:
        DatasetError: If the dataset is empty or ``n_bins`` < 3
    """
    if n_bins < 3:
        raise DatasetError(f"At least 3 phase bins are required, got: {n_bins}")
    if len(dataset) == 0:
        raise DatasetError("Cannot bin an empty dataset")

    centers = phase_centers(n_bins)
    records: list[BinRecord] = []
    warnings: list[str] = []
    empty = 0

    for (bs_angle, selector, arm_phase), idx in _group_indices(dataset):
        x = dataset.values[idx]
        b = phase_bin_index(dataset.phases[idx], n_bins)
        n = np.bincount(b, minlength=n_bins)
        sum_x = np.bincount(b, weights=x, minlength=n_bins)
        y = np.bincount(b, weights=x * x, minlength=n_bins)
        means = np.divide(sum_x, n, out=np.zeros(n_bins), where=n > 0)
        y_centered = np.bincount(b, weights=(x - means[b]) ** 2, minlength=n_bins)

        for k in range(n_bins):
            if n[k] == 0:
                empty += 1
                continue
            setting = Setting(
                phase=float(centers[k]),
                bs_angle=bs_angle,
                selector=ModeSelector(selector),
                arm_phase=arm_phase,
            )
            records.append(
                BinRecord(
                    setting=setting,
                    n=int(n[k]),
                    sum_x=float(sum_x[k]),
                    y=float(y[k]),
                    y_centered=float(min(y_centered[k], y[k])),
                )
            )

    if empty:
        message = f"Dropped {empty} empty phase bin(s)"
        logger.warning(message)
        warnings.append(message)

    return BinnedStats(bins=records, mode_count=dataset.mode_count, dropped=0, warnings=warnings)


def _merge(records: list[BinRecord]) -> BinRecord:
    n = sum(r.n for r in records)
    sum_x = sum(r.sum_x for r in records)
    y = sum(r.y for r in records)
    phase = sum(r.n * r.setting.phase for r in records) / n
    return BinRecord(
        setting=records[0].setting.model_copy(update={"phase": phase}),
        n=n,
        sum_x=sum_x,
        y=y,
        y_centered=max(0.0, min(y, y - sum_x * sum_x / n)),
    )


def merge_sparse_bins(stats: BinnedStats, min_count: int = 10) -> BinnedStats:
    """Merge bins holding fewer than ``min_count`` samples into a neighbour.

    A sparse bin joins the next bin of its group (the previous one for the last
    bin). The merged setting sits at the count-weighted mean phase. A group whose
    total is below ``min_count`` collapses into a single bin.
    """
    if min_count <= 1:
        return stats

    grouped: dict[tuple[float, int, float], list[BinRecord]] = {}
    for record in stats.bins:
        grouped.setdefault(record.setting.group_key(), []).append(record)

    merged_bins: list[BinRecord] = []
    merges = 0
    for key in sorted(grouped):
        pending: list[BinRecord] = []
        out: list[BinRecord] = []
        for record in grouped[key]:
            pending.append(record)
            if sum(r.n for r in pending) >= min_count:
                out.append(_merge(pending) if len(pending) > 1 else pending[0])
                merges += len(pending) - 1
                pending = []
        if pending:
            if out:
                out[-1] = _merge([out[-1], *pending])
                merges += len(pending)
            else:
                out.append(_merge(pending) if len(pending) > 1 else pending[0])
                merges += len(pending) - 1
        merged_bins.extend(out)

    warnings = list(stats.warnings)
    if merges:
        message = f"Merged {merges} phase bin(s) with fewer than {min_count} samples"
        logger.warning(message)
        warnings.append(message)
    return BinnedStats(
        bins=merged_bins, mode_count=stats.mode_count, dropped=stats.dropped, warnings=warnings
    )


def per_bin_variances(stats: BinnedStats, centered: bool = True) -> np.ndarray:
    """Sample second moments y_h/n_h (or the mean-subtracted version)."""
    return stats.squares(centered) / stats.counts()
