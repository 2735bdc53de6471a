"""
Normality tests of homodyne samples grouped by LO phase.

Jarque-Bera uses the biased sample skewness S and excess kurtosis K,
W_JB = (n/6)(S² + K²/4) with the χ²₂ survival p = exp(−W_JB/2).
Shapiro-Wilk comes from ``scipy.stats.shapiro`` (valid for 8 ≤ n ≤ 5000);
larger samples are split into near-equal chunks whose p-values are combined
with Fisher's method.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import stats

from homodyne_forge.models import (
    HomodyneDataset,
    HomodyneForgeError,
    NormalityBin,
    NormalityReport,
)

logger = logging.getLogger(__name__)

JB_MIN_SAMPLES = 4
SW_MIN_SAMPLES = 8
SW_MAX_SAMPLES = 5000
JB_CRITICAL_005 = 5.99


class NormalityError(HomodyneForgeError):
    """Raised for degenerate samples or unsupported sample sizes."""

    pass


def _sample(values: np.ndarray, minimum: int) -> np.ndarray:
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.shape[0] < minimum:
        raise NormalityError(f"At least {minimum} samples are required, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise NormalityError("Samples must be finite")
    return x


def jb_critical_value(alpha: float) -> float:
    """χ²₂ critical value of W_JB; the tabulated 5.99 at α = 0.05."""
    if alpha == 0.05:
        return JB_CRITICAL_005
    return float(-2.0 * math.log(alpha))


def _require_spread(x: np.ndarray) -> None:
    if np.ptp(x) == 0.0:
        raise NormalityError("Sample has zero variance")


# =============================================================================
# Moments
# =============================================================================


def central_moment(sample: np.ndarray, k: int) -> float:
    """μ_k = (1/n) Σ (x − x̄)^k."""
    x = _sample(sample, JB_MIN_SAMPLES)
    return float(stats.moment(x, moment=k))


def skewness(sample: np.ndarray) -> float:
    """S = μ₃ / μ₂^{3/2}."""
    x = _sample(sample, JB_MIN_SAMPLES)
    _require_spread(x)
    return float(stats.skew(x, bias=True))


def kurtosis_excess(sample: np.ndarray) -> float:
    """K = μ₄ / μ₂² − 3."""
    x = _sample(sample, JB_MIN_SAMPLES)
    _require_spread(x)
    return float(stats.kurtosis(x, fisher=True, bias=True))


# =============================================================================
# Tests
# =============================================================================


def jarque_bera(sample: np.ndarray) -> tuple[float, float]:
    """Return (W_JB, p) with p = exp(−W_JB/2)."""
    x = _sample(sample, JB_MIN_SAMPLES)
    _require_spread(x)
    S = stats.skew(x, bias=True)
    K = stats.kurtosis(x, fisher=True, bias=True)
    W = x.shape[0] / 6.0 * (S * S + 0.25 * K * K)
    return float(W), float(stats.chi2.sf(W, df=2))


def shapiro_wilk(sample: np.ndarray) -> tuple[float, float]:
    """Return (W_SW, p) for 8 ≤ n ≤ 5000.

    Raises:
        NormalityError: If n is out of range or all values are tied
    """
    x = _sample(sample, SW_MIN_SAMPLES)
    if x.shape[0] > SW_MAX_SAMPLES:
        raise NormalityError(
            f"Shapiro-Wilk supports at most {SW_MAX_SAMPLES} samples, got {x.shape[0]}; "
            "use shapiro_wilk_split"
        )
    _require_spread(x)
    result = stats.shapiro(x)
    return float(result.statistic), float(min(1.0, max(0.0, result.pvalue)))


def shapiro_wilk_split(
    sample: np.ndarray, chunk_size: int = SW_MAX_SAMPLES
) -> tuple[float, float]:
    """Shapiro-Wilk on near-equal chunks of at most ``chunk_size`` samples.

    Returns the mean W over chunks and the Fisher-combined p-value. Samples of
    at most ``chunk_size`` values are tested directly.
    """
    x = _sample(sample, SW_MIN_SAMPLES)
    if not SW_MIN_SAMPLES <= chunk_size <= SW_MAX_SAMPLES:
        raise NormalityError(
            f"Chunk size must lie in [{SW_MIN_SAMPLES}, {SW_MAX_SAMPLES}], got {chunk_size}"
        )
    if x.shape[0] <= chunk_size:
        return shapiro_wilk(x)

    parts = np.array_split(x, math.ceil(x.shape[0] / chunk_size))
    results = [shapiro_wilk(part) for part in parts]
    combined = stats.combine_pvalues([p for _, p in results], method="fisher")
    w_mean = float(np.mean([w for w, _ in results]))
    return w_mean, float(min(1.0, max(0.0, combined.pvalue)))


# =============================================================================
# Per-Bin Report
# =============================================================================


def _chunks(order: np.ndarray, bin_size: int) -> list[np.ndarray]:
    """Consecutive chunks of ``bin_size``; a short tail joins the last chunk
    unless it holds at least half a bin."""
    count = order.shape[0]
    full = count // bin_size
    if full == 0:
        return [order]
    chunks = [order[i * bin_size : (i + 1) * bin_size] for i in range(full)]
    tail = order[full * bin_size :]
    if tail.shape[0]:
        if tail.shape[0] >= bin_size // 2 and tail.shape[0] >= SW_MIN_SAMPLES:
            chunks.append(tail)
        else:
            chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks


def analyze_bin(values: np.ndarray, phase_center: float, alpha: float = 0.05) -> NormalityBin:
    """Variance, moments and both tests for one bin of samples."""
    x = _sample(values, SW_MIN_SAMPLES)
    _require_spread(x)
    w_jb, p_jb = jarque_bera(x)
    w_sw, p_sw = shapiro_wilk_split(x)
    return NormalityBin(
        phase_center=float(phase_center),
        n=int(x.shape[0]),
        variance=float(np.var(x)),
        skewness=float(stats.skew(x, bias=True)),
        kurtosis_excess=float(stats.kurtosis(x, fisher=True, bias=True)),
        w_jb=w_jb,
        p_jb=p_jb,
        w_sw=w_sw,
        p_sw=p_sw,
        reject_jb=bool(w_jb > jb_critical_value(alpha)),
        reject_sw=bool(p_sw <= alpha),
    )


def overall_verdict(bins: list[NormalityBin], alpha: float, reject_fraction: float) -> bool:
    """True when the bins are consistent with Gaussian data.

    Gaussianity is rejected when more than ``reject_fraction`` of the bins are
    rejected by either test, or when any bin is rejected by both tests at the
    Bonferroni level α / n_bins.
    """
    if not bins:
        return True
    either = sum(1 for b in bins if b.reject_jb or b.reject_sw)
    if either / len(bins) > reject_fraction:
        return False
    level = alpha / len(bins)
    return not any(b.p_jb <= level and b.p_sw <= level for b in bins)


def normality_report(
    dataset: HomodyneDataset,
    bin_size: int = 10_000,
    alpha: float = 0.05,
    reject_fraction: float = 0.2,
) -> NormalityReport:
    """Test consecutive phase-sorted bins of ``bin_size`` samples.

    Samples are grouped by (ϑ, port, ψ), sorted by phase and cut into bins;
    a dataset smaller than ``bin_size`` yields a single bin and a warning.
    Groups with fewer than eight samples and constant-valued bins are skipped
    with a warning.

    Raises:
        NormalityError: On invalid parameters or when no bin can be tested
    """
    if bin_size < SW_MIN_SAMPLES:
        raise NormalityError(f"Bin size must be at least {SW_MIN_SAMPLES}, got {bin_size}")
    if not 0.0 < alpha < 1.0:
        raise NormalityError(f"alpha must lie in (0, 1), got {alpha}")
    if len(dataset) < SW_MIN_SAMPLES:
        raise NormalityError(
            f"At least {SW_MIN_SAMPLES} samples are required, got {len(dataset)}"
        )

    warnings: list[str] = []
    if bin_size > len(dataset):
        message = f"bin_size {bin_size} exceeds the dataset size {len(dataset)}; using one bin"
        logger.warning(message)
        warnings.append(message)
        chunks = [np.arange(len(dataset))]
    else:
        keys = np.stack([dataset.bs_angles, dataset.selectors.astype(float), dataset.arm_phases])
        chunks = []
        for key in np.unique(keys.T, axis=0):
            members = np.flatnonzero(np.all(keys.T == key, axis=1))
            if members.shape[0] < SW_MIN_SAMPLES:
                message = (
                    f"Skipped setting group (ϑ={key[0]:.4g}, port={int(key[1])}, "
                    f"ψ={key[2]:.4g}): {members.shape[0]} samples < {SW_MIN_SAMPLES}"
                )
                logger.warning(message)
                warnings.append(message)
                continue
            order = members[np.argsort(dataset.phases[members], kind="stable")]
            chunks.extend(_chunks(order, bin_size))

    bins = []
    for idx in chunks:
        center = float(np.mean(dataset.phases[idx]))
        if np.ptp(dataset.values[idx]) == 0.0:
            message = f"Skipped constant-valued bin at phase {center:.4g} ({idx.shape[0]} samples)"
            logger.warning(message)
            warnings.append(message)
            continue
        bins.append(analyze_bin(dataset.values[idx], center, alpha))
    if not bins:
        raise NormalityError("No bin could be tested: " + "; ".join(warnings))
    gaussian = overall_verdict(bins, alpha, reject_fraction)
    report = NormalityReport(
        bins=bins,
        alpha=alpha,
        reject_fraction=reject_fraction,
        gaussian=gaussian,
        warnings=warnings,
    )
    logger.info(
        "Normality: %d/%d bins rejected, verdict %s",
        report.rejected_bins,
        len(bins),
        "Gaussian" if gaussian else "non-Gaussian",
    )
    return report
