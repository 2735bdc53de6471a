"""
Maximum-likelihood estimation of Gaussian covariance matrices from binned homodyne data.

For bins h with projection vectors w_h, counts n_h and squared sums y_h the
log-likelihood (up to a G-independent constant) is

    log L(G) = −½ Σ_h n_h log σ_h² − Σ_h y_h / (2σ_h²),    σ_h² = w_hᵀGw_h + δ_η²

and its extremal equation RG = DG with

    D = Σ_h n_h/σ_h² w_h w_hᵀ,    R = Σ_h y_h/σ_h⁴ w_h w_hᵀ

is solved by iterating G ← D⁻¹RGRD⁻¹, which preserves positive semidefiniteness.
The same code handles one mode (2×2) and two modes (4×4).
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import linalg

from homodyne_forge.dataset import bin_by_phase, merge_sparse_bins
from homodyne_forge.gaussian import (
    check_physical,
    project_to_physical,
    projection_matrix,
)
from homodyne_forge.models import (
    BinnedStats,
    CovarianceMatrix,
    DisplacementVector,
    EstimatorConfig,
    EstimatorReport,
    HomodyneDataset,
    HomodyneForgeError,
    ModeSelector,
    Setting,
    efficiency_noise,
)

logger = logging.getLogger(__name__)


class IllPosedError(HomodyneForgeError):
    """Raised when the measured settings do not determine every covariance entry.

    ``missing_directions`` holds symmetric matrices E with wᵀEw = 0 for every
    measured w, i.e. the combinations of entries the data cannot see.
    """

    def __init__(self, message: str, missing_directions: Optional[list[np.ndarray]] = None):
        super().__init__(message)
        self.missing_directions = missing_directions or []


class LikelihoodDomainError(HomodyneForgeError):
    """Raised when a bin variance σ_h² is not strictly positive."""

    pass


# =============================================================================
# Design Helpers
# =============================================================================


def _upper_pairs(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(dim) for j in range(i, dim)]


def design_matrix(W: np.ndarray) -> np.ndarray:
    """Rows map the independent entries of G to wᵀGw (off-diagonals counted twice)."""
    dim = W.shape[1]
    columns = [W[:, i] * W[:, j] * (1.0 if i == j else 2.0) for i, j in _upper_pairs(dim)]
    return np.stack(columns, axis=1)


def _vector_to_matrix(v: np.ndarray, dim: int) -> np.ndarray:
    matrix = np.zeros((dim, dim))
    for k, (i, j) in enumerate(_upper_pairs(dim)):
        matrix[i, j] = matrix[j, i] = v[k]
    return matrix


@lru_cache(maxsize=64)
def _projection_rows(
    keys: tuple[tuple[float, int, float, float], ...], mode_count: int
) -> np.ndarray:
    settings = [
        Setting(phase=phase, bs_angle=bs, selector=ModeSelector(sel), arm_phase=arm)
        for bs, sel, arm, phase in keys
    ]
    rows = projection_matrix(settings, mode_count)
    rows.setflags(write=False)
    return rows


def _projections(stats: BinnedStats) -> np.ndarray:
    keys = tuple(record.setting.sort_key() for record in stats.bins)
    return _projection_rows(keys, stats.mode_count)


def missing_directions(stats: BinnedStats) -> list[np.ndarray]:
    """Symmetric matrices invisible to every measured projection."""
    W = _projections(stats)
    dim = 2 * stats.mode_count
    if W.shape[0] == 0:
        return [_vector_to_matrix(v, dim) for v in np.eye(dim * (dim + 1) // 2)]
    null = linalg.null_space(design_matrix(W))
    return [_vector_to_matrix(null[:, k], dim) for k in range(null.shape[1])]


def require_complete(stats: BinnedStats) -> None:
    """Raise :class:`IllPosedError` unless the settings determine all of G."""
    if not stats.bins:
        raise IllPosedError("No bins to fit")
    dim = 2 * stats.mode_count
    needed = dim * (dim + 1) // 2
    rank = int(np.linalg.matrix_rank(design_matrix(_projections(stats))))
    if rank < needed:
        directions = missing_directions(stats)
        raise IllPosedError(
            f"Settings determine only {rank} of {needed} covariance entries; "
            f"{len(directions)} direction(s) are unobserved",
            directions,
        )


def _variances(G: np.ndarray, W: np.ndarray, noise: float) -> np.ndarray:
    sigma2 = np.einsum("hi,ij,hj->h", W, G, W) + noise
    if np.any(sigma2 <= 0.0):
        raise LikelihoodDomainError("Non-positive bin variance σ_h²; G is not positive definite")
    return sigma2


def _entries(G: CovarianceMatrix | np.ndarray) -> np.ndarray:
    return G.entries if isinstance(G, CovarianceMatrix) else np.asarray(G, dtype=float)


# =============================================================================
# Likelihood and Extremal Equation
# =============================================================================


def log_likelihood(
    G: CovarianceMatrix | np.ndarray, stats: BinnedStats, eta: float, centered: bool = True
) -> float:
    """−½ Σ n_h log σ_h² − Σ y_h/(2σ_h²).

    Raises:
        LikelihoodDomainError: If any σ_h² ≤ 0
    """
    sigma2 = _variances(_entries(G), _projections(stats), efficiency_noise(eta))
    n = stats.counts()
    y = stats.squares(centered)
    return float(-0.5 * np.sum(n * np.log(sigma2)) - np.sum(y / (2.0 * sigma2)))


def log_likelihood_per_sample(
    G: CovarianceMatrix | np.ndarray, stats: BinnedStats, eta: float, centered: bool = True
) -> float:
    """Full Gaussian log-likelihood per sample, including the −½ log 2π constant."""
    total = stats.total_count
    return (log_likelihood(G, stats, eta, centered) - 0.5 * total * np.log(2.0 * np.pi)) / total


def build_D(
    G: CovarianceMatrix | np.ndarray, stats: BinnedStats, eta: float
) -> np.ndarray:
    """D = Σ_h n_h/σ_h² w_h w_hᵀ."""
    W = _projections(stats)
    sigma2 = _variances(_entries(G), W, efficiency_noise(eta))
    return np.einsum("h,hi,hj->ij", stats.counts() / sigma2, W, W)


def build_R(
    G: CovarianceMatrix | np.ndarray, stats: BinnedStats, eta: float, centered: bool = True
) -> np.ndarray:
    """R = Σ_h y_h/σ_h⁴ w_h w_hᵀ."""
    W = _projections(stats)
    sigma2 = _variances(_entries(G), W, efficiency_noise(eta))
    return np.einsum("h,hi,hj->ij", stats.squares(centered) / sigma2**2, W, W)


def likelihood_gradient(
    G: CovarianceMatrix | np.ndarray, stats: BinnedStats, eta: float, centered: bool = True
) -> np.ndarray:
    """Matrix derivative ½(R − D) of log L, so d/dt log L(G + tE) = Tr[½(R − D)E]."""
    return 0.5 * (build_R(G, stats, eta, centered) - build_D(G, stats, eta))


def extremal_residual(
    G: CovarianceMatrix | np.ndarray, stats: BinnedStats, eta: float, centered: bool = True
) -> float:
    """‖RG − DG‖_F / ‖DG‖_F."""
    matrix = _entries(G)
    D = build_D(matrix, stats, eta)
    R = build_R(matrix, stats, eta, centered)
    DG = D @ matrix
    return float(np.linalg.norm(R @ matrix - DG) / np.linalg.norm(DG))


def _fixed_point_map(G: np.ndarray, stats: BinnedStats, eta: float, centered: bool) -> np.ndarray:
    D = build_D(G, stats, eta)
    R = build_R(G, stats, eta, centered)
    try:
        K = np.linalg.solve(D, R)
    except np.linalg.LinAlgError as e:
        raise IllPosedError("D is singular", missing_directions(stats)) from e
    if np.linalg.cond(D) > 1e12:
        raise IllPosedError("D is numerically singular", missing_directions(stats))
    update = K @ G @ K.T
    return 0.5 * (update + update.T)


def iterate_once(
    G: CovarianceMatrix, stats: BinnedStats, eta: float, centered: bool = True
) -> CovarianceMatrix:
    """One undamped step G ← D⁻¹RGRD⁻¹ (symmetrized).

    Raises:
        IllPosedError: If D is singular
    """
    return CovarianceMatrix(entries=_fixed_point_map(G.entries, stats, eta, centered))


# =============================================================================
# Estimators
# =============================================================================


def _relaxed_step(
    G: np.ndarray,
    current: float,
    stats: BinnedStats,
    eta: float,
    config: EstimatorConfig,
) -> tuple[np.ndarray, float, bool]:
    """Apply one relaxed update, damping the step while the likelihood drops.

    When no damped step keeps the likelihood, G and its value come back unchanged.
    """
    target = _fixed_point_map(G, stats, eta, config.centered)
    allowed = config.likelihood_tolerance * max(1.0, abs(current))
    alpha = config.relaxation
    for attempt in range(config.max_halvings + 1):
        candidate = (1.0 - alpha) * G + alpha * target
        value = log_likelihood(candidate, stats, eta, config.centered)
        if value >= current - allowed:
            return candidate, value, True
        alpha = config.relaxation * config.damping * 0.5**attempt
    return G, current, False


def estimate(
    stats: BinnedStats, eta: float, config: Optional[EstimatorConfig] = None
) -> EstimatorReport:
    """Fit G by the relaxed fixed-point iteration of the extremal equation.

    Non-convergence is reported through ``converged=False`` and a warning.

    Raises:
        IllPosedError: If the settings do not determine G
    """
    config = config or EstimatorConfig()
    stats = merge_sparse_bins(stats, config.min_bin_count)
    require_complete(stats)
    warnings = list(stats.warnings)

    dim = 2 * stats.mode_count
    if config.initial_G is not None:
        if config.initial_G.dimension != dim:
            raise IllPosedError(
                f"Initial matrix is {config.initial_G.dimension}×{config.initial_G.dimension}, "
                f"data need {dim}×{dim}"
            )
        G = np.array(config.initial_G.entries)
    else:
        G = 0.5 * np.eye(dim)

    current = log_likelihood(G, stats, eta, config.centered)
    trace = [current]
    residual = extremal_residual(G, stats, eta, config.centered)
    iterations = 0
    stagnated = False

    while residual > config.residual_tolerance and iterations < config.max_iterations:
        G, current, improved = _relaxed_step(G, current, stats, eta, config)
        if not improved:
            stagnated = True
            break
        trace.append(current)
        iterations += 1
        residual = extremal_residual(G, stats, eta, config.centered)

    converged = residual <= config.residual_tolerance
    if not converged:
        message = (
            f"No convergence after {iterations} iterations (residual {residual:.3e} > "
            f"{config.residual_tolerance:.1e})"
        )
        logger.warning(message)
        warnings.append(message)
    if stagnated:
        message = (
            f"Likelihood stagnated after {iterations} iterations: no damped step "
            f"within {config.max_halvings} halvings kept log L"
        )
        logger.warning(message)
        warnings.append(message)
    logger.info("Gaussian fit: %d iterations, residual %.3e", iterations, residual)

    fitted = CovarianceMatrix(entries=G)
    physicality = check_physical(fitted)
    projected = False
    if not physicality.is_physical:
        message = (
            f"Estimate violates the uncertainty relation "
            f"(min symplectic eigenvalue {physicality.min_symplectic_eigenvalue:.6g})"
        )
        logger.warning(message)
        warnings.append(message)
        if config.project_unphysical:
            fitted = project_to_physical(fitted)
            physicality = check_physical(fitted)
            projected = True
            warnings.append("Projected the estimate onto the physical boundary")

    return EstimatorReport(
        covariance=fitted,
        displacement=estimate_displacement(stats, eta, fitted),
        iterations_used=iterations,
        converged=converged,
        log_likelihood_trace=trace,
        final_residual=residual,
        physicality=physicality,
        projected=projected,
        eta=eta,
        n_samples=stats.total_count,
        log_likelihood_per_sample=log_likelihood_per_sample(fitted, stats, eta, config.centered),
        warnings=warnings,
    )


def _require_two_mode_plan(stats: BinnedStats) -> None:
    phases: dict[tuple[float, int], set[float]] = {}
    for record in stats.bins:
        s = record.setting
        phases.setdefault((s.bs_angle, int(s.selector)), set()).add(s.phase)

    missing = []
    for selector in (ModeSelector.B1, ModeSelector.B2):
        if len(phases.get((0.0, int(selector)), set())) < 3:
            missing.append(f"uncoupled detection on port b{int(selector)}")
    if not any(bs != 0.0 and len(p) >= 3 for (bs, _), p in phases.items()):
        missing.append("a beam-splitter (ϑ ≠ 0) detection group")
    if missing:
        raise IllPosedError(
            "Two-mode settings need at least 3 phases for " + ", ".join(missing),
            missing_directions(stats),
        )


def estimate_two_mode(
    stats: BinnedStats, eta: float, config: Optional[EstimatorConfig] = None
) -> EstimatorReport:
    """Fit a 4×4 covariance from uncoupled and beam-splitter detections.

    Raises:
        IllPosedError: If required setting groups are absent or the settings
            leave covariance entries undetermined
    """
    if stats.mode_count != 2:
        raise IllPosedError("estimate_two_mode requires two-mode statistics")
    _require_two_mode_plan(stats)
    return estimate(stats, eta, config)


def estimate_displacement(
    stats: BinnedStats, eta: float, G: Optional[CovarianceMatrix] = None
) -> Optional[DisplacementVector]:
    """Weighted least-squares fit of per-bin means x̄_h to w_hᵀX̄.

    Weights are n_h/σ_h² (unit when G is not given). Returns ``None`` when the
    projections do not span phase space.
    """
    W = _projections(stats)
    if np.linalg.matrix_rank(W) < W.shape[1]:
        return None
    n = stats.counts()
    if G is not None:
        weights = n / _variances(G.entries, W, efficiency_noise(eta))
    else:
        weights = n
    root = np.sqrt(weights)
    means = np.array([b.mean for b in stats.bins])
    solution, *_ = np.linalg.lstsq(W * root[:, None], means * root, rcond=None)
    return DisplacementVector(entries=solution)


def oracle_lsq_fit(stats: BinnedStats, eta: float, centered: bool = True) -> CovarianceMatrix:
    """Unweighted least-squares solve of y_h/n_h − δ_η² = w_hᵀGw_h.

    No positivity is enforced; this is an independent check of :func:`estimate`.

    Raises:
        IllPosedError: If the settings do not determine G
    """
    require_complete(stats)
    W = _projections(stats)
    target = stats.squares(centered) / stats.counts() - efficiency_noise(eta)
    solution, *_ = np.linalg.lstsq(design_matrix(W), target, rcond=None)
    return CovarianceMatrix(entries=_vector_to_matrix(solution, W.shape[1]))


def fit_dataset(
    dataset: HomodyneDataset, n_bins: int, config: Optional[EstimatorConfig] = None
) -> EstimatorReport:
    """Bin a dataset by phase and fit its covariance matrix."""
    stats = bin_by_phase(dataset, n_bins)
    if dataset.mode_count == 2:
        return estimate_two_mode(stats, dataset.efficiency, config)
    return estimate(stats, dataset.efficiency, config)


def degradation_factor(ll_a: float, n_a: int, ll_b: float, n_b: int) -> float:
    """Ratio of per-sample log-likelihoods (ll_b/n_b)/(ll_a/n_a).

    With negative log-likelihoods a value above 1 means dataset b is fitted
    worse than dataset a.
    """
    if n_a < 1 or n_b < 1:
        raise ValueError("Sample counts must be positive")
    per_a = ll_a / n_a
    if per_a == 0.0:
        raise ValueError("Reference log-likelihood per sample is zero")
    return (ll_b / n_b) / per_a
