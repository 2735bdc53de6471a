"""
Truncated Fock-space tomography baseline.

Covers:
- Harmonic-oscillator wavefunctions by the normalized three-term recurrence
- Binned, efficiency-convolved quadrature POVM elements
- Maximum-likelihood RρR iteration (diluted when a full step loses likelihood)
- Wigner functions, Hilbert-Schmidt distances and quadrature moments of ρ
- Fock representation of a Gaussian state for cross-checks

Quadrature eigenstates are |x⟩_θ = Σ_k ψ_k(x) e^{ikθ} |k⟩, so phase θ measures
X cos θ + Y sin θ in the same vacuum units as the Gaussian code.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg, special

from homodyne_forge.dataset import phase_bin_index, phase_centers
from homodyne_forge.gaussian import GaussianStateError, check_physical
from homodyne_forge.models import (
    CovarianceMatrix,
    DensityMatrix,
    DisplacementVector,
    FockConfig,
    FockReconstruction,
    HomodyneDataset,
    HomodyneForgeError,
    QuadraturePOVM,
    efficiency_noise,
)

logger = logging.getLogger(__name__)

MAX_DIM = 64
QUADRATURE_CUTOFF = 12.0
GL_NODES, GL_WEIGHTS = legendre.leggauss(8)
PROBABILITY_FLOOR = 1e-12


class FockError(HomodyneForgeError):
    """Raised for invalid Fock-space requests or reconstructions."""

    pass


# =============================================================================
# Wavefunctions and POVM Elements
# =============================================================================


def hermite_table(k_max: int, y: np.ndarray) -> np.ndarray:
    """ψ_k(y) for k = 0..k_max, shape (k_max + 1, len(y)).

    ψ₀ = π^{−1/4} e^{−y²/2}, ψ₁ = √2 y ψ₀,
    ψ_k = y √(2/k) ψ_{k−1} − √((k−1)/k) ψ_{k−2}.
    """
    if not 0 <= k_max <= MAX_DIM:
        raise FockError(f"Fock index must lie in [0, {MAX_DIM}], got: {k_max}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    table = np.empty((k_max + 1, y.shape[0]))
    table[0] = np.pi**-0.25 * np.exp(-0.5 * y * y)
    if k_max >= 1:
        table[1] = np.sqrt(2.0) * y * table[0]
    for k in range(2, k_max + 1):
        table[k] = y * np.sqrt(2.0 / k) * table[k - 1] - np.sqrt((k - 1) / k) * table[k - 2]
    return table


def hermite_wavefunction(k: int, y: float | np.ndarray) -> float | np.ndarray:
    """Normalized oscillator eigenfunction ψ_k(y)."""
    values = hermite_table(k, np.atleast_1d(y))[k]
    return float(values[0]) if np.ndim(y) == 0 else values


def _gauss_legendre(lo: float, hi: float, max_panel: float) -> tuple[np.ndarray, np.ndarray]:
    """Composite 8-node Gauss-Legendre nodes and weights on [lo, hi]."""
    panels = max(1, math.ceil((hi - lo) / max_panel))
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * GL_NODES[None, :]).reshape(-1)
    weights = (half[:, None] * GL_WEIGHTS[None, :]).reshape(-1)
    return nodes, weights


def _bin_operator(
    lo: float, hi: float, dim: int, noise_sd: float, max_panel: float
) -> np.ndarray:
    """Real matrix ∫ dy w(y) ψ(y)ψ(y)ᵀ for outcomes in [lo, hi].

    w(y) is the probability that noise of width ``noise_sd`` moves y into the bin
    (the indicator of [lo, hi] without noise). Infinite edges are allowed.
    """
    cutoff = QUADRATURE_CUTOFF + 6.0 * noise_sd
    if noise_sd > 0.0:
        y_lo = max(lo - 6.0 * noise_sd, -cutoff)
        y_hi = min(hi + 6.0 * noise_sd, cutoff)
    else:
        y_lo, y_hi = max(lo, -cutoff), min(hi, cutoff)
    if y_hi <= y_lo:
        return np.zeros((dim, dim))

    nodes, weights = _gauss_legendre(y_lo, y_hi, max_panel)
    if noise_sd > 0.0:
        inside = special.ndtr((hi - nodes) / noise_sd) - special.ndtr((lo - nodes) / noise_sd)
        weights = weights * inside
    table = hermite_table(dim - 1, nodes)
    return (table * weights) @ table.T


def _phase_factors(phase: float, dim: int) -> np.ndarray:
    k = np.arange(dim)
    return np.exp(1j * (k[:, None] - k[None, :]) * phase)


def povm_element(
    phase: float,
    center: float,
    width: float,
    eta: float,
    dim: int,
    max_panel: Optional[float] = None,
) -> np.ndarray:
    """Fock matrix of the bin [center ± width/2] at LO phase ``phase``.

    The element is ∫_bin dx ∫ dy κ_η(x, y) |y⟩⟨y| with κ_η the Gaussian
    efficiency kernel of variance δ_η²; for η = 1 it is ∫_bin |x⟩⟨x| dx.
    """
    if width <= 0.0:
        raise FockError(f"Bin width must be positive, got: {width}")
    if not 1 <= dim <= MAX_DIM:
        raise FockError(f"Fock dimension must lie in [1, {MAX_DIM}], got: {dim}")
    noise_sd = math.sqrt(efficiency_noise(eta))
    panel = max_panel or min(width, 0.25)
    real = _bin_operator(center - 0.5 * width, center + 0.5 * width, dim, noise_sd, panel)
    return real * _phase_factors(phase, dim)


def build_povm(dataset: HomodyneDataset, config: Optional[FockConfig] = None) -> QuadraturePOVM:
    """Pool a single-mode dataset into (phase bin, quadrature bin) frequencies.

    Quadrature bins split [min, max] of the data evenly; the first and last bins
    are open-ended so that each phase's elements resolve the identity.
    """
    config = config or FockConfig()
    if dataset.mode_count != 1:
        raise FockError("Fock reconstruction supports single-mode datasets only")
    if len(dataset) == 0:
        raise FockError("Cannot build a POVM from an empty dataset")

    values = dataset.values
    low, high = float(np.min(values)), float(np.max(values))
    if not high > low:
        raise FockError("Quadrature values span a zero-width range")

    P, Q, dim = config.phase_bins, config.quad_bins, config.dim
    edges = np.linspace(low, high, Q + 1)
    width = float(edges[1] - edges[0])
    q_index = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, Q - 1)
    p_index = phase_bin_index(dataset.phases, P)
    counts = np.bincount(p_index * Q + q_index, minlength=P * Q).astype(float)

    eta = dataset.efficiency
    noise_sd = math.sqrt(efficiency_noise(eta)) if config.convolve else 0.0
    panel = min(width, 0.25)
    lows = edges[:-1].copy()
    highs = edges[1:].copy()
    lows[0], highs[-1] = -np.inf, np.inf
    quad_ops = np.stack(
        [_bin_operator(lows[q], highs[q], dim, noise_sd, panel) for q in range(Q)]
    )

    centers = phase_centers(P)
    factors = np.stack([_phase_factors(phi, dim) for phi in centers])
    elements = (factors[:, None, :, :] * quad_ops[None, :, :, :]).reshape(P * Q, dim, dim)

    logger.debug(
        "Built %d POVM elements at N=%d (η=%.3g, convolve=%s)", P * Q, dim, eta, config.convolve
    )
    return QuadraturePOVM(
        phases=np.repeat(centers, Q),
        centers=np.tile(0.5 * (edges[:-1] + edges[1:]), P),
        widths=np.full(P * Q, width),
        elements=elements,
        counts=counts,
        eta=eta if config.convolve else 1.0,
    )


# =============================================================================
# Maximum-Likelihood Reconstruction
# =============================================================================


class _Likelihood:
    """Probabilities and log-likelihood of ρ for a fixed POVM."""

    def __init__(self, povm: QuadraturePOVM):
        dim = povm.dim
        self.flat = povm.elements.reshape(len(povm.elements), dim * dim)
        self.flat_conj = self.flat.conj()
        self.counts = povm.counts
        self.observed = povm.counts > 0
        self.frequencies = povm.frequencies
        self.dim = dim
        self.floored = False

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        p = np.real(self.flat_conj @ rho.reshape(-1))
        low = self.observed & (p < PROBABILITY_FLOOR)
        if np.any(low):
            self.floored = True
            p = np.where(low, PROBABILITY_FLOOR, p)
        return p

    def value(self, p: np.ndarray) -> float:
        q = p[self.observed] / np.sum(p)
        return float(np.sum(self.counts[self.observed] * np.log(q)))

    def r_operator(self, p: np.ndarray) -> np.ndarray:
        ratio = np.where(self.observed, self.frequencies / np.where(self.observed, p, 1.0), 0.0)
        R = (ratio @ self.flat).reshape(self.dim, self.dim)
        return 0.5 * (R + R.conj().T)


def _rr_step(rho: np.ndarray, R: np.ndarray, epsilon: Optional[float]) -> np.ndarray:
    M = R if epsilon is None else (np.eye(len(rho)) + epsilon * R) / (1.0 + epsilon)
    update = M @ rho @ M.conj().T
    update = 0.5 * (update + update.conj().T)
    return update / np.trace(update).real


def ml_reconstruct(
    povm: QuadraturePOVM,
    config: Optional[FockConfig] = None,
    initial: Optional[DensityMatrix] = None,
) -> FockReconstruction:
    """Iterate ρ ← RρR/Tr[RρR] with R = Σ_j (f_j/p_j) Π_j.

    A step that lowers Σ_j c_j log p_j is retried as the diluted update
    M ρ M with M = (I + εR)/(1 + ε), halving ε until the likelihood stops
    dropping. Iteration ends when the relative gain falls below
    ``config.tolerance`` or after ``config.max_iterations`` steps.
    """
    config = config or FockConfig()
    if float(np.sum(povm.counts)) <= 0.0:
        raise FockError("POVM counts are all zero")
    dim = povm.dim
    if initial is not None and initial.dim != dim:
        raise FockError(f"Initial state has dimension {initial.dim}, POVM has {dim}")

    model = _Likelihood(povm)
    rho = np.array(initial.entries) if initial is not None else np.eye(dim, dtype=complex) / dim
    p = model.probabilities(rho)
    current = model.value(p)
    trace = [current]
    converged = False
    iterations = 0

    while iterations < config.max_iterations:
        R = model.r_operator(p)
        allowed = 1e-10 * max(1.0, abs(current))
        accepted = False
        epsilon: Optional[float] = None
        for _ in range(config.max_dilutions + 1):
            candidate = _rr_step(rho, R, epsilon)
            p_new = model.probabilities(candidate)
            value = model.value(p_new)
            if value >= current - allowed:
                accepted = True
                break
            epsilon = 1.0 if epsilon is None else 0.5 * epsilon
        if not accepted:
            converged = True
            break

        iterations += 1
        gain = value - current
        rho, p, current = candidate, p_new, value
        trace.append(current)
        if abs(gain) < config.tolerance * max(1.0, abs(current)):
            converged = True
            break

    warnings: list[str] = []
    if model.floored:
        message = f"Regularized POVM probabilities below {PROBABILITY_FLOOR:g} with nonzero counts"
        logger.warning(message)
        warnings.append(message)
    if not converged:
        message = f"RρR iteration stopped after {iterations} iterations without converging"
        logger.warning(message)
        warnings.append(message)
    logger.info("Fock reconstruction N=%d: %d iterations, log L=%.6g", dim, iterations, current)

    # Remove round-off negativity before validation.
    values, vectors = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    values = np.clip(values, 0.0, None)
    rho = (vectors * values) @ vectors.conj().T
    rho = rho / np.trace(rho).real

    return FockReconstruction(
        rho=DensityMatrix(entries=0.5 * (rho + rho.conj().T)),
        iterations_used=iterations,
        converged=converged,
        log_likelihood_trace=trace,
        n_samples=int(np.sum(povm.counts)),
        regularized=model.floored,
        warnings=warnings,
    )


def fock_log_likelihood_per_sample(povm: QuadraturePOVM, rho: DensityMatrix) -> float:
    """Σ_j c_j log p_j / Σ_j c_j with p_j normalized over the POVM."""
    if rho.dim != povm.dim:
        raise FockError(f"State dimension {rho.dim} does not match POVM dimension {povm.dim}")
    model = _Likelihood(povm)
    return model.value(model.probabilities(np.array(rho.entries))) / float(np.sum(povm.counts))


def reconstruct_dataset(
    dataset: HomodyneDataset, config: Optional[FockConfig] = None
) -> tuple[QuadraturePOVM, FockReconstruction]:
    """Build the POVM of a dataset and reconstruct ρ."""
    config = config or FockConfig()
    povm = build_povm(dataset, config)
    return povm, ml_reconstruct(povm, config)


# =============================================================================
# State Functionals
# =============================================================================


def wigner_from_rho(
    rho: DensityMatrix, x: float | np.ndarray, y: float | np.ndarray
) -> np.ndarray:
    """Wigner function of ρ at phase-space points (x, y), vacuum peak 1/π.

    Uses the Laguerre form of the Fock-basis Moyal kernel.
    """
    matrix = rho.entries
    A = (np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)) / np.sqrt(2.0)
    B = 4.0 * np.abs(A) ** 2
    W = np.zeros(np.shape(B))
    for m in range(rho.dim):
        if abs(matrix[m, m]) > 0.0:
            W += np.real(matrix[m, m] * (-1) ** m * special.eval_genlaguerre(m, 0, B))
        for n in range(m + 1, rho.dim):
            if abs(matrix[m, n]) > 0.0:
                scale = np.exp(0.5 * (special.gammaln(m + 1) - special.gammaln(n + 1)))
                W += 2.0 * np.real(
                    matrix[m, n]
                    * (-1) ** m
                    * (2.0 * A) ** (n - m)
                    * scale
                    * special.eval_genlaguerre(m, n - m, B)
                )
    return W * np.exp(-0.5 * B) / np.pi


def hs_distance(rho_a: DensityMatrix, rho_b: DensityMatrix) -> float:
    """Tr[(ρ_a − ρ_b)²], zero-padding the smaller state."""
    dim = max(rho_a.dim, rho_b.dim)
    a = np.zeros((dim, dim), dtype=complex)
    b = np.zeros((dim, dim), dtype=complex)
    a[: rho_a.dim, : rho_a.dim] = rho_a.entries
    b[: rho_b.dim, : rho_b.dim] = rho_b.entries
    diff = a - b
    return float(max(0.0, np.real(np.trace(diff @ diff))))


def _annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def truncation_population(rho: DensityMatrix) -> float:
    """Population of the top two Fock levels."""
    diag = np.real(np.diag(rho.entries))
    return float(np.sum(diag[-2:]))


def covariance_from_rho(rho: DensityMatrix) -> tuple[CovarianceMatrix, DisplacementVector]:
    """Quadrature mean and covariance of ρ from ⟨a⟩, ⟨a²⟩ and ⟨a†a⟩.

    ⟨X²⟩ = Re⟨a²⟩ + ⟨n⟩ + ½, ⟨Y²⟩ = −Re⟨a²⟩ + ⟨n⟩ + ½, ⟨XY + YX⟩/2 = Im⟨a²⟩.
    """
    matrix = rho.entries
    a = _annihilation(rho.dim)
    mean_a = np.trace(matrix @ a)
    mean_a2 = np.trace(matrix @ a @ a)
    mean_n = float(np.real(np.sum(np.diag(matrix) * np.arange(rho.dim))))

    x_bar = np.sqrt(2.0) * mean_a.real
    y_bar = np.sqrt(2.0) * mean_a.imag
    xx = mean_a2.real + mean_n + 0.5 - x_bar**2
    yy = -mean_a2.real + mean_n + 0.5 - y_bar**2
    xy = mean_a2.imag - x_bar * y_bar

    population = truncation_population(rho)
    if population > 1e-3:
        logger.warning(
            "Top two Fock levels hold population %.3g; moments may be truncated", population
        )
    return (
        CovarianceMatrix(entries=[[xx, xy], [xy, yy]]),
        DisplacementVector(entries=[x_bar, y_bar]),
    )


def gaussian_to_rho(
    G: CovarianceMatrix,
    mean: Optional[DisplacementVector],
    dim: int,
    padding: int = 40,
) -> DensityMatrix:
    """Fock matrix of the single-mode Gaussian state (G, X̄), truncated to ``dim``.

    The state D(α)U(φ)S(r)ρ_th S†U†D† is built in a padded space and then
    truncated and renormalized.
    """
    if G.mode_count != 1:
        raise FockError("gaussian_to_rho supports single-mode states only")
    if not check_physical(G).is_physical:
        raise GaussianStateError("Cannot build a density matrix from an unphysical covariance")
    if not 1 <= dim <= MAX_DIM:
        raise FockError(f"Fock dimension must lie in [1, {MAX_DIM}], got: {dim}")

    values, vectors = np.linalg.eigh(G.entries)
    low, high = float(values[0]), float(values[1])
    nu = math.sqrt(low * high)
    n_bar = max(nu - 0.5, 0.0)
    r = 0.25 * math.log(high / low)
    phi = math.atan2(-vectors[1, 0], vectors[0, 0])

    size = dim + padding
    a = _annihilation(size)
    ad = a.conj().T
    k = np.arange(size)
    populations = n_bar**k / (n_bar + 1.0) ** (k + 1) if n_bar > 0 else (k == 0).astype(float)
    thermal = np.diag(populations).astype(complex)

    squeeze = linalg.expm(0.5 * r * (a @ a - ad @ ad))
    rotate = np.diag(np.exp(-1j * phi * k))
    op = rotate @ squeeze
    if mean is not None:
        alpha = (mean.entries[0] + 1j * mean.entries[1]) / np.sqrt(2.0)
        op = linalg.expm(alpha * ad - np.conj(alpha) * a) @ op

    full = op @ thermal @ op.conj().T
    truncated = full[:dim, :dim]
    truncated = 0.5 * (truncated + truncated.conj().T)
    return DensityMatrix(entries=truncated / np.trace(truncated).real)
