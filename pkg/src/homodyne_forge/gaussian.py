"""
Gaussian-state linear algebra for homodyne-forge.

Covers:
- Phase rotations, beam-splitter and arm-phase symplectic matrices
- Projection vectors w such that a homodyne setting samples variance wᵀGw
- Covariance transforms, block decomposition and physicality checks
- Projection of unphysical estimates onto the minimum-uncertainty boundary
- Gaussian Wigner function evaluation

All matrices use vacuum units (vacuum covariance I/2) and the (X₁, Y₁, X₂, Y₂) ordering.
"""

from __future__ import annotations

import logging
from typing import Union

import numpy as np
from scipy import linalg

from homodyne_forge.models import (
    PHYSICALITY_TOL,
    CovarianceMatrix,
    DisplacementVector,
    HomodyneForgeError,
    ModeSelector,
    PhysicalityReport,
    ProjectionVector,
    Setting,
)

logger = logging.getLogger(__name__)

MatrixLike = Union[CovarianceMatrix, np.ndarray]


class GaussianStateError(HomodyneForgeError):
    """Raised for dimension mismatches, singular or unphysical covariance matrices."""

    pass


def _as_array(G: MatrixLike) -> np.ndarray:
    if isinstance(G, CovarianceMatrix):
        return np.array(G.entries)
    return np.asarray(G, dtype=float)


# =============================================================================
# Elementary Matrices
# =============================================================================


def rotation_matrix(theta: float) -> np.ndarray:
    """Phase-space rotation R(θ) = [[cos θ, sin θ], [−sin θ, cos θ]]."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def symplectic_form(mode_count: int = 1) -> np.ndarray:
    """Real antisymmetric form Ω = ⊕ ½[[0, 1], [−1, 0]].

    The uncertainty relation reads G + iΩ ≥ 0 in this convention.
    """
    if mode_count not in (1, 2):
        raise GaussianStateError(f"Only one or two modes are supported, got {mode_count}")
    block = 0.5 * np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(mode_count), block)


def bs_symplectic(vartheta: float) -> np.ndarray:
    """Beam-splitter symplectic [[cos ϑ·I, sin ϑ·I], [−sin ϑ·I, cos ϑ·I]]."""
    c, s = np.cos(vartheta), np.sin(vartheta)
    identity = np.eye(2)
    return np.block([[c * identity, s * identity], [-s * identity, c * identity]])


def arm_phase_matrix(psi: float) -> np.ndarray:
    """Phase shift ψ on input mode 2: I₂ ⊕ R(ψ)."""
    return linalg.block_diag(np.eye(2), rotation_matrix(psi))


def projection_vector(setting: Setting, mode_count: int = 1) -> ProjectionVector:
    """Unit vector w for a homodyne setting.

    One mode: w = u = (cos θ, sin θ). Two modes: w = P(ψ)ᵀ S_BS(ϑ)ᵀ e with
    e = (u, 0) on port b₁ or (0, u) on port b₂.
    """
    u = np.array([np.cos(setting.phase), np.sin(setting.phase)])
    if mode_count == 1:
        if setting.bs_angle != 0.0 or setting.selector != ModeSelector.B1:
            raise GaussianStateError("Single-mode settings cannot use a beam splitter")
        return ProjectionVector(entries=u, setting=setting)
    if mode_count != 2:
        raise GaussianStateError(f"Only one or two modes are supported, got {mode_count}")

    e = np.zeros(4)
    if setting.selector == ModeSelector.B1:
        e[0:2] = u
    else:
        e[2:4] = u
    w = arm_phase_matrix(setting.arm_phase).T @ bs_symplectic(setting.bs_angle).T @ e
    return ProjectionVector(entries=w, setting=setting)


def projection_matrix(settings: list[Setting], mode_count: int = 1) -> np.ndarray:
    """Stack projection vectors for many settings into an (H, 2M) array."""
    if not settings:
        return np.zeros((0, 2 * mode_count))
    return np.array([projection_vector(s, mode_count).entries for s in settings])


# =============================================================================
# Covariance Operations
# =============================================================================


def transform_covariance(G: CovarianceMatrix, S: np.ndarray) -> CovarianceMatrix:
    """Return S·G·Sᵀ (symmetrized on construction)."""
    S = np.asarray(S, dtype=float)
    if S.shape != G.entries.shape:
        raise GaussianStateError(
            f"Transform shape {S.shape} does not match covariance shape {G.entries.shape}"
        )
    return CovarianceMatrix(entries=S @ G.entries @ S.T)


def project_variance(G: MatrixLike, w: Union[ProjectionVector, np.ndarray]) -> float:
    """Quadratic form wᵀGw."""
    matrix = _as_array(G)
    vector = w.entries if isinstance(w, ProjectionVector) else np.asarray(w, dtype=float)
    if vector.shape[0] != matrix.shape[0]:
        raise GaussianStateError(
            f"Projection of length {vector.shape[0]} does not match a "
            f"{matrix.shape[0]}×{matrix.shape[0]} covariance matrix"
        )
    return float(vector @ matrix @ vector)


def block_decompose(
    G: CovarianceMatrix,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split a two-mode covariance into (G₁, G₂, G₃, G₄) with G = [[G₁, G₃], [G₄, G₂]]."""
    if G.mode_count != 2:
        raise GaussianStateError("block_decompose requires a two-mode covariance matrix")
    m = G.entries
    return m[0:2, 0:2].copy(), m[2:4, 2:4].copy(), m[0:2, 2:4].copy(), m[2:4, 0:2].copy()


def symplectic_eigenvalues(G: MatrixLike) -> np.ndarray:
    """Ascending symplectic eigenvalues ν_k (vacuum gives ½)."""
    matrix = _as_array(G)
    modes = matrix.shape[0] // 2
    J = 2.0 * symplectic_form(modes)
    moduli = np.sort(np.abs(np.linalg.eigvals(1j * J @ matrix)))
    return moduli[::2]


def check_physical(G: CovarianceMatrix, tol: float = PHYSICALITY_TOL) -> PhysicalityReport:
    """Check the uncertainty relation G + iΩ ≥ 0 via the symplectic spectrum."""
    matrix = G.entries
    modes = G.mode_count
    nu = symplectic_eigenvalues(matrix)
    det = float(np.linalg.det(matrix))
    min_eig = float(np.min(np.linalg.eigvalsh(matrix + 1j * symplectic_form(modes))))
    purity = 1.0 / (2.0**modes * np.sqrt(det)) if det > 0 else float("inf")
    return PhysicalityReport(
        mode_count=modes,
        symplectic_eigenvalues=[float(x) for x in nu],
        min_symplectic_eigenvalue=float(nu[0]),
        sqrt_det=float(np.sqrt(det)) if modes == 1 and det > 0 else None,
        min_eigenvalue_g_plus_i_omega=min_eig,
        purity=float(purity),
        is_physical=bool(nu[0] >= 0.5 - tol),
        tolerance=tol,
    )


def eigen_variances(G: CovarianceMatrix) -> tuple[float, float]:
    """Minimum and maximum quadrature variances of a single-mode state."""
    if G.mode_count != 1:
        raise GaussianStateError("eigen_variances requires a single-mode covariance matrix")
    low, high = np.linalg.eigvalsh(G.entries)
    return float(low), float(high)


def squeezing_angle(G: CovarianceMatrix) -> float:
    """LO phase θ ∈ [0, π) at which the single-mode variance uᵀGu is minimal."""
    if G.mode_count != 1:
        raise GaussianStateError("squeezing_angle requires a single-mode covariance matrix")
    _, vectors = np.linalg.eigh(G.entries)
    v = vectors[:, 0]
    return float(np.mod(np.arctan2(v[1], v[0]), np.pi))


def williamson(G: CovarianceMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Williamson form G = S·diag(ν₁, ν₁, …)·Sᵀ with S symplectic.

    Returns ``(nu, S)`` where ``nu`` has one entry per mode.
    """
    V = G.entries
    modes = G.mode_count
    J = 2.0 * symplectic_form(modes)
    root = linalg.sqrtm(V).real
    inv_root = np.linalg.inv(root)
    M = inv_root @ J @ inv_root
    T, K = linalg.schur(0.5 * (M - M.T), output="real")

    d = np.zeros(modes)
    for k in range(modes):
        i, j = 2 * k, 2 * k + 1
        if T[i, j] < 0:
            K[:, [i, j]] = K[:, [j, i]]
            T[[i, j], :] = T[[j, i], :]
            T[:, [i, j]] = T[:, [j, i]]
        d[k] = T[i, j]
    if np.any(d <= 0):
        raise GaussianStateError("Covariance matrix is not positive definite")

    delta = np.repeat(d, 2)
    S = root @ K @ np.diag(np.sqrt(delta))
    nu = 1.0 / d
    order = np.argsort(nu)
    if modes == 2 and order[0] == 1:
        # ascending ν; swapping whole mode pairs keeps S symplectic
        S = S[:, [2, 3, 0, 1]]
        nu = nu[::-1]
    return nu, S


def project_to_physical(G: CovarianceMatrix) -> CovarianceMatrix:
    """Move an unphysical covariance matrix onto the minimum-uncertainty boundary.

    One mode rescales G by 1/(2√Det G) when Det G < ¼. Two modes floor the
    symplectic eigenvalues at ½ in the Williamson frame. Physical inputs are
    returned unchanged.
    """
    report = check_physical(G)
    if report.is_physical:
        return G

    if G.mode_count == 1:
        det = float(np.linalg.det(G.entries))
        if det <= 0:
            raise GaussianStateError("Cannot project a covariance matrix with Det G ≤ 0")
        projected = CovarianceMatrix(entries=G.entries / (2.0 * np.sqrt(det)))
    else:
        nu, S = williamson(G)
        floored = np.repeat(np.maximum(nu, 0.5), 2)
        projected = CovarianceMatrix(entries=S @ np.diag(floored) @ S.T)

    logger.warning(
        "Projected unphysical covariance (min ν=%.6g) onto the physical boundary",
        report.min_symplectic_eigenvalue,
    )
    return projected


# =============================================================================
# Wigner Function
# =============================================================================


def wigner_gaussian(
    G: CovarianceMatrix,
    mean: DisplacementVector | None,
    point: np.ndarray,
) -> Union[float, np.ndarray]:
    """Evaluate the Gaussian Wigner function.

    W(r) = exp(−½ (r − X̄)ᵀ G⁻¹ (r − X̄)) / ((2π)^M √Det G)

    ``point`` may be a single phase-space vector of length 2M or an array whose
    last axis has length 2M, in which case an array of values is returned.
    """
    matrix = G.entries
    dim = matrix.shape[0]
    det = float(np.linalg.det(matrix))
    if det <= 0:
        raise GaussianStateError("Wigner function requires a positive-definite G")
    centre = np.zeros(dim) if mean is None else mean.entries
    if centre.shape[0] != dim:
        raise GaussianStateError("Displacement and covariance dimensions differ")

    r = np.asarray(point, dtype=float)
    if r.shape[-1] != dim:
        raise GaussianStateError(f"Phase-space points must have length {dim}")
    diff = r - centre
    exponent = np.einsum("...i,ij,...j->...", diff, np.linalg.inv(matrix), diff)
    norm = (2.0 * np.pi) ** (dim // 2) * np.sqrt(det)
    values = np.exp(-0.5 * exponent) / norm
    if np.ndim(values) == 0:
        return float(values)
    return values
