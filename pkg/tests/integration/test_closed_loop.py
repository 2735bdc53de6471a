"""Closed-loop acceptance tests: synthesize, estimate, compare with the truth."""

from __future__ import annotations

import numpy as np
import pytest

from homodyne_forge.dataset import (
    bin_by_phase,
    single_mode_plan,
    synthesize,
    synthesize_mixture,
    two_mode_plan,
)
from homodyne_forge.fock import covariance_from_rho, hs_distance, reconstruct_dataset
from homodyne_forge.gaussian import (
    check_physical,
    eigen_variances,
    projection_matrix,
    rotation_matrix,
)
from homodyne_forge.gaussianity import (
    JB_CRITICAL_005,
    jarque_bera,
    normality_report,
    shapiro_wilk_split,
)
from homodyne_forge.mle import (
    degradation_factor,
    design_matrix,
    estimate,
    fit_dataset,
    likelihood_gradient,
    log_likelihood,
    oracle_lsq_fit,
)
from homodyne_forge.models import (
    BinnedStats,
    BinRecord,
    CovarianceMatrix,
    FockConfig,
    Setting,
    efficiency_noise,
)
from tests.conftest import CORRELATED_ENTRIES, G_O_ENTRIES

pytestmark = [pytest.mark.integration, pytest.mark.slow]


def _random_physical(rng: np.random.Generator) -> np.ndarray:
    """ν R(φ) diag(e^{−2r}, e^{2r}) R(φ)ᵀ with ν ≥ ½."""
    nu = rng.uniform(0.5, 1.5)
    r = rng.uniform(0.0, 0.6)
    R = rotation_matrix(rng.uniform(0.0, np.pi))
    return nu * R @ np.diag([np.exp(-2 * r), np.exp(2 * r)]) @ R.T


def _exact_stats(G: np.ndarray, eta: float, n_phases: int = 31, n: int = 10_000) -> BinnedStats:
    """Bins whose squared sums equal their expected values."""
    settings = [Setting(phase=p) for p in (np.arange(n_phases) + 0.5) * 2 * np.pi / n_phases]
    W = projection_matrix(settings, 1)
    sigma2 = np.einsum("hi,ij,hj->h", W, G, W) + efficiency_noise(eta)
    records = [
        BinRecord(setting=s, n=n, sum_x=0.0, y=n * v, y_centered=n * v)
        for s, v in zip(settings, sigma2)
    ]
    return BinnedStats(bins=records)


def _upper(G: np.ndarray) -> np.ndarray:
    d = G.shape[0]
    return np.array([G[i, j] for i in range(d) for j in range(i, d)])


def _lsq_standard_errors(stats: BinnedStats) -> np.ndarray:
    """Standard errors of the least-squares entries from σ_h⁴ variances."""
    W = projection_matrix(stats.settings(), stats.mode_count)
    A = design_matrix(W)
    n = stats.counts()
    variances = 2.0 * (stats.squares() / n) ** 2 / n
    pinv = np.linalg.pinv(A)
    return np.sqrt(np.diag(pinv @ np.diag(variances) @ pinv.T))


class TestGaussianRecovery:
    """Gaussian maximum likelihood on synthetic data."""

    def test_vacuum(self, vacuum_acceptance):
        """Test Ĝ within 0.01 of I/2 and a residual at tolerance."""
        report = fit_dataset(vacuum_acceptance, 31)

        assert report.converged
        assert report.final_residual <= 1e-10
        np.testing.assert_allclose(report.covariance.entries, 0.5 * np.eye(2), atol=0.01)

    def test_squeezed_thermal(self):
        """Test recovery of the OPO-like state at η = 0.88 from 10⁶ samples."""
        G_true = CovarianceMatrix(entries=G_O_ENTRIES)
        dataset = synthesize(G_true, None, 0.88, single_mode_plan(31, 32_258), seed=12)
        report = fit_dataset(dataset, 31)

        np.testing.assert_allclose(report.covariance.entries, G_O_ENTRIES, atol=0.03)
        low, high = eigen_variances(report.covariance)
        assert low == pytest.approx(0.40, abs=0.05)
        assert high == pytest.approx(2.53, abs=0.05)
        physicality = check_physical(report.covariance)
        assert physicality.is_physical
        assert physicality.sqrt_det == pytest.approx(1.01, abs=0.03)

    def test_random_states_reach_fixed_point(self):
        """Test convergence and exact recovery on expected statistics."""
        rng = np.random.default_rng(2024)
        for _ in range(20):
            G = _random_physical(rng)
            eta = rng.uniform(0.7, 1.0)
            report = estimate(_exact_stats(G, eta), eta)

            assert report.converged
            assert report.final_residual <= 1e-10
            np.testing.assert_allclose(report.covariance.entries, G, atol=1e-6)

    def test_gradient_matches_finite_differences(self):
        """Test Tr[½(R − D)E] against central differences of log L."""
        rng = np.random.default_rng(77)
        h = 1e-5
        for _ in range(20):
            stats = _exact_stats(_random_physical(rng), 0.9)
            G = _random_physical(rng)
            E = rng.normal(size=(2, 2))
            E = 0.5 * (E + E.T)
            analytic = float(np.sum(likelihood_gradient(G, stats, 0.9) * E))
            numeric = (
                log_likelihood(G + h * E, stats, 0.9) - log_likelihood(G - h * E, stats, 0.9)
            ) / (2 * h)
            assert analytic == pytest.approx(numeric, rel=1e-6)

    def test_oracle_equivalence(self):
        """Test ML and least squares agree within three combined standard errors."""
        states = [CovarianceMatrix.vacuum(1), CovarianceMatrix(entries=G_O_ENTRIES)]
        for index in range(10):
            for G in states:
                dataset = synthesize(G, None, 0.9, single_mode_plan(31, 2000), seed=100 + index)
                stats = bin_by_phase(dataset, 31)
                ml = _upper(estimate(stats, 0.9).covariance.entries)
                lsq = _upper(oracle_lsq_fit(stats, 0.9).entries)
                combined = np.sqrt(2.0) * _lsq_standard_errors(stats)
                assert np.all(np.abs(ml - lsq) <= 3.0 * combined)

    def test_two_mode_correlated(self):
        """Test recovery of a correlated 4×4 covariance using the arm phase."""
        G_true = CovarianceMatrix(entries=CORRELATED_ENTRIES)
        dataset = synthesize(G_true, None, 1.0, two_mode_plan(31, 10_000), seed=13)
        report = fit_dataset(dataset, 31)

        np.testing.assert_allclose(report.covariance.entries, CORRELATED_ENTRIES, atol=0.05)

    def test_two_mode_product_state(self):
        """Test G_O ⊕ vacuum: matching blocks and a vanishing cross block."""
        entries = np.zeros((4, 4))
        entries[:2, :2] = G_O_ENTRIES
        entries[2:, 2:] = 0.5 * np.eye(2)
        dataset = synthesize(
            CovarianceMatrix(entries=entries), None, 1.0, two_mode_plan(31, 10_000), seed=14
        )
        G = fit_dataset(dataset, 31).covariance.entries

        np.testing.assert_allclose(G[:2, :2], G_O_ENTRIES, atol=0.05)
        np.testing.assert_allclose(G[2:, 2:], 0.5 * np.eye(2), atol=0.05)
        np.testing.assert_allclose(G[:2, 2:], 0.0, atol=0.05)


class TestFockBaseline:
    """Fock-space reconstruction against the Gaussian fit."""

    def test_vacuum(self, vacuum_acceptance):
        """Test ⟨0|ρ̂|0⟩ ≥ 0.99 at N = 15 and a non-decreasing likelihood."""
        _, recon = reconstruct_dataset(vacuum_acceptance, FockConfig(dim=15))
        rho = recon.rho.entries

        assert rho[0, 0].real >= 0.99
        trace = np.array(recon.log_likelihood_trace)
        assert np.all(np.diff(trace) >= -1e-10 * np.abs(trace[1:]))
        np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
        assert np.min(np.linalg.eigvalsh(rho)) >= -1e-10

    def test_consistency_with_gaussian_fit(self, g_o_fock_dataset):
        """Test agreement at N = 25 and a truncation artifact at N = 8."""
        G_hat = fit_dataset(g_o_fock_dataset, 31).covariance.entries
        _, large = reconstruct_dataset(g_o_fock_dataset, FockConfig(dim=25))
        _, small = reconstruct_dataset(g_o_fock_dataset, FockConfig(dim=8))

        G_large, _ = covariance_from_rho(large.rho)
        G_small, _ = covariance_from_rho(small.rho)
        np.testing.assert_allclose(G_large.entries, G_hat, atol=0.07)
        assert np.max(np.abs(G_small.entries - G_hat)) > 0.1

    def test_hs_distance_trend(self, g_o_fock_dataset):
        """Test that the distance to N = 30 does not grow with N."""
        states = {
            dim: reconstruct_dataset(g_o_fock_dataset, FockConfig(dim=dim))[1].rho
            for dim in (8, 12, 16, 20, 25, 30)
        }
        distances = [hs_distance(states[dim], states[30]) for dim in (8, 12, 16, 20, 25)]

        assert all(b <= a + 1e-6 for a, b in zip(distances, distances[1:]))


class TestNormalityCalibration:
    """Monte Carlo size of the normality tests."""

    def test_size_at_nominal_level(self):
        """Test rejection rates within [0.035, 0.065] at α = 0.05."""
        rng = np.random.default_rng(5)
        replicates = 2000
        jb_rejections = 0
        sw_rejections = 0
        for _ in range(replicates):
            x = rng.normal(size=10_000)
            jb_rejections += jarque_bera(x)[0] > JB_CRITICAL_005
            sw_rejections += shapiro_wilk_split(x)[1] <= 0.05

        assert 0.035 <= jb_rejections / replicates <= 0.065
        assert 0.035 <= sw_rejections / replicates <= 0.065

    def test_vacuum_accepted(self, vacuum_acceptance):
        """Test that vacuum data are consistent with Gaussianity."""
        report = normality_report(vacuum_acceptance, bin_size=10_000)

        assert len(report.bins) == 31
        assert report.gaussian

    def test_mixture_rejected(self):
        """Test that more than half the bins of a mixture are rejected."""
        dataset = synthesize_mixture(
            CovarianceMatrix.vacuum(1), 1.0, single_mode_plan(31, 10_000), seed=15
        )
        report = normality_report(dataset, bin_size=10_000)

        assert report.rejected_bins > len(report.bins) / 2
        assert not report.gaussian


class TestDegradation:
    """Likelihood degradation of a Gaussian fit to non-Gaussian data."""

    def test_mixture_fits_worse_than_vacuum(self, vacuum_acceptance):
        """Test a degradation factor above one for mixture against vacuum."""
        mixture = synthesize_mixture(
            CovarianceMatrix.vacuum(1), 1.0, single_mode_plan(31, 10_000), seed=16
        )
        reference = fit_dataset(vacuum_acceptance, 31)
        degraded = fit_dataset(mixture, 31)

        factor = degradation_factor(
            reference.log_likelihood_per_sample * reference.n_samples,
            reference.n_samples,
            degraded.log_likelihood_per_sample * degraded.n_samples,
            degraded.n_samples,
        )
        assert factor > 1.0
