"""Unit tests for homodyne_forge.models."""

import numpy as np
import pytest
from pydantic import ValidationError

from homodyne_forge.models import (
    BinRecord,
    BinnedStats,
    CovarianceMatrix,
    DensityMatrix,
    DisplacementVector,
    EstimatorConfig,
    FiguresConfig,
    FitGaussianConfig,
    FockConfig,
    HomodyneDataset,
    HomodyneSample,
    ModeSelector,
    NormalityBin,
    NormalityReport,
    ProjectionVector,
    RunConfig,
    Setting,
    SimulateConfig,
    efficiency_noise,
)


def _dataset(**overrides):
    values = {
        "phases": [0.0, 1.0, 2.0],
        "bs_angles": [0.0, 0.0, 0.0],
        "selectors": [1, 1, 1],
        "arm_phases": [0.0, 0.0, 0.0],
        "values": [0.1, -0.2, 0.3],
        "efficiency": 0.9,
    }
    values.update(overrides)
    return HomodyneDataset(**values)


class TestEfficiencyNoise:
    """Tests for efficiency_noise."""

    def test_perfect_detection(self):
        """Test that η = 1 adds no noise."""
        assert efficiency_noise(1.0) == 0.0

    def test_value(self):
        """Test δ² = (1 − η)/(2η)."""
        assert efficiency_noise(0.8) == pytest.approx(0.125)

    @pytest.mark.parametrize("eta", [0.0, -0.1, 1.01])
    def test_out_of_range(self, eta):
        """Test that η outside (0, 1] is rejected."""
        with pytest.raises(ValueError):
            efficiency_noise(eta)


class TestCovarianceMatrix:
    """Tests for CovarianceMatrix."""

    def test_vacuum(self):
        """Test the vacuum constructor."""
        G = CovarianceMatrix.vacuum(2)
        np.testing.assert_allclose(G.entries, 0.5 * np.eye(4))
        assert G.mode_count == 2
        assert G.dimension == 4

    def test_symmetrizes_round_off(self):
        """Test that tiny asymmetry is averaged away."""
        G = CovarianceMatrix(entries=[[1.0, 0.2 + 1e-12], [0.2, 1.0]])
        assert G.entries[0, 1] == G.entries[1, 0]

    def test_rejects_asymmetric(self):
        """Test that asymmetric input is rejected."""
        with pytest.raises(ValidationError):
            CovarianceMatrix(entries=[[1.0, 0.5], [0.1, 1.0]])

    def test_rejects_bad_shape(self):
        """Test that only 2×2 and 4×4 are allowed."""
        with pytest.raises(ValidationError):
            CovarianceMatrix(entries=np.eye(3))

    def test_rejects_non_finite(self):
        """Test that NaN entries are rejected."""
        with pytest.raises(ValidationError):
            CovarianceMatrix(entries=[[np.nan, 0.0], [0.0, 1.0]])

    def test_rejects_non_positive_diagonal(self):
        """Test that a zero variance is rejected."""
        with pytest.raises(ValidationError):
            CovarianceMatrix(entries=[[0.0, 0.0], [0.0, 1.0]])

    def test_entries_are_read_only(self):
        """Test that stored entries cannot be mutated."""
        G = CovarianceMatrix.vacuum()
        with pytest.raises(ValueError):
            G.entries[0, 0] = 3.0

    def test_json_dict(self):
        """Test the {"modes", "entries"} form."""
        G = CovarianceMatrix(entries=[[2.0, 0.1], [0.1, 0.5]])
        data = G.to_json_dict()
        assert data == {"modes": 1, "entries": [[2.0, 0.1], [0.1, 0.5]]}
        restored = CovarianceMatrix.from_json_dict(data)
        np.testing.assert_array_equal(restored.entries, G.entries)

    def test_json_dict_mode_mismatch(self):
        """Test that a wrong 'modes' value is rejected."""
        with pytest.raises(ValueError):
            CovarianceMatrix.from_json_dict({"modes": 2, "entries": [[1.0, 0.0], [0.0, 1.0]]})


class TestDisplacementVector:
    """Tests for DisplacementVector."""

    def test_zeros(self):
        """Test the zero constructor."""
        assert DisplacementVector.zeros(2).entries.tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_rejects_length(self):
        """Test that only lengths 2 and 4 are allowed."""
        with pytest.raises(ValidationError):
            DisplacementVector(entries=[1.0, 2.0, 3.0])


class TestSetting:
    """Tests for Setting and ProjectionVector."""

    def test_defaults(self):
        """Test default beam-splitter angle, port and arm phase."""
        setting = Setting(phase=0.5)
        assert setting.bs_angle == 0.0
        assert setting.selector == ModeSelector.B1
        assert setting.arm_phase == 0.0

    def test_keys(self):
        """Test group and sort keys."""
        setting = Setting(phase=0.5, bs_angle=0.25, selector=ModeSelector.B2)
        assert setting.group_key() == (0.25, 2, 0.0)
        assert setting.sort_key() == (0.25, 2, 0.0, 0.5)

    def test_rejects_infinite_phase(self):
        """Test that non-finite angles are rejected."""
        with pytest.raises(ValidationError):
            Setting(phase=float("inf"))

    def test_projection_vector_must_be_unit(self):
        """Test that a non-unit projection vector is rejected."""
        with pytest.raises(ValidationError):
            ProjectionVector(entries=[1.0, 1.0], setting=Setting(phase=0.0))


class TestHomodyneDataset:
    """Tests for HomodyneDataset."""

    def test_phases_reduced(self):
        """Test that phases are reduced to [0, 2π)."""
        dataset = _dataset(phases=[-0.5, 2 * np.pi + 0.25, 1.0])
        np.testing.assert_allclose(dataset.phases, [2 * np.pi - 0.5, 0.25, 1.0])

    def test_length_and_noise(self):
        """Test __len__ and the noise variance."""
        dataset = _dataset()
        assert len(dataset) == 3
        assert dataset.noise_variance == pytest.approx(efficiency_noise(0.9))

    def test_column_lengths_must_agree(self):
        """Test that ragged columns are rejected."""
        with pytest.raises(ValueError):
            _dataset(values=[0.1, 0.2])

    def test_single_mode_rejects_beam_splitter(self):
        """Test that one-mode data cannot carry beam-splitter settings."""
        with pytest.raises(ValueError):
            _dataset(bs_angles=[0.0, 0.5, 0.0])

    def test_rejects_bad_selector(self):
        """Test that ports other than 1 and 2 are rejected."""
        with pytest.raises(ValidationError):
            _dataset(selectors=[1, 3, 1], mode_count=2)

    @pytest.mark.parametrize("eta", [0.0, 1.5])
    def test_rejects_efficiency(self, eta):
        """Test that η outside (0, 1] is rejected."""
        with pytest.raises(ValidationError):
            _dataset(efficiency=eta)

    def test_rejects_non_finite_value(self):
        """Test that NaN values are rejected."""
        with pytest.raises(ValidationError):
            _dataset(values=[0.1, np.nan, 0.3])

    def test_samples_round_trip(self):
        """Test that from_samples inverts samples()."""
        dataset = _dataset()
        rebuilt = HomodyneDataset.from_samples(list(dataset.samples()), efficiency=0.9)
        np.testing.assert_array_equal(rebuilt.values, dataset.values)
        np.testing.assert_array_equal(rebuilt.phases, dataset.phases)

    def test_sample_model(self):
        """Test that a sample rejects infinite values."""
        with pytest.raises(ValidationError):
            HomodyneSample(setting=Setting(phase=0.0), value=float("inf"))


class TestBinnedStats:
    """Tests for BinRecord and BinnedStats."""

    def test_record_mean(self):
        """Test the per-bin mean."""
        record = BinRecord(setting=Setting(phase=0.1), n=4, sum_x=2.0, y=3.0, y_centered=2.0)
        assert record.mean == 0.5

    def test_record_rejects_empty(self):
        """Test that empty bins are not representable."""
        with pytest.raises(ValidationError):
            BinRecord(setting=Setting(phase=0.1), n=0, sum_x=0.0, y=0.0, y_centered=0.0)

    def test_vectors(self):
        """Test counts and squares vectors."""
        stats = BinnedStats(
            bins=[
                BinRecord(setting=Setting(phase=0.1), n=4, sum_x=2.0, y=3.0, y_centered=2.0),
                BinRecord(setting=Setting(phase=0.2), n=6, sum_x=0.0, y=5.0, y_centered=5.0),
            ]
        )
        assert stats.total_count == 10
        assert stats.counts().tolist() == [4.0, 6.0]
        assert stats.squares(centered=False).tolist() == [3.0, 5.0]
        assert stats.squares(centered=True).tolist() == [2.0, 5.0]


class TestDensityMatrix:
    """Tests for DensityMatrix."""

    def test_fock_state(self):
        """Test the number-state constructor."""
        rho = DensityMatrix.fock(1, 3)
        assert rho.dim == 3
        assert rho.entries[1, 1] == 1.0

    def test_rejects_trace(self):
        """Test that a non-unit trace is rejected."""
        with pytest.raises(ValidationError):
            DensityMatrix(entries=np.eye(2))

    def test_rejects_non_hermitian(self):
        """Test that a non-Hermitian matrix is rejected."""
        with pytest.raises(ValidationError):
            DensityMatrix(entries=[[0.5, 0.1j], [0.1j, 0.5]])

    def test_rejects_negative(self):
        """Test that a negative eigenvalue is rejected."""
        with pytest.raises(ValidationError):
            DensityMatrix(entries=[[1.5, 0.0], [0.0, -0.5]])

    def test_json_dict(self):
        """Test the {"dim", "re", "im"} form."""
        rho = DensityMatrix(entries=[[0.5, 0.25j], [-0.25j, 0.5]])
        data = rho.to_json_dict()
        assert data["dim"] == 2
        assert data["im"][0][1] == 0.25
        restored = DensityMatrix.from_json_dict(data)
        np.testing.assert_array_equal(restored.entries, rho.entries)


class TestConfigs:
    """Tests for estimator, Fock and run configuration models."""

    def test_estimator_defaults(self):
        """Test the default estimator controls."""
        config = EstimatorConfig()
        assert config.relaxation == 0.5
        assert config.residual_tolerance == 1e-10
        assert config.project_unphysical

    def test_estimator_rejects_relaxation(self):
        """Test that relaxation must lie in (0, 1]."""
        with pytest.raises(ValidationError):
            EstimatorConfig(relaxation=0.0)

    def test_fock_dim_range(self):
        """Test that N must lie in [2, 64]."""
        with pytest.raises(ValidationError):
            FockConfig(dim=65)
        with pytest.raises(ValidationError):
            FockConfig(dim=1)

    def test_run_config_forbids_unknown(self):
        """Test that unknown options are rejected."""
        with pytest.raises(ValidationError):
            RunConfig(colour="blue")

    def test_run_config_rejects_negative_seed(self):
        """Test that seeds are unsigned."""
        with pytest.raises(ValidationError):
            RunConfig(seed=-1)

    def test_simulate_defaults(self):
        """Test simulate defaults."""
        config = SimulateConfig(eta=0.9)
        assert config.state == "vacuum"
        assert config.phases == 31
        assert config.per_bin == 10_000
        assert config.output == "dataset.csv"

    def test_fit_gaussian_builds_estimator_config(self):
        """Test that CLI names map onto EstimatorConfig fields."""
        config = FitGaussianConfig(data="d.csv", project=False, relaxation=0.25)
        estimator = config.estimator_config()
        assert not estimator.project_unphysical
        assert estimator.relaxation == 0.25

    def test_fit_gaussian_requires_data(self):
        """Test that a dataset path is required."""
        with pytest.raises(ValidationError):
            FitGaussianConfig()

    def test_figures_dims_sorted_unique(self):
        """Test that Fock dimensions are sorted and deduplicated."""
        config = FiguresConfig(data="d.csv", dims=[12, 8, 12])
        assert config.dims == [8, 12]

    def test_figures_dims_range(self):
        """Test that Fock dimensions must lie in [2, 64]."""
        with pytest.raises(ValidationError):
            FiguresConfig(data="d.csv", dims=[8, 80])


class TestNormalityReport:
    """Tests for NormalityBin and NormalityReport."""

    def _bin(self, reject_jb: bool, reject_sw: bool) -> NormalityBin:
        return NormalityBin(
            phase_center=0.0,
            n=100,
            variance=1.0,
            skewness=0.0,
            kurtosis_excess=0.0,
            w_jb=1.0,
            p_jb=0.5,
            w_sw=0.99,
            p_sw=0.5,
            reject_jb=reject_jb,
            reject_sw=reject_sw,
        )

    def test_rejected_bins(self):
        """Test that a bin counts once when either test rejects."""
        report = NormalityReport(
            bins=[self._bin(True, True), self._bin(False, True), self._bin(False, False)],
            gaussian=False,
        )
        assert report.rejected_bins == 2

    def test_p_value_range(self):
        """Test that p-values must lie in [0, 1]."""
        with pytest.raises(ValidationError):
            NormalityBin(**{**self._bin(False, False).model_dump(), "p_jb": 1.5})
