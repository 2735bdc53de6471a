"""Unit tests for homodyne_forge.cli."""

import json
from unittest.mock import MagicMock

import click
import pandas as pd
import pytest
from click.testing import CliRunner

from homodyne_forge.cli import OrderedGroup, main
from homodyne_forge.cli.compare import ComparisonError, build_comparison
from homodyne_forge.cli.figures import _parse_dims
from homodyne_forge.dataset import synthesize
from homodyne_forge.mle import fit_dataset
from homodyne_forge.models import DensityMatrix, Setting
from homodyne_forge.parsers import load_csv
from homodyne_forge.serializer import save_csv


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def dataset_csv(temp_dir, small_dataset):
    """Single-mode dataset written to disk."""
    return save_csv(small_dataset, temp_dir / "data.csv")


@pytest.fixture
def two_mode_csv(temp_dir, small_two_mode_dataset):
    """Two-mode dataset written to disk."""
    return save_csv(small_two_mode_dataset, temp_dir / "two_mode.csv")


@pytest.fixture
def out_dir(temp_dir):
    return temp_dir / "out"


class TestOrderedGroup:
    """Tests for OrderedGroup class."""

    def test_command_order(self):
        """Test that commands are returned in workflow order."""
        group = OrderedGroup()
        group.add_command(MagicMock(), "compare")
        group.add_command(MagicMock(), "simulate")
        group.add_command(MagicMock(), "fit-gaussian")

        assert group.list_commands(MagicMock()) == ["simulate", "fit-gaussian", "compare"]

    def test_unknown_commands_at_end(self):
        """Test that unknown commands are listed at the end."""
        group = OrderedGroup()
        group.add_command(MagicMock(), "normtest")
        group.add_command(MagicMock(), "custom-command")

        assert group.list_commands(MagicMock())[-1] == "custom-command"


class TestMainGroup:
    """Tests for main CLI group."""

    def test_main_help(self, runner):
        """Test main help message."""
        result = runner.invoke(main, ["--help"])

        assert result.exit_code == 0
        assert "CORE WORKFLOW" in result.output
        assert "fit-gaussian" in result.output

    def test_version(self, runner):
        """Test version option."""
        result = runner.invoke(main, ["--version"])

        assert result.exit_code == 0
        assert "homodyne-forge" in result.output

    @pytest.mark.parametrize(
        "command", ["simulate", "fit-gaussian", "fit-fock", "normtest", "compare", "make-figures"]
    )
    def test_command_help(self, runner, command):
        """Test that every command has help."""
        result = runner.invoke(main, [command, "--help"])

        assert result.exit_code == 0
        assert "--output" in result.output or "--data" in result.output


class TestSimulateCommand:
    """Tests for simulate command."""

    def test_requires_eta(self, runner, out_dir):
        """Test that simulate needs an efficiency."""
        result = runner.invoke(main, ["--out", str(out_dir), "simulate"])

        assert result.exit_code == 2
        assert "--eta" in result.output

    def test_writes_dataset(self, runner, out_dir):
        """Test that the dataset is written with the requested size."""
        args = ["--eta", "0.9", "--seed", "7", "--out", str(out_dir)]
        result = runner.invoke(main, args + ["simulate", "--phases", "3", "--per-bin", "20"])

        assert result.exit_code == 0, result.output
        dataset = load_csv(out_dir / "dataset.csv")
        assert len(dataset) == 60
        assert dataset.efficiency == 0.9
        assert '"seed":7' in dataset.metadata

    def test_state_file(self, runner, out_dir, state_file):
        """Test simulating from a covariance file."""
        args = ["--eta", "1", "--out", str(out_dir), "simulate"]
        result = runner.invoke(
            main, args + ["--state", f"file:{state_file}", "--phases", "3", "--per-bin", "5"]
        )

        assert result.exit_code == 0, result.output
        assert (out_dir / "dataset.csv").exists()

    def test_unknown_state(self, runner, out_dir):
        """Test that an unknown state is an input error."""
        args = ["--eta", "1", "--out", str(out_dir), "simulate", "--state", "cat"]
        result = runner.invoke(main, args)

        assert result.exit_code == 2
        assert "Unknown state" in result.output

    def test_invalid_phases(self, runner, out_dir):
        """Test that config validation maps to exit 2."""
        args = ["--eta", "1", "--out", str(out_dir), "simulate", "--phases", "2"]
        result = runner.invoke(main, args)

        assert result.exit_code == 2
        assert "phases" in result.output

    def test_repeat_run_is_byte_identical(self, runner, out_dir):
        """Test that the same seed and config reproduce the file exactly."""
        args = ["--eta", "0.88", "--seed", "3", "--out", str(out_dir), "simulate"]
        args += ["--phases", "5", "--per-bin", "30"]

        assert runner.invoke(main, args).exit_code == 0
        first = (out_dir / "dataset.csv").read_bytes()
        assert runner.invoke(main, args).exit_code == 0
        assert (out_dir / "dataset.csv").read_bytes() == first

    def test_global_options_after_command(self, runner, out_dir):
        """Test that --eta, --seed and --out are accepted after the command name."""
        result = runner.invoke(
            main,
            ["simulate", "--state", "vacuum", "--eta", "1", "--phases", "31"]
            + ["--per-bin", "10", "--seed", "7", "--out", str(out_dir)],
        )

        assert result.exit_code == 0, result.output
        dataset = load_csv(out_dir / "dataset.csv")
        assert len(dataset) == 310
        assert dataset.efficiency == 1.0
        assert '"seed":7' in dataset.metadata

    def test_command_flag_overrides_group_flag(self, runner, out_dir):
        """Test that a flag after the command name wins over the group flag."""
        args = ["--eta", "0.9", "--seed", "3", "--out", str(out_dir), "simulate"]
        result = runner.invoke(main, args + ["--seed", "5", "--phases", "3", "--per-bin", "4"])

        assert result.exit_code == 0, result.output
        assert '"seed":5' in load_csv(out_dir / "dataset.csv").metadata


class TestFitGaussianCommand:
    """Tests for fit-gaussian command."""

    def test_fit(self, runner, out_dir, dataset_csv):
        """Test a converged fit and its report."""
        result = runner.invoke(
            main,
            ["--out", str(out_dir), "fit-gaussian", "--data", str(dataset_csv), "--bins", "9"],
        )

        assert result.exit_code == 0, result.output
        report = json.loads((out_dir / "gaussian_report.json").read_text())
        assert report["converged"] is True
        assert report["physicality"]["is_physical"] is True
        assert report["config"]["bins"] == 9
        assert len(report["eigen_variances"]) == 2

    def test_ill_posed_settings(self, runner, temp_dir, out_dir, vacuum):
        """Test that single-phase data exit 3 with an error report."""
        dataset = synthesize(vacuum, None, 1.0, [(Setting(phase=0.3), 200)], seed=0)
        path = save_csv(dataset, temp_dir / "one_phase.csv")
        result = runner.invoke(main, ["--out", str(out_dir), "fit-gaussian", "--data", str(path)])

        assert result.exit_code == 3
        error = json.loads((out_dir / "gaussian_error.json").read_text())
        assert error["missing_directions"]
        assert not (out_dir / "gaussian_report.json").exists()

    def test_no_convergence_exits_3(self, runner, out_dir, dataset_csv, small_dataset, mocker):
        """Test that a non-converged fit still writes its report and exits 3."""
        report = fit_dataset(small_dataset, 9).model_copy(update={"converged": False})
        fit = mocker.patch("homodyne_forge.cli.fit.fit_dataset", return_value=report)
        result = runner.invoke(
            main, ["--out", str(out_dir), "fit-gaussian", "--data", str(dataset_csv)]
        )

        assert result.exit_code == 3
        assert fit.call_args.args[1] == 31
        assert json.loads((out_dir / "gaussian_report.json").read_text())["converged"] is False

    def test_invalid_bins(self, runner, out_dir, dataset_csv):
        """Test that fewer than three bins are rejected."""
        result = runner.invoke(
            main,
            ["--out", str(out_dir), "fit-gaussian", "--data", str(dataset_csv), "--bins", "2"],
        )

        assert result.exit_code == 2

    def test_missing_data(self, runner, out_dir):
        """Test that --data is required."""
        result = runner.invoke(main, ["--out", str(out_dir), "fit-gaussian"])

        assert result.exit_code == 2

    def test_missing_file(self, runner, out_dir, temp_dir):
        """Test that a missing dataset is an input error."""
        result = runner.invoke(
            main, ["--out", str(out_dir), "fit-gaussian", "--data", str(temp_dir / "none.csv")]
        )

        assert result.exit_code == 2
        assert "not found" in result.output

    def test_eta_mismatch_rejected(self, runner, out_dir, dataset_csv):
        """Test that an --eta differing from the file header is an input error."""
        result = runner.invoke(
            main,
            ["--out", str(out_dir), "fit-gaussian", "--data", str(dataset_csv), "--eta", "0.5"],
        )

        assert result.exit_code == 2
        assert "differs" in result.output
        assert not (out_dir / "gaussian_report.json").exists()

    def test_matching_eta_accepted(self, runner, out_dir, dataset_csv):
        """Test that an --eta equal to the file header is accepted."""
        result = runner.invoke(
            main,
            ["--eta", "0.9", "--out", str(out_dir), "fit-gaussian", "--data", str(dataset_csv)]
            + ["--bins", "9"],
        )

        assert result.exit_code == 0, result.output


class TestFitFockCommand:
    """Tests for fit-fock command."""

    def test_reconstruction_outputs(self, runner, out_dir, dataset_csv):
        """Test that the density matrix and Wigner grid are written."""
        args = ["--out", str(out_dir), "fit-fock", "--data", str(dataset_csv), "--dim", "4"]
        args += ["--phase-bins", "9", "--quad-bins", "9", "--max-iterations", "50"]
        args += ["--grid-points", "5", "--grid-extent", "3"]
        result = runner.invoke(main, args)

        assert result.exit_code in (0, 3), result.output
        rho = json.loads((out_dir / "rho_N4.json").read_text())
        assert rho["dim"] == 4
        assert rho["eta"] == 0.9
        assert rho["n_samples"] == 3600
        grid = pd.read_csv(out_dir / "wigner_N4.csv")
        assert list(grid.columns) == ["x", "y", "w"]
        assert len(grid) == 25

    def test_two_mode_rejected(self, runner, out_dir, two_mode_csv):
        """Test that two-mode data are an input error."""
        result = runner.invoke(
            main, ["--out", str(out_dir), "fit-fock", "--data", str(two_mode_csv), "--dim", "4"]
        )

        assert result.exit_code == 2

    def test_dimension_range(self, runner, out_dir, dataset_csv):
        """Test that N above 64 is rejected."""
        result = runner.invoke(
            main, ["--out", str(out_dir), "fit-fock", "--data", str(dataset_csv), "--dim", "65"]
        )

        assert result.exit_code == 2


class TestNormtestCommand:
    """Tests for normtest command."""

    def test_writes_reports(self, runner, out_dir, dataset_csv):
        """Test that the summary and per-bin table are written."""
        result = runner.invoke(
            main,
            ["--out", str(out_dir), "normtest", "--data", str(dataset_csv), "--bin-size", "400"],
        )

        assert result.exit_code == 0, result.output
        summary = json.loads((out_dir / "normality.json").read_text())
        assert len(summary["bins"]) == 9
        assert isinstance(summary["gaussian"], bool)
        assert len(pd.read_csv(out_dir / "normality.csv")) == 9

    def test_invalid_alpha(self, runner, out_dir, dataset_csv):
        """Test that α outside (0, 1) is rejected."""
        result = runner.invoke(
            main, ["--out", str(out_dir), "normtest", "--data", str(dataset_csv), "--alpha", "2"]
        )

        assert result.exit_code == 2


class TestBuildComparison:
    """Tests for build_comparison."""

    def _fock(self, k, dim, ll=-100.0, n=100):
        return DensityMatrix.fock(k, dim), {"log_likelihood": ll, "n_samples": n}

    def test_requires_input(self):
        """Test that empty inputs are rejected."""
        with pytest.raises(ComparisonError):
            build_comparison(None, [])

    def test_second_report_needs_first(self):
        """Test that a second Gaussian report alone is rejected."""
        with pytest.raises(ComparisonError):
            build_comparison(None, [self._fock(0, 3)], against_gaussian=MagicMock())

    def test_hs_distances_to_largest(self):
        """Test distances to the largest-N state, sorted by N."""
        report = build_comparison(None, [self._fock(0, 5), self._fock(1, 3)])

        assert report.reference_dim == 5
        assert [row.dim for row in report.hs_distances] == [3, 5]
        assert report.hs_distances[0].distance == pytest.approx(2.0)
        assert report.hs_distances[1].distance == 0.0
        assert report.fock_log_likelihood_per_sample == pytest.approx(-1.0)

    def test_fock_degradation(self):
        """Test the per-sample likelihood ratio of two reconstructions."""
        report = build_comparison(
            None, [self._fock(0, 4)], against_fock=self._fock(0, 4, ll=-300.0, n=200)
        )

        assert report.degradation["fock"] == pytest.approx(1.5)

    def test_missing_diagnostics(self):
        """Test that density matrices need likelihood diagnostics."""
        with pytest.raises(ComparisonError):
            build_comparison(None, [(DensityMatrix.fock(0, 3), {})])

    def test_covariance_deltas(self, small_dataset):
        """Test Fock covariance minus Ĝ and the truncation warning."""
        gaussian = fit_dataset(small_dataset, 9)
        report = build_comparison(gaussian, [self._fock(0, 4), self._fock(3, 4)])

        assert [row.dim for row in report.covariance_deltas] == [4, 4]
        delta = report.covariance_deltas[0].delta
        assert delta[0][0] == pytest.approx(0.5 - gaussian.covariance.entries[0, 0])
        assert report.gaussian_log_likelihood_per_sample == gaussian.log_likelihood_per_sample
        assert any("top two Fock levels" in w for w in report.warnings)

    def test_two_mode_fit_with_fock(self, small_two_mode_dataset):
        """Test that Fock states cannot be compared with a two-mode fit."""
        gaussian = fit_dataset(small_two_mode_dataset, 7)
        with pytest.raises(ComparisonError):
            build_comparison(gaussian, [self._fock(0, 3)])


class TestCompareCommand:
    """Tests for compare command."""

    def test_no_inputs(self, runner, out_dir):
        """Test that compare needs at least one input."""
        result = runner.invoke(main, ["--out", str(out_dir), "compare"])

        assert result.exit_code == 2

    def test_end_to_end(self, runner, out_dir, dataset_csv):
        """Test comparing command outputs read back from disk."""
        base = ["--out", str(out_dir)]
        fit_args = ["fit-gaussian", "--data", str(dataset_csv), "--bins", "9"]
        fit = runner.invoke(main, base + fit_args)
        assert fit.exit_code == 0, fit.output
        for dim in ("4", "6"):
            fock = runner.invoke(
                main,
                base
                + ["fit-fock", "--data", str(dataset_csv), "--dim", dim]
                + ["--phase-bins", "9", "--quad-bins", "9", "--max-iterations", "30"]
                + ["--grid-points", "3"],
            )
            assert fock.exit_code in (0, 3), fock.output

        result = runner.invoke(
            main,
            base
            + ["compare", "-g", str(out_dir / "gaussian_report.json")]
            + ["-f", str(out_dir / "rho_N4.json"), "-f", str(out_dir / "rho_N6.json")],
        )

        assert result.exit_code in (0, 3), result.output
        comparison = json.loads((out_dir / "comparison.json").read_text())
        assert comparison["reference_dim"] == 6
        assert [row["dim"] for row in comparison["hs_distances"]] == [4, 6]
        assert len(comparison["covariance_deltas"]) == 2


class TestMakeFiguresCommand:
    """Tests for make-figures command."""

    def test_parse_dims(self):
        """Test comma lists and the bracketed form from run files."""
        assert _parse_dims("8, 12") == [8, 12]
        assert _parse_dims("[8, 12]") == [8, 12]
        assert _parse_dims(None) is None
        with pytest.raises(click.BadParameter):
            _parse_dims("8,x")

    def test_outputs(self, runner, out_dir, dataset_csv):
        """Test the CSV tables behind the plots."""
        args = ["--out", str(out_dir), "make-figures", "--data", str(dataset_csv)]
        args += ["--dims", "4,6", "--bins", "9", "--bin-size", "400", "--grid-points", "3"]
        result = runner.invoke(main, args)

        assert result.exit_code in (0, 3), result.output
        hs = pd.read_csv(out_dir / "hs_distance.csv")
        assert hs["dim"].tolist() == [4, 6]
        assert hs["distance"].iloc[-1] == 0.0
        for name in ("normality.csv", "wigner_gaussian.csv", "wigner_N4.csv", "wigner_N6.csv"):
            assert (out_dir / name).exists()
        summary = json.loads((out_dir / "figures.json").read_text())
        assert summary["reference_dim"] == 6

    def test_two_mode_rejected(self, runner, out_dir, two_mode_csv):
        """Test that make-figures is single-mode only."""
        args = ["--out", str(out_dir), "make-figures", "-d", str(two_mode_csv)]
        result = runner.invoke(main, args)

        assert result.exit_code == 2


class TestRunFile:
    """Tests for --config run files."""

    def test_defaults_from_file(self, runner, temp_dir, out_dir):
        """Test that the global section and command sections set defaults."""
        path = temp_dir / "run.yaml"
        path.write_text(
            f"global:\n  seed: 11\n  eta: 1.0\n  out: {out_dir}\n"
            "simulate:\n  phases: 3\n  per-bin: 10\n"
        )
        result = runner.invoke(main, ["--config", str(path), "simulate"])

        assert result.exit_code == 0, result.output
        dataset = load_csv(out_dir / "dataset.csv")
        assert len(dataset) == 30
        assert '"seed":11' in dataset.metadata

    def test_flags_override_file(self, runner, temp_dir, out_dir):
        """Test that explicit flags win over the run file."""
        path = temp_dir / "run.yaml"
        path.write_text(
            f"global:\n  seed: 11\n  eta: 1.0\n  out: {out_dir}\n"
            "simulate:\n  phases: 3\n  per-bin: 10\n"
        )
        result = runner.invoke(
            main, ["--config", str(path), "--seed", "4", "simulate", "--per-bin", "2"]
        )

        assert result.exit_code == 0, result.output
        dataset = load_csv(out_dir / "dataset.csv")
        assert len(dataset) == 6
        assert '"seed":4' in dataset.metadata

    def test_relative_paths_from_config_dir(self, runner, temp_dir, out_dir, small_dataset):
        """Test that data paths resolve against the run file's directory."""
        conf = temp_dir / "conf"
        save_csv(small_dataset, conf / "runs_data.csv")
        path = conf / "run.yaml"
        path.write_text(
            f"global:\n  out: {out_dir}\nnormtest:\n  data: runs_data.csv\n  bin-size: 400\n"
        )
        result = runner.invoke(main, ["--config", str(path), "normtest"])

        assert result.exit_code == 0, result.output
        assert (out_dir / "normality.json").exists()

    def test_unknown_global_key(self, runner, temp_dir):
        """Test that unknown global options are rejected."""
        path = temp_dir / "run.yaml"
        path.write_text("global:\n  sead: 1\n")
        result = runner.invoke(main, ["--config", str(path), "normtest"])

        assert result.exit_code == 2
        assert "sead" in result.output

    def test_malformed_file(self, runner, temp_dir):
        """Test that a malformed run file is an input error."""
        path = temp_dir / "run.yaml"
        path.write_text("simulate: [unclosed\n")
        result = runner.invoke(main, ["--config", str(path), "simulate"])

        assert result.exit_code == 2
