"""
homodyne-forge: Gaussian-state tomography from homodyne data.

This package estimates covariance matrices of one- and two-mode Gaussian
states from phase-tagged homodyne samples with support for:
- Maximum-likelihood fitting by a relaxed fixed-point iteration
- Beam-splitter settings for two-mode covariance reconstruction
- A truncated Fock-space RρR reconstruction as a baseline
- Jarque-Bera and Shapiro-Wilk Gaussianity tests per phase bin
- Seeded synthetic datasets, CSV/JSON I/O and a command-line interface

Example usage:
    from homodyne_forge import CovarianceMatrix, fit_dataset, single_mode_plan, synthesize

    G = CovarianceMatrix(entries=[[2.38, -0.53], [-0.53, 0.55]])
    data = synthesize(G, None, eta=0.88, plan=single_mode_plan(31, 10_000), seed=7)
    report = fit_dataset(data, n_bins=31)
    print(report.covariance.entries, report.physicality.is_physical)
"""

import logging

from homodyne_forge.__about__ import __version__
from homodyne_forge.dataset import (
    DatasetError,
    bin_by_phase,
    single_mode_plan,
    synthesize,
    two_mode_plan,
)
from homodyne_forge.fock import (
    FockError,
    covariance_from_rho,
    gaussian_to_rho,
    ml_reconstruct,
    reconstruct_dataset,
    wigner_from_rho,
)
from homodyne_forge.gaussian import GaussianStateError, check_physical, williamson
from homodyne_forge.gaussianity import NormalityError, normality_report
from homodyne_forge.mle import IllPosedError, LikelihoodDomainError, estimate, fit_dataset
from homodyne_forge.models import (
    CovarianceMatrix,
    DensityMatrix,
    DisplacementVector,
    EstimatorConfig,
    EstimatorReport,
    FockConfig,
    HomodyneDataset,
    HomodyneForgeError,
    ModeSelector,
    Setting,
)
from homodyne_forge.parsers import ParserError, load_csv
from homodyne_forge.serializer import SerializerError, save_csv

__all__ = [
    "__version__",
    # Errors
    "HomodyneForgeError",
    "GaussianStateError",
    "DatasetError",
    "IllPosedError",
    "LikelihoodDomainError",
    "FockError",
    "NormalityError",
    "ParserError",
    "SerializerError",
    # Models
    "CovarianceMatrix",
    "DisplacementVector",
    "Setting",
    "ModeSelector",
    "HomodyneDataset",
    "EstimatorConfig",
    "EstimatorReport",
    "DensityMatrix",
    "FockConfig",
    # Gaussian core
    "check_physical",
    "williamson",
    # Data
    "single_mode_plan",
    "two_mode_plan",
    "synthesize",
    "bin_by_phase",
    "load_csv",
    "save_csv",
    # Estimation
    "estimate",
    "fit_dataset",
    "reconstruct_dataset",
    "ml_reconstruct",
    "covariance_from_rho",
    "gaussian_to_rho",
    "wigner_from_rho",
    # Diagnostics
    "normality_report",
]

# Setup logging
logging.getLogger(__name__).addHandler(logging.NullHandler())
