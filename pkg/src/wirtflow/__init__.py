"""Wirtinger gradient descent solvers for low-dose Poisson phase retrieval.

The package provides:

* a dense measurement-frame abstraction with power iteration
  (:mod:`wirtflow.linalg`),
* the intensity-loss family with Wirtinger gradients and certified
  curvature bounds (:mod:`wirtflow.losses`),
* variance-stabilization analysis for Poisson counts (:mod:`wirtflow.vst`),
* seeded low-dose instance simulation (:mod:`wirtflow.simulate`),
* the descent loop and a scikit-learn style estimator
  (:mod:`wirtflow.solver`, :mod:`wirtflow.estimator`),
* evaluation metrics and the benchmark CLI (:mod:`wirtflow.metrics`,
  :mod:`wirtflow.cli`).
"""

from .estimator import WirtingerDescent
from .exceptions import (ConfigError, DomainError, NoBracketError,
                         NoConstantBoundError, StagnationError)
from .linalg import (MeasurementFrame, SpectralEstimate,
                     complex_standard_normal, leading_eig, spectral_norm)
from .losses import (LOSS_KINDS, AmplitudeLoss, AveragingVstLoss,
                     GaussianLeastSquaresLoss, GradEval, IntensityLoss,
                     RegularizedPoissonLoss, ShiftedSqrtLoss,
                     UnbiasedPoissonLoss, ZeroAdaptedVstLoss, make_loss)
from .metrics import RunSummary, aggregate, relative_error
from .simulate import (CountHistogram, FrameSpec, ProblemInstance,
                       build_frame, gen_gaussian_instance, gen_instance,
                       gen_ptycho_frame, histogram, load_instance,
                       sample_poisson, save_instance, snr)
from .solver import (InitResult, SolverConfig, SolverRun, backtracking_step,
                     solve, spectral_init)
from .vst import (MomentReport, Transform, anscombe, averaging,
                  make_transform, optimal_shift, shifted_sqrt,
                  sqrt_transform, transformed_moments, tukey_freeman,
                  variance_curve)

__version__ = "0.1.0"

__all__ = [
    "WirtingerDescent",
    "ConfigError", "DomainError", "NoBracketError", "NoConstantBoundError",
    "StagnationError",
    "MeasurementFrame", "SpectralEstimate", "complex_standard_normal",
    "leading_eig", "spectral_norm",
    "LOSS_KINDS", "AmplitudeLoss", "AveragingVstLoss",
    "GaussianLeastSquaresLoss", "GradEval", "IntensityLoss",
    "RegularizedPoissonLoss", "ShiftedSqrtLoss", "UnbiasedPoissonLoss",
    "ZeroAdaptedVstLoss", "make_loss",
    "RunSummary", "aggregate", "relative_error",
    "CountHistogram", "FrameSpec", "ProblemInstance", "build_frame",
    "gen_gaussian_instance", "gen_instance", "gen_ptycho_frame", "histogram",
    "load_instance", "sample_poisson", "save_instance", "snr",
    "InitResult", "SolverConfig", "SolverRun", "backtracking_step", "solve",
    "spectral_init",
    "MomentReport", "Transform", "anscombe", "averaging", "make_transform",
    "optimal_shift", "shifted_sqrt", "sqrt_transform", "transformed_moments",
    "tukey_freeman", "variance_curve",
    "__version__",
]
