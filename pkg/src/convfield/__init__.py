"""Sequence labeling with a convolutional feature extractor over a chain CRF.

The package trains the model under three objectives - log-likelihood,
smoothed labelwise accuracy, and a polynomial ranking-AUC surrogate - and
ships a CLI (`convfield`) for training, prediction, evaluation, gradient
checking, synthetic data generation and objective benchmarking.
"""

from .convnet import ConvNetArch, conv_backward, conv_forward, default_arch
from .crf import (AugmentedTables, CrfParams, FBTables, PotentialTable,
                  augmented_forward_backward, compute_potentials, decode_posterior,
                  expected_transition_counts, forward_backward,
                  marginal_functional_grads, sequence_log_probability)
from .data import (Dataset, LabelAlphabet, LabeledSequence, SyntheticSpec,
                   generate_synthetic, label_frequencies, load_dataset, save_dataset)
from .errors import (CompatibilityError, DataFormatError, DegenerateLabelingError,
                     NumericalError)
from .metrics import (ConfusionCounts, MetricsReport, empirical_auc, evaluate_model,
                      per_label_metrics, qx_accuracy)
from .model import ModelParams, pack, param_count, unpack
from .modelio import load_model, save_model
from .objectives import (ObjectiveKind, RegConfig, ValueGrad, auc_dataset,
                         labelwise_seq, loglik_seq, objective_value_grad)
from .optimize import (InitConfig, LbfgsConfig, TrainingTrace, init_params,
                       lbfgs_maximize, lbfgs_maximize_vector)
from .stepapprox import (StepApprox, build_step_approx, chebyshev_series_coeffs,
                         eval_poly, eval_poly_derivative)

__version__ = "0.1.0"

__all__ = [
    "AugmentedTables", "CompatibilityError", "ConfusionCounts", "ConvNetArch",
    "CrfParams", "DataFormatError", "Dataset", "DegenerateLabelingError",
    "FBTables", "InitConfig", "LabelAlphabet", "LabeledSequence", "LbfgsConfig",
    "MetricsReport", "ModelParams", "NumericalError", "ObjectiveKind",
    "PotentialTable", "RegConfig", "StepApprox", "SyntheticSpec", "TrainingTrace",
    "ValueGrad", "auc_dataset", "augmented_forward_backward", "build_step_approx",
    "chebyshev_series_coeffs", "compute_potentials", "conv_backward", "conv_forward",
    "decode_posterior", "default_arch", "empirical_auc", "evaluate_model",
    "expected_transition_counts", "forward_backward", "generate_synthetic",
    "init_params", "label_frequencies", "labelwise_seq", "lbfgs_maximize",
    "lbfgs_maximize_vector", "load_dataset", "load_model", "loglik_seq",
    "marginal_functional_grads", "metrics", "objective_value_grad", "pack",
    "param_count", "per_label_metrics", "qx_accuracy", "save_dataset", "save_model",
    "sequence_log_probability", "unpack",
]
