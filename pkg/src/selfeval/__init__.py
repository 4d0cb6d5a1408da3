"""SelfEval: likelihood-based self-evaluation of conditional diffusion models.

Estimates p(x0 | c) from a conditional denoiser by noising real inputs and
accumulating reverse-transition log densities, then uses the resulting
posterior to classify, score image/text pairs, and evaluate models on a
synthetic six-task benchmark with closed-form Gaussian oracles.
"""

from .conditions import Condition, EMBEDDING_DIM
from .denoisers import (
    ConditionBlindDenoiser,
    Denoiser,
    DenoiserOutput,
    GaussianClassModel,
    MlpDenoiser,
    ZeroEpsDenoiser,
    analytic_posterior_x0,
    denoise,
)
from .errors import DataError, NumericalError, ParameterError, SelfEvalError
from .estimator import (
    EstimatorConfig,
    LikelihoodEstimate,
    Posterior,
    classify,
    elbo_proxy_score,
    estimate_log_likelihood,
    image_text_scores,
)
from .metrics import TaskResult, VoteTally, accuracy, chance_delta, spearman_rho, votes_from_predictions
from .schedule import (
    DiagGaussian,
    NoiseSchedule,
    Trajectory,
    build_schedule,
    forward_trajectory,
    gaussian_log_pdf,
    q_sample,
)
from .training import ConditionedSample, TrainingLog, train_mlp

__version__ = "0.1.0"

__all__ = [
    "Condition",
    "ConditionBlindDenoiser",
    "ConditionedSample",
    "DataError",
    "Denoiser",
    "DenoiserOutput",
    "DiagGaussian",
    "EMBEDDING_DIM",
    "EstimatorConfig",
    "GaussianClassModel",
    "LikelihoodEstimate",
    "MlpDenoiser",
    "NoiseSchedule",
    "NumericalError",
    "ParameterError",
    "Posterior",
    "SelfEvalError",
    "TaskResult",
    "TrainingLog",
    "Trajectory",
    "VoteTally",
    "ZeroEpsDenoiser",
    "accuracy",
    "analytic_posterior_x0",
    "build_schedule",
    "chance_delta",
    "classify",
    "denoise",
    "elbo_proxy_score",
    "estimate_log_likelihood",
    "forward_trajectory",
    "gaussian_log_pdf",
    "image_text_scores",
    "q_sample",
    "spearman_rho",
    "train_mlp",
    "votes_from_predictions",
]
