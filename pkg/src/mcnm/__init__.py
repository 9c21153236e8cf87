"""Clustering, outlier detection and imputation with mixtures of contaminated normals."""

from .data import Dataset, ObservationView, load_dataset, observation_views, write_dataset
from .ecm import (EStepState, McnComponent, McnmModel, classify_points, cm_step_1,
                  cm_step_2, e_step, fit_mcnm, observed_mcn_log_likelihood)
from .fitting import FitConfig, FitResult
from .linalg import (conditional_normal, log_sum_exp, mcn_log_density, mn_log_density,
                     squared_mahalanobis)
from .metrics import adjusted_rand_index, outlier_rates
from .simulate import AmputationConfig, ScenarioConfig, ampute, generate_scenario
from .tmix import fit_tmix

__version__ = "0.1.0"

__all__ = [
    "AmputationConfig", "Dataset", "EStepState", "FitConfig", "FitResult",
    "McnComponent", "McnmModel", "ObservationView", "ScenarioConfig",
    "adjusted_rand_index", "ampute", "classify_points", "cm_step_1", "cm_step_2",
    "conditional_normal", "e_step", "fit_mcnm", "fit_tmix", "generate_scenario",
    "load_dataset", "log_sum_exp", "mcn_log_density", "mn_log_density",
    "observation_views", "observed_mcn_log_likelihood", "outlier_rates",
    "squared_mahalanobis", "write_dataset",
]
