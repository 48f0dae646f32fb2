"""Spatial von Mises(-Fisher) mixtures for directions of change on the simplex."""
from ._accel import backend
from .geometry import (DirectionObservation, as_simplex_point, arctan_star, spherical_to_cartesian,
                       cartesian_to_spherical, rotation_matrix, extract_direction,
                       reconstruct_endpoint, geodesic_point, direction_to_unit, unit_to_direction,
                       label_direction)
from .distributions import (VonMisesParams, VonMisesFisherParams, log_bessel_i, bessel_i, bessel_ie,
                            bessel_ratio, vmf_log_normalizer, vm_logpdf, vmf_logpdf, vm_sample,
                            vmf_sample)
from .gp import KernelConfig, CovarianceFactor, kernel_matrix, factorize, build_covariance, \
    conditional_gaussian
from .model import ModelSpec, ParameterState, Dataset, prepare_dataset, log_joint
from .sampler import SamplerConfig, PosteriorChain, run_chain, tune_step_size
from .em_init import EmConfig, EmState, run_em
from .baselines import HomogeneousSpec, HomogeneousFit, fit_homogeneous
from .selection import PredictiveReport, SpatialFit, posterior_predictive, predictive_from_fit, \
    select_model
from .simulate import ScenarioConfig, GroundTruth, generate
from .diagnostics import (circular_mean, circular_interval, circular_summary,
                          credible_region_highdim, rhat, recovery_report, UndefinedMeanError)

__version__ = "0.1.0"
