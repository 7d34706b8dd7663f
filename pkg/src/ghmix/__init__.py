"""Mixtures of generalized hyperbolic, multiple-scaled, and coalesced
generalized hyperbolic distributions for model-based clustering,
classification, and discriminant analysis."""

from ghmix.densities import (
    FAMILIES,
    CGHDComponent,
    MixtureModel,
    cghd_log_density,
    ghd_log_density,
    mixture_log_density,
    msghd_log_density,
)
from ghmix.inference import (
    FitConfig,
    FitResult,
    fit,
    fit_classification,
    fit_discriminant,
)
from ghmix.labels import ari, confusion, map_labels
from ghmix.selection import ModelScore, bic, count_free_params, select
from ghmix.simulate import ScenarioSpec, generate_scenario

__all__ = [
    "FAMILIES",
    "CGHDComponent",
    "MixtureModel",
    "ghd_log_density",
    "msghd_log_density",
    "cghd_log_density",
    "mixture_log_density",
    "FitConfig",
    "FitResult",
    "fit",
    "fit_classification",
    "fit_discriminant",
    "ari",
    "confusion",
    "map_labels",
    "ModelScore",
    "bic",
    "count_free_params",
    "select",
    "ScenarioSpec",
    "generate_scenario",
]

__version__ = "0.1.0"
