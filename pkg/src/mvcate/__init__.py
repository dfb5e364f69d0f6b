"""Meta-learners for conditional average treatment effects with multi-valued treatments."""

from .core import (
    BasisSpec,
    GroundTruth,
    ObservationalSample,
    TreatmentLevels,
    clip_probabilities,
    default_cate_basis,
    make_basis,
)
from .dgp import DgpConfig, generate
from .evaluation import PeheReport, mc_beta_distribution, pehe
from .meta_learners import (
    SCENARIOS,
    CateEstimate,
    NuisanceSet,
    Scenario,
    estimate_nuisances,
    exact_nuisances,
    fit_all,
    t_learner,
)
from .r_linear import r_learner

__version__ = "0.1.0"

__all__ = [
    "SCENARIOS",
    "BasisSpec",
    "CateEstimate",
    "DgpConfig",
    "GroundTruth",
    "NuisanceSet",
    "ObservationalSample",
    "PeheReport",
    "Scenario",
    "TreatmentLevels",
    "clip_probabilities",
    "default_cate_basis",
    "estimate_nuisances",
    "exact_nuisances",
    "fit_all",
    "generate",
    "make_basis",
    "mc_beta_distribution",
    "pehe",
    "r_learner",
    "t_learner",
]
