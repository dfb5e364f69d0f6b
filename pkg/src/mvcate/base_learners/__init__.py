from .probability import (
    DegenerateLabelsWarning,
    EmpiricalStratumSpec,
    MultinomialLogisticSpec,
    PointMassModel,
    SoftmaxBoostingSpec,
    fit_probability,
)
from .regressors import (
    BoostingModel,
    ForestModel,
    GradientBoostedSpec,
    LinearBasisModel,
    LinearBasisSpec,
    RandomForestSpec,
    RankDeficientError,
    RegressionTreeSpec,
    TreeModel,
    WeightedTrainingSet,
    fit_regressor,
    linear_spec,
    with_seed,
)

__all__ = [
    "BoostingModel",
    "DegenerateLabelsWarning",
    "EmpiricalStratumSpec",
    "ForestModel",
    "GradientBoostedSpec",
    "LinearBasisModel",
    "LinearBasisSpec",
    "MultinomialLogisticSpec",
    "PointMassModel",
    "RandomForestSpec",
    "RankDeficientError",
    "RegressionTreeSpec",
    "SoftmaxBoostingSpec",
    "TreeModel",
    "WeightedTrainingSet",
    "fit_probability",
    "fit_regressor",
    "linear_spec",
    "with_seed",
]
