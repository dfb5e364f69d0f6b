"""Plug-in and pseudo-outcome meta-learners for multi-valued treatments.

Nuisances (propensity, outcome surfaces, observed-outcome model) are fitted
once on the full sample and shared by every learner. The outcome surfaces
come from one of three strategies:

* ``T``: one regressor per treatment stratum
* ``RegT``: as ``T`` but each stratum fit is weighted by ``1 / r(t, X)``,
  which reweights the stratum towards the covariate marginal
* ``S``: a single regressor on ``(t, x)``
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .base_learners import with_seed
from .base_learners.probability import ProbabilitySpec
from .base_learners.regressors import LinearBasisSpec, RegressorSpec
from .core import (
    DEFAULT_CLIP_FLOOR,
    GroundTruth,
    ObservationalSample,
    TreatmentLevels,
    clip_probabilities,
    default_cate_basis,
    intercept_basis,
    split_by_treatment,
)


class Strategy(str, Enum):
    T = "T"
    S = "S"
    REGT = "RegT"


class Provenance(str, Enum):
    EXACT = "exact"
    ESTIMATED = "estimated"
    MISSPECIFIED = "misspecified"


class EmptyStratumError(ValueError):
    def __init__(self, level: int):
        super().__init__(f"treatment level {level} has no observations")
        self.level = level


def child_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


# --------------------------------------------------------------------------
# outcome models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StratifiedOutcome:
    """Per-level regressors ``mu_t`` (T- and RegT-strategies)."""

    models: Mapping[int, object]
    strategy: Strategy = Strategy.T

    def predict(self, k: int, X) -> np.ndarray:
        return self.models[k].predict(X)


@dataclass(frozen=True)
class PooledOutcome:
    """Single regressor on ``(t, x)`` (S-strategy)."""

    model: object
    levels: TreatmentLevels
    strategy: Strategy = Strategy.S

    def predict(self, k: int, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        X = X.reshape(-1, 1) if X.ndim == 1 else X
        return self.model.predict(np.column_stack([np.full(X.shape[0], self.levels[k]), X]))


@dataclass(frozen=True)
class ExactOutcome:
    truth: GroundTruth
    strategy: Strategy = Strategy.T

    def predict(self, k: int, X) -> np.ndarray:
        return self.truth.mu(k, X)


@dataclass(frozen=True)
class NuisanceSet:
    levels: TreatmentLevels
    outcome: object | None = None
    gps: Callable[[np.ndarray], np.ndarray] | None = None
    m_hat: Callable[[np.ndarray], np.ndarray] | None = None
    clip_floor: float = DEFAULT_CLIP_FLOOR
    provenance: Mapping[str, Provenance] = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.levels.K

    def raw_propensity(self, X) -> np.ndarray:
        if self.gps is None:
            raise ValueError("nuisance set has no propensity model")
        return np.asarray(self.gps(np.asarray(X, dtype=float)), dtype=float)

    def propensity(self, X) -> np.ndarray:
        """Clipped (n, K+1) propensity matrix; safe to divide by."""
        return clip_probabilities(self.raw_propensity(X), self.clip_floor)

    def mu(self, k: int, X) -> np.ndarray:
        if self.outcome is None:
            raise ValueError("nuisance set has no outcome model")
        return np.asarray(self.outcome.predict(k, X), dtype=float)

    def mu_matrix(self, X) -> np.ndarray:
        return np.column_stack([self.mu(k, X) for k in range(self.K + 1)])

    def mu_observed(self, sample: ObservationalSample) -> np.ndarray:
        """``mu_{T_i}(X_i)``: each row's outcome model at its own treatment."""
        out = np.empty(sample.n)
        for k, rows in split_by_treatment(sample).items():
            if rows.size:
                out[rows] = self.mu(k, sample.covariates[rows])
        return out

    def observed_mean(self, X) -> np.ndarray:
        if self.m_hat is None:
            raise ValueError("nuisance set has no observed-outcome model")
        return np.asarray(self.m_hat(np.asarray(X, dtype=float)), dtype=float)


def uniform_gps(K: int) -> Callable[[np.ndarray], np.ndarray]:
    return lambda X: np.full((np.asarray(X).shape[0], K + 1), 1.0 / (K + 1))


def exact_nuisances(truth: GroundTruth, clip_floor: float = DEFAULT_CLIP_FLOOR) -> NuisanceSet:
    return NuisanceSet(
        levels=truth.levels,
        outcome=ExactOutcome(truth),
        gps=truth.gps,
        m_hat=truth.m,
        clip_floor=clip_floor,
        provenance={"gps": Provenance.EXACT, "mu": Provenance.EXACT, "m": Provenance.EXACT},
    )


def fit_gps(sample: ObservationalSample, gps_spec: ProbabilitySpec) -> Callable:
    model = gps_spec.fit(sample.covariates, sample.treatment_idx, sample.K + 1)
    return model.predict_proba


def fit_outcome_models(
    sample: ObservationalSample,
    strategy: Strategy | str,
    base_spec: RegressorSpec,
    *,
    gps: Callable | None = None,
    clip_floor: float = DEFAULT_CLIP_FLOOR,
    seed: int = 0,
):
    """Fit ``mu_t`` for every level with the chosen strategy."""
    strategy = Strategy(strategy)
    X, Y = sample.covariates, sample.outcome
    if strategy is Strategy.S:
        inputs = np.column_stack([sample.treatment, X])
        model = with_seed(base_spec, child_seed(seed, 0)).fit(inputs, Y)
        return PooledOutcome(model, sample.levels)
    if strategy is Strategy.REGT and gps is None:
        raise ValueError("RegT strategy needs a propensity model")
    strata = split_by_treatment(sample)
    weights = None
    if strategy is Strategy.REGT:
        weights = 1.0 / clip_probabilities(gps(X), clip_floor)
    models = {}
    for k, rows in strata.items():
        if rows.size == 0:
            raise EmptyStratumError(k)
        w = None if weights is None else weights[rows, k]
        models[k] = with_seed(base_spec, child_seed(seed, 1, k)).fit(X[rows], Y[rows], w)
    return StratifiedOutcome(models, strategy)


def estimate_nuisances(
    sample: ObservationalSample,
    strategy: Strategy | str,
    gps_spec: ProbabilitySpec | Callable | None,
    base_spec: RegressorSpec,
    *,
    fit_m: bool = True,
    clip_floor: float = DEFAULT_CLIP_FLOOR,
    seed: int = 0,
) -> NuisanceSet:
    """Estimate every nuisance from ``sample`` (Full-Sample strategy).

    ``gps_spec`` is a probability-estimator spec to fit, an already fitted
    ``X -> (n, K+1)`` callable, or ``None`` when no learner needs it.
    """
    if gps_spec is None:
        gps = None
    elif hasattr(gps_spec, "fit"):
        gps = fit_gps(sample, gps_spec)
    else:
        gps = gps_spec
    outcome = fit_outcome_models(
        sample, strategy, base_spec, gps=gps, clip_floor=clip_floor, seed=seed
    )
    m_hat = None
    if fit_m:
        m_hat = with_seed(base_spec, child_seed(seed, 2)).fit(sample.covariates, sample.outcome).predict
    prov = {"mu": Provenance.ESTIMATED}
    if gps is not None:
        prov["gps"] = Provenance.ESTIMATED
    if m_hat is not None:
        prov["m"] = Provenance.ESTIMATED
    return NuisanceSet(sample.levels, outcome, gps, m_hat, clip_floor, prov)


# --------------------------------------------------------------------------
# CATE estimates
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CateEstimate:
    """Fitted ``tau_k`` predictors for k = 1..K."""

    per_k: Mapping[int, object]
    tag: str
    flags: frozenset = frozenset()
    diagnostics: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        keys = sorted(self.per_k)
        if keys != list(range(1, len(keys) + 1)):
            raise ValueError(f"per_k must cover exactly 1..K, got {keys}")

    @property
    def K(self) -> int:
        return len(self.per_k)

    def predict_k(self, k: int, X) -> np.ndarray:
        return np.asarray(self.per_k[k].predict(X), dtype=float)

    def predict(self, X) -> np.ndarray:
        """(n, K) matrix; column k-1 holds tau_k."""
        return np.column_stack([self.predict_k(k, X) for k in range(1, self.K + 1)])


@dataclass(frozen=True)
class PlugInDifference:
    """``mu_{t_k}(x) - mu_{t_0}(x)``, evaluated on demand."""

    outcome: object
    k: int

    def predict(self, X) -> np.ndarray:
        return self.outcome.predict(self.k, X) - self.outcome.predict(0, X)

    @property
    def coef(self) -> np.ndarray:
        models = self.outcome.models
        return models[self.k].coef - models[0].coef


def t_learner(nuisances: NuisanceSet, tag: str | None = None) -> CateEstimate:
    """Plug-in learner; T-, RegT- or S-learner depending on the outcome strategy."""
    outcome = nuisances.outcome
    if outcome is None:
        raise ValueError("plug-in learner needs outcome models")
    tag = tag or Strategy(outcome.strategy).value
    return CateEstimate({k: PlugInDifference(outcome, k) for k in range(1, nuisances.K + 1)}, tag)


def pseudo_outcome_m(sample: ObservationalSample, nuisances: NuisanceSet, k: int) -> np.ndarray:
    """Inverse-propensity pseudo-outcome ``1{T=t_k} Y / r_k - 1{T=t_0} Y / r_0``."""
    R = nuisances.propensity(sample.covariates)
    T, Y = sample.treatment_idx, sample.outcome
    return (T == k) * Y / R[:, k] - (T == 0) * Y / R[:, 0]


def pseudo_outcome_dr(sample: ObservationalSample, nuisances: NuisanceSet, k: int) -> np.ndarray:
    """Doubly robust pseudo-outcome."""
    X, T, Y = sample.covariates, sample.treatment_idx, sample.outcome
    R = nuisances.propensity(X)
    resid = Y - nuisances.mu_observed(sample)
    mu_k = nuisances.mu(k, X)
    mu_0 = nuisances.mu(0, X)
    return (T == k) * resid / R[:, k] + mu_k - (T == 0) * resid / R[:, 0] - mu_0


def pseudo_outcome_x(sample: ObservationalSample, nuisances: NuisanceSet, k: int) -> np.ndarray:
    """Regression-adjustment pseudo-outcome.

    Rows treated at ``t_k`` contribute ``Y - mu_0``; every other row
    (including the baseline) contributes ``(mu_k - Y) + (mu_T - mu_0)``.
    """
    X, T, Y = sample.covariates, sample.treatment_idx, sample.outcome
    mu_k = nuisances.mu(k, X)
    mu_0 = nuisances.mu(0, X)
    mu_T = nuisances.mu_observed(sample)
    on_k = T == k
    return np.where(on_k, Y - mu_0, (mu_k - Y) + (mu_T - mu_0))


PSEUDO_OUTCOMES = {"M": pseudo_outcome_m, "DR": pseudo_outcome_dr, "X": pseudo_outcome_x}


def fit_pseudo_learner(sample: ObservationalSample, pseudo, base_spec: RegressorSpec):
    """Regress a pseudo-outcome on the covariates over the full sample."""
    pseudo = np.asarray(pseudo, dtype=float)
    if not np.all(np.isfinite(pseudo)):
        raise ValueError("pseudo-outcome has non-finite entries")
    return base_spec.fit(sample.covariates, pseudo)


def pseudo_outcome_learner(
    sample: ObservationalSample,
    nuisances: NuisanceSet,
    kind: str,
    base_spec: RegressorSpec,
    *,
    tag: str | None = None,
    seed: int = 0,
) -> CateEstimate:
    """M-, DR- or X-learner: one regression per level k = 1..K."""
    build = PSEUDO_OUTCOMES[kind]
    per_k = {}
    for k in range(1, sample.K + 1):
        spec = with_seed(base_spec, child_seed(seed, 3, k))
        per_k[k] = fit_pseudo_learner(sample, build(sample, nuisances, k), spec)
    return CateEstimate(per_k, tag or kind)


@dataclass(frozen=True)
class NaiveXCombination:
    """Propensity-weighted blend of the two naive X-learner regressions.

    Weights use the raw (unclipped) propensities; where both are zero the
    two regressions get equal weight.
    """

    tau_treated: object
    tau_control: object
    gps: Callable
    k: int

    def weights(self, X) -> tuple[np.ndarray, np.ndarray]:
        R = np.asarray(self.gps(np.asarray(X, dtype=float)), dtype=float)
        rk, r0 = R[:, self.k], R[:, 0]
        total = rk + r0
        safe = np.where(total > 0, total, 1.0)
        wk = np.where(total > 0, rk / safe, 0.5)
        return wk, 1.0 - wk

    def predict(self, X) -> np.ndarray:
        wk, w0 = self.weights(X)
        return wk * self.tau_treated.predict(X) + w0 * self.tau_control.predict(X)

    @property
    def coef(self) -> np.ndarray:
        """Shared coefficients when both component fits agree (linear bases)."""
        a, b = self.tau_treated.coef, self.tau_control.coef
        if not np.allclose(a, b, rtol=1e-9, atol=1e-10):
            raise ValueError("component fits differ; the blend is not linear in the basis")
        return 0.5 * (a + b)


def naive_x_entry(
    sample: ObservationalSample,
    nuisances: NuisanceSet,
    base_spec: RegressorSpec,
    k: int,
    *,
    seed: int = 0,
) -> NaiveXCombination:
    """One ``tau_k`` of the naive multi-level X-learner.

    The stratum outcome models of ``nuisances`` are reused inside the
    imputed effects ``D^(k) = Y - mu_0(X)`` (on S_k) and
    ``D^(0) = mu_k(X) - Y`` (on S_0).
    """
    strata = split_by_treatment(sample)
    for level in (k, 0):
        if strata[level].size == 0:
            raise EmptyStratumError(level)
    X, Y = sample.covariates, sample.outcome
    rows_k, rows_0 = strata[k], strata[0]
    d_treated = Y[rows_k] - nuisances.mu(0, X[rows_k])
    d_control = nuisances.mu(k, X[rows_0]) - Y[rows_0]
    tau_treated = with_seed(base_spec, child_seed(seed, 4, k)).fit(X[rows_k], d_treated)
    tau_control = with_seed(base_spec, child_seed(seed, 5, k)).fit(X[rows_0], d_control)
    if nuisances.gps is None:
        raise ValueError("naive X-learner needs a propensity model")
    return NaiveXCombination(tau_treated, tau_control, nuisances.raw_propensity, k)


def naive_x_learner(
    sample: ObservationalSample, nuisances: NuisanceSet, base_spec: RegressorSpec, *, seed: int = 0
) -> CateEstimate:
    per_k = {
        k: naive_x_entry(sample, nuisances, base_spec, k, seed=seed) for k in range(1, sample.K + 1)
    }
    return CateEstimate(per_k, "NvX")


# --------------------------------------------------------------------------
# scenarios
# --------------------------------------------------------------------------

PLUG_IN = ("T", "RegT", "S", "NvX")
PSEUDO_T = ("DR-T", "X-T")
PSEUDO_S = ("DR-S", "X-S")
ESTIMATED_MU_LEARNERS = ("T", "RegT", "S", "NvX", "M", "DR-T", "DR-S", "X-T", "X-S", "RLin")
EXACT_MU_LEARNERS = ("M", "DR", "X", "RLin")
GPS_DEPENDENT = {"M", "DR", "DR-T", "DR-S", "RLin"}
MU_DEPENDENT = {"T", "RegT", "S", "NvX", "DR", "DR-T", "DR-S", "X", "X-T", "X-S"}


@dataclass(frozen=True)
class Scenario:
    """Provenance of each nuisance component.

    Misspecified propensities are replaced by the uniform ``1/(K+1)``;
    misspecified outcome and observed-outcome models are fitted with an
    intercept-only basis.
    """

    name: str = "estimated"
    gps: Provenance = Provenance.ESTIMATED
    mu: Provenance = Provenance.ESTIMATED
    m: Provenance = Provenance.ESTIMATED

    def __post_init__(self):
        for attr in ("gps", "mu", "m"):
            object.__setattr__(self, attr, Provenance(getattr(self, attr)))

    def learners(self) -> tuple[str, ...]:
        return EXACT_MU_LEARNERS if self.mu is Provenance.EXACT else ESTIMATED_MU_LEARNERS

    def flags_for(self, tag: str) -> frozenset:
        flags = set()
        if self.gps is Provenance.MISSPECIFIED and tag in GPS_DEPENDENT:
            flags.add("gps-misspecified")
        if self.mu is Provenance.MISSPECIFIED and tag in MU_DEPENDENT:
            flags.add("mu-misspecified")
        return frozenset(flags)


SCENARIOS = {
    "exact": Scenario("exact", "exact", "exact", "exact"),
    "estimated": Scenario("estimated", "estimated", "estimated", "estimated"),
    "gps-misspecified": Scenario("gps-misspecified", "misspecified", "exact", "exact"),
    "mu-misspecified": Scenario("mu-misspecified", "exact", "misspecified", "misspecified"),
    "all-misspecified": Scenario("all-misspecified", "misspecified", "misspecified", "misspecified"),
}


def get_scenario(name_or_scenario) -> Scenario:
    if isinstance(name_or_scenario, Scenario):
        return name_or_scenario
    try:
        return SCENARIOS[name_or_scenario]
    except KeyError:
        raise ValueError(f"unknown scenario {name_or_scenario!r}; choose from {sorted(SCENARIOS)}") from None


def _scenario_gps(scenario, sample, truth, gps_spec):
    if scenario.gps is Provenance.EXACT:
        return truth.gps
    if scenario.gps is Provenance.MISSPECIFIED:
        return uniform_gps(sample.K)
    if gps_spec is None:
        raise ValueError("estimated propensities need a gps_spec")
    return fit_gps(sample, gps_spec)


def _scenario_m(scenario, sample, truth, base_spec, seed):
    if scenario.m is Provenance.EXACT:
        return truth.m
    spec = LinearBasisSpec(intercept_basis()) if scenario.m is Provenance.MISSPECIFIED else base_spec
    return with_seed(spec, child_seed(seed, 2)).fit(sample.covariates, sample.outcome).predict


def fit_all(
    sample: ObservationalSample,
    scenario,
    base_spec: RegressorSpec,
    *,
    truth: GroundTruth | None = None,
    gps_spec: ProbabilitySpec | None = None,
    learners: Sequence[str] | None = None,
    rlin_basis=None,
    clip_floor: float = DEFAULT_CLIP_FLOOR,
    seed: int = 0,
) -> dict[str, CateEstimate]:
    """Fit every applicable learner under a nuisance scenario.

    ``learners=None`` selects all learners applicable to the scenario; an
    explicit list is intersected with them (so ``[]`` gives ``{}``).
    """
    from .r_linear import r_learner

    scenario = get_scenario(scenario)
    applicable = scenario.learners()
    wanted = applicable if learners is None else tuple(t for t in learners if t in applicable)
    if not wanted:
        return {}
    needs_truth = Provenance.EXACT in (scenario.gps, scenario.mu, scenario.m)
    if needs_truth and truth is None:
        raise ValueError(f"scenario {scenario.name!r} needs the ground truth")
    uses_gps = any(t in ("RegT", "NvX", "M", "RLin") or t.startswith("DR") for t in wanted)
    gps = _scenario_gps(scenario, sample, truth, gps_spec) if uses_gps else None
    m_hat = _scenario_m(scenario, sample, truth, base_spec, seed) if "RLin" in wanted else None

    mu_spec = base_spec
    if scenario.mu is Provenance.MISSPECIFIED:
        mu_spec = LinearBasisSpec(intercept_basis())

    def nuisances_for(strategy: Strategy) -> NuisanceSet:
        if scenario.mu is Provenance.EXACT:
            outcome = ExactOutcome(truth)
        else:
            outcome = fit_outcome_models(
                sample, strategy, mu_spec, gps=gps, clip_floor=clip_floor, seed=seed
            )
        prov = {"gps": scenario.gps, "mu": scenario.mu, "m": scenario.m}
        return NuisanceSet(sample.levels, outcome, gps, m_hat, clip_floor, prov)

    cache: dict[Strategy, NuisanceSet] = {}

    def nuis(strategy: Strategy) -> NuisanceSet:
        if strategy not in cache:
            cache[strategy] = nuisances_for(strategy)
        return cache[strategy]

    out: dict[str, CateEstimate] = {}
    for tag in wanted:
        started = time.perf_counter()
        if tag in ("T", "S", "RegT"):
            est = t_learner(nuis(Strategy(tag)), tag)
        elif tag == "NvX":
            est = naive_x_learner(sample, nuis(Strategy.T), base_spec, seed=seed)
        elif tag == "M":
            # needs only the propensities, so no outcome fits (or empty-stratum errors)
            gps_only = NuisanceSet(sample.levels, None, gps, m_hat, clip_floor, {"gps": scenario.gps})
            est = pseudo_outcome_learner(sample, gps_only, "M", base_spec, seed=seed)
        elif tag in ("DR", "X"):
            est = pseudo_outcome_learner(sample, nuis(Strategy.T), tag, base_spec, seed=seed)
        elif tag in ("DR-T", "DR-S", "X-T", "X-S"):
            kind, strat = tag.split("-")
            est = pseudo_outcome_learner(
                sample, nuis(Strategy(strat)), kind, base_spec, tag=tag, seed=seed
            )
        elif tag == "RLin":
            basis = rlin_basis or default_cate_basis(sample.d)
            est = r_learner(sample, nuis(Strategy.T), basis)
        else:
            raise ValueError(f"unknown learner {tag!r}")
        # includes any nuisance fits first triggered by this learner
        wall_ms = 1000.0 * (time.perf_counter() - started)
        diagnostics = {**est.diagnostics, "wall_ms": wall_ms}
        out[tag] = CateEstimate(est.per_k, est.tag, scenario.flags_for(tag), diagnostics)
    return out
