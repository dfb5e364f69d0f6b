"""Accuracy metrics and Monte-Carlo checks of estimator moments."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .base_learners.regressors import LinearBasisSpec
from .core import BasisSpec, GroundTruth, default_cate_basis
from .dgp import DgpConfig, Design, generate
from .meta_learners import (
    CateEstimate,
    Provenance,
    Scenario,
    exact_nuisances,
    fit_all,
)


@dataclass(frozen=True)
class PeheReport:
    per_k: tuple[float, ...]
    mpehe: float

    @classmethod
    def from_per_k(cls, per_k: Sequence[float]) -> "PeheReport":
        vals = tuple(float(v) for v in per_k)
        if not vals:
            raise ValueError("need at least one level")
        if any(v < 0 or not np.isfinite(v) for v in vals):
            raise ValueError("PEHE values must be finite and non-negative")
        return cls(vals, float(np.sqrt(np.mean(np.square(vals)))))

    @property
    def K(self) -> int:
        return len(self.per_k)


def pehe_from_predictions(predicted, true) -> PeheReport:
    """Per-level root mean squared CATE error from two (n, K) matrices."""
    P = np.asarray(predicted, dtype=float)
    Q = np.asarray(true, dtype=float)
    if P.shape != Q.shape:
        raise ValueError(f"shape mismatch {P.shape} vs {Q.shape}")
    P = P.reshape(P.shape[0], -1)
    Q = Q.reshape(P.shape)
    return PeheReport.from_per_k(np.sqrt(np.mean((P - Q) ** 2, axis=0)))


def pehe(estimate: CateEstimate, truth: GroundTruth, eval_points) -> PeheReport:
    X = np.asarray(eval_points, dtype=float)
    return pehe_from_predictions(estimate.predict(X), truth.tau_matrix(X))


# --------------------------------------------------------------------------
# Monte-Carlo moments of linear-basis coefficients
# --------------------------------------------------------------------------


MC_LEARNERS = ("M", "DR", "X", "RLin", "T", "NvX")


@dataclass(frozen=True)
class BetaMonteCarlo:
    learner: str
    betas: np.ndarray  # (R, K, p)
    beta_star: np.ndarray  # (K, p)
    n: int
    K: int
    rho: np.ndarray
    r_min: float
    seeds: tuple[int, ...] = field(repr=False, default=())

    @property
    def R(self) -> int:
        return self.betas.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.betas.mean(axis=0)

    @property
    def covariance(self) -> np.ndarray:
        flat = self.betas.reshape(self.R, -1)
        C = np.atleast_2d(np.cov(flat, rowvar=False, ddof=1))
        return 0.5 * (C + C.T)

    @property
    def variance(self) -> np.ndarray:
        """Component-wise variance, shaped (K, p)."""
        return self.betas.var(axis=0, ddof=1)

    @property
    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.variance / self.R)

    @property
    def trace_variance(self) -> float:
        return float(self.variance.sum())

    def scaled_variance(self) -> np.ndarray:
        """``n * Var(beta)``, which settles to a constant when Var is O(1/n)."""
        return self.n * self.variance


def linear_coefficients(estimate: CateEstimate) -> np.ndarray:
    """(K, p) coefficients of an estimate built from linear-basis pieces."""
    return np.stack([np.asarray(estimate.per_k[k].coef, dtype=float) for k in range(1, estimate.K + 1)])


def projection_coefficients(truth: GroundTruth, basis: BasisSpec, X) -> np.ndarray:
    """Least-squares coefficients of the true CATEs on ``basis`` over ``X``."""
    H = basis(X)
    coef, *_ = np.linalg.lstsq(H, truth.tau_matrix(X), rcond=None)
    return coef.T


def _reference_points(cfg: DgpConfig, n_ref: int = 200_000) -> np.ndarray:
    ref = replace(cfg, n=n_ref, design=Design.RCT, seed=2**31 - 1, sigma=0.0, treatment_probs=None)
    sample, _ = generate(ref)
    return sample.covariates


def fit_linear_learner(sample, truth, learner: str, basis: BasisSpec):
    """Fit one learner with linear-basis base regressors.

    Pseudo-outcome learners and RLin use exact nuisances; T and NvX fit
    their outcome models on ``basis`` (NvX weights use the exact GPS).
    """
    spec = LinearBasisSpec(basis)
    if learner in ("M", "DR", "X", "RLin"):
        scenario = Scenario("exact", "exact", "exact", "exact")
        tag = learner
    elif learner in ("T", "NvX"):
        scenario = Scenario("mc", "exact", "estimated", "exact")
        tag = learner
    else:
        raise ValueError(f"learner must be one of {MC_LEARNERS}")
    return fit_all(sample, scenario, spec, truth=truth, learners=[tag], rlin_basis=basis)[tag]


def mc_beta_distribution(
    cfg: DgpConfig,
    learner: str,
    R: int,
    *,
    base_seed: int = 0,
    basis: BasisSpec | None = None,
) -> BetaMonteCarlo:
    """Refit ``learner`` on R independent draws; replication r uses seed ``base_seed + r``."""
    if R < 30:
        raise ValueError("need at least 30 replications")
    truth_cfg = replace(cfg, seed=base_seed)
    basis = basis or default_cate_basis(truth_cfg.d)
    seeds = tuple(base_seed + r for r in range(R))
    betas = []
    truth = None
    for s in seeds:
        sample, truth = generate(replace(cfg, seed=s))
        est = fit_linear_learner(sample, truth, learner, basis)
        betas.append(linear_coefficients(est))
    beta_star = projection_coefficients(truth, basis, _reference_points(cfg))
    return BetaMonteCarlo(
        learner, np.stack(betas), beta_star, cfg.n, cfg.K, cfg.rho.copy(), cfg.r_min, seeds
    )


def t_learner_variance_prediction(rho_a, rho_b, k: int) -> float:
    """Predicted ratio Var_b / Var_a of the T-learner's ``beta_k``.

    The asymptotic variance scales as ``1/rho(t_k) + 1/rho(t_0)`` when the
    design matrices per stratum share one limit.
    """
    a = np.asarray(rho_a, dtype=float)
    b = np.asarray(rho_b, dtype=float)
    for rho in (a, b):
        if np.any(rho < 0) or not np.isclose(rho.sum(), 1.0):
            raise ValueError("probability vectors must be non-negative and sum to one")
    if min(a[k], a[0], b[k], b[0]) <= 0:
        raise ValueError("levels k and 0 need positive probability")
    return float((1 / b[k] + 1 / b[0]) / (1 / a[k] + 1 / a[0]))


# --------------------------------------------------------------------------
# sweep over the number of treatment levels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KSweepResult:
    K_values: tuple[int, ...]
    learners: tuple[str, ...]
    seeds: tuple[int, ...]
    values: dict  # (K, learner) -> tuple of per-seed mPEHE

    def mean(self, K: int, learner: str) -> float:
        return float(np.mean(self.values[(K, learner)]))

    def table(self) -> dict[int, dict[str, float]]:
        return {K: {t: self.mean(K, t) for t in self.learners} for K in self.K_values}


def k_sweep(
    model,
    design,
    base_spec,
    K_list: Sequence[int],
    seeds,
    *,
    learners: Sequence[str] = ("T", "S"),
    n: int = 10_000,
    sigma: float = 0.1,
    scenario="estimated",
    gps_spec=None,
) -> KSweepResult:
    """mPEHE of each learner for every K, one sample per seed."""
    K_list = tuple(int(K) for K in K_list)
    if any(b <= a for a, b in zip(K_list, K_list[1:])):
        raise ValueError("K_list must be strictly increasing")
    seeds = tuple(range(seeds)) if isinstance(seeds, int) else tuple(seeds)
    values: dict = {}
    for K in K_list:
        per: dict[str, list] = {t: [] for t in learners}
        for s in seeds:
            cfg = DgpConfig(model=model, design=design, n=n, K=K, sigma=sigma, seed=s)
            sample, truth = generate(cfg)
            fits = fit_all(
                sample, scenario, base_spec, truth=truth, gps_spec=gps_spec, learners=list(learners), seed=s
            )
            for t in learners:
                per[t].append(pehe(fits[t], truth, sample.covariates).mpehe)
        for t in learners:
            values[(K, t)] = tuple(per[t])
    return KSweepResult(K_list, tuple(learners), seeds, values)
