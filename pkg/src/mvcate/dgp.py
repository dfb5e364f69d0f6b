"""Synthetic designs with closed-form nuisances.

Two response surfaces are available:

* ``linear``: ``f(t, x) = (1 + t) x`` with ``X ~ U[0, 1]``
* ``hazard``: ``f(t, x) = t + ||x|| exp(-t ||x||)`` with ``X ~ N(0, I_5)``

and two assignment designs:

* ``rct``: ``T`` independent of ``X`` (uniform on the grid unless
  ``treatment_probs`` is given)
* ``preferential``: a fraction ``1 - selection_weight`` of the rows is drawn
  as in the RCT; the rest is split evenly across levels, level ``k`` pairing
  ``T = t_k`` with covariates restricted to stratum ``I_k``. The strata cut
  the covariate (``x_1`` for the hazard model) into K+1 equal-probability
  bins, so the marginal of ``X`` is unchanged and the propensity is
  ``(1 - w) rho_k + w 1{x in I_k}``. ``w = 1/2`` gives the usual
  ``(K+2)/(2(K+1))`` vs ``1/(2(K+1))`` split.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtri

from .core import GroundTruth, ObservationalSample, TreatmentLevels

HAZARD_DIM = 5


class Model(str, Enum):
    LINEAR = "linear"
    HAZARD = "hazard"


class Design(str, Enum):
    RCT = "rct"
    PREFERENTIAL = "preferential"


@dataclass(frozen=True)
class DgpConfig:
    model: Model = Model.LINEAR
    design: Design = Design.RCT
    n: int = 2000
    K: int = 9
    sigma: float = 0.1
    seed: int = 0
    selection_weight: float = 0.5
    treatment_probs: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "design", Design(self.design))
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0 <= self.selection_weight < 1:
            raise ValueError("selection_weight must lie in [0, 1)")
        if self.design is Design.PREFERENTIAL and self.n < 2 * (self.K + 1):
            raise ValueError(f"preferential design needs n >= 2(K+1) = {2 * (self.K + 1)}")
        if self.treatment_probs is not None:
            rho = np.asarray(self.treatment_probs, dtype=float)
            if rho.shape != (self.K + 1,) or np.any(rho <= 0) or not np.isclose(rho.sum(), 1.0):
                raise ValueError("treatment_probs must be K+1 positive values summing to 1")
            object.__setattr__(self, "treatment_probs", tuple(float(v) for v in rho))

    @property
    def levels(self) -> TreatmentLevels:
        return TreatmentLevels.grid(self.K)

    @property
    def rho(self) -> np.ndarray:
        if self.treatment_probs is None:
            return np.full(self.K + 1, 1.0 / (self.K + 1))
        return np.asarray(self.treatment_probs)

    @property
    def d(self) -> int:
        return 1 if self.model is Model.LINEAR else HAZARD_DIM

    @property
    def r_min(self) -> float:
        rho_min = float(self.rho.min())
        if self.design is Design.RCT:
            return rho_min
        return (1 - self.selection_weight) * rho_min


def mu_true(model, t: float, X) -> np.ndarray:
    """Potential-outcome surface ``mu_t(x) = f(t, x)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if Model(model) is Model.LINEAR else X.reshape(1, -1)
    if Model(model) is Model.LINEAR:
        return (1.0 + t) * X[:, 0]
    norm = np.linalg.norm(X, axis=1)
    return t + norm * np.exp(-t * norm)


def stratum_edges(model, K: int) -> np.ndarray:
    """Interior cut points separating the K+1 strata I_0, ..., I_K."""
    probs = np.arange(1, K + 1) / (K + 1)
    return probs if Model(model) is Model.LINEAR else ndtri(probs)


def stratum_of(model, K: int, X) -> np.ndarray:
    """Index k of the stratum I_k containing each row (uses x_1 only)."""
    X = np.asarray(X, dtype=float)
    x1 = X.reshape(-1) if X.ndim == 1 else X[:, 0]
    return np.searchsorted(stratum_edges(model, K), x1, side="right")


def gps_matrix(cfg: DgpConfig, X) -> np.ndarray:
    """(n, K+1) matrix of exact propensities r(t_k, x)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    rho = cfg.rho
    if cfg.design is Design.RCT:
        return np.tile(rho, (n, 1))
    w = cfg.selection_weight
    R = np.tile((1 - w) * rho, (n, 1))
    R[np.arange(n), stratum_of(cfg.model, cfg.K, X)] += w
    return R


def gps_closed_form(model, design, K: int, k: int, X, selection_weight: float = 0.5,
                    treatment_probs=None) -> np.ndarray:
    """Exact r(t_k, x) for each row of ``X``."""
    cfg = DgpConfig(model=model, design=design, K=K, n=max(2 * (K + 1), 1),
                    selection_weight=selection_weight, treatment_probs=treatment_probs)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if cfg.model is Model.LINEAR else X.reshape(1, -1)
    return gps_matrix(cfg, X)[:, k]


def m_true(cfg: DgpConfig, X) -> np.ndarray:
    """Observed-outcome model ``m(x) = sum_k r(t_k, x) mu_{t_k}(x)``."""
    R = gps_matrix(cfg, X)
    return sum(R[:, k] * mu_true(cfg.model, t, X) for k, t in enumerate(cfg.levels.values))


def ground_truth(cfg: DgpConfig) -> GroundTruth:
    return GroundTruth(
        levels=cfg.levels,
        outcome_fn=lambda t, X: mu_true(cfg.model, t, X),
        gps_fn=lambda X: gps_matrix(cfg, X),
        sigma=cfg.sigma,
        r_min=cfg.r_min,
        m_fn=lambda X: m_true(cfg, X),
        name=f"{cfg.model.value}-{cfg.design.value}",
    )


def _draw_marginal(rng: np.random.Generator, model: Model, n: int) -> np.ndarray:
    if model is Model.LINEAR:
        return rng.uniform(0.0, 1.0, size=(n, 1))
    return rng.standard_normal(size=(n, HAZARD_DIM))


def _draw_in_stratum(rng: np.random.Generator, model: Model, K: int, k: int, n: int) -> np.ndarray:
    # inverse-CDF on a uniform restricted to [k/(K+1), (k+1)/(K+1))
    lo, hi = k / (K + 1), (k + 1) / (K + 1)
    u = rng.uniform(lo, hi, size=n)
    x1 = u if model is Model.LINEAR else ndtri(u)
    # guard the upper edge against rounding into the next stratum
    if k < K:
        edge = stratum_edges(model, K)[k]
        x1 = np.where(x1 >= edge, np.nextafter(edge, -np.inf), x1)
    if model is Model.LINEAR:
        return x1.reshape(-1, 1)
    rest = rng.standard_normal(size=(n, HAZARD_DIM - 1))
    return np.column_stack([x1, rest])


def sub_sample_sizes(cfg: DgpConfig) -> tuple[int, int]:
    """(rows per preferential stratum, rows in the randomized part)."""
    if cfg.design is Design.RCT:
        return 0, cfg.n
    per_level = int(np.floor(cfg.selection_weight * cfg.n / (cfg.K + 1)))
    return per_level, cfg.n - (cfg.K + 1) * per_level


def generate(cfg: DgpConfig) -> tuple[ObservationalSample, GroundTruth]:
    """Draw a sample of exactly ``cfg.n`` rows together with its ground truth.

    Under the preferential design, rows that do not divide evenly across the
    K+1 selected sub-samples go to the randomized part.
    """
    rng = np.random.default_rng(cfg.seed)
    K = cfg.K
    per_level, n_rct = sub_sample_sizes(cfg)

    X_parts = [_draw_marginal(rng, cfg.model, n_rct)]
    T_parts = [rng.choice(K + 1, size=n_rct, p=cfg.rho)]
    for k in range(K + 1 if per_level else 0):
        X_parts.append(_draw_in_stratum(rng, cfg.model, K, k, per_level))
        T_parts.append(np.full(per_level, k))
    X = np.concatenate(X_parts, axis=0)
    T = np.concatenate(T_parts).astype(np.int64)
    perm = rng.permutation(cfg.n)
    X, T = X[perm], T[perm]

    levels = cfg.levels.as_array()
    signal = np.empty(cfg.n)
    for k in range(K + 1):
        rows = T == k
        signal[rows] = mu_true(cfg.model, levels[k], X[rows])
    noise = rng.normal(0.0, cfg.sigma, size=cfg.n) if cfg.sigma > 0 else np.zeros(cfg.n)
    sample = ObservationalSample(X, T, signal + noise, cfg.levels)
    return sample, ground_truth(cfg)
