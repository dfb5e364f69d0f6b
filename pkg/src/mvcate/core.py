"""Dataset representation and treatment-level bookkeeping.

Treatment levels are stored once in :class:`TreatmentLevels` and every
sample refers to them by integer index. Index 0 is always the baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DEFAULT_CLIP_FLOOR = 1e-3


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TreatmentLevels:
    """Ordered treatment values ``t_0 < t_1 < ... < t_K``."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise ValueError("need at least two treatment levels (K >= 1)")
        if not all(np.isfinite(vals)):
            raise ValueError("treatment levels must be finite")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("treatment levels must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def grid(cls, K: int) -> "TreatmentLevels":
        """Equispaced levels ``t_k = k / K`` on [0, 1]."""
        if K < 1:
            raise ValueError("K must be >= 1")
        return cls(tuple(k / K for k in range(K + 1)))

    @property
    def K(self) -> int:
        return len(self.values) - 1

    @property
    def baseline_index(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> float:
        return self.values[k]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class ObservationalSample:
    """Covariates ``X`` (n x d), treatment indices into ``levels``, and outcomes."""

    covariates: np.ndarray
    treatment_idx: np.ndarray
    outcome: np.ndarray
    levels: TreatmentLevels

    def __post_init__(self):
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError("covariates must be a 2-d array")
        t = np.asarray(self.treatment_idx)
        if t.size and not np.issubdtype(t.dtype, np.integer):
            if not np.all(t == np.round(t)):
                raise ValueError("treatment indices must be integers")
        t = t.astype(np.int64).reshape(-1)
        y = np.asarray(self.outcome, dtype=float).reshape(-1)
        n = X.shape[0]
        if t.shape[0] != n or y.shape[0] != n:
            raise ValueError(
                f"length mismatch: covariates {n}, treatment {t.shape[0]}, outcome {y.shape[0]}"
            )
        if t.size and (t.min() < 0 or t.max() > self.levels.K):
            raise ValueError(f"treatment index outside 0..{self.levels.K}")
        object.__setattr__(self, "covariates", _frozen(X))
        object.__setattr__(self, "treatment_idx", _frozen(t))
        object.__setattr__(self, "outcome", _frozen(y))

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    @property
    def K(self) -> int:
        return self.levels.K

    @property
    def treatment(self) -> np.ndarray:
        """Treatment values ``T_i`` (not indices)."""
        return self.levels.as_array()[self.treatment_idx]

    def level_counts(self) -> np.ndarray:
        return np.bincount(self.treatment_idx, minlength=self.K + 1)

    def underpopulated_levels(self, min_count: int) -> list[int]:
        """Levels with fewer than ``min_count`` rows (0 counts included)."""
        return [k for k, c in enumerate(self.level_counts()) if c < min_count]

    def subset(self, rows) -> "ObservationalSample":
        rows = np.asarray(rows)
        return ObservationalSample(
            self.covariates[rows], self.treatment_idx[rows], self.outcome[rows], self.levels
        )


@dataclass(frozen=True)
class GroundTruth:
    """Closed-form description of a data-generating process.

    ``outcome_fn(t, X)`` is the noiseless response surface f, evaluated for a
    scalar treatment value and an (n, d) covariate matrix. ``gps_fn(X)``
    returns the (n, K+1) matrix of treatment probabilities.
    """

    levels: TreatmentLevels
    outcome_fn: Callable[[float, np.ndarray], np.ndarray]
    gps_fn: Callable[[np.ndarray], np.ndarray]
    sigma: float = 0.0
    r_min: float = 0.0
    m_fn: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def f(self, t: float, X) -> np.ndarray:
        return np.asarray(self.outcome_fn(float(t), _as_matrix(X)), dtype=float)

    def mu(self, k: int, X) -> np.ndarray:
        return self.f(self.levels[k], X)

    def gps(self, X) -> np.ndarray:
        return np.asarray(self.gps_fn(_as_matrix(X)), dtype=float)

    def m(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if self.m_fn is not None:
            return np.asarray(self.m_fn(X), dtype=float)
        r = self.gps(X)
        return sum(r[:, k] * self.mu(k, X) for k in range(self.levels.K + 1))

    def tau(self, k: int, X) -> np.ndarray:
        return self.mu(k, X) - self.mu(0, X)

    def tau_matrix(self, X) -> np.ndarray:
        """(n, K) matrix whose column k-1 holds tau_k."""
        X = _as_matrix(X)
        base = self.mu(0, X)
        return np.column_stack([self.mu(k, X) - base for k in range(1, self.levels.K + 1)])


@dataclass(frozen=True)
class BasisSpec:
    """Feature map ``x -> (f_0(x), ..., f_{p-1}(x))`` with ``f_0 = 1``."""

    name: str
    dimension: int
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, X) -> np.ndarray:
        H = np.asarray(self.evaluate(_as_matrix(X)), dtype=float)
        if H.ndim != 2 or H.shape[1] != self.dimension:
            raise ValueError(f"basis {self.name!r} produced shape {H.shape}")
        return H


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        return X.reshape(1, 1)
    if X.ndim == 1:
        return X.reshape(-1, 1)
    return X


def intercept_basis() -> BasisSpec:
    return BasisSpec("intercept", 1, lambda X: np.ones((X.shape[0], 1)))


def affine_basis(d: int = 1) -> BasisSpec:
    """``{1, x_1, ..., x_d}``; for d = 1 this is the {1, x} basis."""

    def evaluate(X):
        if X.shape[1] != d:
            raise ValueError(f"affine basis expects {d} columns, got {X.shape[1]}")
        return np.column_stack([np.ones(X.shape[0]), X])

    return BasisSpec("affine", d + 1, evaluate)


def norm_basis() -> BasisSpec:
    """``{1, ||x||}`` for multivariate covariates."""
    return BasisSpec(
        "norm", 2, lambda X: np.column_stack([np.ones(X.shape[0]), np.linalg.norm(X, axis=1)])
    )


def quadratic_basis(d: int = 1) -> BasisSpec:
    """Affine terms plus all squares and pairwise products."""
    pairs = [(i, j) for i in range(d) for j in range(i, d)]

    def evaluate(X):
        if X.shape[1] != d:
            raise ValueError(f"quadratic basis expects {d} columns, got {X.shape[1]}")
        cols = [np.ones(X.shape[0]), *X.T] + [X[:, i] * X[:, j] for i, j in pairs]
        return np.column_stack(cols)

    return BasisSpec("quadratic", 1 + d + len(pairs), evaluate)


def default_cate_basis(d: int) -> BasisSpec:
    """p = 2 basis used by the linear R-learner: {1, x} if d == 1 else {1, ||x||}."""
    return affine_basis(1) if d == 1 else norm_basis()


def make_basis(name: str, d: int) -> BasisSpec:
    builders = {
        "intercept": lambda: intercept_basis(),
        "affine": lambda: affine_basis(d),
        "norm": lambda: norm_basis(),
        "quadratic": lambda: quadratic_basis(d),
        "default": lambda: default_cate_basis(d),
    }
    try:
        return builders[name]()
    except KeyError:
        raise ValueError(f"unknown basis {name!r}; choose from {sorted(builders)}") from None


def split_by_treatment(sample: ObservationalSample) -> dict[int, np.ndarray]:
    """Row indices of each treatment stratum, keyed by level index 0..K."""
    idx = sample.treatment_idx
    return {k: np.flatnonzero(idx == k) for k in range(sample.K + 1)}


def clip_probabilities(p, floor: float = DEFAULT_CLIP_FLOOR) -> np.ndarray:
    """Raise entries to ``floor`` and renormalise each row to sum to one.

    Works on a single probability vector or on an (n, K+1) matrix of rows.
    Rows whose entries already sit at or above ``floor / (1 + (K+1) floor)``
    (the smallest value this function can emit) are only renormalised, which
    makes the operation idempotent.
    """
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite")
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    n_levels = p.shape[-1]
    if not 0 < floor < 1 / n_levels:
        raise ValueError(f"floor must lie in (0, 1/{n_levels})")
    rows = p.reshape(-1, n_levels)
    bound = floor / (1 + n_levels * floor)
    admissible = (rows.min(axis=1) >= bound) & np.isclose(rows.sum(axis=1), 1.0, rtol=0, atol=1e-9)
    q = np.where(admissible[:, None], rows, np.maximum(rows, floor))
    q = q / q.sum(axis=1, keepdims=True)
    return q.reshape(p.shape)
