"""Class-probability estimators used for the generalized propensity score."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import softmax

from ..core import BasisSpec, make_basis
from .trees import TreeArrays, grow_tree


class DegenerateLabelsWarning(UserWarning):
    pass


def _labels(class_labels, n_classes: int | None) -> tuple[np.ndarray, int]:
    y = np.asarray(class_labels).reshape(-1)
    if y.size == 0:
        raise ValueError("no labels")
    if not np.all(y == np.round(y)):
        raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    if y.min() < 0:
        raise ValueError("labels must be >= 0")
    C = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if y.max() >= C:
        raise ValueError(f"label {y.max()} outside 0..{C - 1}")
    if C < 2:
        C = 2
    return y, C


def _inputs(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X.reshape(-1, 1) if X.ndim == 1 else X


@dataclass(frozen=True)
class PointMassModel:
    """Returned when the training labels contain a single class."""

    label: int
    n_classes: int
    degenerate: bool = True

    def predict_proba(self, X) -> np.ndarray:
        P = np.zeros((_inputs(X).shape[0], self.n_classes))
        P[:, self.label] = 1.0
        return P


def _point_mass_if_degenerate(y, C):
    if np.unique(y).size == 1:
        warnings.warn(
            f"all labels equal {y[0]}; returning a point mass", DegenerateLabelsWarning, stacklevel=3
        )
        return PointMassModel(int(y[0]), C)
    return None


# --------------------------------------------------------------------------
# multinomial logistic regression
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MultinomialLogisticModel:
    basis: BasisSpec
    center: np.ndarray
    scale: np.ndarray
    coef: np.ndarray  # (p, C)
    n_iter: int
    degenerate: bool = False

    def predict_proba(self, X) -> np.ndarray:
        H = self.basis(_inputs(X))
        H = (H - self.center) / self.scale
        return softmax(H @ self.coef, axis=1)


@dataclass(frozen=True)
class MultinomialLogisticSpec:
    """Softmax regression on a basis, fitted by fixed-step gradient descent.

    Non-constant basis columns are standardised before fitting. The step is
    ``1 / L`` with ``L = lambda_max(H'H / n) / 2``, an upper bound on the
    curvature of the mean cross-entropy.
    """

    basis: Union[BasisSpec, str] = "affine"
    max_iter: int = 500
    tol: float = 1e-8

    kind = "logistic"

    def fit(self, X, class_labels, n_classes: int | None = None):
        X = _inputs(X)
        y, C = _labels(class_labels, n_classes)
        degenerate = _point_mass_if_degenerate(y, C)
        if degenerate is not None:
            return degenerate
        missing = np.setdiff1d(np.arange(C), y)
        if missing.size:
            raise ValueError(f"classes {missing.tolist()} have no observations")
        basis = self.basis if isinstance(self.basis, BasisSpec) else make_basis(self.basis, X.shape[1])
        H = basis(X)
        center = H.mean(axis=0)
        scale = H.std(axis=0)
        const = scale == 0
        center[const] = 0.0
        scale[const] = 1.0
        H = (H - center) / scale
        n = H.shape[0]
        Y = np.eye(C)[y]
        L = 0.5 * np.linalg.eigvalsh(H.T @ H / n).max()
        step = 1.0 / L
        W = np.zeros((H.shape[1], C))
        it = 0
        for it in range(1, self.max_iter + 1):
            P = softmax(H @ W, axis=1)
            grad = H.T @ (P - Y) / n
            if np.linalg.norm(grad) < self.tol:
                break
            W -= step * grad
        return MultinomialLogisticModel(basis, center, scale, W, it)


# --------------------------------------------------------------------------
# softmax gradient boosting
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SoftmaxBoostingModel:
    base_scores: np.ndarray
    learning_rate: float
    trees: tuple[tuple[TreeArrays, ...], ...]  # rounds x classes
    degenerate: bool = False

    def predict_proba(self, X) -> np.ndarray:
        X = _inputs(X)
        F = np.tile(self.base_scores, (X.shape[0], 1))
        for round_trees in self.trees:
            for c, t in enumerate(round_trees):
                F[:, c] += self.learning_rate * t.predict(X)
        return softmax(F, axis=1)


@dataclass(frozen=True)
class SoftmaxBoostingSpec:
    """Multiclass boosting with one Newton-step tree per class and round."""

    n_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0

    kind = "softmax-boosting"

    def fit(self, X, class_labels, n_classes: int | None = None):
        X = _inputs(X)
        y, C = _labels(class_labels, n_classes)
        degenerate = _point_mass_if_degenerate(y, C)
        if degenerate is not None:
            return degenerate
        n = X.shape[0]
        Y = np.eye(C)[y]
        prior = np.clip(Y.mean(axis=0), 1.0 / (n + C), None)
        base = np.log(prior)
        F = np.tile(base, (n, 1))
        presorted = [np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])]
        rounds = []
        for _ in range(self.n_rounds):
            P = softmax(F, axis=1)
            round_trees = []
            for c in range(C):
                g = P[:, c] - Y[:, c]
                h = np.maximum(P[:, c] * (1 - P[:, c]), 1e-16)
                tree, leaf = grow_tree(
                    X, g, h,
                    max_depth=self.max_depth, min_child_weight=self.min_child_weight,
                    reg_lambda=self.reg_lambda, presorted=presorted,
                )
                F[:, c] += self.learning_rate * leaf
                round_trees.append(tree)
            rounds.append(tuple(round_trees))
        return SoftmaxBoostingModel(base, self.learning_rate, tuple(rounds))


# --------------------------------------------------------------------------
# stratum frequencies
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalStratumModel:
    feature: int
    edges: np.ndarray
    table: np.ndarray  # (n_bins, C)
    degenerate: bool = False

    def bin_of(self, X) -> np.ndarray:
        return np.searchsorted(self.edges, _inputs(X)[:, self.feature], side="right")

    def predict_proba(self, X) -> np.ndarray:
        return self.table[self.bin_of(X)]


@dataclass(frozen=True)
class EmpiricalStratumSpec:
    """Class frequencies within bins of one covariate.

    ``edges`` are the interior cut points; a row with value ``v`` lands in
    bin ``searchsorted(edges, v, side="right")``. Empty bins fall back to
    the overall class frequencies.
    """

    edges: tuple[float, ...] = ()
    feature: int = 0

    kind = "stratum"

    def fit(self, X, class_labels, n_classes: int | None = None):
        X = _inputs(X)
        y, C = _labels(class_labels, n_classes)
        degenerate = _point_mass_if_degenerate(y, C)
        if degenerate is not None:
            return degenerate
        edges = np.asarray(sorted(self.edges), dtype=float)
        bins = np.searchsorted(edges, X[:, self.feature], side="right")
        n_bins = edges.size + 1
        counts = np.zeros((n_bins, C))
        np.add.at(counts, (bins, y), 1.0)
        overall = counts.sum(axis=0) / counts.sum()
        totals = counts.sum(axis=1, keepdims=True)
        table = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), overall)
        return EmpiricalStratumModel(self.feature, edges, table)


ProbabilitySpec = Union[MultinomialLogisticSpec, SoftmaxBoostingSpec, EmpiricalStratumSpec]


def fit_probability(spec: ProbabilitySpec, inputs, class_labels, n_classes: int | None = None):
    """Fit a probability estimator; predictions are (n, n_classes) row-stochastic."""
    return spec.fit(inputs, class_labels, n_classes)
