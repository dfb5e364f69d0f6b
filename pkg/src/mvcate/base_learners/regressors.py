"""Regressor specifications and their fitted models.

Every spec is a frozen dataclass with a ``fit(inputs, targets, weights)``
method returning a fitted model that exposes ``predict(inputs)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from ..core import BasisSpec, affine_basis, make_basis
from .trees import TreeArrays, grow_tree


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True)
class WeightedTrainingSet:
    inputs: np.ndarray
    targets: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.targets, dtype=float).reshape(-1)
        if X.shape[0] == 0:
            raise ValueError("empty training set")
        if y.shape[0] != X.shape[0]:
            raise ValueError("inputs and targets disagree on n")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("training data must be finite")
        w = np.ones_like(y) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape != y.shape:
            raise ValueError("weights and targets disagree on n")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        if w.sum() <= 0:
            raise ValueError("weights sum to zero")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]


def _check_dim(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if d == 1 else X.reshape(1, -1)
    if X.shape[1] != d:
        raise ValueError(f"expected {d} input columns, got {X.shape[1]}")
    return X


# --------------------------------------------------------------------------
# linear basis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearBasisModel:
    basis: BasisSpec
    coef: np.ndarray
    n_inputs: int
    ridge: float = 0.0

    def predict(self, X) -> np.ndarray:
        return self.basis(_check_dim(X, self.n_inputs)) @ self.coef


@dataclass(frozen=True)
class LinearBasisSpec:
    """Weighted least squares on a fixed basis.

    ``basis`` is either a :class:`BasisSpec` or a name understood by
    :func:`mvcate.core.make_basis` (resolved against the input width at fit
    time). Rank-deficient designs fall back to a ridge of
    ``1e-8 * trace(H'WH) / p`` unless ``ridge_fallback`` is off.
    """

    basis: Union[BasisSpec, str] = "affine"
    ridge_fallback: bool = True

    kind = "linear"

    def resolve(self, d: int) -> BasisSpec:
        if isinstance(self.basis, BasisSpec):
            return self.basis
        return make_basis(self.basis, d)

    def fit(self, X, y, weights=None) -> LinearBasisModel:
        data = WeightedTrainingSet(X, y, weights)
        d = data.inputs.shape[1]
        basis = self.resolve(d)
        H = basis(data.inputs)
        sw = np.sqrt(data.weights)
        Hw = H * sw[:, None]
        yw = data.targets * sw
        p = H.shape[1]
        rank = np.linalg.matrix_rank(Hw)
        if rank == p:
            coef, *_ = np.linalg.lstsq(Hw, yw, rcond=None)
            return LinearBasisModel(basis, coef, d)
        if not self.ridge_fallback:
            raise RankDeficientError(f"design has rank {rank} < p = {p}")
        gram = Hw.T @ Hw
        lam = 1e-8 * np.trace(gram) / p
        if lam == 0:
            lam = 1e-8
        coef = np.linalg.solve(gram + lam * np.eye(p), Hw.T @ yw)
        return LinearBasisModel(basis, coef, d, ridge=lam)


# --------------------------------------------------------------------------
# trees and ensembles
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeModel:
    tree: TreeArrays
    n_inputs: int

    def predict(self, X) -> np.ndarray:
        return self.tree.predict(_check_dim(X, self.n_inputs))


@dataclass(frozen=True)
class RegressionTreeSpec:
    """CART regression tree minimising weighted squared error."""

    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: int | None = None
    seed: int = 0

    kind = "tree"

    def fit(self, X, y, weights=None) -> TreeModel:
        data = WeightedTrainingSet(X, y, weights)
        w = data.weights
        rng = np.random.default_rng(self.seed)
        mf = self.max_features
        if mf is not None:
            mf = min(mf, data.inputs.shape[1])
        tree, _ = grow_tree(
            data.inputs, -w * data.targets, w,
            max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf,
            max_features=mf, rng=rng,
        )
        return TreeModel(tree, data.inputs.shape[1])


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[TreeArrays, ...]
    n_inputs: int

    def predict(self, X) -> np.ndarray:
        X = _check_dim(X, self.n_inputs)
        return np.mean([t.predict(X) for t in self.trees], axis=0)


@dataclass(frozen=True)
class RandomForestSpec:
    """Bagged CART trees with per-split feature subsampling.

    ``max_features=None`` means ``max(1, floor(d / 3))``; pass ``d`` (or
    larger) to consider every feature.
    """

    n_trees: int = 100
    max_features: int | None = None
    bootstrap: bool = True
    max_depth: int | None = None
    min_samples_leaf: int = 1
    seed: int = 0

    kind = "forest"

    def fit(self, X, y, weights=None) -> ForestModel:
        data = WeightedTrainingSet(X, y, weights)
        n, d = data.inputs.shape
        mf = max(1, d // 3) if self.max_features is None else min(self.max_features, d)
        rng = np.random.default_rng(self.seed)
        trees = []
        for _ in range(self.n_trees):
            # one child stream per tree: the bootstrap draw then feature choices
            tree_rng = np.random.default_rng(rng.integers(2**63))
            if self.bootstrap:
                rows = tree_rng.integers(0, n, size=n)
            else:
                rows = np.arange(n)
            Xb, yb, wb = data.inputs[rows], data.targets[rows], data.weights[rows]
            tree, _ = grow_tree(
                Xb, -wb * yb, wb,
                max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf,
                max_features=mf, rng=tree_rng,
            )
            trees.append(tree)
        return ForestModel(tuple(trees), d)


@dataclass(frozen=True)
class BoostingModel:
    base_score: float
    learning_rate: float
    trees: tuple[TreeArrays, ...]
    n_inputs: int
    train_loss: tuple[float, ...] = field(default=(), repr=False)

    def predict(self, X) -> np.ndarray:
        X = _check_dim(X, self.n_inputs)
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out


@dataclass(frozen=True)
class GradientBoostedSpec:
    """Second-order gradient boosting on squared error.

    Defaults follow the usual XGBoost settings: 100 rounds, depth 6,
    learning rate 0.3, L2 leaf penalty 1, minimum child weight 1.
    """

    n_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0

    kind = "boosting"

    def fit(self, X, y, weights=None) -> BoostingModel:
        data = WeightedTrainingSet(X, y, weights)
        X, y, w = data.inputs, data.targets, data.weights
        presorted = [np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])]
        base = float(np.sum(w * y) / np.sum(w))
        pred = np.full(y.shape, base)
        trees = []
        losses = [float(np.sum(w * (y - pred) ** 2) / np.sum(w))]
        for _ in range(self.n_rounds):
            grad = w * (pred - y)
            tree, leaf_values = grow_tree(
                X, grad, w,
                max_depth=self.max_depth, min_child_weight=self.min_child_weight,
                reg_lambda=self.reg_lambda, presorted=presorted,
            )
            if tree.n_nodes == 1 and leaf_values[0] == 0:
                break
            pred = pred + self.learning_rate * leaf_values
            trees.append(tree)
            losses.append(float(np.sum(w * (y - pred) ** 2) / np.sum(w)))
        return BoostingModel(base, self.learning_rate, tuple(trees), X.shape[1], tuple(losses))


RegressorSpec = Union[LinearBasisSpec, RegressionTreeSpec, RandomForestSpec, GradientBoostedSpec]


def fit_regressor(spec: RegressorSpec, data: WeightedTrainingSet):
    """Fit ``spec`` on a :class:`WeightedTrainingSet`."""
    return spec.fit(data.inputs, data.targets, data.weights)


def linear_spec(d: int = 1) -> LinearBasisSpec:
    return LinearBasisSpec(affine_basis(d))


def with_seed(spec: RegressorSpec, seed: int) -> RegressorSpec:
    """Copy of ``spec`` reseeded, for specs that consume randomness."""
    if hasattr(spec, "seed"):
        return replace(spec, seed=int(seed))
    return spec
