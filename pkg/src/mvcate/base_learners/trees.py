"""Exact greedy regression trees grown level by level.

Trees are fitted in gradient/hessian form: a leaf holding rows L gets value
``-sum(g) / (sum(h) + reg_lambda)`` and a split is scored by

    G_L^2 / (H_L + lam) + G_R^2 / (H_R + lam) - G^2 / (H + lam).

Weighted least squares is the special case ``g = -w y``, ``h = w``,
``lam = 0``. All nodes of a level are searched together: for each feature
the rows are put in (node, x) order once and every candidate cut is scored
with cumulative sums. Ties go to the lowest feature index, then the lowest
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TreeArrays:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        for _ in range(self.depth):
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                break
            x = X[rows, np.where(internal, f, 0)]
            go_left = x <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(internal, nxt, node)
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _segment_starts(keys: np.ndarray) -> np.ndarray:
    """Start offsets of runs of equal values in a grouped array."""
    if keys.size == 0:
        return np.zeros(0, dtype=np.int64)
    change = np.flatnonzero(keys[1:] != keys[:-1]) + 1
    return np.concatenate([[0], change])


def grow_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    *,
    max_depth: int | None = None,
    min_samples_leaf: int = 1,
    min_child_weight: float = 0.0,
    reg_lambda: float = 0.0,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    presorted: list[np.ndarray] | None = None,
) -> tuple[TreeArrays, np.ndarray]:
    """Grow one tree; returns the tree and the leaf value of every training row.

    ``presorted[f]`` may hold ``argsort(X[:, f], kind="stable")`` so repeated
    fits on the same inputs (boosting rounds) skip the sort.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    if max_features is not None and not 1 <= max_features <= d:
        raise ValueError(f"max_features must be in 1..{d}")
    subsample_features = max_features is not None and max_features < d
    if subsample_features and rng is None:
        raise ValueError("feature subsampling needs an rng")
    if presorted is None:
        presorted = [np.argsort(X[:, f], kind="stable") for f in range(d)]
    order_all = np.asarray(presorted, dtype=np.int64).reshape(d, n)
    feat_col = np.arange(d)[:, None]
    limit = np.inf if max_depth is None else max_depth

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(G, H):
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(-G / (H + reg_lambda) if H + reg_lambda > 0 else 0.0)
        return len(feature) - 1

    root = new_node(grad.sum(), hess.sum())
    # position of each row's node in the current level's open list, -1 once settled
    slot = np.zeros(n, dtype=np.int64)
    open_nodes = [root]
    open_G = np.array([grad.sum()])
    open_H = np.array([hess.sum()])
    open_N = np.array([n])
    depth = 0

    while open_nodes and depth < limit:
        m = len(open_nodes)
        best_gain = np.zeros(m)
        best_feat = np.full(m, -1)
        best_thr = np.zeros(m)
        if subsample_features:
            allowed = np.zeros((m, d), dtype=bool)
            for j in range(m):
                allowed[j, rng.choice(d, size=max_features, replace=False)] = True
        splittable = open_N >= 2 * min_samples_leaf
        active = slot >= 0
        parent_score = open_G**2 / (open_H + reg_lambda)

        # rows of every feature's order, restricted to open nodes and grouped
        # by node; the grouping (and so the segment layout) is shared by all
        # features, only x, g and h differ
        O = order_all[active[order_all]].reshape(d, -1)
        if O.shape[1] == 0:
            break
        O = np.take_along_axis(O, np.argsort(slot[O], axis=1, kind="stable"), axis=1)
        nodes = slot[O[0]]
        L = nodes.size
        x = X[O, feat_col]
        cg = np.cumsum(grad[O], axis=1)
        ch = np.cumsum(hess[O], axis=1)
        starts = _segment_starts(nodes)
        seg_nodes = nodes[starts]
        seg_len = np.diff(np.append(starts, L))
        seg_id = np.repeat(np.arange(starts.size), seg_len)
        prev = np.maximum(starts - 1, 0)
        offset_g = np.where(starts > 0, cg[:, prev], 0.0)[:, seg_id]
        offset_h = np.where(starts > 0, ch[:, prev], 0.0)[:, seg_id]
        GL = cg - offset_g
        HL = ch - offset_h
        NL = np.arange(L) - starts[seg_id] + 1
        GR = open_G[nodes] - GL
        HR = open_H[nodes] - HL
        NR = open_N[nodes] - NL

        nxt_same = np.zeros(L, dtype=bool)
        nxt_same[:-1] = nodes[1:] == nodes[:-1]
        row_ok = (
            nxt_same
            & (NL >= min_samples_leaf)
            & (NR >= min_samples_leaf)
            & splittable[nodes]
        )
        valid = np.zeros((d, L), dtype=bool)
        valid[:, :-1] = x[:, 1:] > x[:, :-1]
        valid &= row_ok & (HL >= min_child_weight) & (HR >= min_child_weight)
        if subsample_features:
            valid &= allowed[nodes].T
        if not valid.any():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = GL**2 / (HL + reg_lambda) + GR**2 / (HR + reg_lambda) - parent_score[nodes]
        gain = np.where(valid, gain, -np.inf)

        # best cut per (feature, node), first position on ties (lowest threshold)
        seg_best = np.maximum.reduceat(gain, starts, axis=1)
        hit = (gain == seg_best[:, seg_id]) & valid
        first = np.minimum.reduceat(np.where(hit, np.arange(L), L), starts, axis=1)
        # best feature per node, lowest index on ties
        f_star = np.argmax(seg_best, axis=0)
        cols = np.arange(starts.size)
        top = seg_best[f_star, cols]
        ok = top > 0
        f_star, cols, top = f_star[ok], cols[ok], top[ok]
        pos = first[f_star, cols]
        lo, hi = x[f_star, pos], x[f_star, pos + 1]
        thr = lo + (hi - lo) / 2
        thr = np.where(thr >= hi, lo, thr)
        node_ids = seg_nodes[cols]
        best_gain[node_ids] = top
        best_feat[node_ids] = f_star
        best_thr[node_ids] = thr

        split = np.flatnonzero(best_feat >= 0)
        if split.size == 0:
            break

        rows = np.flatnonzero(slot >= 0)
        row_nodes = slot[rows]
        f_rows = best_feat[row_nodes]
        is_split = f_rows >= 0
        rows, row_nodes, f_rows = rows[is_split], row_nodes[is_split], f_rows[is_split]
        go_left = X[rows, f_rows] <= best_thr[row_nodes]

        # children of the r-th split node occupy slots 2r (left) and 2r+1 (right)
        rank = np.full(m, -1, dtype=np.int64)
        rank[split] = np.arange(split.size)
        child_slot = 2 * rank[row_nodes] + np.where(go_left, 0, 1)
        n_children = 2 * split.size
        next_G = np.bincount(child_slot, weights=grad[rows], minlength=n_children)
        next_H = np.bincount(child_slot, weights=hess[rows], minlength=n_children)
        next_N = np.bincount(child_slot, minlength=n_children)

        first_child = len(feature)
        for Gs, Hs in zip(next_G, next_H):
            new_node(Gs, Hs)
        for r, j in enumerate(split):
            parent = open_nodes[j]
            feature[parent] = int(best_feat[j])
            threshold[parent] = float(best_thr[j])
            left[parent] = first_child + 2 * r
            right[parent] = first_child + 2 * r + 1

        slot = np.full(n, -1, dtype=np.int64)
        slot[rows] = child_slot
        open_nodes = list(range(first_child, first_child + n_children))
        open_G, open_H, open_N = next_G, next_H, next_N
        depth += 1

    tree = TreeArrays(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
        depth=depth,
    )
    return tree, tree.predict(X)
