"""Random forest of Gini CART trees grown to purity on bootstrap resamples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEAF = -1


@dataclass
class Tree:
    """Flat array encoding; node 0 is the root, ``feature == -1`` marks a leaf.

    ``value`` is the weighted fraction of positive samples reaching the node.
    Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            cur = node[active]
            f = self.feature[cur]
            go_left = X[active, f] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Tree:
        return cls(np.array(d["feature"], dtype=np.int64),
                   np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64),
                   np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=float))


def _best_split(x: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Lowest weighted-Gini split of one feature, or None if x is constant."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    valid = np.flatnonzero(xs[:-1] < xs[1:])
    if valid.size == 0:
        return None
    ws = w[order]
    cw = np.cumsum(ws)
    cp = np.cumsum(ws * y[order])
    total_w, total_p = cw[-1], cp[-1]
    wl = cw[valid]
    pl = cp[valid]
    wr = total_w - wl
    pr = total_p - pl
    # n * gini(node) summed over both children, up to a factor of 2
    cost = pl * (wl - pl) / wl + pr * (wr - pr) / wr
    best = int(np.argmin(cost))
    i = valid[best]
    thr = 0.5 * (xs[i] + xs[i + 1])
    if not xs[i] <= thr < xs[i + 1]:
        thr = xs[i]
    return float(cost[best]), float(thr)


def grow_tree(X: np.ndarray, y: np.ndarray, w: np.ndarray, max_features: int,
              rng: np.random.Generator) -> Tree:
    n_features = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        ww = w[idx]
        value.append(float(np.dot(ww, y[idx]) / ww.sum()))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        v = value[node]
        if v <= 0.0 or v >= 1.0 or len(idx) < 2:
            continue
        best = None
        tried = 0
        # keep drawing features past max_features until some split exists
        for f in rng.permutation(n_features):
            if tried >= max_features and best is not None:
                break
            tried += 1
            found = _best_split(X[idx, f], y[idx], w[idx])
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], found[1], int(f))
        if best is None:
            continue
        _, thr, f = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(value, dtype=float))


@dataclass
class ForestModel:
    n_trees: int = 1024
    max_features: int = 2
    rng_seed: int = 0
    trees: list[Tree] = field(default_factory=list)

    def predict_score(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting bursty."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        votes = np.zeros(len(X))
        for t in self.trees:
            votes += t.predict_value(X) >= 0.5
        return votes / len(self.trees)

    def to_dict(self) -> dict:
        return {"kind": "forest", "n_trees": self.n_trees,
                "max_features": self.max_features, "rng_seed": self.rng_seed,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> ForestModel:
        return cls(d["n_trees"], d["max_features"], d["rng_seed"],
                   [Tree.from_dict(t) for t in d["trees"]])


def train_forest(X, y, n_trees: int = 1024, max_features: int = 2, rng_seed: int = 0,
                 sample_weight=None) -> ForestModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise ValueError("forest training needs both classes")
    n = len(y)
    p = None
    if sample_weight is not None:
        p = np.asarray(sample_weight, dtype=float)
        p = p / p.sum()
    max_features = max(1, min(int(max_features), X.shape[1]))
    rng = np.random.default_rng(rng_seed)
    trees = []
    for _ in range(n_trees):
        counts = rng.multinomial(n, np.full(n, 1.0 / n) if p is None else p)
        keep = np.flatnonzero(counts)
        trees.append(grow_tree(X[keep], y[keep], counts[keep].astype(float),
                               max_features, rng))
    return ForestModel(n_trees, max_features, rng_seed, trees)
