"""Gradient-boosted regression trees for ranking S.M.A.R.T. attributes.

Trees are grown depth-first with an exact split search over sorted unique
values (see :func:`diskrul.kernels.best_split`). Importance "weight" is the
number of splits on a feature over the ensemble; "gain" sums the squared
error reductions at those splits.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError
from .preprocess import FeatureSet

MAX_ROWS = 200_000


@dataclass(frozen=True)
class GBTConfig:
    n_trees: int = 50
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5

    def __post_init__(self):
        if self.n_trees < 1:
            raise DomainError("n_trees must be positive")
        if self.max_depth < 1:
            raise DomainError("max_depth must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise DomainError("learning_rate must lie in (0, 1]")
        if self.min_samples_leaf < 1:
            raise DomainError("min_samples_leaf must be positive")


@dataclass
class Tree:
    """Flat array-of-nodes regression tree. ``feature == -1`` marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)
    gain: list[float] = field(default_factory=list)

    def _add(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        self.gain.append(0.0)
        return len(self.feature) - 1

    def predict(self, X):
        out = np.empty(X.shape[0])
        node = np.zeros(X.shape[0], dtype=np.int64)
        feature = np.array(self.feature)
        thr = np.array(self.threshold)
        left = np.array(self.left)
        right = np.array(self.right)
        active = feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = X[rows, feature[n]] <= thr[n]
            node[rows] = np.where(go_left, left[n], right[n])
            active = feature[node] >= 0
        out[:] = np.array(self.value)[node]
        return out

    def splits(self):
        return [(f, g) for f, g in zip(self.feature, self.gain) if f >= 0]


@dataclass
class GBTEnsemble:
    config: GBTConfig
    base_score: float
    trees: list[Tree]
    attributes: tuple[int, ...]
    train_mse: list[float] = field(default_factory=list)  # after 0, 1, ..., n_trees trees

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        pred = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            pred += self.config.learning_rate * t.predict(X)
        return pred


def _grow(tree, X, order, resid, rows_mask, depth, cfg):
    """Grow the subtree on ``rows_mask`` and return its node index."""
    idx = np.flatnonzero(rows_mask)
    node = tree._add(float(resid[idx].mean()) if idx.size else 0.0)
    if depth >= cfg.max_depth or idx.size < 2 * cfg.min_samples_leaf:
        return node
    best_gain, best_f, best_thr = 0.0, -1, 0.0
    for f in range(X.shape[1]):
        o = order[f][rows_mask[order[f]]]
        xs = np.ascontiguousarray(X[o, f])
        gain, pos = kernels.best_split(xs, np.ascontiguousarray(resid[o]), cfg.min_samples_leaf)
        if pos >= 0 and gain > best_gain:
            best_gain, best_f = gain, f
            best_thr = 0.5 * (xs[pos - 1] + xs[pos])
            # midpoint may round up to the right value for adjacent floats
            if not best_thr < xs[pos]:
                best_thr = xs[pos - 1]
    if best_f < 0:
        return node
    go_left = X[:, best_f] <= best_thr
    l = _grow(tree, X, order, resid, rows_mask & go_left, depth + 1, cfg)
    r = _grow(tree, X, order, resid, rows_mask & ~go_left, depth + 1, cfg)
    tree.feature[node] = best_f
    tree.threshold[node] = float(best_thr)
    tree.left[node] = l
    tree.right[node] = r
    tree.gain[node] = float(best_gain)
    return node


def fit_gbt(X, y, config: GBTConfig | None = None, seed: int = 0, attributes=None) -> GBTEnsemble:
    """Fit a squared-error boosted ensemble of depth-limited trees.

    Rows beyond ``MAX_ROWS`` are subsampled uniformly with ``seed``.
    ``attributes`` labels the columns (defaults to column indices).
    """
    cfg = config or GBTConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DomainError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if X.shape[0] < 2 * cfg.min_samples_leaf:
        raise DomainError(
            f"need at least {2 * cfg.min_samples_leaf} rows for min_samples_leaf="
            f"{cfg.min_samples_leaf}, got {X.shape[0]}"
        )
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DomainError("absent or non-finite values in GBT input")
    attrs = tuple(range(X.shape[1])) if attributes is None else tuple(int(a) for a in attributes)
    if len(attrs) != X.shape[1]:
        raise DomainError("attribute labels do not match column count")
    if X.shape[0] > MAX_ROWS:
        keep = np.sort(np.random.default_rng(seed).choice(X.shape[0], MAX_ROWS, replace=False))
        X, y = X[keep], y[keep]

    order = [np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])]
    base = float(y.mean())
    pred = np.full(y.shape, base)
    ens = GBTEnsemble(cfg, base, [], attrs, [float(np.mean((y - pred) ** 2))])
    everything = np.ones(X.shape[0], dtype=bool)
    for _ in range(cfg.n_trees):
        resid = y - pred
        tree = Tree()
        _grow(tree, X, order, resid, everything, 0, cfg)
        pred = pred + cfg.learning_rate * tree.predict(X)
        ens.trees.append(tree)
        ens.train_mse.append(float(np.mean((y - pred) ** 2)))
    return ens


@dataclass(frozen=True)
class FeatureImportance:
    attribute: int
    weight: int
    gain: float


def importance(ensemble: GBTEnsemble) -> list[FeatureImportance]:
    """Split-count importance for every column, strongest first.

    Ties in weight fall back to gain (descending) then attribute number.
    """
    weight = np.zeros(len(ensemble.attributes), dtype=np.int64)
    gain = np.zeros(len(ensemble.attributes))
    for t in ensemble.trees:
        for f, g in t.splits():
            weight[f] += 1
            gain[f] += g
    rows = [
        FeatureImportance(a, int(w), float(g))
        for a, w, g in zip(ensemble.attributes, weight, gain)
    ]
    rows.sort(key=lambda r: (-r.weight, -r.gain, r.attribute))
    return rows


def select_features(report, k: int) -> FeatureSet:
    if not 1 <= k <= len(report):
        raise DomainError(f"k={k} outside [1, {len(report)}]")
    return FeatureSet(tuple(sorted(r.attribute for r in report[:k])))


def write_importance_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "attribute", "weight", "gain"])
        for rank, r in enumerate(report, 1):
            w.writerow([rank, r.attribute, r.weight, repr(r.gain)])
