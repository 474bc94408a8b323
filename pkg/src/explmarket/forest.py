"""From-scratch random forest over the one-hot encoded feature space.

Trees split on ``x[j] <= threshold``; for one-hot indicator columns a 0.5
threshold implements category-subset membership. Leaves store the positive
class fraction, and the forest score is the unweighted mean of leaf
fractions. Training is fully determined by (data, hyperparams, seed): each
tree draws its randomness from a substream derived from the master seed and
the tree index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import ModelError
from .tabular import Dataset, Instance, encode, encode_matrix, schema_fingerprint

MODEL_FORMAT_VERSION = 1
_DEPTH_CAP = 64  # effective "unlimited" depth


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_depth: int | None = 8
    min_leaf: int = 5
    features_per_split: str | int = "sqrt"
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees <= 0:
            raise ModelError("n_trees must be positive")
        if self.max_depth is not None and self.max_depth <= 0:
            raise ModelError("max_depth must be positive or None")
        if self.min_leaf <= 0:
            raise ModelError("min_leaf must be positive")


@dataclass(frozen=True)
class Decision:
    verdict: str  # "Accept" | "Reject"
    probability: float
    threshold: float

    @property
    def accepted(self) -> bool:
        return self.verdict == "Accept"


class Tree:
    """Flat-array binary tree; feature == -1 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "count")

    def __init__(self, feature, threshold, left, right, value, count):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)
        self.count = np.asarray(count, dtype=np.int64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feats = self.feature[idx]
            active = feats >= 0
            if not active.any():
                return self.value[idx]
            ai = idx[active]
            go_left = X[active, self.feature[ai]] <= self.threshold[ai]
            idx[active] = np.where(go_left, self.left[ai], self.right[ai])

    def depth(self) -> int:
        depths = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if len(depths) else 0

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "count": self.count.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"], d["count"])


class _PackedForest:
    """All trees concatenated into flat arrays so a whole batch can be pushed
    through every tree at once. Leaves self-loop via a dummy feature column
    (index d, always 0, threshold +inf), so traversal runs a fixed number of
    steps without per-node masking."""

    def __init__(self, trees: list[Tree], n_columns: int):
        self.n_columns = n_columns
        feats, thrs, lefts, rights, vals, roots = [], [], [], [], [], []
        offset = 0
        depth = 0
        for t in trees:
            f = t.feature.astype(np.int64).copy()
            l = t.left.astype(np.int64) + offset
            r = t.right.astype(np.int64) + offset
            leaf = f < 0
            own = np.arange(len(f), dtype=np.int64) + offset
            f[leaf] = n_columns
            l[leaf] = own[leaf]
            r[leaf] = own[leaf]
            th = t.threshold.copy()
            th[leaf] = np.inf
            feats.append(f)
            thrs.append(th)
            lefts.append(l)
            rights.append(r)
            vals.append(t.value)
            roots.append(offset)
            offset += len(f)
            depth = max(depth, t.depth())
        self.feature = np.concatenate(feats)
        self.threshold = np.concatenate(thrs)
        self.left = np.concatenate(lefts)
        self.right = np.concatenate(rights)
        self.value = np.concatenate(vals)
        self.roots = np.asarray(roots, dtype=np.int64)
        self.depth = depth

    def predict(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        Xa = np.concatenate([X, np.zeros((n, 1))], axis=1)
        idx = np.broadcast_to(self.roots[:, None], (len(self.roots), n)).copy()
        cols = np.arange(n)[None, :]
        for _ in range(self.depth):
            go_left = Xa[cols, self.feature[idx]] <= self.threshold[idx]
            idx = np.where(go_left, self.left[idx], self.right[idx])
        return self.value[idx].mean(axis=0)


class ForestModel:
    def __init__(self, trees: list[Tree], params: ForestParams, seed: int, schema):
        self.trees = trees
        self.params = params
        self.seed = seed
        self.schema = tuple(schema)
        self.fingerprint = schema_fingerprint(schema)
        self._packed = None

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        """Mean leaf fraction per row of an already-encoded matrix."""
        if self._packed is None:
            from .tabular import encoded_width

            self._packed = _PackedForest(self.trees, encoded_width(self.schema))
        return self._packed.predict(np.asarray(X, dtype=np.float64))


def _best_split(Xcol: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best gini split of one column; returns (cost, threshold) or None."""
    order = np.argsort(Xcol, kind="stable")
    xs, ys = Xcol[order], y[order]
    n = len(ys)
    # Candidate boundaries: positions where the sorted value changes.
    diff = np.flatnonzero(xs[:-1] < xs[1:]) + 1  # split sizes (left count)
    if len(diff) == 0:
        return None
    valid = (diff >= min_leaf) & (n - diff >= min_leaf)
    diff = diff[valid]
    if len(diff) == 0:
        return None
    cum_pos = np.cumsum(ys)
    left_n = diff.astype(float)
    right_n = n - left_n
    left_pos = cum_pos[diff - 1]
    right_pos = cum_pos[-1] - left_pos
    pl, pr = left_pos / left_n, right_pos / right_n
    gini = left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)
    best = int(np.argmin(gini))
    i = diff[best]
    thr = (xs[i - 1] + xs[i]) / 2.0
    return gini[best] / n, thr


def _grow_tree(X, y, params: ForestParams, rng: np.random.Generator) -> Tree:
    max_depth = params.max_depth if params.max_depth is not None else _DEPTH_CAP
    d = X.shape[1]
    if params.features_per_split == "sqrt":
        k = max(1, int(np.sqrt(d)))
    elif params.features_per_split in (None, "all"):
        k = d
    else:
        k = max(1, min(d, int(params.features_per_split)))

    feature, threshold, left, right, value, count = [], [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        count.append(0)
        return len(feature) - 1

    def build(idx, depth):
        node = new_node()
        yi = y[idx]
        value[node] = float(yi.mean())
        count[node] = len(idx)
        if depth >= max_depth or len(idx) < 2 * params.min_leaf or yi.min() == yi.max():
            return node
        cols = rng.permutation(d)[:k]
        best = None
        for j in cols:
            res = _best_split(X[idx, j], yi, params.min_leaf)
            if res is not None and (best is None or res[0] < best[0]):
                best = (res[0], int(j), res[1])
        if best is None:
            return node
        _, j, thr = best
        go_left = X[idx, j] <= thr
        feature[node] = j
        threshold[node] = thr
        left[node] = build(idx[go_left], depth + 1)
        right[node] = build(idx[~go_left], depth + 1)
        return node

    build(np.arange(len(y)), 0)
    return Tree(feature, threshold, left, right, value, count)


def train_forest(train: Dataset, params: ForestParams, seed: int) -> ForestModel:
    if len(set(train.labels)) < 2:
        raise ModelError("training set must contain both classes")
    X = encode_matrix(train)
    y = np.asarray(train.labels, dtype=np.float64)
    n = len(y)
    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(_grow_tree(X[idx], y[idx], params, rng))
    return ForestModel(trees, params, seed, train.schema)


def predict_proba(model: ForestModel, instance: Instance) -> float:
    if len(instance.values) != len(model.schema):
        raise ModelError("instance does not match the model schema")
    x = encode(instance, model.schema)[None, :]
    return float(model.predict_matrix(x)[0])


def decide(model: ForestModel, instance: Instance, threshold: float) -> Decision:
    return decide_proba(predict_proba(model, instance), threshold)


def decide_proba(probability: float, threshold: float) -> Decision:
    """Accept iff probability >= threshold; the boundary is inclusive."""
    if not 0.0 < threshold < 1.0:
        raise ModelError(f"threshold must lie in (0, 1), got {threshold}")
    verdict = "Accept" if probability >= threshold else "Reject"
    return Decision(verdict=verdict, probability=probability, threshold=threshold)


def auc_scores(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based (Mann-Whitney) AUC; ties contribute 0.5."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ModelError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auc(model: ForestModel, test: Dataset) -> float:
    scores = model.predict_matrix(encode_matrix(test))
    return auc_scores(scores, np.asarray(test.labels))


def tune_forest(train: Dataset, seed: int, grid: dict | None = None, folds: int = 5):
    """K-fold grid search selecting by mean validation AUC.

    Returns (best ForestParams, {params repr: mean AUC}). The default grid is
    small on purpose so that tuning runs stay reproducible and quick.
    """
    grid = grid or {"n_trees": [100, 300], "max_depth": [4, 8, None], "min_leaf": [1, 5]}
    y = np.asarray(train.labels)
    n = len(y)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xCF]))
    order = rng.permutation(n)
    fold_of = np.empty(n, dtype=int)
    fold_of[order] = np.arange(n) % folds

    def take(mask):
        return Dataset(
            schema=train.schema,
            rows=tuple(r for r, m in zip(train.rows, mask) if m),
            labels=tuple(l for l, m in zip(train.labels, mask) if m),
        )

    results = {}
    best = None
    for nt in grid["n_trees"]:
        for md in grid["max_depth"]:
            for ml in grid["min_leaf"]:
                params = ForestParams(n_trees=nt, max_depth=md, min_leaf=ml)
                scores = []
                for f in range(folds):
                    val = fold_of == f
                    model = train_forest(take(~val), params, seed)
                    scores.append(auc(model, take(val)))
                mean = float(np.mean(scores))
                results[repr(params)] = mean
                if best is None or mean > best[0]:
                    best = (mean, params)
    return best[1], results


def save_model(model: ForestModel, path) -> None:
    """Versioned JSON dump; byte-identical for identical models."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "fingerprint": model.fingerprint,
        "params": asdict(model.params),
        "seed": model.seed,
        "trees": [t.to_dict() for t in model.trees],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))


def load_model(path, schema) -> ForestModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelError(f"unsupported model format version {doc.get('format_version')}")
    if doc["fingerprint"] != schema_fingerprint(schema):
        raise ModelError("model was trained on a different schema")
    params = ForestParams(**doc["params"])
    trees = [Tree.from_dict(t) for t in doc["trees"]]
    return ForestModel(trees, params, doc["seed"], schema)
