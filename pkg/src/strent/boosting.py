"""Multiclass gradient boosting with vector-valued leaves.

Trees are grown by exact greedy search on the Newton gain

    sum_c [ G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam) ]

computed from per-class gradient and diagonal-Hessian sums, so any loss that
exposes those (standard softmax or a structured variant) plugs in unchanged.
Each leaf holds one Newton step per class; a prediction is the base logits
plus the learning-rate-scaled sum of leaf vectors along every tree's routing
path.

With ``structure=None`` this reduces to ordinary softmax Newton boosting.  A
fixed ``RandomPartition`` trains against the structured log-loss; a
``VariableGraphStructure`` redraws its block partition every round, so each
round optimizes a freshly sampled coarsening of the label space.
"""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import check_features, check_labels
from .losses import (
    PROB_FLOOR,
    coarsened_accuracy,
    log_loss,
    softmax,
    structured_grad_hess,
    structured_log_loss,
)
from .partitions import Partition, RandomPartition
from .structures import Graph, VariableGraphStructure

__all__ = ["StructuredGradientBoostingClassifier"]

MODEL_FORMAT = "strent-model"
MODEL_VERSION = 1

# Floor for Newton denominators H + lam.  Structured losses can produce
# (slightly) negative diagonal-Hessian sums; the guard keeps leaf values and
# gains finite without affecting the ordinary convex path.
DENOM_FLOOR = 1e-6


def _newton_score(G, H, lam):
    """sum_c G_c^2 / (H_c + lam) along the last axis, denominator-guarded."""
    return (G * G / np.maximum(H + lam, DENOM_FLOOR)).sum(axis=-1)


@dataclass(frozen=True)
class _Tree:
    """Flat-array regression tree; leaves hold per-class Newton steps."""

    feature: np.ndarray
    threshold: np.ndarray
    children_left: np.ndarray
    children_right: np.ndarray
    value: np.ndarray

    def apply(self, X):
        """Leaf index for every row of X."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.nonzero(self.feature[node] >= 0)[0]
        while len(active):
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(
                go_left, self.children_left[cur], self.children_right[cur]
            )
            active = active[self.feature[node[active]] >= 0]
        return node

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.children_left.tolist(),
            "right": self.children_right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            children_left=np.asarray(d["left"], dtype=np.int64),
            children_right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
        )


def _best_split(X, grad, hess, in_node, order_by_feature, min_samples_leaf,
                lam, G, H):
    """Best (feature, threshold) by Newton gain, or None.

    Ties broken toward the lowest feature index, then the lowest threshold;
    a split must improve the gain by more than 1e-12 to count.
    """
    base = _newton_score(G, H, lam)
    best_gain = 1e-12
    best = None
    for j in range(X.shape[1]):
        order = order_by_feature[:, j]
        idx = order[in_node[order]]
        v = X[idx, j]
        m = len(idx)
        if v[0] == v[-1]:
            continue
        counts = np.arange(1, m)
        ok = (
            (v[:-1] < v[1:])
            & (counts >= min_samples_leaf)
            & (m - counts >= min_samples_leaf)
        )
        if not ok.any():
            continue
        GL = np.cumsum(grad[idx], axis=0)[:-1][ok]
        HL = np.cumsum(hess[idx], axis=0)[:-1][ok]
        gains = _newton_score(GL, HL, lam) + _newton_score(G - GL, H - HL, lam) - base
        i = int(np.argmax(gains))
        if gains[i] > best_gain:
            lo, hi = v[:-1][ok][i], v[1:][ok][i]
            t = 0.5 * (lo + hi)
            if t >= hi:
                # midpoint of adjacent doubles can round up; keep the split
                # boundary exact under the `x <= t` routing rule
                t = lo
            best_gain = float(gains[i])
            best = (j, float(t))
    return best


def _grow_tree(X, grad, hess, max_depth, min_samples_leaf, lam):
    """Grow one tree; returns (_Tree, leaf index per training row)."""
    n, k = grad.shape
    order_by_feature = np.argsort(X, axis=0, kind="stable")
    feature, threshold = [], []
    left, right, value = [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(None)
        return len(feature) - 1

    leaf_of_row = np.empty(n, dtype=np.int64)
    stack = [(new_node(), np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        G = grad[rows].sum(axis=0)
        H = hess[rows].sum(axis=0)
        split = None
        if depth < max_depth and len(rows) >= 2 * min_samples_leaf:
            in_node = np.zeros(n, dtype=bool)
            in_node[rows] = True
            split = _best_split(
                X, grad, hess, in_node, order_by_feature, min_samples_leaf, lam, G, H
            )
        if split is None:
            value[node] = -G / np.maximum(H + lam, DENOM_FLOOR)
            leaf_of_row[rows] = node
            continue
        j, t = split
        feature[node], threshold[node] = j, t
        go_left = X[rows, j] <= t
        left[node] = new_node()
        right[node] = new_node()
        # push right first so the left subtree is numbered and grown first
        stack.append((right[node], rows[~go_left], depth + 1))
        stack.append((left[node], rows[go_left], depth + 1))
    values = np.vstack([np.zeros(k) if v is None else v for v in value])
    tree = _Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        children_left=np.asarray(left, dtype=np.int64),
        children_right=np.asarray(right, dtype=np.int64),
        value=values,
    )
    return tree, leaf_of_row


def _structure_to_dict(structure):
    if structure is None:
        return {"kind": "standard"}
    if isinstance(structure, RandomPartition):
        return {
            "kind": "fixed",
            "partitions": [
                [list(block) for block in part.blocks] for part, _ in structure
            ],
            "weights": [w for _, w in structure],
            "num_classes": structure.num_classes,
        }
    if isinstance(structure, VariableGraphStructure):
        return {
            "kind": "variable",
            "num_vertices": structure.graph.num_vertices,
            "edges": [list(e) for e in structure.graph.edges],
            "num_blocks": structure.num_blocks,
            "singleton_weight": structure.singleton_weight,
        }
    raise TypeError(f"unsupported structure type {type(structure).__name__}")


def _structure_from_dict(d):
    kind = d["kind"]
    if kind == "standard":
        return None
    if kind == "fixed":
        k = d["num_classes"]
        parts = tuple(
            Partition(tuple(tuple(b) for b in blocks), k) for blocks in d["partitions"]
        )
        return RandomPartition(parts, tuple(d["weights"]))
    if kind == "variable":
        graph = Graph(d["num_vertices"], tuple(tuple(e) for e in d["edges"]))
        return VariableGraphStructure(graph, d["num_blocks"], d["singleton_weight"])
    raise ValueError(f"unknown structure kind {kind!r}")


class StructuredGradientBoostingClassifier(BaseEstimator, ClassifierMixin):
    """Gradient-boosted trees for multiclass problems with structured losses.

    Parameters
    ----------
    n_estimators : int, number of boosting rounds (one tree each).
    learning_rate : float, shrinkage applied to every leaf vector.
    max_depth : int, number of split levels per tree (1 = a single split).
    min_samples_leaf : int, minimum rows on each side of a split.
    l2_regularization : float, lambda added to Hessian denominators.
    structure : None for the standard log-loss, a RandomPartition for a
        fixed structured loss, or a VariableGraphStructure to resample the
        partition every round.
    n_classes : optional class count; inferred from the labels or the
        structure when omitted.  Classes are the integers 0..k-1.
    random_state : seed for the per-round resampling in variable mode.

    After ``fit``: ``base_logits_`` (log class priors), ``trees_``,
    ``train_loss_`` (per-round training value of the objective actually
    optimized) and ``train_log_loss_`` (per-round standard log-loss, equal
    to ``train_loss_`` when structure is None).
    """

    def __init__(self, n_estimators=100, learning_rate=0.1, max_depth=3,
                 min_samples_leaf=5, l2_regularization=1.0, structure=None,
                 n_classes=None, random_state=None):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.l2_regularization = l2_regularization
        self.structure = structure
        self.n_classes = n_classes
        self.random_state = random_state

    def _check_config(self):
        if self.n_estimators < 1:
            raise ValueError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValueError(
                f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}"
            )
        if self.l2_regularization < 0:
            raise ValueError(
                f"l2_regularization must be >= 0, got {self.l2_regularization}"
            )

    def _resolve_classes(self, y):
        """Class count from n_classes, the structure, or the labels."""
        k = self.n_classes
        if self.structure is not None:
            sk = self.structure.num_classes
            if k is not None and k != sk:
                raise ValueError(
                    f"n_classes={k} conflicts with structure over {sk} classes"
                )
            k = sk
        if k is None:
            k = int(y.max()) + 1 if len(y) else 0
        return int(k)

    def fit(self, X, y):
        """Fit n_estimators trees by Newton boosting.

        Labels must be integers in 0..k-1.  With a variable structure the
        random partition is redrawn (from random_state) at every round.
        """
        self._check_config()
        X = check_features(X)
        y = np.asarray(y)
        if len(X) != len(y):
            raise ValueError(f"X has {len(X)} rows but y has {len(y)} labels")
        if len(X) < 2:
            raise ValueError(f"need at least 2 samples, got {len(X)}")
        k = self._resolve_classes(y)
        y = check_labels(y, k)
        if isinstance(self.structure, RandomPartition):
            fixed_rp = self.structure
            variable = None
        elif isinstance(self.structure, VariableGraphStructure):
            fixed_rp = None
            variable = self.structure
        elif self.structure is None:
            fixed_rp = RandomPartition.trivial(k)
            variable = None
        else:
            raise TypeError(
                "structure must be None, a RandomPartition or a "
                f"VariableGraphStructure, not {type(self.structure).__name__}"
            )
        rng = np.random.default_rng(self.random_state)

        self.classes_ = np.arange(k)
        self.n_classes_ = k
        self.n_features_in_ = X.shape[1]
        priors = np.bincount(y, minlength=k) / len(y)
        self.base_logits_ = np.log(np.maximum(priors, PROB_FLOOR))

        logits = np.tile(self.base_logits_, (len(y), 1))
        trees = []
        train_loss = []
        train_log_loss = []
        for _ in range(self.n_estimators):
            rp = variable.sample(rng) if variable is not None else fixed_rp
            grad, hess = structured_grad_hess(logits, y, rp)
            # Structured losses are non-convex in the logits: per-sample
            # diagonal-Hessian entries can go negative, and leaves that
            # collect them would take arbitrarily large Newton steps.
            # Truncating at zero restores a sound curvature estimate and is
            # a no-op for the standard loss.
            np.maximum(hess, 0.0, out=hess)
            tree, leaf_of_row = _grow_tree(
                X, grad, hess, self.max_depth, self.min_samples_leaf,
                self.l2_regularization,
            )
            logits += self.learning_rate * tree.value[leaf_of_row]
            trees.append(tree)
            probs = softmax(logits)
            train_loss.append(structured_log_loss(probs, y, rp))
            train_log_loss.append(log_loss(probs, y))
        self.trees_ = trees
        self.train_loss_ = np.asarray(train_loss)
        self.train_log_loss_ = np.asarray(train_log_loss)
        return self

    def predict_logits(self, X):
        """Raw class scores: base logits plus accumulated leaf vectors."""
        if not hasattr(self, "trees_"):
            raise ValueError("model is not fitted")
        X = check_features(X, n_features=self.n_features_in_)
        logits = np.tile(self.base_logits_, (len(X), 1))
        for tree in self.trees_:
            logits += self.learning_rate * tree.value[tree.apply(X)]
        return logits

    def decision_function(self, X):
        return self.predict_logits(X)

    def staged_predict_logits(self, X):
        """Yield the logit matrix after each successive tree."""
        if not hasattr(self, "trees_"):
            raise ValueError("model is not fitted")
        X = check_features(X, n_features=self.n_features_in_)
        logits = np.tile(self.base_logits_, (len(X), 1))
        for tree in self.trees_:
            logits += self.learning_rate * tree.value[tree.apply(X)]
            yield logits.copy()

    def predict_proba(self, X):
        return softmax(self.predict_logits(X))

    def predict(self, X):
        logits = self.predict_logits(X)
        return self.classes_[np.argmax(logits, axis=1)]

    def evaluate(self, X, y, structure=None):
        """Metric report on (X, y): log_loss, accuracy, and if a
        RandomPartition is given, structured_log_loss plus one coarsened
        accuracy per partition."""
        probs = self.predict_proba(X)
        y = check_labels(np.asarray(y), self.n_classes_)
        report = {
            "log_loss": log_loss(probs, y),
            "accuracy": float(np.mean(probs.argmax(axis=1) == y)),
        }
        if structure is not None:
            report["structured_log_loss"] = structured_log_loss(probs, y, structure)
            report["coarsened_accuracy"] = [
                coarsened_accuracy(probs, y, part) for part, _ in structure
            ]
        return report

    def save(self, path):
        """Serialize the fitted model as versioned JSON.

        Floats are written in shortest round-trip decimal form, so
        load(save(m)) predicts bitwise identically to m.
        """
        if not hasattr(self, "trees_"):
            raise ValueError("model is not fitted")
        seed = self.random_state
        payload = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": {
                "n_estimators": self.n_estimators,
                "learning_rate": self.learning_rate,
                "max_depth": self.max_depth,
                "min_samples_leaf": self.min_samples_leaf,
                "l2_regularization": self.l2_regularization,
                "random_state": seed if isinstance(seed, (int, type(None))) else None,
            },
            "structure": _structure_to_dict(self.structure),
            "n_classes": int(self.n_classes_),
            "n_features": int(self.n_features_in_),
            "base_logits": self.base_logits_.tolist(),
            "train_loss": self.train_loss_.tolist(),
            "train_log_loss": self.train_log_loss_.tolist(),
            "trees": [tree.to_dict() for tree in self.trees_],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        """Reconstruct a fitted model saved by ``save``."""
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
        if payload.get("version") != MODEL_VERSION:
            raise ValueError(
                f"{path}: unsupported model version {payload.get('version')!r}"
            )
        model = cls(
            structure=_structure_from_dict(payload["structure"]),
            n_classes=payload["n_classes"],
            **payload["params"],
        )
        model.n_classes_ = payload["n_classes"]
        model.classes_ = np.arange(model.n_classes_)
        model.n_features_in_ = payload["n_features"]
        model.base_logits_ = np.asarray(payload["base_logits"], dtype=np.float64)
        model.train_loss_ = np.asarray(payload["train_loss"], dtype=np.float64)
        model.train_log_loss_ = np.asarray(
            payload["train_log_loss"], dtype=np.float64
        )
        model.trees_ = [_Tree.from_dict(d) for d in payload["trees"]]
        return model
