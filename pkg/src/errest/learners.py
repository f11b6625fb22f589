"""Built-in prediction methods: least squares, random forests, top-down trees.

All fitting randomness derives from an integer seed via counter-based child
streams, so fitted models are identical for a fixed seed regardless of
evaluation order or worker count. Fitted models are immutable and their
predictions are deterministic.
"""

import math
import pickle
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular

from . import _tree
from ._rng import seed_sequence
from .hierarchy import CategoryTree, ancestry


class FitError(ValueError):
    """Raised when a learner cannot be fitted on the given training data."""


class RankDeficiencyError(FitError):
    """Design matrix is rank deficient beyond tolerance."""


# ---------------------------------------------------------------------------
# ordinary least squares

@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coef: np.ndarray

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.coef.shape[0]:
            raise ValueError(f"expected {self.coef.shape[0]} feature columns, got {X.shape}")
        return self.intercept + X @ self.coef


def fit_ols(X, y) -> LinearModel:
    """Least-squares fit with intercept, solved by pivoted QR.

    Rank is checked against a tolerance of 1e-10 times the largest column
    norm of the design matrix; deficiency raises RankDeficiencyError.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n <= p + 1:
        raise FitError(f"need n > p + 1 observations, got n={n}, p={p}")
    A = np.column_stack([np.ones(n), X])
    Q, R, piv = qr(A, mode="economic", pivoting=True)
    tol = 1e-10 * np.sqrt((A * A).sum(axis=0)).max()
    diag = np.abs(np.diag(R))
    rank = int((diag > tol).sum())
    if rank < p + 1:
        raise RankDeficiencyError(f"design matrix rank {rank} < {p + 1} at tolerance {tol:.3e}")
    beta_piv = solve_triangular(R, Q.T @ y)
    beta = np.empty(p + 1)
    beta[piv] = beta_piv
    return LinearModel(intercept=float(beta[0]), coef=beta[1:].copy())


# ---------------------------------------------------------------------------
# random forests

@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters; None fields resolve to task defaults at fit time
    (mtry: p/3 regression, sqrt(p) classification; min_node_size: 5 / 1)."""

    n_trees: int = 500
    mtry: int | None = None
    min_node_size: int | None = None
    bootstrap: bool = True

    def resolved(self, p: int, task: str) -> "ForestParams":
        mtry = self.mtry
        if mtry is None:
            mtry = max(1, p // 3) if task == "regression" else max(1, int(math.sqrt(p)))
        min_node = self.min_node_size
        if min_node is None:
            min_node = 5 if task == "regression" else 1
        if self.n_trees < 1:
            raise FitError(f"n_trees must be >= 1, got {self.n_trees}")
        if not 1 <= mtry <= p:
            raise FitError(f"mtry must be in [1, {p}], got {mtry}")
        if min_node < 1:
            raise FitError(f"min_node_size must be >= 1, got {min_node}")
        return ForestParams(self.n_trees, mtry, min_node, self.bootstrap)


@dataclass(frozen=True)
class Forest:
    """Bagged CART-style trees stored in flat concatenated node arrays.

    `roots[t]` indexes tree t's root; internal nodes carry (feature,
    threshold, left, right), leaves carry a mean value (regression) or a
    class-probability vector (classification).
    """

    task: str  # "regression" | "classification"
    params: ForestParams
    seed: int
    n_features: int
    n_classes: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    payload: np.ndarray  # leaf means or (node, class) probabilities
    roots: np.ndarray

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got {X.shape}")
        return X

    def predict(self, X) -> np.ndarray:
        """Regression: mean of tree means. Classification: argmax class id."""
        X = self._check(X)
        if self.task == "regression":
            return _tree.predict_reg(X, self.feature, self.threshold, self.left,
                                     self.right, self.payload, self.roots)
        return np.argmax(self.predict_proba(X), axis=1)

    def predict_proba(self, X) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("predict_proba requires a classification forest")
        X = self._check(X)
        return _tree.predict_clf(X, self.feature, self.threshold, self.left,
                                 self.right, self.payload, self.roots, self.n_classes)


def fit_forest(X, y, params: ForestParams | None = None, seed: int = 0, *,
               task: str | None = None, n_classes: int | None = None) -> Forest:
    """Grow a random forest on (X, y).

    Each tree is grown on a bootstrap sample (n draws with replacement unless
    params.bootstrap is False), choosing the best split among `mtry` randomly
    drawn features by variance reduction (regression) or Gini decrease
    (classification). `task` defaults to classification for integer labels.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise FitError("X must be a 2-d matrix")
    n, p = X.shape
    if n < 2:
        raise FitError(f"need at least 2 observations, got {n}")
    y = np.asarray(y)
    if y.shape != (n,):
        raise FitError(f"label length {y.shape} does not match n={n}")
    if task is None:
        task = "classification" if np.issubdtype(y.dtype, np.integer) else "regression"
    if task not in ("regression", "classification"):
        raise FitError(f"unknown task {task!r}")
    params = (params or ForestParams()).resolved(p, task)

    if task == "classification":
        y = np.asarray(y, dtype=np.int64)
        g = int(n_classes) if n_classes is not None else int(y.max()) + 1
        if y.min() < 0 or y.max() >= g:
            raise FitError(f"class ids must lie in [0, {g})")
    else:
        y = np.asarray(y, dtype=np.float64)
        if not np.all(np.isfinite(y)):
            raise FitError("labels contain non-finite values")
        g = 1

    features, thresholds, lefts, rights, payloads, roots = [], [], [], [], [], []
    offset = 0
    grow_seeds = seed_sequence(seed, 0).generate_state(params.n_trees, np.uint32)
    if params.bootstrap:
        boot = np.random.default_rng(seed_sequence(seed, 1)).integers(
            0, n, size=(params.n_trees, n))
    base_idx = np.arange(n, dtype=np.int64)
    for t_idx in range(params.n_trees):
        idx = boot[t_idx] if params.bootstrap else base_idx
        tree_seed = int(grow_seeds[t_idx])
        if task == "regression":
            f, t, l, r, v = _tree.grow_reg(X, y, idx, params.mtry, params.min_node_size, tree_seed)
        else:
            f, t, l, r, v = _tree.grow_clf(X, y, g, idx, params.mtry, params.min_node_size, tree_seed)
        features.append(f)
        thresholds.append(t)
        lefts.append(np.where(l >= 0, l + offset, -1))
        rights.append(np.where(r >= 0, r + offset, -1))
        payloads.append(v)
        roots.append(offset)
        offset += len(f)

    return Forest(
        task=task, params=params, seed=int(seed), n_features=p, n_classes=g,
        feature=np.concatenate(features), threshold=np.concatenate(thresholds),
        left=np.concatenate(lefts), right=np.concatenate(rights),
        payload=np.concatenate(payloads), roots=np.asarray(roots, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# top-down hierarchical classification

@dataclass(frozen=True)
class _ConstantChildren:
    """Stand-in local model for nodes with no usable training data."""
    probs: np.ndarray

    def predict_proba(self, X) -> np.ndarray:
        return np.tile(self.probs, (len(X), 1))


@dataclass(frozen=True)
class TopDownClassifier:
    """Local multi-class forests at each internal node, composed top-down.

    Prediction descends from the root, at each internal node picking the
    child with the highest local probability (ties break to the child with
    the smaller canonical label). Leaf predictions are mandatory.
    """

    tree: CategoryTree
    node_models: dict = field(compare=False)  # internal node id (None = root) -> model
    fit_report: dict = field(compare=False)
    n_features: int = 0

    def _check(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got {X.shape}")
        return X

    def predict(self, X) -> np.ndarray:
        """Predicted leaf id per row, by greedy descent."""
        X = self._check(X)
        n = len(X)
        out = np.empty(n, dtype=object)
        frontier = [(None, np.arange(n))]
        while frontier:
            node, rows = frontier.pop()
            children = self.tree.children[node]
            if not children:
                for i in rows:
                    out[i] = node
                continue
            if len(children) == 1:
                frontier.append((children[0], rows))
                continue
            probs = self.node_models[node].predict_proba(X[rows])
            choice = np.argmax(probs, axis=1)  # first max wins: smallest canonical label
            for j, child in enumerate(children):
                sub = rows[choice == j]
                if len(sub):
                    frontier.append((child, sub))
        return out

    def predict_leaf_proba(self, X) -> tuple[np.ndarray, list]:
        """Probability distribution over leaves (product of local child
        probabilities along each root-to-leaf path); returns (matrix, leaves)."""
        X = self._check(X)
        n = len(X)
        node_prob: dict = {None: np.ones(n)}
        for node in [None] + self.tree.internal_nodes:
            children = self.tree.children[node]
            if not children:
                continue
            parent_p = node_prob[node]
            if len(children) == 1:
                node_prob[children[0]] = parent_p.copy()
                continue
            local = self.node_models[node].predict_proba(X)
            for j, child in enumerate(children):
                node_prob[child] = parent_p * local[:, j]
        leaves = list(self.tree.leaves)
        out = np.column_stack([node_prob[leaf] for leaf in leaves])
        return out, leaves


def fit_topdown(X, leaf_labels, tree: CategoryTree, params: ForestParams | None = None,
                seed: int = 0) -> TopDownClassifier:
    """Fit local child-versus-child forests at every internal node.

    Each local forest trains on the rows whose true path passes through the
    node, labeled by the child taken. Internal nodes with no training rows
    fall back to a uniform prior over their children and are listed in the
    fit report.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, p = X.shape
    labels = np.asarray(leaf_labels, dtype=object)
    if labels.shape != (n,):
        raise FitError(f"label length {labels.shape} does not match n={n}")
    leaf_set = set(tree.leaves)
    for v in labels:
        if v not in leaf_set:
            raise FitError(f"label {v!r} is not a leaf of the tree")
    idx = tree.node_indices(labels)
    paths = tree.paths_of(idx)  # (n, height) interned ancestor chains

    params = params or ForestParams()
    node_models: dict = {}
    report = {"empty_nodes": [], "single_class_nodes": []}
    internal = [None] + tree.internal_nodes
    for node_counter, node in enumerate(internal):
        children = tree.children[node]
        if len(children) < 2:
            continue
        depth = 0 if node is None else tree.depth[node]
        if node is None:
            rows = np.arange(n)
        else:
            rows = np.flatnonzero(paths[:, depth - 1] == tree.index[node])
        child_index = {tree.index[c]: j for j, c in enumerate(children)}
        if rows.size == 0:
            node_models[node] = _ConstantChildren(np.full(len(children), 1.0 / len(children)))
            report["empty_nodes"].append(node)
            continue
        y_local = np.fromiter((child_index[paths[i, depth]] for i in rows),
                              dtype=np.int64, count=rows.size)
        if rows.size == 1:
            probs = np.zeros(len(children))
            probs[y_local[0]] = 1.0
            node_models[node] = _ConstantChildren(probs)
            continue
        if len(np.unique(y_local)) == 1:
            report["single_class_nodes"].append(node)
        node_models[node] = fit_forest(
            X[rows], y_local, params, seed=child_seed_for(seed, node_counter),
            task="classification", n_classes=len(children))
    return TopDownClassifier(tree=tree, node_models=node_models, fit_report=report,
                             n_features=p)


def child_seed_for(seed: int, counter: int) -> int:
    return int(seed_sequence(seed, counter).generate_state(1, np.uint32)[0])


# ---------------------------------------------------------------------------
# serialization

def save_model(model, path) -> None:
    """Round-trip exact serialization of any fitted model."""
    with open(path, "wb") as fh:
        pickle.dump(model, fh)


def load_model(path):
    with open(path, "rb") as fh:
        return pickle.load(fh)
