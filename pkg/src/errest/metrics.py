"""Loss and performance measures.

Covers point-wise regression losses, design-weighted aggregation for samples
drawn with unequal inclusion probabilities, flat multi-class precision/recall,
and the hierarchical metric family (ancestor-augmented precision/recall/F1,
symmetric-difference loss, weighted shortest-path loss, H-loss, win score).
All functions are pure.
"""

from dataclasses import dataclass, field

import numpy as np

from .hierarchy import CategoryTree, ancestry


class MetricError(ValueError):
    """Raised for invalid metric inputs."""


@dataclass(frozen=True)
class MetricResult:
    value: float
    per_observation: np.ndarray | None = field(default=None, compare=False)
    metadata: dict = field(default_factory=dict, compare=False)

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class SamplingDesign:
    """First-order inclusion probabilities and population size.

    Design weights are the reciprocals of the inclusion probabilities.
    """

    pi: np.ndarray
    N: int

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        if pi.ndim != 1 or pi.size == 0:
            raise MetricError("pi must be a nonempty vector")
        if not np.all(np.isfinite(pi)) or np.any(pi <= 0.0) or np.any(pi > 1.0):
            raise MetricError("inclusion probabilities must lie in (0, 1]")
        if int(self.N) < pi.size:
            raise MetricError(f"population size {self.N} smaller than sample size {pi.size}")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "N", int(self.N))

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.pi

    def subset(self, idx, scale: float = 1.0) -> "SamplingDesign":
        """Design restricted to `idx`, inclusion probabilities scaled by `scale`
        (the probability of landing in the sub-sample given inclusion)."""
        return SamplingDesign(pi=np.minimum(self.pi[idx] * scale, 1.0), N=self.N)


# ---------------------------------------------------------------------------
# point-wise losses and design-weighted aggregation

def mse(y, yhat) -> MetricResult:
    """Mean squared error."""
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.size == 0:
        raise MetricError(f"length mismatch or empty input: {y.shape} vs {yhat.shape}")
    sq = (y - yhat) ** 2
    return MetricResult(value=float(sq.mean()), per_observation=sq, metadata={"metric": "mse"})


def squared_losses(y, yhat) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    return (y - yhat) ** 2


def ht_loss(losses, design: SamplingDesign) -> MetricResult:
    """Design-unbiased weighted mean loss: sum of w_i * L_i over N.

    Expectation over the sampling design equals the population mean loss.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape != design.pi.shape:
        raise MetricError(f"losses length {losses.shape} does not match design {design.pi.shape}")
    contrib = design.weights * losses / design.N
    return MetricResult(value=float(contrib.sum()), per_observation=contrib,
                        metadata={"metric": "ht_loss", "N": design.N})


def hajek_loss(losses, design: SamplingDesign) -> MetricResult:
    """Weighted mean loss normalized by the sum of design weights.

    Small finite-sample bias, usually lower variance than the
    population-size-normalized estimator; usable when N is unknown.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape != design.pi.shape:
        raise MetricError(f"losses length {losses.shape} does not match design {design.pi.shape}")
    w = design.weights
    return MetricResult(value=float((w * losses).sum() / w.sum()),
                        metadata={"metric": "hajek_loss"})


def aggregate_plan(per_split_values) -> MetricResult:
    """Mean of per-split performance values of a resampling plan."""
    vals = np.asarray(per_split_values, dtype=np.float64)
    if vals.size == 0:
        raise MetricError("no per-split values to aggregate")
    return MetricResult(value=float(vals.mean()),
                        metadata={"metric": "aggregate_plan", "n_splits": int(vals.size),
                                  "per_split": vals})


# ---------------------------------------------------------------------------
# flat multi-class metrics

def accuracy(y, yhat) -> MetricResult:
    y = np.asarray(y)
    yhat = np.asarray(yhat)
    if y.shape != yhat.shape or y.size == 0:
        raise MetricError("length mismatch or empty input")
    return MetricResult(value=float(np.mean(y == yhat)), metadata={"metric": "accuracy"})


def flat_prf(y, yhat, averaging: str = "micro") -> tuple[float, float, float]:
    """Precision, recall, F1 for single-label multi-class predictions.

    Micro-averaging weights observations equally (both equal accuracy for
    single-label data); macro-averaging weights classes equally, averaging
    precision over classes predicted at least once and recall over classes
    present in the truth vector. F1 is the harmonic mean (0 when P + R = 0).
    """
    y = np.asarray(y)
    yhat = np.asarray(yhat)
    if y.shape != yhat.shape or y.size == 0:
        raise MetricError("length mismatch or empty input")
    hit = (y == yhat).astype(np.float64)
    if averaging == "micro":
        pr = re = float(hit.mean())
    elif averaging == "macro":
        pr = float(np.mean([hit[yhat == c].mean() for c in np.unique(yhat)]))
        re = float(np.mean([hit[y == c].mean() for c in np.unique(y)]))
    else:
        raise MetricError(f"unknown averaging {averaging!r}")
    return pr, re, _f1(pr, re)


def _f1(pr: float, re: float) -> float:
    return 0.0 if pr + re == 0.0 else 2.0 * pr * re / (pr + re)


# ---------------------------------------------------------------------------
# hierarchical metrics

def _intern_pair(tree: CategoryTree, y, yhat, require_leaf_truth: bool):
    y = np.asarray(y, dtype=object)
    yhat = np.asarray(yhat, dtype=object)
    if y.shape != yhat.shape or y.size == 0:
        raise MetricError("length mismatch or empty input")
    if require_leaf_truth:
        leaves = set(tree.leaves)
        bad = next((v for v in y if v not in leaves), None)
        if bad is not None:
            raise MetricError(f"true label {bad!r} is not a leaf")
    yi = tree.node_indices(y)
    hi = tree.node_indices(yhat)
    return y, yhat, yi, hi


def _common_depth(tree: CategoryTree, yi: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Number of shared ancestors (root excluded) = depth of the deepest
    common ancestor = size of the augmented-set intersection."""
    pa = tree.paths_of(yi)
    pb = tree.paths_of(hi)
    eq = (pa == pb) & (pa >= 0)
    return np.cumprod(eq, axis=1).sum(axis=1)


def hier_prf(tree: CategoryTree, y, yhat, averaging: str = "micro") -> tuple[float, float, float]:
    """Hierarchical precision/recall/F1 over ancestor-augmented label sets.

    True labels must be leaves; predictions may be any non-root node
    (optional leaf-node prediction). Macro recall averages over classes
    present in the truth vector, macro precision over classes predicted at
    least once.
    """
    y, yhat, yi, hi = _intern_pair(tree, y, yhat, require_leaf_truth=True)
    inter = _common_depth(tree, yi, hi).astype(np.float64)
    dep_y = tree.depths_of(yi).astype(np.float64)
    dep_h = tree.depths_of(hi).astype(np.float64)
    if averaging == "micro":
        pr = float(inter.sum() / dep_h.sum())
        re = float(inter.sum() / dep_y.sum())
    elif averaging == "macro":
        n_nodes = len(tree.nodes)
        num = np.zeros(n_nodes)
        den = np.zeros(n_nodes)
        np.add.at(num, hi, inter)
        np.add.at(den, hi, dep_h)
        predicted = den > 0
        pr = float((num[predicted] / den[predicted]).mean())
        num[:] = 0.0
        den[:] = 0.0
        np.add.at(num, yi, inter)
        np.add.at(den, yi, dep_y)
        present = den > 0
        re = float((num[present] / den[present]).mean())
    else:
        raise MetricError(f"unknown averaging {averaging!r}")
    return pr, re, _f1(pr, re)


def sym_diff_loss(tree: CategoryTree, y, yhat) -> MetricResult:
    """Mean size of the symmetric difference of ancestor-augmented labels."""
    y, yhat, yi, hi = _intern_pair(tree, y, yhat, require_leaf_truth=False)
    common = _common_depth(tree, yi, hi)
    per = (tree.depths_of(yi) + tree.depths_of(hi) - 2 * common).astype(np.float64)
    return MetricResult(value=float(per.mean()), per_observation=per,
                        metadata={"metric": "sym_diff_loss"})


def shortest_path_loss(tree: CategoryTree, y, yhat,
                       level_weights=None) -> MetricResult:
    """Mean sum of edge weights along the path between truth and prediction.

    `level_weights[d-1]` is the weight of edges ending at depth d (the edges
    incident to the root carry the level-1 weight). Without weights this is
    the plain edge count and coincides with sym_diff_loss.
    """
    y, yhat, yi, hi = _intern_pair(tree, y, yhat, require_leaf_truth=False)
    if level_weights is None:
        w = np.ones(tree.height)
    else:
        w = np.asarray(level_weights, dtype=np.float64)
        if w.shape != (tree.height,):
            raise MetricError(f"level_weights must have length {tree.height}, got {w.shape}")
        if np.any(w <= 0.0):
            raise MetricError("level_weights must be strictly positive")
        if np.any(np.diff(w) > 0.0):
            raise MetricError("level_weights must be non-increasing with depth")
    cum = np.concatenate([[0.0], np.cumsum(w)])
    common = _common_depth(tree, yi, hi)
    per = (cum[tree.depths_of(yi)] - cum[common]) + (cum[tree.depths_of(hi)] - cum[common])
    return MetricResult(value=float(per.mean()), per_observation=per,
                        metadata={"metric": "shortest_path_loss"})


def h_loss(tree: CategoryTree, y, yhat, costs) -> MetricResult:
    """Top-down loss charging only the first level at which the predicted
    path deviates from the true path, with depth-decreasing costs."""
    y, yhat, yi, hi = _intern_pair(tree, y, yhat, require_leaf_truth=False)
    c = np.asarray(costs, dtype=np.float64)
    if c.ndim != 1 or c.size == 0 or np.any(c <= 0.0) or np.any(np.diff(c) >= 0.0):
        raise MetricError("costs must be strictly decreasing and positive")
    dep_h = tree.depths_of(hi)
    if c.size < dep_h.max():
        raise MetricError(f"need at least {dep_h.max()} costs for the deepest prediction")
    common = _common_depth(tree, yi, hi)
    mismatch = common < dep_h  # first wrong level is common + 1, if within the prediction
    per = np.zeros(len(yi))
    per[mismatch] = c[common[mismatch]]
    return MetricResult(value=float(per.mean()), per_observation=per,
                        metadata={"metric": "h_loss"})


def win_score(tree: CategoryTree, y, leaf_probs, leaf_order=None) -> MetricResult:
    """Reward for probabilistic hierarchical predictions.

    Walking the true root-to-leaf path, the m-th class node contributes
    0.5^m times its predicted probability as long as every node so far is
    the argmax child of its parent; a fully correct path earns the leaf
    contribution twice. Internal-node probabilities are the sums over their
    descendant leaves. A deterministic correct prediction scores exactly 1.
    """
    y = np.asarray(y, dtype=object)
    probs = np.asarray(leaf_probs, dtype=np.float64)
    if leaf_order is None:
        leaf_order = list(tree.leaves)
    if probs.shape != (y.size, len(leaf_order)):
        raise MetricError(f"leaf_probs must have shape ({y.size}, {len(leaf_order)})")
    leaf_set = set(tree.leaves)
    for leaf in leaf_order:
        if leaf not in leaf_set:
            raise MetricError(f"unknown leaf {leaf!r} in leaf_order")
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-9):
        raise MetricError("leaf probability rows must sum to 1 within 1e-9")

    # accumulate internal-node probabilities from descendant leaves
    node_probs = np.zeros((y.size, len(tree.nodes)))
    for j, leaf in enumerate(leaf_order):
        for anc in ancestry(leaf):
            node_probs[:, tree.index[anc]] += probs[:, j]

    per = np.zeros(y.size)
    for label in set(y.tolist()):
        if label not in leaf_set:
            raise MetricError(f"true label {label!r} is not a leaf")
        rows = np.flatnonzero(y == label)
        path = ancestry(label)
        alive = np.ones(rows.size, dtype=bool)
        win = np.zeros(rows.size)
        for m, node in enumerate(path, start=1):
            parent = tree.parent[node]
            siblings = tree.children[parent]
            sib_probs = node_probs[np.ix_(rows, [tree.index[s] for s in siblings])]
            is_argmax = np.argmax(sib_probs, axis=1) == siblings.index(node)
            alive &= is_argmax
            contrib = (0.5 ** m) * node_probs[rows, tree.index[node]]
            win[alive] += contrib[alive]
            if m == len(path):
                win[alive] += contrib[alive]  # leaf counted twice
        per[rows] = win
    return MetricResult(value=float(per.mean()), per_observation=per,
                        metadata={"metric": "win_score"})
