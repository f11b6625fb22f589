"""Data-generating processes for the four simulation studies.

All generators are deterministic given (config, seed); replicate streams are
derived by counter so parallel generation is order-independent. The feature
count is five throughout, mirroring a deliberately uniform design across the
clustered, unequal-probability, drift and hierarchical studies.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ._rng import rng_from, child_seed
from .data import Dataset, derive_season
from .hierarchy import CategoryTree
from .metrics import SamplingDesign

logger = logging.getLogger("errest.simgen")


class SimError(ValueError):
    """Raised for invalid or infeasible simulation configurations."""


# ---------------------------------------------------------------------------
# clustered data

CLUSTER_BETA = np.array([1.0, 1.0, -1.0, 0.0, 0.0])
FEATURE_MODES = ("all_iid", "x1_cluster_constant", "x2_cluster_constant")


@dataclass(frozen=True)
class ClusteredConfig:
    """Linear model with cluster-specific random intercepts and x1 slopes."""

    M: int
    n_m: int
    sigma2: float = 1.0
    sigma2_1: float = 0.0
    sigma2_2: float = 0.0
    feature_mode: str = "all_iid"
    seed: int = 0

    def __post_init__(self):
        if self.M < 2 or self.n_m < 1:
            raise SimError(f"need M >= 2 and n_m >= 1, got M={self.M}, n_m={self.n_m}")
        if min(self.sigma2, self.sigma2_1, self.sigma2_2) < 0:
            raise SimError("variances must be >= 0")
        if self.feature_mode not in FEATURE_MODES:
            raise SimError(f"unknown feature_mode {self.feature_mode!r}")


def gen_clustered(cfg: ClusteredConfig) -> Dataset:
    """n = M * n_m rows of y = x1 + x2 - x3 + b_m1 + b_m2 * x1 + noise.

    Cluster effects b_m1, b_m2 are drawn once per cluster; under the
    *_cluster_constant feature modes the named feature takes a single value
    per cluster.
    """
    rng = rng_from(cfg.seed)
    n = cfg.M * cfg.n_m
    cluster = np.repeat(np.arange(cfg.M), cfg.n_m)
    X = rng.standard_normal((n, 5))
    if cfg.feature_mode != "all_iid":
        col = 0 if cfg.feature_mode == "x1_cluster_constant" else 1
        X[:, col] = np.repeat(rng.standard_normal(cfg.M), cfg.n_m)
    b1 = rng.normal(0.0, np.sqrt(cfg.sigma2_1), cfg.M)
    b2 = rng.normal(0.0, np.sqrt(cfg.sigma2_2), cfg.M)
    eps = rng.normal(0.0, np.sqrt(cfg.sigma2), n)
    y = X @ CLUSTER_BETA + b1[cluster] + b2[cluster] * X[:, 0] + eps
    return Dataset(features=X, label=y, cluster_id=cluster)


# ---------------------------------------------------------------------------
# unequal sampling probabilities

NSRS_BETA = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
NSRS_INTERCEPT = 5.0


@dataclass(frozen=True)
class NsrsConfig:
    """Population model with a size variable proportional to the label."""

    N: int
    n: int | None = None  # sample size; defaults to N / 100
    misspecified: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.N < 100:
            raise SimError(f"population size must be >= 100, got {self.N}")
        n = self.n if self.n is not None else self.N // 100
        if not 1 <= n < self.N:
            raise SimError(f"need 1 <= n < N, got n={n}, N={self.N}")
        object.__setattr__(self, "n", n)


def _nsrs_draw(rng: np.random.Generator, size: int, misspecified: bool):
    """Fresh draws from the superpopulation model; returns (features, y)."""
    x_eff = rng.gamma(shape=0.1, scale=10.0, size=(size, 2))  # mean 1, heavily skewed
    x_noise = rng.standard_normal((size, 3))
    X = np.column_stack([x_eff, x_noise])
    y = NSRS_INTERCEPT + X @ NSRS_BETA + rng.standard_normal(size)
    if misspecified:
        X = np.delete(X, 1, axis=1)  # drop x2 after the label is realized
    return X, y


def nsrs_fresh(cfg: NsrsConfig, size: int, seed: int) -> Dataset:
    """Independent test draws from the same superpopulation (no design)."""
    X, y = _nsrs_draw(rng_from(seed), size, cfg.misspecified)
    return Dataset(features=X, label=y)


def gen_nsrs_population(cfg: NsrsConfig) -> tuple[Dataset, SamplingDesign]:
    """Finite population of N units plus its size-proportional design.

    The size variable is the label plus unit noise (redrawn until positive);
    inclusion probabilities are n * u / sum(u). Values reaching 1 are
    truncated to 1 - 1e-9 with the rest renormalized (logged; rare under the
    data model).
    """
    rng = rng_from(cfg.seed)
    x_eff = rng.gamma(shape=0.1, scale=10.0, size=(cfg.N, 2))
    x_noise = rng.standard_normal((cfg.N, 3))
    X = np.column_stack([x_eff, x_noise])
    y = NSRS_INTERCEPT + X @ NSRS_BETA + rng.standard_normal(cfg.N)
    u = y + rng.standard_normal(cfg.N)
    for _ in range(1000):
        bad = u <= 0.0
        if not bad.any():
            break
        u[bad] = y[bad] + rng.standard_normal(int(bad.sum()))
    if (u <= 0.0).any():
        raise SimError("could not draw positive size values; labels too negative")

    pi = cfg.n * u / u.sum()
    cap = 1.0 - 1e-9
    capped = np.zeros(cfg.N, dtype=bool)
    while True:
        over = (pi >= 1.0) & ~capped
        if not over.any():
            break
        logger.warning("truncating %d inclusion probabilities >= 1", int(over.sum()))
        capped |= over
        pi[capped] = cap
        free = ~capped
        target = cfg.n - capped.sum() * cap
        if target <= 0 or not free.any():
            raise SimError("inclusion probabilities cannot be renormalized to the sample size")
        pi[free] *= target / pi[free].sum()
    if np.any(pi >= 1.0) or np.any(pi <= 0.0):
        raise SimError("inclusion probabilities could not be confined to (0, 1)")

    features = np.delete(X, 1, axis=1) if cfg.misspecified else X
    d = Dataset(features=features, label=y, inclusion_prob=pi, population_size=cfg.N)
    return d, SamplingDesign(pi=pi, N=cfg.N)


def draw_pps_sample(design: SamplingDesign, seed: int) -> np.ndarray:
    """Fixed-size without-replacement sample with inclusion probabilities pi.

    Systematic sampling on a uniformly random unit permutation: the realized
    first-order inclusion frequency of every unit equals its pi exactly.
    """
    pi = design.pi
    n = int(round(pi.sum()))
    if abs(pi.sum() - n) > 1e-6 * max(1, n):
        raise SimError(f"inclusion probabilities sum to {pi.sum():.6f}, not an integer sample size")
    if np.any(pi >= 1.0):
        raise SimError("inclusion probabilities must be < 1 for systematic sampling")
    rng = rng_from(seed)
    perm = rng.permutation(pi.size)
    cum = np.cumsum(pi[perm])
    points = rng.random() + np.arange(n)
    chosen = np.searchsorted(cum, points, side="right")
    return np.sort(perm[np.minimum(chosen, pi.size - 1)])


# ---------------------------------------------------------------------------
# concept drift

DRIFT_BETA = np.array([2.0, -1.0, 2.0, 0.0, 0.0])
DRIFT_SLOPES = {"none": 0.0, "weak": 0.5, "medium": 1.0, "strong": 2.0}


@dataclass(frozen=True)
class DriftConfig:
    """Linear model with incremental drift over t in [0, 1].

    Label drift moves the intercept at slope delta_y * t, feature drift moves
    the means of the three effective features at delta_x * t, and the noise
    variance is 1 + variance_slope * t. Time is split into `seasons` equal
    intervals of which the first `observed_seasons` are the training period.
    """

    n_train: int
    label_drift: str = "none"
    feature_drift: str = "none"
    variance_slope: float = 0.0
    seasons: int = 10
    observed_seasons: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n_train < 1:
            raise SimError("n_train must be >= 1")
        for name in (self.label_drift, self.feature_drift):
            if name not in DRIFT_SLOPES:
                raise SimError(f"unknown drift level {name!r}")
        if self.seasons < 2:
            raise SimError("need at least 2 seasons")
        if not 1 <= self.observed_seasons < self.seasons:
            raise SimError("observed_seasons must lie in [1, seasons)")
        if 1.0 + self.variance_slope <= 0.0:
            raise SimError("noise variance must stay positive over [0, 1]")

    @property
    def delta_y(self) -> float:
        return DRIFT_SLOPES[self.label_drift]

    @property
    def delta_x(self) -> float:
        return DRIFT_SLOPES[self.feature_drift]


@dataclass(frozen=True)
class DriftModel:
    """Generator handle emitting fresh observations at any fixed time point."""

    cfg: DriftConfig

    def _draw(self, rng: np.random.Generator, t: np.ndarray):
        n = t.shape[0]
        X = rng.standard_normal((n, 5))
        X[:, :3] += (self.cfg.delta_x * t)[:, None]
        sigma = np.sqrt(1.0 + self.cfg.variance_slope * t)
        y = self.cfg.delta_y * t + X @ DRIFT_BETA + sigma * rng.standard_normal(n)
        return X, y

    def sample_at(self, t_star: float, size: int, seed: int) -> Dataset:
        """Instantaneous distribution at time t_star."""
        if not 0.0 <= t_star <= 1.0:
            raise SimError(f"t_star must lie in [0, 1], got {t_star}")
        t = np.full(size, float(t_star))
        X, y = self._draw(rng_from(seed), t)
        return Dataset(features=X, label=y, time=t)

    def sample_training(self, seed: int) -> Dataset:
        """Training draw over the observed fraction of the period."""
        cfg = self.cfg
        rng = rng_from(seed)
        horizon = cfg.observed_seasons / cfg.seasons
        t = rng.random(cfg.n_train) * horizon
        X, y = self._draw(rng, t)
        season = derive_season(t, cfg.seasons)
        return Dataset(features=X, label=y, time=t, season=season)


def gen_drift(cfg: DriftConfig) -> tuple[Dataset, DriftModel]:
    """Observed training data plus a handle for future time points."""
    model = DriftModel(cfg)
    return model.sample_training(cfg.seed), model


# ---------------------------------------------------------------------------
# hierarchically structured outcomes

@dataclass(frozen=True)
class HierConfig:
    """Random category tree plus a top-down multinomial-logit allocation.

    `internal_nodes` counts the root among the internal nodes, matching the
    tree identity leaves + internal = total nodes. Child-allocation
    coefficients at depth d are scaled by effect_scale * effect_decay^(d-1),
    so class separation weakens down the tree; they are drawn once per tree
    and shared by every replicate.
    """

    n_leaves: int = 50
    internal_nodes: int = 39
    p: int = 5
    effect_scale: float = 3.0
    effect_decay: float = 0.5
    n_train: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.n_leaves < 2 or self.internal_nodes < 1:
            raise SimError("need n_leaves >= 2 and internal_nodes >= 1")
        if self.p < 1 or self.n_train < 1:
            raise SimError("p and n_train must be >= 1")
        if not 0.0 < self.effect_decay < 1.0:
            raise SimError("effect_decay must lie in (0, 1)")
        # every internal node takes 2 or 3 children
        extra = (self.n_leaves + self.internal_nodes - 1) - 2 * self.internal_nodes
        if not 0 <= extra <= self.internal_nodes:
            raise SimError(
                f"no tree with {self.n_leaves} leaves and {self.internal_nodes} internal "
                f"nodes has only 2- or 3-child internal nodes")


def generate_tree(cfg: HierConfig) -> CategoryTree:
    """Random category tree meeting the configured node counts and arity.

    Deterministic given cfg.seed; a study uses one fixed tree across all of
    its replicates.
    """
    rng = rng_from(cfg.seed, 0)
    slots = cfg.internal_nodes  # root plus internal class nodes
    total_children = cfg.n_leaves + cfg.internal_nodes - 1
    arity = np.full(slots, 2, dtype=np.int64)
    extra = total_children - 2 * slots
    if extra > 0:
        arity[rng.choice(slots, size=extra, replace=False)] = 3

    children: dict[int, list] = {i: [] for i in range(slots)}
    open_pos = [0] * int(arity[0])
    for i in range(1, slots):
        pos = int(rng.integers(len(open_pos)))
        parent = open_pos.pop(pos)
        children[parent].append(i)
        open_pos.extend([i] * int(arity[i]))
    for parent in open_pos:
        children[parent].append(None)  # leaf slot

    leaf_labels: list[str] = []

    def walk(slot: int, prefix: str):
        for j, child in enumerate(children[slot], start=1):
            label = f"{prefix}{j}" if not prefix else f"{prefix}.{j}"
            if child is None:
                leaf_labels.append(label)
            else:
                walk(child, label)

    walk(0, "")
    tree = CategoryTree(leaf_labels)
    assert len(tree.leaves) == cfg.n_leaves
    return tree


@dataclass(frozen=True)
class HierModel:
    """Fixed tree and allocation coefficients; draws labeled feature data."""

    tree: CategoryTree
    cfg: HierConfig
    intercepts: dict = field(compare=False, default_factory=dict)
    slopes: dict = field(compare=False, default_factory=dict)

    def draw(self, size: int, seed: int) -> Dataset:
        cfg = self.cfg
        rng = rng_from(seed)
        X = rng.standard_normal((size, cfg.p))
        uniforms = rng.random((size, self.tree.height))
        labels = np.empty(size, dtype=object)
        frontier = [(None, np.arange(size))]
        while frontier:
            node, rows = frontier.pop()
            kids = self.tree.children[node]
            if not kids:
                labels[rows] = node
                continue
            if len(kids) == 1:
                frontier.append((kids[0], rows))
                continue
            depth = 0 if node is None else self.tree.depth[node]
            logits = X[rows] @ self.slopes[node].T + self.intercepts[node]
            logits -= logits.max(axis=1, keepdims=True)
            probs = np.exp(logits)
            probs /= probs.sum(axis=1, keepdims=True)
            cum = np.cumsum(probs, axis=1)
            u = uniforms[rows, depth]
            choice = (u[:, None] > cum).sum(axis=1)
            choice = np.minimum(choice, len(kids) - 1)
            for j, kid in enumerate(kids):
                sub = rows[choice == j]
                if len(sub):
                    frontier.append((kid, sub))
        return Dataset(features=X, label=labels, label_kind="hierarchical", tree=self.tree)

    def allocation_probs(self, X: np.ndarray, node=None) -> np.ndarray:
        """Softmax child probabilities at one internal node, for testing."""
        logits = X @ self.slopes[node].T + self.intercepts[node]
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        return probs / probs.sum(axis=1, keepdims=True)


def build_hier_model(tree: CategoryTree, cfg: HierConfig) -> HierModel:
    """Draw per-node child coefficients once; scale shrinks with depth."""
    rng = rng_from(cfg.seed, 1)
    intercepts: dict = {}
    slopes: dict = {}
    for node in [None] + tree.internal_nodes:
        kids = tree.children[node]
        if len(kids) < 2:
            continue
        depth = 1 if node is None else tree.depth[node] + 1  # level being assigned
        scale = cfg.effect_scale * cfg.effect_decay ** (depth - 1)
        intercepts[node] = rng.normal(0.0, scale, size=len(kids))
        slopes[node] = rng.normal(0.0, scale, size=(len(kids), cfg.p))
    return HierModel(tree=tree, cfg=cfg, intercepts=intercepts, slopes=slopes)


def gen_hier_data(tree: CategoryTree, cfg: HierConfig, data_seed: int | None = None) -> Dataset:
    """Features i.i.d. standard normal; labels from a top-down multinomial
    descent with tree-fixed coefficients. `data_seed` defaults to a stream
    derived from cfg.seed."""
    model = build_hier_model(tree, cfg)
    if data_seed is None:
        data_seed = child_seed(cfg.seed, 2)
    return model.draw(cfg.n_train, data_seed)
