"""Plan-driven generalization-error estimation and result tables.

estimate_ge fits a learner on each split's training rows, evaluates the
metric on the test rows, and averages across splits. With a sampling design,
point-wise losses are reweighted so each test fold acts as a subsample of the
design: a unit's probability of landing in a given fold is its inclusion
probability times the fold share, which keeps the plan average
design-unbiased for the population mean loss.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import child_seed
from .data import Dataset
from .hierarchy import CategoryTree
from .learners import FitError, ForestParams, fit_forest, fit_ols, fit_topdown
from .metrics import (MetricResult, SamplingDesign, accuracy, aggregate_plan,
                      hajek_loss, hier_prf, h_loss, ht_loss, mse, shortest_path_loss,
                      squared_losses, sym_diff_loss, win_score)
from .splitters import ResamplingPlan


class ExperimentError(ValueError):
    """Raised for invalid experiment configuration or unusable plans."""


LEARNER_FAMILIES = ("ols", "forest", "topdown")


@dataclass(frozen=True)
class LearnerSpec:
    family: str
    forest: ForestParams = field(default_factory=ForestParams)

    def __post_init__(self):
        if self.family not in LEARNER_FAMILIES:
            raise ExperimentError(f"unknown learner family {self.family!r}")

    def fit(self, d: Dataset, rows, seed: int):
        X = d.features[rows]
        y = d.label[rows]
        if self.family == "ols":
            if d.label_kind != "regression":
                raise ExperimentError("ols requires regression labels")
            return fit_ols(X, y)
        if self.family == "forest":
            task = "regression" if d.label_kind == "regression" else "classification"
            return fit_forest(X, y, self.forest, seed=seed, task=task)
        if d.label_kind != "hierarchical" or d.tree is None:
            raise ExperimentError("topdown requires hierarchical labels with an attached tree")
        return fit_topdown(X, y, d.tree, self.forest, seed=seed)


def _halving(height: int) -> np.ndarray:
    return 0.5 ** np.arange(height, dtype=np.float64)


@dataclass(frozen=True)
class MetricSpec:
    """A named metric plus its parameters.

    Known names: mse, accuracy, hier_{precision,recall,f1}_{micro,macro},
    sym_diff_loss, shortest_path_loss (level_weights, halving by default),
    h_loss (costs, halving by default), win_score. `weighting` ("ht" or
    "hajek") applies a sampling design to the per-observation losses and is
    only valid for point-wise metrics.
    """

    name: str
    level_weights: tuple | None = None
    costs: tuple | None = None
    weighting: str | None = None

    def __post_init__(self):
        if self.weighting not in (None, "ht", "hajek"):
            raise ExperimentError(f"unknown weighting {self.weighting!r}")
        if self.weighting is not None and not self.is_pointwise():
            raise ExperimentError(f"design weighting requires a point-wise loss, not {self.name!r}")

    @property
    def key(self) -> str:
        return self.name if self.weighting is None else f"{self.name}_{self.weighting}"

    def is_pointwise(self) -> bool:
        return self.name == "mse"

    def wants_probabilities(self) -> bool:
        return self.name == "win_score"

    def compute(self, y, pred, tree: CategoryTree | None, leaf_probs=None, leaf_order=None) -> float:
        name = self.name
        if name == "mse":
            return mse(y, pred).value
        if name == "accuracy":
            return accuracy(y, pred).value
        if name.startswith("hier_"):
            base, averaging = name[len("hier_"):].rsplit("_", 1)
            values = hier_prf(tree, y, pred, averaging=averaging)
            return values[{"precision": 0, "recall": 1, "f1": 2}[base]]
        if name == "sym_diff_loss":
            return sym_diff_loss(tree, y, pred).value
        if name == "shortest_path_loss":
            w = self.level_weights if self.level_weights is not None else _halving(tree.height)
            return shortest_path_loss(tree, y, pred, level_weights=w).value
        if name == "h_loss":
            c = self.costs if self.costs is not None else _halving(tree.height)
            return h_loss(tree, y, pred, costs=c).value
        if name == "win_score":
            return win_score(tree, y, leaf_probs, leaf_order=leaf_order).value
        raise ExperimentError(f"unknown metric {name!r}")


def higher_is_better(name: str) -> bool:
    return name == "accuracy" or name.startswith("hier_") or name == "win_score"


def _predict_for(model, d: Dataset, rows, need_probs: bool):
    X = d.features[rows]
    pred = model.predict(X)
    leaf_probs = leaf_order = None
    if need_probs:
        if not hasattr(model, "predict_leaf_proba"):
            raise ExperimentError("win_score requires a hierarchical probability model")
        leaf_probs, leaf_order = model.predict_leaf_proba(X)
    return pred, leaf_probs, leaf_order


def evaluate_plan(d: Dataset, plan: ResamplingPlan, learner: LearnerSpec,
                  metrics, design: SamplingDesign | None = None,
                  seed: int = 0) -> dict[str, MetricResult]:
    """Fit/evaluate every split of a plan for one or more metrics.

    Each split fits once and serves every metric (including plain and
    design-weighted variants of the same loss). Returns one aggregated
    MetricResult per metric key. Splits whose training data cannot fit the
    learner are skipped and flagged in the result metadata; all splits
    failing is an error.
    """
    if isinstance(metrics, MetricSpec):
        metrics = [metrics]
    if not metrics:
        raise ExperimentError("need at least one metric")
    if plan.max_index() >= d.n:
        raise ExperimentError(f"plan indexes up to {plan.max_index()} but data has {d.n} rows")
    if any(m.weighting is not None for m in metrics):
        if design is None:
            raise ExperimentError("weighted metrics need a sampling design")
        if design.pi.shape != (d.n,):
            raise ExperimentError("design must carry one inclusion probability per data row")

    need_probs = any(m.wants_probabilities() for m in metrics)
    need_losses = any(m.weighting is not None for m in metrics)
    per_split: dict[str, list[float]] = {m.key: [] for m in metrics}
    skipped = []
    for j, (train, test) in enumerate(plan):
        train = np.asarray(train, dtype=np.int64)
        test = np.asarray(test, dtype=np.int64)
        try:
            model = learner.fit(d, train, seed=child_seed(seed, j))
        except FitError as e:
            skipped.append((j, str(e)))
            continue
        pred, leaf_probs, leaf_order = _predict_for(model, d, test, need_probs)
        y_test = d.label[test]
        losses = squared_losses(y_test, pred) if need_losses else None
        for m in metrics:
            if m.weighting == "ht":
                # the fold is a subsample: inclusion = pi * fold share
                fold = design.subset(test, scale=len(test) / d.n)
                value = ht_loss(losses, fold).value
            elif m.weighting == "hajek":
                value = hajek_loss(losses, design.subset(test)).value
            else:
                value = m.compute(y_test, pred, d.tree, leaf_probs, leaf_order)
            per_split[m.key].append(value)
    if skipped and not any(per_split.values()):
        raise ExperimentError(f"every split failed to fit: {skipped[:3]}...")

    out = {}
    for m in metrics:
        agg = aggregate_plan(per_split[m.key])
        agg.metadata.update({"metric": m.key, "scheme": plan.scheme,
                             "skipped_splits": tuple(j for j, _ in skipped)})
        out[m.key] = agg
    return out


def estimate_ge(d: Dataset, plan: ResamplingPlan, learner: LearnerSpec,
                metric: MetricSpec, design: SamplingDesign | None = None,
                seed: int = 0) -> MetricResult:
    """Resampling estimate of the generalization error for one metric.

    When a design is given and the metric names no weighting, the
    design-unbiased (reciprocal-probability, population-size-normalized)
    weighting is applied.
    """
    if design is not None and metric.weighting is None:
        metric = replace(metric, weighting="ht")
    return evaluate_plan(d, plan, learner, [metric], design, seed)[metric.key]


def approximate_true_ge(train: Dataset, learner: LearnerSpec, metrics,
                        test_source, test_size: int, seed: int = 0) -> dict[str, float]:
    """Fit once on the full training data and evaluate on fresh test data.

    `test_source` is either a Dataset (used as-is) or a callable
    (size, seed) -> Dataset drawing from the target distribution (e.g. a
    drift model pinned at a future time point).
    """
    if isinstance(metrics, MetricSpec):
        metrics = [metrics]
    if test_size < 1:
        raise ExperimentError("test_size must be >= 1")
    model = learner.fit(train, np.arange(train.n), seed=child_seed(seed, 0))
    if isinstance(test_source, Dataset):
        test = test_source
        if test.n > test_size:
            test = test.subset(np.arange(test_size))
    else:
        test = test_source(test_size, child_seed(seed, 1))
    need_probs = any(m.wants_probabilities() for m in metrics)
    pred, leaf_probs, leaf_order = _predict_for(model, test, np.arange(test.n), need_probs)
    return {m.name: m.compute(test.label, pred, test.tree, leaf_probs, leaf_order)
            for m in metrics}


# ---------------------------------------------------------------------------
# result tables

@dataclass
class ResultRow:
    replicate: int
    setting: str
    method: str
    estimate: float
    true_ge: dict = field(default_factory=dict)  # tag -> value
    wall_ms: float = 0.0


@dataclass
class ExperimentResult:
    rows: list
    true_tags: tuple = ()
    timing: bool = False

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (r.replicate, r.setting, r.method))

    def estimates(self, setting: str, method: str) -> np.ndarray:
        return np.array([r.estimate for r in self.sorted_rows()
                         if r.setting == setting and r.method == method])

    def true_values(self, setting: str, method: str, tag: str) -> np.ndarray:
        return np.array([r.true_ge[tag] for r in self.sorted_rows()
                         if r.setting == setting and r.method == method])

    def settings(self) -> list:
        return sorted({r.setting for r in self.rows})

    def methods(self) -> list:
        return sorted({r.method for r in self.rows})

    def write_csv(self, path) -> None:
        header = ["replicate", "setting", "method", "estimate"]
        header += [f"true_ge_{tag}" for tag in self.true_tags]
        if self.timing:
            header.append("wall_ms")
        with open(path, "w") as fh:
            fh.write("#schema=1\n")
            fh.write(",".join(header) + "\n")
            for r in self.sorted_rows():
                cells = [str(r.replicate), r.setting, r.method, repr(float(r.estimate))]
                cells += [repr(float(r.true_ge[tag])) for tag in self.true_tags]
                if self.timing:
                    cells.append(str(int(r.wall_ms)))
                fh.write(",".join(cells) + "\n")


def read_result_csv(path) -> ExperimentResult:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("#schema="):
        raise ExperimentError(f"{path}: missing schema header")
    header = lines[1].split(",")
    tags = tuple(h[len("true_ge_"):] for h in header if h.startswith("true_ge_"))
    timing = header[-1] == "wall_ms"
    rows = []
    for ln in lines[2:]:
        if not ln:
            continue
        cells = ln.split(",")
        true_ge = {tag: float(cells[4 + i]) for i, tag in enumerate(tags)}
        rows.append(ResultRow(replicate=int(cells[0]), setting=cells[1], method=cells[2],
                              estimate=float(cells[3]), true_ge=true_ge,
                              wall_ms=float(cells[-1]) if timing else 0.0))
    return ExperimentResult(rows=rows, true_tags=tags, timing=timing)
