"""The four built-in simulation studies and the replicate/parallel machinery.

Each study draws fresh data per replicate, estimates the generalization error
with the schemes under comparison, and (where configured) approximates the
true error on large fresh test sets using a model trained on the full data.
Replicates derive their random streams from (master seed, replicate index),
so results are identical regardless of worker count; rows are sorted before
writing.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, is_dataclass, replace

import numpy as np

from ._rng import child_seed
from .data import Dataset
from .experiments import (ExperimentError, ExperimentResult, LearnerSpec, MetricSpec,
                          ResultRow, evaluate_plan)
from .learners import ForestParams
from .metrics import SamplingDesign, squared_losses
from .simgen import (ClusteredConfig, DriftConfig, DriftModel, HierConfig, NsrsConfig,
                     build_hier_model, draw_pps_sample, gen_clustered, gen_nsrs_population,
                     generate_tree, nsrs_fresh)
from .splitters import (out_of_sample, repeated_grouped_kfold, repeated_kfold,
                        repeated_stratified_kfold, timeseries_cv)

DRIFT_TRUE_TAGS = (("Els", 0.80), ("M1fus", 0.85), ("E1fus", 0.90),
                   ("M2fus", 0.95), ("E2fus", 1.00))

HIER_METRICS = ("accuracy",
                "hier_precision_micro", "hier_recall_micro", "hier_f1_micro",
                "hier_precision_macro", "hier_recall_macro", "hier_f1_macro",
                "shortest_path_loss", "h_loss")


# ---------------------------------------------------------------------------
# study configurations

@dataclass(frozen=True)
class ClusteredStudy:
    settings: tuple  # ClusteredConfig instances; per-replicate seeds are derived
    learners: tuple = ("ols", "forest")
    k: int = 5
    repeats: int = 10
    n_trees: int = 100

    true_tags = ()


@dataclass(frozen=True)
class NsrsStudy:
    N: int = 10_000
    misspecified_variants: tuple = (False, True)
    learners: tuple = ("ols", "forest")
    k: int = 5
    repeats: int = 10
    n_trees: int = 100
    true_test_size: int = 200_000

    true_tags = ("pop",)


@dataclass(frozen=True)
class DriftStudy:
    settings: tuple  # DriftConfig instances
    learners: tuple = ("ols", "forest")
    k: int = 8
    repeats: int = 10
    n_trees: int = 100
    true_test_size: int = 200_000

    true_tags = tuple(tag for tag, _ in DRIFT_TRUE_TAGS)


@dataclass(frozen=True)
class HierStudy:
    base: HierConfig = field(default_factory=HierConfig)
    metrics: tuple = HIER_METRICS
    k: int = 5
    repeats: int = 10
    n_trees: int = 100
    true_test_size: int = 200_000

    true_tags = ("true",)


@dataclass(frozen=True)
class CustomStudy:
    """Evaluate a dataset file with one resampling scheme; no true reference."""

    data_path: str
    scheme: str = "kfold"
    scheme_params: dict = field(default_factory=dict)
    learner: str = "ols"
    metric: str = "mse"
    n_trees: int = 100

    true_tags = ()


@dataclass(frozen=True)
class ExperimentSpec:
    """A study, its configuration, the replicate count and the master seed."""

    study: str
    config: object
    replicates: int = 100
    seed: int = 1
    timing: bool = False

    def __post_init__(self):
        expected = {"clustered": ClusteredStudy, "nsrs": NsrsStudy, "drift": DriftStudy,
                    "hierarchical": HierStudy, "custom": CustomStudy}
        if self.study not in expected:
            raise ExperimentError(f"unknown study {self.study!r}")
        if not isinstance(self.config, expected[self.study]):
            raise ExperimentError(f"study {self.study!r} needs a {expected[self.study].__name__}")
        if self.replicates < 1:
            raise ExperimentError("replicates must be >= 1")


def _learner(name: str, n_trees: int) -> LearnerSpec:
    if name == "ols":
        return LearnerSpec("ols")
    if name in ("forest", "topdown"):
        return LearnerSpec(name, forest=ForestParams(n_trees=n_trees))
    raise ExperimentError(f"unknown learner {name!r}")


# ---------------------------------------------------------------------------
# per-replicate runners

def _clustered_replicate(cfg: ClusteredStudy, seed: int, r: int) -> list:
    rows = []
    for si, setting in enumerate(cfg.settings):
        d = gen_clustered(replace(setting, seed=child_seed(seed, r, si, 0)))
        plans = {
            "cv_standard": repeated_kfold(d.n, cfg.k, cfg.repeats, child_seed(seed, r, si, 1)),
            "cv_grouped": repeated_grouped_kfold(d.cluster_id, cfg.k, cfg.repeats,
                                                 child_seed(seed, r, si, 2)),
        }
        for li, lname in enumerate(cfg.learners):
            learner = _learner(lname, cfg.n_trees)
            sid = (f"clustered:M={setting.M}|n_m={setting.n_m}|s2={setting.sigma2}|"
                   f"s1sq={setting.sigma2_1}|s2sq={setting.sigma2_2}|"
                   f"mode={setting.feature_mode}|learner={lname}")
            for method, plan in plans.items():
                res = evaluate_plan(d, plan, learner, MetricSpec("mse"),
                                    seed=child_seed(seed, r, si, 3 + li))
                rows.append(ResultRow(r, sid, method, res["mse"].value))
    return rows


def _nsrs_replicate(cfg: NsrsStudy, seed: int, r: int) -> list:
    rows = []
    metrics = [MetricSpec("mse"), MetricSpec("mse", weighting="ht"),
               MetricSpec("mse", weighting="hajek")]
    for vi, misspecified in enumerate(cfg.misspecified_variants):
        gen = NsrsConfig(N=cfg.N, misspecified=misspecified,
                         seed=child_seed(seed, r, vi, 0))
        population, design = gen_nsrs_population(gen)
        sample_idx = draw_pps_sample(design, child_seed(seed, r, vi, 1))
        d = population.subset(sample_idx)
        sample_design = SamplingDesign(pi=d.inclusion_prob, N=cfg.N)
        plan = repeated_kfold(d.n, cfg.k, cfg.repeats, child_seed(seed, r, vi, 2))
        for li, lname in enumerate(cfg.learners):
            learner = _learner(lname, cfg.n_trees)
            sid = f"nsrs:N={cfg.N}|misspec={misspecified}|learner={lname}"
            res = evaluate_plan(d, plan, learner, metrics, design=sample_design,
                                seed=child_seed(seed, r, vi, 3 + li))
            model = learner.fit(d, np.arange(d.n), seed=child_seed(seed, r, vi, 5 + li))
            test = nsrs_fresh(gen, cfg.true_test_size, child_seed(seed, r, vi, 7))
            true = float(squared_losses(test.label, model.predict(test.features)).mean())
            for method, key in (("cv_plain", "mse"), ("cv_ht", "mse_ht"),
                                ("cv_hajek", "mse_hajek")):
                rows.append(ResultRow(r, sid, method, res[key].value, {"pop": true}))
    return rows


def _drift_replicate(cfg: DriftStudy, seed: int, r: int) -> list:
    rows = []
    for si, setting in enumerate(cfg.settings):
        gen = replace(setting, seed=child_seed(seed, r, si, 0))
        model_handle = DriftModel(gen)
        d = model_handle.sample_training(gen.seed)
        plans = {
            "cv": repeated_kfold(d.n, cfg.k, cfg.repeats, child_seed(seed, r, si, 1)),
            "tscv": timeseries_cv(d.season, gap=0),
            "tscv_buffer": timeseries_cv(d.season, gap=1),
            "oos": out_of_sample(d.season, test_seasons=1, gap=0),
            "oos_buffer": out_of_sample(d.season, test_seasons=1, gap=1),
        }
        for li, lname in enumerate(cfg.learners):
            learner = _learner(lname, cfg.n_trees)
            sid = (f"drift:label={setting.label_drift}|feature={setting.feature_drift}|"
                   f"n={setting.n_train}|learner={lname}")
            fitted = learner.fit(d, np.arange(d.n), seed=child_seed(seed, r, si, 2 + li))
            true = {}
            for ti, (tag, t_star) in enumerate(DRIFT_TRUE_TAGS):
                test = model_handle.sample_at(t_star, cfg.true_test_size,
                                              child_seed(seed, r, si, 10 + ti))
                true[tag] = float(squared_losses(test.label, fitted.predict(test.features)).mean())
            for method, plan in plans.items():
                res = evaluate_plan(d, plan, learner, MetricSpec("mse"),
                                    seed=child_seed(seed, r, si, 20 + li))
                rows.append(ResultRow(r, sid, method, res["mse"].value, dict(true)))
    return rows


def _hier_metric_specs(cfg: HierStudy) -> list:
    return [MetricSpec(name) for name in cfg.metrics]


def _hier_replicate(cfg: HierStudy, seed: int, r: int, model=None) -> list:
    if model is None:
        model = build_hier_model(generate_tree(cfg.base), cfg.base)
    d = model.draw(cfg.base.n_train, child_seed(seed, r, 0))
    learner = _learner("topdown", cfg.n_trees)
    specs = _hier_metric_specs(cfg)
    plans = {
        "cv_standard": repeated_kfold(d.n, cfg.k, cfg.repeats, child_seed(seed, r, 1)),
        "cv_stratified": repeated_stratified_kfold(d.label, cfg.k, cfg.repeats,
                                                   child_seed(seed, r, 2)),
    }
    fitted = learner.fit(d, np.arange(d.n), seed=child_seed(seed, r, 3))
    test = model.draw(cfg.true_test_size, child_seed(seed, r, 4))
    pred = fitted.predict(test.features)
    true = {m.key: m.compute(test.label, pred, model.tree) for m in specs}

    rows = []
    for method, plan in plans.items():
        res = evaluate_plan(d, plan, learner, specs, seed=child_seed(seed, r, 5))
        for m in specs:
            rows.append(ResultRow(r, f"hier:n={cfg.base.n_train}|metric={m.key}",
                                  method, res[m.key].value, {"true": true[m.key]}))
    return rows


def _custom_replicate(cfg: CustomStudy, seed: int, r: int) -> list:
    from .cli import build_plan, load_cli_dataset  # local import to avoid a cycle

    d, design = load_cli_dataset(cfg.data_path)
    plan = build_plan(cfg.scheme, d, dict(cfg.scheme_params), child_seed(seed, r, 0))
    learner = _learner(cfg.learner, cfg.n_trees)
    metric = MetricSpec(cfg.metric)
    res = evaluate_plan(d, plan, learner, metric, design=design if metric.weighting else None,
                        seed=child_seed(seed, r, 1))
    return [ResultRow(r, f"custom:{cfg.data_path}", cfg.scheme, res[metric.key].value)]


# ---------------------------------------------------------------------------
# orchestration

def _replicate_rows(args):
    spec, r, context = args
    runner = {"clustered": _clustered_replicate, "nsrs": _nsrs_replicate,
              "drift": _drift_replicate, "custom": _custom_replicate}.get(spec.study)
    if spec.study == "hierarchical":
        return _hier_replicate(spec.config, spec.seed, r, model=context)
    return runner(spec.config, spec.seed, r)


def run_study(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Run every replicate of a study; deterministic for a fixed spec
    regardless of `workers`."""
    context = None
    if spec.study == "hierarchical":
        context = build_hier_model(generate_tree(spec.config.base), spec.config.base)
    tasks = [(spec, r, context) for r in range(spec.replicates)]
    if workers <= 1:
        chunks = map(_replicate_rows, tasks)
        rows = [row for chunk in chunks for row in chunk]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [row for chunk in pool.map(_replicate_rows, tasks) for row in chunk]
    return ExperimentResult(rows=sorted(rows, key=lambda x: (x.replicate, x.setting, x.method)),
                            true_tags=tuple(spec.config.true_tags), timing=spec.timing)


# ---------------------------------------------------------------------------
# JSON configuration

_STUDY_TYPES = {"clustered": ClusteredStudy, "nsrs": NsrsStudy, "drift": DriftStudy,
                "hierarchical": HierStudy, "custom": CustomStudy}
_SETTING_TYPES = {"clustered": ClusteredConfig, "drift": DriftConfig}


def _from_dict(cls, payload: dict):
    if not isinstance(payload, dict):
        raise ExperimentError(f"{cls.__name__} config must be an object, got {type(payload)}")
    known = {f.name for f in fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ExperimentError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in payload:
            continue
        value = payload[f.name]
        if isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    return cls(**kwargs)


def spec_from_config(payload: dict) -> ExperimentSpec:
    """Build an ExperimentSpec from a parsed JSON document.

    Top-level keys: study, replicates, seed, timing, config. Keys inside
    `config` mirror the study dataclass fields verbatim; unknown keys are
    errors. Clustered/drift settings are lists of generator-config objects.
    """
    if not isinstance(payload, dict):
        raise ExperimentError("config document must be a JSON object")
    unknown = set(payload) - {"study", "replicates", "seed", "timing", "config"}
    if unknown:
        raise ExperimentError(f"unknown top-level keys: {sorted(unknown)}")
    study = payload.get("study")
    if study not in _STUDY_TYPES:
        raise ExperimentError(f"unknown or missing study {study!r}")
    raw = dict(payload.get("config", {}))
    if study in _SETTING_TYPES and "settings" in raw:
        raw["settings"] = tuple(_from_dict(_SETTING_TYPES[study], s) for s in raw["settings"])
    if study == "hierarchical" and "base" in raw:
        raw["base"] = _from_dict(HierConfig, raw["base"])
    config = _from_dict(_STUDY_TYPES[study], raw)
    return ExperimentSpec(study=study, config=config,
                          replicates=int(payload.get("replicates", 100)),
                          seed=int(payload.get("seed", 1)),
                          timing=bool(payload.get("timing", False)))


def load_spec(path) -> ExperimentSpec:
    with open(path) as fh:
        return spec_from_config(json.load(fh))
