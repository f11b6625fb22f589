"""Command-line interface.

Subcommands: `simulate` emits generated datasets, `split` writes resampling
plans in an auditable text format, `evaluate` runs plan-driven GE estimation
on a dataset file, and `study` executes a full replicated simulation study
from a JSON config. Exit status 0 on success, 2 for usage errors, 1 for
runtime failures (diagnostic on stderr).
"""

import argparse
import csv
import json
import sys

from .data import (Dataset, DatasetError, default_schema, derive_season, load_dataset,
                   write_dataset)
from .experiments import ExperimentError, LearnerSpec, MetricSpec, estimate_ge
from .hierarchy import read_tree, write_tree
from .learners import ForestParams
from .metrics import SamplingDesign
from .simgen import (ClusteredConfig, DriftConfig, HierConfig, NsrsConfig, gen_clustered,
                     gen_drift, gen_nsrs_population, generate_tree, gen_hier_data)
from .splitters import (HalfPlane, ResamplingPlan, SplitError, clustered_groups, geo_units,
                        grouped_kfold, kfold, leave_one_disc_out, loo_buffer, out_of_sample,
                        read_plan, rectangular_tiles, repeated_grouped_kfold, repeated_kfold,
                        repeated_stratified_kfold, single_spatial_split, stratified_kfold,
                        timeseries_cv, write_plan)
from .studies import load_spec, run_study

SCHEMES = ("kfold", "repeated-kfold", "grouped-kfold", "stratified-kfold",
           "single-spatial-split", "rectangular-tiles", "clustered-groups",
           "loo-buffer", "leave-one-disc-out", "geo-units", "timeseries-cv",
           "out-of-sample")


def load_cli_dataset(path, schema_path=None, tree_path=None, population_size=None):
    """Load a dataset CSV plus (optionally) its sampling design."""
    schema = None
    if schema_path:
        with open(schema_path) as fh:
            schema = json.load(fh)
    tree = read_tree(tree_path) if tree_path else None
    d = load_dataset(path, schema, tree=tree, population_size=population_size)
    design = None
    if d.inclusion_prob is not None and d.population_size is not None:
        design = SamplingDesign(pi=d.inclusion_prob, N=d.population_size)
    return d, design


def build_plan(scheme: str, d: Dataset, params: dict, seed: int) -> ResamplingPlan:
    """Construct a plan for `scheme` from a dataset's metadata columns."""
    def need(column, what):
        if column is None:
            raise SplitError(f"scheme {scheme!r} needs a {what} column in the data")
        return column

    k = int(params.get("k", 5))
    repeats = int(params.get("repeats", 1))
    gap = int(params.get("gap", 0))
    buffer = float(params.get("buffer", 0.0))
    if scheme == "kfold":
        return kfold(d.n, k, seed) if repeats == 1 else repeated_kfold(d.n, k, repeats, seed)
    if scheme == "repeated-kfold":
        return repeated_kfold(d.n, k, repeats, seed)
    if scheme == "grouped-kfold":
        groups = need(d.cluster_id, "cluster")
        return (grouped_kfold(groups, k, seed) if repeats == 1
                else repeated_grouped_kfold(groups, k, repeats, seed))
    if scheme == "stratified-kfold":
        return (stratified_kfold(d.label, k, seed) if repeats == 1
                else repeated_stratified_kfold(d.label, k, repeats, seed))
    if scheme == "single-spatial-split":
        coords = need(d.coords, "coordinate")
        boundary = HalfPlane(normal=(float(params.get("normal_x", 1.0)),
                                     float(params.get("normal_y", 0.0))),
                             offset=float(params.get("offset", 0.0)))
        return single_spatial_split(coords, boundary, buffer)
    if scheme == "rectangular-tiles":
        coords = need(d.coords, "coordinate")
        grid = (int(params.get("rows", 2)), int(params.get("cols", 2)))
        mode = params.get("mode", "one_block_per_fold")
        return rectangular_tiles(coords, grid, mode=mode, k=k, seed=seed)
    if scheme == "clustered-groups":
        source = params.get("source", "coords")
        matrix = need(d.coords, "coordinate") if source == "coords" else d.features
        return clustered_groups(matrix, k, seed)
    if scheme == "loo-buffer":
        return loo_buffer(need(d.coords, "coordinate"), buffer)
    if scheme == "leave-one-disc-out":
        coords = need(d.coords, "coordinate")
        return leave_one_disc_out(coords, k, float(params.get("disc_radius", 1.0)),
                                  buffer, seed)
    if scheme == "geo-units":
        units = need(d.unit_id, "unit")
        return geo_units(units, mode=params.get("mode", "one_unit_per_fold"), k=k, seed=seed)
    season = d.season
    if season is None and d.time is not None and "n_seasons" in params:
        season = derive_season(d.time, int(params["n_seasons"]))
    if scheme == "timeseries-cv":
        return timeseries_cv(need(season, "season"), gap=gap)
    if scheme == "out-of-sample":
        return out_of_sample(need(season, "season"),
                             test_seasons=int(params.get("test_seasons", 1)), gap=gap)
    raise SplitError(f"unknown scheme {scheme!r}")


def _scheme_params(args) -> dict:
    names = ("k", "repeats", "gap", "buffer", "rows", "cols", "mode", "source",
             "disc_radius", "test_seasons", "n_seasons", "normal_x", "normal_y", "offset")
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def _add_scheme_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--gap", type=int)
    p.add_argument("--buffer", type=float)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--mode")
    p.add_argument("--source", choices=("coords", "features"))
    p.add_argument("--disc-radius", dest="disc_radius", type=float)
    p.add_argument("--test-seasons", dest="test_seasons", type=int)
    p.add_argument("--n-seasons", dest="n_seasons", type=int)
    p.add_argument("--normal-x", dest="normal_x", type=float)
    p.add_argument("--normal-y", dest="normal_y", type=float)
    p.add_argument("--offset", type=float)


def _cmd_simulate(args) -> int:
    with open(args.config) as fh:
        payload = json.load(fh)
    seed = args.seed if args.seed is not None else payload.pop("seed", 0)
    payload["seed"] = int(seed)
    if args.study == "clustered":
        d = gen_clustered(ClusteredConfig(**payload))
    elif args.study == "nsrs":
        d, _ = gen_nsrs_population(NsrsConfig(**payload))
    elif args.study == "drift":
        d, _ = gen_drift(DriftConfig(**payload))
    elif args.study == "hierarchical":
        cfg = HierConfig(**payload)
        tree = generate_tree(cfg)
        d = gen_hier_data(tree, cfg)
        if args.tree_out:
            write_tree(tree, args.tree_out)
    else:
        raise ExperimentError(f"unknown study {args.study!r}")
    write_dataset(d, args.out)
    return 0


def _cmd_split(args) -> int:
    d, _ = load_cli_dataset(args.data, args.schema)
    plan = build_plan(args.scheme, d, _scheme_params(args), args.seed or 0)
    write_plan(plan, args.out)
    print(f"wrote {len(plan)} splits to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    if args.design:
        if args.population_size is None:
            raise ExperimentError("--design requires --population-size")
        with open(args.data) as fh:
            header = next(csv.reader(fh))
        if args.design not in header:
            raise ExperimentError(f"design column {args.design!r} not in {args.data}")
        if args.schema:
            with open(args.schema) as fh:
                schema = json.load(fh)
        else:
            schema = default_schema([c for c in header if c != args.design])
        schema[args.design] = "pi"
        d = load_dataset(args.data, schema, tree=read_tree(args.tree) if args.tree else None,
                         population_size=args.population_size)
        design = SamplingDesign(pi=d.inclusion_prob, N=args.population_size)
    else:
        d, design = load_cli_dataset(args.data, args.schema, args.tree, args.population_size)
    if args.plan:
        plan = read_plan(args.plan)
        if plan.max_index() >= d.n:
            raise ExperimentError(
                f"plan indexes {plan.max_index() + 1} rows but data has {d.n}")
    else:
        if not args.scheme:
            raise ExperimentError("pass --plan FILE or --scheme NAME")
        plan = build_plan(args.scheme, d, _scheme_params(args), args.seed or 0)
    learner = LearnerSpec(args.learner, forest=ForestParams(n_trees=args.n_trees))
    metric = MetricSpec(args.metric,
                        weighting=args.weighting if design is not None else None)
    result = estimate_ge(d, plan, learner, metric, design=design, seed=args.seed or 0)
    print(f"{metric.key}={result.value!r} splits={result.metadata['n_splits']} "
          f"scheme={plan.scheme}")
    return 0


def _cmd_study(args) -> int:
    spec = load_spec(args.config)
    if args.seed is not None:
        from dataclasses import replace
        spec = replace(spec, seed=args.seed)
    result = run_study(spec, workers=args.workers)
    result.write_csv(args.out)
    print(f"wrote {len(result.rows)} rows to {args.out}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="errest",
                                     description="Generalization-error estimation for non-i.i.d. data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a dataset from a study generator")
    p.add_argument("study", choices=("clustered", "nsrs", "drift", "hierarchical"))
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tree-out", dest="tree_out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("split", help="write a resampling plan for a dataset")
    p.add_argument("--scheme", required=True, choices=SCHEMES)
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    _add_scheme_flags(p)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("evaluate", help="estimate the GE of a learner on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--tree")
    p.add_argument("--plan")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--learner", required=True, choices=("ols", "forest", "topdown"))
    p.add_argument("--metric", required=True)
    p.add_argument("--design", help="column carrying inclusion probabilities")
    p.add_argument("--population-size", dest="population_size", type=int)
    p.add_argument("--weighting", choices=("ht", "hajek"), default="ht")
    p.add_argument("--n-trees", dest="n_trees", type=int, default=100)
    p.add_argument("--seed", type=int)
    _add_scheme_flags(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("study", help="run a replicated simulation study from JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_study)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, SplitError, ExperimentError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
