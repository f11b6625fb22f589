"""Generalization-error estimation for non-i.i.d. data.

Resampling plans tailored to clustered, spatial, unequal-probability,
drifting and hierarchically labeled data; design-weighted loss estimation;
hierarchical classification metrics; built-in learners; and replicated
simulation studies with a CLI.
"""

from .data import Dataset, DatasetError, derive_season, load_dataset, subset, write_dataset
from .experiments import (ExperimentError, ExperimentResult, LearnerSpec, MetricSpec,
                          approximate_true_ge, estimate_ge, evaluate_plan, read_result_csv)
from .hierarchy import (CategoryTree, TreeError, augment, parse_tree, path_edges,
                        read_tree, write_tree)
from .kmeans import KMeansError, KMeansResult, kmeans
from .learners import (FitError, Forest, ForestParams, LinearModel, RankDeficiencyError,
                       TopDownClassifier, fit_forest, fit_ols, fit_topdown, load_model,
                       save_model)
from .metrics import (MetricError, MetricResult, SamplingDesign, accuracy, aggregate_plan,
                      flat_prf, hajek_loss, hier_prf, h_loss, ht_loss, mse,
                      shortest_path_loss, sym_diff_loss, win_score)
from .simgen import (ClusteredConfig, DriftConfig, DriftModel, HierConfig, NsrsConfig,
                     SimError, build_hier_model, draw_pps_sample, gen_clustered, gen_drift,
                     gen_hier_data, gen_nsrs_population, generate_tree, nsrs_fresh)
from .splitters import (HalfPlane, Polygon, ResamplingPlan, SplitError, clustered_groups,
                        geo_units, grouped_kfold, kfold, leave_one_disc_out, loo_buffer,
                        out_of_sample, read_plan, rectangular_tiles, repeated_grouped_kfold,
                        repeated_kfold, repeated_stratified_kfold, single_spatial_split,
                        stratified_kfold, timeseries_cv, write_plan)
from .studies import (ClusteredStudy, CustomStudy, DriftStudy, ExperimentSpec, HierStudy,
                      NsrsStudy, load_spec, run_study, spec_from_config)

__version__ = "0.1.0"
