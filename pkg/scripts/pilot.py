"""Reduced-replicate pilots of the four studies to check effect directions
and runtimes before pinning the acceptance configurations."""

import sys
import time

import numpy as np

sys.path.insert(0, "src")

from errest.simgen import ClusteredConfig, DriftConfig, HierConfig
from errest.studies import (ClusteredStudy, DriftStudy, ExperimentSpec, HierStudy,
                            NsrsStudy, run_study)


def paired_z(a, b):
    """z statistic of mean(a - b) over replicates."""
    diff = a - b
    return diff.mean() / (diff.std(ddof=1) / np.sqrt(len(diff)))


def pilot_clustered(reps=20, workers=2):
    t0 = time.time()
    spec = ExperimentSpec("clustered", ClusteredStudy(
        settings=(ClusteredConfig(M=10, n_m=10, sigma2=0.25, sigma2_1=1.0, sigma2_2=1.0,
                                  feature_mode="x1_cluster_constant"),
                  ClusteredConfig(M=50, n_m=10, sigma2=0.25, sigma2_1=1.0, sigma2_2=1.0,
                                  feature_mode="all_iid")),
        learners=("forest",), n_trees=100), replicates=reps, seed=101)
    res = run_study(spec, workers=workers)
    s_a = [s for s in res.settings() if "x1_cluster" in s][0]
    s_b = [s for s in res.settings() if "all_iid" in s][0]
    std_a = res.estimates(s_a, "cv_standard")
    grp_a = res.estimates(s_a, "cv_grouped")
    std_b = res.estimates(s_b, "cv_standard")
    grp_b = res.estimates(s_b, "cv_grouped")
    print(f"[clustered] {time.time()-t0:.1f}s reps={reps}")
    print(f"  A: std={std_a.mean():.4f} grp={grp_a.mean():.4f} "
          f"z(grp-std)={paired_z(grp_a, std_a):.2f}")
    print(f"  B: std={std_b.mean():.4f} grp={grp_b.mean():.4f} "
          f"relgap={abs(grp_b.mean()-std_b.mean())/grp_b.mean():.4f}")


def pilot_nsrs(reps=15, workers=2):
    t0 = time.time()
    spec = ExperimentSpec("nsrs", NsrsStudy(N=10_000, n_trees=100, true_test_size=200_000),
                          replicates=reps, seed=202)
    res = run_study(spec, workers=workers)
    print(f"[nsrs] {time.time()-t0:.1f}s reps={reps}")
    for s in res.settings():
        true = res.true_values(s, "cv_plain", "pop")
        for method in ("cv_plain", "cv_ht", "cv_hajek"):
            est = res.estimates(s, method)
            rel = (est.mean() - true.mean()) / true.mean()
            print(f"  {s.split(':')[1]:35s} {method:9s} est={est.mean():8.3f} "
                  f"true={true.mean():8.3f} rel={rel:+.3f} z={paired_z(est, true):+6.2f}")


def pilot_drift(reps=15, workers=2):
    t0 = time.time()
    settings = (DriftConfig(n_train=500, label_drift="strong"),
                DriftConfig(n_train=500),
                DriftConfig(n_train=500, feature_drift="strong"))
    spec = ExperimentSpec("drift", DriftStudy(settings=settings, n_trees=50,
                                              true_test_size=50_000),
                          replicates=reps, seed=303)
    res = run_study(spec, workers=workers)
    print(f"[drift] {time.time()-t0:.1f}s reps={reps}")
    for s in res.settings():
        true = res.true_values(s, "cv", "Els")
        line = f"  {s.split(':')[1]:45s} true={true.mean():7.3f}"
        for method in ("cv", "tscv", "oos"):
            est = res.estimates(s, method)
            line += f" {method}={est.mean():7.3f}(z={paired_z(est, true):+5.1f})"
        print(line)


def pilot_hier(reps=8, workers=2):
    t0 = time.time()
    for n_train in (1000, 200):
        spec = ExperimentSpec("hierarchical",
                              HierStudy(base=HierConfig(n_train=n_train, seed=7),
                                        n_trees=50, true_test_size=20_000),
                              replicates=reps, seed=404)
        res = run_study(spec, workers=workers)
        print(f"[hier n={n_train}] {time.time()-t0:.1f}s reps={reps}")
        for metric in ("accuracy", "hier_f1_macro", "hier_recall_macro",
                       "hier_precision_macro"):
            s = f"hier:n={n_train}|metric={metric}"
            true = res.true_values(s, "cv_standard", "true")
            std = res.estimates(s, "cv_standard")
            strat = res.estimates(s, "cv_stratified")
            print(f"  {metric:22s} true={true.mean():.4f} "
                  f"bias_std={std.mean()-true.mean():+.4f}(z={paired_z(std, true):+5.1f}) "
                  f"bias_strat={strat.mean()-true.mean():+.4f}(z={paired_z(strat, true):+5.1f})")
        t0 = time.time()


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "all"
    if which in ("clustered", "all"):
        pilot_clustered()
    if which in ("nsrs", "all"):
        pilot_nsrs()
    if which in ("drift", "all"):
        pilot_drift()
    if which in ("hier", "all"):
        pilot_hier()
