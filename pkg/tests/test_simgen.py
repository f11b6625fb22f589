import numpy as np
import pytest

from errest.metrics import SamplingDesign
from errest.simgen import (ClusteredConfig, DriftConfig, DriftModel, HierConfig, NsrsConfig,
                           SimError, build_hier_model, draw_pps_sample, gen_clustered,
                           gen_drift, gen_hier_data, gen_nsrs_population, generate_tree,
                           nsrs_fresh)


# ---------------------------------------------------------------------------
# clustered generator

def test_clustered_noise_free_reduction():
    cfg = ClusteredConfig(M=5, n_m=4, sigma2=0.0, sigma2_1=0.0, sigma2_2=0.0, seed=1)
    d = gen_clustered(cfg)
    expected = d.features[:, 0] + d.features[:, 1] - d.features[:, 2]
    assert np.allclose(d.label, expected, atol=1e-12)


def test_clustered_constant_feature_modes():
    for mode, col in (("x1_cluster_constant", 0), ("x2_cluster_constant", 1)):
        d = gen_clustered(ClusteredConfig(M=6, n_m=5, feature_mode=mode, seed=2))
        for m in range(6):
            vals = d.features[d.cluster_id == m, col]
            assert np.all(vals == vals[0])
        other = d.features[:, 1 - col]
        assert len(np.unique(other)) == d.n


def test_clustered_intercept_variance_moment():
    cfg = ClusteredConfig(M=1000, n_m=2, sigma2=0.0, sigma2_1=1.0, sigma2_2=0.0, seed=3)
    d = gen_clustered(cfg)
    resid = d.label - d.features @ np.array([1.0, 1.0, -1.0, 0.0, 0.0])
    cluster_means = np.array([resid[d.cluster_id == m].mean() for m in range(1000)])
    # cluster means equal the random intercepts exactly; Var of a chi^2-based
    # variance estimate over 1000 draws has sd ~ sqrt(2/1000)
    assert cluster_means.var(ddof=1) == pytest.approx(1.0, abs=4 * np.sqrt(2 / 1000))


def test_clustered_deterministic():
    cfg = ClusteredConfig(M=4, n_m=3, seed=9)
    assert np.array_equal(gen_clustered(cfg).label, gen_clustered(cfg).label)


def test_clustered_config_validation():
    with pytest.raises(SimError):
        ClusteredConfig(M=1, n_m=3)
    with pytest.raises(SimError):
        ClusteredConfig(M=3, n_m=3, sigma2=-1.0)
    with pytest.raises(SimError):
        ClusteredConfig(M=3, n_m=3, feature_mode="bogus")


# ---------------------------------------------------------------------------
# unequal sampling probabilities

def test_nsrs_population_properties():
    cfg = NsrsConfig(N=10_000, seed=4)
    pop, design = gen_nsrs_population(cfg)
    assert pop.n == 10_000 and cfg.n == 100
    assert design.pi.sum() == pytest.approx(100.0, abs=1e-9)
    assert np.all(design.pi > 0.0) and np.all(design.pi < 1.0)
    # label mean: intercept 5 plus two unit-mean effect features
    assert pop.label.mean() == pytest.approx(7.0, abs=0.25)


def test_nsrs_size_variable_tracks_label():
    pop, design = gen_nsrs_population(NsrsConfig(N=10_000, seed=5))
    u = design.pi * pop.label.size  # pi is proportional to u
    assert np.corrcoef(u, pop.label)[0, 1] > 0.9


def test_nsrs_misspecified_drops_second_effect_feature():
    full, _ = gen_nsrs_population(NsrsConfig(N=200, seed=6))
    mis, _ = gen_nsrs_population(NsrsConfig(N=200, seed=6, misspecified=True))
    assert full.p == 5 and mis.p == 4
    assert np.array_equal(mis.label, full.label)
    assert np.array_equal(mis.features[:, 0], full.features[:, 0])
    assert np.array_equal(mis.features[:, 1:], full.features[:, 2:])


def test_nsrs_truncates_large_inclusion_probabilities():
    pop, design = gen_nsrs_population(NsrsConfig(N=200, n=199, seed=7))
    assert np.all(design.pi < 1.0)
    assert design.pi.sum() == pytest.approx(199.0, rel=1e-9)


def test_nsrs_fresh_matches_population_distribution():
    cfg = NsrsConfig(N=1000, seed=8)
    test = nsrs_fresh(cfg, 50_000, seed=9)
    assert test.n == 50_000 and test.p == 5
    assert test.label.mean() == pytest.approx(7.0, abs=0.15)


def test_pps_sample_size_exact():
    _, design = gen_nsrs_population(NsrsConfig(N=2000, seed=10))
    for s in range(5):
        idx = draw_pps_sample(design, seed=s)
        assert len(idx) == 20
        assert len(np.unique(idx)) == 20


def test_pps_inclusion_frequencies_match_pi():
    pi = np.array([0.8, 0.8, 0.2, 0.2])
    design = SamplingDesign(pi=pi, N=4)
    reps = 10_000
    counts = np.zeros(4)
    for s in range(reps):
        counts[draw_pps_sample(design, seed=s)] += 1
    freq = counts / reps
    se = np.sqrt(pi * (1 - pi) / reps)
    assert np.all(np.abs(freq - pi) <= 3 * se)


def test_pps_equal_probabilities_uniform():
    N, n = 20, 4
    design = SamplingDesign(pi=np.full(N, n / N), N=N)
    reps = 10_000
    counts = np.zeros(N)
    for s in range(reps):
        counts[draw_pps_sample(design, seed=s)] += 1
    freq = counts / reps
    se = np.sqrt((n / N) * (1 - n / N) / reps)
    assert np.all(np.abs(freq - n / N) <= 3.5 * se)


def test_pps_validates_pi_sum():
    with pytest.raises(SimError, match="sum"):
        draw_pps_sample(SamplingDesign(pi=np.array([0.3, 0.3]), N=10), seed=0)


# ---------------------------------------------------------------------------
# concept drift

def test_drift_stationary_when_slopes_zero():
    d, _ = gen_drift(DriftConfig(n_train=40_000, seed=11))
    means = np.array([d.label[d.season == s].mean() for s in range(1, 9)])
    assert means.max() - means.min() < 0.3


def test_drift_label_slope_moment():
    cfg = DriftConfig(n_train=100, label_drift="strong", seed=12)
    model = DriftModel(cfg)
    for t_star in (0.0, 0.5, 1.0):
        sample = model.sample_at(t_star, 50_000, seed=13)
        assert sample.label.mean() == pytest.approx(2.0 * t_star, abs=0.08)


def test_drift_feature_slope_moment():
    cfg = DriftConfig(n_train=100, feature_drift="medium", seed=14)
    model = DriftModel(cfg)
    sample = model.sample_at(0.8, 50_000, seed=15)
    for col in range(3):
        assert sample.features[:, col].mean() == pytest.approx(0.8, abs=0.03)
        assert sample.features[:, col].var() == pytest.approx(1.0, abs=0.05)
    for col in (3, 4):
        assert sample.features[:, col].mean() == pytest.approx(0.0, abs=0.03)


def test_drift_training_window_and_seasons():
    d, _ = gen_drift(DriftConfig(n_train=2000, seed=16))
    assert d.time.max() < 0.8
    assert sorted(set(d.season.tolist())) == list(range(1, 9))


def test_drift_validation():
    with pytest.raises(SimError):
        DriftConfig(n_train=10, label_drift="huge")
    with pytest.raises(SimError):
        DriftConfig(n_train=10, variance_slope=-1.5)
    with pytest.raises(SimError):
        DriftModel(DriftConfig(n_train=10)).sample_at(1.5, 10, seed=0)


# ---------------------------------------------------------------------------
# hierarchical outcomes

def internal_count(tree):
    # the synthetic root counts as an internal node in the size contract
    return len(tree.internal_nodes) + 1


def test_generate_tree_default_counts():
    tree = generate_tree(HierConfig(seed=17))
    assert len(tree.leaves) == 50
    assert internal_count(tree) == 39
    arities = [len(tree.children[n]) for n in [None] + tree.internal_nodes]
    assert set(arities) <= {2, 3}


def test_generate_tree_smallest_instance():
    tree = generate_tree(HierConfig(n_leaves=2, internal_nodes=1, seed=0))
    assert tree.leaves == ["1", "2"]
    assert tree.internal_nodes == []


def test_generate_tree_handshake(rng):
    for _ in range(15):
        internal = int(rng.integers(1, 40))
        leaves = int(rng.integers(internal + 1, 2 * internal + 2))
        tree = generate_tree(HierConfig(n_leaves=leaves, internal_nodes=internal,
                                        seed=int(rng.integers(1 << 30))))
        total = len(tree.leaves) + internal_count(tree)
        assert len(tree.leaves) == leaves
        assert internal_count(tree) == internal
        arity_sum = sum(len(tree.children[n]) for n in [None] + tree.internal_nodes)
        assert arity_sum == total - 1


def test_generate_tree_infeasible():
    with pytest.raises(SimError, match="no tree"):
        HierConfig(n_leaves=10, internal_nodes=2)


def test_generate_tree_deterministic():
    a = generate_tree(HierConfig(seed=18))
    b = generate_tree(HierConfig(seed=18))
    assert a.leaves == b.leaves


def test_hier_data_labels_are_leaves():
    cfg = HierConfig(n_leaves=10, internal_nodes=7, n_train=300, seed=19)
    tree = generate_tree(cfg)
    d = gen_hier_data(tree, cfg)
    assert d.n == 300
    leaf_set = set(tree.leaves)
    assert all(v in leaf_set for v in d.label)


def test_hier_top_level_proportions_match_softmax(rng):
    cfg = HierConfig(n_leaves=6, internal_nodes=5, n_train=40_000, effect_scale=2.0, seed=20)
    tree = generate_tree(cfg)
    model = build_hier_model(tree, cfg)
    d = model.draw(cfg.n_train, seed=21)
    top = np.array([v.split(".")[0] for v in d.label])
    top_nodes = tree.children[None]
    observed = np.array([(top == b).mean() for b in top_nodes])
    # oracle: average the allocation softmax over the same feature draws
    expected = model.allocation_probs(d.features, None).mean(axis=0)
    se = np.sqrt(expected * (1 - expected) / cfg.n_train)
    assert np.all(np.abs(observed - expected) <= 4 * se + 1e-6)


def test_hier_tiny_decay_gives_uniform_deep_allocations(rng):
    cfg = HierConfig(n_leaves=8, internal_nodes=7, effect_decay=1e-9, effect_scale=3.0, seed=22)
    tree = generate_tree(cfg)
    model = build_hier_model(tree, cfg)
    deep = [n for n in tree.internal_nodes if len(tree.children[n]) >= 2]
    assert deep
    X = rng.standard_normal((200, cfg.p))
    for node in deep:
        probs = model.allocation_probs(X, node)
        assert np.all(np.abs(probs - 1.0 / probs.shape[1]) < 1e-6)


def test_hier_draws_deterministic_and_replicable():
    cfg = HierConfig(n_leaves=10, internal_nodes=7, n_train=100, seed=23)
    tree = generate_tree(cfg)
    a = gen_hier_data(tree, cfg, data_seed=1)
    b = gen_hier_data(tree, cfg, data_seed=1)
    c = gen_hier_data(tree, cfg, data_seed=2)
    assert np.array_equal(a.label, b.label)
    assert not np.array_equal(a.label, c.label)
