import numpy as np
import pytest

from errest.splitters import (HalfPlane, Polygon, SplitError, clustered_groups, geo_units,
                              grouped_kfold, kfold, leave_one_disc_out, loo_buffer,
                              out_of_sample, read_plan, rectangular_tiles,
                              repeated_grouped_kfold, repeated_kfold,
                              repeated_stratified_kfold, single_spatial_split,
                              stratified_kfold, timeseries_cv, write_plan)


def assert_partition(plan, n):
    """Test folds are pairwise disjoint and together cover 0..n-1."""
    seen = []
    for train, test in plan:
        assert set(train).isdisjoint(test)
        assert set(train) | set(test) == set(range(n))
        seen.extend(test)
    assert sorted(seen) == list(range(n))


# ---------------------------------------------------------------------------
# k-fold family

def test_kfold_forced_sizes():
    plan = kfold(10, 5, seed=1)
    assert len(plan) == 5
    assert all(len(test) == 2 for _, test in plan)
    assert_partition(plan, 10)


def test_kfold_balanced_remainder():
    sizes = sorted(len(test) for _, test in kfold(7, 3, seed=2))
    assert sizes == [2, 2, 3]


def test_kfold_deterministic():
    assert kfold(20, 4, seed=9).splits == kfold(20, 4, seed=9).splits
    assert kfold(20, 4, seed=9).splits != kfold(20, 4, seed=10).splits


def test_kfold_validates():
    with pytest.raises(SplitError):
        kfold(3, 5, seed=0)
    with pytest.raises(SplitError):
        kfold(5, 1, seed=0)


def test_repeated_kfold_fifty_splits():
    plan = repeated_kfold(100, 5, repeats=10, seed=0)
    assert len(plan) == 50
    for r in range(10):
        chunk = plan.splits[r * 5:(r + 1) * 5]
        seen = sorted(i for _, test in chunk for i in test)
        assert seen == list(range(100))


def test_repeated_kfold_base_case():
    assert repeated_kfold(12, 3, repeats=1, seed=4).splits == kfold(12, 3, seed=4).splits


def test_grouped_kfold_one_group_per_fold():
    groups = np.array(["A", "A", "B", "B", "C", "C"])
    plan = grouped_kfold(groups, 3, seed=5)
    assert len(plan) == 3
    assert_partition(plan, 6)
    for _, test in plan:
        assert len(test) == 2
        assert len(set(groups[list(test)])) == 1


def test_grouped_kfold_no_group_spans_train_and_test():
    groups = np.array(["A", "A", "B", "B", "C", "C"])
    for train, test in grouped_kfold(groups, 3, seed=5):
        assert set(groups[list(train)]).isdisjoint(groups[list(test)])


def test_grouped_kfold_two_whole_groups_per_fold(rng):
    groups = np.repeat(np.arange(10), 3)
    plan = grouped_kfold(groups, 5, seed=6)
    # seeded oracle: deal the shuffled distinct ids round-robin
    ids = np.unique(groups)
    perm = np.random.default_rng(np.random.SeedSequence(6)).permutation(len(ids))
    for j, (_, test) in enumerate(plan):
        expected_ids = set(ids[perm][j::5])
        assert set(groups[list(test)]) == expected_ids
        assert len(test) == 6


def test_grouped_kfold_requires_enough_groups():
    with pytest.raises(SplitError, match="groups"):
        grouped_kfold(np.array([1, 1, 2, 2]), 3, seed=0)


def test_stratified_kfold_forced_proportions():
    labels = np.array(["a"] * 4 + ["b"] * 2)
    plan = stratified_kfold(labels, 2, seed=3)
    assert_partition(plan, 6)
    for _, test in plan:
        got = list(labels[list(test)])
        assert got.count("a") == 2 and got.count("b") == 1


def test_stratified_kfold_singleton_class_in_one_fold():
    labels = np.array(["big"] * 20 + ["rare"])
    plan = stratified_kfold(labels, 5, seed=11)
    rare_tests = [j for j, (_, test) in enumerate(plan) if 20 in test]
    assert len(rare_tests) == 1


def test_stratified_kfold_remainder():
    labels = np.array(["a", "a", "a", "b", "b", "b", "b"])
    plan = stratified_kfold(labels, 2, seed=1)
    counts = sorted(list(labels[list(test)]).count("a") for _, test in plan)
    assert counts == [1, 2]


def test_repeated_stratified_base_case():
    labels = np.array([0, 0, 1, 1, 1, 0])
    assert (repeated_stratified_kfold(labels, 2, 1, seed=8).splits
            == stratified_kfold(labels, 2, seed=8).splits)


# ---------------------------------------------------------------------------
# spatial splitters

LINE4 = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])


def test_single_split_clean_boundary():
    plan = single_spatial_split(LINE4, HalfPlane((1.0, 0.0), 1.5), buffer_width=0.0)
    (train, test), = plan.splits
    assert set(train) == {0, 1} and set(test) == {2, 3}


def test_single_split_buffer_drops_near_train_points():
    # distances to the line x=1.5 are 1.5, 0.5, 0.5, 1.5; buffer acts on train only
    plan = single_spatial_split(LINE4, HalfPlane((1.0, 0.0), 1.5), buffer_width=0.6)
    (train, test), = plan.splits
    assert set(train) == {0} and set(test) == {2, 3}


def test_single_split_all_buffered_is_error():
    with pytest.raises(SplitError, match="empty"):
        single_spatial_split(LINE4, HalfPlane((1.0, 0.0), 1.5), buffer_width=2.0)


def test_single_split_polygon_boundary():
    pts = np.array([[0.5, 0.5], [0.1, 0.1], [3.0, 3.0], [0.45, 0.5]])
    square = Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))
    plan = single_spatial_split(pts, square, buffer_width=0.5)
    (train, test), = plan.splits
    assert set(test) == {0, 1, 3}
    assert set(train) == {2}


def test_rectangular_tiles_one_point_each():
    pts = np.array([[0.1, 0.1], [0.9, 0.1], [0.1, 0.9], [0.9, 0.9]])
    plan = rectangular_tiles(pts, (2, 2))
    assert len(plan) == 4
    assert_partition(plan, 4)
    assert all(len(test) == 1 for _, test in plan)


def test_rectangular_tiles_blocks_to_k_folds():
    pts = np.array([[0.1, 0.1], [0.9, 0.1], [0.1, 0.9], [0.9, 0.9]])
    plan = rectangular_tiles(pts, (2, 2), mode="blocks_to_k_folds", k=2, seed=3)
    assert len(plan) == 2
    assert_partition(plan, 4)
    assert all(len(test) == 2 for _, test in plan)


def test_rectangular_tiles_boundary_tie_goes_high():
    # bounding box [0, 2] x [0, 2], 2x2 grid: the center point sits on both
    # interior lines and must land in the higher-index tile with (2, 2)
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0], [1.0, 1.0]])
    plan = rectangular_tiles(pts, (2, 2))
    fold_with_center = [set(test) for _, test in plan if 4 in test]
    assert fold_with_center == [{3, 4}]


def test_clustered_groups_recovers_separated_clouds(rng):
    a = rng.normal(0.0, 0.3, (20, 2))
    b = rng.normal(10.0, 0.3, (25, 2))
    coords = np.vstack([a, b])
    plan = clustered_groups(coords, 2, seed=1)
    assert_partition(plan, 45)
    tests = sorted((sorted(test) for _, test in plan), key=len)
    assert tests == [list(range(20)), list(range(20, 45))]


def test_clustered_groups_singletons():
    pts = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]])
    plan = clustered_groups(pts, 4, seed=2)
    assert sorted(len(test) for _, test in plan) == [1, 1, 1, 1]


def test_clustered_groups_deterministic(rng):
    coords = rng.standard_normal((30, 2))
    assert clustered_groups(coords, 3, seed=7).splits == clustered_groups(coords, 3, seed=7).splits


def test_loo_buffer_radius_excludes_near_points():
    plan = loo_buffer(LINE4, buffer_radius=1.5)
    train0, test0 = plan.splits[0]
    assert set(test0) == {0}
    # distances from point 0 are 1, 2, 3; only the latter two exceed 1.5
    assert set(train0) == {2, 3}


def test_loo_buffer_zero_radius_is_loo():
    plan = loo_buffer(LINE4, buffer_radius=0.0)
    assert len(plan) == 4
    for i, (train, test) in enumerate(plan):
        assert set(test) == {i}
        assert set(train) == set(range(4)) - {i}


def test_loo_buffer_radius_beyond_diameter_errors():
    with pytest.raises(SplitError, match="no training data"):
        loo_buffer(LINE4, buffer_radius=3.0)


def test_disc_zero_buffer_partitions(rng):
    coords = rng.random((60, 2))
    plan = leave_one_disc_out(coords, k=5, disc_radius=0.25, buffer_radius=0.0, seed=4)
    assert len(plan) == 5
    for train, test in plan:
        assert set(train) | set(test) == set(range(60))


def test_disc_buffer_distance_property(rng):
    coords = rng.random((80, 2))
    plan = leave_one_disc_out(coords, k=4, disc_radius=0.2, buffer_radius=0.15, seed=9)
    centers = plan.params["centers"]
    for (train, test), center in zip(plan, centers):
        dist = np.sqrt(((coords - np.asarray(center)) ** 2).sum(axis=1))
        assert np.all(dist[list(test)] <= 0.2)
        assert np.all(dist[list(train)] > 0.35)


def test_disc_test_size_matches_area_fraction(rng):
    # oracle: P(uniform point within r of a uniform center) estimated from
    # independent pairs, which accounts for discs clipped by the box edge
    n, r = 2500, 0.1
    coords = rng.random((n, 2))
    pairs = 400_000
    pts = rng.random((pairs, 2))
    centers = rng.random((pairs, 2))
    p_hat = float((((pts - centers) ** 2).sum(axis=1) <= r * r).mean())

    k = 150
    plan = leave_one_disc_out(coords, k=k, disc_radius=r, buffer_radius=0.0, seed=13)
    sizes = np.array([len(test) for _, test in plan])
    expected = n * p_hat
    # discs with no point are redrawn, so condition the oracle the same way
    expected_given_nonempty = expected / (1.0 - (1.0 - p_hat) ** n)
    se = sizes.std(ddof=1) / np.sqrt(k)
    assert abs(sizes.mean() - expected_given_nonempty) < 3.0 * se + 3.0 * expected * (pairs ** -0.5)


def test_geo_units_one_unit_per_fold():
    units = np.repeat(np.arange(7), 4)
    plan = geo_units(units, mode="one_unit_per_fold")
    assert len(plan) == 7
    assert_partition(plan, 28)
    for _, test in plan:
        assert len(set(units[list(test)])) == 1


def test_geo_units_to_k_folds():
    units = np.repeat(np.arange(4), 2)
    plan = geo_units(units, mode="units_to_k_folds", k=2, seed=3)
    assert len(plan) == 2
    assert all(len(set(units[list(test)])) == 2 for _, test in plan)


def test_geo_units_single_unit_errors():
    with pytest.raises(SplitError):
        geo_units(np.zeros(5, dtype=int), mode="one_unit_per_fold")


# ---------------------------------------------------------------------------
# temporal splitters

def seasons(counts):
    return np.repeat(np.arange(1, len(counts) + 1), counts)


def test_timeseries_cv_unrolls_prequentially():
    s = seasons([2] * 8)
    plan = timeseries_cv(s, gap=0)
    assert len(plan) == 7
    for j, (train, test) in enumerate(plan, start=1):
        assert set(s[list(train)]) == set(range(1, j + 1))
        assert set(s[list(test)]) == {j + 1}
    last_train, last_test = plan.splits[-1]
    assert set(s[list(last_train)]) == set(range(1, 8))
    assert set(s[list(last_test)]) == {8}


def test_timeseries_cv_with_gap():
    s = seasons([2] * 8)
    plan = timeseries_cv(s, gap=1)
    assert len(plan) == 6
    last_train, last_test = plan.splits[-1]
    assert set(s[list(last_train)]) == set(range(1, 7))
    assert set(s[list(last_test)]) == {8}


def test_timeseries_cv_two_seasons_is_single_split():
    plan = timeseries_cv(seasons([3, 3]), gap=0)
    assert len(plan) == 1


def test_timeseries_cv_too_few_seasons():
    with pytest.raises(SplitError):
        timeseries_cv(seasons([3, 3]), gap=1)


def test_out_of_sample_no_gap():
    s = seasons([2] * 8)
    plan = out_of_sample(s, test_seasons=1, gap=0)
    (train, test), = plan.splits
    assert set(s[list(train)]) == set(range(1, 8))
    assert set(s[list(test)]) == {8}


def test_out_of_sample_with_gap():
    s = seasons([2] * 8)
    (train, test), = out_of_sample(s, test_seasons=1, gap=1).splits
    assert set(s[list(train)]) == set(range(1, 7))
    assert set(s[list(test)]) == {8}


def test_out_of_sample_no_train_left():
    with pytest.raises(SplitError, match="no training seasons"):
        out_of_sample(seasons([2, 2, 2]), test_seasons=2, gap=1)


# ---------------------------------------------------------------------------
# row-order independence and serialization

def mapped_split_set(plan, perm):
    """Map a plan built on permuted rows back to original row ids."""
    return {(frozenset(perm[list(train)]), frozenset(perm[list(test)])) for train, test in plan}


def split_set(plan):
    return {(frozenset(train), frozenset(test)) for train, test in plan}


def test_row_order_independence(rng):
    n = 40
    coords = rng.random((n, 2)) * 10
    groups = rng.integers(0, 6, n)
    units = rng.integers(0, 5, n)
    perm = rng.permutation(n)
    cases = [
        (lambda c, g, u: grouped_kfold(g, 3, seed=5), "grouped"),
        (lambda c, g, u: geo_units(u, "one_unit_per_fold"), "geo"),
        (lambda c, g, u: single_spatial_split(c, HalfPlane((1.0, 0.3), 5.0), 0.5), "single"),
        (lambda c, g, u: rectangular_tiles(c, (3, 3)), "tiles"),
        (lambda c, g, u: clustered_groups(c, 4, seed=2), "kmeans"),
        (lambda c, g, u: loo_buffer(c, 1.0), "loo"),
        (lambda c, g, u: leave_one_disc_out(c, 3, 2.0, 0.5, seed=8), "disc"),
    ]
    for build, name in cases:
        base = build(coords, groups, units)
        permuted = build(coords[perm], groups[perm], units[perm])
        assert mapped_split_set(permuted, perm) == split_set(base), name


def test_plan_roundtrip(tmp_path):
    plan = repeated_kfold(12, 3, 2, seed=77)
    path = tmp_path / "plan.txt"
    write_plan(plan, path)
    back = read_plan(path)
    assert back.splits == plan.splits
    assert back.scheme == plan.scheme
    assert back.seed == plan.seed


def test_plan_file_deterministic_bytes(tmp_path):
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    write_plan(grouped_kfold(np.repeat(np.arange(6), 2), 3, seed=5), p1)
    write_plan(grouped_kfold(np.repeat(np.arange(6), 2), 3, seed=5), p2)
    assert p1.read_bytes() == p2.read_bytes()
