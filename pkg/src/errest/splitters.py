"""Resampling-plan construction for every supported scheme.

Each splitter is a pure function of (metadata, parameters, seed) returning an
immutable ResamplingPlan: an ordered list of disjoint (train, test) index
sets plus provenance (scheme tag, parameters, seed). Coordinate- and
group-driven schemes are independent of row order up to index relabeling.

Distances are Euclidean in coordinate units; buffer widths use the same
units. Choosing a buffer width (e.g. from an empirical correlogram) is the
caller's responsibility.
"""

from dataclasses import dataclass, field

import numpy as np

from ._rng import rng_from, child_seed
from .kmeans import kmeans

KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 100
DISC_RETRIES = 100


class SplitError(ValueError):
    """Raised for invalid splitter parameters or degenerate splits."""


@dataclass(frozen=True)
class ResamplingPlan:
    """Ordered train/test splits with provenance metadata."""

    splits: tuple  # tuple of (train: tuple[int], test: tuple[int])
    scheme: str
    params: dict = field(compare=False)
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.splits)

    def __iter__(self):
        return iter(self.splits)

    def max_index(self) -> int:
        return max(max(tr + te) for tr, te in self.splits)


def _plan(splits, scheme, params, seed=None) -> ResamplingPlan:
    out = []
    for j, (train, test) in enumerate(splits):
        train = tuple(int(i) for i in train)
        test = tuple(int(i) for i in test)
        if not train or not test:
            raise SplitError(f"{scheme}: split {j} has an empty train or test set")
        if set(train) & set(test):
            raise SplitError(f"{scheme}: split {j} train and test overlap")
        out.append((train, test))
    if not out:
        raise SplitError(f"{scheme}: produced no splits")
    return ResamplingPlan(splits=tuple(out), scheme=scheme, params=dict(params), seed=seed)


def _deal_round_robin(items: np.ndarray, k: int) -> list[np.ndarray]:
    """Deal pre-shuffled items into k folds; sizes differ by at most one."""
    return [items[j::k] for j in range(k)]


def _complement(n: int, test: np.ndarray) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    return np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# k-fold family

def kfold(n: int, k: int, seed: int) -> ResamplingPlan:
    """Random k-fold partition of 0..n-1; fold sizes differ by at most one."""
    if k < 2:
        raise SplitError(f"k must be >= 2, got {k}")
    if k > n:
        raise SplitError(f"k={k} exceeds n={n}")
    perm = rng_from(seed).permutation(n)
    folds = _deal_round_robin(perm, k)
    splits = [(np.sort(_complement(n, f)), np.sort(f)) for f in folds]
    return _plan(splits, "kfold", {"n": n, "k": k}, seed)


def _repeat_seed(seed: int, r: int) -> int:
    # repeat 0 reuses the seed itself, so repeats=1 reduces to the base splitter
    return seed if r == 0 else child_seed(seed, r)


def repeated_kfold(n: int, k: int, repeats: int, seed: int) -> ResamplingPlan:
    """`repeats` independent k-fold partitions, concatenated."""
    if repeats < 1:
        raise SplitError(f"repeats must be >= 1, got {repeats}")
    splits = []
    for r in range(repeats):
        splits.extend(kfold(n, k, _repeat_seed(seed, r)).splits)
    return _plan(splits, "repeated_kfold", {"n": n, "k": k, "repeats": repeats}, seed)


def grouped_kfold(groups, k: int, seed: int) -> ResamplingPlan:
    """k-fold CV assigning whole groups to folds; no group spans train and test.

    With k equal to the number of distinct groups this is leave-one-group-out.
    """
    groups = np.asarray(groups)
    ids = np.unique(groups)
    if k < 2:
        raise SplitError(f"k must be >= 2, got {k}")
    if len(ids) < k:
        raise SplitError(f"only {len(ids)} groups for k={k} folds")
    perm = rng_from(seed).permutation(len(ids))
    splits = []
    n = len(groups)
    for fold_ids in _deal_round_robin(ids[perm], k):
        test = np.flatnonzero(np.isin(groups, fold_ids))
        splits.append((_complement(n, test), test))
    return _plan(splits, "grouped_kfold", {"n": n, "k": k}, seed)


def stratified_kfold(labels, k: int, seed: int) -> ResamplingPlan:
    """k-fold partition preserving per-class proportions.

    Classes with at least k members are spread so per-fold counts differ by
    at most one; a class with c < k members lands in c distinct folds chosen
    uniformly at random. Draws that leave a fold empty (possible only when
    every class is small) are rejected and redrawn a bounded number of times.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if k < 2:
        raise SplitError(f"k must be >= 2, got {k}")
    if n < k:
        raise SplitError(f"n={n} smaller than k={k}")
    classes = _sorted_unique(labels)
    for attempt in range(10):
        rng = rng_from(seed, attempt) if attempt else rng_from(seed)
        fold_of = np.empty(n, dtype=np.int64)
        for cls in classes:
            rows = np.flatnonzero(labels == cls)
            rows = rows[rng.permutation(len(rows))]
            c = len(rows)
            if c < k:
                fold_of[rows] = rng.choice(k, size=c, replace=False)
            else:
                offset = rng.integers(k)
                fold_of[rows] = (offset + np.arange(c)) % k
        counts = np.bincount(fold_of, minlength=k)
        if counts.min() > 0 and counts.max() < n:
            splits = []
            for j in range(k):
                test = np.flatnonzero(fold_of == j)
                splits.append((_complement(n, test), test))
            return _plan(splits, "stratified_kfold", {"n": n, "k": k}, seed)
    raise SplitError("stratified folds degenerated to an empty fold in all attempts")


def repeated_stratified_kfold(labels, k: int, repeats: int, seed: int) -> ResamplingPlan:
    if repeats < 1:
        raise SplitError(f"repeats must be >= 1, got {repeats}")
    splits = []
    for r in range(repeats):
        splits.extend(stratified_kfold(labels, k, _repeat_seed(seed, r)).splits)
    return _plan(splits, "repeated_stratified_kfold",
                 {"n": len(labels), "k": k, "repeats": repeats}, seed)


def repeated_grouped_kfold(groups, k: int, repeats: int, seed: int) -> ResamplingPlan:
    if repeats < 1:
        raise SplitError(f"repeats must be >= 1, got {repeats}")
    splits = []
    for r in range(repeats):
        splits.extend(grouped_kfold(groups, k, _repeat_seed(seed, r)).splits)
    return _plan(splits, "repeated_grouped_kfold",
                 {"n": len(groups), "k": k, "repeats": repeats}, seed)


def _sorted_unique(values: np.ndarray) -> list:
    # np.unique sorts, which keeps class iteration order independent of row order
    return list(np.unique(values))


# ---------------------------------------------------------------------------
# spatial schemes

def _as_coords(coords) -> np.ndarray:
    c = np.asarray(coords, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != 2:
        raise SplitError(f"coords must be an (n, 2) matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise SplitError("coords contain non-finite values")
    return c


@dataclass(frozen=True)
class HalfPlane:
    """Boundary line n . x = c; the side with n . x >= c is the test side."""
    normal: tuple[float, float]
    offset: float

    def signed_distance(self, coords: np.ndarray) -> np.ndarray:
        nvec = np.asarray(self.normal, dtype=np.float64)
        norm = float(np.hypot(*nvec))
        if norm == 0.0:
            raise SplitError("half-plane normal must be nonzero")
        return (coords @ nvec - self.offset) / norm


@dataclass(frozen=True)
class Polygon:
    """Closed polygon; its interior (edges included) is the test side."""
    vertices: tuple  # ((x, y), ...)

    def signed_distance(self, coords: np.ndarray) -> np.ndarray:
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.shape[0] < 3:
            raise SplitError("polygon needs at least 3 vertices")
        inside = _points_in_polygon(coords, v)
        dist = _dist_to_segments(coords, v)
        return np.where(inside, dist, -dist)


def _points_in_polygon(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    # even-odd ray casting; points on an edge are treated as inside via the
    # distance term (signed distance 0 lands on the test side)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    m = len(verts)
    for i in range(m):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % m]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < np.where(crosses, xint, np.inf))
    return inside


def _dist_to_segments(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    best = np.full(len(pts), np.inf)
    m = len(verts)
    for i in range(m):
        a = verts[i]
        b = verts[(i + 1) % m]
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            d2 = ((pts - a) ** 2).sum(axis=1)
        else:
            t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
            proj = a + t[:, None] * ab
            d2 = ((pts - proj) ** 2).sum(axis=1)
        best = np.minimum(best, d2)
    return np.sqrt(best)


def single_spatial_split(coords, boundary, buffer_width: float = 0.0) -> ResamplingPlan:
    """One split along a contiguous spatial boundary, with an optional buffer.

    Test = points on the designated side of the boundary (boundary points
    included). Train = points on the other side farther than `buffer_width`
    from the boundary; points inside the buffer belong to neither set.
    """
    coords = _as_coords(coords)
    if buffer_width < 0:
        raise SplitError("buffer_width must be >= 0")
    s = boundary.signed_distance(coords)
    test = np.flatnonzero(s >= 0.0)
    train = np.flatnonzero((s < 0.0) & (-s > buffer_width))
    if test.size == 0 or train.size == 0:
        raise SplitError("boundary/buffer leaves an empty train or test set")
    params = {"boundary": boundary, "buffer_width": buffer_width}
    return _plan([(train, test)], "single_spatial_split", params)


def _tile_index(coords: np.ndarray, rows: int, cols: int) -> np.ndarray:
    xmin, ymin = coords.min(axis=0)
    xmax, ymax = coords.max(axis=0)
    wx = (xmax - xmin) / cols if xmax > xmin else 1.0
    wy = (ymax - ymin) / rows if ymax > ymin else 1.0
    # points on interior tile boundaries fall in the higher-index tile
    cx = np.minimum(np.floor((coords[:, 0] - xmin) / wx).astype(np.int64), cols - 1)
    ry = np.minimum(np.floor((coords[:, 1] - ymin) / wy).astype(np.int64), rows - 1)
    return ry * cols + cx


def rectangular_tiles(coords, grid: tuple[int, int], mode: str = "one_block_per_fold",
                      k: int | None = None, seed: int | None = None) -> ResamplingPlan:
    """Blocked spatial CV on a rows x cols grid over the coordinate bounding box.

    mode "one_block_per_fold": one split per nonempty block (test = block).
    mode "blocks_to_k_folds": nonempty blocks are randomly dealt to k folds.
    """
    coords = _as_coords(coords)
    rows, cols = grid
    if rows < 1 or cols < 1:
        raise SplitError(f"grid dimensions must be positive, got {grid}")
    block = _tile_index(coords, rows, cols)
    blocks = np.unique(block)
    n = len(coords)
    params = {"grid": (rows, cols), "mode": mode, "k": k}
    if mode == "one_block_per_fold":
        if len(blocks) < 2:
            raise SplitError("all points fall in one block; no train data remains")
        splits = []
        for b in blocks:
            test = np.flatnonzero(block == b)
            splits.append((_complement(n, test), test))
        return _plan(splits, "rectangular_tiles", params)
    if mode == "blocks_to_k_folds":
        if k is None or seed is None:
            raise SplitError("blocks_to_k_folds requires k and seed")
        if len(blocks) < k:
            raise SplitError(f"only {len(blocks)} nonempty blocks for k={k} folds")
        perm = rng_from(seed).permutation(len(blocks))
        splits = []
        for fold_blocks in _deal_round_robin(blocks[perm], k):
            test = np.flatnonzero(np.isin(block, fold_blocks))
            splits.append((_complement(n, test), test))
        return _plan(splits, "rectangular_tiles", params, seed)
    raise SplitError(f"unknown mode {mode!r}")


def clustered_groups(source, k: int, seed: int) -> ResamplingPlan:
    """k-fold CV with folds from k-means clustering of coordinates or features.

    The clustering runs on a canonically sorted view of the rows, so the plan
    is independent of row order.
    """
    X = np.asarray(source, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if k < 2:
        raise SplitError(f"k must be >= 2, got {k}")
    order = np.lexsort(X.T[::-1])  # canonical row order: sort by column 0, then 1, ...
    result = kmeans(X[order], k, seed, n_init=KMEANS_RESTARTS, max_iter=KMEANS_MAX_ITER)
    labels = np.empty(len(X), dtype=np.int64)
    labels[order] = result.labels
    n = len(X)
    splits = []
    for j in range(k):
        test = np.flatnonzero(labels == j)
        splits.append((_complement(n, test), test))
    return _plan(splits, "clustered_groups", {"n": n, "k": k}, seed)


def loo_buffer(coords, buffer_radius: float = 0.0) -> ResamplingPlan:
    """Leave-one-out CV with a circular buffer around each test point.

    Split i tests point i and trains on all points strictly farther than
    `buffer_radius` from it. Radius 0 is standard leave-one-out (points
    coincident with the test point are still excluded).
    """
    coords = _as_coords(coords)
    if buffer_radius < 0:
        raise SplitError("buffer_radius must be >= 0")
    n = len(coords)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    splits = []
    for i in range(n):
        train = np.flatnonzero(dist[i] > buffer_radius)
        if train.size == 0:
            raise SplitError(f"buffer radius {buffer_radius} leaves no training data for point {i}")
        splits.append((train, np.array([i])))
    return _plan(splits, "loo_buffer", {"n": n, "buffer_radius": buffer_radius})


def leave_one_disc_out(coords, k: int, disc_radius: float, buffer_radius: float = 0.0,
                       seed: int = 0) -> ResamplingPlan:
    """k splits testing all points inside a randomly placed disc.

    Disc centers are drawn uniformly in the coordinate bounding box; discs
    capturing no point are redrawn (bounded retries). Training data lie
    strictly beyond disc_radius + buffer_radius from the disc center.
    """
    coords = _as_coords(coords)
    if k < 1:
        raise SplitError(f"k must be >= 1, got {k}")
    if disc_radius <= 0:
        raise SplitError("disc_radius must be > 0")
    if buffer_radius < 0:
        raise SplitError("buffer_radius must be >= 0")
    rng = rng_from(seed)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    splits = []
    centers = []
    attempts = 0
    while len(splits) < k:
        if attempts >= DISC_RETRIES * k:
            raise SplitError(f"could not place {k} nonempty discs within {attempts} attempts")
        attempts += 1
        center = lo + rng.random(2) * (hi - lo)
        dist = np.sqrt(((coords - center) ** 2).sum(axis=1))
        test = np.flatnonzero(dist <= disc_radius)
        train = np.flatnonzero(dist > disc_radius + buffer_radius)
        if test.size == 0 or train.size == 0:
            continue
        centers.append((float(center[0]), float(center[1])))
        splits.append((train, test))
    params = {"k": k, "disc_radius": disc_radius, "buffer_radius": buffer_radius,
              "centers": tuple(centers)}
    return _plan(splits, "leave_one_disc_out", params, seed)


def geo_units(unit_ids, mode: str = "one_unit_per_fold", k: int | None = None,
              seed: int = 0) -> ResamplingPlan:
    """Spatial CV over pre-existing geographical units.

    mode "one_unit_per_fold" holds out each unit once (leave-one-unit-out);
    mode "units_to_k_folds" randomly deals units to k folds, exactly like
    grouped_kfold with units as groups.
    """
    unit_ids = np.asarray(unit_ids)
    ids = np.unique(unit_ids)
    n = len(unit_ids)
    if mode == "one_unit_per_fold":
        if len(ids) < 2:
            raise SplitError("need at least 2 distinct units")
        splits = []
        for u in ids:
            test = np.flatnonzero(unit_ids == u)
            splits.append((_complement(n, test), test))
        return _plan(splits, "geo_units", {"mode": mode, "units": len(ids)})
    if mode == "units_to_k_folds":
        if k is None:
            raise SplitError("units_to_k_folds requires k")
        plan = grouped_kfold(unit_ids, k, seed)
        return ResamplingPlan(splits=plan.splits, scheme="geo_units",
                              params={"mode": mode, "units": len(ids), "k": k}, seed=seed)
    raise SplitError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# temporal schemes

def _season_values(season) -> tuple[np.ndarray, int]:
    s = np.asarray(season, dtype=np.int64)
    if s.size == 0:
        raise SplitError("empty season vector")
    smax = int(s.max())
    present = np.unique(s)
    expected = np.arange(1, smax + 1)
    if not np.array_equal(present, expected):
        raise SplitError(f"seasons must cover 1..{smax} without gaps, got {present.tolist()}")
    return s, smax


def timeseries_cv(season, gap: int = 0) -> ResamplingPlan:
    """Season-level prequential validation: train on seasons 1..j, test season j+1+gap.

    Models are re-learned once per season rather than per observation. Note
    that S observed seasons yield S-1-gap evaluations.
    """
    if gap < 0:
        raise SplitError("gap must be >= 0")
    s, S = _season_values(season)
    if S < 2 + gap:
        raise SplitError(f"need at least {2 + gap} seasons for gap={gap}, got {S}")
    splits = []
    for j in range(1, S - gap):
        train = np.flatnonzero(s <= j)
        test = np.flatnonzero(s == j + 1 + gap)
        splits.append((train, test))
    return _plan(splits, "timeseries_cv", {"seasons": S, "gap": gap})


def out_of_sample(season, test_seasons: int = 1, gap: int = 0) -> ResamplingPlan:
    """Single chronological split with the test block at the end of the period.

    The `gap` seasons immediately preceding the test block are excluded from
    training, estimating the error expected `gap + 1` seasons ahead.
    """
    if test_seasons < 1:
        raise SplitError("test_seasons must be >= 1")
    if gap < 0:
        raise SplitError("gap must be >= 0")
    s, S = _season_values(season)
    last_train = S - test_seasons - gap
    if last_train < 1:
        raise SplitError(f"no training seasons remain (S={S}, test_seasons={test_seasons}, gap={gap})")
    train = np.flatnonzero(s <= last_train)
    test = np.flatnonzero(s > S - test_seasons)
    return _plan([(train, test)], "out_of_sample",
                 {"seasons": S, "test_seasons": test_seasons, "gap": gap})


# ---------------------------------------------------------------------------
# plan serialization

def write_plan(plan: ResamplingPlan, path) -> None:
    """Line-oriented text serialization used by the CLI for auditability."""
    with open(path, "w") as fh:
        fh.write(f"# scheme={plan.scheme}\n")
        fh.write(f"# seed={plan.seed}\n")
        for key in sorted(plan.params):
            fh.write(f"# {key}={plan.params[key]!r}\n")
        for j, (train, test) in enumerate(plan.splits):
            fh.write(f"split {j}: train={','.join(map(str, train))} "
                     f"test={','.join(map(str, test))}\n")


def read_plan(path) -> ResamplingPlan:
    scheme, seed, params, splits = "unknown", None, {}, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                key, _, value = body.partition("=")
                key = key.strip()
                value = value.strip()
                if key == "scheme":
                    scheme = value
                elif key == "seed":
                    seed = None if value == "None" else int(value)
                else:
                    params[key] = value
                continue
            head, _, rest = line.partition(":")
            if not head.startswith("split"):
                raise SplitError(f"malformed plan line: {line!r}")
            fields = dict(part.split("=", 1) for part in rest.split())
            train = tuple(int(v) for v in fields["train"].split(","))
            test = tuple(int(v) for v in fields["test"].split(","))
            splits.append((train, test))
    if not splits:
        raise SplitError(f"{path}: no splits found")
    return ResamplingPlan(splits=tuple(splits), scheme=scheme, params=params, seed=seed)
