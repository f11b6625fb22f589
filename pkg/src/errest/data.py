"""Tabular data model with typed metadata roles.

A Dataset couples a feature matrix with a label column and optional metadata
columns (cluster id, planar coordinates, geographic unit, inclusion
probability, time, season). Datasets are immutable after construction and can
be shared freely across parallel workers.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .hierarchy import CategoryTree

#: column roles accepted by load_dataset / write_dataset
ROLES = ("feature", "label", "cluster", "coord_x", "coord_y", "unit", "pi", "time", "season")

LABEL_KINDS = ("regression", "class", "hierarchical")


class DatasetError(ValueError):
    """Raised when a dataset violates its construction invariants."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix + label vector + role-tagged metadata columns.

    `label_kind` is one of "regression" (float labels), "class" (integer class
    ids) or "hierarchical" (leaf-node ids of the attached `tree`).
    """

    features: np.ndarray
    label: np.ndarray
    label_kind: str = "regression"
    cluster_id: np.ndarray | None = None
    coords: np.ndarray | None = None
    unit_id: np.ndarray | None = None
    inclusion_prob: np.ndarray | None = None
    time: np.ndarray | None = None
    season: np.ndarray | None = None
    population_size: int | None = None
    tree: CategoryTree | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise DatasetError("features must be a 2-d matrix")
        n, p = X.shape
        if n < 1 or p < 1:
            raise DatasetError(f"need n >= 1 and p >= 1, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DatasetError("features contain non-finite values")
        object.__setattr__(self, "features", _readonly(X))

        if self.label_kind not in LABEL_KINDS:
            raise DatasetError(f"unknown label_kind {self.label_kind!r}")
        if self.label_kind == "regression":
            y = np.asarray(self.label, dtype=np.float64)
            if not np.all(np.isfinite(y)):
                raise DatasetError("labels contain non-finite values")
        elif self.label_kind == "class":
            y = np.asarray(self.label, dtype=np.int64)
        else:
            y = np.asarray(self.label, dtype=object)
            if self.tree is None:
                raise DatasetError("hierarchical labels require an attached CategoryTree")
            leaves = set(self.tree.leaves)
            for v in y:
                if v not in leaves:
                    raise DatasetError(f"label {v!r} is not a leaf of the attached tree")
        if y.shape != (n,):
            raise DatasetError(f"label length {y.shape} does not match n={n}")
        object.__setattr__(self, "label", _readonly(y))

        for name, dtype in (("cluster_id", np.int64), ("unit_id", np.int64), ("season", np.int64)):
            col = getattr(self, name)
            if col is not None:
                col = np.asarray(col, dtype=dtype)
                if col.shape != (n,):
                    raise DatasetError(f"{name} length does not match n={n}")
                object.__setattr__(self, name, _readonly(col))

        for name in ("inclusion_prob", "time"):
            col = getattr(self, name)
            if col is not None:
                col = np.asarray(col, dtype=np.float64)
                if col.shape != (n,):
                    raise DatasetError(f"{name} length does not match n={n}")
                if not np.all(np.isfinite(col)):
                    raise DatasetError(f"{name} contains non-finite values")
                object.__setattr__(self, name, _readonly(col))

        if self.inclusion_prob is not None:
            pi = self.inclusion_prob
            if np.any(pi <= 0.0) or np.any(pi > 1.0):
                raise DatasetError("inclusion probability out of range (0, 1]")

        if self.coords is not None:
            c = np.asarray(self.coords, dtype=np.float64)
            if c.shape != (n, 2):
                raise DatasetError(f"coords must have shape ({n}, 2), got {c.shape}")
            if not np.all(np.isfinite(c)):
                raise DatasetError("coords contain non-finite values")
            object.__setattr__(self, "coords", _readonly(c))

        if self.population_size is not None:
            N = int(self.population_size)
            if N < 1:
                raise DatasetError("population_size must be positive")
            if self.inclusion_prob is not None and self.inclusion_prob.sum() > N + 1e-9:
                raise DatasetError("sum of inclusion probabilities exceeds population_size")
            object.__setattr__(self, "population_size", N)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        """New Dataset with exactly the selected rows, in the given order.

        All metadata columns are sliced consistently; population_size and the
        attached tree carry over unchanged.
        """
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            raise DatasetError("empty index list")
        if idx.min() < 0 or idx.max() >= self.n:
            raise DatasetError(f"index out of range [0, {self.n})")

        def take(col):
            return None if col is None else col[idx]

        return Dataset(
            features=self.features[idx],
            label=self.label[idx],
            label_kind=self.label_kind,
            cluster_id=take(self.cluster_id),
            coords=take(self.coords),
            unit_id=take(self.unit_id),
            inclusion_prob=take(self.inclusion_prob),
            time=take(self.time),
            season=take(self.season),
            population_size=self.population_size,
            tree=self.tree,
        )


def subset(d: Dataset, idx) -> Dataset:
    return d.subset(idx)


def derive_season(time: np.ndarray, n_seasons: int, t_min: float = 0.0, t_max: float = 1.0) -> np.ndarray:
    """Equal-width binning of continuous time into season indices 1..n_seasons."""
    t = np.asarray(time, dtype=np.float64)
    if n_seasons < 1:
        raise DatasetError("n_seasons must be >= 1")
    width = (t_max - t_min) / n_seasons
    if width <= 0:
        raise DatasetError("t_max must exceed t_min")
    s = np.floor((t - t_min) / width).astype(np.int64) + 1
    return np.clip(s, 1, n_seasons)


def default_schema(columns) -> dict[str, str]:
    """Canonical role mapping by column name: x* -> feature, y -> label, etc."""
    fixed = {"y": "label", "cluster": "cluster", "coord_x": "coord_x", "coord_y": "coord_y",
             "unit": "unit", "pi": "pi", "time": "time", "season": "season"}
    schema = {}
    for c in columns:
        if c in fixed:
            schema[c] = fixed[c]
        elif c.startswith("x"):
            schema[c] = "feature"
        else:
            raise DatasetError(f"cannot infer a role for column {c!r}; pass an explicit schema")
    return schema


def _parse_float(text: str, column: str, row: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DatasetError(f"column {column!r}, row {row}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v):
        raise DatasetError(f"column {column!r}, row {row}: non-finite value {text!r}")
    return v


def load_dataset(path, schema: dict[str, str] | None = None, *,
                 tree: CategoryTree | None = None,
                 label_kind: str = "auto",
                 population_size: int | None = None) -> Dataset:
    """Load a CSV with a header row into a Dataset.

    `schema` maps column names to roles (one of ROLES); when omitted, the
    canonical names produced by write_dataset are assumed. Feature columns are
    ordered as they appear in the file. Missing values are rejected.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise DatasetError(f"{path}: no data rows")

    if schema is None:
        schema = default_schema(header)
    unknown = set(schema) - set(header)
    if unknown:
        raise DatasetError(f"schema names absent columns: {sorted(unknown)}")
    for col, role in schema.items():
        if role not in ROLES:
            raise DatasetError(f"unknown role {role!r} for column {col!r}")
    for role in ("label", "cluster", "coord_x", "coord_y", "unit", "pi", "time", "season"):
        holders = [c for c, r in schema.items() if r == role]
        if len(holders) > 1:
            raise DatasetError(f"role {role!r} assigned to multiple columns: {holders}")
    if "label" not in schema.values():
        raise DatasetError("no column carries the label role")
    if not any(r == "feature" for r in schema.values()):
        raise DatasetError("no column carries the feature role")
    has_x = "coord_x" in schema.values()
    has_y = "coord_y" in schema.values()
    if has_x != has_y:
        raise DatasetError("coord_x and coord_y must be assigned together")

    col_idx = {c: header.index(c) for c in schema}
    feat_cols = [c for c in header if schema.get(c) == "feature"]
    n = len(rows)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DatasetError(f"row {i}: expected {len(header)} fields, got {len(row)}")

    X = np.empty((n, len(feat_cols)))
    for j, c in enumerate(feat_cols):
        k = col_idx[c]
        X[:, j] = [_parse_float(rows[i][k], c, i) for i in range(n)]

    def column(role):
        for c, r in schema.items():
            if r == role:
                return [rows[i][col_idx[c]] for i in range(n)], c
        return None, None

    raw_label, label_col = column("label")
    if label_kind == "auto":
        if tree is not None:
            label_kind = "hierarchical"
        else:
            try:
                vals = [_parse_float(v, label_col, i) for i, v in enumerate(raw_label)]
                label_kind = "class" if all(v == int(v) for v in vals) and all("." not in s for s in raw_label) else "regression"
            except DatasetError:
                raise DatasetError(
                    f"column {label_col!r} is not numeric; pass tree= for hierarchical labels") from None
    if label_kind == "hierarchical":
        label = np.array(raw_label, dtype=object)
    elif label_kind == "class":
        label = np.array([int(_parse_float(v, label_col, i)) for i, v in enumerate(raw_label)])
    else:
        label = np.array([_parse_float(v, label_col, i) for i, v in enumerate(raw_label)])

    def numeric(role, dtype=np.float64):
        raw, c = column(role)
        if raw is None:
            return None
        vals = [_parse_float(v, c, i) for i, v in enumerate(raw)]
        return np.asarray(vals, dtype=dtype)

    cx = numeric("coord_x")
    coords = np.column_stack([cx, numeric("coord_y")]) if cx is not None else None

    return Dataset(
        features=X,
        label=label,
        label_kind=label_kind,
        cluster_id=numeric("cluster", np.int64),
        coords=coords,
        unit_id=numeric("unit", np.int64),
        inclusion_prob=numeric("pi"),
        time=numeric("time"),
        season=numeric("season", np.int64),
        population_size=population_size,
        tree=tree,
    )


def write_dataset(d: Dataset, path) -> None:
    """Write a Dataset as CSV with canonical role-named columns.

    Floats are serialized with full round-trip precision, so a load_dataset
    of the output reproduces every value bit-exactly.
    """
    header = [f"x{j + 1}" for j in range(d.p)] + ["y"]
    cols = [d.features[:, j] for j in range(d.p)]
    if d.label_kind == "hierarchical":
        cols.append([str(v) for v in d.label])
    else:
        cols.append(d.label)
    for name, col in (("cluster", d.cluster_id), ("unit", d.unit_id), ("season", d.season),
                      ("pi", d.inclusion_prob), ("time", d.time)):
        if col is not None:
            header.append(name)
            cols.append(col)
    if d.coords is not None:
        header.extend(["coord_x", "coord_y"])
        cols.extend([d.coords[:, 0], d.coords[:, 1]])

    def fmt(v):
        if isinstance(v, str):
            return v
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return repr(float(v))

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(d.n):
            writer.writerow([fmt(col[i]) for col in cols])
