"""Category trees and the path/ancestor algebra used by hierarchical metrics.

Nodes carry canonical dotted-string ids ("2.2.1"); every prefix of an id is a
node. The root is synthetic: it is not a class, it is excluded from augmented
label sets, and paths between different top-level branches route through it
(counting its two incident edges).
"""

import numpy as np


class TreeError(ValueError):
    """Raised for malformed category trees or unknown node ids."""


class CategoryTree:
    """Rooted category tree built from the dotted leaf labels of its classes.

    Immutable after construction. Internally nodes are interned to integer
    indices and root-to-node paths are stored as a padded matrix so metric
    computations can be vectorized over many observations.
    """

    def __init__(self, leaf_labels):
        labels = [str(x) for x in leaf_labels]
        if not labels:
            raise TreeError("need at least one leaf label")
        if len(set(labels)) != len(labels):
            raise TreeError("duplicate leaf labels")

        nodes: set[str] = set()
        for lab in labels:
            parts = lab.split(".")
            if any(p == "" for p in parts):
                raise TreeError(f"malformed label {lab!r}")
            for k in range(1, len(parts) + 1):
                nodes.add(".".join(parts[:k]))
        leaf_set = set(labels)
        for lab in labels:
            prefix = lab + "."
            if any(other.startswith(prefix) for other in nodes):
                raise TreeError(f"label {lab!r} is declared a leaf but has descendants")

        self.nodes: list[str] = sorted(nodes, key=lambda s: ([*map(_part_key, s.split("."))]))
        self.index: dict[str, int] = {name: i for i, name in enumerate(self.nodes)}
        self.parent: dict[str, str | None] = {}
        self.children: dict[str, list[str]] = {None: []}
        for name in self.nodes:
            head, _, _ = name.rpartition(".")
            parent = head if head else None
            self.parent[name] = parent
            self.children.setdefault(name, [])
            self.children.setdefault(parent, []).append(name)
        self.depth: dict[str, int] = {name: name.count(".") + 1 for name in self.nodes}
        self.leaves: list[str] = [n for n in self.nodes if not self.children[n]]
        assert set(self.leaves) == leaf_set
        self.height: int = max(self.depth[l] for l in self.leaves)

        # root-to-node paths as interned indices, padded with -1
        self._paths = np.full((len(self.nodes), self.height), -1, dtype=np.int64)
        self._depths = np.empty(len(self.nodes), dtype=np.int64)
        for name, i in self.index.items():
            chain = ancestry(name)
            self._depths[i] = len(chain)
            for d, anc in enumerate(chain):
                self._paths[i, d] = self.index[anc]

    def __contains__(self, node: str) -> bool:
        return node in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, CategoryTree) and self.nodes == other.nodes

    def __repr__(self) -> str:
        return f"CategoryTree({len(self.leaves)} leaves, {len(self.nodes)} nodes, height {self.height})"

    @property
    def internal_nodes(self) -> list[str]:
        return [n for n in self.nodes if self.children[n]]

    def check(self, node: str) -> str:
        if node not in self.index:
            raise TreeError(f"unknown node {node!r}")
        return node

    def node_indices(self, labels) -> np.ndarray:
        """Intern an array of node ids, raising on unknown entries."""
        try:
            return np.fromiter((self.index[str(v)] for v in labels), dtype=np.int64, count=len(labels))
        except KeyError as e:
            raise TreeError(f"unknown node {e.args[0]!r}") from None

    def paths_of(self, idx: np.ndarray) -> np.ndarray:
        return self._paths[idx]

    def depths_of(self, idx: np.ndarray) -> np.ndarray:
        return self._depths[idx]


def _part_key(part: str):
    # numeric components sort numerically so "10" follows "9"
    return (0, int(part), "") if part.isdigit() else (1, 0, part)


def ancestry(node: str) -> list[str]:
    """Dotted prefixes of `node` from the top level down to the node itself."""
    parts = node.split(".")
    return [".".join(parts[:k]) for k in range(1, len(parts) + 1)]


def parse_tree(leaf_labels) -> CategoryTree:
    """Build a CategoryTree from dotted leaf labels (prefix closure implied)."""
    return CategoryTree(leaf_labels)


def augment(tree: CategoryTree, node: str) -> frozenset:
    """The node together with all its ancestors, root excluded."""
    tree.check(node)
    return frozenset(ancestry(node))


def path_edges(tree: CategoryTree, a: str, b: str) -> int:
    """Number of edges on the unique tree path between two nodes.

    Paths between disjoint top-level branches pass through the synthetic root.
    Equals |augment(a) symmetric-difference augment(b)|.
    """
    tree.check(a)
    tree.check(b)
    pa, pb = ancestry(a), ancestry(b)
    common = 0
    for x, y in zip(pa, pb):
        if x != y:
            break
        common += 1
    return len(pa) + len(pb) - 2 * common


def read_tree(path) -> CategoryTree:
    """Read a tree file: newline-separated dotted leaf labels."""
    with open(path) as fh:
        labels = [line.strip() for line in fh if line.strip()]
    return CategoryTree(labels)


def write_tree(tree: CategoryTree, path) -> None:
    with open(path, "w") as fh:
        for leaf in tree.leaves:
            fh.write(leaf + "\n")
