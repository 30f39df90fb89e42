"""Ultrametric trees: UPGMA construction, Newick output, clade comparison.

Trees are strictly binary and immutable. Every node carries a height (the
distance-units position of the merge, half the merge distance); leaves sit
at height 0, so the cophenetic distance between two leaves is twice the
height of their lowest common ancestor. Ultrametricity (parent height >=
child heights) is enforced by the node constructor itself, so no invalid
tree can ever be built.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ModelDomainError, TreeError, UndefinedPairError

_NEWICK_PLAIN = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-|/"
)


@dataclass(frozen=True)
class TreeNode:
    """A node of a rooted ultrametric tree.

    Leaves have a label, height 0, and no children; internal nodes have
    exactly two children and a height at least as large as theirs.
    """

    height: float
    label: str | None = None
    children: tuple["TreeNode", ...] = ()

    def __post_init__(self) -> None:
        if self.children:
            if len(self.children) != 2:
                raise TreeError("internal nodes must have exactly two children")
            if self.label is not None:
                raise TreeError("internal nodes are unlabeled")
            if any(self.height < c.height for c in self.children):
                raise TreeError(
                    f"ultrametricity violated: height {self.height} below a child"
                )
        else:
            if self.label is None:
                raise TreeError("leaves must carry a label")
            if self.height != 0.0:
                raise TreeError("leaves sit at height 0")
        if self.height < 0:
            raise TreeError("heights are nonnegative")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @cached_property
    def leaf_labels(self) -> frozenset[str]:
        if self.is_leaf:
            return frozenset((self.label,))
        return self.children[0].leaf_labels | self.children[1].leaf_labels

    @cached_property
    def min_leaf(self) -> str:
        if self.is_leaf:
            return self.label
        return min(c.min_leaf for c in self.children)

    def leaves(self) -> list["TreeNode"]:
        if self.is_leaf:
            return [self]
        return self.children[0].leaves() + self.children[1].leaves()

    def internal_nodes(self) -> list["TreeNode"]:
        if self.is_leaf:
            return []
        out = [self]
        for c in self.children:
            out.extend(c.internal_nodes())
        return out


def leaf(label: str) -> TreeNode:
    return TreeNode(height=0.0, label=label)


def _join(height: float, a: TreeNode, b: TreeNode) -> TreeNode:
    """Merge two subtrees, children in canonical (smallest-leaf-first) order."""
    first, second = (a, b) if a.min_leaf <= b.min_leaf else (b, a)
    return TreeNode(height=height, children=(first, second))


def canonical(node: TreeNode) -> TreeNode:
    """The same tree with children everywhere ordered by smallest leaf label."""
    if node.is_leaf:
        return node
    return _join(node.height, canonical(node.children[0]), canonical(node.children[1]))


def _unpack_matrix(matrix, labels) -> tuple[list[str], np.ndarray]:
    if labels is None:
        languages = getattr(matrix, "languages", None)
        if languages is None:
            raise TypeError("pass a DistanceMatrix/TimeMatrix or an array plus labels")
        overlaps = getattr(matrix, "overlaps", None)
        if overlaps is not None:
            undefined = matrix.undefined_pairs()
            if undefined:
                raise UndefinedPairError(
                    "matrix has undefined entries; impute or drop these pairs first: "
                    + ", ".join(f"{a}/{b}" for a, b in undefined)
                )
        saturated = getattr(matrix, "saturated", None)
        if saturated is not None and bool(np.any(saturated)):
            pairs = matrix.saturated_pairs()
            raise ModelDomainError(
                "matrix has saturated entries; resolve them before clustering: "
                + ", ".join(f"{a}/{b}" for a, b in pairs)
            )
        return list(languages), np.asarray(matrix.values, dtype=float)
    return list(labels), np.asarray(matrix, dtype=float)


def upgma(matrix, labels: Iterable[str] | None = None) -> TreeNode:
    """Average-linkage agglomerative clustering into an ultrametric tree.

    Repeatedly merges the two clusters at minimum average distance; the
    merge node sits at half the merge distance, and the merged cluster's
    distance to any other is the size-weighted mean of its members'
    distances. Accepts a distance or time matrix object, or a square
    array plus labels.

    Exact ties are broken toward the pair whose clusters contain the
    smallest original indices, so results are reproducible across runs
    and platforms.
    """
    names, d = _unpack_matrix(matrix, labels)
    n = len(names)
    if n < 2:
        raise TreeError("need at least 2 taxa to build a tree")
    if d.shape != (n, n):
        raise TreeError(f"matrix shape {d.shape} does not match {n} labels")
    if not np.all(np.isfinite(d)):
        raise TreeError("matrix entries must all be finite and defined")
    if np.any(np.diag(d) != 0):
        raise TreeError("matrix diagonal must be zero")
    if not np.array_equal(d, d.T):
        raise TreeError("matrix must be symmetric")
    if np.any(d < 0):
        raise TreeError("matrix entries must be nonnegative")

    # cluster id -> (node, size, smallest original index); merged clusters
    # get fresh ids with rows appended to the working distance table
    total = 2 * n - 1
    work = np.zeros((total, total), dtype=float)
    work[:n, :n] = d
    nodes: dict[int, TreeNode] = {i: leaf(name) for i, name in enumerate(names)}
    sizes = {i: 1 for i in range(n)}
    min_orig = {i: i for i in range(n)}
    active = list(range(n))
    next_id = n

    while len(active) > 1:
        best = None
        best_key = None
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                i, j = active[ai], active[bi]
                dist = work[i, j]
                key = (dist,) + tuple(sorted((min_orig[i], min_orig[j])))
                if best_key is None or key < best_key:
                    best_key = key
                    best = (i, j)
        i, j = best
        merge_dist = work[i, j]
        node_i, node_j = nodes[i], nodes[j]
        # weighted mean can round a half-ulp below an earlier merge; clamp
        # so ultrametricity stays exact
        height = max(merge_dist / 2.0, node_i.height, node_j.height)
        new_node = _join(height, node_i, node_j)

        ni, nj = sizes[i], sizes[j]
        for k in active:
            if k in (i, j):
                continue
            dik, djk = work[i, k], work[j, k]
            # equal branches average to themselves; keeps ultrametric
            # input bit-exact
            if dik == djk:
                dnew = dik
            else:
                dnew = (ni * dik + nj * djk) / (ni + nj)
            work[next_id, k] = work[k, next_id] = dnew

        nodes[next_id] = new_node
        sizes[next_id] = ni + nj
        min_orig[next_id] = min(min_orig[i], min_orig[j])
        active = [k for k in active if k not in (i, j)] + [next_id]
        for stale in (i, j):
            del nodes[stale], sizes[stale], min_orig[stale]
        next_id += 1

    return nodes[active[0]]


def cophenetic_matrix(tree: TreeNode, order: list[str] | None = None) -> np.ndarray:
    """Pairwise leaf distances implied by the tree: twice the LCA height."""
    labels = order if order is not None else sorted(tree.leaf_labels)
    index = {name: k for k, name in enumerate(labels)}
    if len(index) != len(labels) or set(index) != tree.leaf_labels:
        raise TreeError("order must be a permutation of the tree's leaf labels")
    out = np.zeros((len(labels), len(labels)), dtype=float)
    for node in tree.internal_nodes():
        left, right = node.children
        for x in left.leaf_labels:
            for y in right.leaf_labels:
                i, j = index[x], index[y]
                out[i, j] = out[j, i] = 2.0 * node.height
    return out


def clades(tree: TreeNode) -> frozenset[frozenset[str]]:
    """The leaf-label set under each internal node (the full set included)."""
    return frozenset(node.leaf_labels for node in tree.internal_nodes())


def restrict(tree: TreeNode, keep: Iterable[str]) -> TreeNode:
    """Prune leaves outside ``keep``, suppressing single-child nodes.

    Surviving nodes keep their heights. The result is re-canonicalized
    because pruning can change which subtree holds the smallest label.
    """
    keepset = frozenset(keep)
    missing = keepset - tree.leaf_labels
    if missing:
        raise TreeError(f"labels not in tree: {sorted(missing)}")

    def prune(node: TreeNode) -> TreeNode | None:
        if node.is_leaf:
            return node if node.label in keepset else None
        kids = [p for c in node.children if (p := prune(c)) is not None]
        if not kids:
            return None
        if len(kids) == 1:
            return kids[0]
        return _join(node.height, kids[0], kids[1])

    pruned = prune(tree)
    if pruned is None:
        raise TreeError("restriction removed every leaf")
    return pruned


class CladeOverlap(NamedTuple):
    shared: int
    only1: int
    only2: int
    jaccard: float


def clade_overlap(t1: TreeNode, t2: TreeNode) -> CladeOverlap:
    """Compare the clade sets of two trees on their common leaves.

    Both trees are first restricted to the shared leaf set; the Jaccard
    index is shared / (shared + unique-to-1 + unique-to-2). At least 3
    common leaves are required for the comparison to mean anything.
    """
    common = t1.leaf_labels & t2.leaf_labels
    if len(common) < 3:
        raise TreeError(
            f"only {len(common)} common leaves; need at least 3 to compare clades"
        )
    c1 = clades(restrict(t1, common))
    c2 = clades(restrict(t2, common))
    shared = len(c1 & c2)
    only1 = len(c1 - c2)
    only2 = len(c2 - c1)
    return CladeOverlap(shared, only1, only2, shared / (shared + only1 + only2))


# ---------------------------------------------------------------------------
# serialization

def _format_length(x: float) -> str:
    if x == int(x):
        return str(int(x))
    return repr(x)


def _quote_label(label: str) -> str:
    if label and set(label) <= _NEWICK_PLAIN:
        return label
    return "'" + label.replace("'", "''") + "'"


def to_newick(tree: TreeNode) -> str:
    """Canonical Newick string with branch lengths.

    Branch length = parent height - child height; children are ordered
    smallest-leaf-first; labels needing it are single-quoted.
    """
    tree = canonical(tree)

    def render(node: TreeNode, parent_height: float) -> str:
        length = _format_length(parent_height - node.height)
        if node.is_leaf:
            return f"{_quote_label(node.label)}:{length}"
        inner = ",".join(render(c, node.height) for c in node.children)
        return f"({inner}):{length}"

    if tree.is_leaf:
        return f"{_quote_label(tree.label)};"
    inner = ",".join(render(c, tree.height) for c in tree.children)
    return f"({inner});"


def tree_to_dict(tree: TreeNode) -> dict:
    """JSON-ready nested dict ``{label?, height, children[]}``."""
    if tree.is_leaf:
        return {"label": tree.label, "height": 0.0}
    return {
        "height": tree.height,
        "children": [tree_to_dict(c) for c in tree.children],
    }


def tree_from_dict(data: dict) -> TreeNode:
    """Inverse of :func:`tree_to_dict`; the result is canonicalized."""
    kids = data.get("children")
    if not kids:
        return leaf(data["label"])
    if len(kids) != 2:
        raise TreeError("tree JSON nodes must have exactly two children")
    return _join(
        float(data["height"]), tree_from_dict(kids[0]), tree_from_dict(kids[1])
    )


def write_tree_files(tree: TreeNode, out_dir: str | Path,
                     stem: str = "tree") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.nwk", out / f"{stem}.json"]
    paths[0].write_text(to_newick(tree) + "\n", encoding="utf-8")
    paths[1].write_text(
        json.dumps(tree_to_dict(tree), indent=2) + "\n", encoding="utf-8"
    )
    return paths


def read_tree_json(path: str | Path) -> TreeNode:
    with open(path, encoding="utf-8") as fh:
        return tree_from_dict(json.load(fh))
